//! Shared helpers for the integration suites: a brute-force time-domain
//! channel oracle and a deliberately naive per-edge reference implementation
//! of the bilinear GaBP receiver.
//!
//! Both are written from the defining equations with explicit loops and
//! explicit leave-one-out sums, making no use of the library's incremental
//! row-total algebra or genie fast paths. Agreement between these references
//! and the optimized implementations is what the `oracles` and
//! `engine_reference` suites assert.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use afdm_sim::dd_channel::{ChannelDictionary, PathSet};
use afdm_sim::frame::Frame;
use afdm_sim::sysconfig::SystemParams;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Variance floor mirrored from the receiver under test.
const VAR_FLOOR: f64 = 1e-15;

// ---------------------------------------------------------------------------
// Brute-force channel oracle
// ---------------------------------------------------------------------------

/// Receive all `G` polyphase streams by direct linear convolution against an
/// explicitly chirp-periodic-extended copy of the transmit signal.
///
/// The transmit block is prefixed sample-by-sample with
/// `s[-m] = s[N-m] e^(-j 2 pi c1 (N^2 - 2 N m))`, each path is applied as a
/// plain (non-circular) delay into that extension, and the per-stream Doppler
/// phase `e^(-j 2 pi f_p (g + k G) / (N G))` multiplies each output sample.
/// No modular index arithmetic and none of the library's channel matrices are
/// involved.
pub fn oracle_receive(
    paths: &PathSet,
    s: &[Complex64],
    noise: Option<&[Vec<Complex64>]>,
    params: &SystemParams,
) -> Vec<Vec<Complex64>> {
    let n = params.n;
    let big_g = params.g;
    let c1 = params.c1();
    assert_eq!(s.len(), n);
    assert!(params.ell_max < n, "prefix must be shorter than the block");

    // Chirp-periodic extension: index `ell_max + k` holds time sample `k`,
    // with `k` running from `-ell_max` to `N - 1`.
    let nf = n as f64;
    let mut s_ext = vec![ZERO; params.ell_max + n];
    s_ext[params.ell_max..].copy_from_slice(s);
    for m in 1..=params.ell_max {
        let phase = -2.0 * std::f64::consts::PI * c1 * (nf * nf - 2.0 * nf * m as f64);
        s_ext[params.ell_max - m] = s[n - m] * Complex64::from_polar(1.0, phase);
    }

    let mut out = Vec::with_capacity(big_g);
    for g in 0..big_g {
        let mut r = match noise {
            Some(w) => w[g].clone(),
            None => vec![ZERO; n],
        };
        for p in 0..paths.len() {
            let h = paths.gains[p];
            let ell = paths.delays[p];
            let f_p = paths.dopplers[p];
            for k in 0..n {
                let arg = -2.0 * std::f64::consts::PI * f_p * (g as f64 + (k * big_g) as f64)
                    / (nf * big_g as f64);
                let doppler = Complex64::from_polar(1.0, arg);
                r[k] += h * doppler * s_ext[params.ell_max + k - ell];
            }
        }
        out.push(r);
    }
    out
}

// ---------------------------------------------------------------------------
// Random draws
// ---------------------------------------------------------------------------

/// `len` i.i.d. `CN(0, 1)` samples.
pub fn rand_cn_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..len)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
        .collect()
}

/// A random path set with explicit bounds, drawn directly rather than via the
/// library's sampler so oracle tests control their own distribution.
pub fn rand_paths(count: usize, params: &SystemParams, rng: &mut ChaCha8Rng) -> PathSet {
    let mut gains = Vec::with_capacity(count);
    let mut delays = Vec::with_capacity(count);
    let mut dopplers = Vec::with_capacity(count);
    for _ in 0..count {
        delays.push(rng.gen_range(0..=params.ell_max));
        dopplers.push(rng.gen_range(-params.f_max..=params.f_max));
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        gains.push(Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2);
    }
    PathSet {
        gains,
        delays,
        dopplers,
    }
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Naive per-edge reference receiver
// ---------------------------------------------------------------------------

/// Per-edge replica state in the same layout as the library's belief state.
#[derive(Clone)]
pub struct NaiveState {
    pub x_hat: Vec<Complex64>,
    pub var_x: Vec<f64>,
    pub h_hat: Vec<Complex64>,
    pub var_h: Vec<f64>,
}

/// Reference receiver: every message is computed by literal summation, every
/// extrinsic (leave-one-out) combination is an explicit sum over the other
/// rows, and nothing is cached between passes.
pub struct NaiveEngine {
    /// `gamma[p][row][col]`.
    gamma: Vec<Vec<Vec<Complex64>>>,
    frame: Frame,
    n: usize,
    gn: usize,
    paths: usize,
    n_p: usize,
    e_s: f64,
    sigma_h_sq: f64,
    n_0: f64,
    beta_x: f64,
    beta_h: f64,
    c_x: f64,
    known_channel: Option<Vec<Complex64>>,
    known_symbols: Option<Vec<Complex64>>,
    initial_gains: Option<Vec<Complex64>>,
    // Full combining sums of the most recent pass of each kind, kept for the
    // consensus readout.
    comb_a_h: Vec<f64>,
    comb_b_h: Vec<Complex64>,
    comb_a_x: Vec<f64>,
    comb_b_x: Vec<Complex64>,
    ran_channel_pass: bool,
    ran_data_pass: bool,
}

impl NaiveEngine {
    pub fn new(dict: &ChannelDictionary, frame: &Frame, params: &SystemParams) -> Self {
        let n = dict.n();
        let gn = dict.gn();
        let paths = dict.n_paths();
        let gamma = (0..paths)
            .map(|p| {
                (0..gn)
                    .map(|row| (0..n).map(|col| dict.entry(p, row, col)).collect())
                    .collect()
            })
            .collect();
        NaiveEngine {
            gamma,
            frame: frame.clone(),
            n,
            gn,
            paths,
            n_p: params.n_p,
            e_s: params.e_s,
            sigma_h_sq: params.sigma_h_sq,
            n_0: params.n_0,
            beta_x: params.beta_x,
            beta_h: params.beta_h,
            c_x: params.c_x(),
            known_channel: None,
            known_symbols: None,
            initial_gains: None,
            comb_a_h: vec![0.0; paths],
            comb_b_h: vec![ZERO; paths],
            comb_a_x: vec![0.0; n],
            comb_b_x: vec![ZERO; n],
            ran_channel_pass: false,
            ran_data_pass: false,
        }
    }

    pub fn with_known_channel(mut self, gains: &[Complex64]) -> Self {
        self.known_channel = Some(gains.to_vec());
        self
    }

    pub fn with_known_symbols(mut self, x: &[Complex64]) -> Self {
        self.known_symbols = Some(x.to_vec());
        self
    }

    pub fn with_initial_gains(mut self, gains: &[Complex64]) -> Self {
        self.initial_gains = Some(gains.to_vec());
        self
    }

    pub fn init(&self) -> NaiveState {
        let mut x_hat = vec![ZERO; self.gn * self.n];
        let mut var_x = vec![0.0; self.gn * self.n];
        for row in 0..self.gn {
            for m in 0..self.n {
                let idx = row * self.n + m;
                if let Some(truth) = &self.known_symbols {
                    x_hat[idx] = truth[m];
                } else if m < self.n_p {
                    x_hat[idx] = self.frame.x[m];
                } else {
                    var_x[idx] = self.e_s;
                }
            }
        }
        let mut h_hat = vec![ZERO; self.gn * self.paths];
        let mut var_h = vec![self.sigma_h_sq; self.gn * self.paths];
        for row in 0..self.gn {
            for p in 0..self.paths {
                let idx = row * self.paths + p;
                if let Some(truth) = &self.known_channel {
                    h_hat[idx] = truth[p];
                    var_h[idx] = 0.0;
                } else if let Some(seed) = &self.initial_gains {
                    h_hat[idx] = seed[p];
                    var_h[idx] =
                        (self.sigma_h_sq - seed[p].norm_sqr()).clamp(0.0, self.sigma_h_sq);
                }
            }
        }
        NaiveState {
            x_hat,
            var_x,
            h_hat,
            var_h,
        }
    }

    /// Replica sum `sum_m gamma_{p:n,m} x_hat_{n,m}` over the full row.
    fn y_h(&self, st: &NaiveState, row: usize, p: usize) -> Complex64 {
        (0..self.n)
            .map(|m| self.gamma[p][row][m] * st.x_hat[row * self.n + m])
            .sum()
    }

    pub fn channel_pass(&mut self, st: &mut NaiveState, y: &[Complex64]) {
        let (n, gn, paths) = (self.n, self.gn, self.paths);
        // Per-edge soft IC signals and conditional variances, all from the
        // incoming state.
        let mut ytil = vec![ZERO; gn * paths];
        let mut sig = vec![0.0; gn * paths];
        let mut y_h = vec![ZERO; gn * paths];
        for row in 0..gn {
            for p in 0..paths {
                y_h[row * paths + p] = self.y_h(st, row, p);
            }
        }
        for row in 0..gn {
            for p in 0..paths {
                let mut cancel = ZERO;
                let mut term1 = 0.0;
                let mut term4 = 0.0;
                for q in 0..paths {
                    if q == p {
                        continue;
                    }
                    cancel += st.h_hat[row * paths + q] * y_h[row * paths + q];
                    term1 += st.var_h[row * paths + q] * y_h[row * paths + q].norm_sqr();
                    for m in 0..n {
                        term4 += st.var_h[row * paths + q]
                            * st.var_x[row * n + m]
                            * self.gamma[q][row][m].norm_sqr();
                    }
                }
                let mut term2 = 0.0;
                let mut term5 = 0.0;
                for m in 0..n {
                    let mut eff = ZERO;
                    for q in 0..paths {
                        if q != p {
                            eff += st.h_hat[row * paths + q] * self.gamma[q][row][m];
                        }
                    }
                    term2 += st.var_x[row * n + m] * eff.norm_sqr();
                    term5 += self.sigma_h_sq
                        * st.var_x[row * n + m]
                        * self.gamma[p][row][m].norm_sqr();
                }
                let idx = row * paths + p;
                ytil[idx] = y[row] - cancel;
                sig[idx] = (term1 + term2 + self.n_0 + term4 + term5).max(VAR_FLOOR);
            }
        }
        // Full combining sums (kept for the readout).
        for p in 0..paths {
            self.comb_a_h[p] = (0..gn)
                .map(|row| y_h[row * paths + p].norm_sqr() / sig[row * paths + p])
                .sum();
            self.comb_b_h[p] = (0..gn)
                .map(|row| {
                    y_h[row * paths + p].conj() * ytil[row * paths + p] / sig[row * paths + p]
                })
                .sum();
        }
        // Extrinsic beliefs by explicit leave-one-out summation, then
        // denoising and damped updates.
        let mut new_h = st.h_hat.clone();
        let mut new_vh = st.var_h.clone();
        for row in 0..gn {
            for p in 0..paths {
                let mut a = 0.0;
                let mut b = ZERO;
                for q in 0..gn {
                    if q == row {
                        continue;
                    }
                    let idx = q * paths + p;
                    a += y_h[idx].norm_sqr() / sig[idx];
                    b += y_h[idx].conj() * ytil[idx] / sig[idx];
                }
                let belief_var = 1.0 / a.max(VAR_FLOOR);
                let belief = b * belief_var;
                // Gaussian posterior against the CN(0, sigma_h_sq) prior.
                let (mean, var) = if belief_var.is_finite() {
                    (
                        belief * (self.sigma_h_sq / (belief_var + self.sigma_h_sq)),
                        self.sigma_h_sq * belief_var / (belief_var + self.sigma_h_sq),
                    )
                } else {
                    (ZERO, self.sigma_h_sq)
                };
                let idx = row * paths + p;
                new_h[idx] = mean * self.beta_h + st.h_hat[idx] * (1.0 - self.beta_h);
                new_vh[idx] = self.beta_h * var + (1.0 - self.beta_h) * st.var_h[idx];
            }
        }
        st.h_hat = new_h;
        st.var_h = new_vh;
        self.ran_channel_pass = true;
    }

    pub fn data_pass(&mut self, st: &mut NaiveState, y: &[Complex64]) {
        let (n, gn, paths) = (self.n, self.gn, self.paths);
        if self.n_p == n {
            self.ran_data_pass = true;
            return;
        }
        let mut ytil = vec![ZERO; gn * n];
        let mut sig = vec![0.0; gn * n];
        let mut t2 = vec![ZERO; gn * n];
        for row in 0..gn {
            for m in self.n_p..n {
                let mut eff = ZERO;
                for p in 0..paths {
                    eff += st.h_hat[row * paths + p] * self.gamma[p][row][m];
                }
                t2[row * n + m] = eff;
                // Soft IC of every other column through every path.
                let mut cancel = ZERO;
                let mut term1 = 0.0;
                let mut term5 = 0.0;
                for p in 0..paths {
                    let mut partial = ZERO;
                    for q in 0..n {
                        if q != m {
                            partial += self.gamma[p][row][q] * st.x_hat[row * n + q];
                        }
                    }
                    cancel += st.h_hat[row * paths + p] * partial;
                    term1 += st.var_h[row * paths + p] * partial.norm_sqr();
                    term5 +=
                        self.e_s * st.var_h[row * paths + p] * self.gamma[p][row][m].norm_sqr();
                }
                let mut term2 = 0.0;
                for q in 0..n {
                    if q == m {
                        continue;
                    }
                    let mut eff_q = ZERO;
                    for p in 0..paths {
                        eff_q += st.h_hat[row * paths + p] * self.gamma[p][row][q];
                    }
                    term2 += st.var_x[row * n + q] * eff_q.norm_sqr();
                }
                let mut term4 = 0.0;
                for p in 0..paths {
                    for q in 0..n {
                        if q != m {
                            term4 += st.var_h[row * paths + p]
                                * st.var_x[row * n + q]
                                * self.gamma[p][row][q].norm_sqr();
                        }
                    }
                }
                let idx = row * n + m;
                ytil[idx] = y[row] - cancel;
                sig[idx] = (term1 + term2 + self.n_0 + term4 + term5).max(VAR_FLOOR);
            }
        }
        for m in self.n_p..n {
            self.comb_a_x[m] = (0..gn)
                .map(|row| t2[row * n + m].norm_sqr() / sig[row * n + m])
                .sum();
            self.comb_b_x[m] = (0..gn)
                .map(|row| t2[row * n + m].conj() * ytil[row * n + m] / sig[row * n + m])
                .sum();
        }
        let mut new_x = st.x_hat.clone();
        let mut new_vx = st.var_x.clone();
        for row in 0..gn {
            for m in self.n_p..n {
                let mut a = 0.0;
                let mut b = ZERO;
                for q in 0..gn {
                    if q == row {
                        continue;
                    }
                    let idx = q * n + m;
                    a += t2[idx].norm_sqr() / sig[idx];
                    b += t2[idx].conj() * ytil[idx] / sig[idx];
                }
                let belief_var = 1.0 / a.max(VAR_FLOOR);
                let belief = b * belief_var;
                let v = belief_var.max(VAR_FLOOR);
                let denoised = Complex64::new(
                    self.c_x * (2.0 * self.c_x * belief.re / v).tanh(),
                    self.c_x * (2.0 * self.c_x * belief.im / v).tanh(),
                );
                let idx = row * n + m;
                let damped = denoised * self.beta_x + st.x_hat[idx] * (1.0 - self.beta_x);
                new_x[idx] = damped;
                new_vx[idx] = self.beta_x * (self.e_s - damped.norm_sqr())
                    + (1.0 - self.beta_x) * st.var_x[idx];
            }
        }
        st.x_hat = new_x;
        st.var_x = new_vx;
        self.ran_data_pass = true;
    }

    /// Consensus readout mirroring the library: full combining sums of the
    /// last pass of each kind, denoised once without damping.
    pub fn readout(&self, st: &NaiveState) -> (Vec<Complex64>, Vec<Complex64>) {
        let x_data = (self.n_p..self.n)
            .map(|m| {
                if self.ran_data_pass {
                    let denom = self.comb_a_x[m].max(VAR_FLOOR);
                    let belief = self.comb_b_x[m] / denom;
                    let v = (1.0 / denom).max(VAR_FLOOR);
                    Complex64::new(
                        self.c_x * (2.0 * self.c_x * belief.re / v).tanh(),
                        self.c_x * (2.0 * self.c_x * belief.im / v).tanh(),
                    )
                } else {
                    st.x_hat[m]
                }
            })
            .collect();
        let h_est = (0..self.paths)
            .map(|p| {
                if let Some(truth) = &self.known_channel {
                    truth[p]
                } else if self.ran_channel_pass {
                    let denom = self.comb_a_h[p].max(VAR_FLOOR);
                    let belief = self.comb_b_h[p] / denom;
                    let var = 1.0 / denom;
                    belief * (self.sigma_h_sq / (var + self.sigma_h_sq))
                } else {
                    st.h_hat[p]
                }
            })
            .collect();
        (x_data, h_est)
    }

    /// Run a fixed number of iterations (channel pass then data pass, with a
    /// genie-fixed side skipping its pass) and return the consensus outputs
    /// together with the final state.
    pub fn run(
        &mut self,
        y: &[Complex64],
        iters: usize,
    ) -> (Vec<Complex64>, Vec<Complex64>, NaiveState) {
        let mut st = self.init();
        for _ in 0..iters {
            if self.known_channel.is_none() {
                self.channel_pass(&mut st, y);
            }
            if self.known_symbols.is_none() {
                self.data_pass(&mut st, y);
            }
        }
        let (x_data, h_est) = self.readout(&st);
        (x_data, h_est, st)
    }
}
