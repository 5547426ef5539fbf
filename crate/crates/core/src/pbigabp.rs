//! Bilinear Gaussian belief propagation for joint channel estimation and
//! data detection.
//!
//! The observation model is `y_n = sum_p sum_m h_p gamma_{p:n,m} x_m + w_n`
//! over `GN` factor nodes: both the path gains `h_p` and the symbols `x_m`
//! are unknown, coupled bilinearly through the known dictionary entries
//! `gamma_{p:n,m}`. Each iteration runs two passes:
//!
//! 1. **channel pass** — per edge `(n, p)`: soft interference cancellation
//!    of all other gains, a scalar-Gaussian conditional variance, extrinsic
//!    (leave-one-out) combining across the other `GN - 1` rows, a Gaussian
//!    shrinkage denoiser against the `CN(0, sigma_h_sq)` prior, and damped
//!    replica updates;
//! 2. **data pass** — the mirror image per edge `(n, m)` over the data
//!    columns, with a QPSK `tanh` denoiser. The data pass consumes the gain
//!    replicas the channel pass just produced; symbol replicas feeding the
//!    channel pass are from the previous iteration.
//!
//! Per-edge messages are never materialised as `GN x N` interference sums;
//! each pass computes row-level totals once and obtains every leave-one-out
//! quantity by subtracting the edge's own contribution, which keeps a full
//! iteration at `Theta(GN * N * (P+1))` scalar operations.
//!
//! The iteration count is a cap: passes stop early once no replica moved by
//! more than a configurable tolerance (default `1e-8` relative), at which
//! point further iterations cannot change the damped fixed point to any
//! accuracy that matters downstream.

use num_complex::Complex64;

use crate::dd_channel::ChannelDictionary;
use crate::frame::{qpsk_hard_decide, Frame};
use crate::sysconfig::SystemParams;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Floor applied to variances before any division.
const VAR_FLOOR: f64 = 1e-15;

/// Saturation threshold for [`tanh_sat`]: `1 - tanh(20) < 9e-18`, under half
/// an ulp of `1.0`, so every rounding-faithful `tanh` returns exactly `±1.0`
/// beyond this point and the call can be skipped.
const TANH_SAT: f64 = 20.0;

/// `tanh` with an exact saturation fast path. Once beliefs sharpen, the
/// denoiser arguments grow past any representable transition region and the
/// libm call — by far the most expensive scalar operation in a pass — is
/// pure overhead; the branch returns the identical bit pattern.
#[inline]
fn tanh_sat(x: f64) -> f64 {
    if x >= TANH_SAT {
        1.0
    } else if x <= -TANH_SAT {
        -1.0
    } else {
        x.tanh()
    }
}

/// QPSK posterior-mean denoiser: given an extrinsic belief `mean` with
/// variance `var`, returns
/// `c_x (tanh(2 c_x Re(mean) / var) + j tanh(2 c_x Im(mean) / var))`.
/// A zero variance saturates the tanh, which reproduces the hard-decision
/// limit.
pub fn qpsk_denoise(mean: Complex64, var: f64, c_x: f64) -> Complex64 {
    let v = var.max(VAR_FLOOR);
    Complex64::new(
        c_x * tanh_sat(2.0 * c_x * mean.re / v),
        c_x * tanh_sat(2.0 * c_x * mean.im / v),
    )
}

/// Gaussian shrinkage denoiser for a gain with prior `CN(0, sigma_h_sq)`:
/// returns the posterior mean `sigma_h_sq * mean / (var + sigma_h_sq)` and
/// variance `sigma_h_sq * var / (var + sigma_h_sq)`.
pub fn gaussian_denoise_gain(mean: Complex64, var: f64, sigma_h_sq: f64) -> (Complex64, f64) {
    if !var.is_finite() {
        // An uninformative belief falls back to the prior.
        return (ZERO, sigma_h_sq);
    }
    let denom = var + sigma_h_sq;
    (mean * (sigma_h_sq / denom), sigma_h_sq * var / denom)
}

/// Per-edge soft replicas and their mean squared errors.
#[derive(Debug, Clone)]
pub struct BeliefState {
    /// Soft symbol replicas, `GN x N` row-major.
    pub x_hat: Vec<Complex64>,
    /// Symbol MSEs, same layout; pilot columns stay at zero.
    pub var_x: Vec<f64>,
    /// Soft gain replicas, `GN x (P+1)` row-major.
    pub h_hat: Vec<Complex64>,
    /// Gain MSEs, same layout.
    pub var_h: Vec<f64>,
    /// Completed iteration count.
    pub iteration: usize,
}

/// Convergence trace entry for one iteration.
#[derive(Debug, Clone)]
pub struct IterationDiag {
    pub iteration: usize,
    /// Mean symbol MSE over data edges.
    pub mean_var_x: f64,
    /// Mean gain MSE over all edges.
    pub mean_var_h: f64,
    /// Running BER against the true payload, when it was supplied.
    pub ber: Option<f64>,
}

/// Final receiver output.
#[derive(Debug, Clone)]
pub struct JceddOutput {
    /// Denoised data symbols (consensus belief over all rows), length N - N_P.
    pub x_data: Vec<Complex64>,
    /// Channel gain estimates, length P + 1.
    pub h_est: Vec<Complex64>,
    /// Iterations actually executed (may stop short of the cap on
    /// convergence).
    pub iterations: usize,
    /// One entry per executed iteration.
    pub diagnostics: Vec<IterationDiag>,
}

impl JceddOutput {
    /// Hard decisions on the decoded data symbols.
    pub fn data_bits(&self) -> Vec<u8> {
        qpsk_hard_decide(&self.x_data)
    }
}

/// Receiver failure modes.
#[derive(Debug, Clone, PartialEq)]
pub enum EngineError {
    /// A replica or belief went NaN/inf; the trial should be discarded and
    /// counted as an abort.
    NonFinite { iteration: usize },
}

impl std::fmt::Display for EngineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EngineError::NonFinite { iteration } => {
                write!(f, "non-finite message detected at iteration {}", iteration)
            }
        }
    }
}

impl std::error::Error for EngineError {}

/// The message-passing engine for one trial. Holds the dictionary and frame
/// layout by reference plus reusable scratch buffers, so repeated passes
/// allocate nothing.
pub struct PbigabpEngine<'a> {
    dict: &'a ChannelDictionary,
    frame: &'a Frame,
    n: usize,
    gn: usize,
    paths: usize,
    n_p: usize,
    e_s: f64,
    sigma_h_sq: f64,
    n_0: f64,
    beta_x: f64,
    beta_h: f64,
    i_max: usize,
    c_x: f64,
    conv_tol: f64,
    /// Squared magnitudes of the dictionary entries, same layout as the
    /// dictionary stacks.
    gamma_abs2: Vec<Vec<f64>>,
    /// Genie controls: fixing one side of the bilinear model turns the
    /// corresponding pass into a no-op with zero prior variance.
    known_channel: Option<Vec<Complex64>>,
    known_symbols: Option<Vec<Complex64>>,
    initial_gains: Option<Vec<Complex64>>,
    // --- scratch, reused across passes -------------------------------
    /// Row-level symbol totals `sum_m gamma_{p:n,m} x_hat_{n,m}`, `GN x (P+1)`.
    y_h: Vec<Complex64>,
    y_h_valid: bool,
    /// Data-weighted dictionary energies `sum_m var_x |gamma|^2`, `GN x (P+1)`.
    r_mat: Vec<f64>,
    /// Channel-pass per-edge soft signals and variances, `GN x (P+1)`.
    ytil_h: Vec<Complex64>,
    sig_h: Vec<f64>,
    /// Data-pass per-edge effective gains/soft signals/variances, `GN x N`
    /// (only data columns are written).
    t2_mat: Vec<Complex64>,
    /// With a genie channel the effective gains never change; cache them
    /// (and the fixed pilot contribution per row) after the first pass.
    t2_cached: bool,
    pilot_sig: Vec<Complex64>,
    ytil_x: Vec<Complex64>,
    sig_x: Vec<f64>,
    /// Full extrinsic-combining sums from the most recent pass of each kind.
    comb_a_h: Vec<f64>,
    comb_b_h: Vec<Complex64>,
    comb_a_x: Vec<f64>,
    comb_b_x: Vec<Complex64>,
    ran_channel_pass: bool,
    ran_data_pass: bool,
    /// Largest replica movement in the most recent pass of each kind.
    delta_h: f64,
    delta_x: f64,
}

impl<'a> PbigabpEngine<'a> {
    pub fn new(dict: &'a ChannelDictionary, frame: &'a Frame, params: &SystemParams) -> Self {
        let n = dict.n();
        let gn = dict.gn();
        let paths = dict.n_paths();
        assert_eq!(frame.n(), n, "frame length must match the dictionary");
        assert_eq!(frame.n_p, params.n_p, "frame pilot count must match params");
        let gamma_abs2 = (0..paths)
            .map(|p| dict.path(p).iter().map(|z| z.norm_sqr()).collect())
            .collect();
        PbigabpEngine {
            dict,
            frame,
            n,
            gn,
            paths,
            n_p: params.n_p,
            e_s: params.e_s,
            sigma_h_sq: params.sigma_h_sq,
            n_0: params.n_0,
            beta_x: params.beta_x,
            beta_h: params.beta_h,
            i_max: params.i_max,
            c_x: params.c_x(),
            conv_tol: 1e-8,
            gamma_abs2,
            known_channel: None,
            known_symbols: None,
            initial_gains: None,
            y_h: vec![ZERO; gn * paths],
            y_h_valid: false,
            r_mat: vec![0.0; gn * paths],
            ytil_h: vec![ZERO; gn * paths],
            sig_h: vec![0.0; gn * paths],
            t2_mat: vec![ZERO; gn * n],
            t2_cached: false,
            pilot_sig: vec![ZERO; gn],
            ytil_x: vec![ZERO; gn * n],
            sig_x: vec![0.0; gn * n],
            comb_a_h: vec![0.0; paths],
            comb_b_h: vec![ZERO; paths],
            comb_a_x: vec![0.0; n],
            comb_b_x: vec![ZERO; n],
            ran_channel_pass: false,
            ran_data_pass: false,
            delta_h: f64::INFINITY,
            delta_x: f64::INFINITY,
        }
    }

    /// Genie mode: fix the gain replicas to the true values with zero
    /// variance; [`PbigabpEngine::run`] then executes data passes only.
    pub fn with_known_channel(mut self, gains: &[Complex64]) -> Self {
        assert_eq!(gains.len(), self.paths);
        self.known_channel = Some(gains.to_vec());
        self
    }

    /// Genie mode: fix the symbol replicas (full frame, pilots included) to
    /// the truth with zero variance; `run` then executes channel passes only.
    pub fn with_known_symbols(mut self, x: &[Complex64]) -> Self {
        assert_eq!(x.len(), self.n);
        self.known_symbols = Some(x.to_vec());
        self
    }

    /// Seed the gain replicas (e.g. from an LMMSE estimate) instead of
    /// starting from zero.
    pub fn with_initial_gains(mut self, gains: &[Complex64]) -> Self {
        assert_eq!(gains.len(), self.paths);
        self.initial_gains = Some(gains.to_vec());
        self
    }

    /// Override the early-stopping tolerance (relative replica movement);
    /// zero disables early stopping.
    pub fn with_convergence_tol(mut self, tol: f64) -> Self {
        self.conv_tol = tol;
        self
    }

    /// Fresh state per Algorithm start: data replicas zero with variance
    /// `E_S`, pilot replicas fixed with zero variance, gain replicas zero
    /// (or genie/seeded values) with variance `sigma_h_sq` (or zero when
    /// genied).
    pub fn init_state(&self) -> BeliefState {
        let mut x_hat = vec![ZERO; self.gn * self.n];
        let mut var_x = vec![0.0; self.gn * self.n];
        for row in 0..self.gn {
            let xs = &mut x_hat[row * self.n..(row + 1) * self.n];
            let vs = &mut var_x[row * self.n..(row + 1) * self.n];
            if let Some(truth) = &self.known_symbols {
                xs.copy_from_slice(truth);
            } else {
                for m in 0..self.n {
                    if m < self.n_p {
                        xs[m] = self.frame.x[m];
                    } else {
                        vs[m] = self.e_s;
                    }
                }
            }
        }
        let mut h_hat = vec![ZERO; self.gn * self.paths];
        let mut var_h = vec![self.sigma_h_sq; self.gn * self.paths];
        if let Some(truth) = &self.known_channel {
            for row in 0..self.gn {
                h_hat[row * self.paths..(row + 1) * self.paths].copy_from_slice(truth);
            }
            var_h.iter_mut().for_each(|v| *v = 0.0);
        } else if let Some(seed) = &self.initial_gains {
            for row in 0..self.gn {
                h_hat[row * self.paths..(row + 1) * self.paths].copy_from_slice(seed);
            }
            for row in 0..self.gn {
                for p in 0..self.paths {
                    let v = (self.sigma_h_sq - seed[p].norm_sqr()).clamp(0.0, self.sigma_h_sq);
                    var_h[row * self.paths + p] = v;
                }
            }
        }
        BeliefState {
            x_hat,
            var_x,
            h_hat,
            var_h,
            iteration: 0,
        }
    }

    /// Recompute the row totals `y_h[n][p] = sum_m gamma_{p:n,m} x_hat_{n,m}`
    /// from the current symbol replicas.
    fn refresh_y_h(&mut self, state: &BeliefState) {
        for row in 0..self.gn {
            let xs = &state.x_hat[row * self.n..(row + 1) * self.n];
            for p in 0..self.paths {
                let gam = &self.dict.path(p)[row * self.n..(row + 1) * self.n];
                let mut acc = ZERO;
                for (g, x) in gam.iter().zip(xs.iter()) {
                    acc += g * x;
                }
                self.y_h[row * self.paths + p] = acc;
            }
        }
        self.y_h_valid = true;
    }

    /// One channel-estimation pass: updates `h_hat` / `var_h` in place and
    /// refreshes the gain-combining sums used by the final readout.
    pub fn channel_estimation_pass(&mut self, state: &mut BeliefState, y: &[Complex64]) {
        assert_eq!(y.len(), self.gn, "observation length must equal GN");
        let n = self.n;
        let paths = self.paths;
        let data_start = self.n_p;
        let symbols_known = self.known_symbols.is_some();
        if !self.y_h_valid {
            // With genie symbols the replicas never change, so this runs
            // once; otherwise every data pass invalidates the totals.
            self.refresh_y_h(state);
        }
        // Phase 1: per-edge soft IC signals and conditional variances.
        let mut t_row = vec![ZERO; n];
        for row in 0..self.gn {
            let hs = &state.h_hat[row * paths..(row + 1) * paths];
            let vh = &state.var_h[row * paths..(row + 1) * paths];
            let vx = &state.var_x[row * n..(row + 1) * n];
            let y_h_row = &self.y_h[row * paths..(row + 1) * paths];
            let r_row = &mut self.r_mat[row * paths..(row + 1) * paths];
            // Row totals shared by every edge of this row.
            let mut s_hy = ZERO;
            let mut s_vy = 0.0;
            for p in 0..paths {
                s_hy += hs[p] * y_h_row[p];
                s_vy += vh[p] * y_h_row[p].norm_sqr();
            }
            let mut s_vr = 0.0;
            if symbols_known {
                // All symbol variances are zero: the dictionary-energy terms
                // vanish identically.
                r_row.iter_mut().for_each(|r| *r = 0.0);
            } else {
                for p in 0..paths {
                    let g2 = &self.gamma_abs2[p][row * n..(row + 1) * n];
                    let mut acc = 0.0;
                    for m in data_start..n {
                        acc += vx[m] * g2[m];
                    }
                    r_row[p] = acc;
                    s_vr += vh[p] * acc;
                }
                // t_row[m] = sum_p h_hat[n,p] gamma_{p:n,m} over data columns.
                t_row[data_start..n].iter_mut().for_each(|t| *t = ZERO);
                for p in 0..paths {
                    let h = hs[p];
                    let gam = &self.dict.path(p)[row * n..(row + 1) * n];
                    for m in data_start..n {
                        t_row[m] += h * gam[m];
                    }
                }
            }
            for p in 0..paths {
                let own_y = y_h_row[p];
                // Soft IC: cancel every other path's contribution.
                let ytil = y[row] - s_hy + hs[p] * own_y;
                // Conditional variance: residual gain error, residual symbol
                // error through the interfering gains, noise, the
                // cross-variance product, and the target path's own
                // symbol-error energy.
                let term1 = s_vy - vh[p] * own_y.norm_sqr();
                let mut term2 = 0.0;
                if !symbols_known {
                    let h = hs[p];
                    let gam = &self.dict.path(p)[row * n..(row + 1) * n];
                    for m in data_start..n {
                        term2 += vx[m] * (t_row[m] - h * gam[m]).norm_sqr();
                    }
                }
                let term4 = s_vr - vh[p] * r_row[p];
                let term5 = self.sigma_h_sq * r_row[p];
                let idx = row * paths + p;
                self.ytil_h[idx] = ytil;
                self.sig_h[idx] = (term1 + term2 + self.n_0 + term4 + term5).max(VAR_FLOOR);
            }
        }
        // Phase 2: full combining sums per path.
        self.comb_a_h.iter_mut().for_each(|a| *a = 0.0);
        self.comb_b_h.iter_mut().for_each(|b| *b = ZERO);
        for row in 0..self.gn {
            for p in 0..paths {
                let idx = row * paths + p;
                let inv = 1.0 / self.sig_h[idx];
                let own_y = self.y_h[idx];
                self.comb_a_h[p] += own_y.norm_sqr() * inv;
                self.comb_b_h[p] += own_y.conj() * self.ytil_h[idx] * inv;
            }
        }
        // Phase 3: leave-one-out beliefs, denoising, damped updates.
        let mut max_delta = 0.0f64;
        for row in 0..self.gn {
            for p in 0..paths {
                let idx = row * paths + p;
                let inv = 1.0 / self.sig_h[idx];
                let own_y = self.y_h[idx];
                let own_a = own_y.norm_sqr() * inv;
                let own_b = own_y.conj() * self.ytil_h[idx] * inv;
                let denom = (self.comb_a_h[p] - own_a).max(VAR_FLOOR);
                let belief_var = 1.0 / denom;
                let belief = (self.comb_b_h[p] - own_b) * belief_var;
                let (mean, var) = gaussian_denoise_gain(belief, belief_var, self.sigma_h_sq);
                let old = state.h_hat[idx];
                let new = mean * self.beta_h + old * (1.0 - self.beta_h);
                let new_var = self.beta_h * var + (1.0 - self.beta_h) * state.var_h[idx];
                state.h_hat[idx] = new;
                state.var_h[idx] = new_var;
                max_delta = max_delta.max((new - old).norm());
            }
        }
        self.delta_h = max_delta;
        self.ran_channel_pass = true;
    }

    /// One data-detection pass over the data columns: updates `x_hat` /
    /// `var_x` in place (pilot columns untouched) and refreshes the
    /// symbol-combining sums used by the final readout.
    pub fn data_detection_pass(&mut self, state: &mut BeliefState, y: &[Complex64]) {
        assert_eq!(y.len(), self.gn, "observation length must equal GN");
        let n = self.n;
        let paths = self.paths;
        let data_start = self.n_p;
        if data_start == n {
            // All-pilot frame: nothing to detect.
            self.ran_data_pass = true;
            self.delta_x = 0.0;
            return;
        }
        let channel_known = self.known_channel.is_some();
        if !channel_known && !self.y_h_valid {
            self.refresh_y_h(state);
        }
        // Phase 1: per-edge effective gains, soft IC signals, variances.
        for row in 0..self.gn {
            let hs = &state.h_hat[row * paths..(row + 1) * paths];
            let vh = &state.var_h[row * paths..(row + 1) * paths];
            let xs = &state.x_hat[row * n..(row + 1) * n];
            let vx = &state.var_x[row * n..(row + 1) * n];
            let t2 = &mut self.t2_mat[row * n..(row + 1) * n];
            // Effective gains under the freshly updated gain replicas (they
            // are constant across iterations when the channel is genied).
            if !(channel_known && self.t2_cached) {
                t2[data_start..n].iter_mut().for_each(|t| *t = ZERO);
                for p in 0..paths {
                    let h = hs[p];
                    let gam = &self.dict.path(p)[row * n..(row + 1) * n];
                    for m in data_start..n {
                        t2[m] += h * gam[m];
                    }
                }
                if channel_known {
                    let mut acc = ZERO;
                    for m in 0..data_start {
                        let mut t = ZERO;
                        for p in 0..paths {
                            t += hs[p] * self.dict.entry(p, row, m);
                        }
                        acc += t * xs[m];
                    }
                    self.pilot_sig[row] = acc;
                }
            }
            // Total interference with the fresh gains. With a genie channel
            // the row totals y_h are not maintained, so fall back to the
            // equivalent contraction through the effective gains.
            let mut s_hy = ZERO;
            if channel_known {
                s_hy = self.pilot_sig[row];
                for m in data_start..n {
                    s_hy += t2[m] * xs[m];
                }
            } else {
                let y_h_row = &self.y_h[row * paths..(row + 1) * paths];
                for p in 0..paths {
                    s_hy += hs[p] * y_h_row[p];
                }
            }
            // Row totals for the variance terms.
            let mut s_x = 0.0;
            for m in data_start..n {
                s_x += vx[m] * t2[m].norm_sqr();
            }
            let mut s_vr = 0.0;
            if !channel_known {
                let r_row = &self.r_mat[row * paths..(row + 1) * paths];
                for p in 0..paths {
                    s_vr += vh[p] * r_row[p];
                }
            }
            for m in data_start..n {
                let own_x = xs[m];
                let ytil = y[row] - s_hy + t2[m] * own_x;
                // Residual gain error through the cancelled signal, plus the
                // other symbols' residual error, noise, the cross-variance
                // product, and the target column's dictionary energy.
                let mut term1 = 0.0;
                let mut w_m = 0.0;
                if !channel_known {
                    let y_h_row = &self.y_h[row * paths..(row + 1) * paths];
                    for p in 0..paths {
                        let g = self.dict.path(p)[row * n + m];
                        let cancelled = y_h_row[p] - g * own_x;
                        term1 += vh[p] * cancelled.norm_sqr();
                        w_m += vh[p] * self.gamma_abs2[p][row * n + m];
                    }
                }
                let term2 = s_x - vx[m] * t2[m].norm_sqr();
                let term4 = s_vr - vx[m] * w_m;
                let term5 = self.e_s * w_m;
                let idx = row * n + m;
                self.ytil_x[idx] = ytil;
                self.sig_x[idx] = (term1 + term2 + self.n_0 + term4 + term5).max(VAR_FLOOR);
            }
        }
        if channel_known {
            self.t2_cached = true;
        }
        // Phase 2: full combining sums per data column.
        self.comb_a_x.iter_mut().for_each(|a| *a = 0.0);
        self.comb_b_x.iter_mut().for_each(|b| *b = ZERO);
        for row in 0..self.gn {
            for m in data_start..n {
                let idx = row * n + m;
                let inv = 1.0 / self.sig_x[idx];
                let t = self.t2_mat[idx];
                self.comb_a_x[m] += t.norm_sqr() * inv;
                self.comb_b_x[m] += t.conj() * self.ytil_x[idx] * inv;
            }
        }
        // Phase 3: leave-one-out beliefs, QPSK denoising, damped updates.
        let mut max_delta = 0.0f64;
        for row in 0..self.gn {
            for m in data_start..n {
                let idx = row * n + m;
                let inv = 1.0 / self.sig_x[idx];
                let t = self.t2_mat[idx];
                let own_a = t.norm_sqr() * inv;
                let own_b = t.conj() * self.ytil_x[idx] * inv;
                let denom = (self.comb_a_x[m] - own_a).max(VAR_FLOOR);
                let belief_var = 1.0 / denom;
                let belief = (self.comb_b_x[m] - own_b) * belief_var;
                let denoised = qpsk_denoise(belief, belief_var, self.c_x);
                let old = state.x_hat[idx];
                let new = denoised * self.beta_x + old * (1.0 - self.beta_x);
                let new_var = self.beta_x * (self.e_s - new.norm_sqr())
                    + (1.0 - self.beta_x) * state.var_x[idx];
                state.x_hat[idx] = new;
                state.var_x[idx] = new_var;
                max_delta = max_delta.max((new - old).norm());
            }
        }
        // Symbol replicas changed: the row totals are stale now.
        if self.known_symbols.is_none() {
            self.y_h_valid = false;
        }
        self.delta_x = max_delta;
        self.ran_data_pass = true;
    }

    /// Consensus readout: posterior beliefs combining **all** rows (the
    /// leave-one-out exclusion only exists to avoid self-feedback during
    /// iterations), denoised once without damping.
    fn readout(&self, state: &BeliefState) -> (Vec<Complex64>, Vec<Complex64>) {
        let x_data: Vec<Complex64> = (self.n_p..self.n)
            .map(|m| {
                if self.ran_data_pass {
                    let denom = self.comb_a_x[m].max(VAR_FLOOR);
                    qpsk_denoise(self.comb_b_x[m] / denom, 1.0 / denom, self.c_x)
                } else {
                    // No pass executed (iteration cap 0): initialization value.
                    state.x_hat[m]
                }
            })
            .collect();
        let h_est: Vec<Complex64> = (0..self.paths)
            .map(|p| {
                if let Some(truth) = &self.known_channel {
                    truth[p]
                } else if self.ran_channel_pass {
                    let denom = self.comb_a_h[p].max(VAR_FLOOR);
                    let (mean, _) =
                        gaussian_denoise_gain(self.comb_b_h[p] / denom, 1.0 / denom, self.sigma_h_sq);
                    mean
                } else {
                    state.h_hat[p]
                }
            })
            .collect();
        (x_data, h_est)
    }

    fn state_is_finite(state: &BeliefState) -> bool {
        let sx: f64 = state.x_hat.iter().map(|z| z.re.abs() + z.im.abs()).sum();
        let sh: f64 = state.h_hat.iter().map(|z| z.re.abs() + z.im.abs()).sum();
        let vv: f64 = state.var_x.iter().sum::<f64>() + state.var_h.iter().sum::<f64>();
        sx.is_finite() && sh.is_finite() && vv.is_finite()
    }

    /// Run the full algorithm: alternate channel and data passes up to the
    /// iteration cap (skipping a pass entirely when its variables are
    /// genie-fixed), then form the consensus outputs.
    pub fn run(&mut self, y: &[Complex64]) -> Result<JceddOutput, EngineError> {
        self.run_traced(y, None)
    }

    /// [`PbigabpEngine::run`] with an optional true payload, recording the
    /// per-iteration BER into the diagnostics.
    pub fn run_traced(
        &mut self,
        y: &[Complex64],
        truth_bits: Option<&[u8]>,
    ) -> Result<JceddOutput, EngineError> {
        let mut state = self.init_state();
        let mut diagnostics = Vec::new();
        self.ran_channel_pass = false;
        self.ran_data_pass = false;
        self.y_h_valid = false;
        for i in 1..=self.i_max {
            if self.known_channel.is_none() {
                self.channel_estimation_pass(&mut state, y);
            } else {
                self.delta_h = 0.0;
            }
            if self.known_symbols.is_none() {
                self.data_detection_pass(&mut state, y);
            } else {
                self.delta_x = 0.0;
            }
            state.iteration = i;
            if !Self::state_is_finite(&state) {
                return Err(EngineError::NonFinite { iteration: i });
            }
            diagnostics.push(self.diag_entry(&state, truth_bits));
            let scale_x = self.c_x.max(1e-30);
            let scale_h = self.sigma_h_sq.sqrt().max(1e-30);
            if self.conv_tol > 0.0
                && self.delta_x <= self.conv_tol * scale_x
                && self.delta_h <= self.conv_tol * scale_h
            {
                break;
            }
        }
        let (x_data, h_est) = self.readout(&state);
        Ok(JceddOutput {
            x_data,
            h_est,
            iterations: state.iteration,
            diagnostics,
        })
    }

    fn diag_entry(&self, state: &BeliefState, truth_bits: Option<&[u8]>) -> IterationDiag {
        let n = self.n;
        let data_edges = (self.gn * (n - self.n_p)).max(1);
        let mut sum_vx = 0.0;
        for row in 0..self.gn {
            for m in self.n_p..n {
                sum_vx += state.var_x[row * n + m];
            }
        }
        let mean_var_h = if state.var_h.is_empty() {
            0.0
        } else {
            state.var_h.iter().sum::<f64>() / state.var_h.len() as f64
        };
        let ber = truth_bits.map(|bits| {
            let (x_data, _) = self.readout(state);
            let decided = qpsk_hard_decide(&x_data);
            if bits.is_empty() {
                0.0
            } else {
                let errs = decided.iter().zip(bits.iter()).filter(|(a, b)| a != b).count();
                errs as f64 / bits.len() as f64
            }
        });
        IterationDiag {
            iteration: state.iteration,
            mean_var_x: sum_vx / data_edges as f64,
            mean_var_h,
            ber,
        }
    }
}

// ---------------------------------------------------------------------------
