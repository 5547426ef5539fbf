//! Doubly-dispersive channel: path statistics, time-domain propagation, and
//! the per-path effective channel dictionary seen after demodulation.
//!
//! A channel realization is a [`PathSet`]: P + 1 paths with complex gains,
//! integer delays, and normalised Doppler shifts. In the time domain each
//! path acts as (prefix-phase diagonal) x (Doppler diagonal) x (cyclic
//! shift); summing the paths weighted by their gains gives the circular
//! channel matrix of stream `g`. Sandwiching a single path's factors between
//! the demodulator and modulator yields the unit-gain dictionary block
//! `Gamma_p^(g)`, and stacking the blocks over streams gives the `GN x N`
//! per-path dictionary that the message-passing receiver treats as known.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::afdm::{cpp_phase, AfdmTransform};
use crate::linalg::CMat;
use crate::noise::NoiseBlock;
use crate::sysconfig::SystemParams;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// One channel realization: parallel arrays over the P + 1 paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    /// Complex gains `h_p`.
    pub gains: Vec<Complex64>,
    /// Integer delays `ell_p` in Nyquist samples.
    pub delays: Vec<usize>,
    /// Normalised digital Doppler shifts `f_p`.
    pub dopplers: Vec<f64>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// Flatten into per-path records (for JSON dumps of a realization).
    pub fn to_records(&self) -> Vec<PathRecord> {
        (0..self.len())
            .map(|p| PathRecord {
                p,
                gain_re: self.gains[p].re,
                gain_im: self.gains[p].im,
                delay: self.delays[p],
                doppler: self.dopplers[p],
            })
            .collect()
    }

    /// Rebuild from records (inverse of [`PathSet::to_records`]).
    pub fn from_records(records: &[PathRecord]) -> PathSet {
        PathSet {
            gains: records
                .iter()
                .map(|r| Complex64::new(r.gain_re, r.gain_im))
                .collect(),
            delays: records.iter().map(|r| r.delay).collect(),
            dopplers: records.iter().map(|r| r.doppler).collect(),
        }
    }
}

/// Serializable view of a single path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub p: usize,
    pub gain_re: f64,
    pub gain_im: f64,
    pub delay: usize,
    pub doppler: f64,
}

/// Draw a channel realization: delays uniform on `[0, ell_max]` rounded to
/// the nearest integer, Dopplers from the Jakes spectrum
/// `f_p = f_max cos(theta)` with `theta` uniform on `[-pi, pi]`, and gains
/// i.i.d. `CN(0, sigma_h_sq)`. Draw order per path is delay, angle, gain.
pub fn sample_paths(params: &SystemParams, rng: &mut ChaCha8Rng) -> PathSet {
    let count = params.p + 1;
    let mut gains = Vec::with_capacity(count);
    let mut delays = Vec::with_capacity(count);
    let mut dopplers = Vec::with_capacity(count);
    let gain_scale = params.sigma_h_sq.sqrt() * std::f64::consts::FRAC_1_SQRT_2;
    for _ in 0..count {
        let u: f64 = rng.gen_range(0.0..=1.0);
        delays.push((u * params.ell_max as f64).round() as usize);
        let theta: f64 = rng.gen_range(-PI..=PI);
        dopplers.push(params.f_max * theta.cos());
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        gains.push(Complex64::new(re * gain_scale, im * gain_scale));
    }
    PathSet {
        gains,
        delays,
        dopplers,
    }
}

/// Diagonal of the prefix-phase matrix for a path of delay `ell`: the first
/// `ell` entries are `exp(-j 2 pi phi(ell - i))` for positions
/// `i = 0..ell-1`, the remaining `n - ell` entries are 1.
pub fn cp_phase_diagonal<F: Fn(i64) -> f64>(ell: usize, phi: F, n: usize) -> Vec<Complex64> {
    assert!(ell < n, "delay must be smaller than the frame length");
    (0..n)
        .map(|i| {
            if i < ell {
                Complex64::from_polar(1.0, -2.0 * PI * phi((ell - i) as i64))
            } else {
                ONE
            }
        })
        .collect()
}

/// The chirp-prefix phase function for this waveform, as a closure suitable
/// for [`cp_phase_diagonal`].
pub fn afdm_cp_phase(c1: f64, n: usize) -> impl Fn(i64) -> f64 {
    move |k| cpp_phase(k, c1, n)
}

/// Diagonal of the Doppler matrix for stream `g` raised to Doppler `f_p`:
/// entry `k` equals `exp(-j 2 pi f_p (g + k G) / (N G))`.
pub fn doppler_power_diagonal(g: usize, big_g: usize, n: usize, f_p: f64) -> Vec<Complex64> {
    assert!(g < big_g, "stream index must satisfy g < G");
    let denom = (n * big_g) as f64;
    (0..n)
        .map(|k| {
            let arg = -2.0 * PI * f_p * (g as f64 + (k * big_g) as f64) / denom;
            Complex64::from_polar(1.0, arg)
        })
        .collect()
}

/// Apply the forward cyclic shift by `ell` samples: output `i` takes input
/// `(i - ell) mod n`, so a basis vector `e_k` moves to `e_{(k + ell) mod n}`.
pub fn cyclic_shift(v: &[Complex64], ell: usize) -> Vec<Complex64> {
    let n = v.len();
    let ell = ell % n;
    (0..n).map(|i| v[(i + n - ell) % n]).collect()
}

/// Dense forward cyclic shift matrix (power `ell` of the single-step shift).
pub fn cyclic_shift_matrix(ell: usize, n: usize) -> CMat {
    let ell = ell % n;
    CMat::from_fn(n, n, |i, j| {
        if (j + ell) % n == i {
            ONE
        } else {
            ZERO
        }
    })
}

/// Per-path time-domain factors for one stream: diagonals and shift such
/// that the path contributes `h_p * diag(phi) * diag(omega) * shift(ell)`.
struct PathFactors {
    phi: Vec<Complex64>,
    omega: Vec<Complex64>,
    ell: usize,
}

fn path_factors(g: usize, paths: &PathSet, c1: f64, params: &SystemParams) -> Vec<PathFactors> {
    let n = params.n;
    (0..paths.len())
        .map(|p| PathFactors {
            phi: cp_phase_diagonal(paths.delays[p], afdm_cp_phase(c1, n), n),
            omega: doppler_power_diagonal(g, params.g, n, paths.dopplers[p]),
            ell: paths.delays[p],
        })
        .collect()
}

/// Dense circular channel matrix of stream `g`:
/// `Psi^(g) = sum_p h_p * diag(phi_p) * diag(omega_p) * Pi^{ell_p}`.
pub fn td_channel_matrix(g: usize, paths: &PathSet, c1: f64, params: &SystemParams) -> CMat {
    let n = params.n;
    let factors = path_factors(g, paths, c1, params);
    let mut psi = CMat::zeros(n, n);
    for (p, f) in factors.iter().enumerate() {
        let h = paths.gains[p];
        for i in 0..n {
            let j = (i + n - f.ell % n) % n;
            let v = psi.get(i, j) + h * f.phi[i] * f.omega[i];
            psi.set(i, j, v);
        }
    }
    psi
}

/// Propagate a modulated frame through the channel: stream `g` receives
/// `Psi^(g) s + w^(g)`. Runs in `O(G N (P+1))` without materialising any
/// matrix.
pub fn transmit_through(
    paths: &PathSet,
    s: &[Complex64],
    noise: &NoiseBlock,
    params: &SystemParams,
) -> Vec<Vec<Complex64>> {
    let n = params.n;
    assert_eq!(s.len(), n, "signal length must equal N");
    assert_eq!(noise.streams.len(), params.g, "one noise stream per sample stream");
    let c1 = params.c1();
    let mut out = Vec::with_capacity(params.g);
    for g in 0..params.g {
        assert_eq!(noise.streams[g].len(), n, "noise stream length must equal N");
        let factors = path_factors(g, paths, c1, params);
        let mut r = noise.streams[g].clone();
        for (p, f) in factors.iter().enumerate() {
            let h = paths.gains[p];
            let ell = f.ell % n;
            for i in 0..n {
                r[i] += h * f.phi[i] * f.omega[i] * s[(i + n - ell) % n];
            }
        }
        out.push(r);
    }
    out
}

/// Per-path effective channel stacks `Gamma_p` (size `GN x N`, row-major),
/// known to the receiver.
#[derive(Debug, Clone)]
pub struct ChannelDictionary {
    n: usize,
    g: usize,
    /// `data[p][row * n + col]` with `row = g_idx * n + k`.
    data: Vec<Vec<Complex64>>,
}

impl ChannelDictionary {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn gn(&self) -> usize {
        self.g * self.n
    }

    pub fn n_paths(&self) -> usize {
        self.data.len()
    }

    /// Full flat stack of path `p`, row-major `GN x N`.
    pub fn path(&self, p: usize) -> &[Complex64] {
        &self.data[p]
    }

    pub fn entry(&self, p: usize, row: usize, col: usize) -> Complex64 {
        self.data[p][row * self.n + col]
    }

    /// Dense copy of block `Gamma_p^(g)`.
    pub fn block(&self, p: usize, g: usize) -> CMat {
        CMat::from_fn(self.n, self.n, |i, j| self.entry(p, g * self.n + i, j))
    }

    /// Keep only the streams a coarser receiver sees: stream `k` of the
    /// restricted dictionary is stream `k * (g / g_sub)` of this one, which
    /// is exactly the dictionary the same scenario produces at factor
    /// `g_sub` (fractional offsets `k / g_sub` form a subset of `k / g`).
    pub fn restrict_streams(&self, g_sub: usize) -> ChannelDictionary {
        assert!(
            g_sub >= 1 && self.g % g_sub == 0,
            "restricted factor must divide the source factor"
        );
        let stride = self.g / g_sub;
        let block_len = self.n * self.n;
        let data = self
            .data
            .iter()
            .map(|flat| {
                let mut sub = Vec::with_capacity(g_sub * block_len);
                for k in 0..g_sub {
                    let start = k * stride * block_len;
                    sub.extend_from_slice(&flat[start..start + block_len]);
                }
                sub
            })
            .collect();
        ChannelDictionary {
            n: self.n,
            g: g_sub,
            data,
        }
    }

    /// Noise-free observation `sum_p gains[p] * Gamma_p * x`.
    pub fn apply(&self, gains: &[Complex64], x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(gains.len(), self.n_paths());
        assert_eq!(x.len(), self.n);
        let mut y = vec![ZERO; self.gn()];
        for (p, flat) in self.data.iter().enumerate() {
            let h = gains[p];
            for (row, y_row) in y.iter_mut().enumerate() {
                let mut acc = ZERO;
                for (gamma, xv) in flat[row * self.n..(row + 1) * self.n].iter().zip(x.iter()) {
                    acc += gamma * xv;
                }
                *y_row += h * acc;
            }
        }
        y
    }
}

/// Columns of `A^H` (the modulated basis vectors), shared by the dictionary
/// builders below.
fn modulated_basis(transform: &AfdmTransform) -> Vec<Vec<Complex64>> {
    let n = transform.n();
    let mut basis = vec![ZERO; n];
    (0..n)
        .map(|m| {
            basis[m] = ONE;
            let col = transform.modulate(&basis);
            basis[m] = ZERO;
            col
        })
        .collect()
}

/// Column `m` of `A * diag(phi) * diag(omega) * Pi^ell * A^H` given the
/// modulated basis column `A^H e_m`.
fn gamma_column(
    transform: &AfdmTransform,
    modulated: &[Complex64],
    factors: &PathFactors,
    n: usize,
) -> Vec<Complex64> {
    let ell = factors.ell % n;
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        v.push(factors.phi[i] * factors.omega[i] * modulated[(i + n - ell) % n]);
    }
    transform.demodulate(&v)
}

/// Dense unit-gain effective channel block `Gamma_p^(g)` for one path and
/// one stream: the path's time-domain factors sandwiched between the
/// demodulator and modulator (the gain `h_p` is excluded).
pub fn effective_channel_block(
    g: usize,
    p: usize,
    transform: &AfdmTransform,
    paths: &PathSet,
    params: &SystemParams,
) -> CMat {
    let n = params.n;
    let basis = modulated_basis(transform);
    let factors = &path_factors(g, paths, transform.c1(), params)[p];
    let mut block = CMat::zeros(n, n);
    for (m, modulated) in basis.iter().enumerate() {
        let col = gamma_column(transform, modulated, factors, n);
        for (i, &v) in col.iter().enumerate() {
            block.set(i, m, v);
        }
    }
    block
}

/// Build the full receiver dictionary: for every path, the vertical stack of
/// its per-stream blocks `Gamma_p^(0) .. Gamma_p^(G-1)` (stream `g` occupies
/// rows `gN..(g+1)N-1`). Cost is one FFT per (path, stream, column).
pub fn stack_dictionary(
    paths: &PathSet,
    transform: &AfdmTransform,
    params: &SystemParams,
) -> ChannelDictionary {
    let n = params.n;
    assert_eq!(transform.n(), n, "transform size must match params");
    let basis = modulated_basis(transform);
    let mut data = Vec::with_capacity(paths.len());
    for p in 0..paths.len() {
        let mut flat = vec![ZERO; params.g * n * n];
        for g in 0..params.g {
            let factors = &path_factors(g, paths, transform.c1(), params)[p];
            for (m, modulated) in basis.iter().enumerate() {
                let col = gamma_column(transform, modulated, factors, n);
                for (i, &v) in col.iter().enumerate() {
                    flat[(g * n + i) * n + m] = v;
                }
            }
        }
        data.push(flat);
    }
    ChannelDictionary {
        n,
        g: params.g,
        data,
    }
}

// ---------------------------------------------------------------------------
