//! Chirp-carrier (affine Fourier) modulation.
//!
//! The transform is `A = L2 * F * L1`, where `F` is the unitary N-point DFT
//! and `L1`, `L2` are diagonal chirp matrices with entries
//! `exp(-j 2 pi c n^2)`. Modulation applies `A^H` to a symbol frame and
//! demodulation applies `A` to a received block, so the pair is an exact
//! inverse and both directions cost one FFT plus two diagonal products.
//!
//! A dense-matrix path ([`AfdmTransform::dense_forward`]) builds the same
//! operator entry by entry; it exists so tests can cross-check the FFT route
//! against an independent formulation and so small-system oracles can work
//! with explicit matrices.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::linalg::CMat;
use crate::sysconfig::SystemParams;

/// Diagonal of a chirp matrix: entries `exp(-j 2 pi c n^2)` for `n = 0..N-1`.
pub fn chirp_diagonal(c: f64, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let phase = -2.0 * PI * c * (k as f64) * (k as f64);
            Complex64::from_polar(1.0, phase)
        })
        .collect()
}

/// Phase exponent of the chirp-periodic prefix at sample offset `n`:
/// `c1 * (N^2 - 2 N n)`. The prefix sample at offset `-n` equals the tail
/// sample multiplied by `exp(-j 2 pi cpp_phase(n, c1, N))`, which reduces to
/// a plain cyclic prefix whenever `2 N^2 c1` is an integer.
pub fn cpp_phase(n: i64, c1: f64, big_n: usize) -> f64 {
    let nn = big_n as f64;
    c1 * (nn * nn - 2.0 * nn * n as f64)
}

/// The N-point affine Fourier transform pair used by the modem.
pub struct AfdmTransform {
    n: usize,
    c1: f64,
    c2: f64,
    lambda1: Vec<Complex64>,
    lambda2: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl AfdmTransform {
    pub fn new(n: usize, c1: f64, c2: f64) -> Self {
        assert!(n >= 1, "transform size must be at least 1");
        let mut planner = FftPlanner::new();
        AfdmTransform {
            n,
            c1,
            c2,
            lambda1: chirp_diagonal(c1, n),
            lambda2: chirp_diagonal(c2, n),
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n),
        }
    }

    /// Transform configured from scenario parameters (resolving the
    /// automatic choice of `c1`).
    pub fn from_params(params: &SystemParams) -> Self {
        AfdmTransform::new(params.n, params.c1(), params.c2)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    /// Modulate a frame: `s = A^H x`. The result has the same energy as `x`.
    pub fn modulate(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n, "frame length must equal N");
        // A^H = L1^H F^H L2^H, applied right to left.
        let mut buf: Vec<Complex64> = x
            .iter()
            .zip(self.lambda2.iter())
            .map(|(&v, &d)| v * d.conj())
            .collect();
        self.ifft.process(&mut buf);
        let scale = 1.0 / (self.n as f64).sqrt();
        for (b, d) in buf.iter_mut().zip(self.lambda1.iter()) {
            *b *= d.conj() * scale;
        }
        buf
    }

    /// Demodulate a received block: `y = A r`.
    pub fn demodulate(&self, r: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(r.len(), self.n, "block length must equal N");
        let mut buf: Vec<Complex64> = r
            .iter()
            .zip(self.lambda1.iter())
            .map(|(&v, &d)| v * d)
            .collect();
        self.fft.process(&mut buf);
        let scale = 1.0 / (self.n as f64).sqrt();
        for (b, d) in buf.iter_mut().zip(self.lambda2.iter()) {
            *b *= d * scale;
        }
        buf
    }

    /// Dense forward operator `A = L2 F L1`, built entry by entry from the
    /// defining formula (independent of the FFT path).
    pub fn dense_forward(&self) -> CMat {
        let n = self.n;
        let scale = 1.0 / (n as f64).sqrt();
        CMat::from_fn(n, n, |m, k| {
            let phase = -2.0 * PI * (m as f64) * (k as f64) / n as f64;
            self.lambda2[m] * Complex64::from_polar(scale, phase) * self.lambda1[k]
        })
    }
}

// ---------------------------------------------------------------------------
