//! Correlated receiver noise for fractionally spaced sampling.
//!
//! When the matched filter output is sampled `G` times per symbol period,
//! the `G` sub-samples taken within one period are no longer white: their
//! covariance is a `G x G` Toeplitz matrix built from the receive pulse
//! autocorrelation `c_w(t) = (sigma_w_sq / 2) * rc_pulse(t)` evaluated at
//! the fractional offsets `g / G`. [`build_shaper`] factors that matrix once
//! as `C = L^H L` with `L` lower triangular, and [`sample_noise`] colours
//! i.i.d. unit-variance complex Gaussians with `L^H` so the drawn blocks
//! have exactly the model covariance.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{cholesky_lower, jacobi_eigh};

/// Raised-cosine pulse value at `t` symbol periods for the given roll-off.
///
/// `rc_pulse(0, _) = 1`, zero crossings at non-zero integers, and the
/// removable singularity at `|t| = 1 / (2 rolloff)` is evaluated by its
/// limit `(pi / 4) * sinc(1 / (2 rolloff))`.
pub fn rc_pulse(t: f64, rolloff: f64) -> f64 {
    fn sinc(t: f64) -> f64 {
        if t == 0.0 {
            1.0
        } else {
            let a = std::f64::consts::PI * t;
            a.sin() / a
        }
    }
    let denom = 1.0 - (2.0 * rolloff * t) * (2.0 * rolloff * t);
    if denom.abs() < 1e-8 {
        // |2 rolloff t| = 1: take the l'Hopital limit at the singular point.
        return std::f64::consts::FRAC_PI_4 * sinc(1.0 / (2.0 * rolloff));
    }
    sinc(t) * (std::f64::consts::PI * rolloff * t).cos() / denom
}

/// Precomputed noise statistics for one oversampling configuration.
#[derive(Debug, Clone)]
pub struct NoiseShaper {
    g: usize,
    sigma_w_sq: f64,
    /// `G x G` covariance of the sub-sample vector, row-major.
    c_w: Vec<f64>,
    /// Shaping factor with `c_w = l_c^T * l_c`; lower triangular on the
    /// Cholesky path, dense if the eigenvalue fallback was used.
    l_c: Vec<f64>,
    used_eig_fallback: bool,
}

impl NoiseShaper {
    pub fn g(&self) -> usize {
        self.g
    }

    pub fn sigma_w_sq(&self) -> f64 {
        self.sigma_w_sq
    }

    /// Model covariance entry `cov(w^(a), w^(b))` for streams `a, b`.
    pub fn covariance(&self, a: usize, b: usize) -> f64 {
        self.c_w[a * self.g + b]
    }

    /// Shaping factor entry; satisfies `c_w = l_c^T l_c`.
    pub fn factor(&self, a: usize, b: usize) -> f64 {
        self.l_c[a * self.g + b]
    }

    /// True when the covariance was not numerically positive definite and
    /// an eigenvalue-clipping factorisation was used instead of Cholesky.
    pub fn used_eig_fallback(&self) -> bool {
        self.used_eig_fallback
    }
}

/// One frame worth of correlated noise: `streams[g][n]` is the noise on the
/// `g`-th fractional sample of Nyquist index `n`.
#[derive(Debug, Clone)]
pub struct NoiseBlock {
    pub streams: Vec<Vec<Complex64>>,
}

/// Build the `G x G` covariance `C[a][b] = c_w((a - b) / G)` and its
/// lower-triangular factor `L` with `C = L^T L`.
///
/// The reversed factor (rather than the usual `L L^T`) is what the receiver
/// model calls for; it is obtained by flipping the matrix, taking a standard
/// Cholesky factor, and flipping back. If rounding pushes the covariance
/// off the positive-definite cone, the factor falls back to
/// `diag(sqrt(max(eig, 0))) V^T` from a symmetric eigendecomposition, which
/// still reproduces the covariance to working precision.
pub fn build_shaper(g: usize, sigma_w_sq: f64, rolloff: f64) -> NoiseShaper {
    assert!(g >= 1, "oversampling factor must be >= 1");
    assert!(sigma_w_sq >= 0.0, "noise variance must be non-negative");
    let mut c_w = vec![0.0; g * g];
    for a in 0..g {
        for b in 0..g {
            let t = (a as f64 - b as f64) / g as f64;
            c_w[a * g + b] = 0.5 * sigma_w_sq * rc_pulse(t, rolloff);
        }
    }
    // Flip rows and columns, factor, and flip back: with J the exchange
    // matrix and J C J = M M^T, the matrix L = J M^T J is lower triangular
    // and satisfies L^T L = C.
    let flipped: Vec<f64> = (0..g * g)
        .map(|idx| {
            let (i, j) = (idx / g, idx % g);
            c_w[(g - 1 - i) * g + (g - 1 - j)]
        })
        .collect();
    if let Some(m) = cholesky_lower(&flipped, g) {
        let mut l_c = vec![0.0; g * g];
        for i in 0..g {
            for j in 0..=i {
                l_c[i * g + j] = m[(g - 1 - j) * g + (g - 1 - i)];
            }
        }
        NoiseShaper {
            g,
            sigma_w_sq,
            c_w,
            l_c,
            used_eig_fallback: false,
        }
    } else {
        let (w, v) = jacobi_eigh(&c_w, g);
        let mut l_c = vec![0.0; g * g];
        for i in 0..g {
            let s = w[i].max(0.0).sqrt();
            for j in 0..g {
                l_c[i * g + j] = s * v[j * g + i];
            }
        }
        NoiseShaper {
            g,
            sigma_w_sq,
            c_w,
            l_c,
            used_eig_fallback: true,
        }
    }
}

/// Draw `n` correlated noise vectors, one per Nyquist index.
///
/// For each index the sampler draws `G` i.i.d. unit-variance complex
/// Gaussians `u` and emits `w = L^H u`, giving `E[w w^H] = L^T L = C_w`.
/// Streams are uncorrelated across Nyquist indices.
pub fn sample_noise(shaper: &NoiseShaper, n: usize, rng: &mut ChaCha8Rng) -> NoiseBlock {
    let g = shaper.g;
    let mut streams = vec![vec![Complex64::new(0.0, 0.0); n]; g];
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut u = vec![Complex64::new(0.0, 0.0); g];
    for idx in 0..n {
        for uk in u.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *uk = Complex64::new(re * scale, im * scale);
        }
        for a in 0..g {
            // w[a] = sum_b (L^H)[a][b] u[b] = sum_b L[b][a] u[b].
            let mut acc = Complex64::new(0.0, 0.0);
            for b in 0..g {
                let f = shaper.l_c[b * g + a];
                if f != 0.0 {
                    acc += u[b] * f;
                }
            }
            streams[a][idx] = acc;
        }
    }
    NoiseBlock { streams }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn rc_pulse_matches_reference_points() {
        assert_eq!(rc_pulse(0.0, 0.0), 1.0);
        assert_eq!(rc_pulse(0.0, 0.35), 1.0);
        // Half-sample offset with no roll-off: sinc(1/2) = 2/pi.
        assert!((rc_pulse(0.5, 0.0) - 2.0 / std::f64::consts::PI).abs() < 1e-15);
        // Full roll-off hits the removable singularity at t = 1/2.
        assert!((rc_pulse(0.5, 1.0) - 0.5).abs() < 1e-12);
        // Zero crossings at non-zero integers regardless of roll-off.
        for &beta in &[0.0, 0.25, 0.9] {
            for t in 1..5 {
                assert!(rc_pulse(t as f64, beta).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rc_pulse_is_even() {
        for &beta in &[0.0, 0.35, 1.0] {
            for k in 0..40 {
                let t = 0.13 * k as f64;
                assert!((rc_pulse(t, beta) - rc_pulse(-t, beta)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn shaper_covariance_matches_closed_form_for_two_streams() {
        // G = 2, roll-off 0, sigma_w_sq = 2: C = [[1, 2/pi], [2/pi, 1]].
        let shaper = build_shaper(2, 2.0, 0.0);
        let two_over_pi = 2.0 / std::f64::consts::PI;
        assert!((shaper.covariance(0, 0) - 1.0).abs() < 1e-15);
        assert!((shaper.covariance(1, 1) - 1.0).abs() < 1e-15);
        assert!((shaper.covariance(0, 1) - two_over_pi).abs() < 1e-15);
        assert!((shaper.covariance(1, 0) - two_over_pi).abs() < 1e-15);
        assert!(!shaper.used_eig_fallback());
    }

    #[test]
    fn factor_reconstructs_covariance_and_is_lower_triangular() {
        for &(g, beta) in &[(1usize, 0.0), (2, 0.0), (2, 0.35), (4, 0.0), (4, 0.8)] {
            let shaper = build_shaper(g, 1.7, beta);
            assert!(!shaper.used_eig_fallback(), "G = {}, beta = {}", g, beta);
            for a in 0..g {
                for b in 0..g {
                    // (L^T L)[a][b] = sum_k L[k][a] L[k][b].
                    let mut s = 0.0;
                    for k in 0..g {
                        s += shaper.factor(k, a) * shaper.factor(k, b);
                    }
                    assert!(
                        (s - shaper.covariance(a, b)).abs() < 1e-12,
                        "G = {}, beta = {}, entry ({}, {})",
                        g,
                        beta,
                        a,
                        b
                    );
                    if b > a {
                        assert_eq!(shaper.factor(a, b), 0.0, "factor must be lower triangular");
                    }
                }
            }
        }
    }

    #[test]
    fn single_stream_noise_has_half_sigma_w_sq_power() {
        let shaper = build_shaper(1, 0.8, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let block = sample_noise(&shaper, 40_000, &mut rng);
        let power: f64 =
            block.streams[0].iter().map(|z| z.norm_sqr()).sum::<f64>() / 40_000.0;
        assert!((power - 0.4).abs() < 0.02, "empirical power {}", power);
    }

    #[test]
    fn sampled_noise_matches_model_covariance() {
        let shaper = build_shaper(2, 2.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let count = 60_000;
        let block = sample_noise(&shaper, count, &mut rng);
        let mut emp = [[Complex64::new(0.0, 0.0); 2]; 2];
        for idx in 0..count {
            for a in 0..2 {
                for b in 0..2 {
                    emp[a][b] += block.streams[a][idx] * block.streams[b][idx].conj();
                }
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                let e = emp[a][b] / count as f64;
                let model = shaper.covariance(a, b);
                assert!(
                    (e.re - model).abs() < 0.05 * shaper.covariance(0, 0),
                    "entry ({}, {}): {} vs {}",
                    a,
                    b,
                    e.re,
                    model
                );
                assert!(e.im.abs() < 0.05);
            }
        }
    }
}
