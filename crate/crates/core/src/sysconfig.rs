//! Scenario parameters and deterministic random-stream bookkeeping.
//!
//! A [`SystemParams`] value is built once per run (defaults, JSON config,
//! CLI overrides) and then passed around read-only; nothing else in the
//! crate holds tunable state. [`validate`] collects *every* violated bound
//! instead of failing on the first one, so a bad config file can be fixed in
//! a single round trip.
//!
//! Random streams are derived with [`substream`]: a master seed plus a list
//! of integer tags (purpose, sweep point, frame index) is hashed into an
//! independent ChaCha stream. The same tags always yield the same stream,
//! which is what makes paired comparisons and bit-exact reruns possible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How `sigma_w_sq` (the Nyquist-rate noise variance before pulse shaping)
/// relates to the symbol-SNR noise density `n_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseVarianceConvention {
    /// `sigma_w_sq = 2 * n_0`: `n_0` is the per-real-dimension variance, the
    /// total complex noise power is twice that.
    Total,
    /// `sigma_w_sq = n_0`: `n_0` already denotes the total complex variance.
    PerRealDim,
}

/// Purpose tags for [`substream`]. Keeping them in one place guarantees the
/// transmitter and receiver derive pilot symbols from the same stream while
/// channel, payload and noise draws stay independent.
pub const STREAM_PATHS: u64 = 0x01;
pub const STREAM_BITS: u64 = 0x02;
pub const STREAM_NOISE: u64 = 0x03;
pub const STREAM_PILOTS: u64 = 0x04;
/// Tag for deriving one master seed per Monte Carlo trial from
/// `(sweep point, frame index)`.
pub const STREAM_TRIAL: u64 = 0x05;

/// Full description of one simulated scenario.
///
/// Defaults reproduce the reference configuration used throughout the
/// acceptance tests: N = 128 subcarriers, oversampling G = 2, P + 1 = 5
/// propagation paths, 32 pilot columns, 20 MHz bandwidth at a 70 GHz
/// carrier, normalised Doppler up to 0.25 and delays up to 20 samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemParams {
    /// Number of subcarriers / symbols per frame.
    pub n: usize,
    /// Time-domain oversampling factor (G = 1 is Nyquist-rate reception).
    pub g: usize,
    /// Number of resolvable paths minus one; the channel has P + 1 taps.
    pub p: usize,
    /// Number of pilot symbols per frame (occupying the first `n_p` columns).
    pub n_p: usize,
    /// Carrier frequency in Hz (documentation only; dynamics are normalised).
    pub carrier_freq: f64,
    /// Bandwidth in Hz; the Nyquist sample period is `1 / bandwidth`.
    pub bandwidth: f64,
    /// Maximum path delay in samples (inclusive).
    pub ell_max: usize,
    /// Maximum normalised Doppler shift in digital frequency.
    pub f_max: f64,
    /// Mean symbol energy.
    pub e_s: f64,
    /// Prior variance of each path gain.
    pub sigma_h_sq: f64,
    /// Noise density; see [`NoiseVarianceConvention`].
    pub n_0: f64,
    /// Damping factor for symbol-belief updates, in (0, 1].
    pub beta_x: f64,
    /// Damping factor for gain-belief updates, in (0, 1].
    pub beta_h: f64,
    /// Iteration cap for the message-passing receiver.
    pub i_max: usize,
    /// First chirp rate; `None` selects the full-diversity value
    /// `(2 ceil(f_max) + 1) / (2 N)` automatically.
    pub c1: Option<f64>,
    /// Second chirp rate (any irrational or zero preserves the guarantees;
    /// zero is the conventional choice).
    pub c2: f64,
    /// Raised-cosine roll-off of the receive pulse, in [0, 1].
    pub rolloff: f64,
    /// Master seed for all random streams.
    pub seed: u64,
    /// Mapping between `n_0` and the pre-shaping noise variance.
    pub noise_variance_convention: NoiseVarianceConvention,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            n: 128,
            g: 2,
            p: 4,
            n_p: 32,
            carrier_freq: 70.0e9,
            bandwidth: 20.0e6,
            ell_max: 20,
            f_max: 0.25,
            e_s: 1.0,
            sigma_h_sq: 1.0,
            n_0: 10f64.powf(-1.5), // 15 dB symbol SNR
            beta_x: 0.3,
            beta_h: 0.3,
            i_max: 40,
            c1: None,
            c2: 0.0,
            rolloff: 0.0,
            seed: 1,
            noise_variance_convention: NoiseVarianceConvention::Total,
        }
    }
}

impl SystemParams {
    /// Nyquist sample period `1 / bandwidth` in seconds.
    pub fn t_s(&self) -> f64 {
        1.0 / self.bandwidth
    }

    /// Receiver sampling rate `g * bandwidth` in Hz.
    pub fn f_s(&self) -> f64 {
        self.g as f64 * self.bandwidth
    }

    /// Effective first chirp rate: the explicit value when set, otherwise
    /// [`optimal_c1`] for this scenario.
    pub fn c1(&self) -> f64 {
        self.c1.unwrap_or_else(|| optimal_c1(self.f_max, self.n))
    }

    /// Total observation length `g * n`.
    pub fn gn(&self) -> usize {
        self.g * self.n
    }

    /// Number of data symbols per frame.
    pub fn n_d(&self) -> usize {
        self.n - self.n_p
    }

    /// Per-axis QPSK amplitude `sqrt(e_s / 2)`.
    pub fn c_x(&self) -> f64 {
        (self.e_s / 2.0).sqrt()
    }

    /// Noise variance at the Nyquist rate, before pulse-shape correlation.
    pub fn sigma_w_sq(&self) -> f64 {
        match self.noise_variance_convention {
            NoiseVarianceConvention::Total => 2.0 * self.n_0,
            NoiseVarianceConvention::PerRealDim => self.n_0,
        }
    }

    /// Symbol SNR in dB implied by `e_s` and `n_0`.
    pub fn snr_db(&self) -> f64 {
        10.0 * (self.e_s / self.n_0).log10()
    }

    /// Copy of the parameters with `n_0` set from a symbol SNR in dB:
    /// `n_0 = e_s / 10^(snr/10)`.
    pub fn with_snr_db(&self, snr_db: f64) -> SystemParams {
        let mut out = self.clone();
        out.n_0 = out.e_s / 10f64.powf(snr_db / 10.0);
        out
    }

    /// Copy of the parameters with a different oversampling factor.
    pub fn with_oversampling(&self, g: usize) -> SystemParams {
        let mut out = self.clone();
        out.g = g;
        out
    }

    /// Copy of the parameters with a different pilot count.
    pub fn with_pilot_count(&self, n_p: usize) -> SystemParams {
        let mut out = self.clone();
        out.n_p = n_p;
        out
    }
}

/// Full-diversity first chirp rate `(2 ceil(f_max) + 1) / (2 N)`.
pub fn optimal_c1(f_max: f64, n: usize) -> f64 {
    (2.0 * f_max.ceil() + 1.0) / (2.0 * n as f64)
}

/// Outcome of [`validate`]: either a clean pass or the list of violations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    violations: Vec<String>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations(&self) -> &[String] {
        &self.violations
    }
}

/// Check every structural bound the rest of the crate relies on and report
/// all violations at once.
pub fn validate(params: &SystemParams) -> ValidationReport {
    let mut violations = Vec::new();
    if params.n == 0 {
        violations.push("subcarrier count must be >= 1".to_string());
    }
    if params.g == 0 {
        violations.push("oversampling factor must be >= 1".to_string());
    }
    if params.n_p > params.n {
        violations.push(format!(
            "pilot count exceeds frame: n_p = {} > n = {}",
            params.n_p, params.n
        ));
    }
    if params.n > 0 && params.ell_max >= params.n {
        violations.push(format!(
            "maximum delay must satisfy ell_max < n (got ell_max = {}, n = {})",
            params.ell_max, params.n
        ));
    }
    if params.g > 0 && !(params.f_max >= 0.0 && params.f_max < params.g as f64 / 2.0) {
        violations.push(format!(
            "maximum Doppler must satisfy 0 <= f_max < g/2 (got f_max = {}, g = {})",
            params.f_max, params.g
        ));
    }
    if !(params.bandwidth > 0.0) {
        violations.push("bandwidth must be positive".to_string());
    }
    if !(params.carrier_freq > 0.0) {
        violations.push("carrier frequency must be positive".to_string());
    }
    if !(params.e_s > 0.0) {
        violations.push("symbol energy e_s must be positive".to_string());
    }
    if !(params.sigma_h_sq > 0.0) {
        violations.push("gain prior variance sigma_h_sq must be positive".to_string());
    }
    if !(params.n_0 > 0.0) {
        violations.push("noise density n_0 must be positive".to_string());
    }
    if !(params.beta_x > 0.0 && params.beta_x <= 1.0) {
        violations.push(format!(
            "symbol damping beta_x must lie in (0, 1] (got {})",
            params.beta_x
        ));
    }
    if !(params.beta_h > 0.0 && params.beta_h <= 1.0) {
        violations.push(format!(
            "gain damping beta_h must lie in (0, 1] (got {})",
            params.beta_h
        ));
    }
    if !(params.rolloff >= 0.0 && params.rolloff <= 1.0) {
        violations.push(format!("roll-off must lie in [0, 1] (got {})", params.rolloff));
    }
    if let Some(c1) = params.c1 {
        if !c1.is_finite() {
            violations.push("explicit c1 must be finite".to_string());
        }
    }
    if !params.c2.is_finite() {
        violations.push("c2 must be finite".to_string());
    }
    ValidationReport { violations }
}

/// Derive an independent ChaCha stream from a master seed and a tag path.
///
/// Uses splitmix64 as a keyed hash: the master seed and each tag are
/// absorbed in turn, then the state is expanded into a 32-byte ChaCha key.
/// Distinct tag paths give streams that are independent for all practical
/// purposes, and the construction has no shared mutable state, so trials can
/// be generated in any order (or in parallel) with identical results.
pub fn substream(master_seed: u64, tags: &[u64]) -> ChaCha8Rng {
    const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
    fn splitmix64(state: &mut u64) -> u64 {
        *state = state.wrapping_add(GOLDEN);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    let mut state = master_seed;
    let _ = splitmix64(&mut state);
    for &tag in tags {
        // Mix the tag into the state before advancing so that tag order matters.
        state ^= tag.wrapping_mul(GOLDEN) ^ GOLDEN;
        let _ = splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

// ---------------------------------------------------------------------------
