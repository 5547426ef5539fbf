//! Reference receivers: pilot-based LMMSE channel estimation, genie-aided
//! linear GaBP bounds, and the Nyquist-rate (G = 1) receiver obtained by
//! restricting an oversampled observation to one polyphase stream.
//!
//! The two genie bounds split the bilinear problem into its linear halves:
//!
//! * **detection half** — the true gains are handed to the engine with zero
//!   variance, so only data passes run;
//! * **estimation half** — the true symbols are handed over with zero
//!   variance, so only channel passes run, seeded from the pilot-only LMMSE
//!   estimate.
//!
//! Each half is an ordinary (non-bilinear) GaBP receiver and lower-bounds the
//! error of the joint algorithm.

use num_complex::Complex64;

use crate::dd_channel::{sample_paths, stack_dictionary, transmit_through, ChannelDictionary, PathSet};
use crate::afdm::AfdmTransform;
use crate::frame::{build_frame, random_data_bits, Frame};
use crate::linalg::{hermitian_solve, CMat};
use crate::noise::{build_shaper, sample_noise};
use crate::pbigabp::{EngineError, JceddOutput, PbigabpEngine};
use crate::sysconfig::{substream, SystemParams, STREAM_BITS, STREAM_NOISE, STREAM_PATHS};

/// A fully realised transmission: parameters, channel, frame, the stacked
/// dictionary, and the demodulated observation vector (length `G * N`).
pub struct Scenario {
    pub params: SystemParams,
    pub paths: PathSet,
    pub frame: Frame,
    pub dict: ChannelDictionary,
    pub y: Vec<Complex64>,
}

impl Scenario {
    /// Draw a complete random trial from the parameter set's seed streams:
    /// channel paths, payload bits, and shaped receive noise.
    pub fn draw(params: &SystemParams) -> Scenario {
        let mut path_rng = substream(params.seed, &[STREAM_PATHS]);
        let paths = sample_paths(params, &mut path_rng);
        let mut bit_rng = substream(params.seed, &[STREAM_BITS]);
        let bits = random_data_bits(params, &mut bit_rng);
        let frame = build_frame(params, &bits);
        Scenario::assemble(params, paths, frame)
    }

    /// Build the observation for an already-drawn channel and frame.
    pub fn assemble(params: &SystemParams, paths: PathSet, frame: Frame) -> Scenario {
        let transform = AfdmTransform::from_params(params);
        let dict = stack_dictionary(&paths, &transform, params);
        let shaper = build_shaper(params.g, params.sigma_w_sq(), params.rolloff);
        let mut noise_rng = substream(params.seed, &[STREAM_NOISE]);
        let noise = sample_noise(&shaper, params.n, &mut noise_rng);
        let s = transform.modulate(&frame.x);
        let streams = transmit_through(&paths, &s, &noise, params);
        let mut y = vec![Complex64::new(0.0, 0.0); dict.gn()];
        for g in 0..params.g {
            let demod = transform.demodulate(&streams[g]);
            y[g * params.n..(g + 1) * params.n].copy_from_slice(&demod);
        }
        Scenario { params: params.clone(), paths, frame, dict, y }
    }

    /// Keep only the polyphase streams of a coarser receiver with `g_sub`
    /// samples per symbol. The result is exactly the trial the coarser
    /// receiver would have seen for the same channel, payload, and noise
    /// process.
    pub fn restrict_streams(&self, g_sub: usize) -> Scenario {
        assert!(g_sub >= 1 && self.params.g % g_sub == 0,
            "g_sub must divide the oversampling factor");
        let stride = self.params.g / g_sub;
        let n = self.params.n;
        let mut y = Vec::with_capacity(g_sub * n);
        for g in 0..g_sub {
            let src = g * stride;
            y.extend_from_slice(&self.y[src * n..(src + 1) * n]);
        }
        Scenario {
            params: self.params.with_oversampling(g_sub),
            paths: self.paths.clone(),
            frame: self.frame.clone(),
            dict: self.dict.restrict_streams(g_sub),
            y,
        }
    }
}

/// Pilot-based LMMSE estimate of the path gains: regularised least squares
/// `(A^H A + (N_0 / sigma_h_sq) I)^{-1} A^H y` where column `p` of `A` is the
/// dictionary response of path `p` to the known symbols (`x_known` is the
/// full frame with zeros in unknown positions).
pub fn lmmse_channel_estimate(
    y: &[Complex64],
    dict: &ChannelDictionary,
    x_known: &[Complex64],
    params: &SystemParams,
) -> Vec<Complex64> {
    let gn = dict.gn();
    let paths = dict.n_paths();
    assert_eq!(y.len(), gn);
    assert_eq!(x_known.len(), dict.n());
    // Columns a_p = Gamma_p x_known.
    let cols: Vec<Vec<Complex64>> = (0..paths)
        .map(|p| {
            let mut col = vec![Complex64::new(0.0, 0.0); gn];
            let stack = dict.path(p);
            for (row, out) in col.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (g, x) in stack[row * dict.n()..(row + 1) * dict.n()].iter().zip(x_known) {
                    acc += g * x;
                }
                *out = acc;
            }
            col
        })
        .collect();
    let ridge = params.n_0 / params.sigma_h_sq;
    let mut gram = CMat::zeros(paths, paths);
    for i in 0..paths {
        for j in 0..paths {
            let mut acc = Complex64::new(0.0, 0.0);
            for row in 0..gn {
                acc += cols[i][row].conj() * cols[j][row];
            }
            if i == j {
                acc += Complex64::new(ridge, 0.0);
            }
            gram.set(i, j, acc);
        }
    }
    let rhs: Vec<Complex64> = (0..paths)
        .map(|p| {
            let mut acc = Complex64::new(0.0, 0.0);
            for row in 0..gn {
                acc += cols[p][row].conj() * y[row];
            }
            acc
        })
        .collect();
    hermitian_solve(&gram, &rhs).expect("regularised Gram matrix is positive definite")
}

/// Pilot-only LMMSE estimate: the data positions are treated as zero.
pub fn lmmse_from_pilots(scenario: &Scenario) -> Vec<Complex64> {
    let mut x_known = vec![Complex64::new(0.0, 0.0); scenario.params.n];
    x_known[..scenario.params.n_p].copy_from_slice(scenario.frame.pilot_symbols());
    lmmse_channel_estimate(&scenario.y, &scenario.dict, &x_known, &scenario.params)
}

/// Genie detection bound: run the engine with the true gains fixed.
pub fn gabp_detect_known_channel(scenario: &Scenario) -> Result<JceddOutput, EngineError> {
    let mut engine = PbigabpEngine::new(&scenario.dict, &scenario.frame, &scenario.params)
        .with_known_channel(&scenario.paths.gains);
    engine.run(&scenario.y)
}

/// Genie estimation bound: run the engine with the true symbols fixed,
/// starting from the full-knowledge LMMSE gain estimate (the genie knows
/// every symbol, so its initializer does too).
pub fn gabp_estimate_known_data(scenario: &Scenario) -> Result<JceddOutput, EngineError> {
    let seed_est = lmmse_channel_estimate(
        &scenario.y,
        &scenario.dict,
        &scenario.frame.x,
        &scenario.params,
    );
    let mut engine = PbigabpEngine::new(&scenario.dict, &scenario.frame, &scenario.params)
        .with_known_symbols(&scenario.frame.x)
        .with_initial_gains(&seed_est);
    engine.run(&scenario.y)
}

/// The Nyquist-rate receiver: restrict the observation to symbol-rate
/// samples (`G = 1`) and run the full joint algorithm there.
pub fn nyquist_receiver(scenario: &Scenario) -> Result<JceddOutput, EngineError> {
    let sub = scenario.restrict_streams(1);
    let mut engine = PbigabpEngine::new(&sub.dict, &sub.frame, &sub.params);
    engine.run(&sub.y)
}

// ---------------------------------------------------------------------------
