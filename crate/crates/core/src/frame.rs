//! Frame assembly: pilot placement and QPSK mapping.
//!
//! A frame is a length-N symbol vector whose first `n_p` positions carry
//! known pilot symbols and whose remaining positions carry Gray-mapped QPSK
//! payload. Pilots are drawn from a dedicated random stream that depends
//! only on the master seed, so transmitter and receiver agree on them
//! without any side channel.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::sysconfig::{substream, SystemParams, STREAM_PILOTS};

/// Gray-map a bit pair per symbol: `(b0, b1) -> c_x * ((1 - 2 b0) + j (1 - 2 b1))`.
/// `bits` must have even length and contain only 0/1 values.
pub fn qpsk_map(bits: &[u8], c_x: f64) -> Vec<Complex64> {
    assert!(bits.len() % 2 == 0, "QPSK consumes bits in pairs");
    bits.chunks_exact(2)
        .map(|pair| {
            debug_assert!(pair[0] <= 1 && pair[1] <= 1, "bits must be 0 or 1");
            Complex64::new(
                c_x * (1.0 - 2.0 * pair[0] as f64),
                c_x * (1.0 - 2.0 * pair[1] as f64),
            )
        })
        .collect()
}

/// Hard decision back to bits: non-negative real / imaginary parts decide
/// bit 0, so exact ties fall on the positive side.
pub fn qpsk_hard_decide(symbols: &[Complex64]) -> Vec<u8> {
    let mut bits = Vec::with_capacity(symbols.len() * 2);
    for z in symbols {
        bits.push(if z.re >= 0.0 { 0 } else { 1 });
        bits.push(if z.im >= 0.0 { 0 } else { 1 });
    }
    bits
}

/// One transmit frame: the full symbol vector plus the payload bits that
/// produced its data portion.
#[derive(Debug, Clone)]
pub struct Frame {
    /// Full length-N symbol vector (pilots followed by data).
    pub x: Vec<Complex64>,
    /// Payload bits, two per data symbol.
    pub data_bits: Vec<u8>,
    /// Number of leading pilot symbols.
    pub n_p: usize,
}

impl Frame {
    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// True when column `m` carries a pilot.
    pub fn is_pilot(&self, m: usize) -> bool {
        m < self.n_p
    }

    pub fn pilot_symbols(&self) -> &[Complex64] {
        &self.x[..self.n_p]
    }

    pub fn data_symbols(&self) -> &[Complex64] {
        &self.x[self.n_p..]
    }
}

/// Draw a payload of `2 * (n - n_p)` uniform bits.
pub fn random_data_bits(params: &SystemParams, rng: &mut ChaCha8Rng) -> Vec<u8> {
    (0..2 * params.n_d()).map(|_| rng.gen_range(0..=1u8)).collect()
}

/// Deterministic pilot symbols for this scenario: QPSK points drawn from the
/// pilot stream of the master seed (independent of sweep point and frame).
pub fn pilot_symbols(params: &SystemParams) -> Vec<Complex64> {
    let mut rng = substream(params.seed, &[STREAM_PILOTS]);
    let bits: Vec<u8> = (0..2 * params.n_p).map(|_| rng.gen_range(0..=1u8)).collect();
    qpsk_map(&bits, params.c_x())
}

/// Assemble a frame from payload bits: pilots in columns `0..n_p`, data in
/// the rest. Every symbol has energy `e_s`.
pub fn build_frame(params: &SystemParams, data_bits: &[u8]) -> Frame {
    assert_eq!(
        data_bits.len(),
        2 * params.n_d(),
        "payload must carry two bits per data symbol"
    );
    let mut x = pilot_symbols(params);
    x.extend(qpsk_map(data_bits, params.c_x()));
    Frame {
        x,
        data_bits: data_bits.to_vec(),
        n_p: params.n_p,
    }
}

// ---------------------------------------------------------------------------
