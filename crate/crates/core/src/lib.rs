//! Link-level simulation library for affine frequency division multiplexing
//! (AFDM) over doubly dispersive channels, with fractional time-domain
//! oversampling at the receiver.
//!
//! The signal chain is: QPSK frame assembly ([`frame`]), AFDM modulation via
//! the discrete affine Fourier transform ([`afdm`]), propagation through a
//! sparse delay-Doppler channel with a chirp-periodic prefix ([`dd_channel`]),
//! and correlated receive noise from raised-cosine matched filtering at `G`
//! samples per symbol ([`noise`]). Detection is joint channel estimation and
//! data detection by bilinear Gaussian belief propagation ([`pbigabp`]),
//! benchmarked against genie-aided receivers and a Nyquist-rate receiver
//! ([`baselines`]) under a reproducible Monte Carlo harness ([`harness`]).

pub mod afdm;
pub mod baselines;
pub mod dd_channel;
pub mod frame;
pub mod harness;
pub mod linalg;
pub mod noise;
pub mod pbigabp;
pub mod sysconfig;
