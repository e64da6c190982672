//! Robust room impulse response estimation from a known excitation and a
//! noisy in-room recording.
//!
//! The estimator solves an l1-norm regression in the time-frequency
//! domain: residual bins dominated by transient interference act as
//! outliers and are suppressed by iteratively reweighted least squares,
//! with each weighted subproblem handled matrix-free by LSMR. Supporting
//! pieces include FFT convolution with exact adjoints, an isometric
//! boxcar STFT, LPC-based whitening that preconditions the solve,
//! baseline estimators and evaluation metrics, and a seeded synthetic
//! scene generator for reproducible experiments.

pub mod baselines;
pub mod error;
pub mod irls;
pub mod linop;
pub mod precondition;
pub mod lsmr;
pub mod operators;
pub mod signal;
pub mod synth;

pub use error::{Error, Result};
pub use signal::{read_wav, resample, write_wav, Rng, Signal};
