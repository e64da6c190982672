//! Error type shared by the whole crate.

use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The requested file does not exist.
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    /// I/O failure while reading or writing a file.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// WAV file uses an encoding this crate does not read.
    #[error("unsupported WAV encoding in {path}: {detail}")]
    UnsupportedWavEncoding { path: PathBuf, detail: String },

    /// WAV header or chunk structure is invalid.
    #[error("malformed WAV file {path}: {detail}")]
    MalformedWav { path: PathBuf, detail: String },

    /// Sidecar JSON for a raw float32 file is missing or invalid.
    #[error("invalid raw-float32 sidecar for {path}: {detail}")]
    InvalidSidecar { path: PathBuf, detail: String },

    /// Requested channel does not exist in a multichannel file.
    #[error("channel {channel} out of range: file has {channels} channel(s)")]
    ChannelOutOfRange { channel: usize, channels: usize },

    /// A signal contains NaN or infinite samples.
    #[error("non-finite sample in {context}")]
    NonFiniteInput { context: String },

    /// Two signals that must share a sample rate do not.
    #[error("sample rate mismatch: {left} Hz vs {right} Hz")]
    SampleRateMismatch { left: u32, right: u32 },

    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Vector or matrix dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An operator or solver produced NaN/Inf mid-computation.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Levinson-Durbin recursion hit a reflection coefficient with
    /// magnitude >= 1 (numerically singular autocorrelation).
    #[error("singular autocorrelation at order {order}: |reflection| = {reflection}")]
    SingularAutocorrelation { order: usize, reflection: f64 },

    /// A synthetic scene cannot satisfy its coverage constraint.
    #[error("infeasible scene: {0}")]
    InfeasibleScene(String),
}

pub type Result<T> = std::result::Result<T, Error>;
