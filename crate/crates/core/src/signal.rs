//! Time-domain signals, WAV and raw-float32 I/O, band-limited resampling,
//! and seeded random generation.
//!
//! A [`Signal`] is an immutable real-valued waveform with a sample rate.
//! WAV files (PCM 16/24-bit integer or 32-bit float) are the primary
//! container; raw little-endian float32 with a JSON sidecar is accepted as
//! a fallback. Resampling uses a polyphase windowed-sinc filter with
//! compensated group delay so the direct-path position of an impulse
//! response survives a rate change.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// Real-valued sampled waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl Signal {
    /// Build a signal, rejecting non-finite samples and a zero rate.
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::InvalidArgument("sample_rate_hz must be > 0".into()));
        }
        if !samples.iter().all(|s| s.is_finite()) {
            return Err(Error::NonFiniteInput {
                context: "Signal::new".into(),
            });
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Consume the signal and return its sample buffer.
    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Root-mean-square amplitude (0 for an empty signal).
    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }
}

/// Seeded pseudo-random generator.
///
/// Backed by ChaCha-12, whose output for a given 64-bit seed is specified
/// by the algorithm itself, so identical seeds give identical streams on
/// every platform. Child generators derived with [`Rng::child`] are
/// statistically independent and equally reproducible.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha12Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent child generator from a label.
    ///
    /// The child seed is a splitmix64 hash of (seed, label), so the stream
    /// consumed from `self` does not affect children and vice versa.
    pub fn child(&self, label: u64) -> Rng {
        Rng::new(splitmix64(self.seed ^ splitmix64(label)))
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    /// Standard normal deviate.
    pub fn normal(&mut self) -> f64 {
        self.inner.sample(rand_distr::StandardNormal)
    }

    /// Vector of standard normal deviates.
    pub fn normal_vec(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.normal()).collect()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.gen::<u64>()
    }
}

/// splitmix64 mixing step, used for deriving child seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// WAV I/O
// ---------------------------------------------------------------------------

/// Read a WAV file, selecting channel 0 of a multichannel file.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Signal> {
    read_wav_channel(path, 0)
}

/// Read one channel of a WAV file.
///
/// Integer samples are normalized by 2^(bits-1) so full scale maps to
/// just under 1.0; 32-bit float samples pass through bit-exactly.
pub fn read_wav_channel(path: impl AsRef<Path>, channel: usize) -> Result<Signal> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let reader = hound::WavReader::open(path).map_err(|e| map_hound_err(e, path))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channel >= channels {
        return Err(Error::ChannelOutOfRange { channel, channels });
    }

    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .collect::<std::result::Result<Vec<f32>, _>>()
            .map_err(|e| map_hound_err(e, path))?
            .into_iter()
            .skip(channel)
            .step_by(channels)
            .map(f64::from)
            .collect(),
        (hound::SampleFormat::Int, bits @ (16 | 24)) => {
            let scale = 1.0 / f64::from(1i32 << (bits - 1));
            reader
                .into_samples::<i32>()
                .collect::<std::result::Result<Vec<i32>, _>>()
                .map_err(|e| map_hound_err(e, path))?
                .into_iter()
                .skip(channel)
                .step_by(channels)
                .map(|s| f64::from(s) * scale)
                .collect()
        }
        (fmt, bits) => {
            return Err(Error::UnsupportedWavEncoding {
                path: path.to_path_buf(),
                detail: format!("{bits}-bit {fmt:?}"),
            })
        }
    };

    Signal::new(samples, spec.sample_rate)
}

/// Write a signal as a 32-bit float mono WAV file.
pub fn write_wav(signal: &Signal, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate_hz(),
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound_err(e, path))?;
    for &s in signal.samples() {
        writer
            .write_sample(s as f32)
            .map_err(|e| map_hound_err(e, path))?;
    }
    writer.finalize().map_err(|e| map_hound_err(e, path))
}

fn map_hound_err(e: hound::Error, path: &Path) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io {
            path: path.to_path_buf(),
            source: io,
        },
        hound::Error::FormatError(detail) => Error::MalformedWav {
            path: path.to_path_buf(),
            detail: detail.to_string(),
        },
        hound::Error::Unsupported => Error::UnsupportedWavEncoding {
            path: path.to_path_buf(),
            detail: "unsupported by WAV decoder".into(),
        },
        other => Error::MalformedWav {
            path: path.to_path_buf(),
            detail: other.to_string(),
        },
    }
}

// ---------------------------------------------------------------------------
// Raw float32 + JSON sidecar fallback
// ---------------------------------------------------------------------------

#[derive(serde::Serialize, serde::Deserialize)]
struct RawSidecar {
    sample_rate_hz: u32,
    length: usize,
}

/// Read raw little-endian float32 samples described by `<path>.json`.
pub fn read_raw_f32(path: impl AsRef<Path>) -> Result<Signal> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let sidecar_path = sidecar_for(path);
    let sidecar_text =
        std::fs::read_to_string(&sidecar_path).map_err(|e| Error::InvalidSidecar {
            path: path.to_path_buf(),
            detail: format!("cannot read {}: {e}", sidecar_path.display()),
        })?;
    let sidecar: RawSidecar =
        serde_json::from_str(&sidecar_text).map_err(|e| Error::InvalidSidecar {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;

    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
    if bytes.len() != sidecar.length * 4 {
        return Err(Error::InvalidSidecar {
            path: path.to_path_buf(),
            detail: format!(
                "sidecar says {} samples but file holds {} bytes",
                sidecar.length,
                bytes.len()
            ),
        });
    }
    let samples = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    Signal::new(samples, sidecar.sample_rate_hz)
}

/// Write raw little-endian float32 samples plus the `<path>.json` sidecar.
pub fn write_raw_f32(signal: &Signal, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(signal.len() * 4);
    for &s in signal.samples() {
        bytes.extend_from_slice(&(s as f32).to_le_bytes());
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
    let sidecar = RawSidecar {
        sample_rate_hz: signal.sample_rate_hz(),
        length: signal.len(),
    };
    let sidecar_path = sidecar_for(path);
    std::fs::write(&sidecar_path, serde_json::to_string_pretty(&sidecar).unwrap()).map_err(|e| {
        Error::Io {
            path: sidecar_path.clone(),
            source: e,
        }
    })
}

fn sidecar_for(path: &Path) -> std::path::PathBuf {
    let mut p = path.to_path_buf().into_os_string();
    p.push(".json");
    p.into()
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

const RESAMPLE_HALF_WIDTH: usize = 32; // 64 taps per phase
const KAISER_BETA: f64 = 8.6;

/// Band-limited rational resampling with compensated group delay.
///
/// Polyphase windowed-sinc design: 64 taps per phase, Kaiser beta = 8.6,
/// stopband edge at 0.45 x min(source, target) rate. Output length is
/// round(len * target / source) and output sample m sits at input time
/// m * source / target, so the filter's group delay does not shift the
/// signal.
pub fn resample(signal: &Signal, target_rate_hz: u32) -> Result<Signal> {
    if target_rate_hz == 0 {
        return Err(Error::InvalidArgument("target_rate_hz must be > 0".into()));
    }
    let source_rate = signal.sample_rate_hz();
    if target_rate_hz == source_rate {
        return Ok(signal.clone());
    }

    let g = gcd(source_rate as u64, target_rate_hz as u64);
    let up = (target_rate_hz as u64 / g) as usize;
    let down = (source_rate as u64 / g) as usize;

    let x = signal.samples();
    let out_len = ((x.len() as u128 * target_rate_hz as u128 + source_rate as u128 / 2)
        / source_rate as u128) as usize;

    // Sinc frequency sits half a Kaiser transition width below the spec
    // cutoff so the full stopband attenuation is reached at the cutoff.
    let attenuation_db = KAISER_BETA / 0.1102 + 8.7;
    let transition = (attenuation_db - 7.95)
        / (2.285 * (2 * RESAMPLE_HALF_WIDTH) as f64)
        / std::f64::consts::TAU;
    let cutoff_norm = 0.45 * source_rate.min(target_rate_hz) as f64 / source_rate as f64;
    let fc = (cutoff_norm - 0.5 * transition).max(0.5 * cutoff_norm);

    // Per-phase tap tables: tap i of phase p is the kernel at
    // tau = p/up + HALF - i, covering input offsets q-HALF .. q+HALF.
    let n_taps = 2 * RESAMPLE_HALF_WIDTH + 1;
    let kernel = |tau: f64| -> f64 {
        let t = tau.abs();
        if t > RESAMPLE_HALF_WIDTH as f64 {
            return 0.0;
        }
        let u = t / RESAMPLE_HALF_WIDTH as f64;
        2.0 * fc * sinc(2.0 * fc * tau) * kaiser_i0(KAISER_BETA * (1.0 - u * u).sqrt())
            / kaiser_i0(KAISER_BETA)
    };
    let phase_taps: Vec<Vec<f64>> = (0..up)
        .map(|p| {
            let frac = p as f64 / up as f64;
            (0..n_taps)
                .map(|i| kernel(frac + RESAMPLE_HALF_WIDTH as f64 - i as f64))
                .collect()
        })
        .collect();

    let mut out = Vec::with_capacity(out_len);
    for m in 0..out_len {
        let num = m * down; // input position = num / up
        let q = num / up;
        let taps = &phase_taps[num % up];
        let mut acc = 0.0;
        let start = q as isize - RESAMPLE_HALF_WIDTH as isize;
        for (i, &tap) in taps.iter().enumerate() {
            let n = start + i as isize;
            if n >= 0 && (n as usize) < x.len() {
                acc += x[n as usize] * tap;
            }
        }
        out.push(acc);
    }
    Signal::new(out, target_rate_hz)
}

fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-12 {
        1.0
    } else {
        (std::f64::consts::PI * u).sin() / (std::f64::consts::PI * u)
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
fn kaiser_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..60 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}
