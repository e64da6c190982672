//! Seeded synthetic scene generation for reproducible evaluation.
//!
//! A scene is a music-like excitation convolved with a decaying random
//! impulse response, plus stationary noise at a prescribed SNR and
//! non-overlapping transient burst events covering a prescribed fraction
//! of the recording. Everything derives from one 64-bit seed, so scenes
//! are bit-identical across runs and every component can be regenerated
//! for audits.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{fft_convolve, next_fast_len};
use crate::signal::{read_wav, write_wav, Rng, Signal};

const MIN_EVENT_S: f64 = 0.020;
const MAX_EVENT_S: f64 = 0.200;

/// What plays through the loudspeaker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcitationKind {
    /// Random-pitch notes with 8 harmonics at 1/k amplitudes.
    HarmonicTones,
    /// Gaussian noise with a -6 dB/octave power spectral density.
    ColoredNoise,
    /// An external WAV file, resampled to the scene rate.
    WavFile(PathBuf),
}

/// Optional playback-chain degradation applied to the recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degradation {
    None,
    /// Additive noise shaped by the recording's own smoothed spectral
    /// envelope, at `level_db` (negative) relative to the recording RMS.
    SpectralSurrogate { level_db: f64 },
}

/// Scene recipe. `None` fields are drawn from the seed at generation
/// time; the drawn values are recorded in [`ResolvedScene`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub seed: u64,
    pub sample_rate_hz: u32,
    pub duration_s: f64,
    pub rir_t60_s: f64,
    /// RIR length in samples; `None` means `ceil(1.2 * t60 * rate)`.
    pub rir_len: Option<usize>,
    pub stationary_snr_db: f64,
    /// Fraction of the recording covered by burst events; `None` draws
    /// uniformly from [0.2, 0.5].
    pub nonstat_coverage: Option<f64>,
    /// Burst peak level above the clean-signal RMS in dB; `None` draws
    /// uniformly from [0, 10].
    pub nonstat_peak_db: Option<f64>,
    pub excitation_kind: ExcitationKind,
    pub degradation: Degradation,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sample_rate_hz: 16_000,
            duration_s: 30.0,
            rir_t60_s: 0.3,
            rir_len: None,
            stationary_snr_db: 50.0,
            nonstat_coverage: None,
            nonstat_peak_db: None,
            excitation_kind: ExcitationKind::ColoredNoise,
            degradation: Degradation::None,
        }
    }
}

/// Values drawn from the seed while generating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedScene {
    pub rir_len: usize,
    pub coverage: f64,
    pub peak_db: f64,
}

/// One logged burst event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEvent {
    pub start_sample: usize,
    pub length: usize,
    pub kind: String,
}

/// A generated scene with its full provenance.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub excitation: Signal,
    pub rir_true: Vec<f64>,
    pub recording: Signal,
    pub event_log: Vec<SceneEvent>,
    pub config: SceneConfig,
    pub resolved: ResolvedScene,
}

/// Scene plus its additive components, for audits and weight-map checks.
#[derive(Debug, Clone)]
pub struct SceneParts {
    pub scene: SyntheticScene,
    /// `excitation * rir_true`, full convolution length.
    pub clean: Vec<f64>,
    pub stationary_noise: Vec<f64>,
    pub events_signal: Vec<f64>,
}

/// Exponentially decaying Gaussian tail behind a unit-ratio direct path,
/// normalized to unit energy.
pub fn gen_rir(rng: &mut Rng, t60_s: f64, len: usize, rate: u32) -> Result<Vec<f64>> {
    if !(t60_s > 0.0) || len == 0 {
        return Err(Error::InvalidArgument("t60 and length must be > 0".into()));
    }
    let decay = 6.91 / (t60_s * rate as f64);
    let mut h = vec![0.0; len];
    let mut tail_energy = 0.0;
    for (t, v) in h.iter_mut().enumerate().skip(1) {
        *v = rng.normal() * (-decay * t as f64).exp();
        tail_energy += *v * *v;
    }
    // direct path carrying the same energy as the tail (0 dB ratio)
    h[0] = tail_energy.sqrt();
    if len == 1 {
        h[0] = 1.0;
    }
    let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    h.iter_mut().for_each(|v| *v /= norm);
    Ok(h)
}

/// Gaussian noise with the requested power-spectral-density slope in
/// dB/octave (flat below 20 Hz), unit-peak-agnostic (caller scales).
pub fn shaped_noise(rng: &mut Rng, len: usize, rate: u32, psd_db_per_octave: f64) -> Vec<f64> {
    use rustfft::num_complex::Complex64;
    if len == 0 {
        return Vec::new();
    }
    let n = next_fast_len(len);
    let mut planner = rustfft::FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.normal(), 0.0))
        .collect();
    fft.process(&mut buf);
    let alpha = psd_db_per_octave / (20.0 * std::f64::consts::LOG10_2);
    let f_lo = 20.0;
    let f_ref = 1000.0;
    for (k, c) in buf.iter_mut().enumerate() {
        let f = (k.min(n - k)) as f64 * rate as f64 / n as f64;
        *c *= (f.max(f_lo) / f_ref).powf(alpha);
    }
    ifft.process(&mut buf);
    let scale = 1.0 / n as f64;
    buf[..len].iter().map(|c| c.re * scale).collect()
}

fn peak_normalize(samples: &mut [f64], peak: f64) {
    let max = samples.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if max > 0.0 {
        let s = peak / max;
        samples.iter_mut().for_each(|v| *v *= s);
    }
}

/// Music-like excitation, peak-normalized to 0.5.
pub fn gen_excitation(
    rng: &mut Rng,
    kind: &ExcitationKind,
    duration_s: f64,
    rate: u32,
) -> Result<Signal> {
    if !(duration_s > 0.0) {
        return Err(Error::InvalidArgument("duration must be > 0".into()));
    }
    let len = (duration_s * rate as f64).round() as usize;
    let mut samples = match kind {
        ExcitationKind::ColoredNoise => shaped_noise(rng, len, rate, -6.0),
        ExcitationKind::HarmonicTones => {
            let mut out = vec![0.0; len];
            let mut pos = 0usize;
            while pos < len {
                let note_len = ((rng.uniform_in(0.2, 1.0) * rate as f64) as usize)
                    .min(len - pos)
                    .max(1);
                let f0 = rng.uniform_in(110.0, 880.0);
                let attack = (0.02 * rate as f64).min(note_len as f64 * 0.2).max(1.0);
                let tau = note_len as f64 / 3.0;
                let mut phases = [0.0; 8];
                for p in phases.iter_mut() {
                    *p = rng.uniform_in(0.0, std::f64::consts::TAU);
                }
                for t in 0..note_len {
                    let env = (t as f64 / attack).min(1.0) * (-(t as f64) / tau).exp();
                    let mut v = 0.0;
                    for (k, phase) in phases.iter().enumerate() {
                        let freq = f0 * (k + 1) as f64;
                        if freq < 0.45 * rate as f64 {
                            let w = std::f64::consts::TAU * freq / rate as f64;
                            v += (w * t as f64 + phase).sin() / (k + 1) as f64;
                        }
                    }
                    out[pos + t] = env * v;
                }
                pos += note_len;
            }
            out
        }
        ExcitationKind::WavFile(path) => {
            let sig = read_wav(path)?;
            let sig = crate::signal::resample(&sig, rate)?;
            let mut s = sig.into_samples();
            s.truncate(len);
            s
        }
    };
    peak_normalize(&mut samples, 0.5);
    Signal::new(samples, rate)
}

/// Deterministic integer split of `free` into `parts` nonnegative gaps.
fn split_gaps(rng: &mut Rng, free: usize, parts: usize) -> Vec<usize> {
    let weights: Vec<f64> = (0..parts).map(|_| rng.uniform() + 1e-9).collect();
    let total: f64 = weights.iter().sum();
    let mut gaps = Vec::with_capacity(parts);
    let mut cum = 0.0;
    let mut prev = 0usize;
    for w in &weights {
        cum += w;
        let upto = ((cum / total) * free as f64).round() as usize;
        gaps.push(upto.saturating_sub(prev));
        prev = upto.max(prev);
    }
    gaps
}

/// Generate a scene and keep its additive components.
pub fn gen_scene_parts(config: &SceneConfig) -> Result<SceneParts> {
    if let Some(c) = config.nonstat_coverage {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::InvalidArgument(
                "nonstat_coverage must be in [0, 1]".into(),
            ));
        }
    }
    if !(config.rir_t60_s > 0.0) {
        return Err(Error::InvalidArgument("rir_t60_s must be > 0".into()));
    }
    let rate = config.sample_rate_hz;
    let root = Rng::new(config.seed);

    let mut resolve_rng = root.child(5);
    let coverage = config
        .nonstat_coverage
        .unwrap_or_else(|| resolve_rng.uniform_in(0.2, 0.5));
    let peak_db = config
        .nonstat_peak_db
        .unwrap_or_else(|| resolve_rng.uniform_in(0.0, 10.0));
    let rir_len = config
        .rir_len
        .unwrap_or((1.2 * config.rir_t60_s * rate as f64).ceil() as usize);

    let excitation = gen_excitation(
        &mut root.child(1),
        &config.excitation_kind,
        config.duration_s,
        rate,
    )?;
    let l = excitation.len();
    if l == 0 {
        return Err(Error::InvalidArgument("empty excitation".into()));
    }
    let rir_true = gen_rir(&mut root.child(2), config.rir_t60_s, rir_len, rate)?;
    let m = l + rir_len - 1;
    let clean = fft_convolve(excitation.samples(), &rir_true, m)?;

    // stationary noise scaled for the exact target SNR
    let clean_power = clean.iter().map(|v| v * v).sum::<f64>() / m as f64;
    let mut stationary = root.child(3).normal_vec(m);
    let noise_power = stationary.iter().map(|v| v * v).sum::<f64>() / m as f64;
    let target_power = clean_power / 10f64.powf(config.stationary_snr_db / 10.0);
    let noise_scale = if noise_power > 0.0 {
        (target_power / noise_power).sqrt()
    } else {
        0.0
    };
    stationary.iter_mut().for_each(|v| *v *= noise_scale);

    // burst events within the excitation span, exact total coverage of
    // the recording length
    let mut events_rng = root.child(4);
    let target_total = (coverage * m as f64).round() as usize;
    if target_total > l {
        return Err(Error::InfeasibleScene(format!(
            "coverage {coverage:.2} of the {m}-sample recording needs {target_total} \
             event samples, but events must fit inside the {l}-sample excitation span"
        )));
    }
    let min_ev = ((MIN_EVENT_S * rate as f64) as usize).max(1);
    let max_ev = ((MAX_EVENT_S * rate as f64) as usize).max(min_ev);
    let mut lengths = Vec::new();
    let mut placed = 0usize;
    while target_total - placed > max_ev {
        let ev = events_rng.below(max_ev - min_ev + 1) + min_ev;
        lengths.push(ev);
        placed += ev;
    }
    let remaining = target_total - placed;
    if remaining >= min_ev || lengths.is_empty() {
        if remaining > 0 {
            lengths.push(remaining);
        }
    } else if let Some(last) = lengths.last_mut() {
        *last += remaining;
    }

    let free = l - lengths.iter().sum::<usize>();
    let gaps = split_gaps(&mut events_rng, free, lengths.len() + 1);
    let mut events_signal = vec![0.0; m];
    let mut event_log = Vec::with_capacity(lengths.len());
    let clean_rms = clean_power.sqrt();
    let peak_target = clean_rms * 10f64.powf(peak_db / 20.0);
    let mut cursor = 0usize;
    for (i, &len) in lengths.iter().enumerate() {
        cursor += gaps[i];
        let start = cursor;
        let tau = len as f64 / 3.0;
        let mut burst: Vec<f64> = (0..len)
            .map(|t| events_rng.normal() * (-(t as f64) / tau).exp())
            .collect();
        let peak = burst.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if peak > 0.0 {
            let s = peak_target / peak;
            burst.iter_mut().for_each(|v| *v *= s);
        }
        for (t, &b) in burst.iter().enumerate() {
            events_signal[start + t] += b;
        }
        event_log.push(SceneEvent {
            start_sample: start,
            length: len,
            kind: "burst".into(),
        });
        cursor += len;
    }

    let mut recording: Vec<f64> = clean
        .iter()
        .zip(&stationary)
        .zip(&events_signal)
        .map(|((c, s), e)| c + s + e)
        .collect();

    if let Degradation::SpectralSurrogate { level_db } = config.degradation {
        let sig = Signal::new(recording, rate)?;
        recording = apply_degradation_surrogate(&sig, level_db, &mut root.child(6))?
            .into_samples();
    }

    Ok(SceneParts {
        scene: SyntheticScene {
            excitation,
            rir_true,
            recording: Signal::new(recording, rate)?,
            event_log,
            config: config.clone(),
            resolved: ResolvedScene {
                rir_len,
                coverage,
                peak_db,
            },
        },
        clean,
        stationary_noise: stationary,
        events_signal,
    })
}

/// Generate a scene.
pub fn gen_scene(config: &SceneConfig) -> Result<SyntheticScene> {
    Ok(gen_scene_parts(config)?.scene)
}

/// Add noise shaped by the signal's own smoothed spectral envelope at
/// `level_db` (negative) relative to the signal RMS. The realized SNR is
/// exactly `-level_db`.
pub fn apply_degradation_surrogate(s: &Signal, level_db: f64, rng: &mut Rng) -> Result<Signal> {
    use rustfft::num_complex::Complex64;
    if !(level_db < 0.0) {
        return Err(Error::InvalidArgument("level_db must be < 0".into()));
    }
    if s.is_empty() {
        return Ok(s.clone());
    }
    let len = s.len();
    let n = next_fast_len(len);
    let mut planner = rustfft::FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);

    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    for (b, &v) in spec.iter_mut().zip(s.samples()) {
        b.re = v;
    }
    fft.process(&mut spec);

    // smoothed magnitude envelope, symmetric in frequency
    let win = (n / 256).max(3);
    let mags: Vec<f64> = spec.iter().map(|c| c.norm()).collect();
    let mut env = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..win.min(n) {
        acc += mags[i];
    }
    // circular moving average
    for k in 0..n {
        env[k] = acc / win as f64;
        let out_i = (k + n - win / 2) % n;
        let in_i = (k + win - win / 2) % n;
        acc += mags[in_i] - mags[out_i];
    }
    for k in 1..n / 2 {
        let avg = 0.5 * (env[k] + env[n - k]);
        env[k] = avg;
        env[n - k] = avg;
    }

    let mut noise: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.normal(), 0.0))
        .collect();
    fft.process(&mut noise);
    for (c, e) in noise.iter_mut().zip(&env) {
        *c *= e;
    }
    ifft.process(&mut noise);
    let scale = 1.0 / n as f64;
    let mut shaped: Vec<f64> = noise[..len].iter().map(|c| c.re * scale).collect();

    let sig_rms = s.rms();
    let noise_rms = (shaped.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
    if noise_rms > 0.0 && sig_rms > 0.0 {
        let target = sig_rms * 10f64.powf(level_db / 20.0);
        let k = target / noise_rms;
        shaped.iter_mut().for_each(|v| *v *= k);
    }
    let out: Vec<f64> = s.samples().iter().zip(&shaped).map(|(a, b)| a + b).collect();
    Signal::new(out, s.sample_rate_hz())
}

// ---------------------------------------------------------------------------
// Scene directory serialization
// ---------------------------------------------------------------------------

/// On-disk scene metadata (`scene.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneManifest {
    pub schema_version: u32,
    pub config: SceneConfig,
    pub resolved: ResolvedScene,
    pub event_log: Vec<SceneEvent>,
    pub excitation_len: usize,
    pub recording_len: usize,
}

/// Write `excitation.wav`, `recording.wav`, `rir_true.wav`, `scene.json`.
pub fn save_scene(scene: &SyntheticScene, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    write_wav(&scene.excitation, dir.join("excitation.wav"))?;
    write_wav(&scene.recording, dir.join("recording.wav"))?;
    write_wav(
        &Signal::new(scene.rir_true.clone(), scene.config.sample_rate_hz)?,
        dir.join("rir_true.wav"),
    )?;
    let manifest = SceneManifest {
        schema_version: 1,
        config: scene.config.clone(),
        resolved: scene.resolved.clone(),
        event_log: scene.event_log.clone(),
        excitation_len: scene.excitation.len(),
        recording_len: scene.recording.len(),
    };
    let path = dir.join("scene.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap()).map_err(|e| {
        Error::Io {
            path,
            source: e,
        }
    })
}

/// A scene read back from disk (WAV-quantized signals).
#[derive(Debug, Clone)]
pub struct LoadedScene {
    pub excitation: Signal,
    pub recording: Signal,
    pub rir_true: Vec<f64>,
    pub manifest: SceneManifest,
}

/// Read a scene directory written by [`save_scene`].
pub fn load_scene(dir: impl AsRef<Path>) -> Result<LoadedScene> {
    let dir = dir.as_ref();
    let manifest_path = dir.join("scene.json");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::Io {
        path: manifest_path.clone(),
        source: e,
    })?;
    let manifest: SceneManifest =
        serde_json::from_str(&text).map_err(|e| Error::InvalidSidecar {
            path: manifest_path,
            detail: e.to_string(),
        })?;
    Ok(LoadedScene {
        excitation: read_wav(dir.join("excitation.wav"))?,
        recording: read_wav(dir.join("recording.wav"))?,
        rir_true: read_wav(dir.join("rir_true.wav"))?.into_samples(),
        manifest,
    })
}
