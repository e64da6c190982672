//! Baseline estimators and evaluation metrics.
//!
//! * [`l2_estimate`] — plain least squares over the time-frequency
//!   residual (one unweighted pass of the reweighted estimator).
//! * [`freq_deconv`] — regularized frequency-domain spectral division.
//! * [`h_error_db`] — normalized squared estimation error in dB.
//! * [`edc`] — Schroeder backward-integrated energy decay curve.

use std::io::Write;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::irls::{build_operator, solve_weighted_subproblem};
use crate::lsmr::LsmrOptions;
use crate::operators::{next_fast_len, StftConfig};
use crate::signal::Signal;

/// Least-squares estimate over the time-frequency residual with unit
/// weights; identical to the first pass of the reweighted estimator,
/// bit for bit.
pub fn l2_estimate(
    x: &Signal,
    y: &Signal,
    rir_len: usize,
    stft: StftConfig,
    lsmr_opts: &LsmrOptions,
) -> Result<Vec<f64>> {
    let op = build_operator(x, y, rir_len, stft)?;
    let sy = op.spectrogram_of(y.samples());
    let solve = solve_weighted_subproblem(&op, &sy, lsmr_opts)?;
    Ok(solve.solution)
}

/// Frequency-domain deconvolution with a Tikhonov-style spectral floor:
/// `H = Y conj(X) / (|X|^2 + eps * max|X|^2)`, inverse-transformed and
/// truncated to `rir_len`.
pub fn freq_deconv(x: &Signal, y: &Signal, rir_len: usize, eps: f64) -> Result<Vec<f64>> {
    if x.sample_rate_hz() != y.sample_rate_hz() {
        return Err(Error::SampleRateMismatch {
            left: x.sample_rate_hz(),
            right: y.sample_rate_hz(),
        });
    }
    if rir_len == 0 {
        return Err(Error::InvalidArgument("rir_len must be >= 1".into()));
    }
    if x.samples().iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidArgument(
            "excitation is identically zero".into(),
        ));
    }
    let full = x.len() + rir_len - 1;
    let m_fft = next_fast_len(full.max(y.len()));
    let mut planner = rustfft::FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(m_fft);
    let ifft = planner.plan_fft_inverse(m_fft);

    let mut sx = vec![Complex64::new(0.0, 0.0); m_fft];
    for (b, &v) in sx.iter_mut().zip(x.samples()) {
        b.re = v;
    }
    fft.process(&mut sx);
    let mut sy = vec![Complex64::new(0.0, 0.0); m_fft];
    for (b, &v) in sy.iter_mut().zip(y.samples()) {
        b.re = v;
    }
    fft.process(&mut sy);

    let max_power = sx.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
    let floor = eps * max_power;
    let mut h_spec: Vec<Complex64> = sx
        .iter()
        .zip(&sy)
        .map(|(xk, yk)| yk * xk.conj() / (xk.norm_sqr() + floor))
        .collect();
    ifft.process(&mut h_spec);
    let scale = 1.0 / m_fft as f64;
    Ok(h_spec[..rir_len].iter().map(|c| c.re * scale).collect())
}

/// Normalized squared error `10 log10(|h_est - h_true|^2 / |h_true|^2)`,
/// clamped to -120 dB; the shorter vector is zero-padded.
pub fn h_error_db(h_est: &[f64], h_true: &[f64]) -> Result<f64> {
    let den: f64 = h_true.iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(Error::InvalidArgument(
            "reference impulse response is zero".into(),
        ));
    }
    let n = h_est.len().max(h_true.len());
    let mut num = 0.0;
    for i in 0..n {
        let a = h_est.get(i).copied().unwrap_or(0.0);
        let b = h_true.get(i).copied().unwrap_or(0.0);
        num += (a - b) * (a - b);
    }
    Ok((10.0 * (num / den).log10()).max(-120.0))
}

/// Schroeder energy decay curve in dB, floored at -120.
#[derive(Debug, Clone)]
pub struct EdcCurve {
    values_db: Vec<f64>,
    sample_rate_hz: u32,
}

impl EdcCurve {
    pub fn values_db(&self) -> &[f64] {
        &self.values_db
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.values_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values_db.is_empty()
    }

    /// Time axis value for index `t`.
    pub fn time_s(&self, t: usize) -> f64 {
        t as f64 / self.sample_rate_hz as f64
    }
}

/// Backward-integrated energy decay: `10 log10(sum_{tau>=t} h^2 / sum h^2)`.
pub fn edc(h: &[f64], sample_rate_hz: u32) -> Result<EdcCurve> {
    let total: f64 = h.iter().map(|v| v * v).sum();
    if total == 0.0 || h.is_empty() {
        return Err(Error::InvalidArgument(
            "impulse response has zero energy".into(),
        ));
    }
    let mut values_db = vec![0.0; h.len()];
    let mut tail = 0.0;
    for (t, &v) in h.iter().enumerate().rev() {
        tail += v * v;
        values_db[t] = (10.0 * (tail / total).log10()).max(-120.0);
    }
    values_db[0] = 0.0;
    Ok(EdcCurve {
        values_db,
        sample_rate_hz,
    })
}

/// Straight-line slope of the decay between its -5 dB and -25 dB
/// crossings, in dB per second.
pub fn edc_slope_db_per_s(curve: &EdcCurve) -> Option<f64> {
    let first_at = |level: f64| curve.values_db.iter().position(|&v| v <= level);
    let i5 = first_at(-5.0)?;
    let i25 = first_at(-25.0)?;
    if i25 <= i5 {
        return None;
    }
    let dt = (i25 - i5) as f64 / curve.sample_rate_hz as f64;
    Some((curve.values_db[i25] - curve.values_db[i5]) / dt)
}

/// Write an EDC as RFC-4180 CSV with a `time_s,edc_db` header.
pub fn write_edc_csv(curve: &EdcCurve, out: &mut dyn Write) -> std::io::Result<()> {
    out.write_all(b"time_s,edc_db\r\n")?;
    for (t, v) in curve.values_db.iter().enumerate() {
        writeln!(out, "{},{}\r", curve.time_s(t), v)?;
    }
    Ok(())
}

/// Write a `frames x fft_len` weight matrix as CSV, one frame per row.
pub fn write_weights_csv(
    weights: &[f64],
    frames: usize,
    fft_len: usize,
    out: &mut dyn Write,
) -> std::io::Result<()> {
    assert_eq!(weights.len(), frames * fft_len, "weight matrix shape");
    for row in weights.chunks(fft_len) {
        let mut first = true;
        for w in row {
            if !first {
                out.write_all(b",")?;
            }
            write!(out, "{w}")?;
            first = false;
        }
        out.write_all(b"\r\n")?;
    }
    Ok(())
}
