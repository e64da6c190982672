//! Spectral equalization that preconditions the deconvolution.
//!
//! Colored excitations (music) make the convolution operator badly
//! conditioned, slowing the iterative least-squares solver. The pipeline
//! here downsamples both signals, injects a little high-frequency noise
//! so the whitener never divides by a dead band, fits a high-order linear
//! prediction model to the excitation, and applies the same FIR inverse
//! filter to both signals. Because one LTI filter hits both sides, the
//! impulse response relating them is unchanged while the excitation
//! spectrum becomes approximately flat.

use crate::error::{Error, Result};
use crate::signal::{resample, Rng, Signal};

/// Linear prediction model from the Levinson-Durbin recursion.
///
/// Coefficients use the prediction convention `x_hat[n] = sum a_k x[n-k]`,
/// so the whitening (inverse) filter is `[1, -a_1, ..., -a_p]`. The
/// recursion keeps every reflection coefficient below 1 in magnitude,
/// which makes the synthesis filter `1/A(z)` stable.
#[derive(Debug, Clone)]
pub struct LpcModel {
    order: usize,
    coefficients: Vec<f64>,
    gain: f64,
    autocorrelation_len: usize,
}

impl LpcModel {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Prediction coefficients `a_1 .. a_p`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Final prediction-error power.
    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn autocorrelation_len(&self) -> usize {
        self.autocorrelation_len
    }

    /// FIR whitening filter `A(z) = 1 - sum a_k z^-k`, length order + 1.
    pub fn inverse_filter(&self) -> Vec<f64> {
        let mut f = Vec::with_capacity(self.order + 1);
        f.push(1.0);
        f.extend(self.coefficients.iter().map(|a| -a));
        f
    }
}

/// Equalization settings.
#[derive(Debug, Clone)]
pub struct PreconditionConfig {
    pub target_rate_hz: u32,
    pub lpc_order: usize,
    /// Injected noise level relative to each signal's RMS, in dB.
    pub hf_noise_level_db: f64,
    /// High-pass cutoff for the injected noise; clamped to 0.9 x Nyquist.
    pub hf_noise_cutoff_hz: f64,
    pub seed: u64,
}

impl Default for PreconditionConfig {
    fn default() -> Self {
        Self {
            target_rate_hz: 32_000,
            lpc_order: 200,
            hf_noise_level_db: -50.0,
            hf_noise_cutoff_hz: 14_000.0,
            seed: 0,
        }
    }
}

/// Solve the order-`p` forward linear prediction normal equations from
/// autocorrelation lags `r[0..=p]` by the Levinson-Durbin recursion.
pub fn levinson_durbin(autocorr: &[f64], order: usize) -> Result<LpcModel> {
    if autocorr.len() < order + 1 {
        return Err(Error::InvalidArgument(format!(
            "need {} autocorrelation lags, got {}",
            order + 1,
            autocorr.len()
        )));
    }
    if !(autocorr[0] > 0.0) {
        return Err(Error::InvalidArgument(
            "autocorrelation lag 0 must be positive".into(),
        ));
    }

    let mut a = vec![0.0; order];
    let mut energy = autocorr[0];
    for m in 0..order {
        let mut acc = autocorr[m + 1];
        for i in 0..m {
            acc -= a[i] * autocorr[m - i];
        }
        let reflection = acc / energy;
        if !reflection.is_finite() || reflection.abs() >= 1.0 {
            return Err(Error::SingularAutocorrelation {
                order: m + 1,
                reflection,
            });
        }
        a[m] = reflection;
        for i in 0..m / 2 + m % 2 {
            let (lo, hi) = (a[i], a[m - 1 - i]);
            a[i] = lo - reflection * hi;
            if i != m - 1 - i {
                a[m - 1 - i] = hi - reflection * lo;
            }
        }
        energy *= 1.0 - reflection * reflection;
    }

    Ok(LpcModel {
        order,
        coefficients: a,
        gain: energy,
        autocorrelation_len: order + 1,
    })
}

/// Biased autocorrelation, lags `0..=max_lag` (positive semidefinite).
pub fn biased_autocorrelation(samples: &[f64], max_lag: usize) -> Vec<f64> {
    let n = samples.len();
    let mut r = vec![0.0; max_lag + 1];
    for (k, rk) in r.iter_mut().enumerate() {
        if k >= n {
            break;
        }
        let mut acc = 0.0;
        for i in 0..n - k {
            acc += samples[i] * samples[i + k];
        }
        *rk = acc / n as f64;
    }
    r
}

/// Causal FIR filtering, full convolution length (input + taps - 1).
pub fn fir_filter_full(samples: &[f64], taps: &[f64]) -> Vec<f64> {
    crate::operators::fft_convolve(taps, samples, samples.len() + taps.len() - 1)
        .expect("valid lengths")
}

/// One RBJ-style biquad section, direct form II transposed.
fn biquad(samples: &mut [f64], b: [f64; 3], a: [f64; 2]) {
    let (mut z1, mut z2) = (0.0, 0.0);
    for s in samples.iter_mut() {
        let x = *s;
        let y = b[0] * x + z1;
        z1 = b[1] * x - a[0] * y + z2;
        z2 = b[2] * x - a[1] * y;
        *s = y;
    }
}

/// Order-4 Butterworth high-pass as a cascade of two biquads.
pub fn butterworth_highpass4(samples: &mut [f64], cutoff_hz: f64, rate_hz: u32) {
    let w0 = std::f64::consts::TAU * cutoff_hz / rate_hz as f64;
    let (sin_w0, cos_w0) = (w0.sin(), w0.cos());
    for q in [0.541_196_100_146_197, 1.306_562_964_876_377] {
        let alpha = sin_w0 / (2.0 * q);
        let a0 = 1.0 + alpha;
        let b = [
            (1.0 + cos_w0) / 2.0 / a0,
            -(1.0 + cos_w0) / a0,
            (1.0 + cos_w0) / 2.0 / a0,
        ];
        let a = [-2.0 * cos_w0 / a0, (1.0 - alpha) / a0];
        biquad(samples, b, a);
    }
}

fn inject_hf_noise(signal: &Signal, config: &PreconditionConfig, rng: &mut Rng) -> Vec<f64> {
    let mut out = signal.samples().to_vec();
    let sig_rms = signal.rms();
    if sig_rms == 0.0 || out.is_empty() {
        return out;
    }
    let rate = signal.sample_rate_hz();
    let cutoff = config.hf_noise_cutoff_hz.min(0.9 * rate as f64 / 2.0);
    let mut noise = rng.normal_vec(out.len());
    butterworth_highpass4(&mut noise, cutoff, rate);
    let noise_rms =
        (noise.iter().map(|v| v * v).sum::<f64>() / noise.len() as f64).sqrt();
    if noise_rms == 0.0 {
        return out;
    }
    let target_rms = sig_rms * 10f64.powf(config.hf_noise_level_db / 20.0);
    let scale = target_rms / noise_rms;
    for (o, n) in out.iter_mut().zip(&noise) {
        *o += scale * n;
    }
    out
}

/// Equalize an excitation/recording pair with one shared whitening filter.
///
/// Steps: resample both to the target rate, add independently seeded
/// high-passed noise to each, fit the prediction model to the
/// noise-injected excitation, then run the identical FIR inverse filter
/// over both signals. Outputs keep the full filtered length
/// (input + order samples); since the same LTI filter is applied to both
/// sides, the impulse response relating them is exactly preserved.
pub fn whiten_pair(
    x: &Signal,
    y: &Signal,
    config: &PreconditionConfig,
) -> Result<(Signal, Signal, LpcModel)> {
    if x.sample_rate_hz() != y.sample_rate_hz() {
        return Err(Error::SampleRateMismatch {
            left: x.sample_rate_hz(),
            right: y.sample_rate_hz(),
        });
    }
    if config.lpc_order == 0 {
        return Err(Error::InvalidArgument("lpc_order must be >= 1".into()));
    }
    let x_rs = resample(x, config.target_rate_hz)?;
    let y_rs = resample(y, config.target_rate_hz)?;

    let root = Rng::new(config.seed);
    let x_noisy = inject_hf_noise(&x_rs, config, &mut root.child(1));
    let y_noisy = inject_hf_noise(&y_rs, config, &mut root.child(2));

    if x_noisy.len() <= config.lpc_order {
        return Err(Error::InvalidArgument(format!(
            "excitation too short ({} samples) for LPC order {}",
            x_noisy.len(),
            config.lpc_order
        )));
    }
    let autocorr = biased_autocorrelation(&x_noisy, config.lpc_order);
    let model = levinson_durbin(&autocorr, config.lpc_order)?;
    let inverse = model.inverse_filter();

    let x_eq = fir_filter_full(&x_noisy, &inverse);
    let y_eq = fir_filter_full(&y_noisy, &inverse);
    Ok((
        Signal::new(x_eq, config.target_rate_hz)?,
        Signal::new(y_eq, config.target_rate_hz)?,
        model,
    ))
}
