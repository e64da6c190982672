//! Shared estimation pipeline used by the `estimate` and `evaluate`
//! subcommands.

use serde::Serialize;

use anyrir::baselines::{freq_deconv, l2_estimate};
use anyrir::irls::{estimate_rir, DeltaMode, IrlsOptions, IrlsReport};
use anyrir::lsmr::LsmrOptions;
use anyrir::operators::StftConfig;
use anyrir::precondition::{whiten_pair, PreconditionConfig};
use anyrir::{Result, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Anyrir,
    L2,
    Freq,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Anyrir => "anyrir",
            Method::L2 => "l2",
            Method::Freq => "freq",
        }
    }
}

/// RIR length request, resolved against the working sample rate.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RirLenSpec {
    Samples(usize),
    Millis(f64),
}

impl RirLenSpec {
    pub fn resolve(&self, rate_hz: u32) -> usize {
        match *self {
            RirLenSpec::Samples(n) => n,
            RirLenSpec::Millis(ms) => (ms / 1000.0 * rate_hz as f64).round() as usize,
        }
    }
}

/// Fully resolved estimator settings; serialized into the report's
/// config echo.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateSettings {
    pub method: Method,
    pub precondition: bool,
    pub target_rate_hz: u32,
    pub lpc_order: usize,
    pub hf_noise_level_db: f64,
    pub hf_noise_cutoff_hz: f64,
    pub ndft: usize,
    /// `None` means the auto-median threshold.
    pub delta: Option<f64>,
    pub max_irls: usize,
    pub h_rel_tol: f64,
    pub lsmr_atol: f64,
    pub lsmr_btol: f64,
    pub lsmr_max_iters: Option<usize>,
    pub freq_eps: f64,
    pub seed: u64,
}

impl Default for EstimateSettings {
    fn default() -> Self {
        Self {
            method: Method::Anyrir,
            precondition: true,
            target_rate_hz: 32_000,
            lpc_order: 200,
            hf_noise_level_db: -50.0,
            hf_noise_cutoff_hz: 14_000.0,
            ndft: 256,
            delta: None,
            max_irls: 20,
            h_rel_tol: 1e-4,
            lsmr_atol: 1e-6,
            lsmr_btol: 1e-6,
            lsmr_max_iters: None,
            freq_eps: 1e-8,
            seed: 0,
        }
    }
}

impl EstimateSettings {
    pub fn irls_options(&self) -> IrlsOptions {
        IrlsOptions {
            max_irls_iters: self.max_irls,
            h_rel_tol: self.h_rel_tol,
            delta_mode: match self.delta {
                Some(v) => DeltaMode::Fixed(v),
                None => DeltaMode::AutoMedian { scale: 1.0 },
            },
            delta_min: None,
            lsmr: self.lsmr_options(),
        }
    }

    pub fn lsmr_options(&self) -> LsmrOptions {
        LsmrOptions {
            atol: self.lsmr_atol,
            btol: self.lsmr_btol,
            max_iters: self.lsmr_max_iters,
            ..Default::default()
        }
    }
}

/// Result of one estimation run.
pub struct EstimateOutcome {
    pub h: Vec<f64>,
    /// Sample rate the estimate lives at (the preconditioned rate when
    /// equalization ran).
    pub working_rate_hz: u32,
    pub rir_len: usize,
    pub irls_report: Option<IrlsReport>,
    pub preconditioned: bool,
}

/// Run one method over an excitation/recording pair.
///
/// Equalization never upsamples: the working rate is
/// `min(input rate, target rate)`.
pub fn run_estimate(
    x: &Signal,
    y: &Signal,
    rir_len: RirLenSpec,
    settings: &EstimateSettings,
) -> Result<EstimateOutcome> {
    if x.sample_rate_hz() != y.sample_rate_hz() {
        return Err(anyrir::Error::SampleRateMismatch {
            left: x.sample_rate_hz(),
            right: y.sample_rate_hz(),
        });
    }
    // spectral division operates on the raw pair
    let precondition = settings.precondition && settings.method != Method::Freq;

    let (x_work, y_work, rate) = if precondition {
        let target = settings.target_rate_hz.min(x.sample_rate_hz());
        let config = PreconditionConfig {
            target_rate_hz: target,
            lpc_order: settings.lpc_order,
            hf_noise_level_db: settings.hf_noise_level_db,
            hf_noise_cutoff_hz: settings.hf_noise_cutoff_hz,
            seed: settings.seed,
        };
        let (x_eq, y_eq, _model) = whiten_pair(x, y, &config)?;
        (x_eq, y_eq, target)
    } else {
        (x.clone(), y.clone(), x.sample_rate_hz())
    };

    let n = rir_len.resolve(rate);
    let stft = StftConfig::new(settings.ndft)?;

    match settings.method {
        Method::Anyrir => {
            let report = estimate_rir(&x_work, &y_work, n, stft, &settings.irls_options())?;
            Ok(EstimateOutcome {
                h: report.h_estimate.clone(),
                working_rate_hz: rate,
                rir_len: n,
                irls_report: Some(report),
                preconditioned: precondition,
            })
        }
        Method::L2 => {
            let h = l2_estimate(&x_work, &y_work, n, stft, &settings.lsmr_options())?;
            Ok(EstimateOutcome {
                h,
                working_rate_hz: rate,
                rir_len: n,
                irls_report: None,
                preconditioned: precondition,
            })
        }
        Method::Freq => {
            let h = freq_deconv(&x_work, &y_work, n, settings.freq_eps)?;
            Ok(EstimateOutcome {
                h,
                working_rate_hz: rate,
                rir_len: n,
                irls_report: None,
                preconditioned: false,
            })
        }
    }
}
