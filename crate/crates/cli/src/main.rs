//! Command-line tools for robust room impulse response estimation:
//! estimate an RIR from an excitation/recording pair, generate synthetic
//! evaluation scenes, batch-evaluate estimators against ground truth, and
//! export energy decay curves.

mod cmds;
mod pipeline;
mod util;

use clap::{Args, Parser, Subcommand};

use pipeline::Method;

#[derive(Parser)]
#[command(name = "anyrir", version, about = "Robust room impulse response estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate an RIR from an excitation WAV and an in-room recording.
    Estimate(EstimateArgs),
    /// Generate seeded synthetic scenes for evaluation.
    Simulate(SimulateArgs),
    /// Run estimators over a scene corpus and tabulate errors.
    Evaluate(EvaluateArgs),
    /// Export the Schroeder energy decay curve of an RIR.
    Edc(EdcArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// Clean excitation (WAV, or .f32/.raw with JSON sidecar).
    #[arg(long)]
    excitation: std::path::PathBuf,
    /// In-room recording of the excitation.
    #[arg(long)]
    recording: std::path::PathBuf,
    /// RIR length in samples (at the working rate).
    #[arg(long, group = "rirlen", required = true)]
    rir_len: Option<usize>,
    /// RIR length in milliseconds, converted at the working rate.
    #[arg(long, group = "rirlen")]
    rir_ms: Option<f64>,
    #[arg(long, value_enum, default_value = "anyrir")]
    method: Method,
    /// Skip the whitening/equalization stage.
    #[arg(long)]
    no_precondition: bool,
    /// STFT frame length in samples.
    #[arg(long, default_value_t = 256)]
    ndft: usize,
    /// Huber threshold: "auto" (median-based) or a fixed value.
    #[arg(long, default_value = "auto")]
    delta: String,
    /// Maximum reweighting passes.
    #[arg(long, default_value_t = 20)]
    max_irls: usize,
    #[arg(long, default_value_t = 1e-6)]
    lsmr_atol: f64,
    #[arg(long, default_value_t = 1e-6)]
    lsmr_btol: f64,
    #[arg(long)]
    lsmr_max_iters: Option<usize>,
    /// Equalization target rate; never upsamples.
    #[arg(long, default_value_t = 32_000)]
    target_rate: u32,
    #[arg(long, default_value_t = 200)]
    lpc_order: usize,
    /// Spectral floor for the frequency-domain method.
    #[arg(long, default_value_t = 1e-8)]
    freq_eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "anyrir-out")]
    out_dir: std::path::PathBuf,
    /// Also write the final TF weight matrix as CSV (anyrir only).
    #[arg(long)]
    dump_weights: bool,
    /// Reference RIR; adds h_error_db to the report.
    #[arg(long)]
    ground_truth: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    out_dir: std::path::PathBuf,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16_000)]
    sample_rate: u32,
    #[arg(long, default_value_t = 30.0)]
    duration_s: f64,
    #[arg(long, default_value_t = 0.3)]
    t60: f64,
    /// RIR length in samples; default ceil(1.2 * t60 * rate).
    #[arg(long)]
    rir_len: Option<usize>,
    #[arg(long, default_value_t = 50.0)]
    snr_db: f64,
    /// Non-stationary coverage fraction; default drawn from [0.2, 0.5].
    #[arg(long)]
    coverage: Option<f64>,
    /// Burst peak above signal RMS in dB; default drawn from [0, 10].
    #[arg(long)]
    peak_db: Option<f64>,
    /// "colored_noise", "harmonic_tones", or a WAV path.
    #[arg(long, default_value = "colored_noise")]
    excitation: String,
    /// Apply the spectral degradation surrogate at this level (dB < 0).
    #[arg(long)]
    degradation_db: Option<f64>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Scene directory, or a directory of scene directories.
    #[arg(long)]
    scenes: std::path::PathBuf,
    /// Methods to run.
    #[arg(long, value_enum, value_delimiter = ',',
          default_values_t = vec![Method::Anyrir, Method::L2, Method::Freq])]
    methods: Vec<Method>,
    /// Parallel scene workers; default from ANYRIR_JOBS, else 1.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = "anyrir-eval")]
    out_dir: std::path::PathBuf,
    #[arg(long)]
    no_precondition: bool,
    #[arg(long, default_value_t = 256)]
    ndft: usize,
    #[arg(long, default_value = "auto")]
    delta: String,
    #[arg(long, default_value_t = 20)]
    max_irls: usize,
    #[arg(long, default_value_t = 1e-6)]
    lsmr_atol: f64,
    #[arg(long, default_value_t = 1e-6)]
    lsmr_btol: f64,
    #[arg(long)]
    lsmr_max_iters: Option<usize>,
    #[arg(long, default_value_t = 32_000)]
    target_rate: u32,
    #[arg(long, default_value_t = 200)]
    lpc_order: usize,
    #[arg(long, default_value_t = 1e-8)]
    freq_eps: f64,
}

#[derive(Args)]
struct EdcArgs {
    /// RIR to analyze (WAV).
    #[arg(long)]
    rir: std::path::PathBuf,
    #[arg(long, default_value = "edc.csv")]
    out: std::path::PathBuf,
}

/// CLI failure carrying its process exit code.
pub struct CliError {
    pub message: String,
    pub exit_code: i32,
}

impl From<anyrir::Error> for CliError {
    fn from(e: anyrir::Error) -> Self {
        let exit_code = match &e {
            anyrir::Error::Numerical(_) | anyrir::Error::SingularAutocorrelation { .. } => 4,
            _ => 3,
        };
        CliError {
            message: e.to_string(),
            exit_code,
        }
    }
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            exit_code: 2,
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            exit_code: 3,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Estimate(args) => cmds::estimate(args),
        Command::Simulate(args) => cmds::simulate(args),
        Command::Evaluate(args) => cmds::evaluate(args),
        Command::Edc(args) => cmds::edc(args),
    };
    if let Err(e) = outcome {
        let payload = serde_json::json!({
            "error": e.message,
            "exit_code": e.exit_code,
        });
        eprintln!("{payload}");
        std::process::exit(e.exit_code);
    }
}
