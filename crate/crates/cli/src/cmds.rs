//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use anyrir::baselines::{h_error_db, write_edc_csv, write_weights_csv};
use anyrir::irls::IterationRecord;
use anyrir::signal::splitmix64;
use anyrir::synth::{
    gen_scene, load_scene, save_scene, Degradation, ExcitationKind, SceneConfig,
};
use anyrir::{resample, Signal};

use crate::pipeline::{run_estimate, EstimateOutcome, EstimateSettings, RirLenSpec};
use crate::util::{load_signal, mean_std, write_atomic, write_wav_atomic};
use crate::{CliError, EdcArgs, EstimateArgs, EvaluateArgs, SimulateArgs};

type CliResult = Result<(), CliError>;

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct Timings {
    read_ms: f64,
    precondition_and_estimate_ms: f64,
    write_ms: f64,
}

#[derive(Serialize)]
struct IrlsSummary {
    converged: bool,
    iterations: Vec<IterationRecord>,
}

#[derive(Serialize)]
struct ConfigEcho {
    excitation: PathBuf,
    recording: PathBuf,
    ground_truth: Option<PathBuf>,
    rir_len_request: RirLenSpec,
    dump_weights: bool,
    out_dir: PathBuf,
    #[serde(flatten)]
    settings: EstimateSettings,
}

#[derive(Serialize)]
struct RunReport {
    schema_version: u32,
    method: &'static str,
    rir_path: PathBuf,
    sample_rate_hz: u32,
    rir_len: usize,
    preconditioned: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    h_error_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    irls: Option<IrlsSummary>,
    timings_ms: Timings,
    config_echo: ConfigEcho,
}

fn parse_delta(text: &str) -> Result<Option<f64>, CliError> {
    if text.eq_ignore_ascii_case("auto") {
        return Ok(None);
    }
    let v: f64 = text
        .parse()
        .map_err(|_| CliError::usage(format!("--delta must be \"auto\" or a number, got {text:?}")))?;
    if !(v > 0.0) {
        return Err(CliError::usage("--delta must be positive"));
    }
    Ok(Some(v))
}

pub fn estimate(args: EstimateArgs) -> CliResult {
    let settings = EstimateSettings {
        method: args.method,
        precondition: !args.no_precondition,
        target_rate_hz: args.target_rate,
        lpc_order: args.lpc_order,
        ndft: args.ndft,
        delta: parse_delta(&args.delta)?,
        max_irls: args.max_irls,
        lsmr_atol: args.lsmr_atol,
        lsmr_btol: args.lsmr_btol,
        lsmr_max_iters: args.lsmr_max_iters,
        freq_eps: args.freq_eps,
        seed: args.seed,
        ..Default::default()
    };
    let rir_len = match (args.rir_len, args.rir_ms) {
        (Some(n), None) => RirLenSpec::Samples(n),
        (None, Some(ms)) => RirLenSpec::Millis(ms),
        _ => return Err(CliError::usage("give exactly one of --rir-len / --rir-ms")),
    };

    let t_read = Instant::now();
    let x = load_signal(&args.excitation)?;
    let y = load_signal(&args.recording)?;
    let truth = args
        .ground_truth
        .as_deref()
        .map(load_signal)
        .transpose()?;
    let read_ms = t_read.elapsed().as_secs_f64() * 1e3;

    let t_est = Instant::now();
    let outcome = run_estimate(&x, &y, rir_len, &settings)?;
    let estimate_ms = t_est.elapsed().as_secs_f64() * 1e3;

    let h_err = truth
        .map(|t| compare_to_truth(&outcome, &t))
        .transpose()?;

    let t_write = Instant::now();
    std::fs::create_dir_all(&args.out_dir).map_err(|e| anyrir::Error::Io {
        path: args.out_dir.clone(),
        source: e,
    })?;
    let rir_path = args.out_dir.join("rir.wav");
    write_wav_atomic(
        &Signal::new(outcome.h.clone(), outcome.working_rate_hz)?,
        &rir_path,
    )?;

    let curve = anyrir::baselines::edc(&outcome.h, outcome.working_rate_hz)?;
    let mut edc_bytes = Vec::new();
    write_edc_csv(&curve, &mut edc_bytes).map_err(|e| CliError::data(e.to_string()))?;
    write_atomic(&args.out_dir.join("edc.csv"), &edc_bytes)?;

    if args.dump_weights {
        if let Some(report) = &outcome.irls_report {
            let mut w_bytes = Vec::new();
            write_weights_csv(
                &report.final_weights,
                report.frames,
                report.fft_len,
                &mut w_bytes,
            )
            .map_err(|e| CliError::data(e.to_string()))?;
            write_atomic(&args.out_dir.join("weights.csv"), &w_bytes)?;
        }
    }
    let write_ms = t_write.elapsed().as_secs_f64() * 1e3;

    let report = RunReport {
        schema_version: 1,
        method: args.method.name(),
        rir_path: rir_path.clone(),
        sample_rate_hz: outcome.working_rate_hz,
        rir_len: outcome.rir_len,
        preconditioned: outcome.preconditioned,
        h_error_db: h_err,
        irls: outcome.irls_report.as_ref().map(|r| IrlsSummary {
            converged: r.converged,
            iterations: r.iterations.clone(),
        }),
        timings_ms: Timings {
            read_ms,
            precondition_and_estimate_ms: estimate_ms,
            write_ms,
        },
        config_echo: ConfigEcho {
            excitation: args.excitation,
            recording: args.recording,
            ground_truth: args.ground_truth,
            rir_len_request: rir_len,
            dump_weights: args.dump_weights,
            out_dir: args.out_dir.clone(),
            settings,
        },
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_atomic(&args.out_dir.join("report.json"), json.as_bytes())?;
    println!("{json}");
    Ok(())
}

/// Error against the reference, resampling the reference if the working
/// rate differs.
fn compare_to_truth(outcome: &EstimateOutcome, truth: &Signal) -> Result<f64, CliError> {
    let aligned = if truth.sample_rate_hz() == outcome.working_rate_hz {
        truth.clone()
    } else {
        resample(truth, outcome.working_rate_hz)?
    };
    Ok(h_error_db(&outcome.h, aligned.samples())?)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub fn simulate(args: SimulateArgs) -> CliResult {
    let excitation_kind = match args.excitation.as_str() {
        "colored_noise" => ExcitationKind::ColoredNoise,
        "harmonic_tones" => ExcitationKind::HarmonicTones,
        path => ExcitationKind::WavFile(PathBuf::from(path)),
    };
    let degradation = match args.degradation_db {
        Some(db) => Degradation::SpectralSurrogate { level_db: db },
        None => Degradation::None,
    };
    std::fs::create_dir_all(&args.out_dir).map_err(|e| anyrir::Error::Io {
        path: args.out_dir.clone(),
        source: e,
    })?;

    for index in 0..args.count {
        let config = SceneConfig {
            seed: splitmix64(args.seed ^ splitmix64(index as u64)),
            sample_rate_hz: args.sample_rate,
            duration_s: args.duration_s,
            rir_t60_s: args.t60,
            rir_len: args.rir_len,
            stationary_snr_db: args.snr_db,
            nonstat_coverage: args.coverage,
            nonstat_peak_db: args.peak_db,
            excitation_kind: excitation_kind.clone(),
            degradation,
        };
        let scene = gen_scene(&config)?;
        let dir = args.out_dir.join(format!("scene_{index:03}"));
        save_scene(&scene, &dir)?;
        println!(
            "{} coverage={:.3} peak_db={:.2} rir_len={}",
            dir.display(),
            scene.resolved.coverage,
            scene.resolved.peak_db,
            scene.resolved.rir_len
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct MethodSummary {
    mean_db: f64,
    std_db: f64,
    count: usize,
}

#[derive(Serialize)]
struct EvaluateReport {
    schema_version: u32,
    scenes: Vec<SceneErrors>,
    methods: std::collections::BTreeMap<&'static str, MethodSummary>,
}

#[derive(Serialize, Clone)]
struct SceneErrors {
    scene: String,
    errors: std::collections::BTreeMap<&'static str, f64>,
}

fn discover_scenes(root: &Path) -> Result<Vec<PathBuf>, CliError> {
    if root.join("scene.json").exists() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| anyrir::Error::Io {
            path: root.to_path_buf(),
            source: e,
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.join("scene.json").exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::data(format!(
            "no scenes found under {}",
            root.display()
        )));
    }
    Ok(dirs)
}

pub fn evaluate(args: EvaluateArgs) -> CliResult {
    if args.methods.is_empty() {
        return Err(CliError::usage("--methods must name at least one method"));
    }
    let jobs = args
        .jobs
        .or_else(|| {
            std::env::var("ANYRIR_JOBS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(1)
        .max(1);
    let scene_dirs = discover_scenes(&args.scenes)?;
    let base = EstimateSettings {
        precondition: !args.no_precondition,
        target_rate_hz: args.target_rate,
        lpc_order: args.lpc_order,
        ndft: args.ndft,
        delta: parse_delta(&args.delta)?,
        max_irls: args.max_irls,
        lsmr_atol: args.lsmr_atol,
        lsmr_btol: args.lsmr_btol,
        lsmr_max_iters: args.lsmr_max_iters,
        freq_eps: args.freq_eps,
        ..Default::default()
    };

    let eval_one = |dir: &PathBuf| -> Result<SceneErrors, CliError> {
        let scene = load_scene(dir)?;
        let rate = scene.recording.sample_rate_hz();
        let rir_ms = scene.rir_true.len() as f64 / rate as f64 * 1000.0;
        let truth = Signal::new(scene.rir_true.clone(), rate)?;
        let mut errors = std::collections::BTreeMap::new();
        for &method in &args.methods {
            let settings = EstimateSettings {
                method,
                seed: scene.manifest.config.seed,
                ..base.clone()
            };
            let outcome = run_estimate(
                &scene.excitation,
                &scene.recording,
                RirLenSpec::Millis(rir_ms),
                &settings,
            )?;
            errors.insert(method.name(), compare_to_truth(&outcome, &truth)?);
        }
        Ok(SceneErrors {
            scene: dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| dir.display().to_string()),
            errors,
        })
    };

    let results: Vec<SceneErrors> = if jobs > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::data(e.to_string()))?;
        let collected: Vec<Result<SceneErrors, CliError>> =
            pool.install(|| scene_dirs.par_iter().map(eval_one).collect());
        collected.into_iter().collect::<Result<Vec<_>, _>>()?
    } else {
        scene_dirs
            .iter()
            .map(eval_one)
            .collect::<Result<Vec<_>, _>>()?
    };

    let mut methods = std::collections::BTreeMap::new();
    for &method in &args.methods {
        let errs: Vec<f64> = results.iter().map(|r| r.errors[method.name()]).collect();
        let (mean_db, std_db) = mean_std(&errs);
        methods.insert(
            method.name(),
            MethodSummary {
                mean_db,
                std_db,
                count: errs.len(),
            },
        );
    }

    // wide CSV: one row per scene, one column per method, then summary rows
    let mut csv = String::from("scene");
    for &m in &args.methods {
        csv.push(',');
        csv.push_str(m.name());
    }
    csv.push_str("\r\n");
    for row in &results {
        csv.push_str(&row.scene);
        for &m in &args.methods {
            csv.push_str(&format!(",{}", row.errors[m.name()]));
        }
        csv.push_str("\r\n");
    }
    for stat in ["mean", "std"] {
        csv.push_str(stat);
        for &m in &args.methods {
            let s = &methods[m.name()];
            let v = if stat == "mean" { s.mean_db } else { s.std_db };
            csv.push_str(&format!(",{v}"));
        }
        csv.push_str("\r\n");
    }

    std::fs::create_dir_all(&args.out_dir).map_err(|e| anyrir::Error::Io {
        path: args.out_dir.clone(),
        source: e,
    })?;
    write_atomic(&args.out_dir.join("results.csv"), csv.as_bytes())?;
    let report = EvaluateReport {
        schema_version: 1,
        scenes: results,
        methods,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_atomic(&args.out_dir.join("summary.json"), json.as_bytes())?;
    print!("{csv}");
    Ok(())
}

// ---------------------------------------------------------------------------
// edc
// ---------------------------------------------------------------------------

pub fn edc(args: EdcArgs) -> CliResult {
    let rir = load_signal(&args.rir)?;
    let curve = anyrir::baselines::edc(rir.samples(), rir.sample_rate_hz())?;
    let mut bytes = Vec::new();
    write_edc_csv(&curve, &mut bytes).map_err(|e| CliError::data(e.to_string()))?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| anyrir::Error::Io {
                path: parent.to_path_buf(),
                source: e,
            })?;
        }
    }
    write_atomic(&args.out, &bytes)?;
    println!("wrote {}", args.out.display());
    Ok(())
}
