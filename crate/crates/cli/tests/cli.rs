//! End-to-end tests of the command-line surface.

use std::path::Path;
use std::process::Command;

fn anyrir_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_anyrir"))
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn missing_recording_flag_exits_2_and_names_it() {
    let out = anyrir_bin()
        .args(["estimate", "--excitation", "x.wav", "--rir-len", "100"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--recording"), "stderr: {stderr}");
}

#[test]
fn simulate_is_deterministic_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        let status = anyrir_bin()
            .args([
                "simulate",
                "--out-dir",
                dir.path().join(run).to_str().unwrap(),
                "--count",
                "3",
                "--seed",
                "7",
                "--duration-s",
                "0.8",
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    for i in 0..3 {
        let scene = format!("scene_{i:03}");
        for file in ["scene.json", "excitation.wav", "recording.wav", "rir_true.wav"] {
            let a = std::fs::read(dir.path().join("a").join(&scene).join(file)).unwrap();
            let b = std::fs::read(dir.path().join("b").join(&scene).join(file)).unwrap();
            assert_eq!(a, b, "{scene}/{file} differs between runs");
        }
    }
}

#[test]
fn simulate_respects_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let status = anyrir_bin()
        .args([
            "simulate",
            "--out-dir",
            dir.path().to_str().unwrap(),
            "--seed",
            "3",
            "--duration-s",
            "4",
            "--coverage",
            "0.4",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let manifest = read_json(&dir.path().join("scene_000/scene.json"));
    let total: u64 = manifest["event_log"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["length"].as_u64().unwrap())
        .sum();
    let cov = total as f64 / manifest["recording_len"].as_u64().unwrap() as f64;
    assert!((0.38..=0.42).contains(&cov), "coverage {cov}");
}

#[test]
fn simulate_infeasible_coverage_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = anyrir_bin()
        .args([
            "simulate",
            "--out-dir",
            dir.path().to_str().unwrap(),
            "--duration-s",
            "0.1",
            "--coverage",
            "0.5",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let err: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(err["exit_code"], 3);
}

#[test]
fn estimate_writes_artifacts_and_beats_minus_30_db() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = dir.path().join("scenes");
    let status = anyrir_bin()
        .args([
            "simulate",
            "--out-dir",
            scenes.to_str().unwrap(),
            "--seed",
            "42",
            "--coverage",
            "0.35",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let scene = scenes.join("scene_000");
    let out_dir = dir.path().join("est");
    let status = anyrir_bin()
        .args([
            "estimate",
            "--excitation",
            scene.join("excitation.wav").to_str().unwrap(),
            "--recording",
            scene.join("recording.wav").to_str().unwrap(),
            "--rir-len",
            "5760",
            "--ground-truth",
            scene.join("rir_true.wav").to_str().unwrap(),
            "--dump-weights",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    for artifact in ["rir.wav", "report.json", "edc.csv", "weights.csv"] {
        assert!(out_dir.join(artifact).exists(), "{artifact} missing");
    }
    let report = read_json(&out_dir.join("report.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["method"], "anyrir");
    let err = report["h_error_db"].as_f64().unwrap();
    assert!(err <= -30.0, "h_error_db {err}");
    assert_eq!(report["config_echo"]["ndft"].as_u64(), Some(256));

    // l2 on the same noisy scene is worse
    let l2_dir = dir.path().join("est_l2");
    let status = anyrir_bin()
        .args([
            "estimate",
            "--excitation",
            scene.join("excitation.wav").to_str().unwrap(),
            "--recording",
            scene.join("recording.wav").to_str().unwrap(),
            "--rir-len",
            "5760",
            "--ground-truth",
            scene.join("rir_true.wav").to_str().unwrap(),
            "--method",
            "l2",
            "--out-dir",
            l2_dir.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let l2_err = read_json(&l2_dir.join("report.json"))["h_error_db"]
        .as_f64()
        .unwrap();
    assert!(l2_err > err, "l2 {l2_err} should be worse than anyrir {err}");
}

#[test]
fn edc_command_unit_impulse_and_rfc4180() {
    let dir = tempfile::tempdir().unwrap();
    let mut impulse = vec![0.0f64; 64];
    impulse[0] = 1.0;
    let sig = anyrir::Signal::new(impulse, 16000).unwrap();
    let rir_path = dir.path().join("imp.wav");
    anyrir::write_wav(&sig, &rir_path).unwrap();
    let out_csv = dir.path().join("edc.csv");
    let status = anyrir_bin()
        .args([
            "edc",
            "--rir",
            rir_path.to_str().unwrap(),
            "--out",
            out_csv.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    // parse with a real CSV reader
    let mut rdr = csv::Reader::from_path(&out_csv).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(&headers[0], "time_s");
    assert_eq!(&headers[1], "edc_db");
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 64);
    let second: f64 = rows[1][1].parse().unwrap();
    assert!(second <= -120.0 + 1e-9, "second sample {second}");

    // zero RIR is a data error
    let silent = dir.path().join("silent.wav");
    anyrir::write_wav(&anyrir::Signal::new(vec![0.0; 8], 16000).unwrap(), &silent).unwrap();
    let out = anyrir_bin()
        .args(["edc", "--rir", silent.to_str().unwrap()])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn evaluate_empty_scene_set_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = anyrir_bin()
        .args(["evaluate", "--scenes", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn estimate_accepts_raw_f32_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = anyrir::Rng::new(5);
    let x = anyrir::Signal::new(rng.normal_vec(2000), 16000).unwrap();
    let h: Vec<f64> = (0..32).map(|_| rng.normal()).collect();
    let y_samples = anyrir::operators::fft_convolve(x.samples(), &h, 2031).unwrap();
    let y = anyrir::Signal::new(y_samples, 16000).unwrap();
    let xp = dir.path().join("x.f32");
    let yp = dir.path().join("y.f32");
    anyrir::signal::write_raw_f32(&x, &xp).unwrap();
    anyrir::signal::write_raw_f32(&y, &yp).unwrap();
    let out_dir = dir.path().join("out");
    let status = anyrir_bin()
        .args([
            "estimate",
            "--excitation",
            xp.to_str().unwrap(),
            "--recording",
            yp.to_str().unwrap(),
            "--rir-ms",
            "2",
            "--method",
            "l2",
            "--no-precondition",
            "--ndft",
            "16",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let report = read_json(&out_dir.join("report.json"));
    // 2 ms at 16 kHz
    assert_eq!(report["rir_len"], 32);
}
