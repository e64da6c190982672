//! File helpers shared by the subcommands.

use std::path::{Path, PathBuf};

use anyrir::{Error, Result, Signal};

/// Load a signal from WAV, or from raw float32 + sidecar when the
/// extension is `.f32` or `.raw`.
pub fn load_signal(path: &Path) -> Result<Signal> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("f32") | Some("raw") => anyrir::signal::read_raw_f32(path),
        _ => anyrir::read_wav(path),
    }
}

/// Write bytes atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = tmp_path(path);
    std::fs::write(&tmp, bytes).map_err(|e| Error::Io {
        path: tmp.clone(),
        source: e,
    })?;
    std::fs::rename(&tmp, path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Write a WAV atomically via a temp name and rename.
pub fn write_wav_atomic(signal: &Signal, path: &Path) -> Result<()> {
    let tmp = tmp_path(path);
    anyrir::write_wav(signal, &tmp)?;
    std::fs::rename(&tmp, path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

/// Sample mean and (n-1) standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}
