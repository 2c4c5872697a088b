use std::fs;
use std::path::Path;

use serde::Serialize;

use super::experiment::ExperimentOutput;
use crate::error::{Error, Result};

fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let ctx = || path.display().to_string();
    let file = fs::File::create(path).map_err(|e| Error::io(ctx(), e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(ctx(), e))
}

const ROUND_HEADER: [&str; 18] = [
    "round",
    "accuracy",
    "train_loss",
    "nmse",
    "v_final",
    "iterations",
    "alpha",
    "sigma2",
    "lambda",
    "gamma",
    "p01",
    "p10",
    "beta",
    "xi",
    "diverged",
    "linear_clamps",
    "denoiser_clamps",
    "taylor_fallbacks",
];

const PARAM_HEADER: [&str; 13] = [
    "round",
    "lambda",
    "p01",
    "p10",
    "beta",
    "gamma",
    "xi",
    "em_ran",
    "p01_kept",
    "beta_clamped",
    "lambda_clamped",
    "gamma_floored",
    "flat_backward",
];

const TRACE_HEADER: [&str; 6] = ["round", "iteration", "v", "tau", "v_post", "nmse"];

/// Writes `rounds.csv`, `params.csv`, `config.json`, `shards.json`,
/// `timing.csv`, and `trace.csv` when tracing is enabled.
pub fn emit_outputs(out: &ExperimentOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    write_csv(&dir.join("rounds.csv"), &ROUND_HEADER, &out.logs)?;
    write_csv(&dir.join("params.csv"), &PARAM_HEADER, &out.params)?;
    if out.config.trace {
        write_csv(&dir.join("trace.csv"), &TRACE_HEADER, &out.trace)?;
    }
    let timing: Vec<(usize, f64)> = out.logs.iter().map(|l| (l.round, l.wall_ms)).collect();
    write_csv(&dir.join("timing.csv"), &["round", "wall_ms"], &timing)?;

    let resolved = serde_json::json!({
        "config": out.config,
        "model_dim": out.n,
        "sub_channels": out.s,
        "retained": out.k,
        "aborted": out.aborted,
    });
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&resolved)?).map_err(|e| Error::io(path.display().to_string(), e))?;
    let path = dir.join("shards.json");
    fs::write(&path, serde_json::to_string_pretty(&out.manifests)?)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}
