//! CSV and JSON writers. Files are written to a sibling temporary and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::Experiment;
use crate::runner::{Report, Row};

pub fn write_csv<W: Write>(rows: &[Row], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["sweep_value", "policy", "metric", "value", "stderr", "method"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[Row]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf)?)
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path.file_name().context("output path has no file name")?.to_string_lossy();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'a Experiment,
    seed: u64,
    trials: usize,
    horizon: usize,
    budget: u64,
    rows: usize,
    failures: &'a [crate::runner::Failure],
}

/// Where an experiment's CSV goes: `out` itself if it names a `.csv` file
/// and there is only one experiment, otherwise `out/<name>.csv`.
pub fn csv_path(out: &Path, name: &str, single: bool) -> PathBuf {
    if single && out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        out.to_path_buf()
    } else {
        out.join(format!("{name}.csv"))
    }
}

/// Writes the CSV and, next to it, a JSON summary of the settings and failures.
pub fn write_report(exp: &Experiment, report: &Report, csv: &Path) -> Result<()> {
    write_atomic(csv, csv_string(&report.rows)?.as_bytes())?;
    let summary = Summary {
        experiment: exp,
        seed: report.seed,
        trials: report.trials,
        horizon: report.horizon,
        budget: report.budget,
        rows: report.rows.len(),
        failures: &report.failures,
    };
    let json = serde_json::to_string_pretty(&summary)?;
    write_atomic(&csv.with_extension("json"), json.as_bytes())
}
