use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AggregateRow, ExperimentResult, RunMetrics};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 10] = [
    "iteration",
    "algorithm",
    "n_users",
    "tau",
    "metric",
    "objective",
    "mean_delay_ms",
    "accuracy",
    "offload_count",
    "solver_time_ms",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// 17 significant digits, scientific notation.
pub fn format_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

pub fn write_rows_csv<W: Write>(rows: &[RunMetrics], out: W, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.iteration.to_string(),
            r.algorithm.name().to_string(),
            r.n_users.to_string(),
            format_real(r.tau),
            r.metric.name().to_string(),
            format_real(r.objective),
            format_real(r.mean_delay_ms),
            format_real(r.accuracy),
            r.offload_count.to_string(),
            format_real(r.solver_time_ms),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_rows_json<W: Write>(rows: &[RunMetrics], out: W, path: &Path) -> Result<()> {
    serde_json::to_writer_pretty(out, rows).map_err(|e| Error::io(path, e.into()))
}

pub fn write_summary_json<W: Write>(summary: &[AggregateRow], out: W, path: &Path) -> Result<()> {
    serde_json::to_writer_pretty(out, summary).map_err(|e| Error::io(path, e.into()))
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes per-iteration rows (`runs.csv` or `runs.json`) and the aggregate
/// (`summary.json`) into `dir`. Returns the written paths.
pub fn emit(result: &ExperimentResult, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    if result.rows.is_empty() {
        return Err(Error::Config("nothing to emit: result table is empty".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows_path = match format {
        OutputFormat::Csv => dir.join("runs.csv"),
        OutputFormat::Json => dir.join("runs.json"),
    };
    let mut f = create(&rows_path)?;
    match format {
        OutputFormat::Csv => write_rows_csv(&result.rows, &mut f, &rows_path)?,
        OutputFormat::Json => write_rows_json(&result.rows, &mut f, &rows_path)?,
    }
    f.flush().map_err(|e| Error::io(&rows_path, e))?;

    let summary_path = dir.join("summary.json");
    let mut f = create(&summary_path)?;
    write_summary_json(&result.summary, &mut f, &summary_path)?;
    f.flush().map_err(|e| Error::io(&summary_path, e))?;
    Ok(vec![rows_path, summary_path])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_experiment, ExperimentConfig};
    use crate::solver::Algorithm;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            n_users_sweep: vec![6, 9],
            tau_sweep: vec![0.6],
            iterations: 4,
            master_seed: 5,
            record_solver_time: false,
            ..Default::default()
        }
    }

    #[test]
    fn real_formatting_has_17_significant_digits() {
        assert_eq!(format_real(0.1), "1.0000000000000001e-1");
        assert_eq!(format_real(31.2), "3.1199999999999999e1");
        assert_eq!(format_real(f64::INFINITY), "inf");
        for x in [0.1, 1.0 / 3.0, 123456.789, 6.02e23] {
            assert_eq!(format_real(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_is_byte_identical_across_runs() {
        let cfg = tiny();
        let mut files = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().unwrap();
            let res = run_experiment(&cfg).unwrap();
            emit(&res, dir.path(), OutputFormat::Csv).unwrap();
            files.push(std::fs::read(dir.path().join("runs.csv")).unwrap());
        }
        assert_eq!(files[0], files[1]);
        let text = String::from_utf8(files.remove(0)).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(text.lines().count(), 1 + 2 * 4 * Algorithm::ALL.len());
    }

    #[test]
    fn summary_json_round_trips() {
        let res = run_experiment(&tiny()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit(&res, dir.path(), OutputFormat::Json).unwrap();
        let back: Vec<AggregateRow> =
            serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(back, res.summary);
        let rows: Vec<RunMetrics> =
            serde_json::from_slice(&std::fs::read(dir.path().join("runs.json")).unwrap()).unwrap();
        assert_eq!(rows, res.rows);
    }

    #[test]
    fn empty_table_is_rejected() {
        let res = ExperimentResult { rows: vec![], summary: vec![] };
        let dir = tempfile::tempdir().unwrap();
        assert!(emit(&res, dir.path(), OutputFormat::Csv).is_err());
        assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
    }
}
