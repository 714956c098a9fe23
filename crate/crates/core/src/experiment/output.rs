use std::path::Path;

use serde::Serialize;

use super::config::Method;
use super::runner::RunResult;
use super::sweep::CellSummary;
use crate::error::{Error, Result};

#[derive(Serialize)]
struct ResultRow<'a> {
    method: &'a str,
    n_corrupted: usize,
    repeat: usize,
    seed: u64,
    test_error: f64,
    selected_lambda: Option<f64>,
    selected_ridge: f64,
}

#[derive(Serialize)]
struct SidecarEntry<'a> {
    method: Method,
    n_corrupted: usize,
    repeat: usize,
    seed: u64,
    alpha: Option<&'a [f64]>,
    discrepancies: Option<&'a [f64]>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv buffer: {e}")))
}

/// Results table: `method,n_corrupted,repeat,seed,test_error,selected_lambda,selected_ridge`.
/// Methods without a lambda leave that column empty.
pub fn results_csv(results: &[RunResult]) -> Result<String> {
    let bytes = csv_bytes(results.iter().map(|r| ResultRow {
        method: r.method.name(),
        n_corrupted: r.n_corrupted,
        repeat: r.repeat,
        seed: r.seed,
        test_error: r.test_error,
        selected_lambda: r.selected_lambda,
        selected_ridge: r.selected_ridge,
    }))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Weights and discrepancies of every run, as a JSON array.
pub fn sidecar_json(results: &[RunResult]) -> Result<String> {
    let entries: Vec<SidecarEntry<'_>> = results
        .iter()
        .map(|r| SidecarEntry {
            method: r.method,
            n_corrupted: r.n_corrupted,
            repeat: r.repeat,
            seed: r.seed,
            alpha: r.alpha.as_ref().map(|a| a.as_slice()),
            discrepancies: r.discrepancies.as_deref(),
        })
        .collect();
    Ok(serde_json::to_string_pretty(&entries)? + "\n")
}

/// Per-(method, n) mean and standard deviation, for plotting.
pub fn summary_csv(summary: &[CellSummary]) -> Result<String> {
    let bytes = csv_bytes(summary)?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Paths of the sidecar and summary files that accompany `results_path`.
pub fn companion_paths(results_path: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let stem = results_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "results".into());
    let dir = results_path.parent().unwrap_or_else(|| Path::new(""));
    (dir.join(format!("{stem}.json")), dir.join(format!("{stem}_summary.csv")))
}

/// Write the results CSV and its sidecar and summary files next to it.
pub fn write_outputs(results_path: &Path, results: &[RunResult], summary: &[CellSummary]) -> Result<()> {
    let (sidecar, summary_path) = companion_paths(results_path);
    write_file(results_path, results_csv(results)?.as_bytes())?;
    write_file(&sidecar, sidecar_json(results)?.as_bytes())?;
    write_file(&summary_path, summary_csv(summary)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::SimplexWeights;

    fn result(method: Method, lambda: Option<f64>) -> RunResult {
        RunResult {
            method,
            n_corrupted: 2,
            repeat: 1,
            seed: 42,
            test_error: 0.125,
            selected_lambda: lambda,
            selected_ridge: 0.001,
            alpha: lambda.map(|_| SimplexWeights::uniform(2)),
            discrepancies: lambda.map(|_| vec![0.25, 0.0]),
            wall_time: 3.0,
        }
    }

    #[test]
    fn results_table_layout() {
        let text = results_csv(&[result(Method::Ours, Some(0.1)), result(Method::AllData, None)]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "method,n_corrupted,repeat,seed,test_error,selected_lambda,selected_ridge");
        assert_eq!(lines[1], "ours,2,1,42,0.125,0.1,0.001");
        assert_eq!(lines[2], "all_data,2,1,42,0.125,,0.001");
    }

    #[test]
    fn sidecar_holds_weights() {
        let text = sidecar_json(&[result(Method::Ours, Some(0.1))]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v[0]["alpha"], serde_json::json!([0.5, 0.5]));
        assert_eq!(v[0]["discrepancies"], serde_json::json!([0.25, 0.0]));
        assert!(!text.contains("wall"));
    }

    #[test]
    fn files_land_next_to_results() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let rows = [result(Method::Ours, Some(1.0))];
        write_outputs(&path, &rows, &super::super::sweep::summarize(&rows)).unwrap();
        assert!(dir.path().join("out.json").exists());
        let summary = std::fs::read_to_string(dir.path().join("out_summary.csv")).unwrap();
        assert!(summary.starts_with("method,n_corrupted,count,mean_test_error,std_test_error\nours,2,1,0.125,0.0"));
    }
}
