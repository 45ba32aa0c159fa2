//! Cross-run aggregation: best/average/spread of final test solve rates,
//! grouped by condition.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkpoint::{CheckpointError, MetricsRow, RunDir};
use crate::run::RunMeta;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{path}: {detail}")]
    Malformed { path: PathBuf, detail: String },
    #[error("no runs to report")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub runs: usize,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation over the runs in this condition.
    pub std: f64,
}

/// A run's headline number: the final test solve rate, falling back to the
/// final train solve rate for runs that never hit a test-eval tick.
fn final_solve_pct(rows: &[MetricsRow]) -> Option<f64> {
    rows.iter()
        .rev()
        .find_map(|r| r.test_solve_pct)
        .or_else(|| rows.last().map(|r| r.train_solve_pct))
}

fn read_meta(run: &RunDir) -> Result<RunMeta, ReportError> {
    let path = run.meta_path();
    let text = std::fs::read_to_string(&path).map_err(|e| ReportError::Malformed {
        path: path.clone(),
        detail: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| ReportError::Malformed {
        path,
        detail: e.to_string(),
    })
}

pub fn summarize_runs(dirs: &[PathBuf]) -> Result<Vec<ConditionSummary>, ReportError> {
    let mut by_condition: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for dir in dirs {
        let run = RunDir::open(Path::new(dir))?;
        let meta = read_meta(&run)?;
        let rows = run.read_metrics()?;
        let Some(pct) = final_solve_pct(&rows) else {
            return Err(ReportError::Malformed {
                path: dir.clone(),
                detail: "metrics.jsonl has no rows".into(),
            });
        };
        by_condition.entry(meta.condition).or_default().push(pct);
    }
    if by_condition.is_empty() {
        return Err(ReportError::Empty);
    }
    Ok(by_condition
        .into_iter()
        .map(|(condition, values)| {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            ConditionSummary {
                condition,
                runs: values.len(),
                max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                mean,
                std: var.sqrt(),
            }
        })
        .collect())
}

pub fn to_csv(summaries: &[ConditionSummary]) -> String {
    let mut out = String::from("condition,runs,max,mean,std\n");
    for s in summaries {
        out.push_str(&format!(
            "{},{},{:.4},{:.4},{:.4}\n",
            s.condition, s.runs, s.max, s.mean, s.std
        ));
    }
    out
}

pub fn render_table(summaries: &[ConditionSummary]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<20} {:>5} {:>8} {:>8} {:>8}\n",
        "condition", "runs", "max", "mean", "std"
    ));
    for s in summaries {
        out.push_str(&format!(
            "{:<20} {:>5} {:>8.2} {:>8.2} {:>8.2}\n",
            s.condition, s.runs, s.max, s.mean, s.std
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake_run(dir: &Path, condition: &str, test_pct: Option<f64>, train_pct: f64) {
        let run = RunDir::create(dir).unwrap();
        let meta = serde_json::json!({
            "domain": "toylist",
            "condition": condition,
            "flags": {
                "llm_solver": true,
                "enum_search": true,
                "compression": true,
                "autodoc": true
            },
            "seed": 0,
            "iterations": 1,
            "batch_size": 24,
            "backend": "oracle"
        });
        run.write_text("run_meta.json", &meta.to_string()).unwrap();
        let row = MetricsRow {
            iteration: 1,
            train_solved: 0,
            train_total: 10,
            train_solve_pct: train_pct,
            test_solved: test_pct.map(|_| 3),
            test_total: test_pct.map(|_| 10),
            test_solve_pct: test_pct,
            corpus_before: 0,
            corpus_after: 0,
            compression_ratio: 1.0,
            abstractions: 0,
            new_abstractions: 0,
            library_size: 0,
            renamed: 0,
            prompt_tokens: 0,
            completion_tokens: 0,
            parse_failures: 0,
            type_failures: 0,
            exec_failures: 0,
            backend_failures: 0,
        };
        run.append_json("metrics.jsonl", &row).unwrap();
    }

    #[test]
    fn single_run_has_max_equal_mean_and_zero_std() {
        let dir = tempfile::tempdir().unwrap();
        fake_run(dir.path(), "full", Some(40.0), 80.0);
        let summaries = summarize_runs(&[dir.path().to_owned()]).unwrap();
        assert_eq!(summaries.len(), 1);
        assert_eq!(summaries[0].max, 40.0);
        assert_eq!(summaries[0].mean, 40.0);
        assert_eq!(summaries[0].std, 0.0);
    }

    #[test]
    fn three_runs_use_population_std() {
        let root = tempfile::tempdir().unwrap();
        let values = [10.0, 20.0, 30.0];
        let mut dirs = Vec::new();
        for (i, v) in values.iter().enumerate() {
            let dir = root.path().join(format!("run{i}"));
            fake_run(&dir, "full", Some(*v), 0.0);
            dirs.push(dir);
        }
        let summaries = summarize_runs(&dirs).unwrap();
        assert_eq!(summaries[0].runs, 3);
        assert_eq!(summaries[0].mean, 20.0);
        assert_eq!(summaries[0].max, 30.0);
        // Hand-computed: sqrt(((10-20)^2 + 0 + (30-20)^2) / 3).
        let expected = (200.0f64 / 3.0).sqrt();
        assert!((summaries[0].std - expected).abs() < 1e-12);
    }

    #[test]
    fn groups_by_condition_and_falls_back_to_train_pct() {
        let root = tempfile::tempdir().unwrap();
        let a = root.path().join("a");
        let b = root.path().join("b");
        fake_run(&a, "full", Some(50.0), 90.0);
        fake_run(&b, "llm-only", None, 70.0);
        let summaries = summarize_runs(&[a, b]).unwrap();
        assert_eq!(summaries.len(), 2);
        let llm_only = summaries.iter().find(|s| s.condition == "llm-only").unwrap();
        assert_eq!(llm_only.mean, 70.0);
        let csv = to_csv(&summaries);
        assert!(csv.lines().count() == 3);
        assert!(render_table(&summaries).contains("llm-only"));
    }
}
