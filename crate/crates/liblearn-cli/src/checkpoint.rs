//! Run-directory layout and per-iteration checkpoints.
//!
//! Everything a resumed run needs is in the latest checkpoint: library,
//! frontiers, batch cursor, backend call counter, and usage totals. All
//! checkpointed values are deterministic under scripted backends, so two
//! runs with equal config and seed write byte-identical files; wall-clock
//! timings live in a separate sidecar that is excluded from that guarantee.

use std::io::Write;
use std::path::{Path, PathBuf};

use liblearn_core::expr::{self, Expr};
use liblearn_core::library::{Library, LibraryFile, RestoreError};
use liblearn_core::task::{Frontier, FrontierEntry, SolutionSource};
use liblearn_llm::solve::UsageLedger;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Deterministic aggregate of an LLM usage ledger: everything but wall time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageTotals {
    pub queries: usize,
    pub prompt_tokens: usize,
    pub completion_tokens: usize,
    pub parse_failures: usize,
    pub type_failures: usize,
    pub exec_failures: usize,
    pub backend_failures: usize,
}

impl UsageTotals {
    pub fn add(&mut self, ledger: &UsageLedger) {
        self.queries += ledger.queries.len();
        self.prompt_tokens += ledger.total_prompt_tokens();
        self.completion_tokens += ledger.total_completion_tokens();
        self.parse_failures += ledger.parse_failures;
        self.type_failures += ledger.type_failures;
        self.exec_failures += ledger.exec_failures;
        self.backend_failures += ledger.backend_failures;
    }

    pub fn failures(&self) -> usize {
        self.parse_failures + self.type_failures + self.exec_failures + self.backend_failures
    }
}

/// One deterministic metrics line per iteration. Token and failure counts
/// cover this iteration only; cumulative totals live in the checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iteration: usize,
    pub train_solved: usize,
    pub train_total: usize,
    pub train_solve_pct: f64,
    pub test_solved: Option<usize>,
    pub test_total: Option<usize>,
    pub test_solve_pct: Option<f64>,
    /// Compression input size (best solution per solved task, fully inlined).
    pub corpus_before: usize,
    pub corpus_after: usize,
    pub compression_ratio: f64,
    pub abstractions: usize,
    pub new_abstractions: usize,
    /// Total body size of learned abstractions.
    pub library_size: usize,
    pub renamed: usize,
    pub prompt_tokens: usize,
    pub completion_tokens: usize,
    pub parse_failures: usize,
    pub type_failures: usize,
    pub exec_failures: usize,
    pub backend_failures: usize,
}

/// Wall-clock seconds per stage; informational only and intentionally kept
/// out of checkpoints and metrics so those stay byte-reproducible.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub iteration: usize,
    pub llm_solve_secs: f64,
    pub enum_search_secs: f64,
    pub compress_secs: f64,
    pub rewrite_secs: f64,
    pub document_secs: f64,
    pub test_eval_secs: f64,
    pub total_secs: f64,
}

/// One accepted abstraction as found during a compression stage, with the
/// exact description-length accounting that justified it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractionRow {
    pub iteration: usize,
    pub name: String,
    pub pattern: String,
    pub body: String,
    pub body_size: usize,
    pub sites: usize,
    pub utility: i64,
    pub corpus_before: usize,
    pub corpus_after: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryRecord {
    pub program: String,
    pub log_prior: f64,
    pub source: SolutionSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRecord {
    pub task_id: String,
    pub entries: Vec<EntryRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iteration: usize,
    /// Batch-rotation cursor after this iteration.
    pub cursor: u64,
    /// Completion-backend invocations so far; restoring it replays seeded
    /// scripted backends exactly.
    pub backend_calls: usize,
    pub usage: UsageTotals,
    pub metrics: MetricsRow,
    pub library: LibraryFile,
    pub frontiers: Vec<FrontierRecord>,
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error("library restore failed: {0}")]
    Restore(#[from] RestoreError),
    #[error("frontier program for {task_id} no longer parses: {detail}")]
    BadProgram { task_id: String, detail: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CheckpointError + '_ {
    move |source| CheckpointError::Io {
        path: path.to_owned(),
        source,
    }
}

impl Checkpoint {
    pub fn capture(
        iteration: usize,
        cursor: u64,
        backend_calls: usize,
        usage: UsageTotals,
        metrics: MetricsRow,
        lib: &Library,
        frontiers: &[Frontier],
    ) -> Checkpoint {
        let frontiers = frontiers
            .iter()
            .map(|f| FrontierRecord {
                task_id: f.task_id.clone(),
                entries: f
                    .entries
                    .iter()
                    .map(|e| EntryRecord {
                        program: expr::print(&e.program).expect("frontier programs print"),
                        log_prior: e.log_prior,
                        source: e.source,
                    })
                    .collect(),
            })
            .collect();
        Checkpoint {
            iteration,
            cursor,
            backend_calls,
            usage,
            metrics,
            library: lib.to_file(),
            frontiers,
        }
    }

    /// Rebuilds the library on the domain's base primitives and reparses
    /// every frontier program under it.
    pub fn restore(&self, base: Library) -> Result<(Library, Vec<Frontier>), CheckpointError> {
        let lib = Library::restore(base, &self.library)?;
        let mut frontiers = Vec::with_capacity(self.frontiers.len());
        for record in &self.frontiers {
            let mut frontier = Frontier::new(record.task_id.clone());
            for entry in &record.entries {
                let program: Expr = expr::parse(&entry.program, &lib).map_err(|e| {
                    CheckpointError::BadProgram {
                        task_id: record.task_id.clone(),
                        detail: e.to_string(),
                    }
                })?;
                frontier.entries.push(FrontierEntry {
                    program,
                    log_prior: entry.log_prior,
                    source: entry.source,
                });
            }
            frontiers.push(frontier);
        }
        Ok((lib, frontiers))
    }
}

/// A run's on-disk layout. Line-oriented artifacts are append-only so a
/// resumed run continues them seamlessly.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<RunDir, CheckpointError> {
        std::fs::create_dir_all(root.join("checkpoints")).map_err(io_err(root))?;
        Ok(RunDir {
            root: root.to_owned(),
        })
    }

    pub fn open(root: &Path) -> Result<RunDir, CheckpointError> {
        if !root.join("checkpoints").is_dir() {
            return Err(CheckpointError::Format {
                path: root.to_owned(),
                detail: "not a run directory (missing checkpoints/)".into(),
            });
        }
        Ok(RunDir {
            root: root.to_owned(),
        })
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("config.toml")
    }

    pub fn meta_path(&self) -> PathBuf {
        self.root.join("run_meta.json")
    }

    fn checkpoint_path(&self, iteration: usize) -> PathBuf {
        self.root
            .join("checkpoints")
            .join(format!("iter_{iteration:03}.json"))
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<(), CheckpointError> {
        let path = self.root.join(name);
        std::fs::write(&path, text).map_err(io_err(&path))
    }

    pub fn append_line(&self, name: &str, line: &str) -> Result<(), CheckpointError> {
        let path = self.root.join(name);
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        writeln!(file, "{line}").map_err(io_err(&path))
    }

    pub fn append_json<T: Serialize>(&self, name: &str, row: &T) -> Result<(), CheckpointError> {
        self.append_line(name, &serde_json::to_string(row).expect("row serializes"))
    }

    pub fn write_checkpoint(&self, checkpoint: &Checkpoint) -> Result<(), CheckpointError> {
        let path = self.checkpoint_path(checkpoint.iteration);
        let text = serde_json::to_string(checkpoint).expect("checkpoint serializes");
        std::fs::write(&path, text).map_err(io_err(&path))
    }

    pub fn read_checkpoint(&self, iteration: usize) -> Result<Checkpoint, CheckpointError> {
        let path = self.checkpoint_path(iteration);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| CheckpointError::Format {
            path,
            detail: e.to_string(),
        })
    }

    /// Highest checkpointed iteration, if any.
    pub fn latest_checkpoint(&self) -> Result<Option<usize>, CheckpointError> {
        let dir = self.root.join("checkpoints");
        let mut latest = None;
        for entry in std::fs::read_dir(&dir).map_err(io_err(&dir))? {
            let entry = entry.map_err(io_err(&dir))?;
            let name = entry.file_name();
            let name = name.to_string_lossy();
            if let Some(num) = name
                .strip_prefix("iter_")
                .and_then(|s| s.strip_suffix(".json"))
                .and_then(|s| s.parse::<usize>().ok())
            {
                latest = latest.max(Some(num));
            }
        }
        Ok(latest)
    }

    pub fn read_metrics(&self) -> Result<Vec<MetricsRow>, CheckpointError> {
        let path = self.root.join("metrics.jsonl");
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let mut rows = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            rows.push(
                serde_json::from_str(line).map_err(|e| CheckpointError::Format {
                    path: path.clone(),
                    detail: e.to_string(),
                })?,
            );
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use liblearn_core::domains::load_domain;
    use liblearn_core::ty::parse_ty;

    fn sample_metrics() -> MetricsRow {
        MetricsRow {
            iteration: 1,
            train_solved: 3,
            train_total: 10,
            train_solve_pct: 30.0,
            test_solved: None,
            test_total: None,
            test_solve_pct: None,
            corpus_before: 40,
            corpus_after: 25,
            compression_ratio: 1.6,
            abstractions: 1,
            new_abstractions: 1,
            library_size: 5,
            renamed: 0,
            prompt_tokens: 120,
            completion_tokens: 30,
            parse_failures: 1,
            type_failures: 0,
            exec_failures: 2,
            backend_failures: 0,
        }
    }

    #[test]
    fn checkpoint_round_trips_library_and_frontiers() {
        let spec = load_domain("toylist").unwrap();
        let mut lib = spec.library;
        let body = expr::parse("(lambda (+ $0 1))", &lib).unwrap();
        lib.register_abstractions(std::slice::from_ref(&body)).unwrap();

        let req = parse_ty("tint -> tint").unwrap();
        let program = expr::parse("(lambda (fn_0 $0))", &lib).unwrap();
        let log_prior = lib.score_program(&program, &req).unwrap();
        let mut frontier = Frontier::new("t1");
        frontier.insert(FrontierEntry {
            program,
            log_prior,
            source: SolutionSource::Llm,
        });

        let checkpoint = Checkpoint::capture(
            2,
            7,
            13,
            UsageTotals::default(),
            sample_metrics(),
            &lib,
            std::slice::from_ref(&frontier),
        );

        let dir = tempfile::tempdir().unwrap();
        let run = RunDir::create(dir.path()).unwrap();
        run.write_checkpoint(&checkpoint).unwrap();
        let read = run.read_checkpoint(2).unwrap();
        assert_eq!(read, checkpoint);

        let base = load_domain("toylist").unwrap().library;
        let (restored_lib, frontiers) = read.restore(base).unwrap();
        assert_eq!(restored_lib.abstractions.len(), 1);
        assert_eq!(frontiers.len(), 1);
        assert_eq!(frontiers[0].entries[0].log_prior, log_prior);
        assert_eq!(
            expr::print(&frontiers[0].entries[0].program).unwrap(),
            "(lambda (fn_0 $0))"
        );
        assert_eq!(run.latest_checkpoint().unwrap(), Some(2));
    }

    #[test]
    fn capture_is_deterministic_bytes() {
        let spec = load_domain("toylist").unwrap();
        let checkpoint = Checkpoint::capture(
            1,
            0,
            0,
            UsageTotals::default(),
            sample_metrics(),
            &spec.library,
            &[],
        );
        let a = serde_json::to_string(&checkpoint).unwrap();
        let b = serde_json::to_string(&checkpoint.clone()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn appended_rows_read_back_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let run = RunDir::create(dir.path()).unwrap();
        let mut row = sample_metrics();
        run.append_json("metrics.jsonl", &row).unwrap();
        row.iteration = 2;
        row.test_solved = Some(5);
        row.test_total = Some(30);
        row.test_solve_pct = Some(100.0 * 5.0 / 30.0);
        run.append_json("metrics.jsonl", &row).unwrap();
        let rows = run.read_metrics().unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].iteration, 1);
        assert_eq!(rows[1].test_solved, Some(5));
    }

    #[test]
    fn usage_totals_sum_ledgers() {
        use liblearn_llm::solve::QueryUsage;
        let mut ledger = UsageLedger::default();
        ledger.record(QueryUsage {
            task_id: "a".into(),
            prompt_tokens: 10,
            completion_tokens: 4,
            wall_secs: 0.5,
            ok: true,
        });
        ledger.parse_failures = 2;
        let mut totals = UsageTotals::default();
        totals.add(&ledger);
        totals.add(&ledger);
        assert_eq!(totals.queries, 2);
        assert_eq!(totals.prompt_tokens, 20);
        assert_eq!(totals.completion_tokens, 8);
        assert_eq!(totals.parse_failures, 4);
        assert_eq!(totals.failures(), 4);
    }

    #[test]
    fn open_rejects_non_run_directories() {
        let dir = tempfile::tempdir().unwrap();
        assert!(RunDir::open(dir.path()).is_err());
        RunDir::create(dir.path()).unwrap();
        assert!(RunDir::open(dir.path()).is_ok());
    }
}
