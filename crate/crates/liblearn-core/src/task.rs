//! Synthesis tasks, solution frontiers, and the JSONL task-corpus format.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, Expr};
use crate::library::Library;
use crate::ty::{parse_ty, Ty};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub inputs: Vec<Value>,
    pub output: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: String,
    pub description: String,
    pub request_ty: Ty,
    pub examples: Vec<Example>,
}

/// Where a verified solution came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionSource {
    Enumeration,
    Llm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierEntry {
    pub program: Expr,
    pub log_prior: f64,
    pub source: SolutionSource,
}

/// Verified solutions for one task, kept sorted by descending prior with
/// canonical-print ties, deduplicated by canonical print.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Frontier {
    pub task_id: String,
    pub entries: Vec<FrontierEntry>,
}

impl Frontier {
    pub fn new(task_id: impl Into<String>) -> Frontier {
        Frontier {
            task_id: task_id.into(),
            entries: Vec::new(),
        }
    }

    pub fn is_solved(&self) -> bool {
        !self.entries.is_empty()
    }

    /// Highest-prior entry.
    pub fn best(&self) -> Option<&FrontierEntry> {
        self.entries.first()
    }

    /// Inserts unless an entry with the same canonical print exists. Returns
    /// whether the entry was added.
    pub fn insert(&mut self, entry: FrontierEntry) -> bool {
        let rendered = expr::print_pattern(&entry.program);
        if self
            .entries
            .iter()
            .any(|e| expr::print_pattern(&e.program) == rendered)
        {
            return false;
        }
        self.entries.push(entry);
        self.sort();
        true
    }

    pub fn sort(&mut self) {
        self.entries.sort_by(|a, b| {
            b.log_prior
                .partial_cmp(&a.log_prior)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| expr::print_pattern(&a.program).cmp(&expr::print_pattern(&b.program)))
        });
    }

    pub fn truncate(&mut self, cap: usize) {
        self.entries.truncate(cap);
    }

    /// Recomputes priors under a (possibly refit) library.
    pub fn rescore(&mut self, lib: &Library, request: &Ty) {
        for entry in &mut self.entries {
            entry.log_prior = lib
                .score_program(&entry.program, request)
                .unwrap_or(f64::NEG_INFINITY);
        }
        self.sort();
    }
}

/// Limits for one enumeration run. `max_candidates` is the binding
/// deterministic constraint; the timeout is a wall-clock safety net.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub timeout_secs: f64,
    pub max_candidates: u64,
    pub step_budget: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            timeout_secs: 30.0,
            max_candidates: 200_000,
            step_budget: crate::eval::DEFAULT_STEP_BUDGET,
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {detail}")]
    Malformed { line: usize, detail: String },
    #[error("line {line}: {source}")]
    BadValue {
        line: usize,
        source: crate::value::ValueFormatError,
    },
    #[error("line {line}: bad request type: {source}")]
    BadType {
        line: usize,
        source: crate::ty::TyParseError,
    },
    #[error("duplicate task id {id:?}")]
    DuplicateId { id: String },
}

#[derive(Serialize, Deserialize)]
struct TaskRecord {
    id: String,
    description: String,
    request_type: String,
    examples: Vec<ExampleRecord>,
}

#[derive(Serialize, Deserialize)]
struct ExampleRecord {
    inputs: Vec<serde_json::Value>,
    output: serde_json::Value,
}

/// Reads tasks from JSONL: `{"id", "description", "request_type", "examples"}`.
pub fn read_tasks_jsonl(text: &str) -> Result<Vec<Task>, CorpusError> {
    let mut tasks = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: TaskRecord =
            serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
                line: line_no,
                detail: e.to_string(),
            })?;
        let request_ty = parse_ty(&record.request_type).map_err(|source| CorpusError::BadType {
            line: line_no,
            source,
        })?;
        let mut examples = Vec::new();
        for ex in &record.examples {
            let inputs = ex
                .inputs
                .iter()
                .map(Value::from_json)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|source| CorpusError::BadValue {
                    line: line_no,
                    source,
                })?;
            let output = Value::from_json(&ex.output).map_err(|source| CorpusError::BadValue {
                line: line_no,
                source,
            })?;
            examples.push(Example { inputs, output });
        }
        if tasks.iter().any(|t: &Task| t.id == record.id) {
            return Err(CorpusError::DuplicateId { id: record.id });
        }
        tasks.push(Task {
            id: record.id,
            description: record.description,
            request_ty,
            examples,
        });
    }
    Ok(tasks)
}

pub fn write_tasks_jsonl(tasks: &[Task]) -> String {
    let mut out = String::new();
    for task in tasks {
        let record = TaskRecord {
            id: task.id.clone(),
            description: task.description.clone(),
            request_type: task.request_ty.to_string(),
            examples: task
                .examples
                .iter()
                .map(|ex| ExampleRecord {
                    inputs: ex
                        .inputs
                        .iter()
                        .map(|v| v.to_json().expect("example values serialize"))
                        .collect(),
                    output: ex.output.to_json().expect("example values serialize"),
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("task serializes"));
        out.push('\n');
    }
    out
}

/// Reads a JSONL program corpus: each line is either a JSON string holding an
/// S-expression or an object `{"id"?, "program"}`.
pub fn read_programs_jsonl(text: &str, lib: &Library) -> Result<Vec<(Option<String>, Expr)>, CorpusError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
                line: line_no,
                detail: e.to_string(),
            })?;
        let (id, src) = match &value {
            serde_json::Value::String(s) => (None, s.clone()),
            serde_json::Value::Object(map) => {
                let id = map
                    .get("id")
                    .and_then(|v| v.as_str())
                    .map(str::to_owned);
                let src = map
                    .get("program")
                    .and_then(|v| v.as_str())
                    .ok_or_else(|| CorpusError::Malformed {
                        line: line_no,
                        detail: "object lines need a \"program\" string field".into(),
                    })?
                    .to_owned();
                (id, src)
            }
            other => {
                return Err(CorpusError::Malformed {
                    line: line_no,
                    detail: format!("expected string or object, got {other}"),
                })
            }
        };
        let program = expr::parse(&src, lib).map_err(|e| CorpusError::Malformed {
            line: line_no,
            detail: e.to_string(),
        })?;
        out.push((id, program));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::arith3;

    fn entry(lib: &Library, src: &str, lp: f64) -> FrontierEntry {
        FrontierEntry {
            program: expr::parse(src, lib).unwrap(),
            log_prior: lp,
            source: SolutionSource::Enumeration,
        }
    }

    #[test]
    fn frontier_orders_dedupes_and_truncates() {
        let lib = arith3();
        let mut f = Frontier::new("t");
        assert!(f.insert(entry(&lib, "(+ 0 1)", -3.0)));
        assert!(f.insert(entry(&lib, "1", -1.0)));
        assert!(f.insert(entry(&lib, "(+ 1 0)", -3.0)));
        assert!(!f.insert(entry(&lib, "1", -2.0)), "same print is rejected");
        let prints: Vec<String> = f
            .entries
            .iter()
            .map(|e| expr::print_pattern(&e.program))
            .collect();
        assert_eq!(prints, vec!["1", "(+ 0 1)", "(+ 1 0)"]);
        f.truncate(2);
        assert_eq!(f.entries.len(), 2);
        assert_eq!(f.best().unwrap().log_prior, -1.0);
    }

    #[test]
    fn rescore_reorders_under_new_weights() {
        let mut lib = arith3();
        let req = parse_ty("tint").unwrap();
        let mut f = Frontier::new("t");
        f.insert(entry(&lib, "(+ 1 1)", -99.0));
        f.insert(entry(&lib, "0", -100.0));
        // Tilt almost all named mass onto "+" and "1": three near-free
        // choices then beat the single expensive "0" leaf.
        lib.weights.named.insert("+".into(), 100.0);
        lib.weights.named.insert("1".into(), 100.0);
        f.rescore(&lib, &req);
        assert!(f.entries[0].log_prior > f.entries[1].log_prior);
        assert_eq!(expr::print_pattern(&f.best().unwrap().program), "(+ 1 1)");
    }

    #[test]
    fn tasks_round_trip_through_jsonl() {
        let text = concat!(
            r#"{"id":"add1","description":"add one","request_type":"tint -> tint","examples":[{"inputs":[1],"output":2},{"inputs":[3],"output":4}]}"#,
            "\n",
            r#"{"id":"zero","description":"constant zero","request_type":"tint","examples":[{"inputs":[],"output":0}]}"#,
            "\n",
        );
        let tasks = read_tasks_jsonl(text).unwrap();
        assert_eq!(tasks.len(), 2);
        assert_eq!(tasks[0].request_ty.to_string(), "tint -> tint");
        assert_eq!(tasks[0].examples[0].inputs, vec![Value::Int(1)]);
        let round = write_tasks_jsonl(&tasks);
        assert_eq!(read_tasks_jsonl(&round).unwrap(), tasks);
    }

    #[test]
    fn duplicate_ids_and_bad_records_are_rejected() {
        let dup = concat!(
            r#"{"id":"a","description":"","request_type":"tint","examples":[]}"#,
            "\n",
            r#"{"id":"a","description":"","request_type":"tint","examples":[]}"#,
            "\n",
        );
        assert!(matches!(
            read_tasks_jsonl(dup),
            Err(CorpusError::DuplicateId { .. })
        ));
        assert!(matches!(
            read_tasks_jsonl(r#"{"id":"a"}"#),
            Err(CorpusError::Malformed { .. })
        ));
        let bad_ty = r#"{"id":"a","description":"","request_type":"tint ->","examples":[]}"#;
        assert!(matches!(
            read_tasks_jsonl(bad_ty),
            Err(CorpusError::BadType { .. })
        ));
        let float = r#"{"id":"a","description":"","request_type":"tint","examples":[{"inputs":[1.5],"output":0}]}"#;
        assert!(matches!(
            read_tasks_jsonl(float),
            Err(CorpusError::BadValue { .. })
        ));
    }

    #[test]
    fn programs_jsonl_accepts_strings_and_objects() {
        let lib = arith3();
        let text = concat!(
            "\"(+ 1 1)\"\n",
            r#"{"id":"p2","program":"(lambda (+ $0 1))"}"#,
            "\n",
        );
        let programs = read_programs_jsonl(text, &lib).unwrap();
        assert_eq!(programs.len(), 2);
        assert_eq!(programs[0].0, None);
        assert_eq!(programs[1].0.as_deref(), Some("p2"));
        assert_eq!(expr::print_pattern(&programs[1].1), "(lambda (+ $0 1))");
        assert!(read_programs_jsonl("\"(+ unknown 1)\"", &lib).is_err());
    }
}
