//! Bundled synthesis domains: a string-rewriting DSL over regex-style
//! patterns and a small arithmetic/list DSL. Each ships with primitives,
//! prompt header text, and validated task corpora.

pub mod stringrw;
pub mod toylist;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::expr::{self, Expr};
use crate::eval::evaluate;
use crate::library::Library;
use crate::task::{read_programs_jsonl, read_tasks_jsonl, CorpusError, Task};
use crate::ty::Ty;
use crate::value::Value;

/// A loaded domain: primitives, prompt header, and validated corpora.
pub struct DomainSpec {
    pub name: String,
    /// Short prose shown at the top of every synthesis prompt.
    pub header: String,
    pub library: Library,
    pub train: Vec<Task>,
    pub test: Vec<Task>,
    /// Reference solution per task id, used for validation and oracles.
    pub ground_truth: BTreeMap<String, Expr>,
    pub default_timeout_secs: f64,
}

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("unknown domain {0:?}; expected stringrw or toylist")]
    UnknownDomain(String),
    #[error("corpus file {file}: {source}")]
    Corpus {
        file: String,
        #[source]
        source: CorpusError,
    },
    #[error("corpus validation failed for tasks: {}", failures.join(", "))]
    Validation { failures: Vec<String> },
}

pub fn load_domain(name: &str) -> Result<DomainSpec, DomainError> {
    let spec = match name {
        "stringrw" => stringrw::domain_spec()?,
        "toylist" => toylist::domain_spec()?,
        other => return Err(DomainError::UnknownDomain(other.to_owned())),
    };
    validate(&spec)?;
    Ok(spec)
}

fn parse_corpus(file: &str, text: &str) -> Result<Vec<Task>, DomainError> {
    read_tasks_jsonl(text).map_err(|source| DomainError::Corpus {
        file: file.to_owned(),
        source,
    })
}

fn parse_ground_truth(
    file: &str,
    text: &str,
    lib: &Library,
) -> Result<BTreeMap<String, Expr>, DomainError> {
    let entries = read_programs_jsonl(text, lib).map_err(|source| DomainError::Corpus {
        file: file.to_owned(),
        source,
    })?;
    let mut map = BTreeMap::new();
    for (id, program) in entries {
        let id = id.unwrap_or_else(|| format!("anon_{}", map.len()));
        map.insert(id, program);
    }
    Ok(map)
}

/// Shallow conformance between a runtime value and a first-order type.
fn value_conforms(v: &Value, ty: &Ty) -> bool {
    match (v, ty) {
        (Value::Int(_), Ty::Con(name, _)) => name == "tint",
        (Value::Bool(_), Ty::Con(name, _)) => name == "tbool",
        (Value::Str(_), Ty::Con(name, _)) => name == "tfullstr" || name == "tsubstr",
        (Value::List(items), Ty::Con(name, args)) if name == "list" && args.len() == 1 => {
            items.iter().all(|item| value_conforms(item, &args[0]))
        }
        _ => false,
    }
}

/// Checks every invariant the corpora promise: unique ids, example shapes
/// matching the request type, and ground truth programs that type-check and
/// reproduce every stored output.
fn validate(spec: &DomainSpec) -> Result<(), DomainError> {
    let mut failures = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for task in spec.train.iter().chain(&spec.test) {
        if !seen.insert(task.id.clone()) {
            failures.push(format!("{} (duplicate id)", task.id));
            continue;
        }
        let (arg_tys, ret_ty) = task.request_ty.uncurry();
        let shapes_ok = task.examples.iter().all(|ex| {
            ex.inputs.len() == arg_tys.len()
                && ex.inputs.iter().zip(&arg_tys).all(|(v, t)| value_conforms(v, t))
                && value_conforms(&ex.output, ret_ty)
        });
        if task.examples.is_empty() || !shapes_ok {
            failures.push(format!("{} (example shape)", task.id));
            continue;
        }
        let Some(gt) = spec.ground_truth.get(&task.id) else {
            failures.push(format!("{} (missing ground truth)", task.id));
            continue;
        };
        if spec.library.score_program(gt, &task.request_ty).is_err() {
            failures.push(format!("{} (ground truth ill-typed)", task.id));
            continue;
        }
        let solves = task.examples.iter().all(|ex| {
            matches!(
                evaluate(&spec.library, gt, &ex.inputs, crate::eval::DEFAULT_STEP_BUDGET),
                Ok(v) if v == ex.output
            )
        });
        if !solves {
            failures.push(format!("{} (ground truth wrong output)", task.id));
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(DomainError::Validation { failures })
    }
}

/// Serializes ground-truth programs as JSONL `{"id", "program"}` records.
pub fn write_ground_truth_jsonl(entries: &[(String, Expr)]) -> String {
    let mut out = String::new();
    for (id, program) in entries {
        let record = serde_json::json!({
            "id": id,
            "program": expr::print(program).expect("ground truth must be printable"),
        });
        out.push_str(&record.to_string());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_domains_load_and_validate() {
        for name in ["stringrw", "toylist"] {
            let spec = load_domain(name).unwrap();
            assert_eq!(spec.name, name);
            assert!(!spec.train.is_empty());
            assert!(!spec.test.is_empty());
            assert!(!spec.header.is_empty());
        }
    }

    #[test]
    fn unknown_domain_is_an_error() {
        assert!(matches!(
            load_domain("clevr"),
            Err(DomainError::UnknownDomain(_))
        ));
    }

    #[test]
    fn value_shapes_are_checked() {
        use crate::ty::parse_ty;
        let t = parse_ty("list(tint)").unwrap();
        assert!(value_conforms(&Value::List(vec![Value::Int(1)]), &t));
        assert!(!value_conforms(&Value::List(vec![Value::Bool(true)]), &t));
        assert!(!value_conforms(&Value::Str("x".into()), &t));
    }
}
