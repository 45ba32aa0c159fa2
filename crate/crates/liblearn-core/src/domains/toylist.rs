//! A deliberately small numeric-list language used for fast end-to-end runs.
//!
//! Numbers are built from `0`, `1`, and `+`; lists from `nil` and `cons`.
//! Ground-truth programs share closed subexpressions such as `(+ 1 1)`, so
//! compression has real structure to find even though the corpus is tiny.

use crate::eval::{evaluate, EvalCtx, EvalError, DEFAULT_STEP_BUDGET};
use crate::expr::{self, Expr};
use crate::library::Library;
use crate::task::{Example, Task};
use crate::ty::parse_ty;
use crate::value::Value;

use super::{parse_ground_truth, DomainError, DomainSpec};

const HEADER: &str = "Write programs in a small lambda-calculus over integers and \
integer lists. Numbers are built from 0, 1, and addition; lists from nil, cons, \
head, and tail.";

fn zero(_: &mut EvalCtx<'_>, _: Vec<Value>) -> Result<Value, EvalError> {
    Ok(Value::Int(0))
}

fn one(_: &mut EvalCtx<'_>, _: Vec<Value>) -> Result<Value, EvalError> {
    Ok(Value::Int(1))
}

fn add(_: &mut EvalCtx<'_>, args: Vec<Value>) -> Result<Value, EvalError> {
    match (&args[0], &args[1]) {
        (Value::Int(a), Value::Int(b)) => Ok(Value::Int(a + b)),
        _ => Err(EvalError::Runtime("expected two ints".to_owned())),
    }
}

fn p_nil(_: &mut EvalCtx<'_>, _: Vec<Value>) -> Result<Value, EvalError> {
    Ok(Value::List(Vec::new()))
}

fn p_cons(_: &mut EvalCtx<'_>, args: Vec<Value>) -> Result<Value, EvalError> {
    let mut args = args.into_iter();
    let head = args.next().unwrap();
    match args.next().unwrap() {
        Value::List(mut items) => {
            items.insert(0, head);
            Ok(Value::List(items))
        }
        other => Err(EvalError::Runtime(format!("expected a list, got {other}"))),
    }
}

fn p_head(_: &mut EvalCtx<'_>, args: Vec<Value>) -> Result<Value, EvalError> {
    match args.into_iter().next().unwrap() {
        Value::List(items) => items
            .into_iter()
            .next()
            .ok_or_else(|| EvalError::Runtime("head of an empty list".to_owned())),
        other => Err(EvalError::Runtime(format!("expected a list, got {other}"))),
    }
}

fn p_tail(_: &mut EvalCtx<'_>, args: Vec<Value>) -> Result<Value, EvalError> {
    match args.into_iter().next().unwrap() {
        Value::List(mut items) => {
            if items.is_empty() {
                return Err(EvalError::Runtime("tail of an empty list".to_owned()));
            }
            items.remove(0);
            Ok(Value::List(items))
        }
        other => Err(EvalError::Runtime(format!("expected a list, got {other}"))),
    }
}

pub fn library() -> Library {
    Library::new("toylist")
        .with_primitive("0", "tint", Some("The number zero."), zero)
        .with_primitive("1", "tint", Some("The number one."), one)
        .with_primitive("+", "tint -> tint -> tint", Some("Add two numbers."), add)
        .with_primitive("nil", "list(tint)", Some("The empty list."), p_nil)
        .with_primitive(
            "cons",
            "tint -> list(tint) -> list(tint)",
            Some("Prepend a number to a list."),
            p_cons,
        )
        .with_primitive(
            "head",
            "list(tint) -> tint",
            Some("First element; errors on an empty list."),
            p_head,
        )
        .with_primitive(
            "tail",
            "list(tint) -> list(tint)",
            Some("All elements but the first; errors on an empty list."),
            p_tail,
        )
}

fn int_inputs(xs: &[i64]) -> Vec<Vec<Value>> {
    xs.iter().map(|&x| vec![Value::Int(x)]).collect()
}

fn list_inputs(xss: &[&[i64]]) -> Vec<Vec<Value>> {
    xss.iter()
        .map(|xs| vec![Value::List(xs.iter().map(|&x| Value::Int(x)).collect())])
        .collect()
}

struct Blueprint {
    description: &'static str,
    request: &'static str,
    program: &'static str,
    inputs: Vec<Vec<Value>>,
}

fn train_blueprints() -> Vec<Blueprint> {
    vec![
        Blueprint {
            description: "add two to the number",
            request: "tint -> tint",
            program: "(lambda (+ $0 (+ 1 1)))",
            inputs: int_inputs(&[0, 1, 2, 5, 9]),
        },
        Blueprint {
            description: "add four to the number",
            request: "tint -> tint",
            program: "(lambda (+ $0 (+ (+ 1 1) (+ 1 1))))",
            inputs: int_inputs(&[0, 1, 3, 6, 10]),
        },
        Blueprint {
            description: "double the number",
            request: "tint -> tint",
            program: "(lambda (+ $0 $0))",
            inputs: int_inputs(&[0, 1, 2, 3, 7]),
        },
        Blueprint {
            description: "double the number then add two",
            request: "tint -> tint",
            program: "(lambda (+ (+ $0 $0) (+ 1 1)))",
            inputs: int_inputs(&[0, 1, 2, 4, 6]),
        },
        Blueprint {
            description: "second element of the list",
            request: "list(tint) -> tint",
            program: "(lambda (head (tail $0)))",
            inputs: list_inputs(&[&[1, 2], &[3, 4, 5], &[0, 7, 2], &[9, 9, 1], &[2, 6]]),
        },
        Blueprint {
            description: "third element of the list",
            request: "list(tint) -> tint",
            program: "(lambda (head (tail (tail $0))))",
            inputs: list_inputs(&[&[1, 2, 3], &[4, 5, 6, 7], &[0, 0, 8], &[3, 1, 4, 1], &[2, 2, 2]]),
        },
        Blueprint {
            description: "add two to the first element",
            request: "list(tint) -> tint",
            program: "(lambda (+ (head $0) (+ 1 1)))",
            inputs: list_inputs(&[&[1, 2], &[0], &[5, 5, 5], &[7, 1], &[3, 9, 9]]),
        },
        Blueprint {
            description: "drop the first two elements",
            request: "list(tint) -> list(tint)",
            program: "(lambda (tail (tail $0)))",
            inputs: list_inputs(&[&[1, 2, 3], &[4, 5, 6, 7], &[0, 1], &[9, 8, 7, 6], &[2, 3, 4]]),
        },
        Blueprint {
            description: "put two at the front of the list",
            request: "list(tint) -> list(tint)",
            program: "(lambda (cons (+ 1 1) $0))",
            inputs: list_inputs(&[&[], &[1], &[3, 4], &[5, 6, 7], &[0, 0]]),
        },
        Blueprint {
            description: "put zero at the front of the list",
            request: "list(tint) -> list(tint)",
            program: "(lambda (cons 0 $0))",
            inputs: list_inputs(&[&[1], &[2, 3], &[], &[4, 5, 6], &[7]]),
        },
        Blueprint {
            description: "make a one element list of the number",
            request: "tint -> list(tint)",
            program: "(lambda (cons $0 nil))",
            inputs: int_inputs(&[0, 1, 5, 8, 2]),
        },
        Blueprint {
            description: "make a list of the number then two",
            request: "tint -> list(tint)",
            program: "(lambda (cons $0 (cons (+ 1 1) nil)))",
            inputs: int_inputs(&[0, 3, 4, 7, 1]),
        },
        Blueprint {
            description: "add three to the number",
            request: "tint -> tint",
            program: "(lambda (+ $0 (+ 1 (+ 1 1))))",
            inputs: int_inputs(&[0, 1, 2, 6, 8]),
        },
        Blueprint {
            description: "add four to the first element",
            request: "list(tint) -> tint",
            program: "(lambda (+ (head $0) (+ (+ 1 1) (+ 1 1))))",
            inputs: list_inputs(&[&[1, 2], &[0, 3], &[6], &[2, 2, 2], &[5, 1]]),
        },
    ]
}

fn test_blueprints() -> Vec<Blueprint> {
    vec![
        Blueprint {
            description: "add two to the second element",
            request: "list(tint) -> tint",
            program: "(lambda (+ (head (tail $0)) (+ 1 1)))",
            inputs: list_inputs(&[&[1, 2], &[3, 4, 5], &[0, 9], &[7, 7, 7], &[2, 0]]),
        },
        Blueprint {
            description: "put four at the front of the list",
            request: "list(tint) -> list(tint)",
            program: "(lambda (cons (+ (+ 1 1) (+ 1 1)) $0))",
            inputs: list_inputs(&[&[], &[1], &[2, 3], &[5, 6, 7], &[9]]),
        },
        Blueprint {
            description: "quadruple the number",
            request: "tint -> tint",
            program: "(lambda (+ (+ $0 $0) (+ $0 $0)))",
            inputs: int_inputs(&[0, 1, 2, 3, 5]),
        },
        Blueprint {
            description: "fourth element of the list",
            request: "list(tint) -> tint",
            program: "(lambda (head (tail (tail (tail $0)))))",
            inputs: list_inputs(&[
                &[1, 2, 3, 4],
                &[5, 6, 7, 8, 9],
                &[0, 0, 0, 2],
                &[3, 1, 4, 1, 5],
                &[9, 9, 9, 9],
            ]),
        },
        Blueprint {
            description: "add one to the number",
            request: "tint -> tint",
            program: "(lambda (+ $0 1))",
            inputs: int_inputs(&[0, 1, 4, 6, 9]),
        },
        Blueprint {
            description: "make a list of the number then zero",
            request: "tint -> list(tint)",
            program: "(lambda (cons $0 (cons 0 nil)))",
            inputs: int_inputs(&[1, 2, 5, 7, 0]),
        },
        Blueprint {
            description: "double the first element",
            request: "list(tint) -> tint",
            program: "(lambda (+ (head $0) (head $0)))",
            inputs: list_inputs(&[&[1, 2], &[3], &[0, 5], &[6, 1, 1], &[4, 4]]),
        },
    ]
}

pub struct GeneratedCorpus {
    pub train: Vec<Task>,
    pub test: Vec<Task>,
    pub ground_truth: Vec<(String, Expr)>,
}

/// The corpus is fixed data, not sampled: outputs come from running each
/// reference program on its pinned inputs.
pub fn generate_corpus() -> GeneratedCorpus {
    let lib = library();
    let mut ground_truth = Vec::new();
    let mut realize = |split: &str, blueprints: Vec<Blueprint>| -> Vec<Task> {
        blueprints
            .into_iter()
            .enumerate()
            .map(|(idx, bp)| {
                let id = format!("toylist_{split}_{idx:03}");
                let program = expr::parse(bp.program, &lib).expect("blueprint parses");
                let examples = bp
                    .inputs
                    .iter()
                    .map(|inputs| Example {
                        inputs: inputs.clone(),
                        output: evaluate(&lib, &program, inputs, DEFAULT_STEP_BUDGET)
                            .expect("blueprint runs on its inputs"),
                    })
                    .collect();
                ground_truth.push((id.clone(), program));
                Task {
                    id,
                    description: bp.description.to_owned(),
                    request_ty: parse_ty(bp.request).unwrap(),
                    examples,
                }
            })
            .collect()
    };
    let train = realize("train", train_blueprints());
    let test = realize("test", test_blueprints());
    GeneratedCorpus {
        train,
        test,
        ground_truth,
    }
}

pub(super) fn domain_spec() -> Result<DomainSpec, DomainError> {
    let lib = library();
    let train = super::parse_corpus(
        "toylist/train.jsonl",
        include_str!("../../assets/toylist/train.jsonl"),
    )?;
    let test = super::parse_corpus(
        "toylist/test.jsonl",
        include_str!("../../assets/toylist/test.jsonl"),
    )?;
    let ground_truth = parse_ground_truth(
        "toylist/ground_truth.jsonl",
        include_str!("../../assets/toylist/ground_truth.jsonl"),
        &lib,
    )?;
    Ok(DomainSpec {
        name: "toylist".to_owned(),
        header: HEADER.to_owned(),
        library: lib,
        train,
        test,
        ground_truth,
        default_timeout_secs: 10.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::write_tasks_jsonl;

    #[test]
    fn list_primitives_behave() {
        let lib = library();
        let run = |src: &str, input: Value| {
            let e = expr::parse(src, &lib).unwrap();
            evaluate(&lib, &e, &[input], DEFAULT_STEP_BUDGET)
        };
        let l123 = Value::List(vec![Value::Int(1), Value::Int(2), Value::Int(3)]);
        assert_eq!(
            run("(lambda (head (tail $0)))", l123.clone()),
            Ok(Value::Int(2))
        );
        assert_eq!(
            run("(lambda (cons (+ 1 1) $0))", Value::List(vec![])),
            Ok(Value::List(vec![Value::Int(2)]))
        );
        assert!(matches!(
            run("(lambda (head $0))", Value::List(vec![])),
            Err(EvalError::Runtime(_))
        ));
        assert!(matches!(
            run("(lambda (tail $0))", Value::List(vec![])),
            Err(EvalError::Runtime(_))
        ));
    }

    #[test]
    fn corpus_shares_closed_subexpressions() {
        let corpus = generate_corpus();
        assert_eq!(corpus.train.len(), 14);
        assert_eq!(corpus.test.len(), 7);
        let shared = corpus
            .ground_truth
            .iter()
            .take(corpus.train.len())
            .filter(|(_, p)| expr::print(p).unwrap().contains("(+ 1 1)"))
            .count();
        assert!(shared >= 5, "expected (+ 1 1) across train programs, got {shared}");
    }

    #[test]
    fn bundled_corpus_matches_the_blueprints() {
        let corpus = generate_corpus();
        assert_eq!(
            write_tasks_jsonl(&corpus.train),
            include_str!("../../assets/toylist/train.jsonl")
        );
        assert_eq!(
            write_tasks_jsonl(&corpus.test),
            include_str!("../../assets/toylist/test.jsonl")
        );
        assert_eq!(
            super::super::write_ground_truth_jsonl(&corpus.ground_truth),
            include_str!("../../assets/toylist/ground_truth.jsonl")
        );
    }

    #[test]
    #[ignore = "rewrites the bundled corpus fixtures in assets/toylist"]
    fn regenerate_bundled_corpus() {
        let corpus = generate_corpus();
        let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/assets/toylist");
        std::fs::create_dir_all(dir).unwrap();
        std::fs::write(format!("{dir}/train.jsonl"), write_tasks_jsonl(&corpus.train)).unwrap();
        std::fs::write(format!("{dir}/test.jsonl"), write_tasks_jsonl(&corpus.test)).unwrap();
        std::fs::write(
            format!("{dir}/ground_truth.jsonl"),
            super::super::write_ground_truth_jsonl(&corpus.ground_truth),
        )
        .unwrap();
    }
}
