//! Tiny fixture libraries shared by module tests.

use crate::eval::{EvalCtx, EvalError};
use crate::library::Library;
use crate::value::Value;

pub(crate) fn int_args(args: &[Value]) -> Result<Vec<i64>, EvalError> {
    args.iter()
        .map(|v| match v {
            Value::Int(i) => Ok(*i),
            other => Err(EvalError::Runtime(format!("expected int, got {other}"))),
        })
        .collect()
}

fn zero(_: &mut EvalCtx<'_>, _: Vec<Value>) -> Result<Value, EvalError> {
    Ok(Value::Int(0))
}

fn one(_: &mut EvalCtx<'_>, _: Vec<Value>) -> Result<Value, EvalError> {
    Ok(Value::Int(1))
}

fn add(_: &mut EvalCtx<'_>, args: Vec<Value>) -> Result<Value, EvalError> {
    let ints = int_args(&args)?;
    Ok(Value::Int(ints[0] + ints[1]))
}

/// Three-production arithmetic library: `0`, `1`, `+`.
pub(crate) fn arith3() -> Library {
    Library::new("arith3")
        .with_primitive("0", "tint", None, zero)
        .with_primitive("1", "tint", None, one)
        .with_primitive("+", "tint -> tint -> tint", None, add)
}
