//! Runtime values produced by evaluation and carried in task examples.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Str(String),
    List(Vec<Value>),
    /// A lambda closure: `body` is evaluated with `env` extended by the
    /// argument. Never appears in task examples.
    Closure { env: Vec<Value>, body: crate::expr::Expr },
    /// Partially applied primitive, waiting for `arity` total arguments.
    Builtin { prim: String, args: Vec<Value>, arity: usize },
}

#[derive(Debug, Error, PartialEq, Clone)]
pub enum ValueFormatError {
    #[error("unsupported JSON value for examples: {0}")]
    Unsupported(String),
    #[error("non-integer numbers are not representable: {0}")]
    NonInteger(f64),
}

impl Value {
    pub fn is_function(&self) -> bool {
        matches!(self, Value::Closure { .. } | Value::Builtin { .. })
    }

    /// Converts a task-file JSON value. Only scalars and arrays are legal.
    pub fn from_json(v: &serde_json::Value) -> Result<Value, ValueFormatError> {
        match v {
            serde_json::Value::Bool(b) => Ok(Value::Bool(*b)),
            serde_json::Value::Number(n) => n
                .as_i64()
                .map(Value::Int)
                .ok_or_else(|| ValueFormatError::NonInteger(n.as_f64().unwrap_or(f64::NAN))),
            serde_json::Value::String(s) => Ok(Value::Str(s.clone())),
            serde_json::Value::Array(items) => items
                .iter()
                .map(Value::from_json)
                .collect::<Result<Vec<_>, _>>()
                .map(Value::List),
            other => Err(ValueFormatError::Unsupported(other.to_string())),
        }
    }

    pub fn to_json(&self) -> Result<serde_json::Value, ValueFormatError> {
        match self {
            Value::Int(i) => Ok(serde_json::Value::from(*i)),
            Value::Bool(b) => Ok(serde_json::Value::from(*b)),
            Value::Str(s) => Ok(serde_json::Value::from(s.as_str())),
            Value::List(items) => items
                .iter()
                .map(Value::to_json)
                .collect::<Result<Vec<_>, _>>()
                .map(serde_json::Value::Array),
            other => Err(ValueFormatError::Unsupported(format!("{other:?}"))),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::List(items) => {
                write!(f, "[")?;
                for (k, v) in items.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, "]")
            }
            Value::Closure { .. } => write!(f, "<closure>"),
            Value::Builtin { prim, args, .. } => write!(f, "<{prim}/{} applied>", args.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let v = Value::List(vec![
            Value::Int(3),
            Value::Str("abc".into()),
            Value::Bool(true),
        ]);
        let j = v.to_json().unwrap();
        assert_eq!(Value::from_json(&j).unwrap(), v);
    }

    #[test]
    fn floats_and_objects_are_rejected() {
        assert!(Value::from_json(&serde_json::json!(1.5)).is_err());
        assert!(Value::from_json(&serde_json::json!({"k": 1})).is_err());
    }
}
