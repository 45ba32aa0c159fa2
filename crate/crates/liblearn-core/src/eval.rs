//! Call-by-value evaluation with a per-call step budget. Learned abstractions
//! evaluate by inlining their bodies; they are never opaque at runtime.

use thiserror::Error;

use crate::expr::Expr;
use crate::library::Library;
use crate::value::Value;

/// Default per-example step budget.
pub const DEFAULT_STEP_BUDGET: u64 = 10_000;

#[derive(Debug, Error, PartialEq, Clone)]
pub enum EvalError {
    #[error("evaluation step budget exceeded")]
    BudgetExceeded,
    #[error("applied a non-function value: {0}")]
    NotAFunction(String),
    #[error("unbound variable during evaluation")]
    UnboundVariable,
    #[error("pattern MetaVars cannot be evaluated")]
    PatternNotEvaluable,
    #[error("unknown primitive {0:?}")]
    UnknownPrimitive(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

/// Implementation hook for a primitive. Receives exactly `arity` arguments;
/// may re-enter the evaluator through [`EvalCtx::apply_value`].
pub type PrimFn = fn(&mut EvalCtx<'_>, Vec<Value>) -> Result<Value, EvalError>;

pub struct EvalCtx<'l> {
    lib: &'l Library,
    steps: u64,
}

impl<'l> EvalCtx<'l> {
    pub fn new(lib: &'l Library, budget: u64) -> Self {
        EvalCtx { lib, steps: budget }
    }

    fn tick(&mut self) -> Result<(), EvalError> {
        if self.steps == 0 {
            return Err(EvalError::BudgetExceeded);
        }
        self.steps -= 1;
        Ok(())
    }

    pub fn eval(&mut self, e: &Expr, env: &[Value]) -> Result<Value, EvalError> {
        self.tick()?;
        match e {
            Expr::Var(i) => {
                if *i >= env.len() {
                    return Err(EvalError::UnboundVariable);
                }
                Ok(env[env.len() - 1 - i].clone())
            }
            Expr::MetaVar(_) => Err(EvalError::PatternNotEvaluable),
            Expr::Prim(name) => {
                if let Some(content) = e.literal_content() {
                    return Ok(Value::Str(content.to_owned()));
                }
                if let Some(prim) = self.lib.primitive(name) {
                    let arity = prim.ty.arity();
                    if arity == 0 {
                        let func = prim.func;
                        return func(self, Vec::new());
                    }
                    return Ok(Value::Builtin {
                        prim: name.clone(),
                        args: Vec::new(),
                        arity,
                    });
                }
                if let Some(abs) = self.lib.abstraction(name) {
                    let body = abs.body.clone();
                    return self.eval(&body, &[]);
                }
                Err(EvalError::UnknownPrimitive(name.clone()))
            }
            Expr::Lam(body) => Ok(Value::Closure {
                env: env.to_vec(),
                body: body.as_ref().clone(),
            }),
            Expr::App(f, x) => {
                let vf = self.eval(f, env)?;
                let vx = self.eval(x, env)?;
                self.apply_value(vf, vx)
            }
        }
    }

    pub fn apply_value(&mut self, f: Value, x: Value) -> Result<Value, EvalError> {
        self.tick()?;
        match f {
            Value::Closure { mut env, body } => {
                env.push(x);
                self.eval(&body, &env)
            }
            Value::Builtin { prim, mut args, arity } => {
                args.push(x);
                if args.len() == arity {
                    let func = self
                        .lib
                        .primitive(&prim)
                        .ok_or_else(|| EvalError::UnknownPrimitive(prim.clone()))?
                        .func;
                    func(self, args)
                } else {
                    Ok(Value::Builtin { prim, args, arity })
                }
            }
            other => Err(EvalError::NotAFunction(other.to_string())),
        }
    }
}

/// Evaluates `e` applied to `args` under the library, with a step budget.
pub fn evaluate(lib: &Library, e: &Expr, args: &[Value], budget: u64) -> Result<Value, EvalError> {
    let mut ctx = EvalCtx::new(lib, budget);
    let mut v = ctx.eval(e, &[])?;
    for a in args {
        v = ctx.apply_value(v, a.clone())?;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr;
    use crate::testutil::arith3;
    use crate::value::Value;

    fn run(src: &str, args: &[Value]) -> Result<Value, EvalError> {
        let lib = arith3();
        let e = expr::parse(src, &lib).unwrap();
        evaluate(&lib, &e, args, DEFAULT_STEP_BUDGET)
    }

    #[test]
    fn arithmetic_and_closures_evaluate() {
        assert_eq!(run("(+ 1 1)", &[]), Ok(Value::Int(2)));
        assert_eq!(run("(lambda (+ $0 1))", &[Value::Int(41)]), Ok(Value::Int(42)));
        assert_eq!(
            run("(lambda (lambda (+ $1 $0)))", &[Value::Int(2), Value::Int(3)]),
            Ok(Value::Int(5))
        );
    }

    #[test]
    fn partial_application_yields_a_function_value() {
        let v = run("(+ 1)", &[]).unwrap();
        assert!(v.is_function());
    }

    #[test]
    fn step_budget_is_enforced() {
        let lib = arith3();
        let e = expr::parse("(+ (+ 1 1) (+ 1 1))", &lib).unwrap();
        assert_eq!(
            evaluate(&lib, &e, &[], 2),
            Err(EvalError::BudgetExceeded)
        );
    }

    #[test]
    fn unknown_primitives_error() {
        let lib = arith3();
        let e = crate::expr::Expr::prim("mystery");
        assert!(matches!(
            evaluate(&lib, &e, &[], 100),
            Err(EvalError::UnknownPrimitive(_))
        ));
    }

    #[test]
    fn abstractions_evaluate_by_inlined_body() {
        let mut lib = arith3();
        lib.register_abstractions(&[expr::parse("(lambda (+ $0 $0))", &lib).unwrap()])
            .unwrap();
        let e = expr::parse("(fn_0 (+ 1 1))", &lib).unwrap();
        assert_eq!(
            evaluate(&lib, &e, &[], DEFAULT_STEP_BUDGET),
            Ok(Value::Int(4))
        );
        // Equivalence with the inlined form.
        let inlined = lib.inline(&e);
        assert_eq!(
            evaluate(&lib, &inlined, &[], DEFAULT_STEP_BUDGET),
            Ok(Value::Int(4))
        );
    }
}
