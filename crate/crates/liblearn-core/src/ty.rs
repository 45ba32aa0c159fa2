//! Rank-1 polymorphic types: variables, constructors, and arrows, with a
//! unification context shared by inference, scoring, and enumeration.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ty {
    /// Type variable `tN`. Schemes are stored with variables numbered from 0.
    Var(usize),
    /// Constructor application, e.g. `int` or `list(tsubstr)`.
    Con(String, Vec<Ty>),
    Arrow(Box<Ty>, Box<Ty>),
}

#[derive(Debug, Error, PartialEq, Eq, Clone, Serialize, Deserialize)]
pub enum TyParseError {
    #[error("unexpected character {ch:?} at byte {pos} in type")]
    UnexpectedChar { pos: usize, ch: char },
    #[error("unexpected end of type")]
    UnexpectedEof,
    #[error("trailing input at byte {pos} in type")]
    TrailingInput { pos: usize },
}

#[derive(Debug, Error, PartialEq, Eq, Clone, Serialize, Deserialize)]
pub enum UnifyError {
    #[error("cannot unify {0} with {1}")]
    Mismatch(String, String),
    #[error("occurs check failed: t{0} appears in {1}")]
    Occurs(usize, String),
}

impl Ty {
    pub fn con(name: impl Into<String>) -> Ty {
        Ty::Con(name.into(), Vec::new())
    }

    pub fn arrow(from: Ty, to: Ty) -> Ty {
        Ty::Arrow(Box::new(from), Box::new(to))
    }

    /// Builds `a1 -> a2 -> ... -> ret`.
    pub fn arrows(args: impl IntoIterator<Item = Ty>, ret: Ty) -> Ty {
        let args: Vec<Ty> = args.into_iter().collect();
        args.into_iter().rev().fold(ret, |acc, a| Ty::arrow(a, acc))
    }

    pub fn is_arrow(&self) -> bool {
        matches!(self, Ty::Arrow(_, _))
    }

    /// Argument types followed by the final return type.
    pub fn uncurry(&self) -> (Vec<&Ty>, &Ty) {
        let mut args = Vec::new();
        let mut t = self;
        while let Ty::Arrow(a, b) = t {
            args.push(a.as_ref());
            t = b.as_ref();
        }
        (args, t)
    }

    pub fn arity(&self) -> usize {
        self.uncurry().0.len()
    }

    fn max_var(&self) -> Option<usize> {
        match self {
            Ty::Var(i) => Some(*i),
            Ty::Con(_, args) => args.iter().filter_map(Ty::max_var).max(),
            Ty::Arrow(a, b) => a.max_var().max(b.max_var()),
        }
    }

    /// Renumbers variables in first-occurrence order so equal-up-to-renaming
    /// types print identically.
    pub fn canonicalize(&self) -> Ty {
        fn go(t: &Ty, map: &mut Vec<usize>) -> Ty {
            match t {
                Ty::Var(i) => {
                    if let Some(pos) = map.iter().position(|v| v == i) {
                        Ty::Var(pos)
                    } else {
                        map.push(*i);
                        Ty::Var(map.len() - 1)
                    }
                }
                Ty::Con(name, args) => {
                    Ty::Con(name.clone(), args.iter().map(|a| go(a, map)).collect())
                }
                Ty::Arrow(a, b) => Ty::arrow(go(a, map), go(b, map)),
            }
        }
        go(self, &mut Vec::new())
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Var(i) => write!(f, "t{i}"),
            Ty::Con(name, args) => {
                write!(f, "{name}")?;
                if !args.is_empty() {
                    write!(f, "(")?;
                    for (k, a) in args.iter().enumerate() {
                        if k > 0 {
                            write!(f, ", ")?;
                        }
                        write!(f, "{a}")?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
            Ty::Arrow(a, b) => {
                if a.is_arrow() {
                    write!(f, "({a}) -> {b}")
                } else {
                    write!(f, "{a} -> {b}")
                }
            }
        }
    }
}

/// Parses `t := atom ('->' t)?`, `atom := IDENT ('(' t (',' t)* ')')? | '(' t ')'`.
/// Identifiers of the form `t<digits>` are type variables.
pub fn parse_ty(src: &str) -> Result<Ty, TyParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut pos = 0;
    let t = parse_arrow(&chars, &mut pos)?;
    skip_ws(&chars, &mut pos);
    if pos < chars.len() {
        return Err(TyParseError::TrailingInput { pos });
    }
    Ok(t)
}

fn skip_ws(chars: &[char], pos: &mut usize) {
    while *pos < chars.len() && chars[*pos].is_whitespace() {
        *pos += 1;
    }
}

fn parse_arrow(chars: &[char], pos: &mut usize) -> Result<Ty, TyParseError> {
    let left = parse_atom(chars, pos)?;
    skip_ws(chars, pos);
    if chars.get(*pos) == Some(&'-') && chars.get(*pos + 1) == Some(&'>') {
        *pos += 2;
        skip_ws(chars, pos);
        let right = parse_arrow(chars, pos)?;
        Ok(Ty::arrow(left, right))
    } else {
        Ok(left)
    }
}

fn parse_atom(chars: &[char], pos: &mut usize) -> Result<Ty, TyParseError> {
    skip_ws(chars, pos);
    match chars.get(*pos) {
        None => Err(TyParseError::UnexpectedEof),
        Some('(') => {
            *pos += 1;
            let inner = parse_arrow(chars, pos)?;
            skip_ws(chars, pos);
            if chars.get(*pos) == Some(&')') {
                *pos += 1;
                Ok(inner)
            } else {
                Err(TyParseError::UnexpectedEof)
            }
        }
        Some(c) if c.is_alphanumeric() || *c == '_' => {
            let start = *pos;
            while let Some(c) = chars.get(*pos) {
                if c.is_alphanumeric() || *c == '_' {
                    *pos += 1;
                } else {
                    break;
                }
            }
            let name: String = chars[start..*pos].iter().collect();
            skip_ws(chars, pos);
            let mut args = Vec::new();
            if chars.get(*pos) == Some(&'(') {
                *pos += 1;
                loop {
                    args.push(parse_arrow(chars, pos)?);
                    skip_ws(chars, pos);
                    match chars.get(*pos) {
                        Some(',') => {
                            *pos += 1;
                        }
                        Some(')') => {
                            *pos += 1;
                            break;
                        }
                        Some(c) => {
                            return Err(TyParseError::UnexpectedChar { pos: *pos, ch: *c })
                        }
                        None => return Err(TyParseError::UnexpectedEof),
                    }
                }
            }
            if args.is_empty() {
                if let Some(rest) = name.strip_prefix('t') {
                    if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) {
                        return Ok(Ty::Var(rest.parse().unwrap()));
                    }
                }
            }
            Ok(Ty::Con(name, args))
        }
        Some(c) => Err(TyParseError::UnexpectedChar { pos: *pos, ch: *c }),
    }
}

/// Mutable unification state. Variables are allocated here; schemes are
/// instantiated by offsetting their canonical variables into fresh ones.
#[derive(Debug, Clone, Default)]
pub struct TyCtx {
    subst: Vec<Option<Ty>>,
}

impl TyCtx {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fresh(&mut self) -> Ty {
        self.subst.push(None);
        Ty::Var(self.subst.len() - 1)
    }

    /// Copies a scheme into this context with fresh variables.
    pub fn instantiate(&mut self, scheme: &Ty) -> Ty {
        let count = scheme.max_var().map_or(0, |m| m + 1);
        let offset = self.subst.len();
        for _ in 0..count {
            self.subst.push(None);
        }
        fn shift(t: &Ty, offset: usize) -> Ty {
            match t {
                Ty::Var(i) => Ty::Var(i + offset),
                Ty::Con(name, args) => {
                    Ty::Con(name.clone(), args.iter().map(|a| shift(a, offset)).collect())
                }
                Ty::Arrow(a, b) => Ty::arrow(shift(a, offset), shift(b, offset)),
            }
        }
        shift(scheme, offset)
    }

    /// Fully applies the substitution to `t`.
    pub fn resolve(&self, t: &Ty) -> Ty {
        match t {
            Ty::Var(i) => match self.subst.get(*i).and_then(|s| s.as_ref()) {
                Some(bound) => self.resolve(&bound.clone()),
                None => Ty::Var(*i),
            },
            Ty::Con(name, args) => {
                Ty::Con(name.clone(), args.iter().map(|a| self.resolve(a)).collect())
            }
            Ty::Arrow(a, b) => Ty::arrow(self.resolve(a), self.resolve(b)),
        }
    }

    fn shallow(&self, t: &Ty) -> Ty {
        match t {
            Ty::Var(i) => match self.subst.get(*i).and_then(|s| s.as_ref()) {
                Some(bound) => self.shallow(&bound.clone()),
                None => Ty::Var(*i),
            },
            other => other.clone(),
        }
    }

    fn occurs(&self, var: usize, t: &Ty) -> bool {
        match self.shallow(t) {
            Ty::Var(i) => i == var,
            Ty::Con(_, args) => args.iter().any(|a| self.occurs(var, a)),
            Ty::Arrow(a, b) => self.occurs(var, &a) || self.occurs(var, &b),
        }
    }

    pub fn unify(&mut self, a: &Ty, b: &Ty) -> Result<(), UnifyError> {
        let a = self.shallow(a);
        let b = self.shallow(b);
        match (a, b) {
            (Ty::Var(i), Ty::Var(j)) if i == j => Ok(()),
            (Ty::Var(i), other) | (other, Ty::Var(i)) => {
                if self.occurs(i, &other) {
                    return Err(UnifyError::Occurs(i, self.resolve(&other).to_string()));
                }
                self.subst[i] = Some(other);
                Ok(())
            }
            (Ty::Con(n1, a1), Ty::Con(n2, a2)) => {
                if n1 != n2 || a1.len() != a2.len() {
                    return Err(UnifyError::Mismatch(
                        Ty::Con(n1, a1).to_string(),
                        Ty::Con(n2, a2).to_string(),
                    ));
                }
                for (x, y) in a1.iter().zip(a2.iter()) {
                    self.unify(x, y)?;
                }
                Ok(())
            }
            (Ty::Arrow(a1, b1), Ty::Arrow(a2, b2)) => {
                self.unify(&a1, &a2)?;
                self.unify(&b1, &b2)
            }
            (x, y) => Err(UnifyError::Mismatch(
                self.resolve(&x).to_string(),
                self.resolve(&y).to_string(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print_round_trip() {
        for src in [
            "int",
            "int -> int",
            "int -> int -> int",
            "(int -> int) -> list(int)",
            "list(tsubstr)",
            "t0 -> t0",
            "tsubstr -> tfullstr -> list(tsubstr)",
        ] {
            let t = parse_ty(src).unwrap();
            assert_eq!(t.to_string(), src);
            assert_eq!(parse_ty(&t.to_string()).unwrap(), t);
        }
    }

    #[test]
    fn arrow_is_right_associative() {
        assert_eq!(
            parse_ty("int -> int -> int").unwrap(),
            Ty::arrow(
                Ty::con("int"),
                Ty::arrow(Ty::con("int"), Ty::con("int"))
            )
        );
    }

    #[test]
    fn unify_binds_variables() {
        let mut ctx = TyCtx::new();
        let v = ctx.fresh();
        ctx.unify(&v, &Ty::con("int")).unwrap();
        assert_eq!(ctx.resolve(&v), Ty::con("int"));
    }

    #[test]
    fn unify_mismatch_and_occurs_fail() {
        let mut ctx = TyCtx::new();
        assert!(ctx.unify(&Ty::con("int"), &Ty::con("bool")).is_err());
        let v = ctx.fresh();
        let arrow = Ty::arrow(v.clone(), Ty::con("int"));
        assert!(matches!(ctx.unify(&v, &arrow), Err(UnifyError::Occurs(_, _))));
    }

    #[test]
    fn instantiate_gives_fresh_variables() {
        let mut ctx = TyCtx::new();
        let scheme = parse_ty("t0 -> t0").unwrap();
        let a = ctx.instantiate(&scheme);
        let b = ctx.instantiate(&scheme);
        assert_ne!(a, b);
        // Unifying one copy does not constrain the other.
        let (args, _) = a.uncurry();
        ctx.unify(args[0], &Ty::con("int")).unwrap();
        let (bargs, _) = b.uncurry();
        assert!(matches!(ctx.resolve(bargs[0]), Ty::Var(_)));
    }

    #[test]
    fn canonicalize_renumbers_in_order() {
        let t = parse_ty("t5 -> t2 -> t5").unwrap();
        assert_eq!(t.canonicalize().to_string(), "t0 -> t1 -> t0");
    }

    #[test]
    fn uncurry_splits_arguments() {
        let t = parse_ty("int -> bool -> list(int)").unwrap();
        let (args, ret) = t.uncurry();
        assert_eq!(args.len(), 2);
        assert_eq!(ret.to_string(), "list(int)");
        assert_eq!(t.arity(), 2);
    }
}
