//! The program library: base primitives plus learned abstractions, with
//! per-production weights that define a PCFG over typed terms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, Expr, NameResolver};
use crate::eval::PrimFn;
use crate::infer::{self, TypeError};
use crate::ty::{parse_ty, Ty, TyCtx};

#[derive(Clone)]
pub struct Primitive {
    pub name: String,
    pub ty: Ty,
    pub func: PrimFn,
    pub doc: Option<String>,
}

impl std::fmt::Debug for Primitive {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Primitive")
            .field("name", &self.name)
            .field("ty", &self.ty.to_string())
            .finish()
    }
}

/// A learned, named body. `anon_name` (`fn_k`) is assigned at registration
/// and never reused; `readable_name` arrives later via documentation.
#[derive(Debug, Clone, PartialEq)]
pub struct Abstraction {
    pub anon_name: String,
    pub readable_name: Option<String>,
    pub doc: Option<String>,
    /// Closed term; leading `Lam`s are the abstraction's parameters.
    pub body: Expr,
    pub arity: usize,
    pub ty: Ty,
}

impl Abstraction {
    pub fn display_name(&self) -> &str {
        self.readable_name.as_deref().unwrap_or(&self.anon_name)
    }
}

/// Production weights. Named productions are keyed by primitive name or
/// abstraction `anon_name` (stable across renames); all bound variables share
/// a single weight. Only ratios matter: scoring renormalizes per hole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub named: BTreeMap<String, f64>,
    pub var: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            named: BTreeMap::new(),
            var: 1.0,
        }
    }
}

impl Weights {
    fn named_weight(&self, key: &str) -> f64 {
        self.named.get(key).copied().unwrap_or(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct Library {
    pub domain: String,
    pub primitives: Vec<Primitive>,
    pub abstractions: Vec<Abstraction>,
    pub weights: Weights,
    /// Monotonic counter backing `fn_k` names; persists when learned
    /// abstractions are dropped for a fresh compression pass.
    pub next_anon_id: usize,
    /// Fallback type for quoted literals that are not registered primitives.
    pub literal_ty: Option<Ty>,
}

#[derive(Debug, Error, PartialEq, Clone)]
pub enum RegisterError {
    #[error("abstraction body is not closed: {body}")]
    OpenBody { body: String },
    #[error("abstraction body contains a pattern MetaVar: {body}")]
    PatternBody { body: String },
    #[error("abstraction body does not type-check: {source} in {body}")]
    IllTyped { body: String, source: TypeError },
}

#[derive(Debug, Error, PartialEq, Clone)]
pub enum RenameError {
    #[error("no abstraction named {name:?}")]
    NotFound { name: String },
    #[error("name {name:?} is already taken")]
    Collision { name: String },
    #[error("name {name:?} is not a legal identifier")]
    InvalidName { name: String },
}

#[derive(Debug, Error, Clone)]
pub enum RestoreError {
    #[error("library file domain {found:?} does not match base library {expected:?}")]
    DomainMismatch { expected: String, found: String },
    #[error("record {anon}: {source}")]
    BadBody { anon: String, source: expr::ParseError },
    #[error("record {anon}: {source}")]
    BadType { anon: String, source: crate::ty::TyParseError },
    #[error("record {anon}: {source}")]
    Register { anon: String, source: RegisterError },
    #[error("duplicate name {name:?} in library file")]
    DuplicateName { name: String },
    #[error("malformed library file: {0}")]
    Format(String),
}

impl Library {
    pub fn new(domain: impl Into<String>) -> Library {
        Library {
            domain: domain.into(),
            primitives: Vec::new(),
            abstractions: Vec::new(),
            weights: Weights::default(),
            next_anon_id: 0,
            literal_ty: None,
        }
    }

    pub fn with_primitive(
        mut self,
        name: &str,
        ty: &str,
        doc: Option<&str>,
        func: PrimFn,
    ) -> Library {
        let ty = parse_ty(ty).unwrap_or_else(|e| panic!("bad primitive type for {name}: {e}"));
        debug_assert!(
            self.primitives.iter().all(|p| p.name != name),
            "duplicate primitive {name}"
        );
        self.primitives.push(Primitive {
            name: name.to_owned(),
            ty,
            func,
            doc: doc.map(str::to_owned),
        });
        self
    }

    pub fn with_literal_ty(mut self, ty: &str) -> Library {
        self.literal_ty = Some(parse_ty(ty).expect("bad literal type"));
        self
    }

    pub fn primitive(&self, name: &str) -> Option<&Primitive> {
        self.primitives.iter().find(|p| p.name == name)
    }

    /// Finds an abstraction by readable name or anon alias.
    pub fn abstraction(&self, name: &str) -> Option<&Abstraction> {
        self.abstractions
            .iter()
            .find(|a| a.display_name() == name || a.anon_name == name)
    }

    pub fn abstraction_mut(&mut self, name: &str) -> Option<&mut Abstraction> {
        self.abstractions
            .iter_mut()
            .find(|a| a.display_name() == name || a.anon_name == name)
    }

    pub fn has_name(&self, name: &str) -> bool {
        self.primitive(name).is_some()
            || self
                .abstractions
                .iter()
                .any(|a| a.display_name() == name || a.anon_name == name)
    }

    /// Total body size of learned abstractions, the library description length.
    pub fn learned_size(&self) -> usize {
        self.abstractions.iter().map(|a| a.body.size()).sum()
    }

    /// Library posterior analog: `-lambda * sum(size(body))`. Reported per
    /// iteration; acceptance of a single abstraction is gated on utility.
    pub fn score_library(&self, lambda: f64) -> f64 {
        -lambda * self.learned_size() as f64
    }

    /// Drops learned abstractions and resets weights, keeping the name
    /// counter so re-extracted bodies get fresh `fn_k` names.
    pub fn strip_learned(&self) -> Library {
        let mut base = self.clone();
        base.abstractions.clear();
        base.weights = Weights::default();
        base
    }

    /// Registers new abstraction bodies in order, assigning `fn_k` names.
    /// Later bodies may reference earlier ones. Returns the assigned names.
    pub fn register_abstractions(&mut self, bodies: &[Expr]) -> Result<Vec<String>, RegisterError> {
        let mut names = Vec::new();
        for body in bodies {
            let rendered = expr::print_pattern(body);
            if body.contains_metavar() {
                return Err(RegisterError::PatternBody { body: rendered });
            }
            if !body.is_closed() {
                return Err(RegisterError::OpenBody { body: rendered });
            }
            let ty = infer::infer_type(self, body).map_err(|source| RegisterError::IllTyped {
                body: rendered,
                source,
            })?;
            let mut arity = 0;
            let mut cursor = body;
            while let Expr::Lam(inner) = cursor {
                arity += 1;
                cursor = inner;
            }
            let anon_name = format!("fn_{}", self.next_anon_id);
            self.next_anon_id += 1;
            names.push(anon_name.clone());
            self.abstractions.push(Abstraction {
                anon_name,
                readable_name: None,
                doc: None,
                body: body.clone(),
                arity,
                ty,
            });
        }
        Ok(names)
    }

    /// Gives an abstraction a readable name. Other abstraction bodies that
    /// reference it are rewritten to the new name; weights are unaffected
    /// because they key on the anon name. Callers must rewrite any programs
    /// they hold themselves.
    pub fn rename_abstraction(&mut self, name: &str, new_name: &str) -> Result<(), RenameError> {
        let valid = !new_name.is_empty()
            && new_name != "lambda"
            && !new_name.starts_with('$')
            && !new_name.starts_with('#')
            && !new_name
                .chars()
                .any(|c| c.is_whitespace() || matches!(c, '(' | ')' | '\''));
        if !valid {
            return Err(RenameError::InvalidName {
                name: new_name.to_owned(),
            });
        }
        let idx = self
            .abstractions
            .iter()
            .position(|a| a.display_name() == name || a.anon_name == name)
            .ok_or_else(|| RenameError::NotFound {
                name: name.to_owned(),
            })?;
        let old_display = self.abstractions[idx].display_name().to_owned();
        if new_name == old_display {
            return Ok(());
        }
        if self.has_name(new_name) {
            return Err(RenameError::Collision {
                name: new_name.to_owned(),
            });
        }
        self.abstractions[idx].readable_name = Some(new_name.to_owned());
        for (i, abs) in self.abstractions.iter_mut().enumerate() {
            if i != idx {
                abs.body = abs.body.rename_prim(&old_display, new_name);
            }
        }
        Ok(())
    }

    /// Maps a display name to its weight key (abstractions key by anon name).
    pub fn production_key(&self, display: &str) -> Option<String> {
        if self.primitive(display).is_some() {
            return Some(display.to_owned());
        }
        self.abstraction(display).map(|a| a.anon_name.clone())
    }

    /// Laplace-smoothed usage counts over the given programs. Named
    /// productions normalize among themselves; the shared variable production
    /// is smoothed against that same total.
    pub fn compute_weights<'a>(
        &self,
        programs: impl IntoIterator<Item = &'a Expr>,
        alpha: f64,
    ) -> Weights {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for p in &self.primitives {
            counts.insert(p.name.clone(), 0);
        }
        for a in &self.abstractions {
            counts.insert(a.anon_name.clone(), 0);
        }
        let mut var_count: u64 = 0;
        for program in programs {
            count_uses(self, program, &mut counts, &mut var_count);
        }
        let named_total: f64 = counts.values().map(|c| *c as f64 + alpha).sum();
        let named = counts
            .into_iter()
            .map(|(k, c)| (k, (c as f64 + alpha) / named_total))
            .collect();
        let var = (var_count as f64 + alpha) / (named_total + var_count as f64 + alpha);
        Weights { named, var }
    }

    pub fn fit_weights<'a>(
        &mut self,
        programs: impl IntoIterator<Item = &'a Expr>,
        alpha: f64,
    ) -> &Weights {
        self.weights = self.compute_weights(programs, alpha);
        &self.weights
    }

    /// Log-probability of `e` under the PCFG induced by the weights: every
    /// generation choice contributes `ln(theta / sum of compatible thetas)`;
    /// lambdas forced by arrow-typed requests contribute `ln 1`. Programs
    /// outside the grammar's support (non-eta-long shapes or unregistered
    /// literals) score `-inf`.
    pub fn score_program(&self, e: &Expr, request: &Ty) -> Result<f64, TypeError> {
        infer::check_request(self, e, request)?;
        let mut ctx = TyCtx::new();
        let req = ctx.instantiate(&request.canonicalize());
        let mut env = Vec::new();
        Ok(self.score_rec(e, &req, &mut env, &mut ctx))
    }

    fn score_rec(&self, e: &Expr, request: &Ty, env: &mut Vec<Ty>, ctx: &mut TyCtx) -> f64 {
        let request = ctx.resolve(request);
        if let Ty::Arrow(a, b) = &request {
            return match e {
                Expr::Lam(body) => {
                    env.push(a.as_ref().clone());
                    let s = self.score_rec(body, b, env, ctx);
                    env.pop();
                    s
                }
                _ => f64::NEG_INFINITY,
            };
        }
        let (head, args) = e.spine();
        let cands = self.candidates(ctx, &request, env);
        let z: f64 = cands.iter().map(|c| c.weight).sum();
        let matched = cands.into_iter().find(|c| match (&c.label, head) {
            (CandLabel::Named { display, .. }, Expr::Prim(name)) => display == name,
            (CandLabel::Var(i), Expr::Var(j)) => i == j,
            _ => false,
        });
        let Some(cand) = matched else {
            return f64::NEG_INFINITY;
        };
        if args.len() != cand.arg_tys.len() {
            return f64::NEG_INFINITY;
        }
        *ctx = cand.ctx;
        let mut score = (cand.weight / z).ln();
        for (arg, aty) in args.iter().zip(cand.arg_tys.iter()) {
            if score == f64::NEG_INFINITY {
                break;
            }
            score += self.score_rec(arg, aty, env, ctx);
        }
        score
    }

    /// Generation choices available at a hole: named productions whose final
    /// return type unifies with the request (taken at full arity), plus one
    /// production per in-scope bound variable.
    pub(crate) fn candidates(&self, ctx: &TyCtx, request: &Ty, env: &[Ty]) -> Vec<Candidate> {
        let mut out = Vec::new();
        for prim in &self.primitives {
            if let Some(c) = self.try_candidate(
                ctx,
                request,
                &prim.ty,
                CandLabel::Named {
                    display: prim.name.clone(),
                    key: prim.name.clone(),
                },
            ) {
                out.push(c);
            }
        }
        for abs in &self.abstractions {
            if let Some(c) = self.try_candidate(
                ctx,
                request,
                &abs.ty,
                CandLabel::Named {
                    display: abs.display_name().to_owned(),
                    key: abs.anon_name.clone(),
                },
            ) {
                out.push(c);
            }
        }
        for (i, vty) in env.iter().rev().enumerate() {
            let mut cand_ctx = ctx.clone();
            let resolved = cand_ctx.resolve(vty);
            let (arg_tys, ret) = resolved.uncurry();
            if cand_ctx.unify(ret, request).is_ok() {
                out.push(Candidate {
                    label: CandLabel::Var(i),
                    weight: self.weights.var,
                    arg_tys: arg_tys.into_iter().cloned().collect(),
                    ctx: cand_ctx,
                });
            }
        }
        out
    }

    fn try_candidate(
        &self,
        ctx: &TyCtx,
        request: &Ty,
        scheme: &Ty,
        label: CandLabel,
    ) -> Option<Candidate> {
        let mut cand_ctx = ctx.clone();
        let inst = cand_ctx.instantiate(scheme);
        let (arg_tys, ret) = inst.uncurry();
        if cand_ctx.unify(ret, request).is_err() {
            return None;
        }
        let weight = match &label {
            CandLabel::Named { key, .. } => self.weights.named_weight(key),
            CandLabel::Var(_) => self.weights.var,
        };
        Some(Candidate {
            label,
            weight,
            arg_tys: arg_tys.into_iter().cloned().collect(),
            ctx: cand_ctx,
        })
    }

    /// Normalized choice distribution at a single hole; probabilities sum
    /// to 1 whenever any production is compatible.
    pub fn hole_distribution(&self, request: &Ty, env: &[Ty]) -> Vec<(String, f64)> {
        let mut ctx = TyCtx::new();
        let req = ctx.instantiate(&request.canonicalize());
        let env: Vec<Ty> = env.iter().map(|t| ctx.instantiate(&t.canonicalize())).collect();
        let cands = self.candidates(&ctx, &req, &env);
        let z: f64 = cands.iter().map(|c| c.weight).sum();
        cands
            .into_iter()
            .map(|c| {
                let label = match c.label {
                    CandLabel::Named { display, .. } => display,
                    CandLabel::Var(i) => format!("${i}"),
                };
                (label, c.weight / z)
            })
            .collect()
    }

    /// Fully inlines learned abstractions and beta-reduces the redexes this
    /// creates, producing an equivalent base-DSL term.
    pub fn inline(&self, e: &Expr) -> Expr {
        match e {
            Expr::Prim(name) => match self.abstraction(name) {
                Some(abs) => self.inline(&abs.body),
                None => e.clone(),
            },
            Expr::Var(_) | Expr::MetaVar(_) => e.clone(),
            Expr::Lam(b) => Expr::lam(self.inline(b)),
            Expr::App(f, x) => {
                let f = self.inline(f);
                let x = self.inline(x);
                beta_apply(f, x)
            }
        }
    }
}

/// Applies `f` to `x`, reducing immediately when `f` is a lambda whose
/// argument is closed (inlined abstraction arguments always are after the
/// surrounding spine has been inlined bottom-up); otherwise keeps the App.
fn beta_apply(f: Expr, x: Expr) -> Expr {
    match f {
        Expr::Lam(body) if x.is_closed() => {
            let reduced = body.subst(0, &x);
            // Substitution can expose further redexes, e.g. ((lambda (lambda b)) x y).
            if let Expr::App(g, y) = reduced {
                beta_apply(*g, *y)
            } else {
                reduced
            }
        }
        other => Expr::app(other, x),
    }
}

#[derive(Debug, Clone)]
pub(crate) enum CandLabel {
    Named { display: String, key: String },
    Var(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub label: CandLabel,
    pub weight: f64,
    pub arg_tys: Vec<Ty>,
    pub ctx: TyCtx,
}

fn count_uses(lib: &Library, e: &Expr, counts: &mut BTreeMap<String, u64>, vars: &mut u64) {
    match e {
        Expr::Prim(name) => {
            if let Some(key) = lib.production_key(name) {
                *counts.entry(key).or_insert(0) += 1;
            }
        }
        Expr::Var(_) => *vars += 1,
        Expr::MetaVar(_) => {}
        Expr::Lam(b) => count_uses(lib, b, counts, vars),
        Expr::App(f, x) => {
            count_uses(lib, f, counts, vars);
            count_uses(lib, x, counts, vars);
        }
    }
}

impl NameResolver for Library {
    fn resolve_name(&self, name: &str) -> Option<String> {
        if self.primitive(name).is_some() {
            return Some(name.to_owned());
        }
        if let Some(abs) = self.abstraction(name) {
            return Some(abs.display_name().to_owned());
        }
        // Unregistered quoted literals are admissible when a fallback type exists.
        if name.starts_with('\'') && self.literal_ty.is_some() {
            return Some(name.to_owned());
        }
        None
    }
}

/// Serialized library: one header plus ordered abstraction records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryFile {
    pub header: LibraryHeader,
    pub abstractions: Vec<AbstractionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryHeader {
    pub domain: String,
    pub next_anon_id: usize,
    pub named_weights: BTreeMap<String, f64>,
    pub var_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractionRecord {
    pub anon_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readable_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc: Option<String>,
    pub ty: String,
    pub body: String,
}

impl Library {
    pub fn to_file(&self) -> LibraryFile {
        LibraryFile {
            header: LibraryHeader {
                domain: self.domain.clone(),
                next_anon_id: self.next_anon_id,
                named_weights: self.weights.named.clone(),
                var_weight: self.weights.var,
            },
            abstractions: self
                .abstractions
                .iter()
                .map(|a| AbstractionRecord {
                    anon_name: a.anon_name.clone(),
                    readable_name: a.readable_name.clone(),
                    doc: a.doc.clone(),
                    ty: a.ty.to_string(),
                    body: expr::print(&a.body).expect("abstraction bodies are not patterns"),
                })
                .collect(),
        }
    }

    /// Rebuilds a library from its serialized form on top of the matching
    /// base (domain primitives). Records load in order so bodies may
    /// reference earlier abstractions.
    pub fn restore(base: Library, file: &LibraryFile) -> Result<Library, RestoreError> {
        if base.domain != file.header.domain {
            return Err(RestoreError::DomainMismatch {
                expected: base.domain,
                found: file.header.domain.clone(),
            });
        }
        let mut lib = base;
        for record in &file.abstractions {
            if lib.has_name(&record.anon_name) {
                return Err(RestoreError::DuplicateName {
                    name: record.anon_name.clone(),
                });
            }
            let body = expr::parse(&record.body, &lib).map_err(|source| RestoreError::BadBody {
                anon: record.anon_name.clone(),
                source,
            })?;
            let declared = parse_ty(&record.ty).map_err(|source| RestoreError::BadType {
                anon: record.anon_name.clone(),
                source,
            })?;
            let ty = infer::infer_type(&lib, &body).map_err(|source| RestoreError::Register {
                anon: record.anon_name.clone(),
                source: RegisterError::IllTyped {
                    body: record.body.clone(),
                    source,
                },
            })?;
            if ty != declared {
                return Err(RestoreError::Format(format!(
                    "record {}: declared type {} but body infers {}",
                    record.anon_name, declared, ty
                )));
            }
            if !body.is_closed() {
                return Err(RestoreError::Register {
                    anon: record.anon_name.clone(),
                    source: RegisterError::OpenBody {
                        body: record.body.clone(),
                    },
                });
            }
            if let Some(name) = &record.readable_name {
                if lib.has_name(name) {
                    return Err(RestoreError::DuplicateName { name: name.clone() });
                }
            }
            let mut arity = 0;
            let mut cursor = &body;
            while let Expr::Lam(inner) = cursor {
                arity += 1;
                cursor = inner;
            }
            let numeric: Option<usize> = record
                .anon_name
                .strip_prefix("fn_")
                .and_then(|s| s.parse().ok());
            if let Some(n) = numeric {
                lib.next_anon_id = lib.next_anon_id.max(n + 1);
            }
            lib.abstractions.push(Abstraction {
                anon_name: record.anon_name.clone(),
                readable_name: record.readable_name.clone(),
                doc: record.doc.clone(),
                body,
                arity,
                ty,
            });
        }
        lib.next_anon_id = lib.next_anon_id.max(file.header.next_anon_id);
        lib.weights = Weights {
            named: file.header.named_weights.clone(),
            var: file.header.var_weight,
        };
        Ok(lib)
    }
}

impl LibraryFile {
    /// One JSON object per line: header first, then records in order.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        for record in &self.abstractions {
            out.push('\n');
            out.push_str(&serde_json::to_string(record).expect("record serializes"));
        }
        out.push('\n');
        out
    }

    pub fn from_jsonl(text: &str) -> Result<LibraryFile, RestoreError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header_line = lines
            .next()
            .ok_or_else(|| RestoreError::Format("empty library file".into()))?;
        let header: LibraryHeader = serde_json::from_str(header_line)
            .map_err(|e| RestoreError::Format(format!("bad header: {e}")))?;
        let mut abstractions = Vec::new();
        for line in lines {
            let record: AbstractionRecord = serde_json::from_str(line)
                .map_err(|e| RestoreError::Format(format!("bad record: {e}")))?;
            abstractions.push(record);
        }
        Ok(LibraryFile {
            header,
            abstractions,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::arith3;

    fn parse_in(lib: &Library, src: &str) -> Expr {
        expr::parse(src, lib).expect("parses")
    }

    #[test]
    fn uniform_scores_renormalize_per_hole() {
        let lib = arith3();
        let req = parse_ty("tint").unwrap();
        let third = (1.0f64 / 3.0).ln();
        let score = lib.score_program(&parse_in(&lib, "0"), &req).unwrap();
        assert!((score - third).abs() < 1e-12);
        let score = lib.score_program(&parse_in(&lib, "(+ 0 1)"), &req).unwrap();
        assert!((score - 3.0 * third).abs() < 1e-12);
    }

    #[test]
    fn forced_lambdas_are_free_and_vars_share_one_weight() {
        let lib = arith3();
        let req = parse_ty("tint -> tint").unwrap();
        // Body hole sees four productions: 0, 1, +, and $0.
        let score = lib.score_program(&parse_in(&lib, "(lambda $0)"), &req).unwrap();
        assert!((score - (1.0f64 / 4.0).ln()).abs() < 1e-12);
        // A bare constant cannot have an arrow type.
        assert!(lib.score_program(&parse_in(&lib, "0"), &req).is_err());
    }

    #[test]
    fn partial_application_scores_neg_infinity() {
        let lib = arith3();
        let req = parse_ty("tint -> tint").unwrap();
        // (+ 1) is well-typed but not eta-long.
        let e = parse_in(&lib, "(+ 1)");
        let score = lib.score_program(&e, &req).unwrap();
        assert_eq!(score, f64::NEG_INFINITY);
    }

    #[test]
    fn laplace_weights_match_counts() {
        let lib = Library::new("two")
            .with_primitive("+", "tint -> tint -> tint", None, |_, _| {
                Ok(crate::value::Value::Int(0))
            })
            .with_primitive("0", "tint", None, |_, _| Ok(crate::value::Value::Int(0)));
        // One program holding nine `+` uses, nine variable uses, one `0`.
        let mut body = parse_in(&lib, "0");
        for _ in 0..9 {
            body = Expr::apply(Expr::prim("+"), vec![Expr::Var(0), body]);
        }
        let program = Expr::lam(body);
        let w = lib.compute_weights([&program], 1.0);
        assert!((w.named["+"] - 10.0 / 12.0).abs() < 1e-12);
        assert!((w.named["0"] - 2.0 / 12.0).abs() < 1e-12);
        assert!((w.var - 10.0 / 22.0).abs() < 1e-12);
    }

    #[test]
    fn register_names_sequentially_and_infers_types() {
        let mut lib = arith3();
        let body = parse_in(&lib, "(lambda (+ $0 $0))");
        let names = lib.register_abstractions(&[body]).unwrap();
        assert_eq!(names, vec!["fn_0"]);
        let abs = lib.abstraction("fn_0").unwrap();
        assert_eq!(abs.arity, 1);
        assert_eq!(abs.ty.to_string(), "tint -> tint");
        // A later body may call the earlier abstraction.
        let body2 = parse_in(&lib, "(lambda (fn_0 (fn_0 $0)))");
        let names = lib.register_abstractions(&[body2]).unwrap();
        assert_eq!(names, vec!["fn_1"]);
        assert_eq!(lib.abstraction("fn_1").unwrap().ty.to_string(), "tint -> tint");
    }

    #[test]
    fn register_rejects_bad_bodies() {
        let mut lib = arith3();
        let open = Expr::lam(Expr::Var(3));
        assert!(matches!(
            lib.register_abstractions(&[open]),
            Err(RegisterError::OpenBody { .. })
        ));
        let pattern = Expr::apply(Expr::prim("+"), vec![Expr::MetaVar(0), Expr::prim("1")]);
        assert!(matches!(
            lib.register_abstractions(&[pattern]),
            Err(RegisterError::PatternBody { .. })
        ));
        let ill = parse_in(&lib, "(+ 1)");
        let ill = Expr::apply(ill, vec![Expr::prim("+")]);
        assert!(matches!(
            lib.register_abstractions(&[ill]),
            Err(RegisterError::IllTyped { .. })
        ));
    }

    #[test]
    fn rename_updates_references_and_keeps_weight_key() {
        let mut lib = arith3();
        let body = parse_in(&lib, "(lambda (+ $0 $0))");
        lib.register_abstractions(&[body]).unwrap();
        let body2 = parse_in(&lib, "(lambda (fn_0 (fn_0 $0)))");
        lib.register_abstractions(&[body2]).unwrap();
        lib.rename_abstraction("fn_0", "double").unwrap();
        assert_eq!(lib.abstraction("double").unwrap().anon_name, "fn_0");
        assert_eq!(
            expr::print(&lib.abstraction("fn_1").unwrap().body).unwrap(),
            "(lambda (double (double $0)))"
        );
        // Old anon name still resolves when parsing stored programs.
        assert_eq!(expr::print(&parse_in(&lib, "(fn_0 1)")).unwrap(), "(double 1)");
        assert_eq!(lib.production_key("double").as_deref(), Some("fn_0"));
        // Collisions and bad identifiers are refused.
        assert!(matches!(
            lib.rename_abstraction("fn_1", "double"),
            Err(RenameError::Collision { .. })
        ));
        assert!(matches!(
            lib.rename_abstraction("fn_1", "has space"),
            Err(RenameError::InvalidName { .. })
        ));
    }

    #[test]
    fn inline_expands_to_base_primitives() {
        let mut lib = arith3();
        lib.register_abstractions(&[parse_in(&lib, "(lambda (+ $0 $0))")])
            .unwrap();
        let program = parse_in(&lib, "(fn_0 (fn_0 1))");
        let inlined = lib.inline(&program);
        assert_eq!(expr::print(&inlined).unwrap(), "(+ (+ 1 1) (+ 1 1))");
        assert!(!inlined.referenced_prims().iter().any(|p| p.starts_with("fn_")));
    }

    #[test]
    fn hole_distribution_is_normalized() {
        let lib = arith3();
        let req = parse_ty("tint").unwrap();
        let dist = lib.hole_distribution(&req, &[]);
        assert_eq!(dist.len(), 3);
        let total: f64 = dist.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let dist = lib.hole_distribution(&req, &[req.clone()]);
        assert_eq!(dist.len(), 4);
        assert!(dist.iter().all(|(_, p)| (p - 0.25).abs() < 1e-12));
    }

    #[test]
    fn serialized_library_round_trips() {
        let mut lib = arith3();
        lib.register_abstractions(&[expr::parse("(lambda (+ $0 $0))", &lib).unwrap()])
            .unwrap();
        lib.register_abstractions(&[expr::parse("(lambda (fn_0 (fn_0 $0)))", &lib).unwrap()])
            .unwrap();
        lib.rename_abstraction("fn_0", "double").unwrap();
        let programs = [expr::parse("(double 1)", &lib).unwrap()];
        lib.fit_weights(programs.iter(), 1.0);
        let text = lib.to_file().to_jsonl();
        let file = LibraryFile::from_jsonl(&text).unwrap();
        let restored = Library::restore(arith3(), &file).unwrap();
        assert_eq!(restored.to_file(), lib.to_file());
        assert_eq!(restored.next_anon_id, lib.next_anon_id);
        // Restoring onto the wrong base fails fast.
        assert!(matches!(
            Library::restore(Library::new("other"), &file),
            Err(RestoreError::DomainMismatch { .. })
        ));
    }
}
