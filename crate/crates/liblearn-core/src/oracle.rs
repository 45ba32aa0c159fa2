//! Brute-force reference implementations used to check the search and
//! compression engines. Everything here recomputes results from first
//! principles: the unifier is a plain substitution map, generation is
//! exhaustive over a size budget, and pattern discovery enumerates every
//! generalization of every subtree.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::{self, Expr};
use crate::library::Library;
use crate::ty::Ty;

type Subst = BTreeMap<usize, Ty>;

fn resolve(t: &Ty, s: &Subst) -> Ty {
    match t {
        Ty::Var(i) => match s.get(i) {
            Some(bound) => resolve(bound, s),
            None => Ty::Var(*i),
        },
        Ty::Con(name, args) => Ty::Con(name.clone(), args.iter().map(|a| resolve(a, s)).collect()),
        Ty::Arrow(a, b) => Ty::arrow(resolve(a, s), resolve(b, s)),
    }
}

fn shallow(t: &Ty, s: &Subst) -> Ty {
    match t {
        Ty::Var(i) => match s.get(i) {
            Some(bound) => shallow(bound, s),
            None => Ty::Var(*i),
        },
        other => other.clone(),
    }
}

fn occurs(var: usize, t: &Ty, s: &Subst) -> bool {
    match shallow(t, s) {
        Ty::Var(i) => i == var,
        Ty::Con(_, args) => args.iter().any(|a| occurs(var, a, s)),
        Ty::Arrow(a, b) => occurs(var, &a, s) || occurs(var, &b, s),
    }
}

fn unify(a: &Ty, b: &Ty, s: &mut Subst) -> bool {
    let a = shallow(a, s);
    let b = shallow(b, s);
    match (a, b) {
        (Ty::Var(i), Ty::Var(j)) if i == j => true,
        (Ty::Var(i), other) | (other, Ty::Var(i)) => {
            if occurs(i, &other, s) {
                return false;
            }
            s.insert(i, other);
            true
        }
        (Ty::Con(n1, a1), Ty::Con(n2, a2)) => {
            n1 == n2
                && a1.len() == a2.len()
                && a1.iter().zip(a2.iter()).all(|(x, y)| unify(x, y, s))
        }
        (Ty::Arrow(a1, b1), Ty::Arrow(a2, b2)) => unify(&a1, &a2, s) && unify(&b1, &b2, s),
        _ => false,
    }
}

fn var_count(t: &Ty) -> usize {
    match t {
        Ty::Var(i) => i + 1,
        Ty::Con(_, args) => args.iter().map(var_count).max().unwrap_or(0),
        Ty::Arrow(a, b) => var_count(a).max(var_count(b)),
    }
}

fn shift_vars(t: &Ty, offset: usize) -> Ty {
    match t {
        Ty::Var(i) => Ty::Var(i + offset),
        Ty::Con(name, args) => Ty::Con(
            name.clone(),
            args.iter().map(|a| shift_vars(a, offset)).collect(),
        ),
        Ty::Arrow(a, b) => Ty::arrow(shift_vars(a, offset), shift_vars(b, offset)),
    }
}

struct Choice {
    head: Expr,
    weight: f64,
    arg_tys: Vec<Ty>,
    subst: Subst,
    fresh: usize,
}

fn named_weight(lib: &Library, key: &str) -> f64 {
    lib.weights.named.get(key).copied().unwrap_or(1.0)
}

/// All grammar choices at a hole plus the normalizer over them: named
/// productions unify at full arity, each in-scope variable is one production
/// with the shared variable weight.
fn choices(lib: &Library, req: &Ty, env: &[Ty], subst: &Subst, fresh: usize) -> (Vec<Choice>, f64) {
    let mut out = Vec::new();
    let named: Vec<(String, String, Ty)> = lib
        .primitives
        .iter()
        .map(|p| (p.name.clone(), p.name.clone(), p.ty.clone()))
        .chain(
            lib.abstractions
                .iter()
                .map(|a| (a.display_name().to_owned(), a.anon_name.clone(), a.ty.clone())),
        )
        .collect();
    for (display, key, scheme) in named {
        let mut s2 = subst.clone();
        let inst = shift_vars(&scheme, fresh);
        let fresh2 = fresh + var_count(&scheme);
        let (arg_tys, ret) = inst.uncurry();
        if unify(ret, req, &mut s2) {
            out.push(Choice {
                head: Expr::prim(display),
                weight: named_weight(lib, &key),
                arg_tys: arg_tys.into_iter().cloned().collect(),
                subst: s2,
                fresh: fresh2,
            });
        }
    }
    for (i, vty) in env.iter().rev().enumerate() {
        let mut s2 = subst.clone();
        let resolved = resolve(vty, &s2);
        let (arg_tys, ret) = resolved.uncurry();
        if unify(ret, req, &mut s2) {
            out.push(Choice {
                head: Expr::Var(i),
                weight: lib.weights.var,
                arg_tys: arg_tys.into_iter().cloned().collect(),
                subst: s2,
                fresh,
            });
        }
    }
    let z = out.iter().map(|c| c.weight).sum();
    (out, z)
}

/// Complete programs of size at most `budget`, each with the final
/// substitution, fresh counter, and accumulated log prior.
fn gen(
    lib: &Library,
    req: &Ty,
    env: &[Ty],
    budget: usize,
    subst: &Subst,
    fresh: usize,
) -> Vec<(Expr, Subst, usize, f64)> {
    if budget == 0 {
        return Vec::new();
    }
    // Eta-long form: arrow requests immediately bind their arguments.
    let mut env2 = env.to_vec();
    let mut cur = resolve(req, subst);
    let mut wraps = 0usize;
    while let Ty::Arrow(a, b) = cur {
        env2.push(*a);
        cur = *b;
        wraps += 1;
    }
    if budget < wraps + 1 {
        return Vec::new();
    }
    let mut results = Vec::new();
    let (cands, z) = choices(lib, &cur, &env2, subst, fresh);
    for cand in cands {
        let k = cand.arg_tys.len();
        if budget - wraps < 1 + 2 * k {
            continue;
        }
        let lp = (cand.weight / z).ln();
        if !lp.is_finite() {
            continue;
        }
        let mut states: Vec<(Vec<Expr>, Subst, usize, f64)> =
            vec![(Vec::new(), cand.subst.clone(), cand.fresh, lp)];
        for (j, aty) in cand.arg_tys.iter().enumerate() {
            let mut next = Vec::new();
            for (exprs, s, f, l) in &states {
                let used: usize = exprs.iter().map(Expr::size).sum();
                let reserve = k - j - 1;
                let Some(arg_budget) = (budget - wraps).checked_sub(1 + k + used + reserve)
                else {
                    continue;
                };
                for (ae, s3, f3, l3) in gen(lib, aty, &env2, arg_budget, s, *f) {
                    let mut exprs2 = exprs.clone();
                    exprs2.push(ae);
                    // Each argument multiplies in its own conditional probability.
                    next.push((exprs2, s3, f3, l + l3));
                }
            }
            states = next;
        }
        for (exprs, s, f, l) in states {
            let mut e = Expr::apply(cand.head.clone(), exprs);
            for _ in 0..wraps {
                e = Expr::lam(e);
            }
            results.push((e, s, f, l));
        }
    }
    results
}

/// Every well-typed program of `request` type with size at most `max_size`,
/// keyed by canonical print, with its exact log prior.
pub fn all_programs(lib: &Library, request: &Ty, max_size: usize) -> BTreeMap<String, f64> {
    let req = request.canonicalize();
    let fresh = var_count(&req);
    let mut out = BTreeMap::new();
    for (e, _, _, lp) in gen(lib, &req, &[], max_size, &Subst::new(), fresh) {
        let key = expr::print_pattern(&e);
        if let Some(prev) = out.insert(key, lp) {
            debug_assert!((prev - lp).abs() < 1e-9, "duplicate derivation disagrees");
        }
    }
    out
}

/// A prim name guaranteed not to collide with anything in the corpus, so a
/// rewritten call site can never itself be matched.
fn fresh_head(corpus: &[Expr]) -> String {
    let mut used = std::collections::BTreeSet::new();
    for p in corpus {
        used.extend(p.referenced_prims());
    }
    let mut name = "__cand".to_owned();
    while used.contains(&name) {
        name.push('_');
    }
    name
}

fn o_match(p: &Expr, t: &Expr, binds: &mut [Option<Expr>]) -> bool {
    match (p, t) {
        (Expr::MetaVar(s), _) => {
            if !t.is_closed() {
                return false;
            }
            match &binds[*s] {
                Some(existing) => existing == t,
                None => {
                    binds[*s] = Some(t.clone());
                    true
                }
            }
        }
        (Expr::Prim(a), Expr::Prim(b)) => a == b,
        (Expr::Var(a), Expr::Var(b)) => a == b,
        (Expr::Lam(a), Expr::Lam(b)) => o_match(a, b, binds),
        (Expr::App(f1, x1), Expr::App(f2, x2)) => {
            o_match(f1, f2, binds) && o_match(x1, x2, binds)
        }
        _ => false,
    }
}

fn o_match_full(p: &Expr, arity: usize, t: &Expr) -> Option<Vec<Expr>> {
    let mut binds = vec![None; arity];
    if o_match(p, t, &mut binds) {
        binds.into_iter().collect()
    } else {
        None
    }
}

fn o_rewrite(p: &Expr, arity: usize, head: &str, t: &Expr) -> Expr {
    if let Some(binds) = o_match_full(p, arity, t) {
        let args: Vec<Expr> = binds.iter().map(|b| o_rewrite(p, arity, head, b)).collect();
        return Expr::apply(Expr::prim(head), args);
    }
    match t {
        Expr::Lam(b) => Expr::lam(o_rewrite(p, arity, head, b)),
        Expr::App(f, x) => Expr::app(o_rewrite(p, arity, head, f), o_rewrite(p, arity, head, x)),
        leaf => leaf.clone(),
    }
}

fn o_count_outer_sites(p: &Expr, arity: usize, t: &Expr) -> usize {
    if o_match_full(p, arity, t).is_some() {
        return 1;
    }
    match t {
        Expr::Lam(b) => o_count_outer_sites(p, arity, b),
        Expr::App(f, x) => o_count_outer_sites(p, arity, f) + o_count_outer_sites(p, arity, x),
        _ => 0,
    }
}

/// Every cut of `t`: a copy with some closed subtrees replaced by
/// placeholder slots, paired with the replaced subtrees in preorder.
fn cuts(t: &Expr) -> Vec<(Expr, Vec<Expr>)> {
    let mut out = Vec::new();
    if t.is_closed() {
        out.push((Expr::MetaVar(0), vec![t.clone()]));
    }
    match t {
        Expr::Prim(_) | Expr::Var(_) => out.push((t.clone(), Vec::new())),
        Expr::MetaVar(_) => unreachable!("corpus programs never contain MetaVars"),
        Expr::Lam(b) => {
            for (pb, rb) in cuts(b) {
                out.push((Expr::lam(pb), rb));
            }
        }
        Expr::App(f, x) => {
            for (pf, rf) in cuts(f) {
                for (px, rx) in cuts(x) {
                    let mut r = rf.clone();
                    r.extend(rx.iter().cloned());
                    out.push((Expr::app(pf.clone(), px), r));
                }
            }
        }
    }
    out
}

/// Slot assignments for cut positions: positions sharing a slot must have
/// replaced equal subtrees, block ids run by first occurrence, at most
/// `max_arity` blocks.
fn assignments(replaced: &[Expr], max_arity: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn go(
        replaced: &[Expr],
        max_arity: usize,
        idx: usize,
        assign: &mut Vec<usize>,
        reps: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if idx == replaced.len() {
            out.push(assign.clone());
            return;
        }
        for block in 0..reps.len() {
            if replaced[reps[block]] == replaced[idx] {
                assign.push(block);
                go(replaced, max_arity, idx + 1, assign, reps, out);
                assign.pop();
            }
        }
        if reps.len() < max_arity {
            reps.push(idx);
            assign.push(reps.len() - 1);
            go(replaced, max_arity, idx + 1, assign, reps, out);
            assign.pop();
            reps.pop();
        }
    }
    go(replaced, max_arity, 0, &mut Vec::new(), &mut Vec::new(), &mut out);
    out
}

/// Renumbers a cut's positional placeholders to the assigned slot ids.
fn apply_assignment(cut: &Expr, assign: &[usize], pos: &mut usize) -> Expr {
    match cut {
        Expr::MetaVar(_) => {
            let slot = assign[*pos];
            *pos += 1;
            Expr::MetaVar(slot)
        }
        Expr::Prim(_) | Expr::Var(_) => cut.clone(),
        Expr::Lam(b) => Expr::lam(apply_assignment(b, assign, pos)),
        Expr::App(f, x) => {
            let f2 = apply_assignment(f, assign, pos);
            Expr::app(f2, apply_assignment(x, assign, pos))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleBest {
    pub utility: i64,
    pub pattern: String,
    pub sites: usize,
}

/// Exhaustive reference for the compression search: enumerates every
/// generalization of every closed subtree, measures each by an independent
/// rewrite, and returns the utility-maximal pattern (smallest print on
/// ties), or none when nothing has positive utility.
pub fn oracle_best_abstraction(
    corpus: &[Expr],
    max_arity: usize,
    min_sites: usize,
) -> Option<OracleBest> {
    let head = fresh_head(corpus);
    let mut subtrees: Vec<Expr> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    fn collect(t: &Expr, seen: &mut std::collections::BTreeSet<String>, out: &mut Vec<Expr>) {
        if t.is_closed() && seen.insert(expr::print_pattern(t)) {
            out.push(t.clone());
        }
        match t {
            Expr::Lam(b) => collect(b, seen, out),
            Expr::App(f, x) => {
                collect(f, seen, out);
                collect(x, seen, out);
            }
            _ => {}
        }
    }
    for p in corpus {
        collect(p, &mut seen, &mut subtrees);
    }

    let before: i64 = corpus.iter().map(|p| p.size() as i64).sum();
    let mut tried = std::collections::BTreeSet::new();
    let mut best: Option<OracleBest> = None;
    for t in &subtrees {
        for (cut, replaced) in cuts(t) {
            if matches!(cut, Expr::MetaVar(_)) {
                continue;
            }
            for assign in assignments(&replaced, max_arity) {
                let arity = assign.iter().copied().max().map_or(0, |m| m + 1);
                let mut pos = 0;
                let pattern = apply_assignment(&cut, &assign, &mut pos);
                let print = expr::print_pattern(&pattern);
                if !tried.insert(print.clone()) {
                    continue;
                }
                let sites = corpus
                    .iter()
                    .map(|p| o_count_outer_sites(&pattern, arity, p))
                    .sum::<usize>();
                if sites < min_sites {
                    continue;
                }
                let after: i64 = corpus
                    .iter()
                    .map(|p| o_rewrite(&pattern, arity, &head, p).size() as i64)
                    .sum();
                let utility = before - after - pattern.size() as i64;
                if utility <= 0 {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some(b) => utility > b.utility || (utility == b.utility && print < b.pattern),
                };
                if better {
                    best = Some(OracleBest {
                        utility,
                        pattern: print,
                        sites,
                    });
                }
            }
        }
    }
    best
}

/// Seeded random corpora for cross-checking compression against the oracle:
/// between 2 and 8 closed programs of at most 15 nodes over a small alphabet.
pub fn random_corpus(seed: u64) -> Vec<Expr> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prims = ["f", "g", "a", "b", "c"];
    fn gen_expr(rng: &mut ChaCha8Rng, prims: &[&str], lam_depth: usize, budget: usize) -> Expr {
        if budget <= 1 {
            if lam_depth > 0 && rng.gen_bool(0.3) {
                return Expr::Var(rng.gen_range(0..lam_depth));
            }
            return Expr::prim(prims[rng.gen_range(0..prims.len())]);
        }
        match rng.gen_range(0..10) {
            0..=5 if budget >= 3 => {
                let left = rng.gen_range(1..=budget - 2);
                let right = budget - 1 - left;
                Expr::app(
                    gen_expr(rng, prims, lam_depth, left),
                    gen_expr(rng, prims, lam_depth, right),
                )
            }
            6..=7 => Expr::lam(gen_expr(rng, prims, lam_depth + 1, budget - 1)),
            _ => {
                if lam_depth > 0 && rng.gen_bool(0.3) {
                    Expr::Var(rng.gen_range(0..lam_depth))
                } else {
                    Expr::prim(prims[rng.gen_range(0..prims.len())])
                }
            }
        }
    }
    let n = rng.gen_range(2..=8);
    (0..n)
        .map(|_| {
            let budget = rng.gen_range(3..=15);
            gen_expr(&mut rng, &prims, 0, budget)
        })
        .collect()
}
