//! Best-first program enumeration ordered by exact PCFG log-prior, plus
//! task-parallel search over example-verified tasks.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashSet};
use std::time::Instant;

use ordered_float::NotNan;
use rayon::prelude::*;

use crate::expr::{self, Expr};
use crate::eval::evaluate;
use crate::library::{CandLabel, Library};
use crate::task::{Frontier, FrontierEntry, SearchBudget, SolutionSource, Task};
use crate::ty::{Ty, TyCtx};

#[derive(Debug, Clone)]
struct Hole {
    ty: Ty,
    env: Vec<Ty>,
}

#[derive(Debug, Clone)]
struct Partial {
    expr: Expr,
    /// Unexpanded holes keyed by id; `MetaVar(id)` marks their positions.
    holes: BTreeMap<usize, Hole>,
    ctx: TyCtx,
    next_hole: usize,
    ll: f64,
}

struct HeapItem {
    ll: NotNan<f64>,
    /// Canonical partial print; smaller strings pop first among equal priors.
    tiebreak: String,
    partial: Partial,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.ll == other.ll && self.tiebreak == other.tiebreak
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.ll
            .cmp(&other.ll)
            .then_with(|| other.tiebreak.cmp(&self.tiebreak))
    }
}

/// Streams complete programs of the request type in non-increasing log-prior
/// order. Ties break by canonical print. Each program appears exactly once;
/// a seen-set guards the contract.
pub struct Enumerator<'l> {
    lib: &'l Library,
    heap: BinaryHeap<HeapItem>,
    seen: HashSet<String>,
    started: Instant,
    budget: SearchBudget,
    yielded: u64,
}

impl<'l> Enumerator<'l> {
    pub fn new(lib: &'l Library, request: &Ty, budget: SearchBudget) -> Self {
        let mut ctx = TyCtx::new();
        let req = ctx.instantiate(&request.canonicalize());
        let mut holes = BTreeMap::new();
        holes.insert(0, Hole { ty: req, env: Vec::new() });
        let root = Partial {
            expr: Expr::MetaVar(0),
            holes,
            ctx,
            next_hole: 1,
            ll: 0.0,
        };
        let mut heap = BinaryHeap::new();
        heap.push(HeapItem {
            ll: NotNan::new(0.0).unwrap(),
            tiebreak: expr::print_pattern(&root.expr),
            partial: root,
        });
        Enumerator {
            lib,
            heap,
            seen: HashSet::new(),
            started: Instant::now(),
            budget,
            yielded: 0,
        }
    }

    pub fn elapsed_secs(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    fn out_of_budget(&self) -> bool {
        self.yielded >= self.budget.max_candidates
            || self.elapsed_secs() > self.budget.timeout_secs
    }

    fn expand(&mut self, mut partial: Partial) {
        let (&hole_id, _) = partial.holes.iter().next().expect("expand needs a hole");
        let mut hole = partial.holes.remove(&hole_id).unwrap();

        // Arrow-typed holes are eta-long: force one lambda per argument.
        let mut resolved = partial.ctx.resolve(&hole.ty);
        let mut lam_wraps = 0;
        while let Ty::Arrow(a, b) = resolved {
            hole.env.push(a.as_ref().clone());
            resolved = *b;
            lam_wraps += 1;
        }
        if lam_wraps > 0 {
            let mut wrapped = Expr::MetaVar(hole_id);
            for _ in 0..lam_wraps {
                wrapped = Expr::lam(wrapped);
            }
            partial.expr = partial.expr.fill_metavar(hole_id, &wrapped);
        }

        let cands = self.lib.candidates(&partial.ctx, &resolved, &hole.env);
        let z: f64 = cands.iter().map(|c| c.weight).sum();
        for cand in cands {
            let head = match &cand.label {
                CandLabel::Named { display, .. } => Expr::prim(display.clone()),
                CandLabel::Var(i) => Expr::Var(*i),
            };
            let mut child = Partial {
                expr: partial.expr.clone(),
                holes: partial.holes.clone(),
                ctx: cand.ctx,
                next_hole: partial.next_hole,
                ll: partial.ll + (cand.weight / z).ln(),
            };
            let mut replacement = head;
            for aty in &cand.arg_tys {
                let id = child.next_hole;
                child.next_hole += 1;
                child.holes.insert(
                    id,
                    Hole {
                        ty: aty.clone(),
                        env: hole.env.clone(),
                    },
                );
                replacement = Expr::app(replacement, Expr::MetaVar(id));
            }
            child.expr = child.expr.fill_metavar(hole_id, &replacement);
            if child.ll.is_finite() {
                self.heap.push(HeapItem {
                    ll: NotNan::new(child.ll).unwrap(),
                    tiebreak: expr::print_pattern(&child.expr),
                    partial: child,
                });
            }
        }
    }
}

impl Iterator for Enumerator<'_> {
    type Item = (Expr, f64);

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.out_of_budget() {
                return None;
            }
            let item = self.heap.pop()?;
            if item.partial.holes.is_empty() {
                let rendered = expr::print_pattern(&item.partial.expr);
                // Derivations are unique, so this should never fire; it
                // enforces the no-duplicates contract regardless.
                if !self.seen.insert(rendered) {
                    continue;
                }
                self.yielded += 1;
                return Some((item.partial.expr, item.partial.ll));
            }
            self.expand(item.partial);
        }
    }
}

/// Convenience constructor matching the module contract.
pub fn enumerate<'l>(lib: &'l Library, request: &Ty, budget: SearchBudget) -> Enumerator<'l> {
    Enumerator::new(lib, request, budget)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstSolution {
    pub candidates: u64,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub frontier: Frontier,
    pub candidates_enumerated: u64,
    pub first_solution: Option<FirstSolution>,
}

/// Cap on verified solutions kept per task; enumeration order already yields
/// them best-first, so the first `FRONTIER_CAP` are the top ones.
pub const FRONTIER_CAP: usize = 5;

pub fn solve_task(
    lib: &Library,
    task: &Task,
    budget: SearchBudget,
    stop_on_first: bool,
) -> SearchOutcome {
    let mut frontier = Frontier::new(task.id.clone());
    let mut enumerator = Enumerator::new(lib, &task.request_ty, budget);
    let mut candidates = 0u64;
    let mut first = None;
    while let Some((program, log_prior)) = enumerator.next() {
        candidates += 1;
        let solves = task.examples.iter().all(|ex| {
            matches!(
                evaluate(lib, &program, &ex.inputs, budget.step_budget),
                Ok(v) if v == ex.output
            )
        });
        if !solves {
            continue;
        }
        if first.is_none() {
            first = Some(FirstSolution {
                candidates,
                elapsed_secs: enumerator.elapsed_secs(),
            });
        }
        frontier.insert(FrontierEntry {
            program,
            log_prior,
            source: SolutionSource::Enumeration,
        });
        if stop_on_first || frontier.entries.len() >= FRONTIER_CAP {
            break;
        }
    }
    SearchOutcome {
        frontier,
        candidates_enumerated: candidates,
        first_solution: first,
    }
}

/// Searches each task independently, in parallel across up to `workers`
/// threads. Results come back in task order.
pub fn solve_tasks(
    lib: &Library,
    tasks: &[Task],
    budget: SearchBudget,
    workers: usize,
    stop_on_first: bool,
) -> Vec<SearchOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| {
        tasks
            .par_iter()
            .map(|task| solve_task(lib, task, budget, stop_on_first))
            .collect()
    })
}
