//! The online learning loop: per iteration, LLM solve, enumerative search,
//! compression from the base DSL, frontier rewriting, and documentation, in
//! that order, with a checkpoint after every iteration.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use liblearn_core::compress::{self, compress, Pattern};
use liblearn_core::domains::{load_domain, DomainError, DomainSpec};
use liblearn_core::enumerate::solve_tasks;
use liblearn_core::eval::evaluate;
use liblearn_core::expr::{self, Expr};
use liblearn_core::library::Library;
use liblearn_core::task::{Frontier, Task};
use liblearn_llm::autodoc::document_library;
use liblearn_llm::backend::{
    BackendError, CompletionBackend, CompletionRequest, CompletionResponse, HttpBackend,
    ScriptedBackend,
};
use liblearn_llm::select::{Embeddings, SelectionStrategy};
use liblearn_llm::solve::{solve_with_llm, UsageLedger};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{error, warn};

use crate::checkpoint::{
    AbstractionRow, Checkpoint, CheckpointError, MetricsRow, RunDir, StageTimings, UsageTotals,
};
use crate::config::{BackendMode, ConfigError, RunConfig};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("backend: {0}")]
    Backend(#[from] BackendError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Completion backend plus a call counter, which is all the backend state a
/// checkpoint needs: scripted backends derive any randomness per call.
pub enum AnyBackend {
    Scripted(ScriptedBackend),
    Http { backend: HttpBackend, calls: usize },
}

impl AnyBackend {
    pub fn calls(&self) -> usize {
        match self {
            AnyBackend::Scripted(b) => b.calls,
            AnyBackend::Http { calls, .. } => *calls,
        }
    }

    pub fn set_calls(&mut self, n: usize) {
        match self {
            AnyBackend::Scripted(b) => b.calls = n,
            AnyBackend::Http { calls, .. } => *calls = n,
        }
    }
}

impl CompletionBackend for AnyBackend {
    fn complete(&mut self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        match self {
            AnyBackend::Scripted(b) => b.complete(req),
            AnyBackend::Http { backend, calls } => {
                *calls += 1;
                backend.complete(req)
            }
        }
    }
}

fn read_script(path: &Path) -> Result<Vec<(String, Vec<String>)>, RunError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let map: std::collections::BTreeMap<String, Vec<String>> = serde_json::from_str(&text)
        .map_err(|e| RunError::Invariant(format!("{}: bad script file: {e}", path.display())))?;
    Ok(map.into_iter().collect())
}

pub fn build_backend(cfg: &RunConfig, domain: &DomainSpec) -> Result<AnyBackend, RunError> {
    let spec = &cfg.backend;
    let backend = match spec.mode {
        BackendMode::Oracle => {
            // One entry per distinct description, answering with the bundled
            // ground truth. Script entries go last so that on an exact-length
            // tie the script overrides the oracle.
            let mut entries: Vec<(String, Vec<String>)> = Vec::new();
            let mut seen = BTreeSet::new();
            for task in domain.train.iter().chain(&domain.test) {
                if !seen.insert(task.description.clone()) {
                    continue;
                }
                let gt = domain
                    .ground_truth
                    .get(&task.id)
                    .expect("domain validation guarantees ground truth");
                let text = expr::print(gt).expect("ground truth programs print");
                entries.push((task.description.clone(), vec![text]));
            }
            if let Some(path) = &spec.script {
                entries.extend(read_script(path)?);
            }
            AnyBackend::Scripted(ScriptedBackend::from_script(entries))
        }
        BackendMode::Script => {
            let path = spec.script.as_ref().ok_or_else(|| {
                RunError::Config(ConfigError::Invalid(
                    "backend.mode = script requires backend.script".into(),
                ))
            })?;
            AnyBackend::Scripted(ScriptedBackend::from_script(read_script(path)?))
        }
        BackendMode::Constant => {
            AnyBackend::Scripted(ScriptedBackend::constant(spec.constant.clone()))
        }
        BackendMode::Garbage => {
            AnyBackend::Scripted(ScriptedBackend::garbage(spec.garbage_seed))
        }
        BackendMode::Http => AnyBackend::Http {
            backend: HttpBackend::new(cfg.llm.http_config())?,
            calls: 0,
        },
    };
    Ok(backend)
}

/// Identification block written once per run directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub domain: String,
    pub condition: String,
    pub flags: crate::config::ConditionFlags,
    pub seed: u64,
    pub iterations: usize,
    pub batch_size: usize,
    pub backend: BackendMode,
}

impl RunMeta {
    fn from_config(cfg: &RunConfig) -> RunMeta {
        RunMeta {
            domain: cfg.domain.clone(),
            condition: cfg.condition.name().to_owned(),
            flags: cfg.condition,
            seed: cfg.seed,
            iterations: cfg.iterations,
            batch_size: cfg.batch_size,
            backend: cfg.backend.mode,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub root: PathBuf,
    pub iterations_run: usize,
    pub final_metrics: Option<MetricsRow>,
}

struct LoopState {
    lib: Library,
    /// Parallel to the domain's train corpus.
    frontiers: Vec<Frontier>,
    cursor: u64,
    usage: UsageTotals,
}

impl LoopState {
    fn solved_ids(&self) -> BTreeSet<String> {
        self.frontiers
            .iter()
            .filter(|f| f.is_solved())
            .map(|f| f.task_id.clone())
            .collect()
    }
}

fn rotate_take(list: &[usize], cursor: u64, take: usize, picked: &mut Vec<usize>) {
    if list.is_empty() || take == 0 {
        return;
    }
    let start = (cursor % list.len() as u64) as usize;
    for k in 0..list.len().min(take) {
        picked.push(list[(start + k) % list.len()]);
    }
}

/// Unsolved tasks first, rotating through them across iterations; solved
/// tasks fill any remaining batch capacity so their frontiers keep improving.
fn select_batch(frontiers: &[Frontier], batch_size: usize, cursor: u64) -> Vec<usize> {
    let unsolved: Vec<usize> = (0..frontiers.len())
        .filter(|&i| !frontiers[i].is_solved())
        .collect();
    let solved: Vec<usize> = (0..frontiers.len())
        .filter(|&i| frontiers[i].is_solved())
        .collect();
    let mut picked = Vec::with_capacity(batch_size.min(frontiers.len()));
    rotate_take(&unsolved, cursor, batch_size, &mut picked);
    rotate_take(&solved, cursor, batch_size - picked.len(), &mut picked);
    picked.sort_unstable();
    picked
}

fn exemplar_strategy(cfg: &RunConfig) -> Result<SelectionStrategy, RunError> {
    match &cfg.embeddings {
        None => Ok(SelectionStrategy::Random { seed: cfg.seed }),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(io_err(path))?;
            let embeddings = Embeddings::from_jsonl(&text)
                .map_err(|e| RunError::Invariant(format!("{}: {e}", path.display())))?;
            Ok(SelectionStrategy::Cosine { embeddings })
        }
    }
}

/// Solved tasks as (description, canonical program) exemplars, train order.
fn exemplar_pool(state: &LoopState, domain: &DomainSpec) -> Vec<(String, String)> {
    state
        .frontiers
        .iter()
        .enumerate()
        .filter_map(|(i, f)| {
            f.best().map(|best| {
                (
                    domain.train[i].description.clone(),
                    expr::print(&best.program).expect("frontier programs print"),
                )
            })
        })
        .collect()
}

/// `compress` names extracted bodies fn_0, fn_1, ... locally; registering on
/// a library whose anon counter is at `next` will assign fn_{next}, ...
/// instead. Shifts every local reference accordingly, highest index first so
/// a shifted name can never collide with one still pending.
fn shift_anon_names(bodies: &[Expr], next: usize) -> Vec<Expr> {
    let mut shifted = bodies.to_vec();
    if next == 0 {
        return shifted;
    }
    for i in (0..bodies.len()).rev() {
        let old = format!("fn_{i}");
        let new = format!("fn_{}", next + i);
        for body in shifted.iter_mut() {
            *body = body.rename_prim(&old, &new);
        }
    }
    shifted
}

struct CompressStats {
    corpus_before: usize,
    corpus_after: usize,
    ratio: f64,
    new_names: Vec<String>,
    rows: Vec<AbstractionRow>,
}

/// Deep refactoring: drop the learned library, re-derive it from the best
/// solution per solved task expressed in base primitives.
fn compress_stage(
    state: &mut LoopState,
    cfg: &RunConfig,
    iteration: usize,
) -> Result<CompressStats, RunError> {
    let corpus: Vec<Expr> = state
        .frontiers
        .iter()
        .filter_map(|f| f.best())
        .map(|best| state.lib.inline(&best.program))
        .collect();
    let outcome = compress(&corpus, &cfg.compression);

    let mut new_lib = state.lib.strip_learned();
    let bodies = shift_anon_names(&outcome.bodies, new_lib.next_anon_id);
    let new_names = new_lib
        .register_abstractions(&bodies)
        .map_err(|e| RunError::Invariant(format!("extracted abstraction rejected: {e}")))?;

    let rows = outcome
        .accepted
        .iter()
        .zip(&new_names)
        .zip(&bodies)
        .map(|((cand, name), body)| AbstractionRow {
            iteration,
            name: name.clone(),
            pattern: Pattern::from_abstraction_body(body)
                .map(|p| p.print())
                .unwrap_or_else(|| cand.pattern.print()),
            body: expr::print(body).expect("abstraction bodies print"),
            body_size: body.size(),
            sites: cand.sites,
            utility: cand.utility,
            corpus_before: cand.corpus_before,
            corpus_after: cand.corpus_after,
        })
        .collect();

    state.lib = new_lib;
    Ok(CompressStats {
        corpus_before: corpus.iter().map(Expr::size).sum(),
        corpus_after: outcome.rewritten.iter().map(Expr::size).sum(),
        ratio: outcome.ratio,
        new_names,
        rows,
    })
}

/// Re-expresses every frontier entry under the freshly derived library and
/// drops (loudly) any entry that no longer reproduces its task's outputs.
/// Returns (entries kept, entries dropped).
fn rewrite_stage(
    state: &mut LoopState,
    prev_lib: &Library,
    domain: &DomainSpec,
    cfg: &RunConfig,
) -> (usize, usize) {
    let inlined: Vec<Expr> = state
        .frontiers
        .iter()
        .flat_map(|f| f.entries.iter().map(|e| prev_lib.inline(&e.program)))
        .collect();
    let rewritten = compress::rewrite(&state.lib, &inlined);
    let mut programs = rewritten.into_iter();

    let mut kept = 0;
    let mut dropped = 0;
    for (i, frontier) in state.frontiers.iter_mut().enumerate() {
        let task = &domain.train[i];
        let mut replacement = Frontier::new(frontier.task_id.clone());
        for mut entry in frontier.entries.drain(..) {
            entry.program = programs.next().expect("one rewrite per entry");
            let solves = task.examples.iter().all(|ex| {
                matches!(
                    evaluate(&state.lib, &entry.program, &ex.inputs, cfg.search.step_budget),
                    Ok(v) if v == ex.output
                )
            });
            if !solves {
                error!(
                    task = %task.id,
                    program = %expr::print_pattern(&entry.program),
                    "rewritten program no longer solves its task; dropping"
                );
                dropped += 1;
                continue;
            }
            if replacement.insert(entry) {
                kept += 1;
            }
        }
        replacement.truncate(cfg.frontier_cap);
        *frontier = replacement;
    }
    (kept, dropped)
}

/// Refits production weights on every retained solution and rescores the
/// frontiers under them.
fn refit_weights(state: &mut LoopState, domain: &DomainSpec, alpha: f64) {
    let programs: Vec<Expr> = state
        .frontiers
        .iter()
        .flat_map(|f| f.entries.iter().map(|e| e.program.clone()))
        .collect();
    state.lib.fit_weights(programs.iter(), alpha);
    for (i, frontier) in state.frontiers.iter_mut().enumerate() {
        frontier.rescore(&state.lib, &domain.train[i].request_ty);
    }
}

fn merge_solutions(
    frontier: &mut Frontier,
    incoming: Frontier,
    cap: usize,
) -> usize {
    let mut added = 0;
    for entry in incoming.entries {
        if frontier.insert(entry) {
            added += 1;
        }
    }
    frontier.truncate(cap);
    added
}

fn usage_rows(
    run: &RunDir,
    iteration: usize,
    stage: &str,
    ledger: &UsageLedger,
) -> Result<(), RunError> {
    #[derive(Serialize)]
    struct UsageRow<'a> {
        iteration: usize,
        stage: &'a str,
        task_id: &'a str,
        prompt_tokens: usize,
        completion_tokens: usize,
        wall_secs: f64,
        ok: bool,
    }
    for q in &ledger.queries {
        run.append_json(
            "llm_usage.jsonl",
            &UsageRow {
                iteration,
                stage,
                task_id: &q.task_id,
                prompt_tokens: q.prompt_tokens,
                completion_tokens: q.completion_tokens,
                wall_secs: q.wall_secs,
                ok: q.ok,
            },
        )?;
    }
    Ok(())
}

/// One full pass of the loop; returns the iteration's metrics row.
#[allow(clippy::too_many_arguments)]
fn run_iteration(
    cfg: &RunConfig,
    domain: &DomainSpec,
    run: &RunDir,
    backend: &mut AnyBackend,
    state: &mut LoopState,
    strategy: &SelectionStrategy,
    iteration: usize,
) -> Result<MetricsRow, RunError> {
    let iter_start = Instant::now();
    let mut timings = StageTimings {
        iteration,
        ..StageTimings::default()
    };
    let mut iter_ledger = UsageLedger::default();
    let prev_lib = state.lib.clone();
    let solved_before = state.solved_ids();

    let batch = select_batch(&state.frontiers, cfg.batch_size, state.cursor);
    state.cursor = state.cursor.wrapping_add(cfg.batch_size as u64);

    // Stage 1: LLM solve on the batch.
    if cfg.condition.llm_solver {
        let started = Instant::now();
        let pool = exemplar_pool(state, domain);
        let tasks: Vec<&Task> = batch.iter().map(|&i| &domain.train[i]).collect();
        let outcome = solve_with_llm(
            backend,
            &state.lib,
            &domain.header,
            &tasks,
            &pool,
            strategy,
            &cfg.llm,
        );
        let mut added = 0;
        for (slot, sol) in outcome.per_task.into_iter().enumerate() {
            let idx = batch[slot];
            debug_assert_eq!(sol.task_id, domain.train[idx].id);
            added += merge_solutions(&mut state.frontiers[idx], sol.frontier, cfg.frontier_cap);
        }
        timings.llm_solve_secs = started.elapsed().as_secs_f64();
        run.append_line(
            "stages.log",
            &format!(
                "iter={iteration:03} stage=solve status=ran batch={} queries={} new_entries={added}",
                batch.len(),
                outcome.ledger.queries.len(),
            ),
        )?;
        usage_rows(run, iteration, "solve", &outcome.ledger)?;
        iter_ledger.merge(outcome.ledger);
    } else {
        run.append_line(
            "stages.log",
            &format!("iter={iteration:03} stage=solve status=disabled"),
        )?;
    }

    // Stage 2: enumerative search on the same batch.
    if cfg.condition.enum_search {
        let started = Instant::now();
        let tasks: Vec<Task> = batch.iter().map(|&i| domain.train[i].clone()).collect();
        let outcomes = solve_tasks(&state.lib, &tasks, cfg.search, cfg.workers, false);
        let mut added = 0;
        let mut candidates = 0u64;
        for (slot, out) in outcomes.into_iter().enumerate() {
            let idx = batch[slot];
            candidates += out.candidates_enumerated;
            added += merge_solutions(&mut state.frontiers[idx], out.frontier, cfg.frontier_cap);
        }
        timings.enum_search_secs = started.elapsed().as_secs_f64();
        run.append_line(
            "stages.log",
            &format!(
                "iter={iteration:03} stage=search status=ran batch={} candidates={candidates} new_entries={added}",
                batch.len(),
            ),
        )?;
    } else {
        run.append_line(
            "stages.log",
            &format!("iter={iteration:03} stage=search status=disabled"),
        )?;
    }

    // Stages 3 and 4: compress from the base DSL, then rewrite and re-verify
    // every frontier entry under the re-derived library.
    let (corpus_before, corpus_after, ratio, new_abstractions) = if cfg.condition.compression {
        let started = Instant::now();
        let stats = compress_stage(state, cfg, iteration)?;
        timings.compress_secs = started.elapsed().as_secs_f64();
        for row in &stats.rows {
            run.append_json("abstractions.jsonl", row)?;
        }
        run.append_line(
            "stages.log",
            &format!(
                "iter={iteration:03} stage=compress status=ran abstractions={} ratio={:.4}",
                stats.new_names.len(),
                stats.ratio,
            ),
        )?;

        let started = Instant::now();
        let (kept, dropped) = rewrite_stage(state, &prev_lib, domain, cfg);
        refit_weights(state, domain, cfg.weight_alpha);
        timings.rewrite_secs = started.elapsed().as_secs_f64();
        run.append_line(
            "stages.log",
            &format!(
                "iter={iteration:03} stage=rewrite status=ran entries={kept} dropped={dropped}"
            ),
        )?;
        (
            stats.corpus_before,
            stats.corpus_after,
            stats.ratio,
            stats.new_names.len(),
        )
    } else {
        run.append_line(
            "stages.log",
            &format!("iter={iteration:03} stage=compress status=disabled"),
        )?;
        run.append_line(
            "stages.log",
            &format!("iter={iteration:03} stage=rewrite status=disabled"),
        )?;
        refit_weights(state, domain, cfg.weight_alpha);
        let corpus: usize = state
            .frontiers
            .iter()
            .filter_map(|f| f.best())
            .map(|b| b.program.size())
            .sum();
        (corpus, corpus, 1.0, 0)
    };

    // Stage 5: document newly anonymous abstractions, reusing names for
    // bodies carried over unchanged from the previous iteration's library.
    let mut renamed = 0;
    if cfg.condition.autodoc {
        let started = Instant::now();
        let pairs: Vec<(String, Expr)> = state
            .frontiers
            .iter()
            .enumerate()
            .filter_map(|(i, f)| {
                f.best()
                    .map(|b| (domain.train[i].description.clone(), b.program.clone()))
            })
            .collect();
        let outcome = document_library(
            backend,
            &state.lib,
            &domain.header,
            &pairs,
            Some(&prev_lib),
            &cfg.autodoc,
        );
        for (old, new) in &outcome.renames {
            for frontier in &mut state.frontiers {
                for entry in &mut frontier.entries {
                    entry.program = entry.program.rename_prim(old, new);
                }
            }
        }
        renamed = outcome.renames.len();
        state.lib = outcome.library;
        timings.document_secs = started.elapsed().as_secs_f64();
        run.append_line(
            "stages.log",
            &format!(
                "iter={iteration:03} stage=document status=ran renamed={renamed} skipped={}",
                outcome.skipped.len(),
            ),
        )?;
        usage_rows(run, iteration, "document", &outcome.ledger)?;
        iter_ledger.merge(outcome.ledger);
    } else {
        run.append_line(
            "stages.log",
            &format!("iter={iteration:03} stage=document status=disabled"),
        )?;
    }

    // Test evaluation on the cadence tick; stateless with respect to the
    // training frontiers.
    let mut test_solved = None;
    if iteration % cfg.test_cadence == 0 {
        let started = Instant::now();
        let mut solved_ids: BTreeSet<&str> = BTreeSet::new();
        if cfg.condition.llm_solver {
            let pool = exemplar_pool(state, domain);
            let tasks: Vec<&Task> = domain.test.iter().collect();
            let outcome = solve_with_llm(
                backend,
                &state.lib,
                &domain.header,
                &tasks,
                &pool,
                strategy,
                &cfg.llm,
            );
            for (task, sol) in domain.test.iter().zip(&outcome.per_task) {
                if sol.frontier.is_solved() {
                    solved_ids.insert(task.id.as_str());
                }
            }
            usage_rows(run, iteration, "test_eval", &outcome.ledger)?;
            iter_ledger.merge(outcome.ledger);
        }
        if cfg.condition.enum_search {
            let outcomes = solve_tasks(&state.lib, &domain.test, cfg.search, cfg.workers, true);
            for (task, out) in domain.test.iter().zip(&outcomes) {
                if out.frontier.is_solved() {
                    solved_ids.insert(task.id.as_str());
                }
            }
        }
        timings.test_eval_secs = started.elapsed().as_secs_f64();
        test_solved = Some(solved_ids.len());
        run.append_line(
            "stages.log",
            &format!(
                "iter={iteration:03} stage=test_eval status=ran solved={} total={}",
                solved_ids.len(),
                domain.test.len(),
            ),
        )?;
    } else {
        run.append_line(
            "stages.log",
            &format!("iter={iteration:03} stage=test_eval status=skipped"),
        )?;
    }

    let solved_after = state.solved_ids();
    let regressed: Vec<&String> = solved_before.difference(&solved_after).collect();
    if !regressed.is_empty() {
        return Err(RunError::Invariant(format!(
            "solved task set shrank at iteration {iteration}: {regressed:?}"
        )));
    }

    let train_total = domain.train.len();
    let train_solved = solved_after.len();
    let metrics = MetricsRow {
        iteration,
        train_solved,
        train_total,
        train_solve_pct: 100.0 * train_solved as f64 / train_total.max(1) as f64,
        test_solved,
        test_total: test_solved.map(|_| domain.test.len()),
        test_solve_pct: test_solved
            .map(|s| 100.0 * s as f64 / domain.test.len().max(1) as f64),
        corpus_before,
        corpus_after,
        compression_ratio: ratio,
        abstractions: state.lib.abstractions.len(),
        new_abstractions,
        library_size: state.lib.learned_size(),
        renamed,
        prompt_tokens: iter_ledger.total_prompt_tokens(),
        completion_tokens: iter_ledger.total_completion_tokens(),
        parse_failures: iter_ledger.parse_failures,
        type_failures: iter_ledger.type_failures,
        exec_failures: iter_ledger.exec_failures,
        backend_failures: iter_ledger.backend_failures,
    };
    run.append_json("metrics.jsonl", &metrics)?;

    state.usage.add(&iter_ledger);
    timings.total_secs = iter_start.elapsed().as_secs_f64();
    run.append_json("timings.jsonl", &timings)?;

    let checkpoint = Checkpoint::capture(
        iteration,
        state.cursor,
        backend.calls(),
        state.usage,
        metrics.clone(),
        &state.lib,
        &state.frontiers,
    );
    run.write_checkpoint(&checkpoint)?;
    run.append_line(
        "stages.log",
        &format!("iter={iteration:03} stage=checkpoint status=ran calls={}", backend.calls()),
    )?;

    Ok(metrics)
}

fn drive(
    cfg: &RunConfig,
    domain: &DomainSpec,
    run: &RunDir,
    backend: &mut AnyBackend,
    state: &mut LoopState,
    start_iteration: usize,
) -> Result<RunSummary, RunError> {
    let strategy = exemplar_strategy(cfg)?;
    let mut last_metrics = None;
    let mut iterations_run = 0;
    for iteration in start_iteration..=cfg.iterations {
        let metrics = run_iteration(cfg, domain, run, backend, state, &strategy, iteration)?;
        last_metrics = Some(metrics);
        iterations_run += 1;
    }
    run.write_text("library_final.jsonl", &state.lib.to_file().to_jsonl())?;
    Ok(RunSummary {
        root: run.root.clone(),
        iterations_run,
        final_metrics: last_metrics,
    })
}

/// Runs the full loop with an explicit backend; the normal entry points
/// build one from the config.
pub fn run_online_with(
    cfg: &RunConfig,
    root: &Path,
    backend: &mut AnyBackend,
) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    let domain = load_domain(&cfg.domain)?;
    let run = RunDir::create(root)?;
    run.write_text("config.toml", &cfg.to_toml())?;
    run.write_text(
        "run_meta.json",
        &serde_json::to_string_pretty(&RunMeta::from_config(cfg)).expect("meta serializes"),
    )?;
    let mut state = LoopState {
        lib: domain.library.clone(),
        frontiers: domain
            .train
            .iter()
            .map(|t| Frontier::new(t.id.clone()))
            .collect(),
        cursor: cfg.seed,
        usage: UsageTotals::default(),
    };
    drive(cfg, &domain, &run, backend, &mut state, 1)
}

pub fn run_online(cfg: &RunConfig, root: &Path) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    let domain = load_domain(&cfg.domain)?;
    match build_backend(cfg, &domain) {
        Ok(mut backend) => run_online_with(cfg, root, &mut backend),
        // A dead backend degrades to the remaining stages when another
        // solver is available; documentation needs the backend too.
        Err(err) if cfg.condition.llm_solver && cfg.condition.enum_search => {
            warn!(error = %err, "backend unavailable; continuing with enumerative search only");
            let mut degraded = cfg.clone();
            degraded.condition.llm_solver = false;
            degraded.condition.autodoc = false;
            let mut backend = AnyBackend::Scripted(ScriptedBackend::constant(String::new()));
            run_online_with(&degraded, root, &mut backend)
        }
        Err(err) => Err(err),
    }
}

/// Continues a run from its latest checkpoint. With `iterations` set, the
/// stored config's iteration target is updated first.
pub fn resume_online(root: &Path, iterations: Option<usize>) -> Result<RunSummary, RunError> {
    let run = RunDir::open(root)?;
    let mut cfg = RunConfig::load(&run.config_path())?;
    if let Some(n) = iterations {
        cfg.iterations = n;
        run.write_text("config.toml", &cfg.to_toml())?;
    }
    cfg.validate()?;
    let domain = load_domain(&cfg.domain)?;
    let latest = run.latest_checkpoint()?.ok_or_else(|| {
        RunError::Invariant(format!("{}: no checkpoints to resume from", root.display()))
    })?;
    let checkpoint = run.read_checkpoint(latest)?;
    let (lib, frontiers) = checkpoint.restore(domain.library.clone())?;
    if frontiers.len() != domain.train.len()
        || frontiers
            .iter()
            .zip(&domain.train)
            .any(|(f, t)| f.task_id != t.id)
    {
        return Err(RunError::Invariant(
            "checkpoint frontiers do not match the domain's train corpus".into(),
        ));
    }
    let mut backend = build_backend(&cfg, &domain)?;
    backend.set_calls(checkpoint.backend_calls);
    let mut state = LoopState {
        lib,
        frontiers,
        cursor: checkpoint.cursor,
        usage: checkpoint.usage,
    };
    drive(&cfg, &domain, &run, &mut backend, &mut state, latest + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frontier(id: &str, solved: bool) -> Frontier {
        let mut f = Frontier::new(id);
        if solved {
            f.entries.push(liblearn_core::task::FrontierEntry {
                program: Expr::prim("0"),
                log_prior: -1.0,
                source: liblearn_core::task::SolutionSource::Enumeration,
            });
        }
        f
    }

    #[test]
    fn batch_selection_prefers_unsolved_and_rotates() {
        let frontiers = vec![
            frontier("a", true),
            frontier("b", false),
            frontier("c", false),
            frontier("d", false),
        ];
        assert_eq!(select_batch(&frontiers, 2, 0), vec![1, 2]);
        assert_eq!(select_batch(&frontiers, 2, 1), vec![2, 3]);
        assert_eq!(select_batch(&frontiers, 2, 2), vec![1, 3]);
        // Solved tasks fill leftover capacity.
        assert_eq!(select_batch(&frontiers, 4, 0), vec![0, 1, 2, 3]);
    }

    #[test]
    fn batch_selection_handles_empty_and_oversized() {
        assert!(select_batch(&[], 4, 0).is_empty());
        let frontiers = vec![frontier("a", false)];
        assert_eq!(select_batch(&frontiers, 10, 3), vec![0]);
    }

    #[test]
    fn anon_name_shift_preserves_cross_references() {
        let lib = liblearn_core::domains::load_domain("toylist").unwrap().library;
        let b0 = expr::parse("(lambda (+ $0 1))", &lib).unwrap();
        // fn_1's body calls fn_0; after shifting by 2 it must call fn_2.
        let b1 = Expr::lam(Expr::apply(
            Expr::prim("fn_0"),
            [Expr::apply(Expr::prim("+"), [Expr::Var(0), Expr::prim("1")])],
        ));
        let shifted = shift_anon_names(&[b0.clone(), b1], 2);
        assert_eq!(expr::print(&shifted[0]).unwrap(), expr::print(&b0).unwrap());
        assert!(expr::print(&shifted[1]).unwrap().contains("fn_2"));
        assert!(!expr::print(&shifted[1]).unwrap().contains("fn_0"));

        let unshifted = shift_anon_names(&[b0.clone()], 0);
        assert_eq!(expr::print(&unshifted[0]).unwrap(), expr::print(&b0).unwrap());
    }

    #[test]
    fn oracle_backend_covers_every_distinct_description() {
        let domain = load_domain("toylist").unwrap();
        let cfg = RunConfig::default();
        let backend = build_backend(&cfg, &domain).unwrap();
        let AnyBackend::Scripted(mut scripted) = backend else {
            panic!("oracle mode builds a scripted backend");
        };
        let task = &domain.train[0];
        let resp = scripted
            .complete(&CompletionRequest {
                prompt: format!("header\n-- {}", task.description),
                temperature: 0.9,
                top_p: 1.0,
                n: 1,
                max_tokens: 64,
                stop: None,
            })
            .unwrap();
        let expected = expr::print(&domain.ground_truth[&task.id]).unwrap();
        assert_eq!(resp.texts, vec![expected]);
    }
}
