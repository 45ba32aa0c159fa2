//! LLM-guided task solving. Prompts are built from the current library plus
//! solved exemplars; completions pass a parse, type-check, and full-example
//! execution gate before entering a frontier.

use std::time::Instant;

use liblearn_core::eval::{self, evaluate};
use liblearn_core::expr;
use liblearn_core::task::{Frontier, FrontierEntry, SolutionSource, Task};
use liblearn_core::Library;
use serde::{Deserialize, Serialize};
use tracing::debug;

use crate::backend::{CompletionBackend, CompletionRequest, HttpConfig, PayloadStyle};
use crate::prompt::{build_prompt, estimate_tokens, PromptSpec};
use crate::select::{fnv1a, select_examples, SelectionStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Scripted,
    Http,
}

/// Sampling and transport settings for LLM-guided synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmBackendConfig {
    pub kind: BackendKind,
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub payload_style: PayloadStyle,
    pub temperature: f64,
    pub top_p: f64,
    pub prompts_per_task: usize,
    pub completions_per_prompt: usize,
    /// Completion-token cap = multiplier × estimated tokens of the prompt's
    /// final exemplar program.
    pub max_tokens_multiplier: f64,
    /// Cap used while no exemplar fits in the prompt.
    pub max_tokens_floor: usize,
    pub token_budget: usize,
    pub stop: String,
    pub timeout_secs: f64,
    pub max_retries: usize,
    pub initial_backoff_ms: u64,
    /// Skip a task's remaining prompts once one verified solution exists.
    pub stop_on_solve: bool,
    pub step_budget: u64,
}

impl Default for LlmBackendConfig {
    fn default() -> Self {
        let http = HttpConfig::default();
        LlmBackendConfig {
            kind: BackendKind::Scripted,
            endpoint: http.endpoint,
            model: http.model,
            api_key_env: http.api_key_env,
            payload_style: http.payload_style,
            temperature: 0.90,
            top_p: 1.0,
            prompts_per_task: 4,
            completions_per_prompt: 4,
            max_tokens_multiplier: 4.0,
            max_tokens_floor: 64,
            token_budget: 4096,
            stop: "\n\n".into(),
            timeout_secs: http.timeout_secs,
            max_retries: http.max_retries,
            initial_backoff_ms: http.initial_backoff_ms,
            stop_on_solve: true,
            step_budget: eval::DEFAULT_STEP_BUDGET,
        }
    }
}

impl LlmBackendConfig {
    pub fn http_config(&self) -> HttpConfig {
        HttpConfig {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            api_key_env: self.api_key_env.clone(),
            timeout_secs: self.timeout_secs,
            max_retries: self.max_retries,
            initial_backoff_ms: self.initial_backoff_ms,
            payload_style: self.payload_style,
        }
    }
}

/// Token and outcome accounting for one backend request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryUsage {
    pub task_id: String,
    pub prompt_tokens: usize,
    pub completion_tokens: usize,
    pub wall_secs: f64,
    pub ok: bool,
}

/// Append-only usage record; aggregates are always sums over `queries`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UsageLedger {
    pub queries: Vec<QueryUsage>,
    pub parse_failures: usize,
    pub type_failures: usize,
    pub exec_failures: usize,
    pub backend_failures: usize,
}

impl UsageLedger {
    pub fn record(&mut self, query: QueryUsage) {
        self.queries.push(query);
    }

    pub fn total_prompt_tokens(&self) -> usize {
        self.queries.iter().map(|q| q.prompt_tokens).sum()
    }

    pub fn total_completion_tokens(&self) -> usize {
        self.queries.iter().map(|q| q.completion_tokens).sum()
    }

    pub fn total_wall_secs(&self) -> f64 {
        self.queries.iter().map(|q| q.wall_secs).sum()
    }

    pub fn merge(&mut self, other: UsageLedger) {
        self.queries.extend(other.queries);
        self.parse_failures += other.parse_failures;
        self.type_failures += other.type_failures;
        self.exec_failures += other.exec_failures;
        self.backend_failures += other.backend_failures;
    }
}

/// Verified completions for one task; empty means the task stays unsolved.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSolutions {
    pub task_id: String,
    pub frontier: Frontier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub per_task: Vec<TaskSolutions>,
    pub ledger: UsageLedger,
}

fn verify_completion(
    lib: &Library,
    task: &Task,
    text: &str,
    step_budget: u64,
    stop: &str,
    ledger: &mut UsageLedger,
    frontier: &mut Frontier,
) {
    let cleaned = text.split(stop).next().unwrap_or(text).trim();
    if cleaned.is_empty() {
        ledger.parse_failures += 1;
        return;
    }
    let program = match expr::parse(cleaned, lib) {
        Ok(p) => p,
        Err(err) => {
            debug!(task = %task.id, %err, "completion failed to parse");
            ledger.parse_failures += 1;
            return;
        }
    };
    let log_prior = match lib.score_program(&program, &task.request_ty) {
        Ok(lp) => lp,
        Err(err) => {
            debug!(task = %task.id, %err, "completion failed type check");
            ledger.type_failures += 1;
            return;
        }
    };
    let solves = task.examples.iter().all(|ex| {
        matches!(evaluate(lib, &program, &ex.inputs, step_budget), Ok(v) if v == ex.output)
    });
    if !solves {
        ledger.exec_failures += 1;
        return;
    }
    frontier.insert(FrontierEntry {
        program,
        log_prior,
        source: SolutionSource::Llm,
    });
}

/// Runs up to `prompts_per_task` × `completions_per_prompt` samples per task.
/// Tasks are processed in order and one at a time, so scripted runs are
/// deterministic. Backend errors are recorded and never fatal.
pub fn solve_with_llm(
    backend: &mut dyn CompletionBackend,
    lib: &Library,
    header: &str,
    tasks: &[&Task],
    solved_pool: &[(String, String)],
    strategy: &SelectionStrategy,
    cfg: &LlmBackendConfig,
) -> SolveOutcome {
    let mut per_task = Vec::with_capacity(tasks.len());
    let mut ledger = UsageLedger::default();

    for task in tasks {
        let mut frontier = Frontier::new(task.id.clone());
        for prompt_idx in 0..cfg.prompts_per_task {
            if cfg.stop_on_solve && frontier.is_solved() {
                break;
            }
            let scaffold =
                match build_prompt(&PromptSpec::new(header, lib, &task.description, cfg.token_budget)) {
                    Ok(built) => built,
                    Err(err) => {
                        debug!(task = %task.id, %err, "prompt scaffold exceeds token budget");
                        break;
                    }
                };
            let exemplar_budget = cfg.token_budget - scaffold.prompt_tokens;
            let salt = fnv1a(&task.id) ^ (prompt_idx as u64);
            let exemplars = select_examples(
                solved_pool,
                &task.description,
                strategy,
                exemplar_budget,
                salt,
                estimate_tokens,
            );
            let built = build_prompt(
                &PromptSpec::new(header, lib, &task.description, cfg.token_budget)
                    .with_exemplars(exemplars.clone()),
            )
            .expect("scaffold already fits the budget");

            let max_tokens = if built.exemplars_used > 0 {
                let last_program = &exemplars[built.exemplars_used - 1].1;
                let cap = cfg.max_tokens_multiplier * estimate_tokens(last_program) as f64;
                (cap.ceil() as usize).max(1)
            } else {
                cfg.max_tokens_floor
            };

            let request = CompletionRequest {
                prompt: built.text,
                temperature: cfg.temperature,
                top_p: cfg.top_p,
                n: cfg.completions_per_prompt,
                max_tokens,
                stop: Some(cfg.stop.clone()),
            };
            let start = Instant::now();
            match backend.complete(&request) {
                Err(err) => {
                    debug!(task = %task.id, %err, "backend request failed");
                    ledger.backend_failures += 1;
                    ledger.record(QueryUsage {
                        task_id: task.id.clone(),
                        prompt_tokens: built.prompt_tokens,
                        completion_tokens: 0,
                        wall_secs: start.elapsed().as_secs_f64(),
                        ok: false,
                    });
                }
                Ok(resp) => {
                    ledger.record(QueryUsage {
                        task_id: task.id.clone(),
                        prompt_tokens: resp.prompt_tokens,
                        completion_tokens: resp.completion_tokens,
                        wall_secs: start.elapsed().as_secs_f64(),
                        ok: true,
                    });
                    for text in &resp.texts {
                        verify_completion(
                            lib,
                            task,
                            text,
                            cfg.step_budget,
                            &cfg.stop,
                            &mut ledger,
                            &mut frontier,
                        );
                    }
                }
            }
        }
        per_task.push(TaskSolutions {
            task_id: task.id.clone(),
            frontier,
        });
    }

    SolveOutcome { per_task, ledger }
}
