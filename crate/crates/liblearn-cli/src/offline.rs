//! Offline synthesis evaluation: enumerative solve rate as a function of
//! search budget under a frozen library, with no language guidance.

use liblearn_core::enumerate::solve_tasks;
use liblearn_core::library::Library;
use liblearn_core::task::{SearchBudget, Task};
use serde::{Deserialize, Serialize};

/// Candidate-count ladder standing in for a 1s/10s/100s wall-clock ladder;
/// counts keep the curve deterministic across machines.
pub const DEFAULT_BUDGETS: &[u64] = &[0, 1_000, 10_000, 100_000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflinePoint {
    pub max_candidates: u64,
    pub solved: usize,
    pub total: usize,
    pub solve_pct: f64,
    pub solved_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineReport {
    pub domain: String,
    pub split: String,
    pub library: String,
    pub points: Vec<OfflinePoint>,
}

/// One enumeration pass per budget rung. Enumeration order is fixed, so a
/// larger budget always solves a superset of a smaller one.
pub fn solve_curve(
    lib: &Library,
    tasks: &[Task],
    budgets: &[u64],
    timeout_secs: f64,
    step_budget: u64,
    workers: usize,
) -> Vec<OfflinePoint> {
    budgets
        .iter()
        .map(|&max_candidates| {
            let budget = SearchBudget {
                timeout_secs,
                max_candidates,
                step_budget,
            };
            let outcomes = solve_tasks(lib, tasks, budget, workers, true);
            let solved_ids: Vec<String> = tasks
                .iter()
                .zip(&outcomes)
                .filter(|(_, out)| out.frontier.is_solved())
                .map(|(task, _)| task.id.clone())
                .collect();
            OfflinePoint {
                max_candidates,
                solved: solved_ids.len(),
                total: tasks.len(),
                solve_pct: 100.0 * solved_ids.len() as f64 / tasks.len().max(1) as f64,
                solved_ids,
            }
        })
        .collect()
}

pub fn to_csv(report: &OfflineReport) -> String {
    let mut out = String::from("max_candidates,solved,total,solve_pct\n");
    for p in &report.points {
        out.push_str(&format!(
            "{},{},{},{:.4}\n",
            p.max_candidates, p.solved, p.total, p.solve_pct
        ));
    }
    out
}
