use serde::{Deserialize, Serialize};

use super::collect::{collect, CollectConfig, RolloutStore};
use super::dataset::{build_dataset, DatasetOptions};
use super::policy::Policy;
use super::trajectory::{RolloutEntry, TrainingRecord};
use crate::env::Environment;
use crate::rng::derive_seed;
use crate::tasks::Task;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub phase: u32,
    pub tasks: usize,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub dataset_size: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseConfig {
    pub phases: u32,
    pub rollouts_per_task: usize,
    pub base_seed: u64,
    pub max_steps: usize,
    pub dataset: DatasetOptions,
}

/// Result of the loop: one report per phase and the cumulative dataset.
#[derive(Debug, Clone, Default)]
pub struct PhaseOutcome {
    pub reports: Vec<PhaseReport>,
    pub entries: Vec<RolloutEntry>,
    pub dataset: Vec<TrainingRecord>,
}

pub fn phase_seed(base_seed: u64, phase: u32) -> u64 {
    derive_seed(base_seed, &[u64::from(phase)])
}

/// Repeated ingest/collect/build rounds. `ingest` returns the tasks added in
/// a phase; the task pool accumulates. `policy_for` may swap the policy
/// between phases.
pub fn run_phase_loop(
    cfg: &PhaseConfig,
    env: &dyn Environment,
    initial: Vec<Task>,
    mut ingest: impl FnMut(u32) -> Vec<Task>,
    mut policy_for: impl FnMut(u32, &[Task]) -> Box<dyn Policy>,
    store: Option<&RolloutStore>,
) -> Result<PhaseOutcome, String> {
    if cfg.phases == 0 {
        return Err("phases must be at least 1".into());
    }
    let mut pool = initial;
    let mut out = PhaseOutcome::default();
    for phase in 0..cfg.phases {
        pool.extend(ingest(phase));
        let policy = policy_for(phase, &pool);
        let cc = CollectConfig {
            rollouts_per_task: cfg.rollouts_per_task,
            base_seed: phase_seed(cfg.base_seed, phase),
            max_steps: cfg.max_steps,
            phase,
        };
        let report = collect(&pool, policy.as_ref(), env, &cc, store);
        out.entries.extend(report.entries.iter().cloned());
        out.dataset = build_dataset(&out.entries, cfg.dataset);
        out.reports.push(PhaseReport {
            phase,
            tasks: pool.len(),
            episodes: report.entries.len(),
            successes: report.successes(),
            success_rate: report.success_rate(),
            dataset_size: out.dataset.len(),
            failures: report.failures.len(),
        });
        tracing::info!(phase, tasks = pool.len(), rate = report.success_rate(), "phase complete");
    }
    Ok(out)
}
