use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::episode::{run_episode, score, DEFAULT_MAX_STEPS};
use super::policy::Policy;
use super::trajectory::RolloutEntry;
use crate::env::Environment;
use crate::rng::derive_seed;
use crate::tasks::Task;

pub const DEFAULT_ROLLOUTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectConfig {
    pub rollouts_per_task: usize,
    pub base_seed: u64,
    pub max_steps: usize,
    pub phase: u32,
}

impl Default for CollectConfig {
    fn default() -> Self {
        Self {
            rollouts_per_task: DEFAULT_ROLLOUTS,
            base_seed: 0,
            max_steps: DEFAULT_MAX_STEPS,
            phase: 0,
        }
    }
}

/// Seed of the `k`-th rollout of the task at `task_index`.
pub fn episode_seed(base_seed: u64, task_index: usize, k: usize) -> u64 {
    derive_seed(base_seed, &[task_index as u64, k as u64])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeFailure {
    pub task_id: String,
    pub rollout: Option<usize>,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectReport {
    pub entries: Vec<RolloutEntry>,
    pub failures: Vec<EpisodeFailure>,
}

impl CollectReport {
    pub fn successes(&self) -> usize {
        self.entries.iter().filter(|e| e.record.reward == 1).count()
    }

    pub fn success_rate(&self) -> f64 {
        if self.entries.is_empty() {
            0.0
        } else {
            self.successes() as f64 / self.entries.len() as f64
        }
    }
}

/// Append-only JSONL file of rollout entries.
#[derive(Debug, Clone)]
pub struct RolloutStore {
    path: PathBuf,
}

impl RolloutStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, entry: &RolloutEntry) -> std::io::Result<()> {
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut f = File::options().create(true).append(true).open(&self.path)?;
        let mut line = serde_json::to_string(entry).expect("entry serializes");
        line.push('\n');
        f.write_all(line.as_bytes())
    }

    pub fn load(&self) -> Result<Vec<RolloutEntry>, String> {
        load_entries(&self.path)
    }
}

pub fn load_entries(path: &Path) -> Result<Vec<RolloutEntry>, String> {
    let f = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| format!("{}: {e}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| format!("{} line {}: {e}", path.display(), i + 1))?);
    }
    Ok(out)
}

/// K episodes per task, each scored immediately. Failures are recorded and
/// never stop the batch.
pub fn collect(
    tasks: &[Task],
    policy: &dyn Policy,
    env: &dyn Environment,
    cfg: &CollectConfig,
    store: Option<&RolloutStore>,
) -> CollectReport {
    let mut report = CollectReport::default();
    for (ti, task) in tasks.iter().enumerate() {
        if !task.is_valid {
            report.failures.push(EpisodeFailure {
                task_id: task.task_id.clone(),
                rollout: None,
                error: "task is not valid".into(),
            });
            continue;
        }
        for k in 0..cfg.rollouts_per_task {
            let seed = episode_seed(cfg.base_seed, ti, k);
            let result = run_episode(policy, task, env, cfg.max_steps, seed)
                .and_then(|t| score(&t, task, env, cfg.phase).map(|r| (t, r)));
            match result {
                Ok((trajectory, record)) => {
                    let entry = RolloutEntry {
                        record,
                        instruction: task.instruction.clone(),
                        trajectory,
                    };
                    if let Some(store) = store {
                        if let Err(e) = store.append(&entry) {
                            report.failures.push(EpisodeFailure {
                                task_id: task.task_id.clone(),
                                rollout: Some(k),
                                error: format!("persist: {e}"),
                            });
                        }
                    }
                    report.entries.push(entry);
                }
                Err(e) => {
                    tracing::warn!(task = %task.task_id, k, error = %e, "episode failed");
                    report.failures.push(EpisodeFailure {
                        task_id: task.task_id.clone(),
                        rollout: Some(k),
                        error: e.to_string(),
                    });
                }
            }
        }
    }
    report
}
