use thiserror::Error;

use super::policy::{Decision, Policy};
use super::trajectory::{observation_digest, RewardRecord, Step, Trajectory};
use crate::env::{ActError, Environment};
use crate::judge::{evaluate_rinfo, evaluate_rprog, EvalType, JudgeVerdict, ProbeDocument};
use crate::site::{SdkError, StepOutcome};
use crate::tasks::Task;

pub const DEFAULT_MAX_STEPS: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EpisodeError {
    #[error("environment unavailable: {0}")]
    EnvUnavailable(String),
    #[error("precondition: {0}")]
    Precondition(String),
}

fn unavailable(e: impl std::fmt::Display) -> EpisodeError {
    EpisodeError::EnvUnavailable(e.to_string())
}

/// Reset, then alternate observe/decide/act until an answer or the budget.
pub fn run_episode(
    policy: &dyn Policy,
    task: &Task,
    env: &dyn Environment,
    max_steps: usize,
    seed: u64,
) -> Result<Trajectory, EpisodeError> {
    if !task.is_valid || task.judge.is_none() {
        return Err(EpisodeError::Precondition(format!("task `{}` is not valid", task.task_id)));
    }
    if max_steps == 0 {
        return Err(EpisodeError::Precondition("max_steps must be at least 1".into()));
    }
    env.reset().map_err(unavailable)?;
    let mut page = env.begin_episode().map_err(unavailable)?;
    let mut steps = Vec::new();
    let mut final_answer = None;
    let mut fault = None;

    for step in 0..max_steps {
        let decision = Decision {
            instruction: &task.instruction,
            snapshot: &page,
            step,
            seed,
        };
        let choice = match policy.decide(&decision) {
            Ok(c) => c,
            Err(f) => {
                fault = Some(f.0);
                break;
            }
        };
        let observation = observation_digest(&page);
        let mut error = None;
        match env.act(&choice.action) {
            Ok(StepOutcome::Page { page: next }) => page = next,
            Ok(StepOutcome::Answer { text }) => final_answer = Some(text),
            Err(ActError::InvalidElement(e)) => error = Some(e.to_string()),
            Err(ActError::Unavailable(m)) => return Err(EpisodeError::EnvUnavailable(m)),
        }
        steps.push(Step {
            observation,
            thought: choice.thought,
            action: choice.action,
            error,
        });
        if final_answer.is_some() {
            break;
        }
    }

    Ok(Trajectory {
        task_id: task.task_id.clone(),
        steps,
        truncated: final_answer.is_none(),
        final_answer,
        terminal_url: page.url,
        seed,
        fault,
    })
}

/// Evaluate a finished trajectory. Programmatic judges read the current
/// environment state through the task's probes.
pub fn score(trajectory: &Trajectory, task: &Task, env: &dyn Environment, phase: u32) -> Result<RewardRecord, EpisodeError> {
    if trajectory.task_id != task.task_id {
        return Err(EpisodeError::Precondition(format!(
            "trajectory for `{}` scored against `{}`",
            trajectory.task_id, task.task_id
        )));
    }
    let judge = task
        .judge
        .as_ref()
        .ok_or_else(|| EpisodeError::Precondition(format!("task `{}` has no judge", task.task_id)))?;
    let verdict = match judge.eval_type {
        EvalType::Rinfo => match &trajectory.final_answer {
            Some(answer) => evaluate_rinfo(judge, answer),
            None => JudgeVerdict::all_failed(judge),
        },
        EvalType::Rprog => {
            let mut probe = ProbeDocument {
                terminal_url: trajectory.terminal_url.clone(),
                ..Default::default()
            };
            for call in &task.state_probes {
                let Some(field) = &call.bind_as else { continue };
                match env.sdk(call) {
                    Ok(v) => {
                        probe.state_fields.insert(field.clone(), v);
                    }
                    Err(SdkError::Unavailable(m)) => return Err(EpisodeError::EnvUnavailable(m)),
                    Err(_) => {}
                }
            }
            evaluate_rprog(judge, &probe)
        }
    };
    Ok(RewardRecord {
        task_id: task.task_id.clone(),
        trajectory: trajectory.digest(),
        reward: verdict.reward,
        verdict,
        phase,
    })
}

/// Reset, replay the stored actions, and score again.
pub fn rescore(trajectory: &Trajectory, task: &Task, env: &dyn Environment, phase: u32) -> Result<RewardRecord, EpisodeError> {
    env.reset().map_err(unavailable)?;
    env.begin_episode().map_err(unavailable)?;
    for step in &trajectory.steps {
        if step.action.is_answer() {
            break;
        }
        match env.act(&step.action) {
            Ok(_) | Err(ActError::InvalidElement(_)) => {}
            Err(ActError::Unavailable(m)) => return Err(EpisodeError::EnvUnavailable(m)),
        }
    }
    score(trajectory, task, env, phase)
}
