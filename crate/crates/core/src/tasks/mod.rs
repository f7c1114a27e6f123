//! Tasks: instructions paired with validation plans and judge templates.

pub mod corpus;
pub mod script;
pub mod stats;
pub mod template;
pub mod validate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::judge::JudgeSpec;
use crate::site::SdkCall;

pub use corpus::{builtin_tasks, load_tasks, parse_tasks, render_tasks, judge_corpus, write_tasks, CorpusFormatError};
pub use script::ScriptStep;
pub use stats::{task_stats, TaskStats, TierStats};
pub use validate::{revalidate, validate_task, Revalidation, ValidationError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }
}

/// Tier from task features: authentication plus state change is hard;
/// multi-step, stateful or authenticated is medium; everything else is easy.
pub fn classify_difficulty(requires_auth: bool, mutates_state: bool, plan_step_count: u32) -> Difficulty {
    if requires_auth && mutates_state {
        Difficulty::Hard
    } else if plan_step_count >= 2 || mutates_state || requires_auth {
        Difficulty::Medium
    } else {
        Difficulty::Easy
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub task_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub website: Option<String>,
    pub instruction: String,
    #[serde(default)]
    pub validation_plan: Vec<SdkCall>,
    pub judge_template: JudgeSpec,
    #[serde(default)]
    pub judge: Option<JudgeSpec>,
    #[serde(default)]
    pub is_valid: bool,
    pub difficulty: Difficulty,
    #[serde(default)]
    pub requires_auth: bool,
    #[serde(default)]
    pub mutates_state: bool,
    pub plan_step_count: u32,
    /// SDK reads that fill `state.<bind_as>` for programmatic judges.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub state_probes: Vec<SdkCall>,
    /// Scripted solution used by the oracle test policy.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub solution: Vec<ScriptStep>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bindings: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    /// Ground-truth answer for fixture rows checked without a live site.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
}

impl Task {
    pub fn classified_difficulty(&self) -> Difficulty {
        classify_difficulty(self.requires_auth, self.mutates_state, self.plan_step_count)
    }

    /// Structural rules every stored task obeys.
    pub fn check(&self) -> Result<(), String> {
        if self.task_id.trim().is_empty() {
            return Err("task_id is empty".into());
        }
        if self.instruction.trim().is_empty() {
            return Err("instruction is empty".into());
        }
        if self.plan_step_count == 0 {
            return Err("plan_step_count must be at least 1".into());
        }
        if self.is_valid != self.judge.is_some() {
            return Err("judge must be present exactly when is_valid is true".into());
        }
        self.judge_template
            .validate()
            .map_err(|e| format!("judge_template.{e}"))?;
        if let Some(j) = &self.judge {
            j.validate().map_err(|e| format!("judge.{e}"))?;
            if template::judge_placeholders(j).iter().next().is_some() {
                return Err("judge has unresolved placeholders".into());
            }
        }
        let bound: std::collections::BTreeSet<&str> = self
            .validation_plan
            .iter()
            .filter_map(|c| c.bind_as.as_deref())
            .collect();
        for name in template::judge_placeholders(&self.judge_template) {
            if !bound.contains(name.as_str()) {
                return Err(format!("placeholder `{name}` has no binding in validation_plan"));
            }
        }
        for probe in &self.state_probes {
            if probe.bind_as.is_none() {
                return Err(format!("state probe `{}` needs bind_as", probe.name));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiers() {
        assert_eq!(classify_difficulty(true, true, 1), Difficulty::Hard);
        assert_eq!(classify_difficulty(false, false, 1), Difficulty::Easy);
        assert_eq!(classify_difficulty(false, true, 1), Difficulty::Medium);
        assert_eq!(classify_difficulty(true, false, 1), Difficulty::Medium);
        assert_eq!(classify_difficulty(true, false, 2), Difficulty::Medium);
    }

    #[test]
    fn total_over_features() {
        for auth in [false, true] {
            for mutates in [false, true] {
                for steps in 0..50u32 {
                    let d = classify_difficulty(auth, mutates, steps);
                    assert_eq!(d == Difficulty::Hard, auth && mutates);
                }
            }
        }
    }
}
