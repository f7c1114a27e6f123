use serde::{Deserialize, Serialize};

use crate::canonical::sha256_hex;
use crate::judge::JudgeVerdict;
use crate::site::{BrowserAction, PageSnapshot};

/// Digest of the snapshot bytes an agent observed.
pub fn observation_digest(page: &PageSnapshot) -> String {
    sha256_hex(page.to_json().as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub observation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thought: Option<String>,
    pub action: BrowserAction,
    /// Set when the action targeted a missing or wrong-role element.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task_id: String,
    pub steps: Vec<Step>,
    pub final_answer: Option<String>,
    pub terminal_url: String,
    pub truncated: bool,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
}

impl Trajectory {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trajectory serializes")
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }

    pub fn actions(&self) -> Vec<&BrowserAction> {
        self.steps.iter().map(|s| &s.action).collect()
    }

    /// Answer only as the final step, at most once; truncation exactly
    /// when no answer was given.
    pub fn well_formed(&self) -> bool {
        let answers: Vec<usize> = self
            .steps
            .iter()
            .enumerate()
            .filter(|(_, s)| s.action.is_answer())
            .map(|(i, _)| i)
            .collect();
        let answer_ok = match answers.as_slice() {
            [] => self.final_answer.is_none(),
            [i] => *i + 1 == self.steps.len() && self.final_answer.is_some(),
            _ => false,
        };
        answer_ok && self.truncated == self.final_answer.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub task_id: String,
    /// Digest of the scored trajectory.
    pub trajectory: String,
    pub reward: u8,
    pub verdict: JudgeVerdict,
    pub phase: u32,
}

impl RewardRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// One line of the rollout store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutEntry {
    pub record: RewardRecord,
    pub instruction: String,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub observation: String,
    pub thought: Option<String>,
    pub action: BrowserAction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub instruction: String,
    pub turns: Vec<Turn>,
}
