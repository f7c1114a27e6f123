//! Policies: the decision function an episode consults at every step.
//!
//! Besides the interface this module ships three test doubles: a scripted
//! oracle with privileged state access, a noisy variant of it, and a
//! uniform random policy.

use std::collections::HashMap;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::env::Environment;
use crate::judge::{CheckOp, EvalType, JudgeSpec, ParseMode};
use crate::rng::{derive_seed, SplitMix64};
use crate::site::{BrowserAction, PageSnapshot, Role};
use crate::tasks::{validate_task, ScriptStep, Task, ValidationError};

pub struct Decision<'a> {
    pub instruction: &'a str,
    pub snapshot: &'a PageSnapshot,
    pub step: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Choice {
    pub thought: Option<String>,
    pub action: BrowserAction,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("policy fault: {0}")]
pub struct PolicyFault(pub String);

/// Deterministic in its four inputs; any randomness comes from `seed`.
pub trait Policy: Send + Sync {
    fn name(&self) -> String;
    fn decide(&self, d: &Decision<'_>) -> Result<Choice, PolicyFault>;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("unknown policy `{0}` (expected random, oracle or noisy_oracle(p))")]
    UnknownPolicy(String),
    #[error("noisy_oracle probability must be in [0, 1], got {0}")]
    BadProbability(String),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

/// The answer a correct agent would give for an instantiated judge.
pub fn oracle_answer(judge: &JudgeSpec) -> String {
    if judge.eval_type == EvalType::Rprog {
        return "done".into();
    }
    if judge.parse == ParseMode::Json {
        let mut root = Map::new();
        for check in &judge.checks {
            let value = check.expected.values().join(", ");
            let path = check.path.as_deref().unwrap_or("answer");
            insert_path(&mut root, path, value);
        }
        return Value::Object(root).to_string();
    }
    match judge.checks.as_slice() {
        [only] if only.op == CheckOp::ExactMatch => only.expected.values().join(""),
        checks => checks
            .iter()
            .flat_map(|c| c.expected.values())
            .collect::<Vec<_>>()
            .join(", "),
    }
}

fn insert_path(root: &mut Map<String, Value>, path: &str, value: String) {
    let mut parts = path.split('.').peekable();
    let mut cur = root;
    while let Some(seg) = parts.next() {
        if parts.peek().is_none() {
            cur.insert(seg.to_string(), Value::String(value));
            return;
        }
        let next = cur
            .entry(seg.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
        if !next.is_object() {
            *next = Value::Object(Map::new());
        }
        cur = next.as_object_mut().expect("just made an object");
    }
}

/// Rot13 on letters, +5 on digits. Changes every alphanumeric character.
pub fn corrupt(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            'a'..='z' => (((c as u8 - b'a') + 13) % 26 + b'a') as char,
            'A'..='Z' => (((c as u8 - b'A') + 13) % 26 + b'A') as char,
            '0'..='9' => (((c as u8 - b'0') + 5) % 10 + b'0') as char,
            other => other,
        })
        .collect()
}

#[derive(Debug, Clone)]
struct Solution {
    steps: Vec<ScriptStep>,
    answer: String,
}

/// Replays each task's scripted solution, then answers from the judge.
pub struct OraclePolicy {
    by_instruction: HashMap<String, Solution>,
}

impl OraclePolicy {
    /// Re-validates every task against `env` to learn the ground truth.
    pub fn new(tasks: &[Task], env: &dyn Environment) -> Result<Self, ValidationError> {
        let mut by_instruction = HashMap::new();
        for task in tasks {
            let fresh = validate_task(task, env)?;
            let Some(judge) = &fresh.judge else { continue };
            let steps = fresh
                .solution
                .iter()
                .map(|s| s.bind(&fresh.bindings))
                .collect::<Result<Vec<_>, _>>()
                .unwrap_or_default();
            by_instruction.insert(
                fresh.instruction.clone(),
                Solution {
                    steps,
                    answer: oracle_answer(judge),
                },
            );
        }
        Ok(Self { by_instruction })
    }

    fn solution(&self, instruction: &str) -> Result<&Solution, PolicyFault> {
        self.by_instruction
            .get(instruction)
            .ok_or_else(|| PolicyFault(format!("no solution known for `{instruction}`")))
    }

    pub fn answer_for(&self, instruction: &str) -> Option<&str> {
        self.by_instruction.get(instruction).map(|s| s.answer.as_str())
    }
}

impl Policy for OraclePolicy {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn decide(&self, d: &Decision<'_>) -> Result<Choice, PolicyFault> {
        let sol = self.solution(d.instruction)?;
        match sol.steps.get(d.step) {
            Some(step) => {
                let action = step
                    .resolve(d.snapshot)
                    .ok_or_else(|| PolicyFault(format!("step {} {step:?} not found on {}", d.step, d.snapshot.url)))?;
                Ok(Choice {
                    thought: Some(format!("step {} of {}: {}", d.step + 1, sol.steps.len(), describe(step))),
                    action,
                })
            }
            None => Ok(Choice {
                thought: Some("the page shows what was asked; answering".into()),
                action: BrowserAction::Answer {
                    text: sol.answer.clone(),
                },
            }),
        }
    }
}

fn describe(step: &ScriptStep) -> String {
    match step {
        ScriptStep::Navigate { url } => format!("open {url}"),
        ScriptStep::Click { label, .. } => format!("click '{label}'"),
        ScriptStep::Type { label, .. } => format!("fill '{label}'"),
        ScriptStep::Submit { label } => format!("submit '{label}'"),
    }
}

const NOISE_STREAM: u64 = 0x6e6f_6973_79;

/// Oracle that, with probability `p` per episode, answers at once with a
/// corrupted answer.
pub struct NoisyOracle {
    inner: OraclePolicy,
    p: f64,
}

impl NoisyOracle {
    pub fn new(inner: OraclePolicy, p: f64) -> Result<Self, PolicyError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(PolicyError::BadProbability(p.to_string()));
        }
        Ok(Self { inner, p })
    }

    pub fn corrupts(&self, seed: u64) -> bool {
        SplitMix64::new(derive_seed(seed, &[NOISE_STREAM])).unit_f64() < self.p
    }
}

impl Policy for NoisyOracle {
    fn name(&self) -> String {
        format!("noisy_oracle({})", self.p)
    }

    fn decide(&self, d: &Decision<'_>) -> Result<Choice, PolicyFault> {
        if self.corrupts(d.seed) {
            let sol = self.inner.solution(d.instruction)?;
            return Ok(Choice {
                thought: Some("answering from memory".into()),
                action: BrowserAction::Answer {
                    text: corrupt(&sol.answer),
                },
            });
        }
        self.inner.decide(d)
    }
}

const RANDOM_WORDS: [&str; 6] = ["alice", "alice-pass", "hello", "frank", "42", "loft"];

/// Uniform choice among every legal action on the page, answering with a
/// random element label.
#[derive(Debug, Clone, Default)]
pub struct RandomPolicy;

impl RandomPolicy {
    pub fn legal_actions(page: &PageSnapshot, rng: &mut SplitMix64) -> Vec<BrowserAction> {
        let mut out = Vec::new();
        for e in &page.elements {
            match e.role {
                Role::Link | Role::Option | Role::Button => out.push(BrowserAction::Click { element_id: e.element_id }),
                Role::Textbox => {
                    let word = RANDOM_WORDS[rng.below(RANDOM_WORDS.len() as u64) as usize];
                    out.push(BrowserAction::Type {
                        element_id: e.element_id,
                        text: word.to_string(),
                    });
                    out.push(BrowserAction::Submit { element_id: e.element_id });
                }
                Role::Text => {}
            }
        }
        if !page.elements.is_empty() {
            let e = &page.elements[rng.below(page.elements.len() as u64) as usize];
            out.push(BrowserAction::Answer { text: e.label.clone() });
        }
        out
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> String {
        "random".into()
    }

    fn decide(&self, d: &Decision<'_>) -> Result<Choice, PolicyFault> {
        let mut rng = SplitMix64::new(derive_seed(d.seed, &[d.step as u64]));
        let actions = Self::legal_actions(d.snapshot, &mut rng);
        if actions.is_empty() {
            return Err(PolicyFault("page has no elements".into()));
        }
        let action = actions[rng.below(actions.len() as u64) as usize].clone();
        Ok(Choice { thought: None, action })
    }
}

/// Parse `random`, `oracle`, `noisy_oracle(p)` or `noisy_oracle:p`.
pub fn builtin_policy(spec: &str, tasks: &[Task], env: &dyn Environment) -> Result<Box<dyn Policy>, PolicyError> {
    let spec = spec.trim();
    match spec {
        "random" => return Ok(Box::new(RandomPolicy)),
        "oracle" => return Ok(Box::new(OraclePolicy::new(tasks, env)?)),
        _ => {}
    }
    let p = spec
        .strip_prefix("noisy_oracle(")
        .and_then(|r| r.strip_suffix(')'))
        .or_else(|| spec.strip_prefix("noisy_oracle:"))
        .ok_or_else(|| PolicyError::UnknownPolicy(spec.to_string()))?;
    let p: f64 = p.trim().parse().map_err(|_| PolicyError::BadProbability(p.to_string()))?;
    if !(0.0..=1.0).contains(&p) {
        return Err(PolicyError::BadProbability(p.to_string()));
    }
    Ok(Box::new(NoisyOracle::new(OraclePolicy::new(tasks, env)?, p)?))
}
