//! Operations shared by the command line and the HTTP service. Each returns
//! the JSON body both front ends emit, so their outputs agree byte for byte.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use webenv_core::judge::{evaluate, parse_judge, JudgeInput, ProbeDocument, SchemaError};
use webenv_core::lifecycle::{
    BuiltinMode, EnvironmentManifest, Lifecycle, LifecycleConfig, LifecycleError, ManagedEnv,
};
use webenv_core::rollout::{
    build_dataset, builtin_policy, collect, load_entries, run_phase_loop, write_dataset, CollectConfig,
    DatasetOptions, PhaseConfig, Policy, PolicyError, RolloutStore,
};
use webenv_core::tasks::{
    load_tasks, parse_tasks, render_tasks, revalidate, task_stats, validate_task, CorpusFormatError, Task,
};

use crate::config::Config;

pub const ROLLOUTS_FILE: &str = "rollouts.jsonl";
pub const DATASET_FILE: &str = "dataset.jsonl";

#[derive(Debug)]
pub enum OpError {
    Usage(String),
    BadRequest(String),
    NoRoute(String),
    Io { path: PathBuf, message: String },
    Schema(SchemaError),
    Corpus(CorpusFormatError),
    Lifecycle(LifecycleError),
    Policy(PolicyError),
    EnvUnavailable(String),
    EmptyCorpus,
}

impl OpError {
    pub fn kind(&self) -> &'static str {
        match self {
            OpError::Usage(_) => "Usage",
            OpError::BadRequest(_) => "BadRequest",
            OpError::NoRoute(_) => "NoRoute",
            OpError::Io { .. } => "Io",
            OpError::Schema(_) => "SchemaError",
            OpError::Corpus(_) => "CorpusFormatError",
            OpError::Lifecycle(e) => e.kind(),
            OpError::Policy(PolicyError::UnknownPolicy(_)) => "UnknownPolicy",
            OpError::Policy(PolicyError::BadProbability(_)) => "BadProbability",
            OpError::Policy(PolicyError::Validation(_)) | OpError::EnvUnavailable(_) => "EnvUnavailable",
            OpError::EmptyCorpus => "EmptyCorpus",
        }
    }

    pub fn message(&self) -> String {
        match self {
            OpError::Usage(m) | OpError::BadRequest(m) | OpError::NoRoute(m) | OpError::EnvUnavailable(m) => m.clone(),
            OpError::Io { path, message } => format!("{}: {message}", path.display()),
            OpError::Schema(e) => e.to_string(),
            OpError::Corpus(e) => e.to_string(),
            OpError::Lifecycle(e) => e.to_string(),
            OpError::Policy(e) => e.to_string(),
            OpError::EmptyCorpus => "task file holds no tasks".into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            OpError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub fn http_status(&self) -> u16 {
        match self {
            OpError::Usage(_) | OpError::BadRequest(_) => 400,
            OpError::Policy(PolicyError::UnknownPolicy(_) | PolicyError::BadProbability(_)) => 400,
            OpError::Io { .. } | OpError::NoRoute(_) => 404,
            OpError::Schema(_) | OpError::Corpus(_) | OpError::EmptyCorpus => 422,
            OpError::Lifecycle(e) => match e {
                LifecycleError::NotRegistered(_) => 404,
                LifecycleError::DuplicateId(_)
                | LifecycleError::PortConflict { .. }
                | LifecycleError::InvalidTransition { .. }
                | LifecycleError::PortBindFailure { .. }
                | LifecycleError::ResetDrift { .. } => 409,
                LifecycleError::InvalidManifest(_) | LifecycleError::MissingScript(_) => 422,
                LifecycleError::StartTimeout { .. }
                | LifecycleError::ScriptExit { .. }
                | LifecycleError::StateUnavailable { .. } => 503,
                LifecycleError::Registry(_) | LifecycleError::Io(_) => 500,
            },
            OpError::Policy(PolicyError::Validation(_)) | OpError::EnvUnavailable(_) => 503,
        }
    }

    pub fn to_json(&self) -> String {
        let mut err = json!({"kind": self.kind(), "message": self.message()});
        match self {
            OpError::Schema(e) => err["path"] = json!(e.path),
            OpError::Corpus(e) => err["line"] = json!(e.line),
            _ => {}
        }
        json!({ "error": err }).to_string()
    }
}

impl From<LifecycleError> for OpError {
    fn from(e: LifecycleError) -> Self {
        OpError::Lifecycle(e)
    }
}

impl From<PolicyError> for OpError {
    fn from(e: PolicyError) -> Self {
        OpError::Policy(e)
    }
}

/// JSON body plus a one-line human summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub body: String,
    pub summary: String,
}

fn reply(value: &impl Serialize, summary: impl Into<String>) -> Reply {
    Reply {
        body: serde_json::to_string(value).expect("reply serializes"),
        summary: summary.into(),
    }
}

pub fn read_text(path: &Path) -> Result<String, OpError> {
    std::fs::read_to_string(path).map_err(|e| OpError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterRequest {
    pub env_id: String,
    /// External environment directory; absent for the built-in site.
    #[serde(default)]
    pub code_dir: Option<PathBuf>,
    /// Port of the built-in site.
    #[serde(default)]
    pub port: Option<u16>,
    #[serde(default)]
    pub seed: u64,
}

/// What a judge is evaluated against, as received from a caller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JudgeTarget {
    Answer(String),
    Probe(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectRequest {
    pub tasks: Vec<Task>,
    pub policy: String,
    pub env: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub max_steps: Option<usize>,
    /// Rollout store to append to; defaults to the output directory.
    #[serde(default)]
    pub records: Option<PathBuf>,
    /// Validate tasks against the environment before collecting.
    #[serde(default)]
    pub validate: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRequest {
    pub records: PathBuf,
    pub output: PathBuf,
    #[serde(default = "yes")]
    pub dedup: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopRequest {
    pub phases: u32,
    /// Task file ingested at the start of phase i.
    pub tasks: Vec<PathBuf>,
    /// Policy of phase i; the last one repeats.
    pub policy: Vec<String>,
    pub env: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub validate: bool,
    #[serde(default = "yes")]
    pub dedup: bool,
}

pub struct Ops {
    config: Config,
    lifecycle: Arc<Lifecycle>,
}

impl Ops {
    pub fn open(config: Config, builtin: BuiltinMode) -> Result<Self, OpError> {
        config.prepare().map_err(OpError::Usage)?;
        let mut lc = LifecycleConfig::new(&config.registry_path);
        lc.start_timeout = config.start_timeout;
        lc.probe_timeout = config.probe_timeout;
        lc.builtin = builtin;
        Ok(Self {
            lifecycle: Arc::new(Lifecycle::open(lc)?),
            config,
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn lifecycle(&self) -> &Arc<Lifecycle> {
        &self.lifecycle
    }

    fn status_reply(s: webenv_core::lifecycle::EnvStatus) -> Reply {
        let summary = match &s.state_hash {
            Some(h) => format!("{}: {} ({})", s.env_id, s.state, &h[..h.len().min(12)]),
            None => format!("{}: {}", s.env_id, s.state),
        };
        reply(&s, summary)
    }

    pub fn env_register(&self, req: &RegisterRequest) -> Result<Reply, OpError> {
        let manifest = match (&req.code_dir, req.port) {
            (Some(dir), None) => EnvironmentManifest::external(&req.env_id, dir, req.seed)?,
            (None, Some(port)) => EnvironmentManifest::builtin(&req.env_id, port, req.seed),
            (Some(_), Some(_)) => {
                return Err(OpError::Usage("give either a code directory or a built-in port, not both".into()))
            }
            (None, None) => return Err(OpError::Usage("a code directory or a built-in port is required".into())),
        };
        self.lifecycle.register(manifest)?;
        Ok(Self::status_reply(self.lifecycle.status(&req.env_id)?))
    }

    pub fn env_start(&self, id: &str) -> Result<Reply, OpError> {
        Ok(Self::status_reply(self.lifecycle.start(id)?))
    }

    pub fn env_reset(&self, id: &str, seed: Option<u64>) -> Result<Reply, OpError> {
        let s = match seed {
            Some(seed) => self.lifecycle.reset_with_seed(id, seed)?,
            None => self.lifecycle.reset(id)?,
        };
        Ok(Self::status_reply(s))
    }

    pub fn env_status(&self, id: &str) -> Result<Reply, OpError> {
        Ok(Self::status_reply(self.lifecycle.status(id)?))
    }

    pub fn env_health(&self, id: &str) -> Result<Reply, OpError> {
        Ok(Self::status_reply(self.lifecycle.health(id)?))
    }

    pub fn env_stop(&self, id: &str) -> Result<Reply, OpError> {
        Ok(Self::status_reply(self.lifecycle.stop(id)?))
    }

    pub fn env_remove(&self, id: &str) -> Result<Reply, OpError> {
        self.lifecycle.remove(id)?;
        Ok(reply(&json!({ "removed": id }), format!("{id}: removed")))
    }

    pub fn env_list(&self) -> Result<Reply, OpError> {
        let all = self.lifecycle.list();
        let summary = format!("{} environments", all.len());
        Ok(reply(&all, summary))
    }

    fn managed(&self, id: &str) -> Result<ManagedEnv, OpError> {
        Ok(ManagedEnv::new(Arc::clone(&self.lifecycle), id)?)
    }

    fn validate_all(tasks: &[Task], env: &ManagedEnv) -> Result<Vec<Task>, OpError> {
        tasks
            .iter()
            .map(|t| validate_task(t, env).map_err(|e| OpError::EnvUnavailable(e.to_string())))
            .collect()
    }

    pub fn task_validate(&self, tasks_text: &str, env_id: &str) -> Result<Reply, OpError> {
        let tasks = parse_tasks(tasks_text).map_err(OpError::Corpus)?;
        let env = self.managed(env_id)?;
        let out = Self::validate_all(&tasks, &env)?;
        let valid = out.iter().filter(|t| t.is_valid).count();
        let mut invalid: Vec<String> = out
            .iter()
            .filter(|t| !t.is_valid)
            .map(|t| format!("{}: {}", t.task_id, t.failure_reason.as_deref().unwrap_or("invalid")))
            .collect();
        invalid.insert(0, format!("{valid}/{} tasks valid", out.len()));
        Ok(Reply {
            body: render_tasks(&out).trim_end().to_string(),
            summary: invalid.join("\n"),
        })
    }

    pub fn task_revalidate(&self, tasks_text: &str, env_id: &str) -> Result<(Reply, Vec<Task>), OpError> {
        let tasks = parse_tasks(tasks_text).map_err(OpError::Corpus)?;
        let env = self.managed(env_id)?;
        let mut outcomes = Vec::new();
        let mut fresh = Vec::new();
        for t in &tasks {
            let (outcome, t2) = revalidate(t, &env).map_err(|e| OpError::EnvUnavailable(e.to_string()))?;
            outcomes.push(json!({"task_id": t.task_id, "outcome": outcome}));
            fresh.push(t2);
        }
        let count = |name: &str| outcomes.iter().filter(|o| o["outcome"] == name).count();
        let summary = format!(
            "{} unchanged, {} judge updated, {} now invalid",
            count("unchanged"),
            count("judge_updated"),
            count("now_invalid")
        );
        let body = json!({ "outcomes": outcomes, "tasks": fresh });
        Ok((reply(&body, summary), fresh))
    }

    pub fn task_stats(&self, tasks_text: &str) -> Result<Reply, OpError> {
        let tasks = parse_tasks(tasks_text).map_err(OpError::Corpus)?;
        let stats = task_stats(&tasks).ok_or(OpError::EmptyCorpus)?;
        let tiers: Vec<String> = stats
            .tiers
            .iter()
            .map(|(d, t)| format!("{} {} ({}%)", d.as_str(), t.count, t.percent))
            .collect();
        let summary = format!("{} tasks: {}", stats.total, tiers.join(", "));
        Ok(reply(&stats, summary))
    }

    pub fn judge_eval(&self, spec_text: &str, target: &JudgeTarget) -> Result<Reply, OpError> {
        let spec = parse_judge(spec_text).map_err(OpError::Schema)?;
        let probe;
        let input = match target {
            JudgeTarget::Answer(a) => JudgeInput::Answer(a),
            JudgeTarget::Probe(text) => {
                probe = serde_json::from_str::<ProbeDocument>(text).map_err(|e| {
                    OpError::Schema(SchemaError {
                        path: "probe".into(),
                        reason: e.to_string(),
                    })
                })?;
                JudgeInput::Probe(&probe)
            }
        };
        let verdict = evaluate(&spec, input);
        let passed = verdict.per_check.iter().filter(|c| c.pass).count();
        let summary = format!("reward {} ({passed}/{} checks passed)", verdict.reward, verdict.per_check.len());
        Ok(reply(&verdict, summary))
    }

    fn policy(&self, spec: &str, tasks: &[Task], env: &ManagedEnv) -> Result<Box<dyn Policy>, OpError> {
        Ok(builtin_policy(spec, tasks, env)?)
    }

    pub fn collect(&self, req: &CollectRequest) -> Result<Reply, OpError> {
        let k = req.k.unwrap_or(self.config.default_rollouts);
        if k == 0 {
            return Err(OpError::Usage("k must be at least 1".into()));
        }
        let env = self.managed(&req.env)?;
        let tasks = if req.validate {
            Self::validate_all(&req.tasks, &env)?
        } else {
            req.tasks.clone()
        };
        let policy = self.policy(&req.policy, &tasks, &env)?;
        let path = req.records.clone().unwrap_or_else(|| self.config.output_dir.join(ROLLOUTS_FILE));
        let store = RolloutStore::new(&path);
        let cfg = CollectConfig {
            rollouts_per_task: k,
            base_seed: req.seed,
            max_steps: req.max_steps.unwrap_or(self.config.default_max_steps),
            phase: 0,
        };
        let report = collect(&tasks, policy.as_ref(), &env, &cfg, Some(&store));
        let body = json!({
            "policy": policy.name(),
            "tasks": tasks.len(),
            "episodes": report.entries.len(),
            "successes": report.successes(),
            "success_rate": report.success_rate(),
            "failures": report.failures,
            "records": path,
        });
        let summary = format!(
            "{} episodes, {} successes ({:.1}%), {} failures -> {}",
            report.entries.len(),
            report.successes(),
            100.0 * report.success_rate(),
            report.failures.len(),
            path.display()
        );
        Ok(reply(&body, summary))
    }

    pub fn dataset_build(&self, req: &DatasetRequest) -> Result<Reply, OpError> {
        let entries = load_entries(&req.records).map_err(|message| OpError::Io {
            path: req.records.clone(),
            message,
        })?;
        let records = build_dataset(&entries, DatasetOptions { dedup: req.dedup });
        write_dataset(&req.output, &records).map_err(|e| OpError::Io {
            path: req.output.clone(),
            message: e.to_string(),
        })?;
        let rewarded = entries.iter().filter(|e| e.record.reward == 1).count();
        let body = json!({
            "input": entries.len(),
            "rewarded": rewarded,
            "records": records.len(),
            "output": req.output,
        });
        let summary = format!(
            "{} of {} rollouts rewarded, {} training records -> {}",
            rewarded,
            entries.len(),
            records.len(),
            req.output.display()
        );
        Ok(reply(&body, summary))
    }

    pub fn run_loop(&self, req: &LoopRequest) -> Result<Reply, OpError> {
        if req.phases == 0 {
            return Err(OpError::Usage("phases must be at least 1".into()));
        }
        if req.policy.is_empty() {
            return Err(OpError::Usage("at least one policy is required".into()));
        }
        let env = self.managed(&req.env)?;
        let mut batches = Vec::new();
        for path in &req.tasks {
            let path = self.config.resolve_input(path);
            let tasks = load_tasks(&path).map_err(OpError::Corpus)?;
            batches.push(if req.validate { Self::validate_all(&tasks, &env)? } else { tasks });
        }
        // Resolve every policy up front so a bad name fails before any work.
        let all: Vec<Task> = batches.iter().flatten().cloned().collect();
        for spec in &req.policy {
            self.policy(spec, &all, &env)?;
        }

        let out_dir = req.out.clone().unwrap_or_else(|| self.config.output_dir.clone());
        std::fs::create_dir_all(&out_dir).map_err(|e| OpError::Io {
            path: out_dir.clone(),
            message: e.to_string(),
        })?;
        let store = RolloutStore::new(out_dir.join(ROLLOUTS_FILE));
        let cfg = PhaseConfig {
            phases: req.phases,
            rollouts_per_task: req.k.unwrap_or(self.config.default_rollouts),
            base_seed: req.seed,
            max_steps: req.max_steps.unwrap_or(self.config.default_max_steps),
            dataset: DatasetOptions { dedup: req.dedup },
        };
        let outcome = run_phase_loop(
            &cfg,
            &env,
            Vec::new(),
            |phase| batches.get(phase as usize).cloned().unwrap_or_default(),
            |phase, pool| {
                let spec = &req.policy[(phase as usize).min(req.policy.len() - 1)];
                builtin_policy(spec, pool, &env).expect("policy resolved above")
            },
            Some(&store),
        )
        .map_err(OpError::Usage)?;
        let dataset_path = out_dir.join(DATASET_FILE);
        write_dataset(&dataset_path, &outcome.dataset).map_err(|e| OpError::Io {
            path: dataset_path.clone(),
            message: e.to_string(),
        })?;
        let summary = outcome
            .reports
            .iter()
            .map(|r| {
                format!(
                    "phase {}: {} tasks, success {:.1}%, dataset {}",
                    r.phase,
                    r.tasks,
                    100.0 * r.success_rate,
                    r.dataset_size
                )
            })
            .collect::<Vec<_>>()
            .join("\n");
        Ok(reply(&outcome.reports, summary))
    }
}

/// Accept either a body that is itself a JSON document or fail as a bad request.
pub fn parse_body<T: for<'de> Deserialize<'de>>(body: &str) -> Result<T, OpError> {
    serde_json::from_str(body).map_err(|e| OpError::BadRequest(format!("request body: {e}")))
}

/// Text form of a JSON value embedded in a request body.
pub fn embedded_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
