//! Environment registry and process lifecycle.
//!
//! An environment is either an external code directory with start/reset
//! scripts, or the built-in reference site. Both are driven through the same
//! state machine and both expose their database digest, which is how reset
//! drift is caught.

pub mod manifest;
pub mod process;
pub mod registry;
pub mod status;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Child, Command};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::env::{Environment, RemoteEnv};
use crate::site::server::SiteServer;
use crate::site::{SharedSite, Site};

pub use manifest::{read_ports_file, EnvKind, EnvironmentManifest, PORTS_FILE, RESET_SCRIPT, START_SCRIPT};
pub use registry::{Baseline, Registry, RegistryEntry};
pub use status::{first_illegal, EnvState, EnvStatus, Transition};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LifecycleError {
    #[error("environment `{0}` is not registered")]
    NotRegistered(String),
    #[error("environment `{0}` is already registered")]
    DuplicateId(String),
    #[error("port {port} requested by `{incoming}` is already held by `{existing}`")]
    PortConflict {
        port: u16,
        existing: String,
        incoming: String,
    },
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("script missing or not executable: {}", .0.display())]
    MissingScript(PathBuf),
    #[error("environment `{env_id}` cannot go from {from} to {to}")]
    InvalidTransition {
        env_id: String,
        from: EnvState,
        to: EnvState,
    },
    #[error("environment `{env_id}` not healthy after {millis} ms")]
    StartTimeout { env_id: String, millis: u64 },
    #[error("{script} exited with {code:?}: {stderr_tail}")]
    ScriptExit {
        script: String,
        code: Option<i32>,
        stderr_tail: String,
    },
    #[error("cannot bind port {port}: {reason}")]
    PortBindFailure { port: u16, reason: String },
    #[error("reset of `{env_id}` drifted: expected {expected}, got {actual}")]
    ResetDrift {
        env_id: String,
        expected: String,
        actual: String,
    },
    #[error("state of `{env_id}` unavailable: {reason}")]
    StateUnavailable { env_id: String, reason: String },
    #[error("registry: {0}")]
    Registry(String),
    #[error("io: {0}")]
    Io(String),
}

impl LifecycleError {
    /// Stable machine-readable name.
    pub fn kind(&self) -> &'static str {
        match self {
            LifecycleError::NotRegistered(_) => "NotRegistered",
            LifecycleError::DuplicateId(_) => "DuplicateId",
            LifecycleError::PortConflict { .. } => "PortConflict",
            LifecycleError::InvalidManifest(_) => "InvalidManifest",
            LifecycleError::MissingScript(_) => "MissingScript",
            LifecycleError::InvalidTransition { .. } => "InvalidTransition",
            LifecycleError::StartTimeout { .. } => "StartTimeout",
            LifecycleError::ScriptExit { .. } => "ScriptExit",
            LifecycleError::PortBindFailure { .. } => "PortBindFailure",
            LifecycleError::ResetDrift { .. } => "ResetDrift",
            LifecycleError::StateUnavailable { .. } => "StateUnavailable",
            LifecycleError::Registry(_) => "Registry",
            LifecycleError::Io(_) => "Io",
        }
    }
}

/// How the built-in reference site is hosted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BuiltinMode {
    /// Served from a thread of this process.
    InProcess,
    /// Served by a child process: `program args.. --port P --seed S`.
    Subprocess { program: PathBuf, args: Vec<String> },
}

#[derive(Debug, Clone)]
pub struct LifecycleConfig {
    pub registry_path: PathBuf,
    pub start_timeout: Duration,
    pub probe_timeout: Duration,
    pub poll_interval: Duration,
    pub script_timeout: Duration,
    pub stop_grace: Duration,
    pub builtin: BuiltinMode,
}

impl LifecycleConfig {
    pub fn new(registry_path: impl Into<PathBuf>) -> Self {
        Self {
            registry_path: registry_path.into(),
            start_timeout: Duration::from_secs(60),
            probe_timeout: Duration::from_secs(2),
            poll_interval: Duration::from_millis(200),
            script_timeout: Duration::from_secs(60),
            stop_grace: Duration::from_secs(5),
            builtin: BuiltinMode::InProcess,
        }
    }

    pub fn log_dir(&self) -> PathBuf {
        self.registry_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default()
            .join("logs")
    }
}

enum Runtime {
    Site { site: SharedSite, server: SiteServer },
    Group { child: Option<Child>, pgid: i32 },
}

/// Owner of the registry file and of every process it launched.
pub struct Lifecycle {
    config: LifecycleConfig,
    registry: Mutex<Registry>,
    runtimes: Mutex<HashMap<String, Runtime>>,
    env_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

fn guard<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl Lifecycle {
    pub fn open(config: LifecycleConfig) -> Result<Self, LifecycleError> {
        let registry = Registry::load(&config.registry_path)?;
        Ok(Self {
            config,
            registry: Mutex::new(registry),
            runtimes: Mutex::new(HashMap::new()),
            env_locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &LifecycleConfig {
        &self.config
    }

    fn env_lock(&self, env_id: &str) -> Arc<Mutex<()>> {
        guard(&self.env_locks).entry(env_id.to_string()).or_default().clone()
    }

    /// Mutate the registry and persist it before releasing the lock.
    fn update<R>(&self, f: impl FnOnce(&mut Registry) -> Result<R, LifecycleError>) -> Result<R, LifecycleError> {
        let mut reg = guard(&self.registry);
        let out = f(&mut reg)?;
        reg.save(&self.config.registry_path)?;
        Ok(out)
    }

    fn entry(&self, env_id: &str) -> Result<RegistryEntry, LifecycleError> {
        guard(&self.registry).get(env_id).cloned()
    }

    pub fn register(&self, manifest: EnvironmentManifest) -> Result<String, LifecycleError> {
        let id = manifest.env_id.clone();
        self.update(|r| r.insert(manifest))?;
        tracing::info!(env_id = %id, "registered");
        Ok(id)
    }

    /// Drop an environment from the registry, stopping it first if running.
    pub fn remove(&self, env_id: &str) -> Result<(), LifecycleError> {
        let lock = self.env_lock(env_id);
        let _g = guard(&lock);
        let entry = self.entry(env_id)?;
        self.teardown(env_id, entry.pgid);
        self.update(|r| {
            r.envs.remove(env_id);
            debug_assert!(r.port_exclusive());
            Ok(())
        })
    }

    pub fn status(&self, env_id: &str) -> Result<EnvStatus, LifecycleError> {
        Ok(guard(&self.registry).get(env_id)?.status())
    }

    pub fn manifest(&self, env_id: &str) -> Result<EnvironmentManifest, LifecycleError> {
        Ok(guard(&self.registry).get(env_id)?.manifest.clone())
    }

    pub fn transitions(&self, env_id: &str) -> Result<Vec<Transition>, LifecycleError> {
        Ok(guard(&self.registry).get(env_id)?.transitions.clone())
    }

    pub fn list(&self) -> Vec<EnvStatus> {
        guard(&self.registry).envs.values().map(RegistryEntry::status).collect()
    }

    pub fn registry_snapshot(&self) -> Registry {
        guard(&self.registry).clone()
    }

    fn log_path(&self, env_id: &str) -> PathBuf {
        self.config.log_dir().join(format!("{env_id}.log"))
    }

    fn probe_ports(m: &EnvironmentManifest) -> &[u16] {
        match m.kind {
            EnvKind::External => &m.ports,
            EnvKind::BuiltinReference => &m.ports[..1],
        }
    }

    fn transition_to(&self, env_id: &str, to: EnvState, hash: Option<String>) -> Result<EnvStatus, LifecycleError> {
        self.update(|r| {
            let status = r.transition(env_id, to)?;
            let entry = r.get_mut(env_id)?;
            if to == EnvState::Healthy || hash.is_some() {
                entry.state_hash = hash.clone();
            }
            Ok(EnvStatus {
                state_hash: entry.state_hash.clone(),
                ..status
            })
        })
    }

    fn precondition(entry: &RegistryEntry, to: EnvState) -> Result<(), LifecycleError> {
        if entry.state.can_transition(to) {
            Ok(())
        } else {
            Err(LifecycleError::InvalidTransition {
                env_id: entry.manifest.env_id.clone(),
                from: entry.state,
                to,
            })
        }
    }

    pub fn start(&self, env_id: &str) -> Result<EnvStatus, LifecycleError> {
        let lock = self.env_lock(env_id);
        let _g = guard(&lock);
        let entry = self.entry(env_id)?;
        Self::precondition(&entry, EnvState::Starting)?;
        let m = entry.manifest;
        for &port in Self::probe_ports(&m) {
            process::port_free(port).map_err(|e| LifecycleError::PortBindFailure {
                port,
                reason: e.to_string(),
            })?;
        }
        self.transition_to(env_id, EnvState::Starting, None)?;

        let launched = self.launch(&m).and_then(|rt| {
            let pgid = match &rt {
                Runtime::Group { pgid, .. } => Some(*pgid),
                Runtime::Site { .. } => None,
            };
            guard(&self.runtimes).insert(env_id.to_string(), rt);
            self.update(|r| {
                r.get_mut(env_id)?.pgid = pgid;
                Ok(())
            })?;
            self.fetch_hash(env_id, &m)
        });
        match launched {
            Ok(hash) => {
                self.update(|r| {
                    let e = r.get_mut(env_id)?;
                    if e.baseline.as_ref().map_or(true, |b| b.seed != m.seed) {
                        e.baseline = Some(Baseline {
                            seed: m.seed,
                            hash: hash.clone(),
                        });
                    }
                    Ok(())
                })?;
                tracing::info!(env_id, hash = %hash, "healthy");
                self.transition_to(env_id, EnvState::Healthy, Some(hash))
            }
            Err(e) => {
                tracing::warn!(env_id, error = %e, "start failed");
                self.teardown(env_id, None);
                self.update(|r| {
                    r.get_mut(env_id)?.pgid = None;
                    Ok(())
                })?;
                self.transition_to(env_id, EnvState::Unhealthy, None)?;
                Err(e)
            }
        }
    }

    fn launch(&self, m: &EnvironmentManifest) -> Result<Runtime, LifecycleError> {
        match (&m.kind, &self.config.builtin) {
            (EnvKind::BuiltinReference, BuiltinMode::InProcess) => {
                let site = Site::shared(m.seed);
                let port = m.primary_port();
                let server = SiteServer::bind(site.clone(), port).map_err(|e| LifecycleError::PortBindFailure {
                    port,
                    reason: e.to_string(),
                })?;
                Ok(Runtime::Site { site, server })
            }
            (EnvKind::BuiltinReference, BuiltinMode::Subprocess { program, args }) => {
                let mut cmd = Command::new(program);
                cmd.args(args)
                    .arg("--port")
                    .arg(m.primary_port().to_string())
                    .arg("--seed")
                    .arg(m.seed.to_string());
                self.launch_group(m, cmd, &program.display().to_string())
            }
            (EnvKind::External, _) => {
                let cmd = process::script_command(&m.start_path(), &m.code_dir, m.seed, &m.ports);
                self.launch_group(m, cmd, &m.start_script.display().to_string())
            }
        }
    }

    /// Spawn the start command and poll until every port answers `/healthz`.
    fn launch_group(&self, m: &EnvironmentManifest, cmd: Command, label: &str) -> Result<Runtime, LifecycleError> {
        let log = self.log_path(&m.env_id);
        let offset = process::log_len(&log);
        let mut child = process::spawn_group(cmd, &log).map_err(|e| LifecycleError::ScriptExit {
            script: label.to_string(),
            code: None,
            stderr_tail: e.to_string(),
        })?;
        let pgid = child.id() as i32;
        let started = Instant::now();
        let mut exited = false;
        loop {
            if !exited {
                match child.try_wait() {
                    Ok(Some(status)) if !status.success() => {
                        process::kill_group(pgid, Some(&mut child), self.config.stop_grace);
                        return Err(LifecycleError::ScriptExit {
                            script: label.to_string(),
                            code: status.code(),
                            stderr_tail: process::log_tail_since(&log, offset),
                        });
                    }
                    Ok(Some(_)) => exited = true,
                    Ok(None) => {}
                    Err(e) => return Err(LifecycleError::Io(e.to_string())),
                }
            }
            if process::probe_all(Self::probe_ports(m), self.config.probe_timeout) {
                return Ok(Runtime::Group {
                    child: Some(child),
                    pgid,
                });
            }
            if started.elapsed() >= self.config.start_timeout {
                process::kill_group(pgid, Some(&mut child), self.config.stop_grace);
                return Err(LifecycleError::StartTimeout {
                    env_id: m.env_id.clone(),
                    millis: started.elapsed().as_millis() as u64,
                });
            }
            thread::sleep(self.config.poll_interval);
        }
    }

    /// Wait for the servers to answer again, e.g. after a reset script.
    fn await_healthy(&self, m: &EnvironmentManifest) -> Result<(), LifecycleError> {
        let started = Instant::now();
        loop {
            if process::probe_all(Self::probe_ports(m), self.config.probe_timeout) {
                return Ok(());
            }
            if started.elapsed() >= self.config.start_timeout {
                return Err(LifecycleError::StartTimeout {
                    env_id: m.env_id.clone(),
                    millis: started.elapsed().as_millis() as u64,
                });
            }
            thread::sleep(self.config.poll_interval);
        }
    }

    fn handle(&self, env_id: &str, m: &EnvironmentManifest) -> Arc<dyn Environment> {
        if let Some(Runtime::Site { site, .. }) = guard(&self.runtimes).get(env_id) {
            return Arc::new(site.clone());
        }
        Arc::new(RemoteEnv::new(m.primary_port()))
    }

    fn fetch_hash(&self, env_id: &str, m: &EnvironmentManifest) -> Result<String, LifecycleError> {
        self.handle(env_id, m)
            .state()
            .map(|d| d.digest())
            .map_err(|e| LifecycleError::StateUnavailable {
                env_id: env_id.to_string(),
                reason: e.0,
            })
    }

    /// Restore the initial seeded database.
    pub fn reset(&self, env_id: &str) -> Result<EnvStatus, LifecycleError> {
        self.reset_inner(env_id, None)
    }

    /// Reset with a different seed than the one registered. The result is
    /// checked against the registered baseline like any reset.
    pub fn reset_with_seed(&self, env_id: &str, seed: u64) -> Result<EnvStatus, LifecycleError> {
        self.reset_inner(env_id, Some(seed))
    }

    fn reset_inner(&self, env_id: &str, seed: Option<u64>) -> Result<EnvStatus, LifecycleError> {
        let lock = self.env_lock(env_id);
        let _g = guard(&lock);
        let entry = self.entry(env_id)?;
        if entry.state != EnvState::Healthy {
            return Err(LifecycleError::InvalidTransition {
                env_id: env_id.to_string(),
                from: entry.state,
                to: EnvState::Resetting,
            });
        }
        let m = entry.manifest;
        self.transition_to(env_id, EnvState::Resetting, None)?;

        let outcome = self
            .restore(env_id, &m, seed)
            .and_then(|()| self.await_healthy(&m))
            .and_then(|()| self.fetch_hash(env_id, &m));
        let hash = match outcome {
            Ok(h) => h,
            Err(e) => {
                self.transition_to(env_id, EnvState::Unhealthy, None)?;
                return Err(e);
            }
        };
        let expected = entry.baseline.map(|b| b.hash).unwrap_or_default();
        if hash != expected {
            tracing::warn!(env_id, %expected, actual = %hash, "reset drift");
            self.transition_to(env_id, EnvState::Unhealthy, Some(hash.clone()))?;
            return Err(LifecycleError::ResetDrift {
                env_id: env_id.to_string(),
                expected,
                actual: hash,
            });
        }
        self.transition_to(env_id, EnvState::Healthy, Some(hash))
    }

    fn restore(&self, env_id: &str, m: &EnvironmentManifest, seed: Option<u64>) -> Result<(), LifecycleError> {
        if let Some(Runtime::Site { site, .. }) = guard(&self.runtimes).get(env_id) {
            let mut s = guard(site);
            match seed {
                Some(seed) => s.reseed(seed),
                None => s.reset(),
            }
            return Ok(());
        }
        match m.kind {
            EnvKind::BuiltinReference => {
                let mut url = format!("http://127.0.0.1:{}/reset", m.primary_port());
                if let Some(seed) = seed {
                    url.push_str(&format!("?seed={seed}"));
                }
                ureq::AgentBuilder::new()
                    .timeout(self.config.script_timeout)
                    .build()
                    .post(&url)
                    .call()
                    .map(drop)
                    .map_err(|e| LifecycleError::StateUnavailable {
                        env_id: env_id.to_string(),
                        reason: e.to_string(),
                    })
            }
            EnvKind::External => {
                let log = self.log_path(env_id);
                let offset = process::log_len(&log);
                let cmd = process::script_command(&m.reset_path(), &m.code_dir, seed.unwrap_or(m.seed), &m.ports);
                let label = m.reset_script.display().to_string();
                let run = process::run_script(cmd, &log, self.config.script_timeout)
                    .map_err(|e| LifecycleError::Io(e.to_string()))?;
                match run {
                    process::ScriptRun::Exited(s) if s.success() => Ok(()),
                    process::ScriptRun::Exited(s) => Err(LifecycleError::ScriptExit {
                        script: label,
                        code: s.code(),
                        stderr_tail: process::log_tail_since(&log, offset),
                    }),
                    process::ScriptRun::TimedOut => Err(LifecycleError::ScriptExit {
                        script: label,
                        code: None,
                        stderr_tail: format!(
                            "timed out after {:?}; {}",
                            self.config.script_timeout,
                            process::log_tail_since(&log, offset)
                        ),
                    }),
                }
            }
        }
    }

    /// Probe liveness and move between healthy and unhealthy. Never errors on
    /// unreachability and never touches the database.
    pub fn health(&self, env_id: &str) -> Result<EnvStatus, LifecycleError> {
        let lock = self.env_lock(env_id);
        let _g = guard(&lock);
        let entry = self.entry(env_id)?;
        let m = &entry.manifest;
        let alive = process::probe_all(Self::probe_ports(m), self.config.probe_timeout);
        match (entry.state, alive) {
            (EnvState::Healthy, false) => self.transition_to(env_id, EnvState::Unhealthy, None),
            (EnvState::Unhealthy, true) => match self.fetch_hash(env_id, m) {
                Ok(hash) => self.transition_to(env_id, EnvState::Healthy, Some(hash)),
                Err(_) => Ok(entry.status()),
            },
            _ => Ok(entry.status()),
        }
    }

    pub fn state_hash(&self, env_id: &str) -> Result<String, LifecycleError> {
        let entry = self.entry(env_id)?;
        if entry.state != EnvState::Healthy {
            return Err(LifecycleError::InvalidTransition {
                env_id: env_id.to_string(),
                from: entry.state,
                to: EnvState::Healthy,
            });
        }
        self.fetch_hash(env_id, &entry.manifest)
    }

    /// Agent and validator access to a healthy environment.
    pub fn environment(&self, env_id: &str) -> Result<Arc<dyn Environment>, LifecycleError> {
        let entry = self.entry(env_id)?;
        if entry.state != EnvState::Healthy {
            return Err(LifecycleError::InvalidTransition {
                env_id: env_id.to_string(),
                from: entry.state,
                to: EnvState::Healthy,
            });
        }
        Ok(self.handle(env_id, &entry.manifest))
    }

    pub fn stop(&self, env_id: &str) -> Result<EnvStatus, LifecycleError> {
        let lock = self.env_lock(env_id);
        let _g = guard(&lock);
        let entry = self.entry(env_id)?;
        Self::precondition(&entry, EnvState::Stopped)?;
        self.teardown(env_id, entry.pgid);
        self.update(|r| {
            r.get_mut(env_id)?.pgid = None;
            Ok(())
        })?;
        tracing::info!(env_id, "stopped");
        self.transition_to(env_id, EnvState::Stopped, None)
    }

    /// Stop every running environment this registry knows about.
    pub fn stop_all(&self) -> Vec<(String, Result<EnvStatus, LifecycleError>)> {
        let ids: Vec<String> = self
            .list()
            .into_iter()
            .filter(|s| matches!(s.state, EnvState::Healthy | EnvState::Unhealthy))
            .map(|s| s.env_id)
            .collect();
        ids.into_iter().map(|id| {
            let r = self.stop(&id);
            (id, r)
        }).collect()
    }

    fn teardown(&self, env_id: &str, persisted_pgid: Option<i32>) {
        let rt = guard(&self.runtimes).remove(env_id);
        match rt {
            Some(Runtime::Site { server, .. }) => server.shutdown(),
            Some(Runtime::Group { mut child, pgid }) => {
                process::kill_group(pgid, child.as_mut(), self.config.stop_grace)
            }
            None => {
                if let Some(pgid) = persisted_pgid {
                    process::kill_group(pgid, None, self.config.stop_grace);
                }
            }
        }
    }
}

/// An environment whose resets go through the lifecycle, so every episode
/// starts from a hash-checked baseline.
pub struct ManagedEnv {
    lifecycle: Arc<Lifecycle>,
    env_id: String,
    inner: Arc<dyn Environment>,
}

impl ManagedEnv {
    pub fn new(lifecycle: Arc<Lifecycle>, env_id: &str) -> Result<Self, LifecycleError> {
        let inner = lifecycle.environment(env_id)?;
        Ok(Self {
            lifecycle,
            env_id: env_id.to_string(),
            inner,
        })
    }

    pub fn env_id(&self) -> &str {
        &self.env_id
    }
}

impl Environment for ManagedEnv {
    fn begin_episode(&self) -> Result<crate::site::PageSnapshot, crate::env::Unavailable> {
        self.inner.begin_episode()
    }

    fn act(&self, action: &crate::site::BrowserAction) -> Result<crate::site::StepOutcome, crate::env::ActError> {
        self.inner.act(action)
    }

    fn sdk(&self, call: &crate::site::SdkCall) -> Result<String, crate::site::SdkError> {
        self.inner.sdk(call)
    }

    fn state(&self) -> Result<crate::canonical::StateDump, crate::env::Unavailable> {
        self.inner.state()
    }

    fn reset(&self) -> Result<(), crate::env::Unavailable> {
        self.lifecycle
            .reset(&self.env_id)
            .map(|_| ())
            .map_err(|e| crate::env::Unavailable(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::site::BrowserAction;

    fn free_port() -> u16 {
        std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
    }

    fn manager(dir: &Path) -> Lifecycle {
        Lifecycle::open(LifecycleConfig::new(dir.join("registry.json"))).unwrap()
    }

    #[test]
    fn builtin_start_reset_stop() {
        let dir = tempfile::tempdir().unwrap();
        let lc = manager(dir.path());
        let port = free_port();
        lc.register(EnvironmentManifest::builtin("ref", port, 42)).unwrap();
        assert_eq!(lc.status("ref").unwrap().state, EnvState::Registered);

        let s = lc.start("ref").unwrap();
        assert_eq!(s.state, EnvState::Healthy);
        let h = s.state_hash.unwrap();
        assert_eq!(h.len(), 64);
        assert_eq!(h, Site::new(42).state_hash());

        let env = lc.environment("ref").unwrap();
        env.begin_episode().unwrap();
        env.act(&BrowserAction::Navigate { url: "/contact".into() }).unwrap();
        env.act(&BrowserAction::Type { element_id: 9, text: "hi".into() }).ok();
        let s = lc.reset("ref").unwrap();
        assert_eq!(s.state_hash.as_deref(), Some(h.as_str()));

        lc.stop("ref").unwrap();
        assert!(matches!(lc.reset("ref"), Err(LifecycleError::InvalidTransition { .. })));
        assert!(!process::probe(port, Duration::from_millis(200)));

        // registry survives reopen
        let again = manager(dir.path());
        assert_eq!(again.status("ref").unwrap().state, EnvState::Stopped);
        assert!(again.registry_snapshot().logs_legal());
    }

    #[test]
    fn reseed_is_drift() {
        let dir = tempfile::tempdir().unwrap();
        let lc = manager(dir.path());
        lc.register(EnvironmentManifest::builtin("ref", free_port(), 42)).unwrap();
        lc.start("ref").unwrap();
        let err = lc.reset_with_seed("ref", 43).unwrap_err();
        assert_eq!(err.kind(), "ResetDrift");
        assert_eq!(lc.status("ref").unwrap().state, EnvState::Unhealthy);
        lc.stop("ref").unwrap();
    }

    #[test]
    fn busy_port_fails_to_bind() {
        let dir = tempfile::tempdir().unwrap();
        let lc = manager(dir.path());
        let holder = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let port = holder.local_addr().unwrap().port();
        lc.register(EnvironmentManifest::builtin("ref", port, 1)).unwrap();
        assert_eq!(lc.start("ref").unwrap_err().kind(), "PortBindFailure");
        assert_eq!(lc.status("ref").unwrap().state, EnvState::Registered);
    }

    #[test]
    fn health_tracks_liveness() {
        let dir = tempfile::tempdir().unwrap();
        let lc = manager(dir.path());
        lc.register(EnvironmentManifest::builtin("ref", free_port(), 5)).unwrap();
        assert_eq!(lc.health("ref").unwrap().state, EnvState::Registered);
        lc.start("ref").unwrap();
        let before = lc.state_hash("ref").unwrap();
        assert_eq!(lc.health("ref").unwrap().state, EnvState::Healthy);
        assert_eq!(lc.state_hash("ref").unwrap(), before);

        // kill the server behind the manager's back
        if let Some(Runtime::Site { server, .. }) = guard(&lc.runtimes).remove("ref") {
            server.shutdown();
        }
        assert_eq!(lc.health("ref").unwrap().state, EnvState::Unhealthy);
        assert!(lc.state_hash("ref").is_err());
        lc.stop("ref").unwrap();
        lc.remove("ref").unwrap();
        assert!(lc.list().is_empty());
    }
}
