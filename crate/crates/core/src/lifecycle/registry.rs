use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::manifest::EnvironmentManifest;
use super::status::{first_illegal, EnvState, EnvStatus, Transition};
use super::LifecycleError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub manifest: EnvironmentManifest,
    pub state: EnvState,
    pub state_hash: Option<String>,
    pub last_transition: DateTime<Utc>,
    /// Hash at the first healthy start, keyed by the seed it was taken under.
    pub baseline: Option<Baseline>,
    /// Process group of the running servers, if any.
    pub pgid: Option<i32>,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Baseline {
    pub seed: u64,
    pub hash: String,
}

impl RegistryEntry {
    pub fn status(&self) -> EnvStatus {
        EnvStatus {
            env_id: self.manifest.env_id.clone(),
            state: self.state,
            state_hash: self.state_hash.clone(),
            last_transition: self.last_transition,
        }
    }
}

/// The registry file contents: entries keyed by env_id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registry {
    pub envs: BTreeMap<String, RegistryEntry>,
}

impl Registry {
    pub fn load(path: &Path) -> Result<Self, LifecycleError> {
        match std::fs::read_to_string(path) {
            Ok(raw) => serde_json::from_str(&raw)
                .map_err(|e| LifecycleError::Registry(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(LifecycleError::Registry(format!("{}: {e}", path.display()))),
        }
    }

    /// Write to a sibling temp file, fsync, then rename over the target.
    pub fn save(&self, path: &Path) -> Result<(), LifecycleError> {
        let err = |e: std::io::Error| LifecycleError::Registry(format!("{}: {e}", path.display()));
        let dir = parent_dir(path);
        std::fs::create_dir_all(&dir).map_err(err)?;
        let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(err)?;
        let body = serde_json::to_vec_pretty(self).expect("registry serializes");
        tmp.write_all(&body).map_err(err)?;
        tmp.write_all(b"\n").map_err(err)?;
        tmp.as_file().sync_all().map_err(err)?;
        tmp.persist(path).map_err(|e| err(e.error))?;
        Ok(())
    }

    pub fn insert(&mut self, manifest: EnvironmentManifest) -> Result<(), LifecycleError> {
        manifest.validate()?;
        if self.envs.contains_key(&manifest.env_id) {
            return Err(LifecycleError::DuplicateId(manifest.env_id));
        }
        for (id, entry) in &self.envs {
            if let Some(&port) = manifest.ports.iter().find(|p| entry.manifest.ports.contains(p)) {
                return Err(LifecycleError::PortConflict {
                    port,
                    existing: id.clone(),
                    incoming: manifest.env_id.clone(),
                });
            }
        }
        let now = Utc::now();
        self.envs.insert(
            manifest.env_id.clone(),
            RegistryEntry {
                manifest,
                state: EnvState::Registered,
                state_hash: None,
                last_transition: now,
                baseline: None,
                pgid: None,
                transitions: Vec::new(),
            },
        );
        debug_assert!(self.port_exclusive());
        Ok(())
    }

    pub fn get(&self, env_id: &str) -> Result<&RegistryEntry, LifecycleError> {
        self.envs
            .get(env_id)
            .ok_or_else(|| LifecycleError::NotRegistered(env_id.to_string()))
    }

    pub fn get_mut(&mut self, env_id: &str) -> Result<&mut RegistryEntry, LifecycleError> {
        self.envs
            .get_mut(env_id)
            .ok_or_else(|| LifecycleError::NotRegistered(env_id.to_string()))
    }

    /// Move an environment along one edge of the lifecycle graph.
    pub fn transition(&mut self, env_id: &str, to: EnvState) -> Result<EnvStatus, LifecycleError> {
        let entry = self.get_mut(env_id)?;
        let from = entry.state;
        if !from.can_transition(to) {
            return Err(LifecycleError::InvalidTransition {
                env_id: env_id.to_string(),
                from,
                to,
            });
        }
        let at = Utc::now();
        entry.transitions.push(Transition { from, to, at });
        entry.state = to;
        entry.last_transition = at;
        Ok(entry.status())
    }

    /// No port is claimed by two environments.
    pub fn port_exclusive(&self) -> bool {
        let mut seen = std::collections::BTreeSet::new();
        self.envs
            .values()
            .flat_map(|e| e.manifest.ports.iter())
            .all(|p| seen.insert(*p))
    }

    /// Every recorded transition log replays cleanly.
    pub fn logs_legal(&self) -> bool {
        self.envs
            .values()
            .all(|e| first_illegal(EnvState::Registered, &e.transitions).is_none())
    }
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}
