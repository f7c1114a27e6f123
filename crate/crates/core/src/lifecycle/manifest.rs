use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::LifecycleError;

pub const MIN_PORT: u16 = 1024;
pub const PORTS_FILE: &str = "ports.json";
pub const START_SCRIPT: &str = "start_servers.sh";
pub const RESET_SCRIPT: &str = "reset_servers.sh";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    External,
    BuiltinReference,
}

/// Registration record for one environment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvironmentManifest {
    pub env_id: String,
    pub kind: EnvKind,
    #[serde(default)]
    pub code_dir: PathBuf,
    #[serde(default = "default_start")]
    pub start_script: PathBuf,
    #[serde(default = "default_reset")]
    pub reset_script: PathBuf,
    pub ports: Vec<u16>,
    pub seed: u64,
}

fn default_start() -> PathBuf {
    PathBuf::from(START_SCRIPT)
}

fn default_reset() -> PathBuf {
    PathBuf::from(RESET_SCRIPT)
}

/// Read a `ports.json` file: a JSON array of integers.
pub fn read_ports_file(path: &Path) -> Result<Vec<u16>, LifecycleError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| LifecycleError::InvalidManifest(format!("{}: {e}", path.display())))?;
    let values: Vec<i64> = serde_json::from_str(&raw).map_err(|e| {
        LifecycleError::InvalidManifest(format!(
            "{}: expected a JSON array of integers: {e}",
            path.display()
        ))
    })?;
    values
        .into_iter()
        .map(|p| {
            u16::try_from(p).map_err(|_| {
                LifecycleError::InvalidManifest(format!("port {p} out of range in {}", path.display()))
            })
        })
        .collect()
}

impl EnvironmentManifest {
    pub fn builtin(env_id: &str, port: u16, seed: u64) -> Self {
        Self {
            env_id: env_id.to_string(),
            kind: EnvKind::BuiltinReference,
            code_dir: PathBuf::new(),
            start_script: default_start(),
            reset_script: default_reset(),
            ports: vec![port],
            seed,
        }
    }

    /// External environment laid out the conventional way: scripts and
    /// `ports.json` inside `code_dir`.
    pub fn external(env_id: &str, code_dir: impl Into<PathBuf>, seed: u64) -> Result<Self, LifecycleError> {
        let code_dir = code_dir.into();
        let ports = read_ports_file(&code_dir.join(PORTS_FILE))?;
        Ok(Self {
            env_id: env_id.to_string(),
            kind: EnvKind::External,
            code_dir,
            start_script: default_start(),
            reset_script: default_reset(),
            ports,
            seed,
        })
    }

    pub fn start_path(&self) -> PathBuf {
        self.code_dir.join(&self.start_script)
    }

    pub fn reset_path(&self) -> PathBuf {
        self.code_dir.join(&self.reset_script)
    }

    pub fn primary_port(&self) -> u16 {
        self.ports[0]
    }

    /// Per-manifest invariants. Cross-registry port exclusivity is checked by the registry.
    pub fn validate(&self) -> Result<(), LifecycleError> {
        if self.env_id.trim().is_empty() {
            return Err(LifecycleError::InvalidManifest("env_id is empty".into()));
        }
        if self.ports.is_empty() {
            return Err(LifecycleError::InvalidManifest("ports is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for &p in &self.ports {
            if p < MIN_PORT {
                return Err(LifecycleError::InvalidManifest(format!(
                    "port {p} is below {MIN_PORT}"
                )));
            }
            if !seen.insert(p) {
                return Err(LifecycleError::InvalidManifest(format!("port {p} listed twice")));
            }
        }
        if self.kind == EnvKind::External {
            for script in [self.start_path(), self.reset_path()] {
                if !is_executable(&script) {
                    return Err(LifecycleError::MissingScript(script));
                }
            }
        }
        Ok(())
    }
}

fn is_executable(path: &Path) -> bool {
    use std::os::unix::fs::PermissionsExt;
    std::fs::metadata(path)
        .map(|m| m.is_file() && m.permissions().mode() & 0o111 != 0)
        .unwrap_or(false)
}
