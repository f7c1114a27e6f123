use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

pub const CONFIG_VAR: &str = "VERIENV_CONFIG";

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub registry_path: PathBuf,
    /// Extra directory searched for task files given by relative path.
    pub fixtures_path: Option<PathBuf>,
    pub default_max_steps: usize,
    pub default_rollouts: usize,
    pub start_timeout: Duration,
    pub probe_timeout: Duration,
    pub output_dir: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    registry_path: Option<PathBuf>,
    fixtures_path: Option<PathBuf>,
    default_max_steps: Option<usize>,
    default_rollouts: Option<usize>,
    start_timeout_secs: Option<f64>,
    probe_timeout_secs: Option<f64>,
    output_dir: Option<PathBuf>,
}

fn positive_secs(name: &str, v: Option<f64>, default: f64) -> Result<Duration, String> {
    let v = v.unwrap_or(default);
    if !(v.is_finite() && v > 0.0) {
        return Err(format!("{name} must be a positive number of seconds, got {v}"));
    }
    Ok(Duration::from_secs_f64(v))
}

fn positive(name: &str, v: Option<usize>, default: usize) -> Result<usize, String> {
    match v.unwrap_or(default) {
        0 => Err(format!("{name} must be positive")),
        n => Ok(n),
    }
}

impl Config {
    /// Defaults rooted at `base`.
    pub fn defaults(base: &Path) -> Self {
        Self::from_file(ConfigFile::default(), base).expect("defaults are valid")
    }

    fn from_file(f: ConfigFile, base: &Path) -> Result<Self, String> {
        let abs = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let cfg = Self {
            registry_path: abs(f.registry_path.unwrap_or_else(|| ".webenv/registry.json".into())),
            fixtures_path: f.fixtures_path.map(abs),
            default_max_steps: positive("default_max_steps", f.default_max_steps, 30)?,
            default_rollouts: positive("default_rollouts", f.default_rollouts, 8)?,
            start_timeout: positive_secs("start_timeout_secs", f.start_timeout_secs, 60.0)?,
            probe_timeout: positive_secs("probe_timeout_secs", f.probe_timeout_secs, 2.0)?,
            output_dir: abs(f.output_dir.unwrap_or_else(|| ".webenv/out".into())),
        };
        if let Some(dir) = &cfg.fixtures_path {
            if !dir.is_dir() {
                return Err(format!("fixtures_path {} is not a directory", dir.display()));
            }
        }
        Ok(cfg)
    }

    /// Parse TOML; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, String> {
        let f: ConfigFile = toml::from_str(text).map_err(|e| e.to_string())?;
        Self::from_file(f, base)
    }

    /// Explicit path, else `$VERIENV_CONFIG`, else defaults in the working
    /// directory. Creates the registry and output directories.
    pub fn load(explicit: Option<&Path>) -> Result<Self, String> {
        let cwd = std::env::current_dir().map_err(|e| e.to_string())?;
        let path = explicit
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CONFIG_VAR).map(PathBuf::from));
        let cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(&p).map_err(|e| format!("config {}: {e}", p.display()))?;
                let p = if p.is_absolute() { p } else { cwd.join(p) };
                let base = p.parent().map(Path::to_path_buf).unwrap_or(cwd);
                Self::parse(&text, &base).map_err(|e| format!("config {}: {e}", p.display()))?
            }
            None => Self::defaults(&cwd),
        };
        cfg.prepare()?;
        Ok(cfg)
    }

    pub fn prepare(&self) -> Result<(), String> {
        for dir in [self.registry_path.parent(), Some(self.output_dir.as_path())].into_iter().flatten() {
            std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        }
        Ok(())
    }

    /// A path as given if it exists, else the same name under `fixtures_path`.
    pub fn resolve_input(&self, path: &Path) -> PathBuf {
        if path.exists() || path.is_absolute() {
            return path.to_path_buf();
        }
        match &self.fixtures_path {
            Some(dir) if dir.join(path).exists() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }
}
