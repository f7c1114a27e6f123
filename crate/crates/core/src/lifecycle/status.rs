use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvState {
    Registered,
    Starting,
    Healthy,
    Unhealthy,
    Resetting,
    Stopped,
}

impl EnvState {
    pub const ALL: [EnvState; 6] = [
        EnvState::Registered,
        EnvState::Starting,
        EnvState::Healthy,
        EnvState::Unhealthy,
        EnvState::Resetting,
        EnvState::Stopped,
    ];

    /// Allowed edges of the lifecycle graph.
    pub fn can_transition(self, to: EnvState) -> bool {
        use EnvState::*;
        matches!(
            (self, to),
            (Registered | Stopped, Starting)
                | (Starting, Healthy | Unhealthy)
                | (Healthy, Resetting | Stopped | Unhealthy)
                | (Resetting, Healthy | Unhealthy)
                | (Unhealthy, Healthy | Stopped)
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EnvState::Registered => "registered",
            EnvState::Starting => "starting",
            EnvState::Healthy => "healthy",
            EnvState::Unhealthy => "unhealthy",
            EnvState::Resetting => "resetting",
            EnvState::Stopped => "stopped",
        }
    }
}

impl std::fmt::Display for EnvState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvStatus {
    pub env_id: String,
    pub state: EnvState,
    /// Digest of the database state, refreshed on every entry into `healthy`.
    pub state_hash: Option<String>,
    pub last_transition: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: EnvState,
    pub to: EnvState,
    pub at: DateTime<Utc>,
}

/// Replay a transition log and return the first edge the graph forbids.
pub fn first_illegal(initial: EnvState, log: &[Transition]) -> Option<(usize, EnvState, EnvState)> {
    let mut cur = initial;
    for (i, t) in log.iter().enumerate() {
        if t.from != cur || !cur.can_transition(t.to) {
            return Some((i, t.from, t.to));
        }
        cur = t.to;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use EnvState::*;

    #[test]
    fn core_edges() {
        assert!(Registered.can_transition(Starting));
        assert!(Starting.can_transition(Healthy));
        assert!(Starting.can_transition(Unhealthy));
        assert!(Healthy.can_transition(Resetting));
        assert!(Healthy.can_transition(Stopped));
        assert!(Resetting.can_transition(Healthy));
        assert!(Resetting.can_transition(Unhealthy));
    }

    #[test]
    fn forbidden_edges() {
        assert!(!Registered.can_transition(Healthy));
        assert!(!Stopped.can_transition(Resetting));
        assert!(!Resetting.can_transition(Stopped));
        assert!(!Unhealthy.can_transition(Resetting));
        for s in EnvState::ALL {
            assert!(!s.can_transition(s), "{s} self-loop");
            assert!(!s.can_transition(Registered));
        }
    }

    #[test]
    fn replay_finds_bad_edge() {
        let now = Utc::now();
        let t = |from, to| Transition { from, to, at: now };
        let log = vec![t(Registered, Starting), t(Starting, Healthy), t(Healthy, Resetting)];
        assert_eq!(first_illegal(Registered, &log), None);
        let log = vec![t(Registered, Starting), t(Starting, Resetting)];
        assert_eq!(first_illegal(Registered, &log), Some((1, Starting, Resetting)));
    }
}
