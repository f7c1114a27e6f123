//! Uniform access to a running environment, in-process or over HTTP.

use std::time::Duration;

use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::canonical::StateDump;
use crate::site::{BrowserAction, InvalidElement, PageSnapshot, SdkCall, SdkError, SharedSite, StepOutcome};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActError {
    #[error(transparent)]
    InvalidElement(#[from] InvalidElement),
    #[error("environment unavailable: {0}")]
    Unavailable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("environment unavailable: {0}")]
pub struct Unavailable(pub String);

/// The faces of an environment the harness needs: an agent-facing browser
/// session and the validator-facing state access.
pub trait Environment: Send + Sync {
    /// Open a fresh browser session on `/`. Database state is left alone.
    fn begin_episode(&self) -> Result<PageSnapshot, Unavailable>;

    fn act(&self, action: &BrowserAction) -> Result<StepOutcome, ActError>;

    fn sdk(&self, call: &SdkCall) -> Result<String, SdkError>;

    fn state(&self) -> Result<StateDump, Unavailable>;

    /// Restore the initial seeded database.
    fn reset(&self) -> Result<(), Unavailable>;
}

fn lock(site: &SharedSite) -> std::sync::MutexGuard<'_, crate::site::Site> {
    site.lock().unwrap_or_else(|p| p.into_inner())
}

impl Environment for SharedSite {
    fn begin_episode(&self) -> Result<PageSnapshot, Unavailable> {
        Ok(lock(self).begin_episode())
    }

    fn act(&self, action: &BrowserAction) -> Result<StepOutcome, ActError> {
        Ok(lock(self).act(action)?)
    }

    fn sdk(&self, call: &SdkCall) -> Result<String, SdkError> {
        lock(self).sdk(call)
    }

    fn state(&self) -> Result<StateDump, Unavailable> {
        Ok(lock(self).dump())
    }

    fn reset(&self) -> Result<(), Unavailable> {
        lock(self).reset();
        Ok(())
    }
}

/// Client for an environment that speaks the reference site's HTTP protocol.
#[derive(Debug, Clone)]
pub struct RemoteEnv {
    base: String,
    agent: ureq::Agent,
}

impl RemoteEnv {
    pub fn new(port: u16) -> Self {
        Self::with_base(format!("http://127.0.0.1:{port}"))
    }

    pub fn with_base(base: impl Into<String>) -> Self {
        Self {
            base: base.into(),
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(30))
                .build(),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }
}

/// Map any non-2xx response to its body, transport failures to `Unavailable`.
fn body_of(result: Result<ureq::Response, ureq::Error>) -> Result<(u16, String), Unavailable> {
    match result {
        Ok(resp) => {
            let status = resp.status();
            resp.into_string().map(|b| (status, b)).map_err(|e| Unavailable(e.to_string()))
        }
        Err(ureq::Error::Status(status, resp)) => {
            resp.into_string().map(|b| (status, b)).map_err(|e| Unavailable(e.to_string()))
        }
        Err(e) => Err(Unavailable(e.to_string())),
    }
}

#[derive(Deserialize)]
struct ErrorBody<T> {
    error: T,
}

impl Environment for RemoteEnv {
    fn begin_episode(&self) -> Result<PageSnapshot, Unavailable> {
        let (_, body) = body_of(self.agent.post(&self.url("/episode")).call())?;
        serde_json::from_str(&body).map_err(|e| Unavailable(format!("bad snapshot: {e}")))
    }

    fn act(&self, action: &BrowserAction) -> Result<StepOutcome, ActError> {
        let payload = serde_json::to_string(action).expect("action serializes");
        let (status, body) = body_of(
            self.agent
                .post(&self.url("/action"))
                .set("Content-Type", "application/json")
                .send_string(&payload),
        )
        .map_err(|e| ActError::Unavailable(e.0))?;
        match status {
            200 => serde_json::from_str(&body).map_err(|e| ActError::Unavailable(format!("bad outcome: {e}"))),
            422 => match serde_json::from_str::<ErrorBody<InvalidElement>>(&body) {
                Ok(b) => Err(ActError::InvalidElement(b.error)),
                Err(e) => Err(ActError::Unavailable(format!("bad error body: {e}"))),
            },
            s => Err(ActError::Unavailable(format!("HTTP {s}: {body}"))),
        }
    }

    fn sdk(&self, call: &SdkCall) -> Result<String, SdkError> {
        let args = serde_json::to_string(&call.args).expect("args serialize");
        let (status, body) = body_of(
            self.agent
                .get(&self.url("/sdk"))
                .query("call", &call.name)
                .query("args", &args)
                .call(),
        )
        .map_err(|e| SdkError::Unavailable(e.0))?;
        match status {
            200 => serde_json::from_str::<Value>(&body)
                .ok()
                .and_then(|v| v.get("result").and_then(Value::as_str).map(str::to_string))
                .ok_or_else(|| SdkError::Unavailable(format!("bad SDK body: {body}"))),
            422 => match serde_json::from_str::<ErrorBody<SdkError>>(&body) {
                Ok(b) => Err(b.error),
                Err(e) => Err(SdkError::Unavailable(format!("bad error body: {e}"))),
            },
            s => Err(SdkError::Unavailable(format!("HTTP {s}: {body}"))),
        }
    }

    fn state(&self) -> Result<StateDump, Unavailable> {
        let (status, body) = body_of(self.agent.get(&self.url("/state")).call())?;
        if status != 200 {
            return Err(Unavailable(format!("HTTP {status} from /state")));
        }
        serde_json::from_str(&body).map_err(|e| Unavailable(format!("bad state dump: {e}")))
    }

    fn reset(&self) -> Result<(), Unavailable> {
        let (status, body) = body_of(self.agent.post(&self.url("/reset")).call())?;
        if status != 200 {
            return Err(Unavailable(format!("HTTP {status} from /reset: {body}")));
        }
        Ok(())
    }
}
