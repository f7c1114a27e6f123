//! Built-in reference website: a seeded listing catalog with accounts,
//! favorites and a contact form.
//!
//! Three faces share one [`Site`]: rendered pages for agents
//! ([`page`], [`browser`]), the validator-only state-access interface
//! ([`sdk`]), and an HTTP server exposing both ([`server`]).

pub mod browser;
pub mod data;
pub mod page;
pub mod sdk;
pub mod server;

use std::sync::{Arc, Mutex};

pub use browser::{Browser, BrowserAction, InvalidElement, StepOutcome};
pub use data::{populate, Database};
pub use page::{Element, PageSnapshot, Role};
pub use sdk::{SdkCall, SdkError};

use crate::canonical::StateDump;

/// A running instance: database plus the single active browser session.
#[derive(Debug, Clone)]
pub struct Site {
    db: Database,
    browser: Browser,
}

pub type SharedSite = Arc<Mutex<Site>>;

impl Site {
    pub fn new(seed: u64) -> Self {
        let db = populate(seed);
        let browser = Browser::open(&db);
        Self { db, browser }
    }

    pub fn shared(seed: u64) -> SharedSite {
        Arc::new(Mutex::new(Self::new(seed)))
    }

    pub fn seed(&self) -> u64 {
        self.db.seed
    }

    pub fn db(&self) -> &Database {
        &self.db
    }

    /// Direct database access, bypassing the browser. Test and tooling use only.
    pub fn db_mut(&mut self) -> &mut Database {
        &mut self.db
    }

    /// Restore the seeded initial state and drop the browser session.
    pub fn reset(&mut self) {
        self.reseed(self.db.seed);
    }

    /// Repopulate from a different seed.
    pub fn reseed(&mut self, seed: u64) {
        self.db = populate(seed);
        self.browser = Browser::open(&self.db);
    }

    /// Start a fresh browser session on the home page. Database untouched.
    pub fn begin_episode(&mut self) -> PageSnapshot {
        self.browser = Browser::open(&self.db);
        self.browser.snapshot().clone()
    }

    pub fn snapshot(&self) -> &PageSnapshot {
        self.browser.snapshot()
    }

    pub fn navigate(&mut self, url: &str) -> PageSnapshot {
        self.browser.navigate(&self.db, url).clone()
    }

    pub fn act(&mut self, action: &BrowserAction) -> Result<StepOutcome, InvalidElement> {
        self.browser.apply(&mut self.db, action)
    }

    pub fn sdk(&self, call: &SdkCall) -> Result<String, SdkError> {
        sdk::query(&self.db, call)
    }

    pub fn dump(&self) -> StateDump {
        self.db.dump()
    }

    pub fn state_hash(&self) -> String {
        self.db.state_hash()
    }
}
