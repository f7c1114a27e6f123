//! Browser actions against the reference site.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::data::Database;
use super::page::{render, Form, Page, PageSnapshot, Role, SessionView, Target};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum BrowserAction {
    Navigate { url: String },
    Click { element_id: u32 },
    Type { element_id: u32, text: String },
    Submit { element_id: u32 },
    Answer { text: String },
}

impl BrowserAction {
    pub fn is_answer(&self) -> bool {
        matches!(self, BrowserAction::Answer { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum StepOutcome {
    Page { page: PageSnapshot },
    Answer { text: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("invalid element {element_id}: {reason}")]
pub struct InvalidElement {
    pub element_id: u32,
    pub reason: String,
}

/// One agent's browsing session: current page, login token, form contents.
#[derive(Debug, Clone)]
pub struct Browser {
    token: Option<String>,
    fields: BTreeMap<String, String>,
    flash: Option<String>,
    page: Page,
}

impl Browser {
    /// Fresh browser on the home page.
    pub fn open(db: &Database) -> Self {
        Self {
            token: None,
            fields: BTreeMap::new(),
            flash: None,
            page: render(db, "/", &SessionView::default()),
        }
    }

    pub fn snapshot(&self) -> &PageSnapshot {
        &self.page.snapshot
    }

    pub fn url(&self) -> &str {
        &self.page.snapshot.url
    }

    pub fn session_token(&self) -> Option<&str> {
        self.token.as_deref()
    }

    fn rerender(&mut self, db: &Database, url: &str) {
        let view = SessionView {
            token: self.token.as_deref(),
            fields: Some(&self.fields),
            flash: self.flash.as_deref(),
        };
        self.page = render(db, url, &view);
    }

    /// Navigate to a URL, discarding form state.
    pub fn navigate(&mut self, db: &Database, url: &str) -> &PageSnapshot {
        self.fields.clear();
        self.flash = None;
        self.rerender(db, url);
        &self.page.snapshot
    }

    /// Apply an action. An invalid element leaves the page untouched.
    pub fn apply(&mut self, db: &mut Database, action: &BrowserAction) -> Result<StepOutcome, InvalidElement> {
        match action {
            BrowserAction::Answer { text } => {
                return Ok(StepOutcome::Answer { text: text.clone() });
            }
            BrowserAction::Navigate { url } => {
                self.navigate(db, url);
            }
            BrowserAction::Click { element_id } => {
                let (role, target) = self.lookup(*element_id)?;
                match (role, target) {
                    (Role::Link | Role::Option, Target::Href(href)) => {
                        self.navigate(db, &href);
                    }
                    (Role::Button, target) => self.press(db, target),
                    (role, _) => return Err(invalid(*element_id, format!("cannot click a {role:?}"))),
                }
            }
            BrowserAction::Type { element_id, text } => {
                let (role, target) = self.lookup(*element_id)?;
                match (role, target) {
                    (Role::Textbox, Target::Field(form, field)) => {
                        self.fields.insert(form.field_key(field), text.clone());
                        let url = self.url().to_string();
                        self.rerender(db, &url);
                    }
                    (role, _) => return Err(invalid(*element_id, format!("cannot type into a {role:?}"))),
                }
            }
            BrowserAction::Submit { element_id } => {
                let (role, target) = self.lookup(*element_id)?;
                match (role, target) {
                    (Role::Textbox, Target::Field(form, _)) => self.submit(db, form),
                    (Role::Button, target) => self.press(db, target),
                    (role, _) => return Err(invalid(*element_id, format!("cannot submit a {role:?}"))),
                }
            }
        }
        Ok(StepOutcome::Page {
            page: self.page.snapshot.clone(),
        })
    }

    fn lookup(&self, element_id: u32) -> Result<(Role, Target), InvalidElement> {
        self.page
            .target(element_id)
            .map(|(e, t)| (e.role, t.clone()))
            .ok_or_else(|| invalid(element_id, "no such element".to_string()))
    }

    fn press(&mut self, db: &mut Database, target: Target) {
        match target {
            Target::ToggleFavorite(id) => {
                if let Some(token) = self.token.clone() {
                    db.toggle_favorite(&token, id);
                }
                let url = self.url().to_string();
                self.rerender(db, &url);
            }
            Target::Submit(form) => self.submit(db, form),
            _ => {}
        }
    }

    fn field(&self, form: Form, name: &str) -> String {
        self.fields.get(&form.field_key(name)).cloned().unwrap_or_default()
    }

    fn submit(&mut self, db: &mut Database, form: Form) {
        match form {
            Form::Login => {
                let user = self.field(form, "username");
                let pass = self.field(form, "password");
                match db.login(&user, &pass) {
                    Some(token) => {
                        self.token = Some(token);
                        self.navigate(db, "/");
                        self.flash = Some(format!("Welcome back, {user}"));
                        self.rerender(db, "/");
                    }
                    None => {
                        self.fields.clear();
                        self.flash = Some("invalid credentials".to_string());
                        self.rerender(db, "/login");
                    }
                }
            }
            Form::Signup => {
                let user = self.field(form, "username");
                let pass = self.field(form, "password");
                match db.sign_up(&user, &pass) {
                    Ok(token) => {
                        self.token = Some(token);
                        self.navigate(db, "/");
                        self.flash = Some(format!("Welcome, {user}"));
                        self.rerender(db, "/");
                    }
                    Err(reason) => {
                        self.fields.clear();
                        self.flash = Some(reason.to_string());
                        self.rerender(db, "/signup");
                    }
                }
            }
            Form::Contact => {
                let name = self.field(form, "name");
                let message = self.field(form, "message");
                self.fields.clear();
                if message.trim().is_empty() {
                    self.flash = Some("message required".to_string());
                } else {
                    let username = self
                        .token
                        .as_deref()
                        .and_then(|t| db.user_by_token(t))
                        .map(|u| u.username.clone());
                    db.add_contact_message(&name, &message, username);
                    self.flash = Some("Message sent".to_string());
                }
                self.rerender(db, "/contact");
            }
        }
    }
}

fn invalid(element_id: u32, reason: String) -> InvalidElement {
    InvalidElement { element_id, reason }
}
