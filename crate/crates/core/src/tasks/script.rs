//! Label-addressed browser steps. Element ids change from page to page, so
//! scripted solutions name elements by role and label and are resolved
//! against the live snapshot.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::template::substitute;
use crate::site::{BrowserAction, PageSnapshot, Role};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum ScriptStep {
    Navigate {
        url: String,
    },
    Click {
        label: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        role: Option<Role>,
    },
    Type {
        label: String,
        text: String,
    },
    Submit {
        label: String,
    },
}

const CLICKABLE: [Role; 3] = [Role::Button, Role::Link, Role::Option];

impl ScriptStep {
    /// Fill placeholders from validation bindings.
    pub fn bind(&self, bindings: &BTreeMap<String, Value>) -> Result<ScriptStep, String> {
        let s = |t: &str| substitute(t, bindings);
        Ok(match self {
            ScriptStep::Navigate { url } => ScriptStep::Navigate { url: s(url)? },
            ScriptStep::Click { label, role } => ScriptStep::Click {
                label: s(label)?,
                role: *role,
            },
            ScriptStep::Type { label, text } => ScriptStep::Type {
                label: s(label)?,
                text: s(text)?,
            },
            ScriptStep::Submit { label } => ScriptStep::Submit { label: s(label)? },
        })
    }

    /// Concrete action on this page, or `None` if the element is absent.
    pub fn resolve(&self, page: &PageSnapshot) -> Option<BrowserAction> {
        let find = |roles: &[Role], label: &str| {
            roles
                .iter()
                .find_map(|r| page.find(*r, label))
                .map(|e| e.element_id)
        };
        match self {
            ScriptStep::Navigate { url } => Some(BrowserAction::Navigate { url: url.clone() }),
            ScriptStep::Click { label, role } => {
                let roles = role.map(|r| vec![r]).unwrap_or_else(|| CLICKABLE.to_vec());
                find(&roles, label).map(|element_id| BrowserAction::Click { element_id })
            }
            ScriptStep::Type { label, text } => find(&[Role::Textbox], label).map(|element_id| BrowserAction::Type {
                element_id,
                text: text.clone(),
            }),
            ScriptStep::Submit { label } => {
                find(&[Role::Button, Role::Textbox], label).map(|element_id| BrowserAction::Submit { element_id })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::site::Site;

    #[test]
    fn resolves_by_label() {
        let mut site = Site::new(42);
        let page = site.navigate("/login");
        let click = ScriptStep::Click {
            label: "Log in".into(),
            role: None,
        };
        let action = click.resolve(&page).unwrap();
        let id = page.find(Role::Button, "Log in").unwrap().element_id;
        assert_eq!(action, BrowserAction::Click { element_id: id });
        let link = ScriptStep::Click {
            label: "Log in".into(),
            role: Some(Role::Link),
        };
        assert_ne!(link.resolve(&page), Some(action));
        let missing = ScriptStep::Type {
            label: "Email".into(),
            text: "x".into(),
        };
        assert_eq!(missing.resolve(&page), None);
    }

    #[test]
    fn json_shape() {
        let s: ScriptStep = serde_json::from_str(r#"{"step":"click","label":"Add to favorites"}"#).unwrap();
        assert_eq!(
            s,
            ScriptStep::Click {
                label: "Add to favorites".into(),
                role: None
            }
        );
    }
}
