//! `{binding.path}` placeholders in judge templates and solution scripts.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;

use crate::judge::{stringify, JudgeSpec};

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*)((?:\.[A-Za-z0-9_]+)*)\}").expect("valid regex"))
}

/// Binding names referenced by a string.
pub fn placeholders(text: &str) -> BTreeSet<String> {
    placeholder_re()
        .captures_iter(text)
        .map(|c| c[1].to_string())
        .collect()
}

pub fn has_placeholder(text: &str) -> bool {
    placeholder_re().is_match(text)
}

/// Every binding name used anywhere in a judge's expected values.
pub fn judge_placeholders(spec: &JudgeSpec) -> BTreeSet<String> {
    spec.checks
        .iter()
        .flat_map(|c| c.expected.values())
        .flat_map(placeholders)
        .collect()
}

/// SDK results as JSON when they parse, else as plain strings.
pub fn binding_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Walk a dotted path. Numeric segments index arrays; a name applied to an
/// array reads the field of its first element.
fn walk<'a>(mut cur: &'a Value, segments: &[&str]) -> Option<&'a Value> {
    for seg in segments {
        cur = match cur {
            Value::Object(map) => map.get(*seg)?,
            Value::Array(items) => match seg.parse::<usize>() {
                Ok(i) => items.get(i)?,
                Err(_) => items.first()?.as_object()?.get(*seg)?,
            },
            _ => return None,
        };
    }
    Some(cur)
}

/// Substitute every placeholder or report the first unresolvable one.
pub fn substitute(text: &str, bindings: &BTreeMap<String, Value>) -> Result<String, String> {
    let mut err = None;
    let out = placeholder_re().replace_all(text, |c: &regex::Captures<'_>| {
        let name = &c[1];
        let segments: Vec<&str> = c[2].split('.').filter(|s| !s.is_empty()).collect();
        match bindings.get(name).and_then(|v| walk(v, &segments)) {
            Some(v) => stringify(v),
            None => {
                err.get_or_insert_with(|| format!("placeholder {} does not resolve", &c[0]));
                String::new()
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out.into_owned()),
    }
}

pub fn instantiate(template: &JudgeSpec, bindings: &BTreeMap<String, Value>) -> Result<JudgeSpec, String> {
    let mut spec = template.clone();
    for check in &mut spec.checks {
        check.expected = check.expected.try_map(|v| substitute(v, bindings))?;
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judge::parse_judge;
    use serde_json::json;

    fn bindings() -> BTreeMap<String, Value> {
        let mut b = BTreeMap::new();
        b.insert("first".into(), json!([{"name": "Reed-Hill Apartments", "price": "2938.17"}, {"name": "B"}]));
        b.insert("n".into(), binding_value("12"));
        b.insert("word".into(), binding_value("plain text"));
        b
    }

    #[test]
    fn paths() {
        let b = bindings();
        assert_eq!(substitute("{first.name}", &b).unwrap(), "Reed-Hill Apartments");
        assert_eq!(substitute("{first.1.name}", &b).unwrap(), "B");
        assert_eq!(substitute("{first.0.price} / {n}", &b).unwrap(), "2938.17 / 12");
        assert_eq!(substitute("{word}", &b).unwrap(), "plain text");
        assert!(substitute("{first.2.name}", &b).is_err());
        assert!(substitute("{missing}", &b).is_err());
        assert_eq!(substitute("no braces", &b).unwrap(), "no braces");
    }

    #[test]
    fn instantiate_closes_all_placeholders() {
        let t = parse_judge(
            r#"{"eval_type":"rinfo","parse":null,"checks":[
                {"op":"must_include","expected":"{first.name}"},
                {"op":"must_include_all","expected":["{first.price}","{n}"]}]}"#,
        )
        .unwrap();
        assert_eq!(
            judge_placeholders(&t),
            ["first", "n"].into_iter().map(String::from).collect()
        );
        let j = instantiate(&t, &bindings()).unwrap();
        assert!(judge_placeholders(&j).is_empty());
        assert_eq!(j.checks[1].expected.values(), vec!["2938.17", "12"]);
    }
}
