//! Judge documents: types, validation and parsing.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use super::normalize::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckOp {
    ExactMatch,
    MustInclude,
    FuzzyMatch,
    MustIncludeAll,
}

impl CheckOp {
    pub const ALL: [CheckOp; 4] = [
        CheckOp::ExactMatch,
        CheckOp::MustInclude,
        CheckOp::FuzzyMatch,
        CheckOp::MustIncludeAll,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckOp::ExactMatch => "exact_match",
            CheckOp::MustInclude => "must_include",
            CheckOp::FuzzyMatch => "fuzzy_match",
            CheckOp::MustIncludeAll => "must_include_all",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.as_str() == name)
    }
}

impl fmt::Display for CheckOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalType {
    Rinfo,
    Rprog,
}

/// How an `rinfo` answer is read before checking. Serialized as `"json"` or `null`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum ParseMode {
    Json,
    #[default]
    None,
}

impl Serialize for ParseMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ParseMode::Json => s.serialize_str("json"),
            ParseMode::None => s.serialize_none(),
        }
    }
}

impl<'de> Deserialize<'de> for ParseMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Option::<String>::deserialize(d)?.as_deref() {
            None => Ok(ParseMode::None),
            Some("json") => Ok(ParseMode::Json),
            Some(other) => Err(serde::de::Error::custom(format!(
                "unknown parse mode `{other}`"
            ))),
        }
    }
}

/// Expected value of a check: a single string, or a list for `must_include_all`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Expected {
    One(String),
    All(Vec<String>),
}

impl Expected {
    pub fn values(&self) -> Vec<&str> {
        match self {
            Expected::One(s) => vec![s.as_str()],
            Expected::All(v) => v.iter().map(String::as_str).collect(),
        }
    }

    pub fn map(&self, mut f: impl FnMut(&str) -> String) -> Expected {
        match self {
            Expected::One(s) => Expected::One(f(s)),
            Expected::All(v) => Expected::All(v.iter().map(|s| f(s)).collect()),
        }
    }

    pub fn try_map<E>(&self, mut f: impl FnMut(&str) -> Result<String, E>) -> Result<Expected, E> {
        Ok(match self {
            Expected::One(s) => Expected::One(f(s)?),
            Expected::All(v) => Expected::All(v.iter().map(|s| f(s)).collect::<Result<_, _>>()?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Check {
    pub op: CheckOp,
    pub expected: Expected,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JudgeSpec {
    pub eval_type: EvalType,
    #[serde(default)]
    pub parse: ParseMode,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}: {reason}")]
pub struct SchemaError {
    /// Location of the offending field, e.g. `checks[2].expected`.
    pub path: String,
    pub reason: String,
}

impl SchemaError {
    fn new(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub fn is_valid_path(path: &str) -> bool {
    !path.is_empty()
        && path.split('.').all(|seg| {
            !seg.is_empty() && seg.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        })
}

impl Check {
    fn validate(&self, at: &str) -> Result<(), SchemaError> {
        match (&self.op, &self.expected) {
            (CheckOp::MustIncludeAll, Expected::One(_)) => {
                return Err(SchemaError::new(
                    format!("{at}.expected"),
                    "must_include_all requires a list",
                ))
            }
            (CheckOp::MustIncludeAll, Expected::All(v)) if v.is_empty() => {
                return Err(SchemaError::new(format!("{at}.expected"), "empty list"))
            }
            (op, Expected::All(_)) if *op != CheckOp::MustIncludeAll => {
                return Err(SchemaError::new(
                    format!("{at}.expected"),
                    format!("list expected is only allowed for must_include_all, not {op}"),
                ))
            }
            _ => {}
        }
        match &self.expected {
            Expected::One(s) if normalize(s).is_empty() => {
                return Err(SchemaError::new(
                    format!("{at}.expected"),
                    "empty after normalization",
                ))
            }
            Expected::All(v) => {
                if let Some(i) = v.iter().position(|s| normalize(s).is_empty()) {
                    return Err(SchemaError::new(
                        format!("{at}.expected[{i}]"),
                        "empty after normalization",
                    ));
                }
            }
            _ => {}
        }
        if let Some(p) = &self.path {
            if !is_valid_path(p) {
                return Err(SchemaError::new(
                    format!("{at}.path"),
                    format!("invalid path `{p}`"),
                ));
            }
        }
        Ok(())
    }
}

impl JudgeSpec {
    /// Check every schema invariant.
    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.checks.is_empty() {
            return Err(SchemaError::new("checks", "empty checks"));
        }
        if self.eval_type == EvalType::Rprog && self.parse == ParseMode::Json {
            return Err(SchemaError::new("parse", "json parse on rprog"));
        }
        for (i, check) in self.checks.iter().enumerate() {
            let at = format!("checks[{i}]");
            check.validate(&at)?;
            if check.path.is_some()
                && self.eval_type == EvalType::Rinfo
                && self.parse != ParseMode::Json
            {
                return Err(SchemaError::new(
                    format!("{at}.path"),
                    "path on rinfo check requires parse = json",
                ));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("judge spec serializes")
    }
}

/// Parse and validate a judge document.
pub fn parse_judge(raw: &str) -> Result<JudgeSpec, SchemaError> {
    let value: Value =
        serde_json::from_str(raw).map_err(|e| SchemaError::new("$", format!("malformed JSON: {e}")))?;
    judge_from_value(&value)
}

/// Validate a judge that is already a JSON value (e.g. embedded in a task record).
pub fn judge_from_value(value: &Value) -> Result<JudgeSpec, SchemaError> {
    let obj = value
        .as_object()
        .ok_or_else(|| SchemaError::new("$", "judge must be an object"))?;
    reject_unknown(obj, &["eval_type", "parse", "checks"], "")?;

    let eval_type = match obj.get("eval_type") {
        Some(Value::String(s)) if s == "rinfo" => EvalType::Rinfo,
        Some(Value::String(s)) if s == "rprog" => EvalType::Rprog,
        Some(Value::String(s)) => {
            return Err(SchemaError::new("eval_type", format!("unknown eval_type `{s}`")))
        }
        Some(_) => return Err(SchemaError::new("eval_type", "must be a string")),
        None => return Err(SchemaError::new("eval_type", "missing")),
    };
    let parse = match obj.get("parse") {
        None | Some(Value::Null) => ParseMode::None,
        Some(Value::String(s)) if s == "json" => ParseMode::Json,
        Some(other) => {
            return Err(SchemaError::new(
                "parse",
                format!("must be \"json\" or null, got {other}"),
            ))
        }
    };
    let raw_checks = match obj.get("checks") {
        Some(Value::Array(a)) => a,
        Some(_) => return Err(SchemaError::new("checks", "must be an array")),
        None => return Err(SchemaError::new("checks", "missing")),
    };

    let mut checks = Vec::with_capacity(raw_checks.len());
    for (i, raw) in raw_checks.iter().enumerate() {
        checks.push(check_from_value(raw, &format!("checks[{i}]"))?);
    }

    let spec = JudgeSpec {
        eval_type,
        parse,
        checks,
    };
    spec.validate()?;
    Ok(spec)
}

fn check_from_value(value: &Value, at: &str) -> Result<Check, SchemaError> {
    let obj = value
        .as_object()
        .ok_or_else(|| SchemaError::new(at, "check must be an object"))?;
    reject_unknown(obj, &["op", "expected", "path"], at)?;

    let op = match obj.get("op") {
        Some(Value::String(s)) => CheckOp::from_name(s)
            .ok_or_else(|| SchemaError::new(format!("{at}.op"), format!("unknown op `{s}`")))?,
        Some(_) => return Err(SchemaError::new(format!("{at}.op"), "must be a string")),
        None => return Err(SchemaError::new(format!("{at}.op"), "missing")),
    };
    let expected = match obj.get("expected") {
        Some(Value::String(s)) => Expected::One(s.clone()),
        Some(Value::Array(items)) => {
            let mut out = Vec::with_capacity(items.len());
            for (j, item) in items.iter().enumerate() {
                match item {
                    Value::String(s) => out.push(s.clone()),
                    _ => {
                        return Err(SchemaError::new(
                            format!("{at}.expected[{j}]"),
                            "must be a string",
                        ))
                    }
                }
            }
            Expected::All(out)
        }
        Some(_) => {
            return Err(SchemaError::new(
                format!("{at}.expected"),
                "must be a string or a list of strings",
            ))
        }
        None => return Err(SchemaError::new(format!("{at}.expected"), "missing")),
    };
    let path = match obj.get("path") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(SchemaError::new(format!("{at}.path"), "must be a string")),
    };

    let check = Check { op, expected, path };
    check.validate(at)?;
    Ok(check)
}

fn reject_unknown(obj: &Map<String, Value>, known: &[&str], at: &str) -> Result<(), SchemaError> {
    for key in obj.keys() {
        if !known.contains(&key.as_str()) {
            let path = if at.is_empty() {
                key.clone()
            } else {
                format!("{at}.{key}")
            };
            return Err(SchemaError::new(path, "unknown field"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_table_row() {
        let spec = parse_judge(
            r#"{"eval_type":"rinfo","parse":null,"checks":[{"op":"must_include","expected":"MSFT"}]}"#,
        )
        .unwrap();
        assert_eq!(spec.eval_type, EvalType::Rinfo);
        assert_eq!(spec.parse, ParseMode::None);
        assert_eq!(spec.checks.len(), 1);
        assert_eq!(spec.checks[0].expected, Expected::One("MSFT".into()));
    }

    #[test]
    fn empty_checks_rejected() {
        let err = parse_judge(r#"{"eval_type":"rinfo","parse":null,"checks":[]}"#).unwrap_err();
        assert_eq!(err.path, "checks");
        assert!(err.reason.contains("empty"));
    }

    #[test]
    fn json_on_rprog_rejected() {
        let err = parse_judge(
            r#"{"eval_type":"rprog","parse":"json","checks":[{"op":"exact_match","expected":"/x","path":"url"}]}"#,
        )
        .unwrap_err();
        assert_eq!(err.path, "parse");
    }

    #[test]
    fn unknown_op_reports_path() {
        let err = parse_judge(
            r#"{"eval_type":"rinfo","checks":[{"op":"must_include","expected":"a"},{"op":"regex","expected":"b"}]}"#,
        )
        .unwrap_err();
        assert_eq!(err.path, "checks[1].op");
    }

    #[test]
    fn unknown_eval_type() {
        let err = parse_judge(r#"{"eval_type":"llm","checks":[]}"#).unwrap_err();
        assert_eq!(err.path, "eval_type");
    }

    #[test]
    fn list_only_for_include_all() {
        let err = parse_judge(
            r#"{"eval_type":"rinfo","checks":[{"op":"must_include","expected":["a","b"]}]}"#,
        )
        .unwrap_err();
        assert_eq!(err.path, "checks[0].expected");

        let err = parse_judge(
            r#"{"eval_type":"rinfo","checks":[{"op":"must_include_all","expected":"a"}]}"#,
        )
        .unwrap_err();
        assert_eq!(err.path, "checks[0].expected");

        let err = parse_judge(
            r#"{"eval_type":"rinfo","checks":[{"op":"must_include_all","expected":[]}]}"#,
        )
        .unwrap_err();
        assert_eq!(err.path, "checks[0].expected");
    }

    #[test]
    fn blank_expected_rejected() {
        let err = parse_judge(
            r#"{"eval_type":"rinfo","checks":[{"op":"must_include_all","expected":["a","  $ "]}]}"#,
        )
        .unwrap_err();
        assert_eq!(err.path, "checks[0].expected[1]");
    }

    #[test]
    fn path_rules() {
        let err = parse_judge(
            r#"{"eval_type":"rinfo","checks":[{"op":"must_include","expected":"a","path":"name"}]}"#,
        )
        .unwrap_err();
        assert_eq!(err.path, "checks[0].path");

        let err = parse_judge(
            r#"{"eval_type":"rinfo","parse":"json","checks":[{"op":"must_include","expected":"a","path":"a..b"}]}"#,
        )
        .unwrap_err();
        assert_eq!(err.path, "checks[0].path");

        assert!(parse_judge(
            r#"{"eval_type":"rprog","checks":[{"op":"exact_match","expected":"1","path":"state.favorites_count"}]}"#,
        )
        .is_ok());
    }

    #[test]
    fn unknown_field_rejected() {
        let err = parse_judge(
            r#"{"eval_type":"rinfo","checks":[{"op":"must_include","expected":"a","weight":2}]}"#,
        )
        .unwrap_err();
        assert_eq!(err.path, "checks[0].weight");
    }

    #[test]
    fn check_order_preserved_and_round_trips() {
        let raw = r#"{"eval_type":"rinfo","parse":null,"checks":[{"op":"must_include","expected":"SPX"},{"op":"fuzzy_match","expected":"3746.49"}]}"#;
        let spec = parse_judge(raw).unwrap();
        assert_eq!(spec.checks[0].op, CheckOp::MustInclude);
        assert_eq!(spec.checks[1].op, CheckOp::FuzzyMatch);
        assert_eq!(spec.to_json(), raw);
        assert_eq!(parse_judge(&spec.to_json()).unwrap(), spec);
    }
}
