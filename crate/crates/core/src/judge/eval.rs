//! Deterministic judge evaluation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::fuzzy::{best_window, window_text, FuzzyConfig};
use super::normalize::normalize;
use super::spec::{Check, CheckOp, EvalType, Expected, JudgeSpec, ParseMode};

/// Terminal state handed to `rprog` judges.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeDocument {
    pub terminal_url: String,
    #[serde(default)]
    pub state_fields: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub pass: bool,
    pub evidence: String,
}

impl CheckOutcome {
    fn fail() -> Self {
        Self {
            pass: false,
            evidence: String::new(),
        }
    }

    fn pass(evidence: impl Into<String>) -> Self {
        Self {
            pass: true,
            evidence: evidence.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub index: usize,
    pub pass: bool,
    pub evidence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub reward: u8,
    pub per_check: Vec<CheckResult>,
}

impl JudgeVerdict {
    fn from_outcomes(outcomes: Vec<CheckOutcome>) -> Self {
        let reward = u8::from(outcomes.iter().all(|o| o.pass));
        let per_check = outcomes
            .into_iter()
            .enumerate()
            .map(|(index, o)| CheckResult {
                index,
                pass: o.pass,
                evidence: o.evidence,
            })
            .collect();
        Self { reward, per_check }
    }

    /// Verdict with every check failed.
    pub fn all_failed(spec: &JudgeSpec) -> Self {
        Self::from_outcomes(spec.checks.iter().map(|_| CheckOutcome::fail()).collect())
    }
}

/// Evaluate one check against an already-normalized target.
pub fn eval_check(check: &Check, target: &str) -> CheckOutcome {
    eval_check_with(check, target, &FuzzyConfig::default())
}

pub fn eval_check_with(check: &Check, target: &str, fuzzy: &FuzzyConfig) -> CheckOutcome {
    match (&check.op, &check.expected) {
        (CheckOp::MustIncludeAll, expected) => {
            let mut matched = Vec::new();
            for value in expected.values() {
                let needle = normalize(value);
                if !target.contains(&needle) {
                    return CheckOutcome::fail();
                }
                matched.push(needle);
            }
            CheckOutcome::pass(matched.join(", "))
        }
        (op, Expected::One(value)) => {
            let needle = normalize(value);
            match op {
                CheckOp::ExactMatch if needle == target => CheckOutcome::pass(needle),
                CheckOp::MustInclude if target.contains(&needle) => CheckOutcome::pass(needle),
                CheckOp::FuzzyMatch => match best_window(&needle, target, fuzzy.window_slack_pct) {
                    Some(w) if w.passes(fuzzy.threshold_pct) => {
                        CheckOutcome::pass(window_text(target, &w))
                    }
                    _ => CheckOutcome::fail(),
                },
                _ => CheckOutcome::fail(),
            }
        }
        // lists on other ops are rejected at parse time
        (_, Expected::All(_)) => CheckOutcome::fail(),
    }
}

/// Answer-based evaluation.
pub fn evaluate_rinfo(spec: &JudgeSpec, final_answer: &str) -> JudgeVerdict {
    debug_assert_eq!(spec.eval_type, EvalType::Rinfo);
    let whole = normalize(final_answer);

    let parsed = match spec.parse {
        ParseMode::Json => match serde_json::from_str::<Value>(final_answer.trim()) {
            Ok(v) => Some(v),
            // a malformed answer is an agent failure, not a harness error
            Err(_) => return JudgeVerdict::all_failed(spec),
        },
        ParseMode::None => None,
    };

    let outcomes = spec
        .checks
        .iter()
        .map(|check| match (&check.path, &parsed) {
            (Some(path), Some(doc)) => match lookup_path(doc, path) {
                Some(v) => eval_check(check, &normalize(&stringify(v))),
                None => CheckOutcome::fail(),
            },
            (Some(_), None) => CheckOutcome::fail(),
            (None, _) => eval_check(check, &whole),
        })
        .collect();
    JudgeVerdict::from_outcomes(outcomes)
}

/// Programmatic evaluation against terminal URL and state probes.
pub fn evaluate_rprog(spec: &JudgeSpec, probe: &ProbeDocument) -> JudgeVerdict {
    debug_assert_eq!(spec.eval_type, EvalType::Rprog);
    let outcomes = spec
        .checks
        .iter()
        .map(|check| match probe_target(probe, check.path.as_deref()) {
            Some(target) => eval_check(check, &normalize(target)),
            None => CheckOutcome::fail(),
        })
        .collect();
    JudgeVerdict::from_outcomes(outcomes)
}

fn probe_target<'a>(probe: &'a ProbeDocument, path: Option<&str>) -> Option<&'a str> {
    match path {
        None | Some("url") => Some(&probe.terminal_url),
        Some(p) => p
            .strip_prefix("state.")
            .and_then(|name| probe.state_fields.get(name))
            .map(String::as_str),
    }
}

/// Walk a dot-path through objects (by key) and arrays (by index).
pub fn lookup_path<'a>(doc: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(doc, |cur, seg| match cur {
        Value::Object(map) => map.get(seg),
        Value::Array(items) => seg.parse::<usize>().ok().and_then(|i| items.get(i)),
        _ => None,
    })
}

/// Text form of a JSON value: strings verbatim, everything else as compact JSON.
pub fn stringify(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judge::parse_judge;

    fn one(op: CheckOp, expected: &str) -> Check {
        Check {
            op,
            expected: Expected::One(expected.into()),
            path: None,
        }
    }

    #[test]
    fn must_include_ticker() {
        let o = eval_check(&one(CheckOp::MustInclude, "SPX"), "the ticker symbol is spx");
        assert!(o.pass);
        assert_eq!(o.evidence, "spx");
    }

    #[test]
    fn exact_match_count() {
        assert!(eval_check(&one(CheckOp::ExactMatch, "2"), "2").pass);
        assert!(!eval_check(&one(CheckOp::ExactMatch, "2"), "2 items").pass);
    }

    #[test]
    fn fuzzy_fixture_from_oracle() {
        let o = eval_check(
            &one(CheckOp::FuzzyMatch, "3746.49"),
            "current value is 3746.50 points",
        );
        assert!(!o.pass);
        assert_eq!(o.evidence, "");
        let o = eval_check(&one(CheckOp::FuzzyMatch, "3746.49"), "value 3746.4");
        assert!(o.pass);
        assert_eq!(o.evidence, "3746.4");
    }

    #[test]
    fn include_all_listing_categories() {
        let spec = parse_judge(
            r#"{"eval_type":"rinfo","parse":null,"checks":[{"op":"must_include_all","expected":["OMG!","Lakefront","Amazing pools"]}]}"#,
        )
        .unwrap();
        let v = evaluate_rinfo(&spec, "Categories: OMG!, Lakefront, Amazing pools, Castles");
        assert_eq!(v.reward, 1);
        let v = evaluate_rinfo(&spec, "Categories: OMG!, Lakefront");
        assert_eq!(v.reward, 0);
    }

    #[test]
    fn count_answers() {
        let spec = parse_judge(
            r#"{"eval_type":"rinfo","parse":null,"checks":[{"op":"must_include","expected":"2"}]}"#,
        )
        .unwrap();
        assert_eq!(evaluate_rinfo(&spec, "There are 2 results").reward, 1);
        assert_eq!(evaluate_rinfo(&spec, "no results found").reward, 0);
    }

    #[test]
    fn normalized_price_satisfies_plain_digits() {
        let spec = parse_judge(
            r#"{"eval_type":"rinfo","checks":[{"op":"must_include","expected":"The Charles at Bexley"},{"op":"must_include","expected":"2938"}]}"#,
        )
        .unwrap();
        let v = evaluate_rinfo(&spec, "The Charles at Bexley starts at $2,938 per month.");
        assert_eq!(v.reward, 1);
    }

    #[test]
    fn json_answers() {
        let spec = parse_judge(
            r#"{"eval_type":"rinfo","parse":"json","checks":[{"op":"exact_match","expected":"Reed-Hill Apartments","path":"name"},{"op":"must_include","expected":"2938","path":"price"},{"op":"exact_match","expected":"b","path":"items.1"}]}"#,
        )
        .unwrap();
        let v = evaluate_rinfo(
            &spec,
            r#" {"name":"Reed-Hill Apartments","price":2938,"items":["a","b"]} "#,
        );
        assert_eq!(v.reward, 1, "{v:?}");

        let v = evaluate_rinfo(&spec, r#"{"name":"Reed-Hill Apartments"}"#);
        assert_eq!(v.reward, 0);
        assert!(v.per_check[0].pass);
        assert!(!v.per_check[1].pass);

        let v = evaluate_rinfo(&spec, "name: Reed-Hill Apartments");
        assert_eq!(v.reward, 0);
        assert_eq!(v.per_check.len(), 3);
        assert!(v.per_check.iter().all(|c| !c.pass && c.evidence.is_empty()));
    }

    #[test]
    fn rprog_url_and_state() {
        let spec = parse_judge(
            r#"{"eval_type":"rprog","checks":[{"op":"exact_match","expected":"/listings/7","path":"url"}]}"#,
        )
        .unwrap();
        let probe = ProbeDocument {
            terminal_url: "/listings/7".into(),
            state_fields: BTreeMap::new(),
        };
        assert_eq!(evaluate_rprog(&spec, &probe).reward, 1);

        let spec = parse_judge(
            r#"{"eval_type":"rprog","checks":[{"op":"exact_match","expected":"1","path":"state.favorites_count"}]}"#,
        )
        .unwrap();
        let mut probe = ProbeDocument::default();
        probe.state_fields.insert("favorites_count".into(), "1".into());
        assert_eq!(evaluate_rprog(&spec, &probe).reward, 1);
    }

    #[test]
    fn rprog_default_path_is_url() {
        let spec = parse_judge(
            r#"{"eval_type":"rprog","checks":[{"op":"must_include","expected":"/account/favorites"}]}"#,
        )
        .unwrap();
        let probe = ProbeDocument {
            terminal_url: "/account/favorites".into(),
            ..Default::default()
        };
        assert_eq!(evaluate_rprog(&spec, &probe).reward, 1);
    }

    #[test]
    fn rprog_missing_probe_fails_only_that_check() {
        let spec = parse_judge(
            r#"{"eval_type":"rprog","checks":[{"op":"exact_match","expected":"1","path":"state.missing"},{"op":"exact_match","expected":"/","path":"url"}]}"#,
        )
        .unwrap();
        let probe = ProbeDocument {
            terminal_url: "/".into(),
            ..Default::default()
        };
        let v = evaluate_rprog(&spec, &probe);
        assert_eq!(v.reward, 0);
        assert!(!v.per_check[0].pass);
        assert!(v.per_check[1].pass);
    }

    #[test]
    fn verdict_serializes_in_documented_shape() {
        let spec = parse_judge(
            r#"{"eval_type":"rinfo","checks":[{"op":"must_include","expected":"MSFT"}]}"#,
        )
        .unwrap();
        let v = evaluate_rinfo(&spec, "ticker is MSFT");
        assert_eq!(
            serde_json::to_string(&v).unwrap(),
            r#"{"reward":1,"per_check":[{"index":0,"pass":true,"evidence":"msft"}]}"#
        );
    }
}
