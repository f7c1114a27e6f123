use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::template::{binding_value, instantiate};
use super::Task;
use crate::env::Environment;
use crate::site::SdkError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("environment unavailable: {0}")]
    EnvUnavailable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Revalidation {
    Unchanged,
    JudgeUpdated,
    NowInvalid,
}

fn is_empty_result(raw: &str) -> bool {
    matches!(raw.trim(), "" | "[]" | "{}" | "null")
}

/// Run the plan; `Ok(Err(reason))` means the task is not executable.
fn run_plan(task: &Task, env: &dyn Environment) -> Result<Result<BTreeMap<String, Value>, String>, ValidationError> {
    let mut bindings = BTreeMap::new();
    if task.validation_plan.is_empty() {
        return Ok(Err("validation_plan is empty".into()));
    }
    for (i, call) in task.validation_plan.iter().enumerate() {
        let raw = match env.sdk(call) {
            Ok(raw) => raw,
            Err(SdkError::Unavailable(m)) => return Err(ValidationError::EnvUnavailable(m)),
            Err(e) => return Ok(Err(format!("validation_plan[{i}] `{}`: {e}", call.name))),
        };
        if let Some(name) = &call.bind_as {
            if is_empty_result(&raw) {
                return Ok(Err(format!(
                    "validation_plan[{i}] `{}` bound an empty result to `{name}`",
                    call.name
                )));
            }
            bindings.insert(name.clone(), binding_value(&raw));
        }
    }
    Ok(Ok(bindings))
}

/// Execute the validation plan and instantiate the judge from its results.
pub fn validate_task(task: &Task, env: &dyn Environment) -> Result<Task, ValidationError> {
    let mut out = task.clone();
    let result = run_plan(task, env)?.and_then(|bindings| {
        if let Err(e) = task.judge_template.validate() {
            return Err(format!("judge_template.{e}"));
        }
        let judge = instantiate(&task.judge_template, &bindings)?;
        judge.validate().map_err(|e| format!("judge.{e}"))?;
        for step in &task.solution {
            step.bind(&bindings)?;
        }
        Ok((bindings, judge))
    });
    match result {
        Ok((bindings, judge)) => {
            out.bindings = bindings;
            out.judge = Some(judge);
            out.is_valid = true;
            out.failure_reason = None;
        }
        Err(reason) => {
            out.bindings.clear();
            out.judge = None;
            out.is_valid = false;
            out.failure_reason = Some(reason);
        }
    }
    Ok(out)
}

/// Re-run the plan against current state and report how the judge moved.
pub fn revalidate(task: &Task, env: &dyn Environment) -> Result<(Revalidation, Task), ValidationError> {
    let fresh = validate_task(task, env)?;
    let outcome = match (task.is_valid, fresh.is_valid) {
        (_, false) if task.is_valid => Revalidation::NowInvalid,
        (false, false) => Revalidation::Unchanged,
        _ if fresh.judge == task.judge => Revalidation::Unchanged,
        _ => Revalidation::JudgeUpdated,
    };
    Ok((outcome, fresh))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judge::parse_judge;
    use crate::site::{SdkCall, Site};
    use crate::tasks::Difficulty;

    fn sort_task() -> Task {
        Task {
            task_id: "sort".into(),
            website: None,
            instruction: "Sort listings by price and report the first name and price.".into(),
            validation_plan: vec![SdkCall::new("list_listings")
                .arg("sort", "price_asc")
                .arg("category", "all")
                .arg("limit", 1)
                .bind("first")],
            judge_template: parse_judge(
                r#"{"eval_type":"rinfo","parse":null,"checks":[
                    {"op":"must_include","expected":"{first.name}"},
                    {"op":"must_include","expected":"{first.price}"}]}"#,
            )
            .unwrap(),
            judge: None,
            is_valid: false,
            difficulty: Difficulty::Medium,
            requires_auth: false,
            mutates_state: false,
            plan_step_count: 2,
            state_probes: vec![],
            solution: vec![],
            bindings: BTreeMap::new(),
            failure_reason: None,
            answer: None,
        }
    }

    #[test]
    fn sorting_task_instantiates_cheapest() {
        let site = Site::shared(42);
        let t = validate_task(&sort_task(), &site).unwrap();
        assert!(t.is_valid);
        t.check().unwrap();
        let db = crate::site::populate(42);
        let cheapest = db.listings.iter().min_by_key(|l| (l.price_cents, l.id)).unwrap();
        let j = t.judge.unwrap();
        assert_eq!(j.checks[0].expected.values(), vec![cheapest.name.as_str()]);
        assert_eq!(j.checks[1].expected.values(), vec![cheapest.price_text().as_str()]);
    }

    #[test]
    fn empty_category_is_invalid() {
        let mut task = sort_task();
        task.validation_plan[0].args.insert("category".into(), "castle".into());
        let t = validate_task(&task, &Site::shared(42)).unwrap();
        assert!(!t.is_valid);
        assert!(t.judge.is_none());
        assert!(t.failure_reason.unwrap().contains("empty"));
    }

    #[test]
    fn unknown_call_is_invalid_with_reason() {
        let mut task = sort_task();
        task.validation_plan.insert(0, SdkCall::new("teleport"));
        let t = validate_task(&task, &Site::shared(42)).unwrap();
        assert!(!t.is_valid);
        assert!(t.failure_reason.as_deref().unwrap().contains("teleport"));
        t.check().unwrap();
    }

    #[test]
    fn revalidate_tracks_reseed() {
        let site = Site::shared(42);
        let t = validate_task(&sort_task(), &site).unwrap();
        assert_eq!(revalidate(&t, &site).unwrap().0, Revalidation::Unchanged);
        site.lock().unwrap().reseed(43);
        let (outcome, fresh) = revalidate(&t, &site).unwrap();
        assert_eq!(outcome, Revalidation::JudgeUpdated);
        assert_ne!(fresh.judge, t.judge);

        let mut broken = t.clone();
        broken.validation_plan[0].args.insert("category".into(), "castle".into());
        assert_eq!(revalidate(&broken, &site).unwrap().0, Revalidation::NowInvalid);
    }

    #[test]
    fn unavailable_env_is_an_error() {
        let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let remote = crate::env::RemoteEnv::new(port);
        assert!(matches!(
            validate_task(&sort_task(), &remote),
            Err(ValidationError::EnvUnavailable(_))
        ));
    }
}
