use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Difficulty, Task};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierStats {
    pub count: usize,
    /// Share of all tasks, rounded to one decimal.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStats {
    pub total: usize,
    pub valid: usize,
    pub tiers: BTreeMap<Difficulty, TierStats>,
    pub environments: usize,
    pub tasks_per_environment: f64,
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Per-tier counts and shares. `None` for an empty list.
pub fn task_stats(tasks: &[Task]) -> Option<TaskStats> {
    if tasks.is_empty() {
        return None;
    }
    let total = tasks.len();
    let tiers = Difficulty::ALL
        .into_iter()
        .map(|d| {
            let count = tasks.iter().filter(|t| t.difficulty == d).count();
            let percent = round1(100.0 * count as f64 / total as f64);
            (d, TierStats { count, percent })
        })
        .collect();
    let envs: BTreeSet<&str> = tasks
        .iter()
        .map(|t| t.website.as_deref().unwrap_or(""))
        .collect();
    Some(TaskStats {
        total,
        valid: tasks.iter().filter(|t| t.is_valid).count(),
        tiers,
        environments: envs.len(),
        tasks_per_environment: round1(total as f64 / envs.len() as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judge::parse_judge;

    fn task(i: usize, d: Difficulty, site: usize) -> Task {
        Task {
            task_id: format!("t{i}"),
            website: Some(format!("site{site}")),
            instruction: "x".into(),
            validation_plan: vec![],
            judge_template: parse_judge(r#"{"eval_type":"rinfo","parse":null,"checks":[{"op":"exact_match","expected":"1"}]}"#)
                .unwrap(),
            judge: None,
            is_valid: false,
            difficulty: d,
            requires_auth: false,
            mutates_state: false,
            plan_step_count: 1,
            state_probes: vec![],
            solution: vec![],
            bindings: Default::default(),
            failure_reason: None,
            answer: None,
        }
    }

    #[test]
    fn reported_tier_shares() {
        // 2,972 / 2,900 / 1,528 of 7,400
        let mut tasks = Vec::new();
        for (d, n) in [(Difficulty::Easy, 2972), (Difficulty::Medium, 2900), (Difficulty::Hard, 1528)] {
            for _ in 0..n {
                let i = tasks.len();
                tasks.push(task(i, d, i % 149));
            }
        }
        let s = task_stats(&tasks).unwrap();
        assert_eq!(s.total, 7400);
        assert_eq!(s.tiers[&Difficulty::Easy].percent, 40.2);
        assert_eq!(s.tiers[&Difficulty::Medium].percent, 39.2);
        assert_eq!(s.tiers[&Difficulty::Hard].percent, 20.6);
        assert_eq!(s.environments, 149);
        assert_eq!(s.tasks_per_environment, 49.7);
    }

    #[test]
    fn empty_is_none() {
        assert!(task_stats(&[]).is_none());
    }
}
