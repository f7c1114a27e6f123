use webenv_core::env::Environment;
use webenv_core::rollout::{
    build_dataset, builtin_policy, collect, rescore, run_episode, score, CollectConfig, DatasetOptions,
    NoisyOracle, OraclePolicy, Policy, PolicyFault, Choice, Decision, RandomPolicy, RolloutStore,
    DEFAULT_MAX_STEPS,
};
use webenv_core::site::{SharedSite, Site};
use webenv_core::tasks::{builtin_tasks, validate_task, Task};

fn setup() -> (SharedSite, Vec<Task>) {
    let site = Site::shared(42);
    let tasks = builtin_tasks()
        .iter()
        .map(|t| validate_task(t, &site).unwrap())
        .collect();
    (site, tasks)
}

#[test]
fn every_builtin_task_validates() {
    let (_, tasks) = setup();
    assert_eq!(tasks.len(), 14);
    for t in &tasks {
        assert!(t.is_valid, "{}: {:?}", t.task_id, t.failure_reason);
        t.check().unwrap();
    }
}

#[test]
fn oracle_solves_every_builtin_task_and_rescores_identically() {
    let (site, tasks) = setup();
    let oracle = OraclePolicy::new(&tasks, &site).unwrap();
    for (i, task) in tasks.iter().enumerate() {
        let traj = run_episode(&oracle, task, &site, DEFAULT_MAX_STEPS, i as u64).unwrap();
        assert!(traj.well_formed());
        assert!(!traj.truncated);
        assert!(traj.steps.iter().all(|s| s.error.is_none()), "{}: {:?}", task.task_id, traj.steps);
        let rec = score(&traj, task, &site, 0).unwrap();
        assert_eq!(rec.reward, 1, "{}: {:?}", task.task_id, rec.verdict);
        let again = rescore(&traj, task, &site, 0).unwrap();
        assert_eq!(again.to_json(), rec.to_json(), "{}", task.task_id);
    }
}

#[test]
fn episodes_are_deterministic() {
    let (site, tasks) = setup();
    let random = RandomPolicy;
    for task in tasks.iter().take(4) {
        let a = run_episode(&random, task, &site, 12, 77).unwrap();
        let b = run_episode(&random, task, &site, 12, 77).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert!(a.well_formed());
    }
}

#[test]
fn always_corrupting_oracle_fails_exact_match_tasks() {
    let (site, tasks) = setup();
    let noisy = NoisyOracle::new(OraclePolicy::new(&tasks, &site).unwrap(), 1.0).unwrap();
    let exact: Vec<&Task> = tasks
        .iter()
        .filter(|t| {
            let j = t.judge.as_ref().unwrap();
            j.eval_type == webenv_core::judge::EvalType::Rinfo
                && j.checks.iter().all(|c| c.op == webenv_core::judge::CheckOp::ExactMatch)
        })
        .collect();
    assert!(!exact.is_empty());
    for task in exact {
        let traj = run_episode(&noisy, task, &site, DEFAULT_MAX_STEPS, 3).unwrap();
        assert_eq!(score(&traj, task, &site, 0).unwrap().reward, 0, "{}", task.task_id);
    }
}

struct Faulty;

impl Policy for Faulty {
    fn name(&self) -> String {
        "faulty".into()
    }

    fn decide(&self, d: &Decision<'_>) -> Result<Choice, PolicyFault> {
        if d.step == 0 {
            Ok(Choice {
                thought: None,
                action: webenv_core::site::BrowserAction::Navigate { url: "/listings".into() },
            })
        } else {
            Err(PolicyFault("boom".into()))
        }
    }
}

#[test]
fn policy_fault_truncates_and_scores_zero() {
    let (site, tasks) = setup();
    let traj = run_episode(&Faulty, &tasks[0], &site, DEFAULT_MAX_STEPS, 0).unwrap();
    assert!(traj.truncated);
    assert_eq!(traj.fault.as_deref(), Some("boom"));
    assert_eq!(traj.steps.len(), 1);
    assert_eq!(traj.terminal_url, "/listings");
    assert_eq!(score(&traj, &tasks[0], &site, 0).unwrap().reward, 0);
}

#[test]
fn budget_exhaustion_truncates() {
    let (site, tasks) = setup();
    let traj = run_episode(&Faulty, &tasks[0], &site, 1, 0).unwrap();
    assert!(traj.truncated);
    assert!(traj.fault.is_none());
    assert!(run_episode(&Faulty, &tasks[0], &site, 0, 0).is_err());
    let mut invalid = tasks[0].clone();
    invalid.is_valid = false;
    assert!(run_episode(&Faulty, &invalid, &site, 5, 0).is_err());
}

#[test]
fn collect_persists_and_datasets_rescore() {
    let (site, tasks) = setup();
    let dir = tempfile::tempdir().unwrap();
    let store = RolloutStore::new(dir.path().join("rollouts.jsonl"));
    let policy = builtin_policy("noisy_oracle(0.3)", &tasks, &site).unwrap();
    let cfg = CollectConfig {
        rollouts_per_task: 3,
        base_seed: 5,
        ..Default::default()
    };
    let report = collect(&tasks, policy.as_ref(), &site, &cfg, Some(&store));
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    assert_eq!(report.entries.len(), tasks.len() * 3);
    assert_eq!(store.load().unwrap(), report.entries);

    let dataset = build_dataset(&report.entries, DatasetOptions::default());
    assert!(!dataset.is_empty());
    assert!(dataset.len() <= report.successes());
    for e in report.entries.iter().filter(|e| e.record.reward == 1) {
        let task = tasks.iter().find(|t| t.task_id == e.record.task_id).unwrap();
        assert_eq!(rescore(&e.trajectory, task, &site, e.record.phase).unwrap(), e.record);
    }

    // A second collect appends rather than truncating.
    collect(&tasks[..1], policy.as_ref(), &site, &cfg, Some(&store));
    assert_eq!(store.load().unwrap().len(), tasks.len() * 3 + 3);
}

#[test]
fn env_is_reset_between_episodes() {
    let (site, tasks) = setup();
    let oracle = OraclePolicy::new(&tasks, &site).unwrap();
    let fav = tasks.iter().find(|t| t.task_id == "b-favorite-cheapest-loft").unwrap();
    let before = site.state().unwrap();
    for seed in 0..3 {
        let traj = run_episode(&oracle, fav, &site, DEFAULT_MAX_STEPS, seed).unwrap();
        assert_eq!(score(&traj, fav, &site, 0).unwrap().reward, 1);
    }
    site.reset().unwrap();
    assert_eq!(site.state().unwrap(), before);
}

#[test]
fn phase_loop_accumulates_tasks_and_dataset() {
    use webenv_core::rollout::{run_phase_loop, PhaseConfig};
    let (site, tasks) = setup();
    let (first, rest) = tasks.split_at(4);
    let rest = rest.to_vec();
    let cfg = PhaseConfig {
        phases: 3,
        rollouts_per_task: 2,
        base_seed: 9,
        max_steps: DEFAULT_MAX_STEPS,
        dataset: DatasetOptions::default(),
    };
    let all = tasks.clone();
    let out = run_phase_loop(
        &cfg,
        &site,
        first.to_vec(),
        |phase| if phase == 1 { rest.clone() } else { Vec::new() },
        |phase, _| {
            let spec = if phase == 0 { "random" } else { "oracle" };
            builtin_policy(spec, &all, &site).unwrap()
        },
        None,
    )
    .unwrap();
    let shape: Vec<(u32, usize, usize)> = out.reports.iter().map(|r| (r.phase, r.tasks, r.episodes)).collect();
    assert_eq!(shape, vec![(0, 4, 8), (1, 14, 28), (2, 14, 28)]);
    assert_eq!(out.reports[1].success_rate, 1.0);
    assert!(out.reports[0].success_rate < 1.0);
    assert!(out.reports.windows(2).all(|w| w[0].dataset_size <= w[1].dataset_size));
    assert_eq!(out.reports[2].dataset_size, out.dataset.len());
    assert!(run_phase_loop(&PhaseConfig { phases: 0, ..cfg }, &site, vec![], |_| vec![], |_, _| Box::new(RandomPolicy), None).is_err());
}
