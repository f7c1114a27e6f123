use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::trajectory::{RolloutEntry, TrainingRecord, Turn};

pub const DATASET_SCHEMA: &str = "training_record/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetOptions {
    pub dedup: bool,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self { dedup: true }
    }
}

pub fn training_record(entry: &RolloutEntry) -> TrainingRecord {
    TrainingRecord {
        instruction: entry.instruction.clone(),
        turns: entry
            .trajectory
            .steps
            .iter()
            .map(|s| Turn {
                observation: s.observation.clone(),
                thought: s.thought.clone(),
                action: s.action.clone(),
            })
            .collect(),
    }
}

/// Entries eligible for training: reward 1 and the record still describes
/// the stored trajectory.
pub fn accepted(entry: &RolloutEntry) -> bool {
    entry.record.reward == 1
        && entry.record.verdict.reward == 1
        && entry.record.task_id == entry.trajectory.task_id
        && entry.record.trajectory == entry.trajectory.digest()
}

/// Reward-filtered training records, sorted so input order does not matter.
/// With dedup on, one record per (task_id, action sequence) survives: the
/// one with the smallest serialization.
pub fn build_dataset(entries: &[RolloutEntry], opts: DatasetOptions) -> Vec<TrainingRecord> {
    let mut keyed: Vec<((String, String), String, TrainingRecord)> = entries
        .iter()
        .filter(|e| accepted(e))
        .map(|e| {
            let actions = serde_json::to_string(&e.trajectory.actions()).expect("actions serialize");
            let rec = training_record(e);
            let line = serde_json::to_string(&rec).expect("record serializes");
            ((e.trajectory.task_id.clone(), actions), line, rec)
        })
        .collect();
    if opts.dedup {
        let mut best: BTreeMap<(String, String), (String, TrainingRecord)> = BTreeMap::new();
        for (key, line, rec) in keyed {
            match best.get(&key) {
                Some((kept, _)) if *kept <= line => {}
                _ => {
                    best.insert(key, (line, rec));
                }
            }
        }
        keyed = best.into_iter().map(|(k, (l, r))| (k, l, r)).collect();
    }
    keyed.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
    keyed.into_iter().map(|(_, _, r)| r).collect()
}

#[derive(Serialize)]
struct Header<'a> {
    schema: &'a str,
    records: usize,
}

/// Header line followed by one record per line.
pub fn render_dataset(records: &[TrainingRecord]) -> String {
    let mut out = serde_json::to_string(&Header {
        schema: DATASET_SCHEMA,
        records: records.len(),
    })
    .expect("header serializes");
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_dataset(path: &Path, records: &[TrainingRecord]) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(render_dataset(records).as_bytes())?;
    f.sync_all()
}
