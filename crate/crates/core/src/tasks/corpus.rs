//! Task files: a JSON array of task objects, conventionally one per line.

use std::path::Path;

use serde_json::value::RawValue;
use thiserror::Error;

use super::Task;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct CorpusFormatError {
    pub line: usize,
    pub message: String,
}

const JUDGE_CORPUS: &str = include_str!("../../../../fixtures/judge_corpus.json");
const BUILTIN: &str = include_str!("../../../../fixtures/builtin_tasks.json");

fn line_of(haystack: &str, needle: &str) -> usize {
    let offset = (needle.as_ptr() as usize).saturating_sub(haystack.as_ptr() as usize);
    haystack[..offset.min(haystack.len())].matches('\n').count() + 1
}

/// Parse and structurally check a task file.
pub fn parse_tasks(text: &str) -> Result<Vec<Task>, CorpusFormatError> {
    let items: Vec<&RawValue> = serde_json::from_str(text).map_err(|e| CorpusFormatError {
        line: e.line(),
        message: e.to_string(),
    })?;
    let mut seen = std::collections::BTreeSet::new();
    items
        .into_iter()
        .map(|raw| {
            let line = line_of(text, raw.get());
            let fail = |message: String| CorpusFormatError { line, message };
            let task: Task = serde_json::from_str(raw.get()).map_err(|e| fail(e.to_string()))?;
            task.check().map_err(|m| fail(format!("task `{}`: {m}", task.task_id)))?;
            if !seen.insert(task.task_id.clone()) {
                return Err(fail(format!("duplicate task_id `{}`", task.task_id)));
            }
            Ok(task)
        })
        .collect()
}

pub fn load_tasks(path: &Path) -> Result<Vec<Task>, CorpusFormatError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusFormatError {
        line: 0,
        message: format!("{}: {e}", path.display()),
    })?;
    parse_tasks(&text)
}

/// Serialize one task per line so error line numbers stay meaningful.
pub fn render_tasks(tasks: &[Task]) -> String {
    let mut out = String::from("[\n");
    for (i, t) in tasks.iter().enumerate() {
        out.push_str("  ");
        out.push_str(&serde_json::to_string(t).expect("task serializes"));
        if i + 1 < tasks.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("]\n");
    out
}

pub fn write_tasks(path: &Path, tasks: &[Task]) -> std::io::Result<()> {
    std::fs::write(path, render_tasks(tasks))
}

/// Transcribed example rows with authored answers, already instantiated.
pub fn judge_corpus() -> Vec<Task> {
    parse_tasks(JUDGE_CORPUS).expect("bundled corpus parses")
}

/// Tasks for the reference site, not yet validated.
pub fn builtin_tasks() -> Vec<Task> {
    parse_tasks(BUILTIN).expect("bundled tasks parse")
}
