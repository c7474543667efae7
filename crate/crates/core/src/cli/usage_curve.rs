use std::fs;
use std::path::Path;

use super::run::read_training_record;
use super::CliError;
use crate::metrics::Table;
use crate::rl::TrainingRecord;

/// One row per episode: running index, agent, episode, NewRule presses.
pub fn usage_curve(record: &TrainingRecord) -> Result<Table, CliError> {
    if record.episodes.len() < 2 {
        return Err(CliError::TooFewEpisodes(record.episodes.len()));
    }
    let mut t = Table::new(&["index", "agent", "episode", "rule_uses"]);
    for (i, e) in record.episodes.iter().enumerate() {
        t.push(vec![i.to_string(), e.agent.to_string(), e.episode.to_string(), e.rule_uses.to_string()]);
    }
    Ok(t)
}

pub fn cmd_usage_curve(record: &Path, out: &Path) -> Result<usize, CliError> {
    let record = read_training_record(record)?;
    let table = usage_curve(&record)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(out, table.to_csv()).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    Ok(table.rows.len())
}
