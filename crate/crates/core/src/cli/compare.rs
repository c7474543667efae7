use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::run::{read_log, RunLogEntry};
use super::CliError;
use crate::eval::ActionCounts;
use crate::metrics::{breakdown_table, similarity_table, usage_table, Table};
use crate::rule::Rule;

pub const DEFAULT_POOL: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOptions {
    pub pool: usize,
    /// smallest acceptable number of unique rules per log; defaults to `pool`
    pub min_pool: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self { pool: DEFAULT_POOL, min_pool: None, seed: 0, out: PathBuf::from("compare") }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub label_a: String,
    pub label_b: String,
    pub pool_a: Vec<(Rule, ActionCounts)>,
    pub pool_b: Vec<(Rule, ActionCounts)>,
    pub similarity: Table,
    pub usage_a: Table,
    pub usage_b: Table,
    pub breakdown: Table,
}

/// Distinct final rules of a log, first occurrence first, with the action
/// totals recorded for them.
pub fn unique_finals(entries: &[RunLogEntry]) -> Vec<(Rule, ActionCounts)> {
    let mut out: Vec<(Rule, ActionCounts)> = Vec::new();
    for entry in entries {
        if let RunLogEntry::Final(f) = entry {
            if !out.iter().any(|(r, _)| *r == f.rule) {
                out.push((f.rule, f.usage));
            }
        }
    }
    out
}

fn label_of(entries: &[RunLogEntry]) -> String {
    entries
        .first()
        .map(|e| match e {
            RunLogEntry::Final(f) => f.evaluator.label().to_string(),
            RunLogEntry::Evaluation(v) => v.evaluator.label().to_string(),
        })
        .unwrap_or_else(|| "?".into())
}

/// Seeded sample of `n` rules, kept in log order.
fn sample_pool(rules: &[(Rule, ActionCounts)], n: usize, rng: &mut ChaCha8Rng) -> Vec<(Rule, ActionCounts)> {
    let n = n.min(rules.len());
    let mut picked = sample(rng, rules.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| rules[i]).collect()
}

fn load_pool(path: &Path, opts: &CompareOptions) -> Result<(String, Vec<(Rule, ActionCounts)>), CliError> {
    let entries = read_log(path)?;
    let unique = unique_finals(&entries);
    let needed = opts.min_pool.unwrap_or(opts.pool);
    if unique.len() < needed {
        return Err(CliError::InsufficientPool { log: path.display().to_string(), found: unique.len(), needed });
    }
    Ok((label_of(&entries), unique))
}

/// Builds the similarity, usage and breakdown tables for two run logs.
pub fn compare_logs(log_a: &Path, log_b: &Path, opts: &CompareOptions) -> Result<CompareReport, CliError> {
    let (mut label_a, unique_a) = load_pool(log_a, opts)?;
    let (mut label_b, unique_b) = load_pool(log_b, opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let pool_a = sample_pool(&unique_a, opts.pool, &mut rng);
    let pool_b = if unique_a == unique_b { pool_a.clone() } else { sample_pool(&unique_b, opts.pool, &mut rng) };
    if label_a == label_b {
        label_a.push_str("(A)");
        label_b.push_str("(B)");
    }
    let rules_a: Vec<Rule> = pool_a.iter().map(|(r, _)| *r).collect();
    let rules_b: Vec<Rule> = pool_b.iter().map(|(r, _)| *r).collect();
    Ok(CompareReport {
        similarity: similarity_table(&label_a, &rules_a, &label_b, &rules_b)?,
        usage_a: usage_table(&label_a, &pool_a)?,
        usage_b: usage_table(&label_b, &pool_b)?,
        breakdown: breakdown_table(&label_a, &rules_a, &label_b, &rules_b)?,
        label_a,
        label_b,
        pool_a,
        pool_b,
    })
}

/// Writes every report table as CSV and as aligned text under `opts.out`.
pub fn cmd_compare(log_a: &Path, log_b: &Path, opts: &CompareOptions) -> Result<CompareReport, CliError> {
    let report = compare_logs(log_a, log_b, opts)?;
    fs::create_dir_all(&opts.out).map_err(|e| CliError::Io(format!("{}: {e}", opts.out.display())))?;
    let tables = [
        ("similarity", &report.similarity),
        ("usage_a", &report.usage_a),
        ("usage_b", &report.usage_b),
        ("breakdown", &report.breakdown),
    ];
    for (name, table) in tables {
        for (ext, body) in [("csv", table.to_csv()), ("txt", table.to_text())] {
            let path = opts.out.join(format!("{name}.{ext}"));
            fs::write(&path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        }
    }
    Ok(report)
}
