//! Post-hoc analysis of output rule pools.
//!
//! The pairwise similarity is not a metric: no triangle inequality is claimed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::ActionCounts;
use crate::rule::{Rule, Variable, COMPARISON_RANGE, EFFECT_RANGE};
use crate::sim::Action;

/// Highest possible pairwise similarity.
pub const MAX_SIMILARITY: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("rule pool is empty")]
    EmptyPool,
    #[error("a single-rule pool has no distinct pairs")]
    NoPairs,
    #[error("no actions recorded")]
    NoActions,
}

/// One point for each shared symbol (variable, comparator, effect) plus one
/// point per numeric field scaled down by the normalised difference.
pub fn rule_similarity(a: &Rule, b: &Rule) -> f64 {
    let comparison_span = (COMPARISON_RANGE.end() - COMPARISON_RANGE.start()) as f64;
    let effect_span = (EFFECT_RANGE.end() - EFFECT_RANGE.start()) as f64;
    let symbolic = (a.variable() == b.variable()) as u8 + (a.comparator() == b.comparator()) as u8 + (a.effect() == b.effect()) as u8;
    symbolic as f64
        + (1.0 - (a.comparison_value() - b.comparison_value()).abs() as f64 / comparison_span)
        + (1.0 - (a.effect_value() - b.effect_value()).abs() as f64 / effect_span)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolSimilarity {
    pub aggregate: f64,
    pub pairs: usize,
    pub mean_pairwise: f64,
}

impl PoolSimilarity {
    fn from_scores(scores: impl Iterator<Item = f64>) -> Self {
        let (aggregate, pairs) = scores.fold((0.0, 0), |(sum, n), s| (sum + s, n + 1));
        Self { aggregate, pairs, mean_pairwise: aggregate / pairs as f64 }
    }
}

/// Every unordered pair of distinct members of one pool.
pub fn within_pool_similarity(pool: &[Rule]) -> Result<PoolSimilarity, MetricsError> {
    match pool.len() {
        0 => Err(MetricsError::EmptyPool),
        1 => Err(MetricsError::NoPairs),
        _ => Ok(PoolSimilarity::from_scores(
            pool.iter().enumerate().flat_map(|(i, a)| pool[i + 1..].iter().map(move |b| rule_similarity(a, b))),
        )),
    }
}

/// Every pair with one member from each pool.
pub fn cross_pool_similarity(a: &[Rule], b: &[Rule]) -> Result<PoolSimilarity, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyPool);
    }
    Ok(PoolSimilarity::from_scores(a.iter().flat_map(|x| b.iter().map(move |y| rule_similarity(x, y)))))
}

/// Within-pool pairs when both arguments hold the same pool, cross-pool pairs
/// otherwise.
pub fn pool_similarity(a: &[Rule], b: &[Rule]) -> Result<PoolSimilarity, MetricsError> {
    if a == b {
        within_pool_similarity(a)
    } else {
        cross_pool_similarity(a, b)
    }
}

/// Share of each action, in percent, in canonical action order.
pub fn usage_percentages(counts: &ActionCounts) -> Result<[f64; Action::COUNT], MetricsError> {
    let total = counts.total();
    if total == 0 {
        return Err(MetricsError::NoActions);
    }
    Ok(counts.0.map(|c| c as f64 * 100.0 / total as f64))
}

/// Percentage of rules per target variable, in [`Variable::ALL`] order.
pub fn variable_breakdown(pool: &[Rule]) -> Result<[(Variable, f64); 4], MetricsError> {
    if pool.is_empty() {
        return Err(MetricsError::EmptyPool);
    }
    Ok(Variable::ALL.map(|v| {
        let n = pool.iter().filter(|r| r.variable() == v).count();
        (v, n as f64 * 100.0 / pool.len() as f64)
    }))
}

/// Number of distinct target variables in a pool.
pub fn variable_spread(pool: &[Rule]) -> usize {
    Variable::ALL.iter().filter(|v| pool.iter().any(|r| r.variable() == **v)).count()
}

/// Summary of one pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolReport {
    pub aggregate_similarity: f64,
    pub mean_pairwise: f64,
    /// new-rule usage per rule, in percent
    pub usage_table: Vec<(Rule, f64)>,
    pub variable_breakdown: Vec<(Variable, f64)>,
}

/// `usage` pairs each pool rule with the action totals behind it.
pub fn pool_report(pool: &[Rule], usage: &[(Rule, ActionCounts)]) -> Result<PoolReport, MetricsError> {
    let within = within_pool_similarity(pool)?;
    let usage_table = usage
        .iter()
        .map(|(rule, counts)| Ok((*rule, usage_percentages(counts)?[Action::NewRule.index()])))
        .collect::<Result<Vec<_>, MetricsError>>()?;
    Ok(PoolReport {
        aggregate_similarity: within.aggregate,
        mean_pairwise: within.mean_pairwise,
        usage_table,
        variable_breakdown: variable_breakdown(pool)?.to_vec(),
    })
}

/// A small report table that renders as CSV or as aligned text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self { headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("writing to memory");
        for row in &self.rows {
            w.write_record(row).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv output is utf-8")
    }

    pub fn to_text(&self) -> String {
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            padded.join("  ").trim_end().to_string()
        };
        let mut out = line(&self.headers);
        out.push('\n');
        out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }
}

/// Within-A, within-B and A-versus-B mean pairwise similarity.
pub fn similarity_table(label_a: &str, a: &[Rule], label_b: &str, b: &[Rule]) -> Result<Table, MetricsError> {
    let aa = within_pool_similarity(a)?;
    let bb = within_pool_similarity(b)?;
    let ab = pool_similarity(a, b)?;
    let mut t = Table::new(&["statistic", &format!("{label_a}vs{label_a}"), &format!("{label_b}vs{label_b}"), &format!("{label_a}vs{label_b}")]);
    t.push(vec!["mean_pairwise".into(), format!("{:.4}", aa.mean_pairwise), format!("{:.4}", bb.mean_pairwise), format!("{:.4}", ab.mean_pairwise)]);
    t.push(vec!["aggregate".into(), format!("{:.2}", aa.aggregate), format!("{:.2}", bb.aggregate), format!("{:.2}", ab.aggregate)]);
    t.push(vec!["pairs".into(), aa.pairs.to_string(), bb.pairs.to_string(), ab.pairs.to_string()]);
    Ok(t)
}

/// One row per rule: id, rule text, and its new-rule usage percentage.
pub fn usage_table(label: &str, rows: &[(Rule, ActionCounts)]) -> Result<Table, MetricsError> {
    let mut t = Table::new(&["rule_id", "rule", "new_rule_pct"]);
    for (i, (rule, counts)) in rows.iter().enumerate() {
        let pct = usage_percentages(counts)?[Action::NewRule.index()];
        t.push(vec![format!("{label}{}", i + 1), rule.to_string(), format!("{pct:.1}%")]);
    }
    Ok(t)
}

/// Per-variable share of each pool.
pub fn breakdown_table(label_a: &str, a: &[Rule], label_b: &str, b: &[Rule]) -> Result<Table, MetricsError> {
    let ba = variable_breakdown(a)?;
    let bb = variable_breakdown(b)?;
    let mut t = Table::new(&["variable", label_a, label_b]);
    for ((v, pa), (_, pb)) in ba.iter().zip(bb.iter()) {
        t.push(vec![v.label().to_string(), format!("{pa:.1}%"), format!("{pb:.1}%")]);
    }
    Ok(t)
}
