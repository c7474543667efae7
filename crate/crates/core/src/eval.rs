//! Types shared by the two rule evaluators and the search loop.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::astar::PlanResult;
use crate::rl::TrainingRecord;
use crate::rule::Rule;
use crate::sim::Action;

/// Which way fitness values are compared. The search minimises by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitnessOrientation {
    #[default]
    Minimize,
    Maximize,
}

impl FitnessOrientation {
    /// Strictly better.
    pub fn better(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            FitnessOrientation::Minimize => candidate < incumbent,
            FitnessOrientation::Maximize => candidate > incumbent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluatorKind {
    Astar,
    Rl,
}

impl EvaluatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EvaluatorKind::Astar => "A*",
            EvaluatorKind::Rl => "RL",
        }
    }
}

impl fmt::Display for EvaluatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvaluatorKind::Astar => "astar",
            EvaluatorKind::Rl => "rl",
        })
    }
}

impl FromStr for EvaluatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "astar" | "a*" => Ok(EvaluatorKind::Astar),
            "rl" => Ok(EvaluatorKind::Rl),
            other => Err(format!("unknown evaluator `{other}` (expected astar or rl)")),
        }
    }
}

/// `1 - |base - rule| / max(base, rule)`, or 0 when both counts are zero.
pub fn balance_term(base_moves: u64, rule_uses: u64) -> f64 {
    let max = base_moves.max(rule_uses);
    if max == 0 {
        return 0.0;
    }
    1.0 - base_moves.abs_diff(rule_uses) as f64 / max as f64
}

/// Per-action totals in canonical action order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ActionCounts(pub [u64; Action::COUNT]);

impl ActionCounts {
    pub fn from_actions<'a>(actions: impl IntoIterator<Item = &'a Action>) -> Self {
        let mut counts = Self::default();
        for a in actions {
            counts.add(*a);
        }
        counts
    }

    pub fn add(&mut self, action: Action) {
        self.0[action.index()] += 1;
    }

    pub fn get(&self, action: Action) -> u64 {
        self.0[action.index()]
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn base_moves(&self) -> u64 {
        Action::ALL.iter().filter(|a| a.is_base_move()).map(|a| self.get(*a)).sum()
    }

    pub fn merge(&mut self, other: &ActionCounts) {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a += b;
        }
    }
}

/// The counters that feed a fitness value. Fields that one evaluator does not
/// produce stay `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    /// T_G: steps of the best goal-reaching run, 0 if none
    pub steps_to_goal: u64,
    /// T_M: base movement actions
    pub base_moves: u64,
    /// N_R: rule applications that fired
    pub rule_uses: u64,
    /// O_Z: deaths (out of bounds)
    pub deaths: u64,
    /// D_G: distance from goal at path end (planner only)
    pub goal_distance: Option<f64>,
    pub goal_completions: u64,
    pub nodes_expanded: Option<u64>,
    /// wall-clock seconds; excluded from determinism checks
    pub time_to_train: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub rule: Rule,
    pub evaluator: EvaluatorKind,
    pub feasible: bool,
    pub fitness: f64,
    pub stats: EvalStats,
    /// Action totals behind the usage percentages: the optimal path for the
    /// planner, every training action for the learner.
    pub usage: ActionCounts,
}

/// Full evidence behind a report, for logs and replays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Evidence {
    Plan(PlanResult),
    Training(TrainingRecord),
}

impl Evidence {
    /// Every successful action sequence with the rule it ran under.
    pub fn successes(&self) -> Vec<&[Action]> {
        match self {
            Evidence::Plan(p) if p.reached => vec![p.path.as_slice()],
            Evidence::Plan(_) => Vec::new(),
            Evidence::Training(t) => t.action_sequences.iter().map(Vec::as_slice).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: FitnessReport,
    pub evidence: Option<Evidence>,
}

/// Scores one candidate rule. `seed` feeds any randomness the evaluator uses.
pub trait Evaluator: Sync {
    fn kind(&self) -> EvaluatorKind;
    fn evaluate(&self, rule: &Rule, seed: u64) -> Evaluation;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balance_term_cases() {
        assert_eq!(balance_term(30, 30), 1.0);
        assert_eq!(balance_term(100, 0), 0.0);
        assert_eq!(balance_term(0, 0), 0.0);
        assert!((balance_term(60, 20) - (1.0 - 40.0 / 60.0)).abs() < 1e-12);
        assert_eq!(balance_term(20, 60), balance_term(60, 20));
    }

    #[test]
    fn orientation() {
        assert!(FitnessOrientation::Minimize.better(1.0, 2.0));
        assert!(!FitnessOrientation::Minimize.better(2.0, 2.0));
        assert!(FitnessOrientation::Maximize.better(3.0, 2.0));
    }

    #[test]
    fn counts() {
        let c = ActionCounts::from_actions(&[Action::MoveRight, Action::MoveRight, Action::NewRule, Action::Nothing]);
        assert_eq!(c.total(), 4);
        assert_eq!(c.base_moves(), 2);
        assert_eq!(c.get(Action::NewRule), 1);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("astar".parse::<EvaluatorKind>().unwrap(), EvaluatorKind::Astar);
        assert_eq!("RL".parse::<EvaluatorKind>().unwrap(), EvaluatorKind::Rl);
        assert!("bfs".parse::<EvaluatorKind>().is_err());
    }
}
