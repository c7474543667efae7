//! Rule search: a random feasibility-gated start followed by stochastic greedy
//! hill climbing over numeric neighbours.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{Evaluation, Evaluator, EvaluatorKind, Evidence, FitnessOrientation, FitnessReport};
use crate::rule::{self, Rule};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("no feasible rule found after {restarts} infeasible batches")]
    NoFeasibleRuleFound { restarts: u32 },
    #[error("start rule `{0}` is not feasible")]
    InfeasibleStart(Rule),
    #[error("{0} must be positive")]
    NotPositive(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub population_size: usize,
    pub neighbors_per_iteration: usize,
    /// consecutive non-improving iterations before stopping
    pub convergence_patience: u32,
    pub max_restarts: u32,
    /// weight S of the balance term; set from the fitness section of a config
    #[serde(skip)]
    pub weight: f64,
    #[serde(skip)]
    pub orientation: FitnessOrientation,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            population_size: 4,
            neighbors_per_iteration: 4,
            convergence_patience: 3,
            max_restarts: 50,
            weight: 10.0,
            orientation: FitnessOrientation::Minimize,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.population_size == 0 {
            return Err(SearchError::NotPositive("population_size"));
        }
        if self.neighbors_per_iteration == 0 {
            return Err(SearchError::NotPositive("neighbors_per_iteration"));
        }
        if self.convergence_patience == 0 {
            return Err(SearchError::NotPositive("convergence_patience"));
        }
        if self.max_restarts == 0 {
            return Err(SearchError::NotPositive("max_restarts"));
        }
        Ok(())
    }
}

/// Strict preference: feasible beats infeasible, then fitness per orientation.
pub fn outranks(candidate: &FitnessReport, incumbent: &FitnessReport, orientation: FitnessOrientation) -> bool {
    match (candidate.feasible, incumbent.feasible) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => orientation.better(candidate.fitness, incumbent.fitness),
        (false, false) => false,
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed handed to the evaluator for `rule`, so a rule always gets the same
/// evaluation within one search.
pub fn evaluation_seed(search_seed: u64, rule: &Rule) -> u64 {
    splitmix64(splitmix64(search_seed) ^ rule.fingerprint())
}

/// Search seed for the `index`-th generation of a run.
pub fn generation_seed(run_seed: u64, index: u32) -> u64 {
    splitmix64(run_seed.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ index as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateBatch {
    pub reports: Vec<FitnessReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub current: FitnessReport,
    pub neighbors: Vec<FitnessReport>,
    pub chosen: Rule,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub evaluator: EvaluatorKind,
    pub seed: u64,
    /// fully infeasible gate batches
    pub restarts: u32,
    pub gate: Vec<GateBatch>,
    pub start: Option<FitnessReport>,
    pub iterations: Vec<Iteration>,
    pub final_report: Option<FitnessReport>,
    pub converged: bool,
    /// distinct rules actually evaluated; repeats are served from a cache
    pub evaluations: u64,
    /// evidence behind the final rule
    pub final_evidence: Option<Evidence>,
}

impl SearchTrace {
    pub fn final_rule(&self) -> Option<Rule> {
        self.final_report.as_ref().map(|r| r.rule)
    }
}

/// A fresh evaluation, as passed to the observer.
pub struct EvaluationEvent<'a> {
    pub seed: u64,
    pub evaluation: &'a Evaluation,
}

/// Runs one search, evaluating each distinct rule once.
pub struct Search<'a> {
    evaluator: &'a dyn Evaluator,
    cfg: &'a SearchConfig,
    rng: ChaCha8Rng,
    cache: HashMap<Rule, Evaluation>,
    observer: Box<dyn FnMut(EvaluationEvent<'_>) + 'a>,
    trace: SearchTrace,
}

impl<'a> Search<'a> {
    pub fn new(evaluator: &'a dyn Evaluator, cfg: &'a SearchConfig) -> Self {
        Self::with_observer(evaluator, cfg, |_| {})
    }

    /// `observer` sees every fresh evaluation in the order it enters the trace.
    pub fn with_observer(evaluator: &'a dyn Evaluator, cfg: &'a SearchConfig, observer: impl FnMut(EvaluationEvent<'_>) + 'a) -> Self {
        Self {
            evaluator,
            cfg,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cache: HashMap::new(),
            observer: Box::new(observer),
            trace: SearchTrace {
                evaluator: evaluator.kind(),
                seed: cfg.seed,
                restarts: 0,
                gate: Vec::new(),
                start: None,
                iterations: Vec::new(),
                final_report: None,
                converged: false,
                evaluations: 0,
                final_evidence: None,
            },
        }
    }

    /// Evaluates a batch, possibly in parallel, returning reports in input order.
    fn evaluate_all(&mut self, rules: &[Rule]) -> Vec<FitnessReport> {
        let mut fresh: Vec<Rule> = Vec::new();
        for r in rules {
            if !self.cache.contains_key(r) && !fresh.contains(r) {
                fresh.push(*r);
            }
        }
        let seed = self.cfg.seed;
        let evaluator = self.evaluator;
        let results: Vec<(u64, Evaluation)> = fresh
            .par_iter()
            .map(|r| {
                let s = evaluation_seed(seed, r);
                (s, evaluator.evaluate(r, s))
            })
            .collect();
        for (r, (s, evaluation)) in fresh.iter().zip(results) {
            (self.observer)(EvaluationEvent { seed: s, evaluation: &evaluation });
            self.trace.evaluations += 1;
            self.cache.insert(*r, evaluation);
        }
        rules.iter().map(|r| self.cache[r].report.clone()).collect()
    }

    fn best_of<'r>(&self, reports: &'r [FitnessReport]) -> Option<&'r FitnessReport> {
        let mut best: Option<&FitnessReport> = None;
        for r in reports.iter().filter(|r| r.feasible) {
            if best.is_none_or(|b| outranks(r, b, self.cfg.orientation)) {
                best = Some(r);
            }
        }
        best
    }

    /// Draws random batches until one contains a feasible rule and returns the
    /// best feasible member.
    pub fn gate(&mut self) -> Result<FitnessReport, SearchError> {
        loop {
            let rules: Vec<Rule> = (0..self.cfg.population_size).map(|_| rule::random_rule(&mut self.rng)).collect();
            let reports = self.evaluate_all(&rules);
            let best = self.best_of(&reports).cloned();
            self.trace.gate.push(GateBatch { reports });
            if let Some(best) = best {
                self.trace.start = Some(best.clone());
                return Ok(best);
            }
            self.trace.restarts += 1;
            if self.trace.restarts >= self.cfg.max_restarts {
                return Err(SearchError::NoFeasibleRuleFound { restarts: self.trace.restarts });
            }
        }
    }

    /// Hill climbs from a feasible start until the incumbent survives
    /// `convergence_patience` iterations in a row.
    pub fn climb(&mut self, start: Rule) -> Result<FitnessReport, SearchError> {
        let mut incumbent = self.evaluate_all(&[start]).remove(0);
        if !incumbent.feasible {
            return Err(SearchError::InfeasibleStart(start));
        }
        if self.trace.start.is_none() {
            self.trace.start = Some(incumbent.clone());
        }
        let mut stale = 0;
        while stale < self.cfg.convergence_patience {
            let rules = rule::neighbors(&incumbent.rule, &mut self.rng, self.cfg.neighbors_per_iteration);
            let neighbors = self.evaluate_all(&rules);
            let mut chosen = &incumbent;
            for n in &neighbors {
                if outranks(n, chosen, self.cfg.orientation) {
                    chosen = n;
                }
            }
            let improved = chosen.rule != incumbent.rule;
            let next = chosen.clone();
            self.trace.iterations.push(Iteration { current: incumbent.clone(), neighbors, chosen: next.rule, improved });
            if improved {
                stale = 0;
                incumbent = next;
            } else {
                stale += 1;
            }
        }
        self.trace.converged = true;
        self.trace.final_report = Some(incumbent.clone());
        self.trace.final_evidence = self.cache.get(&incumbent.rule).and_then(|e| e.evidence.clone());
        Ok(incumbent)
    }

    pub fn into_trace(self) -> SearchTrace {
        self.trace
    }

    pub fn trace(&self) -> &SearchTrace {
        &self.trace
    }
}

/// Random population with restarts until one member is feasible.
pub fn generate_and_gate(evaluator: &dyn Evaluator, cfg: &SearchConfig) -> Result<(Rule, FitnessReport), SearchError> {
    let mut search = Search::new(evaluator, cfg);
    let report = search.gate()?;
    Ok((report.rule, report))
}

/// Greedy climb from a known-feasible rule.
pub fn greedy_search(start: Rule, evaluator: &dyn Evaluator, cfg: &SearchConfig) -> Result<SearchTrace, SearchError> {
    let mut search = Search::new(evaluator, cfg);
    search.climb(start)?;
    Ok(search.into_trace())
}

/// Gate then climb, reporting every fresh evaluation to `observer`. On
/// failure the partial trace is returned alongside the error.
pub fn run_generation<'a>(
    evaluator: &'a dyn Evaluator,
    cfg: &'a SearchConfig,
    observer: impl FnMut(EvaluationEvent<'_>) + 'a,
) -> Result<SearchTrace, (SearchError, Box<SearchTrace>)> {
    let mut search = Search::with_observer(evaluator, cfg, observer);
    let outcome = search.gate().and_then(|start| search.climb(start.rule));
    match outcome {
        Ok(_) => Ok(search.into_trace()),
        Err(e) => Err((e, Box::new(search.into_trace()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{ActionCounts, EvalStats};
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    struct Stub<F: Fn(&Rule) -> (bool, f64) + Sync>(F);

    impl<F: Fn(&Rule) -> (bool, f64) + Sync> Evaluator for Stub<F> {
        fn kind(&self) -> EvaluatorKind {
            EvaluatorKind::Astar
        }

        fn evaluate(&self, rule: &Rule, _seed: u64) -> Evaluation {
            let (feasible, fitness) = (self.0)(rule);
            let report = FitnessReport {
                rule: *rule,
                evaluator: EvaluatorKind::Astar,
                feasible,
                fitness,
                stats: EvalStats {
                    steps_to_goal: 0,
                    base_moves: 0,
                    rule_uses: 0,
                    deaths: 0,
                    goal_distance: None,
                    goal_completions: feasible as u64,
                    nodes_expanded: None,
                    time_to_train: 0.0,
                },
                usage: ActionCounts::default(),
            };
            Evaluation { report, evidence: None }
        }
    }

    fn cfg(seed: u64) -> SearchConfig {
        SearchConfig { seed, ..SearchConfig::default() }
    }

    #[test]
    fn gate_returns_lowest_effect_value() {
        let stub = Stub(|r: &Rule| (true, r.effect_value() as f64));
        for seed in 0..20 {
            let c = cfg(seed);
            let (rule, report) = generate_and_gate(&stub, &c).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let population: Vec<Rule> = (0..4).map(|_| rule::random_rule(&mut rng)).collect();
            let min = population.iter().map(|r| r.effect_value()).min().unwrap();
            assert_eq!(rule.effect_value(), min);
            assert_eq!(rule, *population.iter().find(|r| r.effect_value() == min).unwrap());
            assert_eq!(report.fitness, min as f64);
        }
    }

    #[test]
    fn gate_gives_up_after_max_restarts() {
        let stub = Stub(|_: &Rule| (false, 0.0));
        let c = SearchConfig { max_restarts: 7, ..cfg(1) };
        match run_generation(&stub, &c, |_| {}) {
            Err((SearchError::NoFeasibleRuleFound { restarts }, trace)) => {
                assert_eq!(restarts, 7);
                assert_eq!(trace.gate.len(), 7);
                assert!(trace.final_report.is_none());
            }
            other => panic!("expected NoFeasibleRuleFound, got {:?}", other.map(|t| t.final_rule())),
        }
    }

    #[test]
    fn maximize_flips_selection() {
        let stub = Stub(|r: &Rule| (true, r.effect_value() as f64));
        let c = SearchConfig { orientation: FitnessOrientation::Maximize, ..cfg(5) };
        let (rule, _) = generate_and_gate(&stub, &c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let max = (0..4).map(|_| rule::random_rule(&mut rng).effect_value()).max().unwrap();
        assert_eq!(rule.effect_value(), max);
    }

    #[test]
    fn constant_landscape_converges_in_patience_iterations() {
        let stub = Stub(|_: &Rule| (true, 1.0));
        let start: Rule = "speed < 12 add 5".parse().unwrap();
        let trace = greedy_search(start, &stub, &cfg(3)).unwrap();
        assert_eq!(trace.iterations.len(), 3);
        assert_eq!(trace.final_rule(), Some(start));
        assert!(trace.converged);
        assert!(trace.iterations.iter().all(|it| it.neighbors.len() == 4 && !it.improved));
    }

    #[test]
    fn infeasible_start_rejected() {
        let stub = Stub(|r: &Rule| (r.effect_value() > 5, 0.0));
        let start: Rule = "speed < 12 add 5".parse().unwrap();
        assert_eq!(greedy_search(start, &stub, &cfg(0)).unwrap_err(), SearchError::InfeasibleStart(start));
    }

    #[test]
    fn infeasible_neighbours_never_chosen() {
        // very attractive raw fitness, but infeasible
        let stub = Stub(|r: &Rule| if r.comparison_value() == 11 { (false, -100.0) } else { (true, r.comparison_value() as f64) });
        let start: Rule = "speed < 12 add 5".parse().unwrap();
        for seed in 0..10 {
            let trace = greedy_search(start, &stub, &cfg(seed)).unwrap();
            assert_eq!(trace.final_rule(), Some(start));
            for it in &trace.iterations {
                assert!(it.current.feasible);
            }
        }
    }

    /// Independent hill climber: replays the same neighbour draws and keeps a
    /// plain fitness map, without caching or trace bookkeeping.
    fn oracle_climb(start: Rule, seed: u64, f: impl Fn(&Rule) -> f64) -> (Rule, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = start;
        let mut stale = 0;
        let mut iterations = 0;
        while stale < 3 {
            iterations += 1;
            let mut next = best;
            for _ in 0..4 {
                let field = if rng.random_bool(0.5) { rule::NumericField::Comparison } else { rule::NumericField::Effect };
                let delta = if rng.random_bool(0.5) { 1 } else { -1 };
                let n = best.mutated(field, delta);
                if f(&n) < f(&next) {
                    next = n;
                }
            }
            if next == best {
                stale += 1;
            } else {
                best = next;
                stale = 0;
            }
        }
        (best, iterations)
    }

    #[test]
    fn greedy_matches_brute_force_oracle() {
        let landscape = |r: &Rule| (r.comparison_value() - 7).abs() as f64;
        let stub = Stub(move |r: &Rule| (true, landscape(r)));
        let start: Rule = "speed < 12 add 5".parse().unwrap();
        for seed in 0..50 {
            let trace = greedy_search(start, &stub, &cfg(seed)).unwrap();
            let (oracle, iterations) = oracle_climb(start, seed, landscape);
            assert_eq!(trace.final_rule(), Some(oracle), "seed {seed}");
            assert_eq!(trace.iterations.len(), iterations);
            let mut prev = f64::INFINITY;
            for it in &trace.iterations {
                assert!(it.current.fitness <= prev);
                prev = it.current.fitness;
            }
            // with four draws a round, the basin bottom is usually reached
            assert!((trace.final_report.as_ref().unwrap().rule.comparison_value() - 7).abs() <= 5);
        }
    }

    #[test]
    fn two_dimensional_landscape_matches_oracle() {
        let landscape = |r: &Rule| ((r.comparison_value() - 15).abs() + (r.effect_value() - 2).abs()) as f64;
        let stub = Stub(move |r: &Rule| (true, landscape(r)));
        let start: Rule = "jumpforce > 3 multiply 9".parse().unwrap();
        for seed in 0..30 {
            let trace = greedy_search(start, &stub, &cfg(seed)).unwrap();
            assert_eq!(trace.final_rule(), Some(oracle_climb(start, seed, landscape).0));
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let stub = Stub(|r: &Rule| (r.variable() != rule::Variable::Speed, (r.comparison_value() * r.effect_value()) as f64));
        let a = run_generation(&stub, &cfg(11), |_| {}).unwrap();
        let b = run_generation(&stub, &cfg(11), |_| {}).unwrap();
        assert_eq!(a, b);
        assert!(a.iterations.iter().all(|it| it.neighbors.len() == 4));
    }

    #[test]
    fn observer_sees_each_distinct_rule_once() {
        let stub = Stub(|r: &Rule| (true, (r.comparison_value() - 10).abs() as f64));
        let mut seen = Vec::new();
        let trace = run_generation(&stub, &cfg(2), |e| seen.push(e.evaluation.report.rule)).unwrap();
        assert_eq!(seen.len() as u64, trace.evaluations);
        let mut unique = seen.clone();
        unique.sort();
        unique.dedup();
        assert_eq!(unique.len(), seen.len());
        let mut referenced: Vec<Rule> = trace.gate.iter().flat_map(|b| b.reports.iter().map(|r| r.rule)).collect();
        referenced.extend(trace.iterations.iter().flat_map(|it| it.neighbors.iter().map(|r| r.rule)));
        referenced.sort();
        referenced.dedup();
        assert_eq!(referenced, unique);
    }
}
