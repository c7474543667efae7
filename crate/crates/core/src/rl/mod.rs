//! Learning evaluator: trains a fresh tabular agent on each candidate rule.

mod learner;
mod observe;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use learner::{ActorCritic, QTable, Transition};
pub use observe::{distance_bin, encode_state, HitClass, Observation, RayHit, DIRECTIONS, DISTANCE_BINS, RAY_RANGE};

use crate::eval::{balance_term, ActionCounts, EvalStats, Evaluation, Evaluator, EvaluatorKind, Evidence, FitnessReport};
use crate::rule::Rule;
use crate::sim::{self, Action, LevelSpec, StepEvent, StepOutcome};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RlConfigError {
    #[error("goal reward {goal} does not dominate the best wandering return {wander}")]
    GoalNotDominant { goal: f64, wander: f64 },
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("exploration schedule must not increase ({start} -> {end})")]
    IncreasingEpsilon { start: f64, end: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// paid for each movement action (everything except Nothing)
    pub move_reward: f64,
    pub goal_reward: f64,
    /// episode cap; each step also costs `1 / max_steps`
    pub max_steps: u32,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { move_reward: 0.01, goal_reward: 10.0, max_steps: 1000 }
    }
}

impl RewardConfig {
    /// Net return of a full-length episode that moves every step and never
    /// reaches the goal.
    pub fn wandering_return(&self) -> f64 {
        (self.move_reward - 1.0 / self.max_steps as f64) * self.max_steps as f64
    }

    pub fn validate(&self) -> Result<(), RlConfigError> {
        if self.max_steps == 0 {
            return Err(RlConfigError::NotPositive("max_steps"));
        }
        if self.goal_reward <= self.wandering_return() {
            return Err(RlConfigError::GoalNotDominant { goal: self.goal_reward, wander: self.wandering_return() });
        }
        Ok(())
    }
}

/// Per-step reward: movement bonus, goal bonus, and a constant time cost.
pub fn reward(outcome: &StepOutcome, action: Action, cfg: &RewardConfig) -> f64 {
    let mut r = -1.0 / cfg.max_steps as f64;
    if action != Action::Nothing {
        r += cfg.move_reward;
    }
    if outcome.event == StepEvent::ReachedGoal {
        r += cfg.goal_reward;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    QLearning,
    ActorCritic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    pub episodes_per_agent: u32,
    pub parallel_agents: u32,
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// share of the episodes over which ε decays linearly
    pub epsilon_decay_fraction: f64,
    /// starting action value; optimistic values drive systematic exploration
    pub initial_value: f64,
    /// segment length for actor-critic updates
    pub time_horizon: u32,
    /// entropy bonus weight for actor-critic
    pub entropy_beta: f64,
    /// replaced per evaluation by the search
    #[serde(skip)]
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::QLearning,
            episodes_per_agent: 2000,
            parallel_agents: 5,
            learning_rate: 0.1,
            discount: 0.99,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.6,
            initial_value: 1.0,
            time_horizon: 64,
            entropy_beta: 1e-3,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), RlConfigError> {
        if self.episodes_per_agent == 0 {
            return Err(RlConfigError::NotPositive("episodes_per_agent"));
        }
        if self.parallel_agents == 0 {
            return Err(RlConfigError::NotPositive("parallel_agents"));
        }
        if self.time_horizon == 0 {
            return Err(RlConfigError::NotPositive("time_horizon"));
        }
        if self.epsilon_end > self.epsilon_start {
            return Err(RlConfigError::IncreasingEpsilon { start: self.epsilon_start, end: self.epsilon_end });
        }
        Ok(())
    }

    /// Exploration rate for a 0-based episode index.
    pub fn epsilon(&self, episode: u32) -> f64 {
        let span = (self.episodes_per_agent as f64 * self.epsilon_decay_fraction).max(1.0);
        let t = episode as f64 / span;
        if t >= 1.0 {
            return self.epsilon_end;
        }
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t
    }

    pub fn total_episodes(&self) -> u64 {
        self.episodes_per_agent as u64 * self.parallel_agents as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeEnd {
    Goal,
    Died,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub agent: u32,
    pub episode: u32,
    pub steps: u32,
    pub end: EpisodeEnd,
    /// NewRule presses
    pub rule_uses: u32,
    /// NewRule presses whose condition held
    pub rule_triggers: u32,
    #[serde(rename = "return")]
    pub total_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub rule: Option<Rule>,
    pub time_to_train: f64,
    /// episode length of every goal completion, in completion order
    pub time_to_goal: Vec<u64>,
    pub goal_completions: u64,
    pub deaths: u64,
    #[serde(with = "crate::sim::serde_actions::many")]
    pub action_sequences: Vec<Vec<Action>>,
    pub usage_counts: ActionCounts,
    /// T_G: shortest successful episode, 0 if none
    pub steps_to_goal: u64,
    /// one entry per episode, ordered by (episode, agent)
    pub episodes: Vec<EpisodeSummary>,
}

impl TrainingRecord {
    /// T_M: base movement actions over all training.
    pub fn base_moves(&self) -> u64 {
        self.usage_counts.base_moves()
    }

    /// N_R: NewRule actions over all training.
    pub fn rule_uses(&self) -> u64 {
        self.usage_counts.get(Action::NewRule)
    }
}

enum Learner {
    Q(QTable),
    Ac(ActorCritic),
}

struct AgentRun {
    rng: ChaCha8Rng,
    state: sim::WorldState,
    key: u64,
    actions: Vec<Action>,
    segment: Vec<Transition>,
    rule_uses: u32,
    rule_triggers: u32,
    total_reward: f64,
    done: bool,
}

fn agent_seed(seed: u64, agent: u32) -> u64 {
    seed ^ (agent as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Trains from scratch. Agents run their episodes in lockstep and update one
/// shared table in agent order, so the result depends only on the inputs.
pub fn train(level: &LevelSpec, rule: Option<&Rule>, learner_cfg: &LearnerConfig, reward_cfg: &RewardConfig) -> TrainingRecord {
    train_observed(level, rule, learner_cfg, reward_cfg, |_| {})
}

/// [`train`] with a callback receiving every transition after it is applied.
pub fn train_observed(
    level: &LevelSpec,
    rule: Option<&Rule>,
    learner_cfg: &LearnerConfig,
    reward_cfg: &RewardConfig,
    mut on_transition: impl FnMut(&Transition),
) -> TrainingRecord {
    let started = Instant::now();
    let mut learner = match learner_cfg.algorithm {
        Algorithm::QLearning => Learner::Q(QTable::with_initial(learner_cfg.learning_rate, learner_cfg.discount, learner_cfg.initial_value)),
        Algorithm::ActorCritic => Learner::Ac(ActorCritic::new(
            learner_cfg.learning_rate,
            learner_cfg.learning_rate,
            learner_cfg.discount,
            learner_cfg.time_horizon as usize,
            learner_cfg.entropy_beta,
        )),
    };
    let start = sim::reset(level);
    let start_key = encode_state(&start, level).key();
    let mut agents: Vec<AgentRun> = (0..learner_cfg.parallel_agents)
        .map(|i| AgentRun {
            rng: ChaCha8Rng::seed_from_u64(agent_seed(learner_cfg.seed, i)),
            state: start,
            key: start_key,
            actions: Vec::new(),
            segment: Vec::new(),
            rule_uses: 0,
            rule_triggers: 0,
            total_reward: 0.0,
            done: false,
        })
        .collect();

    let mut record = TrainingRecord {
        rule: rule.copied(),
        time_to_train: 0.0,
        time_to_goal: Vec::new(),
        goal_completions: 0,
        deaths: 0,
        action_sequences: Vec::new(),
        usage_counts: ActionCounts::default(),
        steps_to_goal: 0,
        episodes: Vec::with_capacity(learner_cfg.total_episodes() as usize),
    };
    let horizon = learner_cfg.time_horizon as usize;

    for episode in 0..learner_cfg.episodes_per_agent {
        let epsilon = learner_cfg.epsilon(episode);
        for a in &mut agents {
            a.state = start;
            a.key = start_key;
            a.actions.clear();
            a.segment.clear();
            a.rule_uses = 0;
            a.rule_triggers = 0;
            a.total_reward = 0.0;
            a.done = false;
        }
        let mut ends = vec![EpisodeEnd::Timeout; agents.len()];
        for tick in 0..reward_cfg.max_steps {
            let mut active = false;
            for (i, a) in agents.iter_mut().enumerate() {
                if a.done {
                    continue;
                }
                active = true;
                let action = match &learner {
                    Learner::Q(q) => q.select(a.key, epsilon, &mut a.rng),
                    Learner::Ac(ac) => ac.select(a.key, &mut a.rng),
                };
                let out = sim::step(level, &a.state, action, rule).expect("agent states are non-terminal");
                let r = reward(&out, action, reward_cfg);
                let next_key = encode_state(&out.next_state, level).key();
                let terminal = out.next_state.is_terminal();
                let t = Transition { state: a.key, action, reward: r, next_state: next_key, terminal };
                let last_tick = tick + 1 == reward_cfg.max_steps;
                match &mut learner {
                    Learner::Q(q) => q.update(&t),
                    Learner::Ac(ac) => {
                        a.segment.push(t);
                        if terminal || last_tick || a.segment.len() >= horizon {
                            ac.update_segment(&a.segment);
                            a.segment.clear();
                        }
                    }
                }
                on_transition(&t);

                a.actions.push(action);
                record.usage_counts.add(action);
                if action == Action::NewRule && rule.is_some() {
                    a.rule_uses += 1;
                }
                if out.rule_triggered() {
                    a.rule_triggers += 1;
                }
                a.total_reward += r;
                a.state = out.next_state;
                a.key = next_key;
                if terminal {
                    a.done = true;
                    ends[i] = if out.event == StepEvent::ReachedGoal { EpisodeEnd::Goal } else { EpisodeEnd::Died };
                }
            }
            if !active {
                break;
            }
        }
        for (i, a) in agents.iter_mut().enumerate() {
            match ends[i] {
                EpisodeEnd::Goal => {
                    let len = a.actions.len() as u64;
                    record.time_to_goal.push(len);
                    record.goal_completions += 1;
                    record.action_sequences.push(std::mem::take(&mut a.actions));
                    if record.steps_to_goal == 0 || len < record.steps_to_goal {
                        record.steps_to_goal = len;
                    }
                }
                EpisodeEnd::Died => record.deaths += 1,
                EpisodeEnd::Timeout => {}
            }
            record.episodes.push(EpisodeSummary {
                agent: i as u32,
                episode,
                steps: a.state.tick as u32,
                end: ends[i],
                rule_uses: a.rule_uses,
                rule_triggers: a.rule_triggers,
                total_reward: a.total_reward,
            });
        }
    }
    record.time_to_train = started.elapsed().as_secs_f64();
    record
}

/// `T_G + balance·S − O_Z`.
pub fn fitness_rl(record: &TrainingRecord, weight: f64) -> f64 {
    fitness_from_counts(record.steps_to_goal, record.base_moves(), record.rule_uses(), record.deaths, weight)
}

pub fn fitness_from_counts(steps_to_goal: u64, base_moves: u64, rule_uses: u64, deaths: u64, weight: f64) -> f64 {
    steps_to_goal as f64 + balance_term(base_moves, rule_uses) * weight - deaths as f64
}

pub fn evaluate_rule_rl(
    level: &LevelSpec,
    rule: &Rule,
    learner_cfg: &LearnerConfig,
    reward_cfg: &RewardConfig,
    weight: f64,
) -> Evaluation {
    let record = train(level, Some(rule), learner_cfg, reward_cfg);
    let report = FitnessReport {
        rule: *rule,
        evaluator: EvaluatorKind::Rl,
        feasible: record.goal_completions > 0,
        fitness: fitness_rl(&record, weight),
        stats: EvalStats {
            steps_to_goal: record.steps_to_goal,
            base_moves: record.base_moves(),
            rule_uses: record.rule_uses(),
            deaths: record.deaths,
            goal_distance: None,
            goal_completions: record.goal_completions,
            nodes_expanded: None,
            time_to_train: record.time_to_train,
        },
        usage: record.usage_counts,
    };
    Evaluation { report, evidence: Some(Evidence::Training(record)) }
}

#[derive(Debug, Clone)]
pub struct RlEvaluator {
    pub level: LevelSpec,
    pub learner: LearnerConfig,
    pub reward: RewardConfig,
    pub weight: f64,
}

impl Evaluator for RlEvaluator {
    fn kind(&self) -> EvaluatorKind {
        EvaluatorKind::Rl
    }

    /// `seed` replaces the learner seed.
    fn evaluate(&self, rule: &Rule, seed: u64) -> Evaluation {
        let learner = LearnerConfig { seed, ..self.learner.clone() };
        evaluate_rule_rl(&self.level, rule, &learner, &self.reward, self.weight)
    }
}

/// Mean NewRule presses per episode over a window of episodes.
pub fn mean_rule_uses(episodes: &[EpisodeSummary]) -> f64 {
    if episodes.is_empty() {
        return 0.0;
    }
    episodes.iter().map(|e| e.rule_uses as f64).sum::<f64>() / episodes.len() as f64
}

/// Goal completions among episodes whose index falls in `[lo, hi)`.
pub fn completions_between(record: &TrainingRecord, lo: u32, hi: u32) -> usize {
    record.episodes.iter().filter(|e| e.episode >= lo && e.episode < hi && e.end == EpisodeEnd::Goal).count()
}

/// A random seed for a learner run, for callers without one.
pub fn fresh_seed<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    rng.random()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> LearnerConfig {
        LearnerConfig { episodes_per_agent: 40, parallel_agents: 2, seed: 3, ..LearnerConfig::default() }
    }

    #[test]
    fn reward_substitutions() {
        let cfg = RewardConfig::default();
        let level = LevelSpec::default_level();
        let s = sim::reset(&level);
        let plain = StepOutcome { next_state: s, event: StepEvent::None, rule: None };
        assert!((reward(&plain, Action::Nothing, &cfg) - -0.001).abs() < 1e-12);
        let goal = StepOutcome { event: StepEvent::ReachedGoal, ..plain };
        assert!((reward(&goal, Action::MoveRight, &cfg) - 10.009).abs() < 1e-12);
        let total: f64 = (0..1000).map(|_| reward(&plain, Action::Nothing, &cfg)).sum();
        assert!((total - -1.0).abs() < 1e-9);
        assert!((reward(&plain, Action::NewRule, &cfg) - 0.009).abs() < 1e-12);
    }

    #[test]
    fn reward_dominance_checked() {
        assert!(RewardConfig::default().validate().is_ok());
        let bad = RewardConfig { goal_reward: 5.0, ..RewardConfig::default() };
        assert!(matches!(bad.validate(), Err(RlConfigError::GoalNotDominant { .. })));
    }

    #[test]
    fn fitness_substitutions() {
        assert!((fitness_from_counts(100, 50, 50, 2, 10.0) - 108.0).abs() < 1e-9);
        assert!((fitness_from_counts(0, 500, 0, 7, 10.0) - -7.0).abs() < 1e-9);
        assert!((fitness_from_counts(80, 300, 100, 0, 10.0) - (80.0 + 10.0 / 3.0)).abs() < 1e-9);
    }

    #[test]
    fn epsilon_schedule() {
        let cfg = LearnerConfig::default();
        assert_eq!(cfg.epsilon(0), 1.0);
        assert!((cfg.epsilon(600) - 0.525).abs() < 1e-12);
        assert!((cfg.epsilon(1200) - 0.05).abs() < 1e-12);
        assert_eq!(cfg.epsilon(1999), 0.05);
        let mut prev = f64::INFINITY;
        for e in 0..cfg.episodes_per_agent {
            assert!(cfg.epsilon(e) <= prev);
            prev = cfg.epsilon(e);
        }
        assert!(LearnerConfig { epsilon_end: 2.0, ..cfg.clone() }.validate().is_err());
        assert!(LearnerConfig { parallel_agents: 0, ..cfg }.validate().is_err());
    }

    #[test]
    fn record_invariants_hold() {
        let level = LevelSpec::default_level();
        let rule: Rule = "position.y > 12 add 7".parse().unwrap();
        let cfg = small();
        let rec = train(&level, Some(&rule), &cfg, &RewardConfig::default());
        assert_eq!(rec.episodes.len() as u64, cfg.total_episodes());
        assert_eq!(rec.time_to_goal.len() as u64, rec.goal_completions);
        assert_eq!(rec.action_sequences.len() as u64, rec.goal_completions);
        assert_eq!(rec.steps_to_goal > 0, rec.goal_completions > 0);
        let steps: u64 = rec.episodes.iter().map(|e| e.steps as u64).sum();
        assert_eq!(steps, rec.usage_counts.total());
        let uses: u64 = rec.episodes.iter().map(|e| e.rule_uses as u64).sum();
        assert_eq!(uses, rec.rule_uses());
    }

    #[test]
    fn same_seed_same_record() {
        let level = LevelSpec::default_level();
        let rule: Rule = "speed < 10 add 8".parse().unwrap();
        let mut a = train(&level, Some(&rule), &small(), &RewardConfig::default());
        let mut b = train(&level, Some(&rule), &small(), &RewardConfig::default());
        a.time_to_train = 0.0;
        b.time_to_train = 0.0;
        assert_eq!(a, b);
        let c = train(&level, Some(&rule), &LearnerConfig { seed: 4, ..small() }, &RewardConfig::default());
        assert_ne!(a.usage_counts, c.usage_counts);
    }

    #[test]
    fn actor_critic_runs() {
        let level = LevelSpec::default_level();
        let rule: Rule = "position.y > 12 add 7".parse().unwrap();
        let cfg = LearnerConfig { algorithm: Algorithm::ActorCritic, ..small() };
        let rec = train(&level, Some(&rule), &cfg, &RewardConfig::default());
        assert_eq!(rec.episodes.len() as u64, cfg.total_episodes());
    }
}
