//! Planning evaluator: A* over the simulator's action graph.
//!
//! Every edge costs one step. The heuristic is the distance to the goal region
//! divided by an upper bound on how far the player can travel in one step under
//! the level constants and the candidate rule, which keeps it admissible and
//! consistent.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{balance_term, ActionCounts, EvalStats, Evaluation, Evaluator, EvaluatorKind, Evidence, FitnessReport};
use crate::rule::{Effect, Rule, Variable};
use crate::sim::{self, clamp_variable, to_milli, Action, LevelSpec, StepEvent, WorldState, EJECT_LIMIT};

/// Default expansion budget for one plan.
pub const DEFAULT_BUDGET: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub reached: bool,
    #[serde(with = "crate::sim::serde_actions")]
    pub path: Vec<Action>,
    pub nodes_expanded: u64,
    /// T_G: path length when reached, else 0
    pub steps_to_goal: u64,
    /// T_M: base movement successors simulated during the search
    pub base_moves_explored: u64,
    /// N_R: new-rule successors whose condition held
    pub rule_uses_explored: u64,
    /// D_G: goal distance at the end of the path, or the closest approach when
    /// the goal was not reached
    pub goal_distance: f64,
    /// O_Z: successors that died
    pub deaths_explored: u64,
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("budget must be at least one expansion")]
    ZeroBudget,
    #[error("expansion budget exhausted after {} nodes", .0.nodes_expanded)]
    BudgetExhausted(Box<PlanResult>),
}

/// Closed-set key: every field that influences future transitions, on the
/// simulation lattice. Horizontal velocity is overwritten by each action and
/// the tick counter does not affect dynamics, so neither is part of the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StateKey {
    x: i64,
    y: i64,
    vy: i64,
    speed: i64,
    jump_force: i64,
    grounded: bool,
}

impl StateKey {
    pub fn of(state: &WorldState) -> Self {
        Self {
            x: to_milli(state.position_x),
            y: to_milli(state.position_y),
            vy: to_milli(state.velocity_y),
            speed: to_milli(state.speed),
            jump_force: to_milli(state.jump_force),
            grounded: state.grounded,
        }
    }
}

/// Largest magnitude `start` can reach by repeatedly applying `rule` to
/// `variable`; only the rule changes speed and jump force, so this orbit is the
/// full set of reachable values.
fn orbit_max(rule: Option<&Rule>, variable: Variable, start: f64) -> f64 {
    let start = clamp_variable(start);
    let Some(rule) = rule.filter(|r| r.variable() == variable) else {
        return start.abs();
    };
    let mut value = start;
    let mut max = value.abs();
    for _ in 0..100_000 {
        if !rule.condition_holds_for(value) {
            return max;
        }
        let next = clamp_variable(rule.effect_on(value));
        if next == value {
            return max;
        }
        value = next;
        max = max.max(value.abs());
    }
    sim::VARIABLE_LIMIT
}

/// Upper bound on one teleport along the rule's axis, for any alive position.
fn teleport_bound(rule: &Rule, lo: f64, hi: f64) -> f64 {
    let e = rule.effect_value() as f64;
    let m = lo.abs().max(hi.abs());
    match rule.effect() {
        Effect::Add | Effect::Subtract => e,
        Effect::Multiply => m * (e - 1.0),
        Effect::Divide => m * (1.0 - 1.0 / e),
        Effect::Residue => m,
    }
}

/// Upper bound on the Euclidean distance the player centre moves in one step
/// between two non-dead states.
pub fn step_bound(level: &LevelSpec, rule: Option<&Rule>) -> f64 {
    let c = &level.constants;
    let dt = c.timestep;
    let w_ext = level.width() as f64 + c.player_width;
    let h_ext = level.height() as f64 + c.player_height;
    // a single-axis move longer than this can be ejected through the far side
    // of a one-tile wall, overshooting by less than the move itself
    let overshoot = |d: f64, size: f64| if d > (1.0 + size) / 2.0 { 2.0 * d } else { d };

    let speed = orbit_max(rule, Variable::Speed, c.base_speed);
    let move_x = overshoot(speed * dt, c.player_width);

    let position_rule = rule.filter(|r| r.variable().is_position());
    let move_y = if position_rule.is_some_and(|r| r.variable() == Variable::PositionY) {
        // repeated upward teleports can keep a fall going indefinitely
        h_ext
    } else {
        let jump = orbit_max(rule, Variable::JumpForce, c.base_jump_force);
        // energy bound; doubled drop height covers pass-through ejections
        let vmax = (jump * jump + 4.0 * c.gravity * h_ext).sqrt() + c.gravity * dt;
        overshoot(vmax * dt, c.player_height)
    };

    let (mut bx, mut by) = (move_x, move_y);
    if let Some(r) = position_rule {
        match r.variable() {
            Variable::PositionX => {
                bx = bx.max(teleport_bound(r, -c.player_width / 2.0, w_ext - c.player_width / 2.0));
            }
            _ => by = by.max(teleport_bound(r, -c.player_height / 2.0, h_ext - c.player_height / 2.0)),
        }
        bx += EJECT_LIMIT;
        by += EJECT_LIMIT;
    }
    bx.min(w_ext).hypot(by.min(h_ext))
}

struct Node {
    state: WorldState,
    parent: u32,
    action: Action,
    g: u32,
}

#[derive(Debug, Clone, Copy)]
struct OpenEntry {
    f: f64,
    h: f64,
    seq: u64,
    node: u32,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenEntry {
    // reversed: BinaryHeap is a max-heap and we pop the lowest (f, h, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Shortest action sequence from `reset` to the goal, if one exists within
/// `budget` expansions.
pub fn plan(level: &LevelSpec, rule: Option<&Rule>, budget: u64) -> Result<PlanResult, PlanError> {
    plan_from(level, sim::reset(level), rule, budget)
}

/// [`plan`] starting from an arbitrary non-terminal state.
pub fn plan_from(level: &LevelSpec, start: WorldState, rule: Option<&Rule>, budget: u64) -> Result<PlanResult, PlanError> {
    if budget == 0 {
        return Err(PlanError::ZeroBudget);
    }
    let bound = step_bound(level, rule);
    let heuristic = |s: &WorldState| s.goal_distance(level) / bound;

    let mut nodes = vec![Node { state: start, parent: u32::MAX, action: Action::Nothing, g: 0 }];
    let mut open = BinaryHeap::new();
    let mut best_g: HashMap<StateKey, u32> = HashMap::new();
    let mut closed: HashSet<StateKey> = HashSet::new();
    let mut seq = 0u64;
    let h0 = heuristic(&start);
    open.push(OpenEntry { f: h0, h: h0, seq, node: 0 });
    best_g.insert(StateKey::of(&start), 0);

    let mut result = PlanResult {
        reached: false,
        path: Vec::new(),
        nodes_expanded: 0,
        steps_to_goal: 0,
        base_moves_explored: 0,
        rule_uses_explored: 0,
        goal_distance: start.goal_distance(level),
        deaths_explored: 0,
        budget_exhausted: false,
    };

    while let Some(entry) = open.pop() {
        let idx = entry.node as usize;
        let state = nodes[idx].state;
        let key = StateKey::of(&state);
        if !closed.insert(key) {
            continue;
        }
        if state.reached_goal {
            let mut path = Vec::with_capacity(nodes[idx].g as usize);
            let mut cur = idx;
            while nodes[cur].parent != u32::MAX {
                path.push(nodes[cur].action);
                cur = nodes[cur].parent as usize;
            }
            path.reverse();
            result.reached = true;
            result.steps_to_goal = path.len() as u64;
            result.goal_distance = 0.0;
            result.path = path;
            return Ok(result);
        }
        if result.nodes_expanded >= budget {
            result.budget_exhausted = true;
            return Err(PlanError::BudgetExhausted(Box::new(result)));
        }
        result.nodes_expanded += 1;
        result.goal_distance = result.goal_distance.min(state.goal_distance(level));

        let g = nodes[idx].g + 1;
        for action in Action::ALL {
            let out = sim::step(level, &state, action, rule).expect("open nodes are non-terminal");
            if action.is_base_move() {
                result.base_moves_explored += 1;
            }
            if out.rule_triggered() {
                result.rule_uses_explored += 1;
            }
            if out.event == StepEvent::Died {
                result.deaths_explored += 1;
                continue;
            }
            let next = out.next_state;
            let next_key = StateKey::of(&next);
            if closed.contains(&next_key) || best_g.get(&next_key).is_some_and(|&old| old <= g) {
                continue;
            }
            let h = heuristic(&next);
            debug_assert!(entry.h <= 1.0 + h + 1e-9, "inconsistent heuristic: {} -> {} via {action:?}", entry.h, h);
            best_g.insert(next_key, g);
            seq += 1;
            nodes.push(Node { state: next, parent: idx as u32, action, g });
            open.push(OpenEntry { f: g as f64 + h, h, seq, node: (nodes.len() - 1) as u32 });
        }
    }
    Ok(result)
}

/// `T_G + balance·S − D_G`.
pub fn fitness_astar(stats: &PlanResult, weight: f64) -> f64 {
    fitness_from_counts(stats.steps_to_goal, stats.base_moves_explored, stats.rule_uses_explored, stats.goal_distance, weight)
}

pub fn fitness_from_counts(steps_to_goal: u64, base_moves: u64, rule_uses: u64, goal_distance: f64, weight: f64) -> f64 {
    steps_to_goal as f64 + balance_term(base_moves, rule_uses) * weight - goal_distance
}

/// Plans under `rule` and scores the result. An exhausted budget counts as an
/// infeasible rule.
pub fn evaluate_rule_astar(level: &LevelSpec, rule: &Rule, budget: u64, weight: f64) -> Evaluation {
    let started = Instant::now();
    let plan = match plan(level, Some(rule), budget) {
        Ok(p) => p,
        Err(PlanError::BudgetExhausted(p)) => *p,
        Err(PlanError::ZeroBudget) => panic!("evaluator budget must be positive"),
    };
    let report = FitnessReport {
        rule: *rule,
        evaluator: EvaluatorKind::Astar,
        feasible: plan.reached,
        fitness: fitness_astar(&plan, weight),
        stats: EvalStats {
            steps_to_goal: plan.steps_to_goal,
            base_moves: plan.base_moves_explored,
            rule_uses: plan.rule_uses_explored,
            deaths: plan.deaths_explored,
            goal_distance: Some(plan.goal_distance),
            goal_completions: plan.reached as u64,
            nodes_expanded: Some(plan.nodes_expanded),
            time_to_train: started.elapsed().as_secs_f64(),
        },
        usage: ActionCounts::from_actions(&plan.path),
    };
    Evaluation { report, evidence: Some(Evidence::Plan(plan)) }
}

#[derive(Debug, Clone)]
pub struct AstarEvaluator {
    pub level: LevelSpec,
    pub budget: u64,
    pub weight: f64,
}

impl Evaluator for AstarEvaluator {
    fn kind(&self) -> EvaluatorKind {
        EvaluatorKind::Astar
    }

    fn evaluate(&self, rule: &Rule, _seed: u64) -> Evaluation {
        evaluate_rule_astar(&self.level, rule, self.budget, self.weight)
    }
}
