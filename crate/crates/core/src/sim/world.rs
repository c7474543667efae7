use std::fmt;

use serde::{Deserialize, Serialize};

use super::collide::{self, from_milli, snap, to_milli, Aabb, Axis, Contact};
use super::level::{LevelSpec, Tile};
use super::SimError;
use crate::rule::{self, Rule, RuleApplication, Variable};

/// Vertical offset above the standing spawn point at episode start.
pub const SPAWN_DROP: f64 = 0.5;

/// Magnitude cap for the rule-mutable scalar variables (speed, jump force) and
/// for teleport coordinates. Keeps repeated multiplication finite.
pub const VARIABLE_LIMIT: f64 = 1000.0;

/// Largest ejection distance for a player left inside a solid by a teleport.
pub const EJECT_LIMIT: f64 = 1.0;

/// Clamps a rule-written value to [`VARIABLE_LIMIT`] and snaps it onto the lattice.
pub fn clamp_variable(value: f64) -> f64 {
    snap(value.clamp(-VARIABLE_LIMIT, VARIABLE_LIMIT))
}

/// Full simulation state. Positions are the centre of the player box.
///
/// `speed`, `jump_force`, `position_x` and `position_y` are the public variables
/// generated rules read and write.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub position_x: f64,
    pub position_y: f64,
    pub velocity_x: f64,
    pub velocity_y: f64,
    pub grounded: bool,
    pub speed: f64,
    pub jump_force: f64,
    pub tick: u64,
    pub alive: bool,
    pub reached_goal: bool,
}

impl WorldState {
    pub fn is_terminal(&self) -> bool {
        !self.alive || self.reached_goal
    }

    pub fn variable(&self, var: Variable) -> f64 {
        match var {
            Variable::Speed => self.speed,
            Variable::JumpForce => self.jump_force,
            Variable::PositionX => self.position_x,
            Variable::PositionY => self.position_y,
        }
    }

    pub(crate) fn set_variable(&mut self, var: Variable, value: f64) {
        let value = clamp_variable(value);
        match var {
            Variable::Speed => self.speed = value,
            Variable::JumpForce => self.jump_force = value,
            Variable::PositionX => self.position_x = value,
            Variable::PositionY => self.position_y = value,
        }
    }

    pub(crate) fn player_box(&self, level: &LevelSpec) -> Aabb {
        Aabb::centered(
            to_milli(self.position_x),
            to_milli(self.position_y),
            to_milli(level.constants.player_width),
            to_milli(level.constants.player_height),
        )
    }

    fn set_box(&mut self, level: &LevelSpec, bx: Aabb) {
        self.position_x = from_milli(bx.x0 + to_milli(level.constants.player_width) / 2);
        self.position_y = from_milli(bx.y0 + to_milli(level.constants.player_height) / 2);
    }

    /// Whether the player box overlaps a goal tile.
    pub fn at_goal(&self, level: &LevelSpec) -> bool {
        self.player_box(level).overlaps_kind(level, Tile::Goal)
    }

    pub fn embedded(&self, level: &LevelSpec) -> bool {
        self.player_box(level).overlaps_solid(level)
    }

    /// Euclidean distance from the player centre to the nearest point at which the
    /// box would touch a goal tile. Zero on contact.
    pub fn goal_distance(&self, level: &LevelSpec) -> f64 {
        let hw = level.constants.player_width / 2.0;
        let hh = level.constants.player_height / 2.0;
        level
            .goal_tiles()
            .iter()
            .map(|&(c, r)| {
                let (x0, x1) = (c as f64 - hw, c as f64 + 1.0 + hw);
                let (y0, y1) = (r as f64 - hh, r as f64 + 1.0 + hh);
                let dx = (x0 - self.position_x).max(0.0).max(self.position_x - x1);
                let dy = (y0 - self.position_y).max(0.0).max(self.position_y - y1);
                dx.hypot(dy)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// The five agent actions, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    MoveLeft,
    MoveRight,
    Jump,
    NewRule,
    Nothing,
}

impl Action {
    pub const ALL: [Action; 5] = [Action::MoveLeft, Action::MoveRight, Action::Jump, Action::NewRule, Action::Nothing];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    /// One-letter code used in compact action strings.
    pub fn code(self) -> char {
        match self {
            Action::MoveLeft => 'L',
            Action::MoveRight => 'R',
            Action::Jump => 'J',
            Action::NewRule => 'N',
            Action::Nothing => '.',
        }
    }

    pub fn from_code(c: char) -> Option<Action> {
        Self::ALL.into_iter().find(|a| a.code() == c)
    }

    /// MoveLeft, MoveRight and Jump: the built-in movement rules.
    pub fn is_base_move(self) -> bool {
        matches!(self, Action::MoveLeft | Action::MoveRight | Action::Jump)
    }

    pub fn one_hot(self) -> [f64; 5] {
        let mut v = [0.0; 5];
        v[self.index()] = 1.0;
        v
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Action::MoveLeft => "move_left",
            Action::MoveRight => "move_right",
            Action::Jump => "jump",
            Action::NewRule => "new_rule",
            Action::Nothing => "nothing",
        };
        f.write_str(name)
    }
}

/// Encodes an action sequence as one letter per action.
pub fn encode_actions(actions: &[Action]) -> String {
    actions.iter().map(|a| a.code()).collect()
}

pub fn decode_actions(text: &str) -> Result<Vec<Action>, SimError> {
    text.chars()
        .map(|c| Action::from_code(c).ok_or(SimError::BadActionCode(c)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepEvent {
    None,
    ReachedGoal,
    Died,
    RuleTriggered,
    RuleConditionFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub next_state: WorldState,
    pub event: StepEvent,
    /// Present whenever the step pressed NewRule with a rule installed, even if
    /// the step's headline event is the goal or a death.
    pub rule: Option<RuleApplication>,
}

impl StepOutcome {
    pub fn rule_triggered(&self) -> bool {
        self.rule.is_some_and(|r| r.triggered)
    }
}

/// Initial episode state: just above the spawn point, at rest, with default
/// speed and jump force.
pub fn reset(level: &LevelSpec) -> WorldState {
    let (x, y) = level.spawn_point();
    WorldState {
        position_x: snap(x),
        position_y: snap(y + SPAWN_DROP),
        velocity_x: 0.0,
        velocity_y: 0.0,
        grounded: false,
        speed: snap(level.constants.base_speed),
        jump_force: snap(level.constants.base_jump_force),
        tick: 0,
        alive: true,
        reached_goal: false,
    }
}

/// Advances the world by one fixed timestep.
pub fn step(level: &LevelSpec, state: &WorldState, action: Action, rule: Option<&Rule>) -> Result<StepOutcome, SimError> {
    if state.is_terminal() {
        return Err(SimError::SteppedTerminalState);
    }
    let c = &level.constants;
    let mut s = *state;

    // a teleport may have left the player inside a wall on the previous tick
    let bx = s.player_box(level);
    if bx.overlaps_solid(level) {
        match collide::eject(level, bx, to_milli(EJECT_LIMIT)) {
            Some(free) => {
                s.set_box(level, free);
                s.grounded = false;
            }
            None => {
                s.alive = false;
                s.tick += 1;
                return Ok(StepOutcome { next_state: s, event: StepEvent::Died, rule: None });
            }
        }
    }

    let mut event = StepEvent::None;
    let mut application = None;
    let mut teleported = false;
    let horizontal = if s.grounded { s.speed } else { s.speed * c.air_control_factor };
    match action {
        Action::MoveLeft => s.velocity_x = snap(-horizontal),
        Action::MoveRight => s.velocity_x = snap(horizontal),
        Action::Jump => {
            s.velocity_x = 0.0;
            if s.grounded {
                s.velocity_y = s.jump_force;
                s.grounded = false;
            }
        }
        Action::NewRule => {
            s.velocity_x = 0.0;
            if let Some(rule) = rule {
                let (next, app) = rule::apply_rule(rule, &s);
                event = if app.triggered { StepEvent::RuleTriggered } else { StepEvent::RuleConditionFailed };
                teleported = app.triggered && rule.variable().is_position();
                s = next;
                application = Some(app);
            }
        }
        Action::Nothing => s.velocity_x = 0.0,
    }

    s.velocity_y = snap(s.velocity_y - c.gravity * c.timestep);
    let mut bx = s.player_box(level);
    if teleported {
        // the relocation is this tick's whole displacement and is not swept
        s.grounded = false;
    } else {
        let (after_x, _) = collide::move_axis(level, bx, Axis::X, to_milli(s.velocity_x * c.timestep));
        let dy = to_milli(s.velocity_y * c.timestep);
        let (after_y, contact) = collide::move_axis(level, after_x, Axis::Y, dy);
        s.grounded = false;
        if contact == Contact::Blocked {
            if dy < 0 {
                s.grounded = true;
            }
            s.velocity_y = 0.0;
        }
        bx = after_y;
    }
    s.set_box(level, bx);
    s.tick += 1;

    if bx.overlaps_kind(level, Tile::Goal) {
        s.reached_goal = true;
        event = StepEvent::ReachedGoal;
    } else if bx.fully_outside(level) {
        s.alive = false;
        event = StepEvent::Died;
    }
    Ok(StepOutcome { next_state: s, event, rule: application })
}

/// Re-simulates an action sequence from `reset`, stopping early on a terminal event.
pub fn rollout(level: &LevelSpec, rule: Option<&Rule>, actions: &[Action]) -> Result<Vec<StepOutcome>, SimError> {
    let mut state = reset(level);
    let mut outcomes = Vec::with_capacity(actions.len());
    for &action in actions {
        let out = step(level, &state, action, rule)?;
        state = out.next_state;
        outcomes.push(out);
    }
    Ok(outcomes)
}

/// Maximum height gained by a single jump from standing, with no rule installed.
pub fn jump_apex(level: &LevelSpec) -> f64 {
    jump_apex_with(level, level.constants.base_jump_force)
}

/// [`jump_apex`] with an explicit jump force.
pub fn jump_apex_with(level: &LevelSpec, jump_force: f64) -> f64 {
    let mut state = reset(level);
    state.jump_force = snap(jump_force);
    // settle onto the floor first
    for _ in 0..1000 {
        if state.grounded {
            break;
        }
        state = step(level, &state, Action::Nothing, None).expect("settling is non-terminal").next_state;
    }
    let base = state.position_y;
    let mut apex = base;
    state = step(level, &state, Action::Jump, None).expect("standing state is non-terminal").next_state;
    for _ in 0..10_000 {
        apex = apex.max(state.position_y);
        if state.grounded || state.is_terminal() {
            break;
        }
        state = step(level, &state, Action::Nothing, None).expect("checked non-terminal").next_state;
    }
    apex - base
}
