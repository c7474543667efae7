//! Generated rules: `if <variable> <comparator> <value> then <variable> <effect>= <value>`.
//!
//! A rule reads and writes the same public variable. Canonical text form is
//! `<var> <cmp> <int> <effect> <int>`, for example `position.y > 12 add 7`.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::sim::WorldState;

pub const COMPARISON_RANGE: RangeInclusive<i32> = 1..=20;
pub const EFFECT_RANGE: RangeInclusive<i32> = 1..=10;

/// Half-width of the band in which an `==` condition holds.
pub const EQ_TOLERANCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("{field} {value} outside {lo}..={hi}")]
    Range { field: &'static str, value: i64, lo: i32, hi: i32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variable {
    Speed,
    JumpForce,
    PositionX,
    PositionY,
}

impl Variable {
    pub const ALL: [Variable; 4] = [Variable::Speed, Variable::JumpForce, Variable::PositionX, Variable::PositionY];

    pub fn token(self) -> &'static str {
        match self {
            Variable::Speed => "speed",
            Variable::JumpForce => "jumpforce",
            Variable::PositionX => "position.x",
            Variable::PositionY => "position.y",
        }
    }

    /// Display name matching the usual game-code spelling.
    pub fn label(self) -> &'static str {
        match self {
            Variable::Speed => "speed",
            Variable::JumpForce => "jumpForce",
            Variable::PositionX => "position.X",
            Variable::PositionY => "position.Y",
        }
    }

    pub fn is_position(self) -> bool {
        matches!(self, Variable::PositionX | Variable::PositionY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Comparator {
    Gt,
    Lt,
    Eq,
}

impl Comparator {
    pub const ALL: [Comparator; 3] = [Comparator::Gt, Comparator::Lt, Comparator::Eq];

    pub fn token(self) -> &'static str {
        match self {
            Comparator::Gt => ">",
            Comparator::Lt => "<",
            Comparator::Eq => "==",
        }
    }

    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::Gt => value > threshold,
            Comparator::Lt => value < threshold,
            Comparator::Eq => (value - threshold).abs() <= EQ_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Effect {
    Add,
    Subtract,
    Multiply,
    Divide,
    Residue,
}

impl Effect {
    pub const ALL: [Effect; 5] = [Effect::Add, Effect::Subtract, Effect::Multiply, Effect::Divide, Effect::Residue];

    pub fn token(self) -> &'static str {
        match self {
            Effect::Add => "add",
            Effect::Subtract => "subtract",
            Effect::Multiply => "multiply",
            Effect::Divide => "divide",
            Effect::Residue => "residue",
        }
    }

    /// `Residue` is the truncated-division remainder: its sign follows `value`.
    pub fn apply(self, value: f64, operand: f64) -> f64 {
        match self {
            Effect::Add => value + operand,
            Effect::Subtract => value - operand,
            Effect::Multiply => value * operand,
            Effect::Divide => value / operand,
            Effect::Residue => value % operand,
        }
    }
}

/// Which numeric field a neighbour move changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumericField {
    Comparison,
    Effect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rule {
    variable: Variable,
    comparator: Comparator,
    comparison_value: i32,
    effect: Effect,
    effect_value: i32,
}

impl Rule {
    /// Builds a rule, clamping both numeric values into their legal ranges.
    pub fn new(variable: Variable, comparator: Comparator, comparison_value: i32, effect: Effect, effect_value: i32) -> Self {
        Self {
            variable,
            comparator,
            comparison_value: comparison_value.clamp(*COMPARISON_RANGE.start(), *COMPARISON_RANGE.end()),
            effect,
            effect_value: effect_value.clamp(*EFFECT_RANGE.start(), *EFFECT_RANGE.end()),
        }
    }

    pub fn try_new(
        variable: Variable,
        comparator: Comparator,
        comparison_value: i64,
        effect: Effect,
        effect_value: i64,
    ) -> Result<Self, RuleError> {
        check_range("comparison value", comparison_value, &COMPARISON_RANGE)?;
        check_range("effect value", effect_value, &EFFECT_RANGE)?;
        Ok(Self::new(variable, comparator, comparison_value as i32, effect, effect_value as i32))
    }

    pub fn variable(&self) -> Variable {
        self.variable
    }

    pub fn comparator(&self) -> Comparator {
        self.comparator
    }

    pub fn comparison_value(&self) -> i32 {
        self.comparison_value
    }

    pub fn effect(&self) -> Effect {
        self.effect
    }

    pub fn effect_value(&self) -> i32 {
        self.effect_value
    }

    pub fn condition_holds_for(&self, value: f64) -> bool {
        self.comparator.holds(value, self.comparison_value as f64)
    }

    pub fn effect_on(&self, value: f64) -> f64 {
        self.effect.apply(value, self.effect_value as f64)
    }

    /// Uniform draw of every field.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            variable: Variable::ALL[rng.random_range(0..Variable::ALL.len())],
            comparator: Comparator::ALL[rng.random_range(0..Comparator::ALL.len())],
            comparison_value: rng.random_range(COMPARISON_RANGE),
            effect: Effect::ALL[rng.random_range(0..Effect::ALL.len())],
            effect_value: rng.random_range(EFFECT_RANGE),
        }
    }

    /// Changes one numeric field by `delta` (±1). When that would leave the legal
    /// range the opposite sign is used instead.
    pub fn mutated(&self, field: NumericField, delta: i32) -> Self {
        let (value, range) = match field {
            NumericField::Comparison => (self.comparison_value, COMPARISON_RANGE),
            NumericField::Effect => (self.effect_value, EFFECT_RANGE),
        };
        let next = if range.contains(&(value + delta)) { value + delta } else { value - delta };
        let mut out = *self;
        match field {
            NumericField::Comparison => out.comparison_value = next,
            NumericField::Effect => out.effect_value = next,
        }
        out
    }

    /// Stable 64-bit fingerprint, independent of platform and hasher.
    pub fn fingerprint(&self) -> u64 {
        ((self.variable as u64) << 32)
            | ((self.comparator as u64) << 24)
            | ((self.comparison_value as u64) << 16)
            | ((self.effect as u64) << 8)
            | self.effect_value as u64
    }
}

fn check_range(field: &'static str, value: i64, range: &RangeInclusive<i32>) -> Result<(), RuleError> {
    if value < *range.start() as i64 || value > *range.end() as i64 {
        return Err(RuleError::Range { field, value, lo: *range.start(), hi: *range.end() });
    }
    Ok(())
}

/// Random draw of a rule.
pub fn random_rule<R: Rng + ?Sized>(rng: &mut R) -> Rule {
    Rule::random(rng)
}

/// `count` neighbours of `rule`, each differing in exactly one numeric field by one.
/// The variable, comparator and effect never change.
pub fn neighbors<R: Rng + ?Sized>(rule: &Rule, rng: &mut R, count: usize) -> Vec<Rule> {
    (0..count)
        .map(|_| {
            let field = if rng.random_bool(0.5) { NumericField::Comparison } else { NumericField::Effect };
            let delta = if rng.random_bool(0.5) { 1 } else { -1 };
            rule.mutated(field, delta)
        })
        .collect()
}

/// Outcome of pressing the new-rule action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleApplication {
    pub triggered: bool,
    pub old_value: f64,
    pub new_value: f64,
}

pub fn condition_holds(rule: &Rule, state: &WorldState) -> bool {
    rule.condition_holds_for(state.variable(rule.variable))
}

/// Applies the rule's effect to a copy of `state` when its condition holds.
/// Position effects relocate the player directly.
pub fn apply_rule(rule: &Rule, state: &WorldState) -> (WorldState, RuleApplication) {
    let old_value = state.variable(rule.variable);
    if !condition_holds(rule, state) {
        return (*state, RuleApplication { triggered: false, old_value, new_value: old_value });
    }
    let mut next = *state;
    next.set_variable(rule.variable, rule.effect_on(old_value));
    let new_value = next.variable(rule.variable);
    (next, RuleApplication { triggered: true, old_value, new_value })
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {}",
            self.variable.token(),
            self.comparator.token(),
            self.comparison_value,
            self.effect.token(),
            self.effect_value
        )
    }
}

pub fn format_rule(rule: &Rule) -> String {
    rule.to_string()
}

pub fn parse_rule(text: &str) -> Result<Rule, RuleError> {
    text.parse()
}

impl FromStr for Rule {
    type Err = RuleError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = text.split_whitespace().collect();
        let [var, cmp, cval, eff, evalue] = parts.as_slice() else {
            return Err(RuleError::Syntax(format!("expected 5 tokens, got {} in `{text}`", parts.len())));
        };
        let variable = match var.to_ascii_lowercase().as_str() {
            "speed" => Variable::Speed,
            "jumpforce" => Variable::JumpForce,
            "position.x" | "posx" => Variable::PositionX,
            "position.y" | "posy" => Variable::PositionY,
            other => return Err(RuleError::Syntax(format!("unknown variable `{other}`"))),
        };
        let comparator = match *cmp {
            ">" => Comparator::Gt,
            "<" => Comparator::Lt,
            "==" => Comparator::Eq,
            other => return Err(RuleError::Syntax(format!("unknown comparator `{other}`"))),
        };
        let effect = match eff.to_ascii_lowercase().as_str() {
            "add" => Effect::Add,
            "subtract" | "substract" => Effect::Subtract,
            "multiply" => Effect::Multiply,
            "divide" => Effect::Divide,
            "residue" => Effect::Residue,
            other => return Err(RuleError::Syntax(format!("unknown effect `{other}`"))),
        };
        let number = |tok: &str| -> Result<i64, RuleError> {
            tok.parse().map_err(|_| RuleError::Syntax(format!("`{tok}` is not an integer")))
        };
        Rule::try_new(variable, comparator, number(cval)?, effect, number(evalue)?)
    }
}

impl Serialize for Rule {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rule {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}
