//! Deterministic fixed-timestep platformer simulation.
//!
//! `step` is a pure function of its inputs; a [`WorldState`] is a plain value and
//! any number of simulations can run side by side.

mod collide;
mod level;
pub mod serde_actions;
mod world;

use thiserror::Error;

pub use collide::snap;
pub(crate) use collide::to_milli;
pub use level::{LevelSpec, PhysicsConstants, Tile, DEFAULT_LEVEL};
pub use world::{
    clamp_variable, decode_actions, encode_actions, jump_apex, jump_apex_with, reset, rollout, step, Action, StepEvent, StepOutcome,
    WorldState, EJECT_LIMIT, SPAWN_DROP, VARIABLE_LIMIT,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("malformed map: {0}")]
    MalformedMap(String),
    #[error("invalid level constant: {0}")]
    InvalidConstant(String),
    #[error("cannot step a terminal state")]
    SteppedTerminalState,
    #[error("unknown action code `{0}`")]
    BadActionCode(char),
    #[error("io error: {0}")]
    Io(String),
}
