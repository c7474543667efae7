//! Search-based generation of platformer rules, scored by a planning agent or a
//! learning agent.

pub mod astar;
pub mod cli;
pub mod eval;
pub mod metrics;
pub mod rl;
pub mod search;
pub mod rule;
pub mod sim;
