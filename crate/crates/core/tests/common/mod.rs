#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};

use mechanic_forge::rule::Rule;
use mechanic_forge::sim::{reset, step, Action, LevelSpec, WorldState};

/// 10x6 level with a wall that a plain jump cannot clear.
pub const SMALL_LEVEL: &str = "\
..........
.....#....
.....#....
.....#....
.P...#..G.
##########
";

pub fn small_level() -> LevelSpec {
    LevelSpec::parse(SMALL_LEVEL).unwrap()
}

/// Every bit of a state except the tick counter.
fn bits(s: &WorldState) -> [u64; 8] {
    [
        s.position_x.to_bits(),
        s.position_y.to_bits(),
        s.velocity_x.to_bits(),
        s.velocity_y.to_bits(),
        s.speed.to_bits(),
        s.jump_force.to_bits(),
        s.grounded as u64,
        s.alive as u64,
    ]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Oracle {
    /// fewest actions from the start to the goal
    Reached(usize),
    /// no goal within the explored depth
    NotWithin(usize),
    /// the state space was exhausted without reaching the goal
    Unreachable,
}

/// Breadth-first search over exact simulator states, up to `max_depth`
/// actions and `max_states` visited states.
pub fn bfs(level: &LevelSpec, start: WorldState, rule: Option<&Rule>, max_depth: usize, max_states: usize) -> Oracle {
    if start.reached_goal {
        return Oracle::Reached(0);
    }
    let mut seen = HashSet::new();
    seen.insert(bits(&start));
    let mut frontier = VecDeque::from([(start, 0usize)]);
    while let Some((s, d)) = frontier.pop_front() {
        if d == max_depth {
            return Oracle::NotWithin(max_depth);
        }
        for a in Action::ALL {
            let next = step(level, &s, a, rule).unwrap().next_state;
            if next.reached_goal {
                return Oracle::Reached(d + 1);
            }
            if !next.alive {
                continue;
            }
            if seen.insert(bits(&next)) {
                assert!(seen.len() <= max_states, "oracle state cap {max_states} exceeded");
                frontier.push_back((next, d + 1));
            }
        }
    }
    Oracle::Unreachable
}

pub fn bfs_from_start(level: &LevelSpec, rule: Option<&Rule>, max_depth: usize, max_states: usize) -> Oracle {
    bfs(level, reset(level), rule, max_depth, max_states)
}

pub fn r(text: &str) -> Rule {
    text.parse().unwrap()
}
