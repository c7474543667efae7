//! Raycast observation used as the learner's state key.

use serde::{Deserialize, Serialize};

use crate::sim::{LevelSpec, Tile, WorldState};

/// Reach of the surrounding rays, in tiles.
pub const RAY_RANGE: f64 = 6.0;

/// Upper edges of the distance bins; anything further lands in the last bin.
const BIN_EDGES: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
pub const DISTANCE_BINS: u8 = BIN_EDGES.len() as u8 + 1;

/// Ray directions, counter-clockwise from east.
pub const DIRECTIONS: [(f64, f64); 8] = {
    const D: f64 = std::f64::consts::FRAC_1_SQRT_2;
    [(1.0, 0.0), (D, D), (0.0, 1.0), (-D, D), (-1.0, 0.0), (-D, -D), (0.0, -1.0), (D, -D)]
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HitClass {
    None,
    Solid,
    Goal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RayHit {
    pub class: HitClass,
    /// distance bin; meaningless when nothing was hit
    pub bin: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation {
    /// distance bin from the bottom of the player box to the nearest solid below
    pub down: u8,
    pub around: [RayHit; 8],
    pub grounded: bool,
    pub cell: (i32, i32),
}

pub fn distance_bin(d: f64) -> u8 {
    BIN_EDGES.iter().position(|&edge| d < edge).unwrap_or(BIN_EDGES.len()) as u8
}

/// Walks the grid cells the ray crosses and reports the first solid or goal
/// cell, at the distance where the ray enters it.
fn cast(level: &LevelSpec, x: f64, y: f64, (dx, dy): (f64, f64)) -> RayHit {
    let (mut col, mut row) = (x.floor() as i64, y.floor() as i64);
    let step_c = if dx > 0.0 { 1 } else { -1 };
    let step_r = if dy > 0.0 { 1 } else { -1 };
    let delta_x = if dx == 0.0 { f64::INFINITY } else { 1.0 / dx.abs() };
    let delta_y = if dy == 0.0 { f64::INFINITY } else { 1.0 / dy.abs() };
    let mut next_x = if dx > 0.0 { (col as f64 + 1.0 - x) * delta_x } else if dx < 0.0 { (x - col as f64) * delta_x } else { f64::INFINITY };
    let mut next_y = if dy > 0.0 { (row as f64 + 1.0 - y) * delta_y } else if dy < 0.0 { (y - row as f64) * delta_y } else { f64::INFINITY };
    loop {
        let t = if next_x < next_y {
            col += step_c;
            let t = next_x;
            next_x += delta_x;
            t
        } else {
            row += step_r;
            let t = next_y;
            next_y += delta_y;
            t
        };
        if t > RAY_RANGE {
            return RayHit { class: HitClass::None, bin: DISTANCE_BINS - 1 };
        }
        match level.tile(col, row) {
            Tile::Solid => return RayHit { class: HitClass::Solid, bin: distance_bin(t) },
            Tile::Goal => return RayHit { class: HitClass::Goal, bin: distance_bin(t) },
            _ => {}
        }
    }
}

fn down_distance(level: &LevelSpec, state: &WorldState) -> f64 {
    let bottom = state.position_y - level.constants.player_height / 2.0;
    let col = state.position_x.floor() as i64;
    let mut row = bottom.ceil() as i64 - 1;
    while row >= 0 {
        if level.is_solid(col, row) {
            return bottom - (row + 1) as f64;
        }
        row -= 1;
    }
    f64::INFINITY
}

/// Deterministic encoding of a world state.
pub fn encode_state(state: &WorldState, level: &LevelSpec) -> Observation {
    let (x, y) = (state.position_x, state.position_y);
    let mut around = [RayHit { class: HitClass::None, bin: 0 }; 8];
    for (hit, dir) in around.iter_mut().zip(DIRECTIONS) {
        *hit = cast(level, x, y, dir);
    }
    Observation {
        down: distance_bin(down_distance(level, state).max(0.0)),
        around,
        grounded: state.grounded,
        cell: (x.floor().clamp(-128.0, 127.0) as i32, y.floor().clamp(-128.0, 127.0) as i32),
    }
}

impl Observation {
    /// Packs the observation into one integer for fast table lookup.
    pub fn key(&self) -> u64 {
        let mut k = self.down as u64;
        for hit in self.around {
            k = (k << 5) | ((hit.class as u64) << 3) | hit.bin as u64;
        }
        k = (k << 1) | self.grounded as u64;
        k = (k << 8) | (self.cell.0 as i8 as u8) as u64;
        (k << 8) | (self.cell.1 as i8 as u8) as u64
    }
}
