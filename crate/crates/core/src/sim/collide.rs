//! Box-versus-tile geometry in integer milli-tiles.
//!
//! World positions are kept on a 1/1000 tile lattice, so every overlap test here
//! is exact integer arithmetic.

use super::level::{LevelSpec, Tile};

pub(crate) const MILLI: i64 = 1000;

#[inline]
pub(crate) fn to_milli(v: f64) -> i64 {
    (v * MILLI as f64).round() as i64
}

#[inline]
pub(crate) fn from_milli(v: i64) -> f64 {
    v as f64 / MILLI as f64
}

/// Rounds a value onto the simulation lattice.
#[inline]
pub fn snap(v: f64) -> f64 {
    from_milli(to_milli(v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Aabb {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Axis {
    X,
    Y,
}

impl Aabb {
    pub fn centered(cx: i64, cy: i64, w: i64, h: i64) -> Self {
        let x0 = cx - w / 2;
        let y0 = cy - h / 2;
        Self { x0, y0, x1: x0 + w, y1: y0 + h }
    }

    pub fn shifted(self, axis: Axis, by: i64) -> Self {
        match axis {
            Axis::X => Self { x0: self.x0 + by, x1: self.x1 + by, ..self },
            Axis::Y => Self { y0: self.y0 + by, y1: self.y1 + by, ..self },
        }
    }

    fn tile_span(lo: i64, hi: i64) -> std::ops::RangeInclusive<i64> {
        lo.div_euclid(MILLI)..=(hi - 1).div_euclid(MILLI)
    }

    /// Tiles sharing a positive-area overlap with the box.
    fn tiles(self) -> impl Iterator<Item = (i64, i64)> {
        let rows = Self::tile_span(self.y0, self.y1);
        Self::tile_span(self.x0, self.x1).flat_map(move |c| rows.clone().map(move |r| (c, r)))
    }

    pub fn overlaps_kind(self, level: &LevelSpec, kind: Tile) -> bool {
        self.tiles().any(|(c, r)| level.tile(c, r) == kind)
    }

    pub fn overlaps_solid(self, level: &LevelSpec) -> bool {
        self.overlaps_kind(level, Tile::Solid)
    }

    /// True when no part of the box is inside the map rectangle.
    pub fn fully_outside(self, level: &LevelSpec) -> bool {
        let w = level.width() as i64 * MILLI;
        let h = level.height() as i64 * MILLI;
        self.x1 <= 0 || self.x0 >= w || self.y1 <= 0 || self.y0 >= h
    }
}

/// Offset along `axis` in direction `dir` (±1) that moves the box to the nearest
/// position free of solid tiles.
pub(crate) fn push_free(level: &LevelSpec, mut bx: Aabb, axis: Axis, dir: i64) -> i64 {
    let mut offset = 0;
    loop {
        let mut edge: Option<i64> = None;
        for (c, r) in bx.tiles() {
            if !level.is_solid(c, r) {
                continue;
            }
            let cell = match axis {
                Axis::X => c,
                Axis::Y => r,
            };
            let candidate = if dir < 0 { cell * MILLI } else { (cell + 1) * MILLI };
            edge = Some(match edge {
                None => candidate,
                Some(e) if dir < 0 => e.min(candidate),
                Some(e) => e.max(candidate),
            });
        }
        let Some(edge) = edge else { return offset };
        let (lo, hi) = match axis {
            Axis::X => (bx.x0, bx.x1),
            Axis::Y => (bx.y0, bx.y1),
        };
        let delta = if dir < 0 { edge - hi } else { edge - lo };
        offset += delta;
        bx = bx.shifted(axis, delta);
    }
}

/// How an axis move was resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Contact {
    Free,
    /// pushed back against the direction of travel, flush with a surface
    Blocked,
    /// pushed out through the far side of the obstacle
    PassedThrough,
}

/// Moves the box by `delta` along `axis` and ejects it from any solid it ends up
/// in, choosing whichever side is closer. Ties go against the direction of
/// travel, so a move never exceeding half the combined width of player and wall
/// always stops at the wall.
pub(crate) fn move_axis(level: &LevelSpec, bx: Aabb, axis: Axis, delta: i64) -> (Aabb, Contact) {
    let moved = bx.shifted(axis, delta);
    if delta == 0 || !moved.overlaps_solid(level) {
        return (moved, Contact::Free);
    }
    let back_dir = -delta.signum();
    let back = push_free(level, moved, axis, back_dir);
    let forward = push_free(level, moved, axis, -back_dir);
    if back.abs() <= forward.abs() {
        (moved.shifted(axis, back), Contact::Blocked)
    } else {
        (moved.shifted(axis, forward), Contact::PassedThrough)
    }
}

/// Smallest single-axis ejection for a box embedded in solid tiles, if one exists
/// within `limit` milli-tiles. Preference on ties: up, left, right, down.
pub(crate) fn eject(level: &LevelSpec, bx: Aabb, limit: i64) -> Option<Aabb> {
    let candidates = [(Axis::Y, 1), (Axis::X, -1), (Axis::X, 1), (Axis::Y, -1)];
    let mut best: Option<(i64, Aabb)> = None;
    for (axis, dir) in candidates {
        let off = push_free(level, bx, axis, dir);
        if off.abs() > limit {
            continue;
        }
        if best.is_none_or(|(d, _)| off.abs() < d) {
            best = Some((off.abs(), bx.shifted(axis, off)));
        }
    }
    best.map(|(_, b)| b)
}
