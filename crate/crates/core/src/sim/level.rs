use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;

/// The bundled default level: a floor, a `T` obstacle in the middle, spawn on the
/// left and the goal on the right.
pub const DEFAULT_LEVEL: &str = include_str!("../../levels/mechanic_maker.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tile {
    Empty,
    Solid,
    Goal,
    Spawn,
}

impl Tile {
    fn from_char(c: char) -> Option<Tile> {
        match c {
            '.' => Some(Tile::Empty),
            '#' => Some(Tile::Solid),
            'G' => Some(Tile::Goal),
            'P' => Some(Tile::Spawn),
            _ => None,
        }
    }

    fn to_char(self) -> char {
        match self {
            Tile::Empty => '.',
            Tile::Solid => '#',
            Tile::Goal => 'G',
            Tile::Spawn => 'P',
        }
    }
}

/// Physics constants of a level. Units are tiles and seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConstants {
    /// tiles/s²
    pub gravity: f64,
    /// seconds per step
    pub timestep: f64,
    /// initial vertical velocity of a jump, tiles/s
    pub base_jump_force: f64,
    /// horizontal ground speed, tiles/s
    pub base_speed: f64,
    /// multiplier applied to horizontal speed while airborne
    pub air_control_factor: f64,
    pub player_width: f64,
    pub player_height: f64,
}

impl Default for PhysicsConstants {
    fn default() -> Self {
        Self {
            gravity: 11.0,
            timestep: 0.1,
            base_jump_force: 9.0,
            base_speed: 8.0,
            air_control_factor: 0.65,
            player_width: 0.8,
            player_height: 0.8,
        }
    }
}

impl PhysicsConstants {
    fn set(&mut self, key: &str, value: f64) -> Result<(), SimError> {
        let slot = match key {
            "gravity" => &mut self.gravity,
            "timestep" => &mut self.timestep,
            "base_jump_force" => &mut self.base_jump_force,
            "base_speed" => &mut self.base_speed,
            "air_control_factor" => &mut self.air_control_factor,
            "player_width" => &mut self.player_width,
            "player_height" => &mut self.player_height,
            other => return Err(SimError::InvalidConstant(format!("unknown constant `{other}`"))),
        };
        *slot = value;
        Ok(())
    }

    fn entries(&self) -> [(&'static str, f64); 7] {
        [
            ("gravity", self.gravity),
            ("timestep", self.timestep),
            ("base_jump_force", self.base_jump_force),
            ("base_speed", self.base_speed),
            ("air_control_factor", self.air_control_factor),
            ("player_width", self.player_width),
            ("player_height", self.player_height),
        ]
    }

    fn validate(&self) -> Result<(), SimError> {
        for (key, value) in self.entries() {
            // a zero jump force is legal (used by tuning checks); everything else must be positive
            let ok = if key == "base_jump_force" {
                value.is_finite() && value >= 0.0
            } else {
                value.is_finite() && value > 0.0
            };
            if !ok {
                return Err(SimError::InvalidConstant(format!("`{key}` must be positive, got {value}")));
            }
        }
        if self.player_width >= 1.0 || self.player_height >= 1.0 {
            return Err(SimError::InvalidConstant("player box must be smaller than one tile".into()));
        }
        Ok(())
    }
}

/// A validated tile map plus physics constants.
///
/// Tile coordinates are `(column, row)` with row 0 at the bottom of the map and y
/// pointing up. Anything outside the map is empty space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSpec {
    width: usize,
    height: usize,
    tiles: Vec<Tile>,
    spawn: (usize, usize),
    goals: Vec<(usize, usize)>,
    pub constants: PhysicsConstants,
}

impl LevelSpec {
    /// Parses an ASCII map followed by an optional `key = value` constants block.
    ///
    /// Map rows are listed top to bottom. Blank lines and lines starting with `;`
    /// are ignored; the first line containing `=` ends the map.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut rows: Vec<&str> = Vec::new();
        let mut constants = PhysicsConstants::default();
        let mut in_constants = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with(';') {
                continue;
            }
            if line.contains('=') {
                in_constants = true;
                let (key, value) = line.split_once('=').expect("checked above");
                let value: f64 = value.trim().parse().map_err(|_| {
                    SimError::InvalidConstant(format!("line {}: `{}` is not a number", lineno + 1, value.trim()))
                })?;
                constants.set(key.trim(), value)?;
            } else if in_constants {
                return Err(SimError::MalformedMap(format!("line {}: map row after constants block", lineno + 1)));
            } else {
                rows.push(line);
            }
        }
        constants.validate()?;
        Self::from_rows(&rows, constants)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The bundled `T`-obstacle level.
    pub fn default_level() -> Self {
        Self::parse(DEFAULT_LEVEL).expect("bundled level is valid")
    }

    fn from_rows(rows: &[&str], constants: PhysicsConstants) -> Result<Self, SimError> {
        if rows.is_empty() {
            return Err(SimError::MalformedMap("empty map".into()));
        }
        let width = rows[0].chars().count();
        let height = rows.len();
        if width == 0 {
            return Err(SimError::MalformedMap("empty map row".into()));
        }
        let mut tiles = vec![Tile::Empty; width * height];
        let mut spawns = Vec::new();
        let mut goals = Vec::new();
        for (i, line) in rows.iter().enumerate() {
            if line.chars().count() != width {
                return Err(SimError::MalformedMap(format!(
                    "map is not rectangular: row {} has {} columns, expected {width}",
                    i + 1,
                    line.chars().count()
                )));
            }
            let row = height - 1 - i;
            for (col, c) in line.chars().enumerate() {
                let tile = Tile::from_char(c)
                    .ok_or_else(|| SimError::MalformedMap(format!("unknown tile character `{c}`")))?;
                match tile {
                    Tile::Spawn => spawns.push((col, row)),
                    Tile::Goal => goals.push((col, row)),
                    _ => {}
                }
                tiles[row * width + col] = tile;
            }
        }
        let spawn = match spawns.as_slice() {
            [only] => *only,
            [] => return Err(SimError::MalformedMap("map has no spawn tile".into())),
            _ => return Err(SimError::MalformedMap(format!("map has {} spawn tiles", spawns.len()))),
        };
        if goals.is_empty() {
            return Err(SimError::MalformedMap("map has no goal tile".into()));
        }
        Ok(Self { width, height, tiles, spawn, goals, constants })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn spawn_tile(&self) -> (usize, usize) {
        self.spawn
    }

    pub fn goal_tiles(&self) -> &[(usize, usize)] {
        &self.goals
    }

    /// Tile at `(col, row)`; out-of-range coordinates are empty.
    #[inline]
    pub fn tile(&self, col: i64, row: i64) -> Tile {
        if col < 0 || row < 0 || col >= self.width as i64 || row >= self.height as i64 {
            return Tile::Empty;
        }
        self.tiles[row as usize * self.width + col as usize]
    }

    #[inline]
    pub fn is_solid(&self, col: i64, row: i64) -> bool {
        self.tile(col, row) == Tile::Solid
    }

    /// Where the player stands on the spawn tile: horizontally centred, feet on the
    /// tile's bottom edge. Coordinates are the centre of the player box.
    pub fn spawn_point(&self) -> (f64, f64) {
        let (col, row) = self.spawn;
        (col as f64 + 0.5, row as f64 + self.constants.player_height / 2.0)
    }

    /// Height of the tallest solid run standing on top of the floor, used by tuning
    /// checks. Measured in tiles from the spawn row.
    pub fn obstacle_height(&self) -> usize {
        let floor = self.spawn.1;
        (0..self.width)
            .map(|col| {
                (floor..self.height)
                    .rev()
                    .find(|&row| self.tiles[row * self.width + col] == Tile::Solid)
                    .map_or(0, |top| top + 1 - floor)
            })
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Display for LevelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in (0..self.height).rev() {
            let line: String = (0..self.width).map(|col| self.tiles[row * self.width + col].to_char()).collect();
            writeln!(f, "{line}")?;
        }
        writeln!(f)?;
        for (key, value) in self.constants.entries() {
            writeln!(f, "{key} = {value}")?;
        }
        Ok(())
    }
}
