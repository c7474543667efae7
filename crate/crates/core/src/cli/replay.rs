use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{read_trace, ReplayTarget};
use super::CliError;
use crate::rule::Rule;
use crate::sim::{reset, step, Action, LevelSpec, StepEvent, Tile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReplayFormat {
    #[default]
    Ascii,
    Svg,
}

/// Highlight for ticks around a rule trigger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mark {
    Trigger,
    After,
}

/// Player state after one tick. Frame 0 is the reset state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub tick: u64,
    pub action: Option<Action>,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub jump_force: f64,
    pub grounded: bool,
    pub event: Option<StepEvent>,
    pub mark: Option<Mark>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOptions {
    pub out: PathBuf,
    pub format: ReplayFormat,
    /// replaces the trace's rule
    pub rule: Option<Rule>,
    /// level the trace was produced on; the bundled level when absent
    pub level: Option<PathBuf>,
}

/// Re-simulates `target` and checks it reaches the goal on exactly its last
/// action.
pub fn replay_target(level: &LevelSpec, target: &ReplayTarget) -> Result<Vec<Frame>, CliError> {
    let diverged = |m: String| CliError::ReplayDivergence(m);
    if target.actions.len() as u64 != target.expected_steps {
        return Err(diverged(format!("{} actions logged for {} steps", target.actions.len(), target.expected_steps)));
    }
    let mut state = reset(level);
    let mut frames = vec![Frame {
        tick: 0,
        action: None,
        x: state.position_x,
        y: state.position_y,
        speed: state.speed,
        jump_force: state.jump_force,
        grounded: state.grounded,
        event: None,
        mark: None,
    }];
    let mut after_trigger = false;
    for (i, &action) in target.actions.iter().enumerate() {
        let out = step(level, &state, action, Some(&target.rule))
            .map_err(|_| diverged(format!("episode ended at tick {} before the logged {} steps", i, target.expected_steps)))?;
        state = out.next_state;
        let mark = if out.rule_triggered() {
            Some(Mark::Trigger)
        } else if after_trigger {
            Some(Mark::After)
        } else {
            None
        };
        after_trigger = out.rule_triggered();
        frames.push(Frame {
            tick: state.tick,
            action: Some(action),
            x: state.position_x,
            y: state.position_y,
            speed: state.speed,
            jump_force: state.jump_force,
            grounded: state.grounded,
            event: Some(out.event),
            mark,
        });
    }
    if !state.reached_goal {
        return Err(diverged(format!("{} steps replayed without reaching the goal", target.expected_steps)));
    }
    Ok(frames)
}

fn cell(level: &LevelSpec, x: f64, y: f64) -> Option<(usize, usize)> {
    let (c, r) = (x.floor(), y.floor());
    (c >= 0.0 && r >= 0.0 && (c as usize) < level.width() && (r as usize) < level.height()).then_some((c as usize, r as usize))
}

/// The level map with the trajectory drawn over it: `o` for ordinary ticks,
/// `T` where the rule triggered and `n` on the tick after.
pub fn render_ascii(level: &LevelSpec, rule: &Rule, frames: &[Frame]) -> String {
    let (w, h) = (level.width(), level.height());
    let mut grid: Vec<Vec<char>> = (0..h)
        .map(|r| {
            (0..w)
                .map(|c| match level.tile(c as i64, r as i64) {
                    Tile::Empty => '.',
                    Tile::Solid => '#',
                    Tile::Goal => 'G',
                    Tile::Spawn => 'P',
                })
                .collect()
        })
        .collect();
    for f in frames {
        if let Some((c, r)) = cell(level, f.x, f.y) {
            let ch = match f.mark {
                Some(Mark::Trigger) => 'T',
                Some(Mark::After) => 'n',
                None => 'o',
            };
            let slot = &mut grid[r][c];
            if *slot != 'T' && *slot != 'n' {
                *slot = ch;
            }
        }
    }
    let mut out = format!("rule: {rule}\nsteps: {}\n", frames.len() - 1);
    for row in grid.iter().rev() {
        out.extend(row.iter());
        out.push('\n');
    }
    for pair in frames.windows(2) {
        if pair[1].mark == Some(Mark::Trigger) {
            let (a, b) = (&pair[0], &pair[1]);
            let _ = writeln!(out, "tick {}: ({:.3}, {:.3}) -> ({:.3}, {:.3})", b.tick, a.x, a.y, b.x, b.y);
        }
    }
    out
}

/// SVG version of [`render_ascii`]: yellow for trigger ticks, purple for the
/// tick after.
pub fn render_svg(level: &LevelSpec, rule: &Rule, frames: &[Frame]) -> String {
    const S: f64 = 20.0;
    let (w, h) = (level.width() as f64, level.height() as f64);
    let py = |y: f64| (h - y) * S;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n<title>{rule}</title>\n",
        w * S,
        h * S + S,
        w * S,
        h * S + S
    );
    for r in 0..level.height() {
        for c in 0..level.width() {
            let fill = match level.tile(c as i64, r as i64) {
                Tile::Solid => "#555555",
                Tile::Goal => "#3cb043",
                _ => continue,
            };
            let _ = writeln!(out, "<rect x=\"{}\" y=\"{}\" width=\"{S}\" height=\"{S}\" fill=\"{fill}\"/>", c as f64 * S, py(r as f64 + 1.0));
        }
    }
    let points: Vec<String> = frames.iter().map(|f| format!("{:.1},{:.1}", f.x * S, py(f.y))).collect();
    let _ = writeln!(out, "<polyline points=\"{}\" fill=\"none\" stroke=\"#4a7fd4\" stroke-width=\"1\"/>", points.join(" "));
    for f in frames {
        let (fill, r) = match f.mark {
            Some(Mark::Trigger) => ("#f5d000", 5.0),
            Some(Mark::After) => ("#8e44ad", 5.0),
            None => ("#4a7fd4", 2.5),
        };
        let _ = writeln!(out, "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"{r}\" fill=\"{fill}\"><title>tick {}</title></circle>", f.x * S, py(f.y), f.tick);
    }
    let _ = writeln!(out, "<text x=\"4\" y=\"{:.1}\" font-size=\"12\" font-family=\"monospace\">{rule}</text>", h * S + S - 5.0);
    out.push_str("</svg>\n");
    out
}

/// Path of the per-tick records written next to a rendering.
pub fn frames_path(out: &Path) -> PathBuf {
    let mut name = out.file_stem().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".frames.jsonl");
    out.with_file_name(name)
}

/// Replays a trace file's successful action sequence and writes the rendering
/// to `opts.out` and per-tick records beside it.
pub fn cmd_replay(trace: &Path, opts: &ReplayOptions) -> Result<Vec<Frame>, CliError> {
    let file = read_trace(trace)?;
    let mut target = file
        .replay
        .ok_or_else(|| CliError::Parse(format!("{} holds no successful action sequence", trace.display())))?;
    if let Some(rule) = opts.rule {
        target.rule = rule;
    }
    let level = match &opts.level {
        Some(p) => LevelSpec::load(p).map_err(|e| CliError::Config(e.to_string()))?,
        None => LevelSpec::default_level(),
    };
    let frames = replay_target(&level, &target)?;
    let rendering = match opts.format {
        ReplayFormat::Ascii => render_ascii(&level, &target.rule, &frames),
        ReplayFormat::Svg => render_svg(&level, &target.rule, &frames),
    };
    let io = |p: &Path, e: std::io::Error| CliError::Io(format!("{}: {e}", p.display()));
    if let Some(dir) = opts.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    }
    fs::write(&opts.out, rendering).map_err(|e| io(&opts.out, e))?;
    let mut lines = String::new();
    for f in &frames {
        lines.push_str(&serde_json::to_string(f).expect("frames serialize"));
        lines.push('\n');
    }
    let fp = frames_path(&opts.out);
    fs::write(&fp, lines).map_err(|e| io(&fp, e))?;
    Ok(frames)
}
