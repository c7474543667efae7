mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use common::r;
use mechanic_forge::astar::plan;
use mechanic_forge::cli::compare::{compare_logs, CompareOptions};
use mechanic_forge::cli::replay::{replay_target, Mark, ReplayFormat, ReplayOptions};
use mechanic_forge::cli::run::{EvidenceEntry, FinalEntry, ReplayTarget, TraceFile};
use mechanic_forge::cli::{self, CliError, ExperimentConfig, RunLogEntry};
use mechanic_forge::eval::{ActionCounts, EvaluatorKind};
use mechanic_forge::rule::Rule;
use mechanic_forge::sim::{rollout, Action, LevelSpec, StepEvent};

fn small_config(out: &Path, evaluators: Vec<EvaluatorKind>, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig { evaluators, seeds: vec![seed], generations: 1, output_dir: out.to_path_buf(), ..ExperimentConfig::default() };
    cfg.learner.episodes_per_agent = 150;
    cfg
}

/// Log text with every wall-clock field removed.
fn strip_clock(text: &str) -> String {
    text.lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("time_to_train");
            v.to_string()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn runs_are_reproducible_and_complete() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let summaries: Vec<_> = dirs
        .iter()
        .map(|d| cli::cmd_run(&small_config(d.path(), vec![EvaluatorKind::Astar, EvaluatorKind::Rl], 4)).unwrap())
        .collect();
    assert!(summaries[0].any_success());
    let level = LevelSpec::default_level();

    for kind in ["astar", "rl"] {
        let name = format!("run-{kind}-s4.jsonl");
        let a = fs::read_to_string(dirs[0].path().join(&name)).unwrap();
        let b = fs::read_to_string(dirs[1].path().join(&name)).unwrap();
        assert_eq!(strip_clock(&a), strip_clock(&b), "{name} differs between runs");
        let ev = format!("evidence/{kind}-s4.jsonl");
        assert_eq!(fs::read(dirs[0].path().join(&ev)).unwrap(), fs::read(dirs[1].path().join(&ev)).unwrap());

        // every evaluation appears once, and the counts agree with the traces
        let entries = cli::read_log(&dirs[0].path().join(&name)).unwrap();
        let evaluations: Vec<_> = entries.iter().filter_map(|e| if let RunLogEntry::Evaluation(v) = e { Some(v) } else { None }).collect();
        let mut rules: Vec<Rule> = evaluations.iter().map(|v| v.rule).collect();
        rules.sort();
        rules.dedup();
        assert_eq!(rules.len(), evaluations.len());
        let traced: u64 = fs::read_dir(dirs[0].path().join("traces"))
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with(kind))
            .map(|p| cli::read_trace(&p).unwrap().trace.evaluations)
            .sum();
        assert_eq!(traced, evaluations.len() as u64);

        // every logged success replays to the goal at its logged length
        let evidence = fs::read_to_string(dirs[0].path().join(&ev)).unwrap();
        for line in evidence.lines() {
            let entry: EvidenceEntry = serde_json::from_str(line).unwrap();
            for s in &entry.successes {
                let outcomes = rollout(&level, Some(&entry.rule), &s.actions).unwrap();
                assert_eq!(outcomes.len(), s.actions.len());
                assert_eq!(outcomes.last().unwrap().event, StepEvent::ReachedGoal, "{}", entry.rule);
            }
        }
        for v in &evaluations {
            let line: usize = v.actions_ref.rsplit('#').next().unwrap().parse().unwrap();
            let entry: EvidenceEntry = serde_json::from_str(evidence.lines().nth(line - 1).unwrap()).unwrap();
            assert_eq!(entry.rule, v.rule);
            assert_eq!(entry.successes.is_empty(), !v.feasible);
        }
    }

    let finals: Vec<FinalEntry> = cli::read_log(&dirs[0].path().join("run-astar-s4.jsonl"))
        .unwrap()
        .into_iter()
        .filter_map(|e| if let RunLogEntry::Final(f) = e { Some(f) } else { None })
        .collect();
    assert_eq!(finals.len(), 1);
    let trace = cli::read_trace(&dirs[0].path().join(&finals[0].trace)).unwrap();
    let target = trace.replay.unwrap();
    let frames = replay_target(&level, &target).unwrap();
    assert_eq!(frames.len() as u64, target.expected_steps + 1);

    // the effective config written beside the logs reloads unchanged
    let written = fs::read_to_string(dirs[0].path().join("config.toml")).unwrap();
    assert_eq!(ExperimentConfig::from_toml(&written).unwrap(), small_config(dirs[0].path(), vec![EvaluatorKind::Astar, EvaluatorKind::Rl], 4));

    // the learner's final record feeds the usage curve
    if let Some(rel) = cli::read_log(&dirs[0].path().join("run-rl-s4.jsonl"))
        .unwrap()
        .into_iter()
        .find_map(|e| if let RunLogEntry::Final(f) = e { Some(f.trace) } else { None })
    {
        let record = cli::read_trace(&dirs[0].path().join(rel)).unwrap().record.unwrap();
        let out = dirs[0].path().join("curve.csv");
        let rows = cli::cmd_usage_curve(&dirs[0].path().join(record), &out).unwrap();
        assert_eq!(rows, 150 * 5);
        assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 150 * 5 + 1);
    }
}

#[test]
fn missing_level_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    fs::write(&path, "level = \"nowhere.txt\"\n").unwrap();
    assert!(matches!(ExperimentConfig::load(&path), Err(CliError::Config(_))));
    let status = Command::new(env!("CARGO_BIN_EXE_mechanic-forge")).args(["run", "--config"]).arg(&path).output().unwrap().status;
    assert!(!status.success());
}

#[test]
fn binary_runs_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_mechanic-forge"))
        .args(["run", "--evaluator", "astar", "--seed", "1", "--out"])
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let svg = dir.path().join("replay.svg");
    let status = Command::new(env!("CARGO_BIN_EXE_mechanic-forge"))
        .arg("replay")
        .arg(out.join("traces/astar-s1-g0.json"))
        .args(["--format", "svg", "--out"])
        .arg(&svg)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    assert!(fs::read_to_string(dir.path().join("replay.frames.jsonl")).unwrap().lines().count() > 1);
}

fn write_finals(path: &Path, kind: EvaluatorKind, rules: &[&str]) {
    let mut text = String::new();
    for (i, rule) in rules.iter().enumerate() {
        let usage = ActionCounts([3, 4, 1, 2, 0]);
        let entry = RunLogEntry::Final(FinalEntry {
            run_seed: 1,
            generation: i as u32,
            evaluator: kind,
            rule: r(rule),
            fitness: 1.0,
            usage,
            restarts: 0,
            iterations: 3,
            evaluations: 9,
            trace: String::new(),
        });
        text.push_str(&serde_json::to_string(&entry).unwrap());
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

const POOL: [&str; 13] = [
    "jumpforce < 11 add 10",
    "jumpforce > 3 multiply 10",
    "jumpforce == 4 add 9",
    "position.y < 8 add 8",
    "position.y > 3 multiply 2",
    "position.y > 12 add 7",
    "speed < 10 add 8",
    "speed > 2 multiply 3",
    "position.x < 10 multiply 3",
    "position.x == 5 add 6",
    "jumpforce < 16 divide 2",
    "speed == 8 residue 5",
    "position.y < 20 subtract 1",
];

#[test]
fn identical_logs_compare_equal_to_themselves() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("a.jsonl");
    write_finals(&log, EvaluatorKind::Rl, &POOL);
    let opts = CompareOptions { out: dir.path().join("cmp"), seed: 5, ..CompareOptions::default() };
    let report = cli::cmd_compare(&log, &log, &opts).unwrap();
    assert_eq!(report.pool_a.len(), 12);
    assert_eq!(report.similarity.rows[0][1], report.similarity.rows[0][3]);
    assert_eq!(report.similarity.headers[1..], ["RL(A)vsRL(A)", "RL(B)vsRL(B)", "RL(A)vsRL(B)"]);
    for name in ["similarity", "usage_a", "usage_b", "breakdown"] {
        assert!(opts.out.join(format!("{name}.csv")).is_file());
        assert!(opts.out.join(format!("{name}.txt")).is_file());
    }
    assert_eq!(report.usage_a.rows[0][2], "20.0%");
}

#[test]
fn compare_labels_follow_the_evaluators() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("rl.jsonl"), dir.path().join("astar.jsonl"));
    write_finals(&a, EvaluatorKind::Rl, &POOL);
    write_finals(&b, EvaluatorKind::Astar, &POOL[1..]);
    let report = compare_logs(&a, &b, &CompareOptions::default()).unwrap();
    assert_eq!(report.similarity.headers[1..], ["RLvsRL", "A*vsA*", "RLvsA*"]);
    assert_eq!(report.similarity.rows[2][3], "144");
}

#[test]
fn small_pools_need_an_override() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("a.jsonl");
    write_finals(&log, EvaluatorKind::Astar, &POOL[..5]);
    let err = compare_logs(&log, &log, &CompareOptions::default()).unwrap_err();
    assert!(matches!(err, CliError::InsufficientPool { found: 5, needed: 12, .. }));
    let report = compare_logs(&log, &log, &CompareOptions { min_pool: Some(5), ..CompareOptions::default() }).unwrap();
    assert_eq!(report.pool_a.len(), 5);
}

#[test]
fn vertical_teleport_replay_shows_the_relocation() {
    let level = LevelSpec::default_level();
    let rule = r("position.y > 12 add 7");
    let path = plan(&level, Some(&rule), 2_000_000).unwrap().path;
    let target = ReplayTarget { rule, expected_steps: path.len() as u64, actions: path };
    let frames = replay_target(&level, &target).unwrap();
    assert!(frames.last().unwrap().event == Some(StepEvent::ReachedGoal));
    let lifted = frames.windows(2).any(|w| w[1].mark == Some(Mark::Trigger) && w[1].y - w[0].y > 5.0);
    assert!(lifted, "no trigger frame moves the player up over the obstacle");
    let after = frames.iter().position(|f| f.mark == Some(Mark::Trigger)).unwrap() + 1;
    assert!(frames[after].mark.is_some());
}

#[test]
fn tampered_actions_diverge() {
    let level = LevelSpec::default_level();
    let rule = r("speed < 10 add 8");
    let mut actions = plan(&level, Some(&rule), 2_000_000).unwrap().path;
    let target = ReplayTarget { rule, expected_steps: actions.len() as u64, actions: actions.clone() };
    assert!(replay_target(&level, &target).is_ok());
    actions[0] = Action::MoveLeft;
    let tampered = ReplayTarget { actions: actions.clone(), ..target.clone() };
    assert!(matches!(replay_target(&level, &tampered), Err(CliError::ReplayDivergence(_))));
    let short = ReplayTarget { expected_steps: target.expected_steps + 1, ..target.clone() };
    assert!(matches!(replay_target(&level, &short), Err(CliError::ReplayDivergence(_))));

    let dir = tempfile::tempdir().unwrap();
    let trace_path = dir.path().join("t.json");
    let trace = mechanic_forge::search::SearchTrace {
        evaluator: EvaluatorKind::Astar,
        seed: 0,
        restarts: 0,
        gate: vec![],
        start: None,
        iterations: vec![],
        final_report: None,
        converged: false,
        evaluations: 0,
        final_evidence: None,
    };
    fs::write(&trace_path, serde_json::to_string(&TraceFile { trace, replay: Some(tampered), record: None }).unwrap()).unwrap();
    let opts = ReplayOptions { out: dir.path().join("r.txt"), format: ReplayFormat::Ascii, rule: None, level: None };
    assert!(matches!(cli::cmd_replay(&trace_path, &opts), Err(CliError::ReplayDivergence(_))));
}
