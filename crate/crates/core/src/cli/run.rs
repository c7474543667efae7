use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::CliError;
use crate::astar::AstarEvaluator;
use crate::eval::{ActionCounts, Evaluator, EvaluatorKind, Evidence, FitnessReport};
use crate::metrics::{usage_percentages, Table};
use crate::rl::{RlEvaluator, TrainingRecord};
use crate::rule::Rule;
use crate::search::{self, SearchTrace};
use crate::sim::{serde_actions, Action, LevelSpec};

/// One line of a run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
pub enum RunLogEntry {
    Evaluation(EvaluationEntry),
    Final(FinalEntry),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationEntry {
    pub run_seed: u64,
    pub generation: u32,
    pub evaluator: EvaluatorKind,
    /// seed handed to the evaluator
    pub seed: u64,
    pub rule: Rule,
    pub feasible: bool,
    pub fitness: f64,
    /// T_G
    pub steps_to_goal: u64,
    /// T_M
    pub base_moves: u64,
    /// N_R
    pub rule_uses: u64,
    /// O_Z
    pub deaths: u64,
    /// D_G
    pub goal_distance: Option<f64>,
    pub goal_completions: u64,
    pub nodes_expanded: Option<u64>,
    pub time_to_train: f64,
    pub time_to_goal: Vec<u64>,
    pub usage: ActionCounts,
    /// `file#line` of the successful action sequences
    pub actions_ref: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalEntry {
    pub run_seed: u64,
    pub generation: u32,
    pub evaluator: EvaluatorKind,
    pub rule: Rule,
    pub fitness: f64,
    pub usage: ActionCounts,
    pub restarts: u32,
    pub iterations: usize,
    pub evaluations: u64,
    pub trace: String,
}

/// A distinct successful action sequence and how often it occurred.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Success {
    #[serde(with = "serde_actions")]
    pub actions: Vec<Action>,
    pub count: u64,
}

/// One line of an evidence file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceEntry {
    pub evaluator: EvaluatorKind,
    pub seed: u64,
    pub rule: Rule,
    pub successes: Vec<Success>,
}

/// The final rule of a trace and an action sequence that should reach the goal
/// with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayTarget {
    pub rule: Rule,
    #[serde(with = "serde_actions")]
    pub actions: Vec<Action>,
    pub expected_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub trace: SearchTrace,
    pub replay: Option<ReplayTarget>,
    /// training record of the final rule, when the learner produced it
    pub record: Option<String>,
}

pub fn group_successes(evidence: &Evidence) -> Vec<Success> {
    let mut out: Vec<Success> = Vec::new();
    for seq in evidence.successes() {
        match out.iter_mut().find(|s| s.actions == seq) {
            Some(s) => s.count += 1,
            None => out.push(Success { actions: seq.to_vec(), count: 1 }),
        }
    }
    out
}

fn shortest_success(evidence: &Evidence) -> Option<Vec<Action>> {
    evidence.successes().into_iter().min_by_key(|s| s.len()).map(<[Action]>::to_vec)
}

/// What one (evaluator, seed) run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub evaluator: EvaluatorKind,
    pub seed: u64,
    pub log: PathBuf,
    pub finals: Vec<FinalEntry>,
    pub failures: Vec<(u32, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub outcomes: Vec<RunOutcome>,
}

impl RunSummary {
    /// True when at least one generation of any run produced a final rule.
    pub fn any_success(&self) -> bool {
        self.outcomes.iter().any(|o| !o.finals.is_empty())
    }
}

pub fn build_evaluator(kind: EvaluatorKind, level: &LevelSpec, cfg: &ExperimentConfig) -> Box<dyn Evaluator> {
    match kind {
        EvaluatorKind::Astar => Box::new(AstarEvaluator { level: level.clone(), budget: cfg.astar.budget, weight: cfg.fitness.weight }),
        EvaluatorKind::Rl => Box::new(RlEvaluator {
            level: level.clone(),
            learner: cfg.learner.clone(),
            reward: cfg.reward.clone(),
            weight: cfg.fitness.weight,
        }),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?))
}

fn write_json_line<T: Serialize>(w: &mut impl Write, path: &Path, value: &T) -> Result<(), CliError> {
    serde_json::to_writer(&mut *w, value).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    w.write_all(b"\n").map_err(|e| io_err(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer(&mut w, value).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    w.flush().map_err(|e| io_err(path, e))
}

fn evaluation_entry(run_seed: u64, generation: u32, seed: u64, report: &FitnessReport, evidence: Option<&Evidence>, actions_ref: String) -> EvaluationEntry {
    let time_to_goal = match evidence {
        Some(Evidence::Training(t)) => t.time_to_goal.clone(),
        Some(Evidence::Plan(p)) if p.reached => vec![p.steps_to_goal],
        _ => Vec::new(),
    };
    EvaluationEntry {
        run_seed,
        generation,
        evaluator: report.evaluator,
        seed,
        rule: report.rule,
        feasible: report.feasible,
        fitness: report.fitness,
        steps_to_goal: report.stats.steps_to_goal,
        base_moves: report.stats.base_moves,
        rule_uses: report.stats.rule_uses,
        deaths: report.stats.deaths,
        goal_distance: report.stats.goal_distance,
        goal_completions: report.stats.goal_completions,
        nodes_expanded: report.stats.nodes_expanded,
        time_to_train: report.stats.time_to_train,
        time_to_goal,
        usage: report.usage,
        actions_ref,
    }
}

/// Runs every generation for one evaluator and seed, writing its own log,
/// evidence, trace and record files.
fn run_one(cfg: &ExperimentConfig, level: &LevelSpec, kind: EvaluatorKind, run_seed: u64, generations: u32) -> Result<RunOutcome, CliError> {
    let out = &cfg.output_dir;
    let stem = format!("{kind}-s{run_seed}");
    let log_path = out.join(format!("run-{stem}.jsonl"));
    let evidence_rel = format!("evidence/{stem}.jsonl");
    let evidence_path = out.join(&evidence_rel);
    let mut log = create(&log_path)?;
    let mut evidence_file = create(&evidence_path)?;
    let evaluator = build_evaluator(kind, level, cfg);
    let mut evidence_line = 0u64;
    let mut finals = Vec::new();
    let mut failures = Vec::new();

    for generation in 0..generations {
        let search_cfg = cfg.search_for(search::generation_seed(run_seed, generation));
        let mut pending: Result<(), CliError> = Ok(());
        let result = search::run_generation(evaluator.as_ref(), &search_cfg, |event| {
            if pending.is_err() {
                return;
            }
            let ev = event.evaluation;
            let successes = ev.evidence.as_ref().map(group_successes).unwrap_or_default();
            evidence_line += 1;
            let entry = EvidenceEntry { evaluator: kind, seed: event.seed, rule: ev.report.rule, successes };
            pending = write_json_line(&mut evidence_file, &evidence_path, &entry).and_then(|_| {
                let logged = evaluation_entry(run_seed, generation, event.seed, &ev.report, ev.evidence.as_ref(), format!("{evidence_rel}#{evidence_line}"));
                write_json_line(&mut log, &log_path, &RunLogEntry::Evaluation(logged))
            });
        });
        pending?;
        match result {
            Ok(mut trace) => {
                let final_report = trace.final_report.clone().expect("converged traces have a final report");
                let evidence = trace.final_evidence.take();
                let trace_rel = format!("traces/{stem}-g{generation}.json");
                let mut record_rel = None;
                if let Some(Evidence::Training(record)) = &evidence {
                    let rel = format!("records/{stem}-g{generation}.json");
                    write_json(&out.join(&rel), record)?;
                    record_rel = Some(rel);
                }
                let replay = evidence.as_ref().and_then(shortest_success).map(|actions| ReplayTarget {
                    rule: final_report.rule,
                    expected_steps: actions.len() as u64,
                    actions,
                });
                write_json(&out.join(&trace_rel), &TraceFile { trace: trace.clone(), replay, record: record_rel })?;
                let entry = FinalEntry {
                    run_seed,
                    generation,
                    evaluator: kind,
                    rule: final_report.rule,
                    fitness: final_report.fitness,
                    usage: final_report.usage,
                    restarts: trace.restarts,
                    iterations: trace.iterations.len(),
                    evaluations: trace.evaluations,
                    trace: trace_rel,
                };
                write_json_line(&mut log, &log_path, &RunLogEntry::Final(entry.clone()))?;
                finals.push(entry);
            }
            Err((e, trace)) => {
                let trace_rel = format!("traces/{stem}-g{generation}.json");
                write_json(&out.join(&trace_rel), &TraceFile { trace: *trace, replay: None, record: None })?;
                failures.push((generation, e.to_string()));
            }
        }
    }
    log.flush().map_err(|e| io_err(&log_path, e))?;
    evidence_file.flush().map_err(|e| io_err(&evidence_path, e))?;
    Ok(RunOutcome { evaluator: kind, seed: run_seed, log: log_path, finals, failures })
}

fn summary_table(outcomes: &[RunOutcome]) -> Table {
    let mut t = Table::new(&["evaluator", "seed", "generation", "rule", "fitness", "new_rule_pct", "restarts", "iterations", "evaluations"]);
    for o in outcomes {
        for f in &o.finals {
            let pct = usage_percentages(&f.usage).map(|p| format!("{:.1}%", p[Action::NewRule.index()])).unwrap_or_else(|_| "-".into());
            t.push(vec![
                f.evaluator.label().into(),
                f.run_seed.to_string(),
                f.generation.to_string(),
                f.rule.to_string(),
                format!("{:.3}", f.fitness),
                pct,
                f.restarts.to_string(),
                f.iterations.to_string(),
                f.evaluations.to_string(),
            ]);
        }
        for (g, err) in &o.failures {
            t.push(vec![o.evaluator.label().into(), o.seed.to_string(), g.to_string(), format!("failed: {err}"), "-".into(), "-".into(), "-".into(), "-".into(), "-".into()]);
        }
    }
    t
}

/// Runs the seed by evaluator grid and writes the summary tables.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunSummary, CliError> {
    let level = cfg.load_level()?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| io_err(&cfg.output_dir, e))?;
    let grid: Vec<(EvaluatorKind, u64)> = cfg.evaluators.iter().flat_map(|k| cfg.seeds.iter().map(move |s| (*k, *s))).collect();
    let outcomes = grid
        .par_iter()
        .map(|(kind, seed)| run_one(cfg, &level, *kind, *seed, cfg.generations))
        .collect::<Result<Vec<_>, _>>()?;

    let table = summary_table(&outcomes);
    fs::write(cfg.output_dir.join("summary.csv"), table.to_csv()).map_err(|e| io_err(&cfg.output_dir, e))?;
    fs::write(cfg.output_dir.join("summary.txt"), table.to_text()).map_err(|e| io_err(&cfg.output_dir, e))?;
    fs::write(cfg.output_dir.join("config.toml"), cfg.to_toml()).map_err(|e| io_err(&cfg.output_dir, e))?;
    Ok(RunSummary { outcomes })
}

/// Parses a run log.
pub fn read_log(path: &Path) -> Result<Vec<RunLogEntry>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::Parse(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

pub fn read_training_record(path: &Path) -> Result<TrainingRecord, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn read_trace(path: &Path) -> Result<TraceFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}
