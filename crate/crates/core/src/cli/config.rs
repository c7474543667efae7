use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::astar::DEFAULT_BUDGET;
use crate::eval::{EvaluatorKind, FitnessOrientation};
use crate::rl::{LearnerConfig, RewardConfig};
use crate::search::SearchConfig;
use crate::sim::LevelSpec;

/// Environment variable that replaces the configured seed list.
pub const SEED_ENV: &str = "MECHANIC_FORGE_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitnessConfig {
    /// S, the balance-term weight
    pub weight: f64,
    pub orientation: FitnessOrientation,
}

impl Default for FitnessConfig {
    fn default() -> Self {
        Self { weight: 10.0, orientation: FitnessOrientation::Minimize }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AstarConfig {
    pub budget: u64,
}

impl Default for AstarConfig {
    fn default() -> Self {
        Self { budget: DEFAULT_BUDGET }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// level file, relative to the config file; the bundled level when absent
    pub level: Option<PathBuf>,
    pub evaluators: Vec<EvaluatorKind>,
    pub seeds: Vec<u64>,
    /// searches per seed and evaluator
    pub generations: u32,
    pub output_dir: PathBuf,
    pub fitness: FitnessConfig,
    pub search: SearchConfig,
    pub astar: AstarConfig,
    pub learner: LearnerConfig,
    pub reward: RewardConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            level: None,
            evaluators: vec![EvaluatorKind::Astar],
            seeds: vec![1],
            generations: 1,
            output_dir: PathBuf::from("runs"),
            fitness: FitnessConfig::default(),
            search: SearchConfig::default(),
            astar: AstarConfig::default(),
            learner: LearnerConfig::default(),
            reward: RewardConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable as TOML")
    }

    /// Reads and validates a config file. Relative paths inside it are resolved
    /// against the file's directory, and the seed list may be replaced from the
    /// environment.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(level) = &cfg.level {
            cfg.level = Some(base.join(level));
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        if let Ok(seed) = std::env::var(SEED_ENV) {
            let seed = seed.trim().parse().map_err(|_| CliError::Config(format!("{SEED_ENV}=`{seed}` is not an unsigned integer")))?;
            cfg.seeds = vec![seed];
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let invalid = |m: String| Err(CliError::Config(m));
        if let Some(level) = &self.level {
            if !level.is_file() {
                return invalid(format!("level file {} does not exist", level.display()));
            }
        }
        if self.seeds.is_empty() {
            return invalid("seeds must not be empty".into());
        }
        if self.evaluators.is_empty() {
            return invalid("evaluators must not be empty".into());
        }
        if self.generations == 0 {
            return invalid("generations must be positive".into());
        }
        if self.astar.budget == 0 {
            return invalid("astar.budget must be positive".into());
        }
        self.search.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.learner.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.reward.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn load_level(&self) -> Result<LevelSpec, CliError> {
        match &self.level {
            Some(path) => LevelSpec::load(path).map_err(|e| CliError::Config(e.to_string())),
            None => Ok(LevelSpec::default_level()),
        }
    }

    /// Search settings for one generation.
    pub fn search_for(&self, seed: u64) -> SearchConfig {
        SearchConfig { weight: self.fitness.weight, orientation: self.fitness.orientation, seed, ..self.search.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut cfg = ExperimentConfig { evaluators: vec![EvaluatorKind::Rl, EvaluatorKind::Astar], seeds: vec![3, 9], ..Default::default() };
        cfg.fitness.orientation = FitnessOrientation::Maximize;
        cfg.learner.episodes_per_agent = 17;
        cfg.level = Some(PathBuf::from("levels/x.txt"));
        let text = cfg.to_toml();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = ExperimentConfig::from_toml("evaluators = [\"rl\"]\n[fitness]\norientation = \"maximize\"\n").unwrap();
        assert_eq!(cfg.evaluators, vec![EvaluatorKind::Rl]);
        assert_eq!(cfg.fitness.orientation, FitnessOrientation::Maximize);
        assert_eq!(cfg.search, SearchConfig::default());
        assert_eq!(cfg.learner.episodes_per_agent, 2000);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(ExperimentConfig::from_toml("colour = 3\n"), Err(CliError::Config(_))));
        assert!(matches!(ExperimentConfig::from_toml("[search]\nsize = 3\n"), Err(CliError::Config(_))));
    }

    #[test]
    fn validation() {
        let cfg = ExperimentConfig { seeds: vec![], ..ExperimentConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig { level: Some(PathBuf::from("/nonexistent/level.txt")), ..ExperimentConfig::default() };
        assert!(matches!(cfg.validate(), Err(CliError::Config(m)) if m.contains("does not exist")));
        assert!(ExperimentConfig::default().validate().is_ok());
    }

    #[test]
    fn bundled_config_loads() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/default.toml");
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert_eq!(cfg.evaluators, vec![EvaluatorKind::Astar, EvaluatorKind::Rl]);
        assert_eq!(cfg.generations, 12);
        assert_eq!(cfg.learner, LearnerConfig::default());
        assert_eq!(cfg.reward, RewardConfig::default());
    }

    #[test]
    fn search_settings_carry_fitness_section() {
        let mut cfg = ExperimentConfig::default();
        cfg.fitness.weight = 3.0;
        let s = cfg.search_for(42);
        assert_eq!(s.weight, 3.0);
        assert_eq!(s.seed, 42);
        assert_eq!(s.population_size, 4);
    }
}
