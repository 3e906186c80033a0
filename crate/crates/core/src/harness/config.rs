use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;
use crate::solver::{Algorithm, ObjectiveMode};
use crate::uncertainty::UncertaintyMetric;

/// Which users the reported mean delay averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DelayScope {
    #[default]
    All,
    /// Offloaded users only; 0 when nobody offloads.
    Offloaded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// World parameters. `n_users`, `tau`, `metric` and `master_seed` in here
    /// are overridden by the sweep and the fields below.
    pub scenario: ScenarioConfig,
    pub algorithms: Vec<Algorithm>,
    pub n_users_sweep: Vec<usize>,
    pub tau_sweep: Vec<f64>,
    pub metric: UncertaintyMetric,
    pub iterations: usize,
    pub trace_path: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub master_seed: u64,
    pub objective_mode: ObjectiveMode,
    pub delay_scope: DelayScope,
    /// When false, `solver_time_ms` is written as 0 so output files are
    /// byte-for-byte reproducible.
    pub record_solver_time: bool,
    pub parallel: bool,
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            algorithms: Algorithm::ALL.to_vec(),
            n_users_sweep: vec![60, 80, 100, 120],
            tau_sweep: vec![0.6],
            metric: UncertaintyMetric::Margin,
            iterations: 500,
            trace_path: None,
            output_dir: None,
            master_seed: 0,
            objective_mode: ObjectiveMode::Canonical,
            delay_scope: DelayScope::All,
            record_solver_time: true,
            parallel: true,
            threads: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Config("algorithm list is empty".into()));
        }
        if self.algorithms.contains(&Algorithm::Random) && !self.algorithms.contains(&Algorithm::Goa) {
            return Err(Error::Config(
                "`random` offloads as many users as `goa`, so it needs `goa` in the algorithm list".into(),
            ));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if self.n_users_sweep.is_empty() || self.tau_sweep.is_empty() {
            return Err(Error::Config("n_users_sweep and tau_sweep must be nonempty".into()));
        }
        if self.n_users_sweep.contains(&0) {
            return Err(Error::Config("n_users_sweep entries must be >= 1".into()));
        }
        if let Some(t) = self.tau_sweep.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::Config(format!("tau {t} outside [0,1]")));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        self.scenario_for(self.n_users_sweep[0], self.tau_sweep[0]).validate()
    }

    /// The scenario at one sweep point.
    pub fn scenario_for(&self, n_users: usize, tau: f64) -> ScenarioConfig {
        ScenarioConfig {
            n_users,
            tau,
            metric: self.metric,
            master_seed: self.master_seed,
            ..self.scenario.clone()
        }
    }

    /// Algorithms in evaluation order (`goa` before `random`).
    pub fn ordered_algorithms(&self) -> Vec<Algorithm> {
        Algorithm::ALL
            .into_iter()
            .filter(|a| self.algorithms.contains(a))
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}
