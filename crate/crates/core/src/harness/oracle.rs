//! Small-instance comparison of every solver against exhaustive search.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::radio::Point;
use crate::rng::{derive_seed, stream};
use crate::scenario::{generate_instance, ScenarioConfig};
use crate::solver::{self, exhaustive, Algorithm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheckConfig {
    pub instances: usize,
    /// Instance `k` has `min_users + k % (max_users - min_users + 1)` users.
    pub min_users: usize,
    pub max_users: usize,
    pub tau: f64,
    pub master_seed: u64,
    pub scenario: ScenarioConfig,
}

impl Default for OracleCheckConfig {
    fn default() -> Self {
        Self {
            instances: 200,
            min_users: 2,
            max_users: 6,
            tau: 0.6,
            master_seed: 0,
            scenario: ScenarioConfig {
                n_servers: 2,
                es_positions: vec![Point::new(125.0, 250.0), Point::new(375.0, 250.0)],
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleViolation {
    pub instance: usize,
    pub algorithm: Algorithm,
    pub oracle: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub min: f64,
    pub median: f64,
    pub p90: f64,
    pub max: f64,
    pub mean: f64,
    /// Share of instances where the solver hit the optimum exactly.
    pub optimal_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub instances: usize,
    pub violations: Vec<OracleViolation>,
    /// `(goa - oracle) / oracle` per instance.
    pub goa_gaps: Vec<f64>,
}

impl OracleCheck {
    pub fn gap_summary(&self) -> GapSummary {
        let mut g = self.goa_gaps.clone();
        g.sort_by(f64::total_cmp);
        let q = |p: f64| g[((g.len() - 1) as f64 * p).round() as usize];
        GapSummary {
            min: g[0],
            median: q(0.5),
            p90: q(0.9),
            max: g[g.len() - 1],
            mean: g.iter().sum::<f64>() / g.len() as f64,
            optimal_fraction: g.iter().filter(|v| **v == 0.0).count() as f64 / g.len() as f64,
        }
    }
}

/// Solves each small instance with every algorithm and with exhaustive
/// search, recording any solver that beats the oracle (which would be a bug)
/// and GOA's relative gap to it.
pub fn oracle_check(cfg: &OracleCheckConfig) -> Result<OracleCheck> {
    let span = cfg.max_users.saturating_sub(cfg.min_users) + 1;
    let mut violations = Vec::new();
    let mut goa_gaps = Vec::with_capacity(cfg.instances);
    for k in 0..cfg.instances {
        let scenario = ScenarioConfig {
            n_users: cfg.min_users + k % span,
            tau: cfg.tau,
            master_seed: cfg.master_seed,
            ..cfg.scenario.clone()
        };
        let inst = generate_instance(&scenario, None, k as u64)?;
        let oracle = exhaustive(&inst)?.objective;
        let goa = solver::goa(&inst, cfg.tau);
        let k_goa = goa.offload_count;
        let reports = [
            (Algorithm::Goa, goa),
            (Algorithm::Dmin, solver::dmin(&inst)),
            (Algorithm::EdgeAll, solver::edge_all(&inst)),
            (Algorithm::LocalAll, solver::local_all(&inst)),
            (
                Algorithm::Random,
                solver::random_k(&inst, k_goa, derive_seed(cfg.master_seed, k as u64, stream::RANDOM_K)),
            ),
        ];
        for (algorithm, r) in &reports {
            if r.objective < oracle {
                violations.push(OracleViolation {
                    instance: k,
                    algorithm: *algorithm,
                    oracle,
                    value: r.objective,
                });
            }
        }
        let g = &reports[0].1.objective;
        goa_gaps.push(if oracle > 0.0 { (g - oracle) / oracle } else { 0.0 });
    }
    Ok(OracleCheck {
        instances: cfg.instances,
        violations,
        goa_gaps,
    })
}
