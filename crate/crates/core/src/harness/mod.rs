//! Monte Carlo experiment driver.
//!
//! For every sweep point `(N, tau)` and iteration, one world is sampled and
//! every requested algorithm is run on that same world. Rows are sorted by
//! `(N, tau, iteration, algorithm)` before aggregation, so the output does
//! not depend on how iterations were scheduled across threads.

mod config;
mod emit;
mod oracle;

pub use config::{DelayScope, ExperimentConfig};
pub use emit::{emit, format_real, write_rows_csv, write_rows_json, write_summary_json, OutputFormat, CSV_HEADER};
pub use oracle::{oracle_check, GapSummary, OracleCheck, OracleCheckConfig, OracleViolation};

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compute::total_delays;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};
use crate::scenario::{generate_instance, Instance};
use crate::solver::{self, objective_with_mode, Algorithm, SolverReport};
use crate::uncertainty::{accuracy_of, load_trace_file, UncertaintyMetric, UncertaintyTrace};

/// One (iteration, algorithm) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub iteration: u64,
    pub algorithm: Algorithm,
    pub n_users: usize,
    pub tau: f64,
    pub metric: UncertaintyMetric,
    pub objective: f64,
    pub mean_delay_ms: f64,
    pub accuracy: f64,
    pub offload_count: usize,
    pub solver_time_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator; 0 for a single row).
    pub std: f64,
}

impl Stat {
    fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }

    pub fn std_err(&self, count: usize) -> f64 {
        self.std / (count as f64).sqrt()
    }
}

/// Per `(algorithm, n_users, tau)` summary over iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub algorithm: Algorithm,
    pub n_users: usize,
    pub tau: f64,
    pub metric: UncertaintyMetric,
    pub count: usize,
    pub objective: Stat,
    pub mean_delay_ms: Stat,
    pub accuracy: Stat,
    pub offload_count: Stat,
    pub solver_time_ms: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<RunMetrics>,
    pub summary: Vec<AggregateRow>,
}

impl ExperimentResult {
    pub fn group(&self, algorithm: Algorithm, n_users: usize, tau: f64) -> Option<&AggregateRow> {
        self.summary
            .iter()
            .find(|g| g.algorithm == algorithm && g.n_users == n_users && g.tau == tau)
    }
}

fn mean_delay_ms(instance: &Instance, report: &SolverReport, scope: DelayScope) -> f64 {
    let delays = total_delays(instance, &report.assignment);
    let picked: Vec<f64> = delays
        .iter()
        .enumerate()
        .filter(|(i, _)| scope == DelayScope::All || report.assignment.is_offloaded(*i))
        .map(|(_, d)| d.total_s)
        .collect();
    if picked.is_empty() {
        return 0.0;
    }
    picked.iter().sum::<f64>() / picked.len() as f64 * 1e3
}

/// Runs every requested algorithm on one pre-built instance.
pub fn run_on_instance(
    config: &ExperimentConfig,
    instance: &Instance,
    tau: f64,
    iteration: u64,
) -> Vec<RunMetrics> {
    let mut goa_count = None;
    config
        .ordered_algorithms()
        .into_iter()
        .map(|algorithm| {
            let report = match algorithm {
                Algorithm::Goa => solver::goa(instance, tau),
                Algorithm::Dmin => solver::dmin(instance),
                Algorithm::EdgeAll => solver::edge_all(instance),
                Algorithm::LocalAll => solver::local_all(instance),
                Algorithm::Random => {
                    let k = goa_count.expect("goa runs before random");
                    solver::random_k(instance, k, derive_seed(config.master_seed, iteration, stream::RANDOM_K))
                }
            };
            if algorithm == Algorithm::Goa {
                goa_count = Some(report.offload_count);
            }
            RunMetrics {
                iteration,
                algorithm,
                n_users: instance.n_users(),
                tau,
                metric: config.metric,
                objective: objective_with_mode(instance, &report.assignment, config.objective_mode),
                mean_delay_ms: mean_delay_ms(instance, &report, config.delay_scope),
                accuracy: accuracy_of(instance, &report.assignment),
                offload_count: report.offload_count,
                solver_time_ms: if config.record_solver_time {
                    report.wall_time_s * 1e3
                } else {
                    0.0
                },
            }
        })
        .collect()
}

/// One Monte Carlo iteration at sweep point `(n_users, tau)`.
pub fn run_iteration(
    config: &ExperimentConfig,
    n_users: usize,
    tau: f64,
    iteration: u64,
    trace: Option<&UncertaintyTrace>,
) -> Result<Vec<RunMetrics>> {
    config.validate()?;
    let instance = generate_instance(&config.scenario_for(n_users, tau), trace, iteration)?;
    Ok(run_on_instance(config, &instance, tau, iteration))
}

fn check_writable(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".write-probe");
    std::fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    std::fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

/// Runs the full sweep. Fails before any computation if the configuration
/// is invalid or the output directory cannot be written.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    if let Some(dir) = &config.output_dir {
        check_writable(dir)?;
    }
    let trace = config.trace_path.as_deref().map(load_trace_file).transpose()?;

    // One world per (N, iteration), shared by every tau.
    let jobs: Vec<(usize, u64)> = config
        .n_users_sweep
        .iter()
        .flat_map(|&n| (0..config.iterations as u64).map(move |it| (n, it)))
        .collect();
    let work = |&(n, it): &(usize, u64)| -> Result<Vec<RunMetrics>> {
        let instance = generate_instance(&config.scenario_for(n, config.tau_sweep[0]), trace.as_ref(), it)?;
        Ok(config
            .tau_sweep
            .iter()
            .flat_map(|&tau| run_on_instance(config, &instance, tau, it))
            .collect())
    };

    let chunks: Vec<Result<Vec<RunMetrics>>> = if config.parallel {
        match config.threads {
            Some(t) => rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?
                .install(|| jobs.par_iter().map(work).collect()),
            None => jobs.par_iter().map(work).collect(),
        }
    } else {
        jobs.iter().map(work).collect()
    };
    let mut rows = Vec::with_capacity(jobs.len() * config.tau_sweep.len() * config.algorithms.len());
    for chunk in chunks {
        rows.extend(chunk?);
    }

    sort_rows(config, &mut rows);
    let summary = aggregate(config, &rows);
    Ok(ExperimentResult { rows, summary })
}

fn sweep_key(config: &ExperimentConfig, row: &RunMetrics) -> (usize, usize, u64, Algorithm) {
    let n_pos = config.n_users_sweep.iter().position(|n| *n == row.n_users).unwrap_or(usize::MAX);
    let t_pos = config.tau_sweep.iter().position(|t| *t == row.tau).unwrap_or(usize::MAX);
    (n_pos, t_pos, row.iteration, row.algorithm)
}

fn sort_rows(config: &ExperimentConfig, rows: &mut [RunMetrics]) {
    rows.sort_by_key(|r| sweep_key(config, r));
}

/// Mean and standard deviation per `(algorithm, N, tau)`, folded over the
/// rows in sorted order.
pub fn aggregate(config: &ExperimentConfig, rows: &[RunMetrics]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(usize, usize, Algorithm), Vec<&RunMetrics>> = BTreeMap::new();
    for r in rows {
        let (n_pos, t_pos, _, alg) = sweep_key(config, r);
        groups.entry((n_pos, t_pos, alg)).or_default().push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let col = |f: fn(&RunMetrics) -> f64| Stat::of(&g.iter().map(|r| f(r)).collect::<Vec<_>>());
            AggregateRow {
                algorithm: g[0].algorithm,
                n_users: g[0].n_users,
                tau: g[0].tau,
                metric: g[0].metric,
                count: g.len(),
                objective: col(|r| r.objective),
                mean_delay_ms: col(|r| r.mean_delay_ms),
                accuracy: col(|r| r.accuracy),
                offload_count: col(|r| r.offload_count as f64),
                solver_time_ms: col(|r| r.solver_time_ms),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(algorithms: Vec<Algorithm>) -> ExperimentConfig {
        ExperimentConfig {
            algorithms,
            n_users_sweep: vec![8, 12],
            tau_sweep: vec![0.4, 0.6],
            iterations: 5,
            master_seed: 42,
            record_solver_time: false,
            ..Default::default()
        }
    }

    #[test]
    fn local_only_iteration() {
        let cfg = tiny(vec![Algorithm::LocalAll]);
        let rows = run_iteration(&cfg, 10, 0.6, 3, None).unwrap();
        assert_eq!(rows.len(), 1);
        let inst = generate_instance(&cfg.scenario_for(10, 0.6), None, 3).unwrap();
        let expected = inst.c_local.iter().map(|c| inst.w_slm / c).sum::<f64>() / 10.0 * 1e3;
        assert!((rows[0].mean_delay_ms - expected).abs() < 1e-12 * expected);
        assert_eq!(rows[0].offload_count, 0);
    }

    #[test]
    fn random_without_goa_is_config_error() {
        let cfg = tiny(vec![Algorithm::Random]);
        assert!(matches!(run_iteration(&cfg, 10, 0.6, 0, None), Err(Error::Config(_))));
    }

    #[test]
    fn random_offloads_as_many_as_goa() {
        let cfg = tiny(Algorithm::ALL.to_vec());
        for it in 0..5 {
            let rows = run_iteration(&cfg, 20, 0.6, it, None).unwrap();
            let count = |a| rows.iter().find(|r| r.algorithm == a).unwrap().offload_count;
            assert_eq!(count(Algorithm::Goa), count(Algorithm::Random));
        }
    }

    #[test]
    fn iteration_is_deterministic() {
        let cfg = tiny(Algorithm::ALL.to_vec());
        assert_eq!(
            run_iteration(&cfg, 15, 0.6, 7, None).unwrap(),
            run_iteration(&cfg, 15, 0.6, 7, None).unwrap()
        );
    }

    #[test]
    fn aggregate_means_match_rows() {
        let cfg = tiny(Algorithm::ALL.to_vec());
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.rows.len(), 2 * 2 * 5 * 5);
        assert_eq!(res.summary.len(), 2 * 2 * 5);
        for g in &res.summary {
            let vals: Vec<&RunMetrics> = res
                .rows
                .iter()
                .filter(|r| r.algorithm == g.algorithm && r.n_users == g.n_users && r.tau == g.tau)
                .collect();
            assert_eq!(vals.len(), g.count);
            let mut acc = 0.0;
            for r in &vals {
                acc += r.accuracy;
            }
            assert!((acc / vals.len() as f64 - g.accuracy.mean).abs() < 1e-12);
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let par = tiny(Algorithm::ALL.to_vec());
        let seq = ExperimentConfig { parallel: false, ..par.clone() };
        assert_eq!(run_experiment(&par).unwrap(), run_experiment(&seq).unwrap());
    }

    #[test]
    fn offloaded_scope_averages_only_offloaded_users() {
        let cfg = ExperimentConfig {
            delay_scope: DelayScope::Offloaded,
            ..tiny(vec![Algorithm::LocalAll, Algorithm::EdgeAll])
        };
        let rows = run_iteration(&cfg, 10, 0.6, 0, None).unwrap();
        assert_eq!(rows[1].algorithm, Algorithm::LocalAll);
        assert_eq!(rows[1].mean_delay_ms, 0.0);
        let all = run_iteration(&ExperimentConfig { delay_scope: DelayScope::All, ..cfg }, 10, 0.6, 0, None).unwrap();
        assert_eq!(rows[0].mean_delay_ms, all[0].mean_delay_ms);
    }

    #[test]
    fn unwritable_output_fails_before_compute() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("not-a-dir");
        std::fs::write(&file, b"x").unwrap();
        let cfg = ExperimentConfig {
            output_dir: Some(file.join("sub")),
            iterations: 1_000_000,
            ..tiny(vec![Algorithm::Goa])
        };
        assert!(matches!(run_experiment(&cfg), Err(Error::Io { .. })));
    }
}
