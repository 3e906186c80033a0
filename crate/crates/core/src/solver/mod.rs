//! Offloading solvers and the quantities they optimize.
//!
//! The objective is the uncertainty-weighted sum of realized per-user
//! delays. The greedy solvers ([`goa`], [`dmin`], [`edge_all`], [`random_k`])
//! grow an assignment one user at a time, always committing the
//! (user, server) pair with the smallest delay gap; [`exhaustive`] is the
//! brute-force oracle used to check them on small instances.

mod exhaustive;
mod greedy;

pub use crate::assignment::Assignment;
pub use exhaustive::{exhaustive, exhaustive_with, ExhaustiveOptions, DEFAULT_STATE_BUDGET};
pub use greedy::{dmin, edge_all, goa, local_all, random_k, AuditStep, GapWeight, Phase};

use serde::{Deserialize, Serialize};

use crate::compute::{offload_delay, total_delays, user_local_delay};
use crate::radio::interference_w;
use crate::scenario::Instance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub assignment: Assignment,
    /// Canonical objective of `assignment`.
    pub objective: f64,
    pub offload_count: usize,
    /// Committed (user, server) pairs; 0 for solvers that do not iterate.
    pub iterations: usize,
    pub wall_time_s: f64,
    /// One entry per greedy commitment, in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub audit: Vec<AuditStep>,
}

impl SolverReport {
    pub(crate) fn new(instance: &Instance, assignment: Assignment, iterations: usize, wall_time_s: f64, audit: Vec<AuditStep>) -> Self {
        Self {
            objective: objective(instance, &assignment),
            offload_count: assignment.offload_count(),
            assignment,
            iterations,
            wall_time_s,
            audit,
        }
    }

    /// Audit log as line-delimited JSON.
    pub fn audit_jsonl(&self) -> String {
        self.audit
            .iter()
            .map(|s| serde_json::to_string(s).expect("audit step serializes") + "\n")
            .collect()
    }
}

/// How the local-execution term enters the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    /// One local term per unassigned user.
    #[default]
    Canonical,
    /// Literal double sum over users and servers: an unassigned user
    /// contributes its local delay once per server, an offloaded user its
    /// edge delay plus `M - 1` local terms.
    StrictDoubleSum,
}

#[inline]
pub(crate) fn weighted(alpha: f64, delay: f64) -> f64 {
    // keeps alpha = 0 from turning an infinite delay into NaN
    if alpha == 0.0 {
        0.0
    } else {
        alpha * delay
    }
}

/// `sum_i alpha_i * d_i` over realized delays.
pub fn objective(instance: &Instance, assignment: &Assignment) -> f64 {
    objective_with_mode(instance, assignment, ObjectiveMode::Canonical)
}

pub fn objective_with_mode(instance: &Instance, assignment: &Assignment, mode: ObjectiveMode) -> f64 {
    let delays = total_delays(instance, assignment);
    let m = instance.n_servers() as f64;
    delays
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let a = instance.alpha[i];
            match mode {
                ObjectiveMode::Canonical => weighted(a, d.total_s),
                ObjectiveMode::StrictDoubleSum => {
                    let local = user_local_delay(instance, i);
                    if assignment.is_offloaded(i) {
                        weighted(a, d.total_s) + weighted(a, (m - 1.0) * local)
                    } else {
                        weighted(a, m * local)
                    }
                }
            }
        })
        .sum()
}

/// Delay change from offloading unassigned user `i` to server `j` on top of
/// `partial`, weighted by `alpha_i`. User `i` counts as joined at `j` for the
/// bandwidth and compute shares; interference comes from `partial` only.
/// Infinite when the uplink is dead.
pub fn delay_gap(instance: &Instance, partial: &Assignment, i: usize, j: usize) -> f64 {
    delay_gap_with(instance, partial, i, j, GapWeight::Uncertainty)
}

pub fn delay_gap_with(instance: &Instance, partial: &Assignment, i: usize, j: usize, weight: GapWeight) -> f64 {
    debug_assert!(!partial.is_offloaded(i), "user {i} already assigned");
    let n = partial.connected(j) + 1;
    let interference = interference_w(i, j, partial, &instance.channel_gain, &instance.radio);
    let (comm, comp) = offload_delay(instance, i, j, n, interference);
    weight.apply(instance.alpha[i], comm, comp, user_local_delay(instance, i))
}

/// Per-pair coefficients of the quadratic surrogate: `Q[i][j]` is the
/// weighted single-occupancy edge delay of user `i` at server `j` and
/// `c[i]` its weighted local delay.
///
/// SINR is evaluated under `assignment`: for a pair in the assignment it
/// uses the realized band share and interference; for any other pair user
/// `i` counts as joined at `j` and interference excludes `i` itself.
pub fn q_and_c(instance: &Instance, assignment: &Assignment) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = instance.n_users();
    let m = instance.n_servers();
    let load = assignment.load(m);
    let radio = &instance.radio;
    let q = (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let joined = if assignment.server_of(i) == Some(j) { load[j] } else { load[j] + 1 };
                    let band = crate::radio::allocate_bandwidth(radio.bandwidth_hz, joined);
                    let noise = crate::radio::noise_power_w(radio, band);
                    let s = crate::radio::sinr(i, j, assignment, &instance.channel_gain, radio, noise);
                    let comm = crate::radio::comm_delay(instance.query_bits[i], radio.bandwidth_hz * (1.0 + s).log2());
                    weighted(instance.alpha[i], instance.w_llm / instance.c_es[j] + comm)
                })
                .collect()
        })
        .collect();
    let c = (0..n)
        .map(|i| weighted(instance.alpha[i], user_local_delay(instance, i)))
        .collect();
    (q, c)
}

/// Coefficients evaluated at the empty assignment (single occupancy, no
/// interference).
pub fn compute_q_c(instance: &Instance) -> (Vec<Vec<f64>>, Vec<f64>) {
    q_and_c(instance, &Assignment::all_local(instance.n_users()))
}

/// `sum_{i,j} x_ij Q_ij n_j - sum_{i,j} c_i x_ij`.
pub fn surrogate_objective(instance: &Instance, assignment: &Assignment) -> f64 {
    let (q, c) = q_and_c(instance, assignment);
    let load = assignment.load(instance.n_servers());
    assignment
        .offloaded_users()
        .map(|(i, j)| q[i][j] * load[j] as f64 - c[i])
        .sum()
}

/// Algorithms compared by the experiment harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Goa,
    Dmin,
    EdgeAll,
    LocalAll,
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Goa,
        Algorithm::Dmin,
        Algorithm::EdgeAll,
        Algorithm::LocalAll,
        Algorithm::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Goa => "goa",
            Algorithm::Dmin => "dmin",
            Algorithm::EdgeAll => "edge_all",
            Algorithm::LocalAll => "local_all",
            Algorithm::Random => "random",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
