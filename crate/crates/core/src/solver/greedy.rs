use std::time::Instant;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{weighted, SolverReport};
use crate::assignment::Assignment;
use crate::compute::{offload_delay, user_local_delay};
use crate::scenario::Instance;

/// Weighting of the delay gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapWeight {
    /// `alpha_i * (t_comm + t_edge - t_local)`.
    Uncertainty,
    /// `t_comm + t_edge - t_local`.
    Unit,
}

impl GapWeight {
    #[inline]
    pub(crate) fn apply(self, alpha: f64, comm: f64, comp: f64, local: f64) -> f64 {
        if !comm.is_finite() {
            return f64::INFINITY;
        }
        let gap = comm + comp - local;
        match self {
            GapWeight::Uncertainty => weighted(alpha, gap),
            GapWeight::Unit => gap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Every candidate must be placed.
    Forced,
    /// Candidates are placed only while the best gap is negative.
    Improving,
}

/// One greedy commitment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditStep {
    pub step: usize,
    pub user: usize,
    pub server: usize,
    pub delta: f64,
    /// Candidates still open when this pair was chosen (including `user`).
    pub candidates: usize,
    pub phase: Phase,
    /// Set when every gap was infinite and the best-channel server was used.
    #[serde(default)]
    pub fallback: bool,
}

/// Partial assignment with the aggregates needed to price a candidate in
/// O(1): per-server connection counts and cross-cell interference from the
/// committed users.
struct GreedyState<'a> {
    instance: &'a Instance,
    weight: GapWeight,
    assignment: Assignment,
    load: Vec<usize>,
    rx_other: Vec<f64>,
    local: Vec<f64>,
    audit: Vec<AuditStep>,
}

impl<'a> GreedyState<'a> {
    fn new(instance: &'a Instance, weight: GapWeight) -> Self {
        let n = instance.n_users();
        let m = instance.n_servers();
        Self {
            instance,
            weight,
            assignment: Assignment::all_local(n),
            load: vec![0; m],
            rx_other: vec![0.0; m],
            local: (0..n).map(|i| user_local_delay(instance, i)).collect(),
            audit: Vec::new(),
        }
    }

    #[inline]
    fn gap(&self, i: usize, j: usize) -> f64 {
        let (comm, comp) = offload_delay(self.instance, i, j, self.load[j] + 1, self.rx_other[j]);
        self.weight.apply(self.instance.alpha[i], comm, comp, self.local[i])
    }

    /// Smallest gap over `candidates x servers`; ties go to the lowest user
    /// index, then the lowest server index (`candidates` is kept sorted).
    fn best(&self, candidates: &[usize]) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (pos, &i) in candidates.iter().enumerate() {
            for j in 0..self.instance.n_servers() {
                let g = self.gap(i, j);
                if best.is_none_or(|(_, _, b)| g < b) {
                    best = Some((pos, j, g));
                }
            }
        }
        best
    }

    fn commit(&mut self, i: usize, j: usize, delta: f64, candidates: usize, phase: Phase, fallback: bool) {
        self.assignment.assign(i, j);
        self.load[j] += 1;
        let p = self.instance.radio.tx_power_w;
        for (k, rx) in self.rx_other.iter_mut().enumerate() {
            if k != j {
                *rx += p * self.instance.channel_gain.gain(i, k);
            }
        }
        self.audit.push(AuditStep {
            step: self.audit.len(),
            user: i,
            server: j,
            delta,
            candidates,
            phase,
            fallback,
        });
    }

    fn run(&mut self, mut candidates: Vec<usize>, phase: Phase) {
        candidates.sort_unstable();
        while let Some((pos, j, delta)) = self.best(&candidates) {
            match phase {
                Phase::Improving if delta >= 0.0 => break,
                Phase::Forced if delta == f64::INFINITY => {
                    let i = candidates[pos];
                    let j = self.best_channel(i);
                    log::warn!("user {i}: no server has a usable uplink; forcing it onto server {j}");
                    self.commit(i, j, delta, candidates.len(), phase, true);
                }
                _ => {
                    let i = candidates[pos];
                    self.commit(i, j, delta, candidates.len(), phase, false);
                }
            }
            candidates.remove(pos);
        }
    }

    fn best_channel(&self, i: usize) -> usize {
        let mut best = 0;
        for j in 1..self.instance.n_servers() {
            if self.instance.channel_gain.gain(i, j) > self.instance.channel_gain.gain(i, best) {
                best = j;
            }
        }
        best
    }

    fn finish(self, started: Instant) -> SolverReport {
        let iterations = self.audit.len();
        let elapsed = started.elapsed().as_secs_f64();
        SolverReport::new(self.instance, self.assignment, iterations, elapsed, self.audit)
    }
}

/// Greedy offloading with an uncertainty threshold.
///
/// Step 1 places every user with `alpha_i > tau`, cheapest weighted gap
/// first, re-pricing after each placement. Step 2 then keeps offloading the
/// remaining users while the cheapest weighted gap is negative.
pub fn goa(instance: &Instance, tau: f64) -> SolverReport {
    let started = Instant::now();
    let (forced, rest): (Vec<usize>, Vec<usize>) =
        (0..instance.n_users()).partition(|&i| instance.alpha[i] > tau);
    let mut state = GreedyState::new(instance, GapWeight::Uncertainty);
    state.run(forced, Phase::Forced);
    state.run(rest, Phase::Improving);
    state.finish(started)
}

/// Uncertainty-blind greedy: offload while the unweighted gap is negative.
pub fn dmin(instance: &Instance) -> SolverReport {
    let started = Instant::now();
    let mut state = GreedyState::new(instance, GapWeight::Unit);
    state.run((0..instance.n_users()).collect(), Phase::Improving);
    state.finish(started)
}

/// Offloads every user, choosing pairs by weighted gap.
pub fn edge_all(instance: &Instance) -> SolverReport {
    let started = Instant::now();
    let mut state = GreedyState::new(instance, GapWeight::Uncertainty);
    state.run((0..instance.n_users()).collect(), Phase::Forced);
    state.finish(started)
}

pub fn local_all(instance: &Instance) -> SolverReport {
    let started = Instant::now();
    let assignment = Assignment::all_local(instance.n_users());
    SolverReport::new(instance, assignment, 0, started.elapsed().as_secs_f64(), Vec::new())
}

/// Offloads `k` users drawn uniformly without replacement, placing them by
/// unweighted gap. `k` is clamped to the number of users.
pub fn random_k(instance: &Instance, k: usize, seed: u64) -> SolverReport {
    let started = Instant::now();
    let n = instance.n_users();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = index::sample(&mut rng, n, k.min(n)).into_vec();
    let mut state = GreedyState::new(instance, GapWeight::Unit);
    state.run(chosen, Phase::Forced);
    state.finish(started)
}
