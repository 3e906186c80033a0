//! Computation delay under processor sharing, and per-user end-to-end delay.

use serde::{Deserialize, Serialize};

use crate::assignment::Assignment;
use crate::radio::link_delay;
use crate::scenario::Instance;

/// Per-user edge compute rate: the server's capacity split evenly over its
/// connected users, capped at `c_max`.
pub fn edge_capacity_share(c_es: f64, c_max: f64, n_connected: usize) -> f64 {
    c_max.min(c_es / n_connected.max(1) as f64)
}

pub fn local_delay(w_slm: f64, c_local: f64) -> f64 {
    w_slm / c_local
}

pub fn edge_compute_delay(w_llm: f64, share: f64) -> f64 {
    w_llm / share
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Local,
    Offloaded(usize),
}

/// Delay components of one user, in seconds. Infinite when the uplink
/// carries no data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayBreakdown {
    pub comm_s: f64,
    pub comp_s: f64,
    pub total_s: f64,
    pub mode: Mode,
}

/// Communication and edge-compute delay of user `i` at server `j` when
/// `n_connected` users share `j` and `interference_w` arrives from other
/// cells. Both realized evaluation and solver candidates go through here.
#[inline]
pub fn offload_delay(
    instance: &Instance,
    i: usize,
    j: usize,
    n_connected: usize,
    interference_w: f64,
) -> (f64, f64) {
    let comm = link_delay(
        instance.query_bits[i],
        instance.channel_gain.gain(i, j),
        interference_w,
        n_connected,
        &instance.radio,
    );
    let share = edge_capacity_share(instance.c_es[j], instance.c_max, n_connected);
    (comm, edge_compute_delay(instance.w_llm, share))
}

pub fn user_local_delay(instance: &Instance, i: usize) -> f64 {
    local_delay(instance.w_slm, instance.c_local[i])
}

/// Interference power at each server from users offloaded elsewhere:
/// entry `j` sums `P |h_{i',j}|^2` over users `i'` assigned to some `j' != j`.
/// Users are added in index order.
pub fn cross_cell_interference(instance: &Instance, assignment: &Assignment) -> Vec<f64> {
    let m = instance.n_servers();
    let p = instance.radio.tx_power_w;
    let mut rx = vec![0.0; m];
    for (user, server) in assignment.offloaded_users() {
        for (j, acc) in rx.iter_mut().enumerate() {
            if j != server {
                *acc += p * instance.channel_gain.gain(user, j);
            }
        }
    }
    rx
}

/// Realized delays under a complete assignment: every share uses the final
/// connected counts and interference comes from the full assignment.
pub fn total_delays(instance: &Instance, assignment: &Assignment) -> Vec<DelayBreakdown> {
    let load = assignment.load(instance.n_servers());
    let rx = cross_cell_interference(instance, assignment);
    (0..instance.n_users())
        .map(|i| match assignment.server_of(i) {
            Some(j) => {
                let (comm_s, comp_s) = offload_delay(instance, i, j, load[j], rx[j]);
                DelayBreakdown {
                    comm_s,
                    comp_s,
                    total_s: comm_s + comp_s,
                    mode: Mode::Offloaded(j),
                }
            }
            None => {
                let comp_s = user_local_delay(instance, i);
                DelayBreakdown {
                    comm_s: 0.0,
                    comp_s,
                    total_s: comp_s,
                    mode: Mode::Local,
                }
            }
        })
        .collect()
}
