use std::time::Instant;

use super::{objective_with_mode, ObjectiveMode, SolverReport};
use crate::assignment::Assignment;
use crate::error::{Error, Result};
use crate::scenario::Instance;

pub const DEFAULT_STATE_BUDGET: u64 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExhaustiveOptions {
    /// Largest `(M + 1)^N` the search will enumerate.
    pub budget: u64,
    pub mode: ObjectiveMode,
}

impl Default for ExhaustiveOptions {
    fn default() -> Self {
        Self {
            budget: DEFAULT_STATE_BUDGET,
            mode: ObjectiveMode::Canonical,
        }
    }
}

pub fn exhaustive(instance: &Instance) -> Result<SolverReport> {
    exhaustive_with(instance, ExhaustiveOptions::default())
}

/// Enumerates every assignment (each user local or on one of the `M`
/// servers) and returns the one with the smallest objective.
///
/// States are visited in lexicographic order of the per-user choice vector
/// (local < server 0 < server 1 < ...), last user varying fastest; only a
/// strictly smaller objective replaces the incumbent, so ties resolve to
/// the lexicographically smallest assignment.
pub fn exhaustive_with(instance: &Instance, opts: ExhaustiveOptions) -> Result<SolverReport> {
    let started = Instant::now();
    let n = instance.n_users();
    let radix = instance.n_servers() + 1;
    let states = (radix as f64).powi(n as i32);
    if states > opts.budget as f64 {
        return Err(Error::BudgetExceeded {
            states,
            budget: opts.budget,
        });
    }

    let mut digits = vec![0usize; n];
    let mut current = Assignment::all_local(n);
    let mut best = current.clone();
    let mut best_value = objective_with_mode(instance, &current, opts.mode);
    let mut visited = 1usize;

    'outer: loop {
        // odometer increment, last user fastest
        let mut pos = n;
        loop {
            if pos == 0 {
                break 'outer;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < radix {
                current.assign(pos, digits[pos] - 1);
                break;
            }
            digits[pos] = 0;
            current.unassign(pos);
        }
        visited += 1;
        let value = objective_with_mode(instance, &current, opts.mode);
        if value < best_value {
            best_value = value;
            best.clone_from(&current);
        }
    }
    debug_assert_eq!(visited as f64, states);

    Ok(SolverReport::new(instance, best, visited, started.elapsed().as_secs_f64(), Vec::new()))
}
