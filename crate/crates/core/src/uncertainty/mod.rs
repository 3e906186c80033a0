//! Token-level uncertainty: the margin metric plus entropy and perplexity
//! variants, trace ingestion, the synthetic accuracy model, and accuracy
//! scoring of an assignment.

mod synth;
mod trace;

pub use synth::{synth_trace, PiecewiseLinear, SyntheticParams};
pub use trace::{
    load_trace, load_trace_file, parse_record, validate_trace_text, Severity, TraceIssue, TraceSource,
    UncertaintyRecord, UncertaintyTrace, DEFAULT_BITS_PER_TOKEN,
};

use serde::{Deserialize, Serialize};

use crate::assignment::Assignment;
use crate::error::{Error, Result};
use crate::scenario::Instance;

const SUM_TOLERANCE: f64 = 1e-9;

/// Top-k next-token probabilities, sorted descending and summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TokenDistribution {
    probs: Vec<f64>,
}

/// Adjustments made while normalizing raw probabilities.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Normalization {
    pub sorted: bool,
    pub renormalized: bool,
}

impl TokenDistribution {
    /// Strict constructor: input must already be a sorted top-k distribution.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_entries(&probs)?;
        if probs.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Distribution("probabilities not sorted descending".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Distribution(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Self { probs })
    }

    /// Sorts descending and renormalizes over the given entries. Reports
    /// which fixes were applied; `renormalized` is set only when the input
    /// sum was off by more than `renorm_tolerance`.
    pub fn normalized(mut probs: Vec<f64>, renorm_tolerance: f64) -> Result<(Self, Normalization)> {
        check_entries(&probs)?;
        let mut fix = Normalization::default();
        if probs.windows(2).any(|w| w[0] < w[1]) {
            probs.sort_by(|a, b| b.total_cmp(a));
            fix.sorted = true;
        }
        let sum: f64 = probs.iter().sum();
        if sum <= 0.0 {
            return Err(Error::Distribution("probabilities sum to zero".into()));
        }
        if (sum - 1.0).abs() > renorm_tolerance {
            fix.renormalized = true;
        }
        // already normalized up to rounding: leave as is so the
        // operation is idempotent
        if (sum - 1.0).abs() > 1e-12 {
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        Ok((Self { probs }, fix))
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    fn support(&self) -> usize {
        self.probs.iter().filter(|p| **p > 0.0).count()
    }

    /// Shannon entropy in nats, with `0 ln 0 = 0`.
    pub fn entropy_nats(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
    }
}

fn check_entries(probs: &[f64]) -> Result<()> {
    if probs.len() < 2 {
        return Err(Error::Distribution(format!(
            "need at least 2 probabilities, got {}",
            probs.len()
        )));
    }
    if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0 && **p <= 1.0 + SUM_TOLERANCE)) {
        return Err(Error::Distribution(format!("probability {p} outside [0,1]")));
    }
    Ok(())
}

impl TryFrom<Vec<f64>> for TokenDistribution {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<TokenDistribution> for Vec<f64> {
    fn from(d: TokenDistribution) -> Self {
        d.probs
    }
}

/// `1 - (p1 - p2)`: 0 for a point mass, 1 when the top two tie.
pub fn margin_uncertainty(d: &TokenDistribution) -> f64 {
    let p = d.probs();
    (1.0 - (p[0] - p[1])).clamp(0.0, 1.0)
}

/// Shannon entropy over the top-k entries divided by `ln k`.
///
/// `k` counts strictly positive entries, so zero-probability tail entries do
/// not change the value; a point mass scores 0.
pub fn entropy_uncertainty(d: &TokenDistribution) -> f64 {
    let k = d.support();
    if k < 2 {
        return 0.0;
    }
    (d.entropy_nats() / (k as f64).ln()).clamp(0.0, 1.0)
}

/// Perplexity `exp(H)` mapped from `[1, k]` onto `[0, 1]`, with `k` the
/// support size as in [`entropy_uncertainty`].
pub fn perplexity_uncertainty(d: &TokenDistribution) -> f64 {
    let k = d.support();
    if k < 2 {
        return 0.0;
    }
    ((d.entropy_nats().exp() - 1.0) / (k as f64 - 1.0)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyMetric {
    #[default]
    Margin,
    Entropy,
    Perplexity,
}

impl UncertaintyMetric {
    pub fn evaluate(self, d: &TokenDistribution) -> f64 {
        match self {
            UncertaintyMetric::Margin => margin_uncertainty(d),
            UncertaintyMetric::Entropy => entropy_uncertainty(d),
            UncertaintyMetric::Perplexity => perplexity_uncertainty(d),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            UncertaintyMetric::Margin => "margin",
            UncertaintyMetric::Entropy => "entropy",
            UncertaintyMetric::Perplexity => "perplexity",
        }
    }
}

impl std::fmt::Display for UncertaintyMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Fraction of users answered correctly: the large model's label for
/// offloaded users, the small model's otherwise. Delay does not affect it.
pub fn accuracy_of(instance: &Instance, assignment: &Assignment) -> f64 {
    let n = instance.n_users();
    if n == 0 {
        return 0.0;
    }
    let correct = (0..n)
        .filter(|&i| {
            if assignment.is_offloaded(i) {
                instance.llm_correct[i]
            } else {
                instance.slm_correct[i]
            }
        })
        .count();
    correct as f64 / n as f64
}
