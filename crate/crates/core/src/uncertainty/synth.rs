use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::trace::{TraceSource, UncertaintyRecord, UncertaintyTrace, DEFAULT_BITS_PER_TOKEN};
use super::TokenDistribution;
use crate::error::{Error, Result};

/// Piecewise-linear map given by `(x, y)` knots with ascending `x`.
/// Flat extrapolation outside the knot range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PiecewiseLinear {
    knots: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        let curve = Self { knots };
        curve.validate()?;
        Ok(curve)
    }

    pub fn linear(at_zero: f64, at_one: f64) -> Self {
        Self {
            knots: vec![(0.0, at_zero), (1.0, at_one)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.knots.is_empty() {
            return Err(Error::Config("accuracy curve needs at least one knot".into()));
        }
        if self.knots.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(Error::Config("accuracy curve knots must have ascending x".into()));
        }
        if let Some((x, y)) = self
            .knots
            .iter()
            .find(|(x, y)| !x.is_finite() || !(0.0..=1.0).contains(y))
        {
            return Err(Error::Config(format!(
                "accuracy curve value {y} at {x} outside [0,1]"
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = &self.knots;
        if x <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if x <= x1 {
                return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
            }
        }
        k[k.len() - 1].1
    }
}

/// Synthetic stand-in for model inference on a QA benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    /// Records produced by [`synth_trace`].
    pub n: usize,
    /// Probability mass of each equal-width uncertainty bin over `[0, 1]`.
    pub alpha_bins: Vec<f64>,
    pub slm_acc_curve: PiecewiseLinear,
    pub llm_acc_curve: PiecewiseLinear,
    pub query_tokens: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            n: 1000,
            // 40% of the mass at alpha >= 0.8
            alpha_bins: vec![0.04, 0.04, 0.05, 0.05, 0.06, 0.08, 0.10, 0.18, 0.20, 0.20],
            slm_acc_curve: PiecewiseLinear::linear(0.95, 0.35),
            llm_acc_curve: PiecewiseLinear::linear(0.98, 0.75),
            query_tokens: 8192 / DEFAULT_BITS_PER_TOKEN,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<()> {
        if self.alpha_bins.is_empty() {
            return Err(Error::Config("alpha_bins must be nonempty".into()));
        }
        if self.alpha_bins.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("alpha_bins weights must be >= 0".into()));
        }
        let total: f64 = self.alpha_bins.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("alpha_bins sum to {total}, not 1")));
        }
        if self.query_tokens == 0 {
            return Err(Error::Config("query_tokens must be >= 1".into()));
        }
        self.slm_acc_curve.validate()?;
        self.llm_acc_curve.validate()
    }

    /// Draws `n` records from `rng`. Per record: bin, position in bin,
    /// small-model label, large-model label.
    pub fn sample_records<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<UncertaintyRecord>> {
        self.validate()?;
        let bins = WeightedIndex::new(&self.alpha_bins)
            .map_err(|e| Error::Config(format!("alpha_bins: {e}")))?;
        let width = 1.0 / self.alpha_bins.len() as f64;
        (0..n)
            .map(|_| {
                let b = bins.sample(rng);
                let alpha = ((b as f64 + rng.random::<f64>()) * width).min(1.0);
                let slm_correct = rng.random_bool(self.slm_acc_curve.eval(alpha));
                let llm_correct = rng.random_bool(self.llm_acc_curve.eval(alpha));
                Ok(UncertaintyRecord {
                    topk_probs: two_point(alpha)?,
                    slm_correct,
                    llm_correct,
                    query_tokens: self.query_tokens,
                    query_bits: self.query_tokens * DEFAULT_BITS_PER_TOKEN,
                })
            })
            .collect()
    }
}

/// Two-point distribution whose margin uncertainty is `alpha`.
fn two_point(alpha: f64) -> Result<TokenDistribution> {
    let p1 = 1.0 - alpha / 2.0;
    TokenDistribution::new(vec![p1, alpha / 2.0])
}

pub fn synth_trace(params: &SyntheticParams, seed: u64) -> Result<UncertaintyTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = params.sample_records(params.n, &mut rng)?;
    UncertaintyTrace::new(records, TraceSource::Synthetic(params.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uncertainty::margin_uncertainty;

    #[test]
    fn curve_interpolates_and_clamps() {
        let c = PiecewiseLinear::new(vec![(0.0, 1.0), (0.5, 0.5), (1.0, 0.4)]).unwrap();
        assert_eq!(c.eval(-1.0), 1.0);
        assert_eq!(c.eval(0.25), 0.75);
        assert!((c.eval(0.75) - 0.45).abs() < 1e-15);
        assert_eq!(c.eval(2.0), 0.4);
    }

    #[test]
    fn curve_outside_unit_interval_is_config_error() {
        assert!(PiecewiseLinear::new(vec![(0.0, 1.2), (1.0, 0.5)]).is_err());
        let p = SyntheticParams {
            slm_acc_curve: PiecewiseLinear::linear(0.5, -0.1),
            ..Default::default()
        };
        assert!(matches!(synth_trace(&p, 1), Err(Error::Config(_))));
    }

    #[test]
    fn histogram_must_sum_to_one() {
        let p = SyntheticParams {
            alpha_bins: vec![0.5, 0.6],
            ..Default::default()
        };
        assert!(synth_trace(&p, 1).is_err());
    }

    #[test]
    fn default_law_puts_forty_percent_above_point_eight() {
        let p = SyntheticParams::default();
        let tail: f64 = p.alpha_bins[8..].iter().sum();
        assert!((tail - 0.4).abs() < 1e-12);
    }

    #[test]
    fn synthetic_distribution_reproduces_alpha() {
        let p = SyntheticParams { n: 2000, ..Default::default() };
        let t = synth_trace(&p, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // replay the alpha draws independently of the record construction
        let bins = WeightedIndex::new(&p.alpha_bins).unwrap();
        for r in &t.records {
            let b = bins.sample(&mut rng);
            let alpha = (b as f64 + rng.random::<f64>()) / 10.0;
            let _ = rng.random_bool(p.slm_acc_curve.eval(alpha));
            let _ = rng.random_bool(p.llm_acc_curve.eval(alpha));
            assert!((margin_uncertainty(&r.topk_probs) - alpha).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let p = SyntheticParams::default();
        assert_eq!(synth_trace(&p, 11).unwrap(), synth_trace(&p, 11).unwrap());
        assert_ne!(synth_trace(&p, 11).unwrap(), synth_trace(&p, 12).unwrap());
    }

    /// Monte Carlo check of the Bernoulli construction over 1e5 draws: the
    /// binned small-model accuracy falls bin over bin, and each bin sits
    /// within 3 binomial standard deviations of the curve's bin average.
    #[test]
    fn binned_slm_accuracy_tracks_curve() {
        let p = SyntheticParams { n: 100_000, ..Default::default() };
        let t = synth_trace(&p, 77).unwrap();
        let mut hits = [0usize; 10];
        let mut counts = [0usize; 10];
        for r in &t.records {
            let a = margin_uncertainty(&r.topk_probs);
            let b = ((a * 10.0) as usize).min(9);
            counts[b] += 1;
            hits[b] += r.slm_correct as usize;
        }
        let acc: Vec<f64> = (0..10).map(|b| hits[b] as f64 / counts[b] as f64).collect();
        for w in acc.windows(2) {
            assert!(w[1] <= w[0], "{acc:?}");
        }
        for b in 0..10 {
            // curve is linear, so the bin average is the value at the midpoint
            let target = p.slm_acc_curve.eval((b as f64 + 0.5) / 10.0);
            let sigma = (target * (1.0 - target) / counts[b] as f64).sqrt();
            assert!((acc[b] - target).abs() <= 3.0 * sigma, "bin {b}: {} vs {target}", acc[b]);
        }
    }
}
