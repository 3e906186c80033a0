//! Problem instances: configuration, seeded generation, and the JSON
//! instance document.
//!
//! Capacities in [`ScenarioConfig`] are given in GFLOP/s (local) and
//! TFLOP/s (edge) to match the usual way they are quoted; an [`Instance`]
//! stores everything in SI units (FLOP/s, bits, watts, Hz).

use std::path::Path;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::{draw_channel_matrix, ChannelMatrix, Fading, Point, RadioParams};
use crate::rng::{derive_seed, stream, stream_rng};
use crate::uncertainty::{SyntheticParams, UncertaintyMetric, UncertaintyTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_users: usize,
    pub n_servers: usize,
    pub area_side: f64,
    pub es_positions: Vec<Point>,
    pub bandwidth_hz: f64,
    pub tx_power_w: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub path_loss_exponent: f64,
    pub reference_loss_db: f64,
    pub c_local_range_gflops: [f64; 2],
    pub c_es_range_tflops: [f64; 2],
    pub c_max_tflops: f64,
    pub w_slm_flops: f64,
    pub w_llm_flops: f64,
    pub tau: f64,
    pub master_seed: u64,
    /// Metric turning a token distribution into the per-user weight.
    pub metric: UncertaintyMetric,
    pub fading: Fading,
    /// Query size used when users come from the synthetic model.
    pub default_query_bits: f64,
    /// Draw trace records with replacement instead of without.
    pub sample_with_replacement: bool,
    pub synthetic: SyntheticParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let radio = RadioParams::default();
        Self {
            n_users: 60,
            n_servers: 4,
            area_side: 500.0,
            es_positions: vec![
                Point::new(125.0, 125.0),
                Point::new(125.0, 375.0),
                Point::new(375.0, 125.0),
                Point::new(375.0, 375.0),
            ],
            bandwidth_hz: radio.bandwidth_hz,
            tx_power_w: radio.tx_power_w,
            noise_psd_dbm_per_hz: radio.noise_psd_dbm_per_hz,
            path_loss_exponent: radio.path_loss_exponent,
            reference_loss_db: radio.reference_loss_db,
            c_local_range_gflops: [45.53, 136.6],
            c_es_range_tflops: [9.078, 21.18],
            c_max_tflops: 1.513,
            // 2 FLOPs per parameter for one generated token: 1B and 8B models
            w_slm_flops: 2e9,
            w_llm_flops: 16e9,
            tau: 0.6,
            master_seed: 0,
            metric: UncertaintyMetric::Margin,
            fading: Fading::Rayleigh,
            default_query_bits: 8192.0,
            sample_with_replacement: false,
            synthetic: SyntheticParams::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

fn range(name: &str, r: [f64; 2]) -> Result<()> {
    positive(name, r[0])?;
    positive(name, r[1])?;
    if r[0] > r[1] {
        return Err(Error::Config(format!("{name} lower bound exceeds upper bound")));
    }
    Ok(())
}

impl ScenarioConfig {
    /// Default four-server layout with `n_users` users.
    pub fn with_users(n_users: usize) -> Self {
        Self {
            n_users,
            ..Self::default()
        }
    }

    pub fn radio_params(&self) -> RadioParams {
        RadioParams {
            bandwidth_hz: self.bandwidth_hz,
            tx_power_w: self.tx_power_w,
            noise_psd_dbm_per_hz: self.noise_psd_dbm_per_hz,
            path_loss_exponent: self.path_loss_exponent,
            reference_loss_db: self.reference_loss_db,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_servers == 0 {
            return Err(Error::Config("n_users and n_servers must be >= 1".into()));
        }
        positive("area_side", self.area_side)?;
        if self.es_positions.len() != self.n_servers {
            return Err(Error::Config(format!(
                "es_positions has {} entries but n_servers = {}",
                self.es_positions.len(),
                self.n_servers
            )));
        }
        for (j, p) in self.es_positions.iter().enumerate() {
            let inside = |v: f64| (0.0..=self.area_side).contains(&v);
            if !(inside(p.x) && inside(p.y)) {
                return Err(Error::Config(format!(
                    "es_positions[{j}] = ({}, {}) lies outside the {} m square",
                    p.x, p.y, self.area_side
                )));
            }
        }
        self.radio_params().validate()?;
        range("c_local_range_gflops", self.c_local_range_gflops)?;
        range("c_es_range_tflops", self.c_es_range_tflops)?;
        positive("c_max_tflops", self.c_max_tflops)?;
        positive("w_slm_flops", self.w_slm_flops)?;
        positive("w_llm_flops", self.w_llm_flops)?;
        positive("default_query_bits", self.default_query_bits)?;
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config(format!("tau must lie in [0,1], got {}", self.tau)));
        }
        self.synthetic.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One sampled world. All per-user vectors have `n_users` entries and all
/// per-server vectors `n_servers`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub user_positions: Vec<Point>,
    pub es_positions: Vec<Point>,
    pub channel_gain: ChannelMatrix,
    /// Local compute rate per user, FLOP/s.
    pub c_local: Vec<f64>,
    /// Edge compute rate per server, FLOP/s.
    pub c_es: Vec<f64>,
    pub query_bits: Vec<f64>,
    pub alpha: Vec<f64>,
    pub slm_correct: Vec<bool>,
    pub llm_correct: Vec<bool>,
    pub radio: RadioParams,
    /// Per-user cap on the edge compute share, FLOP/s.
    pub c_max: f64,
    pub w_slm: f64,
    pub w_llm: f64,
}

impl Instance {
    pub fn n_users(&self) -> usize {
        self.user_positions.len()
    }

    pub fn n_servers(&self) -> usize {
        self.es_positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_users();
        let m = self.n_servers();
        let per_user = |field: &str, len: usize| {
            if len == n {
                Ok(())
            } else {
                Err(Error::instance(
                    field,
                    format!("has {len} entries but there are {n} users"),
                ))
            }
        };
        per_user("c_local", self.c_local.len())?;
        per_user("query_bits", self.query_bits.len())?;
        per_user("alpha", self.alpha.len())?;
        per_user("slm_correct", self.slm_correct.len())?;
        per_user("llm_correct", self.llm_correct.len())?;
        if self.c_es.len() != m {
            return Err(Error::instance(
                "c_es",
                format!("has {} entries but there are {m} servers", self.c_es.len()),
            ));
        }
        let ch = ChannelMatrix::from_rows(self.channel_gain.rows().to_vec())?;
        if ch.n_users() != n || (n > 0 && ch.n_servers() != m) {
            return Err(Error::instance(
                "channel_gain",
                format!(
                    "is {}x{} but the instance is {n}x{m}",
                    ch.n_users(),
                    ch.n_servers()
                ),
            ));
        }
        if let Some((i, a)) = self
            .alpha
            .iter()
            .enumerate()
            .find(|(_, a)| !(0.0..=1.0).contains(*a))
        {
            return Err(Error::instance(
                "alpha",
                format!("alpha out of [0,1]: entry {i} = {a}"),
            ));
        }
        let all_positive = |field: &str, v: &[f64]| match v
            .iter()
            .enumerate()
            .find(|(_, x)| !(x.is_finite() && **x > 0.0))
        {
            Some((i, x)) => Err(Error::instance(
                field,
                format!("entry {i} = {x} must be positive"),
            )),
            None => Ok(()),
        };
        all_positive("c_local", &self.c_local)?;
        all_positive("c_es", &self.c_es)?;
        all_positive("query_bits", &self.query_bits)?;
        all_positive("c_max", &[self.c_max])?;
        all_positive("w_slm", &[self.w_slm])?;
        all_positive("w_llm", &[self.w_llm])?;
        for (field, pts) in [
            ("user_positions", &self.user_positions),
            ("es_positions", &self.es_positions),
        ] {
            if pts.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
                return Err(Error::instance(field, "coordinates must be finite"));
            }
        }
        self.radio
            .validate()
            .map_err(|e| Error::instance("radio", e.to_string()))
    }

    /// Pretty-printed JSON. Reals are written in shortest round-trip form,
    /// so [`Instance::from_json`] restores them bit for bit.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub fn save_instance(instance: &Instance) -> String {
    instance.to_json()
}

pub fn load_instance(document: &str) -> Result<Instance> {
    Instance::from_json(document)
}

fn uniform_points<R: Rng>(n: usize, side: f64, rng: &mut R) -> Vec<Point> {
    (0..n)
        .map(|_| {
            let x = rng.random_range(0.0..=side);
            let y = rng.random_range(0.0..=side);
            Point::new(x, y)
        })
        .collect()
}

fn uniform_values<R: Rng>(n: usize, r: [f64; 2], scale: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(r[0]..=r[1]) * scale).collect()
}

/// Samples the world for Monte Carlo iteration `iteration`. Every random
/// quantity comes from its own stream derived from
/// `(config.master_seed, iteration)`, so the result is a pure function of
/// the arguments.
pub fn generate_instance(
    config: &ScenarioConfig,
    trace: Option<&UncertaintyTrace>,
    iteration: u64,
) -> Result<Instance> {
    config.validate()?;
    let n = config.n_users;
    let seed = config.master_seed;

    let user_positions = uniform_points(n, config.area_side, &mut stream_rng(seed, iteration, stream::USER_POSITIONS));
    let c_local = uniform_values(
        n,
        config.c_local_range_gflops,
        1e9,
        &mut stream_rng(seed, iteration, stream::LOCAL_CAPACITY),
    );
    let c_es = uniform_values(
        config.n_servers,
        config.c_es_range_tflops,
        1e12,
        &mut stream_rng(seed, iteration, stream::EDGE_CAPACITY),
    );
    let radio = config.radio_params();
    let channel_gain = draw_channel_matrix(
        &user_positions,
        &config.es_positions,
        &radio,
        config.fading,
        derive_seed(seed, iteration, stream::CHANNEL),
    );

    let mut rng = stream_rng(seed, iteration, stream::UNCERTAINTY);
    let (records, query_bits): (Vec<_>, Vec<f64>) = match trace {
        Some(t) => {
            let picks: Vec<usize> = if config.sample_with_replacement {
                if t.is_empty() {
                    return Err(Error::TraceTooShort { available: 0, required: n });
                }
                (0..n).map(|_| rng.random_range(0..t.len())).collect()
            } else {
                if t.len() < n {
                    return Err(Error::TraceTooShort {
                        available: t.len(),
                        required: n,
                    });
                }
                index::sample(&mut rng, t.len(), n).into_vec()
            };
            picks
                .into_iter()
                .map(|k| {
                    let r = t.records[k].clone();
                    let bits = r.query_bits as f64;
                    (r, bits)
                })
                .unzip()
        }
        None => config
            .synthetic
            .sample_records(n, &mut rng)?
            .into_iter()
            .map(|r| (r, config.default_query_bits))
            .unzip(),
    };

    let instance = Instance {
        user_positions,
        es_positions: config.es_positions.clone(),
        channel_gain,
        c_local,
        c_es,
        query_bits,
        alpha: records.iter().map(|r| config.metric.evaluate(&r.topk_probs)).collect(),
        slm_correct: records.iter().map(|r| r.slm_correct).collect(),
        llm_correct: records.iter().map(|r| r.llm_correct).collect(),
        radio,
        c_max: config.c_max_tflops * 1e12,
        w_slm: config.w_slm_flops,
        w_llm: config.w_llm_flops,
    };
    debug_assert!(instance.validate().is_ok());
    Ok(instance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uncertainty::{synth_trace, SyntheticParams};

    #[test]
    fn default_layout_instance_shapes() {
        let cfg = ScenarioConfig::with_users(4);
        let inst = generate_instance(&cfg, None, 0).unwrap();
        assert_eq!(inst.n_users(), 4);
        assert_eq!(inst.n_servers(), 4);
        assert_eq!(inst.channel_gain.n_users(), 4);
        assert_eq!(inst.channel_gain.n_servers(), 4);
        for p in &inst.user_positions {
            assert!((0.0..=500.0).contains(&p.x) && (0.0..=500.0).contains(&p.y));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = ScenarioConfig::with_users(30);
        let trace = synth_trace(&SyntheticParams::default(), 5).unwrap();
        for t in [None, Some(&trace)] {
            let a = generate_instance(&cfg, t, 17).unwrap();
            let b = generate_instance(&cfg, t, 17).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, generate_instance(&cfg, t, 18).unwrap());
        }
    }

    #[test]
    fn single_user_single_server_shapes() {
        let cfg = ScenarioConfig {
            n_users: 1,
            n_servers: 1,
            es_positions: vec![Point::new(250.0, 250.0)],
            ..Default::default()
        };
        let inst = generate_instance(&cfg, None, 0).unwrap();
        assert_eq!(inst.alpha.len(), 1);
        assert_eq!(inst.c_local.len(), 1);
        assert_eq!(inst.c_es.len(), 1);
        assert_eq!(inst.channel_gain.rows(), &[vec![inst.channel_gain.gain(0, 0)]]);
    }

    #[test]
    fn short_trace_is_rejected() {
        let cfg = ScenarioConfig::with_users(10);
        let trace = synth_trace(&SyntheticParams { n: 9, ..Default::default() }, 1).unwrap();
        assert!(matches!(
            generate_instance(&cfg, Some(&trace), 0),
            Err(Error::TraceTooShort { available: 9, required: 10 })
        ));
        let with = ScenarioConfig { sample_with_replacement: true, ..cfg };
        assert!(generate_instance(&with, Some(&trace), 0).is_ok());
    }

    #[test]
    fn trace_sampling_without_replacement_has_no_duplicates() {
        let cfg = ScenarioConfig::with_users(50);
        let mut trace = synth_trace(&SyntheticParams { n: 50, ..Default::default() }, 1).unwrap();
        // tag each record with a unique token count
        for (k, r) in trace.records.iter_mut().enumerate() {
            r.query_tokens = k as u64 + 1;
            r.query_bits = (k as u64 + 1) * 16;
        }
        let inst = generate_instance(&cfg, Some(&trace), 3).unwrap();
        let mut bits = inst.query_bits.clone();
        bits.sort_by(f64::total_cmp);
        bits.dedup();
        assert_eq!(bits.len(), 50);
    }

    #[test]
    fn server_outside_area_is_config_error() {
        let mut cfg = ScenarioConfig::default();
        cfg.es_positions[2] = Point::new(600.0, 10.0);
        assert!(matches!(generate_instance(&cfg, None, 0), Err(Error::Config(_))));
    }

    #[test]
    fn config_invariants() {
        let bad = [
            ScenarioConfig { n_users: 0, ..Default::default() },
            ScenarioConfig { tau: 1.5, ..Default::default() },
            ScenarioConfig { bandwidth_hz: 0.0, ..Default::default() },
            ScenarioConfig { w_llm_flops: -1.0, ..Default::default() },
            ScenarioConfig { n_servers: 3, ..Default::default() },
            ScenarioConfig { c_local_range_gflops: [10.0, 5.0], ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        assert!(ScenarioConfig::default().validate().is_ok());
    }

    #[test]
    fn capacities_stay_in_default_ranges() {
        let cfg = ScenarioConfig::with_users(200);
        for it in 0..20 {
            let inst = generate_instance(&cfg, None, it).unwrap();
            assert!(inst.c_local.iter().all(|c| (45.53e9..=136.6e9).contains(c)));
            assert!(inst.c_es.iter().all(|c| (9.078e12..=21.18e12).contains(c)));
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let inst = generate_instance(&ScenarioConfig::with_users(4), None, 9).unwrap();
        let back = load_instance(&save_instance(&inst)).unwrap();
        assert_eq!(inst, back);
        for (a, b) in inst.c_local.iter().zip(&back.c_local) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    fn doc_with(f: impl FnOnce(&mut serde_json::Value)) -> String {
        let inst = generate_instance(&ScenarioConfig::with_users(3), None, 0).unwrap();
        let mut v = serde_json::to_value(&inst).unwrap();
        f(&mut v);
        v.to_string()
    }

    #[test]
    fn alpha_out_of_range_names_field() {
        let doc = doc_with(|v| v["alpha"][0] = serde_json::json!(1.2));
        let err = load_instance(&doc).unwrap_err().to_string();
        assert!(err.contains("alpha out of [0,1]"), "{err}");
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let doc = doc_with(|v| v["alpha"].as_array_mut().unwrap().push(serde_json::json!(0.5)));
        match load_instance(&doc).unwrap_err() {
            Error::Instance { field, reason } => {
                assert_eq!(field, "alpha");
                assert!(reason.contains("4 entries") && reason.contains("3 users"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_field_is_named() {
        let doc = doc_with(|v| {
            v.as_object_mut().unwrap().remove("c_es");
        });
        let err = load_instance(&doc).unwrap_err().to_string();
        assert!(err.contains("c_es"), "{err}");
    }

    #[test]
    fn negative_gain_is_rejected() {
        let doc = doc_with(|v| v["channel_gain"][1][2] = serde_json::json!(-1e-9));
        let err = load_instance(&doc).unwrap_err().to_string();
        assert!(err.contains("channel_gain"), "{err}");
    }
}
