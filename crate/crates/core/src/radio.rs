//! Uplink channel and communication-delay model.
//!
//! Users transmit at a fixed power `P`. Each edge server splits its bandwidth
//! equally among its connected users, and the receiver at server `j` sees
//! interference from every user offloading to a *different* server, through
//! that user's channel toward `j`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::assignment::Assignment;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub bandwidth_hz: f64,
    pub tx_power_w: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub path_loss_exponent: f64,
    /// Loss at the 1 m reference distance.
    pub reference_loss_db: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            bandwidth_hz: 100e6,
            tx_power_w: 0.2,
            noise_psd_dbm_per_hz: -174.0,
            path_loss_exponent: 3.5,
            reference_loss_db: 40.0,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::Config("bandwidth_hz must be positive".into()));
        }
        if !(self.tx_power_w > 0.0 && self.tx_power_w.is_finite()) {
            return Err(Error::Config("tx_power_w must be positive".into()));
        }
        if !(self.path_loss_exponent >= 2.0 && self.path_loss_exponent.is_finite()) {
            return Err(Error::Config("path_loss_exponent must be >= 2".into()));
        }
        if !self.noise_psd_dbm_per_hz.is_finite() || !self.reference_loss_db.is_finite() {
            return Err(Error::Config(
                "noise_psd_dbm_per_hz and reference_loss_db must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Noise power spectral density in W/Hz.
    pub fn noise_psd_w_per_hz(&self) -> f64 {
        10f64.powf((self.noise_psd_dbm_per_hz - 30.0) / 10.0)
    }
}

/// Small-scale fading applied on top of path loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fading {
    #[default]
    Rayleigh,
    /// Deterministic path loss only.
    None,
}

/// Linear power gains `|h_{i,j}|^2`, one row per user, one column per server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChannelMatrix {
    gains: Vec<Vec<f64>>,
}

impl ChannelMatrix {
    pub fn from_rows(gains: Vec<Vec<f64>>) -> Result<Self> {
        let m = gains.first().map_or(0, Vec::len);
        for (i, row) in gains.iter().enumerate() {
            if row.len() != m {
                return Err(Error::instance(
                    "channel_gain",
                    format!("row {i} has {} entries, expected {m}", row.len()),
                ));
            }
            if let Some(g) = row.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
                return Err(Error::instance(
                    "channel_gain",
                    format!("row {i} has entry {g}, gains must be finite and >= 0"),
                ));
            }
        }
        Ok(Self { gains })
    }

    pub fn n_users(&self) -> usize {
        self.gains.len()
    }

    pub fn n_servers(&self) -> usize {
        self.gains.first().map_or(0, Vec::len)
    }

    #[inline]
    pub fn gain(&self, user: usize, server: usize) -> f64 {
        self.gains[user][server]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.gains
    }
}

/// Log-distance mean power gain. Distances below 1 m (including nonpositive
/// or NaN input) are clamped to the 1 m reference point.
pub fn path_gain(distance_m: f64, params: &RadioParams) -> f64 {
    let d = if distance_m > 1.0 { distance_m } else { 1.0 };
    let loss_db = params.reference_loss_db + 10.0 * params.path_loss_exponent * d.log10();
    10f64.powf(-loss_db / 10.0)
}

/// Draws path loss times a unit-mean exponential power fade for every
/// user/server pair. Rows are drawn in user order, columns in server order.
pub fn draw_channel_matrix(
    user_pos: &[Point],
    es_pos: &[Point],
    params: &RadioParams,
    fading: Fading,
    seed: u64,
) -> ChannelMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gains = user_pos
        .iter()
        .map(|u| {
            es_pos
                .iter()
                .map(|s| {
                    let mean = path_gain(u.distance(s), params);
                    match fading {
                        Fading::Rayleigh => {
                            let fade: f64 = Exp1.sample(&mut rng);
                            mean * fade
                        }
                        Fading::None => mean,
                    }
                })
                .collect()
        })
        .collect();
    ChannelMatrix { gains }
}

/// Equal bandwidth share; an idle server reports its full band.
pub fn allocate_bandwidth(bandwidth_hz: f64, n_connected: usize) -> f64 {
    bandwidth_hz / n_connected.max(1) as f64
}

pub fn noise_power_w(params: &RadioParams, band_hz: f64) -> f64 {
    params.noise_psd_w_per_hz() * band_hz
}

/// Received interference at server `j` for user `i`: every other user offloaded
/// to some server other than `j`, seen through its channel toward `j`.
pub fn interference_w(
    i: usize,
    j: usize,
    assignment: &Assignment,
    channels: &ChannelMatrix,
    params: &RadioParams,
) -> f64 {
    assignment
        .offloaded_users()
        .filter(|&(other, server)| other != i && server != j)
        .map(|(other, _)| params.tx_power_w * channels.gain(other, j))
        .sum()
}

pub fn sinr(
    i: usize,
    j: usize,
    assignment: &Assignment,
    channels: &ChannelMatrix,
    params: &RadioParams,
    noise_w: f64,
) -> f64 {
    sinr_from_parts(
        channels.gain(i, j),
        interference_w(i, j, assignment, channels, params),
        noise_w,
        params,
    )
}

#[inline]
pub fn sinr_from_parts(gain: f64, interference_w: f64, noise_w: f64, params: &RadioParams) -> f64 {
    params.tx_power_w * gain / (interference_w + noise_w)
}

#[inline]
pub fn shannon_rate(band_hz: f64, sinr: f64) -> f64 {
    band_hz * (1.0 + sinr).log2()
}

/// Achievable uplink rate of user `i` at server `j` when `n_connected` users
/// (the caller decides whether `i` is among them) share the server's band.
pub fn rate(
    i: usize,
    j: usize,
    assignment: &Assignment,
    channels: &ChannelMatrix,
    params: &RadioParams,
    n_connected: usize,
) -> f64 {
    let band = allocate_bandwidth(params.bandwidth_hz, n_connected);
    let noise = noise_power_w(params, band);
    shannon_rate(band, sinr(i, j, assignment, channels, params, noise))
}

/// `bits / rate`, or `+inf` when the link carries nothing.
#[inline]
pub fn comm_delay(bits: f64, rate_bps: f64) -> f64 {
    if rate_bps > 0.0 {
        bits / rate_bps
    } else {
        f64::INFINITY
    }
}

/// Uplink delay kernel shared by post-hoc evaluation and solver candidates.
#[inline]
pub fn link_delay(
    bits: f64,
    gain: f64,
    interference_w: f64,
    n_connected: usize,
    params: &RadioParams,
) -> f64 {
    let band = allocate_bandwidth(params.bandwidth_hz, n_connected);
    let noise = noise_power_w(params, band);
    comm_delay(
        bits,
        shannon_rate(band, sinr_from_parts(gain, interference_w, noise, params)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn path_gain_reference_and_arithmetic() {
        let p = RadioParams::default();
        assert!(rel(path_gain(1.0, &p), 1e-4) < 1e-12);
        assert!(rel(path_gain(10.0, &p), 10f64.powf(-7.5)) < 1e-12);
        assert!(path_gain(100.0, &p) < path_gain(10.0, &p));
    }

    #[test]
    fn path_gain_clamps_short_and_nonpositive_distance() {
        let p = RadioParams::default();
        assert_eq!(path_gain(0.0, &p), path_gain(1.0, &p));
        assert_eq!(path_gain(-5.0, &p), path_gain(1.0, &p));
        assert_eq!(path_gain(0.3, &p), path_gain(1.0, &p));
        assert_eq!(path_gain(f64::NAN, &p), path_gain(1.0, &p));
    }

    #[test]
    fn bandwidth_share() {
        assert_eq!(allocate_bandwidth(100e6, 4), 25e6);
        assert_eq!(allocate_bandwidth(100e6, 0), 100e6);
        assert_eq!(allocate_bandwidth(100e6, 1), 100e6);
    }

    #[test]
    fn rate_and_delay_arithmetic() {
        let r = shannon_rate(1e6, 3.0);
        assert_eq!(r, 2e6);
        assert_eq!(comm_delay(1e6, r), 0.5);
        assert_eq!(comm_delay(1e6, 0.0), f64::INFINITY);
    }

    #[test]
    fn zero_gain_is_infinite_delay() {
        let p = RadioParams::default();
        assert_eq!(link_delay(8192.0, 0.0, 0.0, 1, &p), f64::INFINITY);
    }

    #[test]
    fn doubling_connected_users_doubles_delay_at_fixed_sinr() {
        let b = 1e6;
        let d1 = comm_delay(1e6, shannon_rate(allocate_bandwidth(b, 1), 3.0));
        let d2 = comm_delay(1e6, shannon_rate(allocate_bandwidth(b, 2), 3.0));
        assert_eq!(d2, 2.0 * d1);
    }

    fn two_user_world(gains: Vec<Vec<f64>>) -> (ChannelMatrix, RadioParams) {
        (ChannelMatrix::from_rows(gains).unwrap(), RadioParams::default())
    }

    #[test]
    fn sinr_without_interferers_is_snr() {
        let (ch, p) = two_user_world(vec![vec![1e-9, 2e-10], vec![1e-9, 1e-9]]);
        let noise = 1e-13;
        let a = Assignment::all_local(2);
        assert_eq!(sinr(0, 0, &a, &ch, &p, noise), p.tx_power_w * 1e-9 / noise);
    }

    #[test]
    fn same_server_user_does_not_interfere() {
        let (ch, p) = two_user_world(vec![vec![1e-9, 2e-10], vec![1e-9, 1e-9]]);
        let noise = 1e-13;
        let alone = sinr(0, 0, &Assignment::all_local(2), &ch, &p, noise);
        let shared = sinr(0, 0, &Assignment::from_servers(vec![Some(0), Some(0)]), &ch, &p, noise);
        assert_eq!(alone, shared);
    }

    #[test]
    fn equal_power_interferer_at_noise_level_halves_sinr() {
        // Interferer on server 1 reaches server 0 with the same gain as user 0.
        let (ch, p) = two_user_world(vec![vec![1e-9, 1e-12], vec![1e-9, 1e-9]]);
        let noise = p.tx_power_w * 1e-9;
        let alone = sinr(0, 0, &Assignment::all_local(2), &ch, &p, noise);
        let with = sinr(0, 0, &Assignment::from_servers(vec![None, Some(1)]), &ch, &p, noise);
        assert!((with - alone / 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_server_sinr_is_snr_for_any_assignment() {
        let (ch, p) = two_user_world(vec![vec![3e-10], vec![5e-10]]);
        let noise = 1e-13;
        for a in [
            Assignment::all_local(2),
            Assignment::from_servers(vec![Some(0), None]),
            Assignment::from_servers(vec![Some(0), Some(0)]),
        ] {
            assert_eq!(sinr(0, 0, &a, &ch, &p, noise), p.tx_power_w * 3e-10 / noise);
        }
    }

    #[test]
    fn zero_fading_gives_path_gain_exactly() {
        let p = RadioParams::default();
        let users = [Point::new(10.0, 20.0), Point::new(400.0, 30.0)];
        let servers = [Point::new(125.0, 125.0), Point::new(375.0, 375.0)];
        let ch = draw_channel_matrix(&users, &servers, &p, Fading::None, 1);
        for (i, u) in users.iter().enumerate() {
            for (j, s) in servers.iter().enumerate() {
                assert_eq!(ch.gain(i, j), path_gain(u.distance(s), &p));
            }
        }
    }

    #[test]
    fn channel_draw_is_seeded() {
        let p = RadioParams::default();
        let users = [Point::new(10.0, 20.0), Point::new(400.0, 30.0)];
        let servers = [Point::new(125.0, 125.0)];
        let a = draw_channel_matrix(&users, &servers, &p, Fading::Rayleigh, 99);
        let b = draw_channel_matrix(&users, &servers, &p, Fading::Rayleigh, 99);
        let c = draw_channel_matrix(&users, &servers, &p, Fading::Rayleigh, 100);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rayleigh_power_fade_has_unit_mean() {
        // Law of large numbers against the unit-mean exponential: one user,
        // one server, 1e5 independent draws of the normalized gain.
        let p = RadioParams::default();
        let users = vec![Point::new(0.0, 0.0); 100_000];
        let servers = [Point::new(30.0, 40.0)];
        let ch = draw_channel_matrix(&users, &servers, &p, Fading::Rayleigh, 2024);
        let pg = path_gain(50.0, &p);
        let mean = ch.rows().iter().map(|r| r[0] / pg).sum::<f64>() / users.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean = {mean}");
    }

    #[test]
    fn matrix_rejects_negative_and_ragged_rows() {
        assert!(ChannelMatrix::from_rows(vec![vec![1.0, -1.0]]).is_err());
        assert!(ChannelMatrix::from_rows(vec![vec![1.0, 1.0], vec![1.0]]).is_err());
        assert!(ChannelMatrix::from_rows(vec![vec![f64::NAN]]).is_err());
    }

    proptest! {
        #[test]
        fn share_never_exceeds_total(b in 1.0f64..1e9, n in 1usize..10_000) {
            prop_assert!(allocate_bandwidth(b, n) * n as f64 <= b * (1.0 + 1e-12));
        }

        #[test]
        fn path_gain_strictly_decreasing(d in 1.0f64..5_000.0, step in 0.01f64..100.0,
                                          exp in 2.0f64..6.0, refl in 0.0f64..80.0) {
            let p = RadioParams { path_loss_exponent: exp, reference_loss_db: refl, ..Default::default() };
            prop_assert!(path_gain(d + step, &p) < path_gain(d, &p));
        }

        #[test]
        fn extra_interferer_never_raises_sinr(
            gains in proptest::collection::vec(proptest::collection::vec(1e-14f64..1e-6, 3), 5),
            servers in proptest::collection::vec(proptest::option::of(0usize..3), 5),
            extra_server in 0usize..3,
        ) {
            let ch = ChannelMatrix::from_rows(gains).unwrap();
            let p = RadioParams::default();
            let noise = noise_power_w(&p, 1e6);
            let mut a = Assignment::from_servers(servers);
            a.unassign(4);
            let before: Vec<f64> = (0..4).flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| sinr(i, j, &a, &ch, &p, noise)).collect();
            a.assign(4, extra_server);
            let after: Vec<f64> = (0..4).flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| sinr(i, j, &a, &ch, &p, noise)).collect();
            for (b, c) in before.iter().zip(&after) {
                prop_assert!(c <= b);
            }
        }
    }
}
