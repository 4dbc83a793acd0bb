//! Network topology and channel generation.
//!
//! Base stations and users are dropped uniformly over a square (a homogeneous
//! Poisson point process conditioned on the node counts). Each BS-user link
//! gets a large-scale gain from the log-distance path-loss law with log-normal
//! shadowing, multiplied onto `CN(0, I)` small-scale fading. The transmitter
//! knows the estimate `h_est`; the true channel is `h_est + e` with
//! `e ~ CN(0, error_cov)`.

use std::io::Write;
use std::ops::Range;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat, CVec};

/// Links shorter than this are evaluated at this distance.
pub const MIN_LINK_DISTANCE_M: f64 = 10.0;

/// Default gain offset, see [`ChannelParams::normalization_db`].
pub const DEFAULT_NORMALIZATION_DB: f64 = 80.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub bs_positions: Vec<[f64; 2]>,
    pub user_positions: Vec<[f64; 2]>,
    pub antennas_per_bs: usize,
    pub area_side: f64,
}

impl NetworkTopology {
    pub fn num_bs(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn num_users(&self) -> usize {
        self.user_positions.len()
    }

    pub fn total_antennas(&self) -> usize {
        self.num_bs() * self.antennas_per_bs
    }

    /// Antenna indices owned by BS `l` in the network-wide vector.
    pub fn bs_block(&self, l: usize) -> Range<usize> {
        bs_block(self.antennas_per_bs, l)
    }

    /// Euclidean distance between user `k` and BS `l` in meters (unclamped).
    pub fn distance(&self, k: usize, l: usize) -> f64 {
        let u = self.user_positions[k];
        let b = self.bs_positions[l];
        ((u[0] - b[0]).powi(2) + (u[1] - b[1]).powi(2)).sqrt()
    }
}

pub fn bs_block(antennas_per_bs: usize, l: usize) -> Range<usize> {
    l * antennas_per_bs..(l + 1) * antennas_per_bs
}

/// Draws `num_bs` BS positions followed by `num_users` user positions,
/// independently and uniformly over `[0, area_side]²`.
///
/// The draw order makes the first `K` users of a larger drop identical to a
/// `K`-user drop with the same seed.
pub fn generate_topology(
    num_bs: usize,
    num_users: usize,
    antennas_per_bs: usize,
    area_side: f64,
    seed: u64,
) -> Result<NetworkTopology> {
    if num_bs == 0 || num_users == 0 {
        return Err(Error::invalid("topology needs at least one BS and one user"));
    }
    if antennas_per_bs == 0 {
        return Err(Error::invalid("antennas_per_bs must be positive"));
    }
    if !(area_side > 0.0 && area_side.is_finite()) {
        return Err(Error::invalid(format!("area_side must be positive, got {area_side}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let point = |rng: &mut ChaCha8Rng| {
        [
            rng.random_range(0.0..=area_side),
            rng.random_range(0.0..=area_side),
        ]
    };
    let bs_positions = (0..num_bs).map(|_| point(&mut rng)).collect();
    let user_positions = (0..num_users).map(|_| point(&mut rng)).collect();
    Ok(NetworkTopology {
        bs_positions,
        user_positions,
        antennas_per_bs,
        area_side,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Path loss at 1 km, dB.
    pub pathloss_intercept_db: f64,
    /// dB per decade of distance.
    pub pathloss_slope: f64,
    pub antenna_gain_db: f64,
    /// Standard deviation of log-normal shadowing; 0 disables it.
    pub shadowing_std_db: f64,
    /// Receiver noise power σ² in watts.
    pub noise_power: f64,
    /// Scalar `ε` of the CSI error covariance `ε·I`.
    pub csi_error_variance: f64,
    /// Constant dB offset added to every large-scale gain. It expresses the
    /// gains in the same normalized units as `noise_power` and
    /// `csi_error_variance`; with 0 the raw path-loss law is used.
    pub normalization_db: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            pathloss_intercept_db: 128.1,
            pathloss_slope: 37.6,
            antenna_gain_db: 9.0,
            shadowing_std_db: 6.0,
            noise_power: 0.01,
            csi_error_variance: 0.01,
            normalization_db: DEFAULT_NORMALIZATION_DB,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_power > 0.0) {
            return Err(Error::invalid("noise_power must be positive"));
        }
        if !(self.shadowing_std_db >= 0.0) {
            return Err(Error::invalid("shadowing_std_db must be non-negative"));
        }
        if !(self.csi_error_variance >= 0.0) {
            return Err(Error::invalid("csi_error_variance must be non-negative"));
        }
        let finite = [
            self.pathloss_intercept_db,
            self.pathloss_slope,
            self.antenna_gain_db,
            self.normalization_db,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("channel parameters must be finite"));
        }
        Ok(())
    }

    /// Path loss in dB at `distance_m` meters (after the minimum-distance clamp).
    pub fn path_loss_db(&self, distance_m: f64) -> Result<f64> {
        if !(distance_m > 0.0) {
            return Err(Error::invalid(format!(
                "link distance must be positive, got {distance_m}"
            )));
        }
        let d_km = distance_m.max(MIN_LINK_DISTANCE_M) / 1000.0;
        Ok(self.pathloss_intercept_db + self.pathloss_slope * d_km.log10())
    }
}

/// Linear large-scale power gain of a link of length `distance_m` with the
/// given shadowing realization (0 when shadowing is off).
pub fn large_scale_gain(distance_m: f64, params: &ChannelParams, shadow_db: f64) -> Result<f64> {
    let pl = params.path_loss_db(distance_m)?;
    let db = params.antenna_gain_db + params.normalization_db + shadow_db - pl;
    Ok(10f64.powf(db / 10.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub h_true: Vec<CVec>,
    pub h_est: Vec<CVec>,
    /// Stored so that `h_true[k] - h_est[k] == error[k]` bit for bit.
    pub error: Vec<CVec>,
    pub error_cov: Vec<CMat>,
    pub noise_power: Vec<f64>,
}

impl ChannelState {
    pub fn num_users(&self) -> usize {
        self.h_est.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.h_est.first().map_or(0, |h| h.len())
    }

    /// Same estimates with the CSI error removed: `h_true = h_est`, `ε = 0`.
    pub fn perfect(h: Vec<CVec>, noise_power: Vec<f64>) -> Self {
        let n = h.first().map_or(0, |v| v.len());
        let k = h.len();
        ChannelState {
            h_true: h.clone(),
            h_est: h,
            error: vec![CVec::zeros(n); k],
            error_cov: vec![CMat::zeros(n, n); k],
            noise_power,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_users();
        let n = self.num_antennas();
        if k == 0 || n == 0 {
            return Err(Error::invalid("empty channel state"));
        }
        let same = self.h_true.len() == k
            && self.error.len() == k
            && self.error_cov.len() == k
            && self.noise_power.len() == k;
        if !same {
            return Err(Error::invalid("per-user channel fields disagree on K"));
        }
        for u in 0..k {
            if self.h_est[u].len() != n || self.h_true[u].len() != n || self.error[u].len() != n {
                return Err(Error::invalid(format!("user {u}: channel length mismatch")));
            }
            let cov = &self.error_cov[u];
            if cov.nrows() != n || cov.ncols() != n {
                return Err(Error::invalid(format!("user {u}: error covariance is not {n}x{n}")));
            }
            if !linalg::is_psd(cov, 1e-10) {
                return Err(Error::NotPsd(format!("user {u}: error covariance")));
            }
            if !(self.noise_power[u] > 0.0) {
                return Err(Error::invalid(format!("user {u}: noise power must be positive")));
            }
        }
        Ok(())
    }
}

/// Samples estimates, errors and true channels for every user.
///
/// Per user `k` the draw order is: for each BS `l`, a shadowing sample (when
/// enabled) then `CN(0, I_{N_l})` fading; afterwards the error
/// `e_k = ε^{1/2} c` with `c ~ CN(0, I_N)`. Users are processed in order, so
/// the channels of user `k` do not depend on how many users follow it.
pub fn sample_channels(
    topology: &NetworkTopology,
    params: &ChannelParams,
    seed: u64,
) -> Result<ChannelState> {
    params.validate()?;
    let n = topology.total_antennas();
    let nl = topology.antennas_per_bs;
    let shadow = Normal::new(0.0, params.shadowing_std_db.max(0.0))
        .map_err(|e| Error::invalid(format!("shadowing distribution: {e}")))?;
    let eps = params.csi_error_variance;
    let cov = linalg::identity(n).scale(eps);
    let sqrt_eps = eps.sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k_users = topology.num_users();
    let mut state = ChannelState {
        h_true: Vec::with_capacity(k_users),
        h_est: Vec::with_capacity(k_users),
        error: Vec::with_capacity(k_users),
        error_cov: Vec::with_capacity(k_users),
        noise_power: vec![params.noise_power; k_users],
    };
    for k in 0..k_users {
        let mut h_est = CVec::zeros(n);
        for l in 0..topology.num_bs() {
            let shadow_db = if params.shadowing_std_db > 0.0 {
                shadow.sample(&mut rng)
            } else {
                0.0
            };
            let gain = large_scale_gain(topology.distance(k, l), params, shadow_db)?;
            let g = linalg::sample_cn(&mut rng, nl);
            let amp = gain.sqrt();
            for (i, z) in g.iter().enumerate() {
                h_est[l * nl + i] = z * amp;
            }
        }
        let c = linalg::sample_cn(&mut rng, n);
        let sampled = c * c64(sqrt_eps, 0.0);
        let h_true = &h_est + &sampled;
        let error = &h_true - &h_est;
        state.h_true.push(h_true);
        state.h_est.push(h_est);
        state.error.push(error);
        state.error_cov.push(cov.clone());
    }
    Ok(state)
}

pub const CHANNEL_CSV_HEADER: [&str; 6] = ["user", "quantity", "row", "col", "re", "im"];

/// Writes a channel realization as `user,quantity,row,col,re,im` rows.
/// Quantities: `h_true`, `h_est`, `error` (col = 0), `error_cov` and
/// `noise_power` (row = col = 0, im = 0). Floats use shortest round-trip
/// formatting, so reading the file back is exact.
pub fn write_channels_csv<W: Write>(state: &ChannelState, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Output(format!("csv write: {e}"));
    w.write_record(CHANNEL_CSV_HEADER).map_err(err)?;
    for k in 0..state.num_users() {
        let vecs = [
            ("h_true", &state.h_true[k]),
            ("h_est", &state.h_est[k]),
            ("error", &state.error[k]),
        ];
        for (name, v) in vecs {
            for (i, z) in v.iter().enumerate() {
                w.write_record([
                    k.to_string(),
                    name.to_string(),
                    i.to_string(),
                    "0".into(),
                    z.re.to_string(),
                    z.im.to_string(),
                ])
                .map_err(err)?;
            }
        }
        let cov = &state.error_cov[k];
        for i in 0..cov.nrows() {
            for j in 0..cov.ncols() {
                let z = cov[(i, j)];
                w.write_record([
                    k.to_string(),
                    "error_cov".into(),
                    i.to_string(),
                    j.to_string(),
                    z.re.to_string(),
                    z.im.to_string(),
                ])
                .map_err(err)?;
            }
        }
        w.write_record([
            k.to_string(),
            "noise_power".into(),
            "0".into(),
            "0".into(),
            state.noise_power[k].to_string(),
            "0".into(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Output(format!("csv flush: {e}")))?;
    Ok(())
}

pub fn save_channels_csv(state: &ChannelState, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_channels_csv(state, std::io::BufWriter::new(file))
}

/// Parses the format of [`write_channels_csv`]. `path` only labels errors.
pub fn read_channels_csv<R: std::io::Read>(input: R, path: &Path) -> Result<ChannelState> {
    let rows = crate::io::read_complex_rows(input, path, &CHANNEL_CSV_HEADER)?;
    let k_users = rows.iter().map(|r| r.index + 1).max().unwrap_or(0);
    let n = rows
        .iter()
        .filter(|r| r.quantity == "h_est")
        .map(|r| r.row + 1)
        .max()
        .unwrap_or(0);
    if k_users == 0 || n == 0 {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            msg: "no channel rows".into(),
        });
    }
    let mut state = ChannelState {
        h_true: vec![CVec::zeros(n); k_users],
        h_est: vec![CVec::zeros(n); k_users],
        error: vec![CVec::zeros(n); k_users],
        error_cov: vec![CMat::zeros(n, n); k_users],
        noise_power: vec![0.0; k_users],
    };
    for r in &rows {
        let bad = |msg: &str| Error::Parse {
            path: path.into(),
            line: r.line,
            msg: msg.into(),
        };
        let z = c64(r.re, r.im);
        let k = r.index;
        match r.quantity.as_str() {
            "h_true" | "h_est" | "error" => {
                if r.row >= n || r.col != 0 {
                    return Err(bad("vector index out of range"));
                }
                let target = match r.quantity.as_str() {
                    "h_true" => &mut state.h_true[k],
                    "h_est" => &mut state.h_est[k],
                    _ => &mut state.error[k],
                };
                target[r.row] = z;
            }
            "error_cov" => {
                if r.row >= n || r.col >= n {
                    return Err(bad("matrix index out of range"));
                }
                state.error_cov[k][(r.row, r.col)] = z;
            }
            "noise_power" => state.noise_power[k] = r.re,
            other => return Err(bad(&format!("unknown quantity `{other}`"))),
        }
    }
    state.validate()?;
    Ok(state)
}

pub fn load_channels_csv(path: &Path) -> Result<ChannelState> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_channels_csv(file, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_shadow() -> ChannelParams {
        ChannelParams {
            shadowing_std_db: 0.0,
            normalization_db: 0.0,
            antenna_gain_db: 0.0,
            ..ChannelParams::default()
        }
    }

    #[test]
    fn table_one_drop_is_reproducible() {
        let a = generate_topology(5, 3, 2, 800.0, 42).unwrap();
        let b = generate_topology(5, 3, 2, 800.0, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.num_bs() + a.num_users(), 8);
        assert_eq!(a.total_antennas(), 10);
        for p in a.bs_positions.iter().chain(&a.user_positions) {
            assert!((0.0..=800.0).contains(&p[0]) && (0.0..=800.0).contains(&p[1]));
        }
        let c = generate_topology(5, 3, 2, 800.0, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn unit_square_containment() {
        let t = generate_topology(1, 1, 1, 1.0, 0).unwrap();
        for p in t.bs_positions.iter().chain(&t.user_positions) {
            assert!((0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]));
        }
    }

    #[test]
    fn empty_counts_rejected() {
        assert!(generate_topology(0, 3, 2, 800.0, 1).is_err());
        assert!(generate_topology(5, 0, 2, 800.0, 1).is_err());
        assert!(generate_topology(5, 3, 2, 0.0, 1).is_err());
    }

    #[test]
    fn user_prefix_is_stable() {
        let small = generate_topology(5, 3, 2, 800.0, 9).unwrap();
        let big = generate_topology(5, 7, 2, 800.0, 9).unwrap();
        assert_eq!(small.bs_positions, big.bs_positions);
        assert_eq!(small.user_positions[..], big.user_positions[..3]);
    }

    #[test]
    fn path_loss_law() {
        let p = no_shadow();
        assert!((p.path_loss_db(1000.0).unwrap() - 128.1).abs() < 1e-12);
        assert!((p.path_loss_db(100.0).unwrap() - 90.5).abs() < 1e-12);
        let g = large_scale_gain(1000.0, &p, 0.0).unwrap();
        assert!((g / 10f64.powf(-12.81) - 1.0).abs() < 1e-12);
        let p9 = ChannelParams {
            antenna_gain_db: 9.0,
            ..p.clone()
        };
        let g9 = large_scale_gain(1000.0, &p9, 0.0).unwrap();
        assert!((g9 / 10f64.powf((9.0 - 128.1) / 10.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn short_links_clamped_and_bad_distance_rejected() {
        let p = no_shadow();
        assert_eq!(p.path_loss_db(1.0).unwrap(), p.path_loss_db(MIN_LINK_DISTANCE_M).unwrap());
        assert!(large_scale_gain(0.0, &p, 0.0).is_err());
        assert!(large_scale_gain(-5.0, &p, 0.0).is_err());
    }

    #[test]
    fn zero_error_makes_estimate_exact() {
        let t = generate_topology(2, 2, 2, 500.0, 7).unwrap();
        let p = ChannelParams {
            csi_error_variance: 0.0,
            ..ChannelParams::default()
        };
        let s = sample_channels(&t, &p, 11).unwrap();
        for k in 0..2 {
            assert_eq!(s.h_true[k], s.h_est[k]);
        }
    }

    #[test]
    fn decomposition_identity_is_exact() {
        let t = generate_topology(5, 3, 2, 800.0, 1).unwrap();
        let s = sample_channels(&t, &ChannelParams::default(), 2).unwrap();
        for k in 0..3 {
            assert_eq!(&s.h_true[k] - &s.h_est[k], s.error[k]);
            assert!(linalg::hermitian_defect(&s.error_cov[k]) <= 1e-10);
        }
        s.validate().unwrap();
    }

    #[test]
    fn channels_are_deterministic() {
        let t = generate_topology(5, 3, 2, 800.0, 1).unwrap();
        let a = sample_channels(&t, &ChannelParams::default(), 5).unwrap();
        let b = sample_channels(&t, &ChannelParams::default(), 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = generate_topology(2, 2, 2, 800.0, 3).unwrap();
        let s = sample_channels(&t, &ChannelParams::default(), 4).unwrap();
        let mut buf = Vec::new();
        write_channels_csv(&s, &mut buf).unwrap();
        let back = read_channels_csv(buf.as_slice(), Path::new("mem.csv")).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn malformed_csv_reports_line() {
        let text = "user,quantity,row,col,re,im\n0,h_est,0,0,1.0,0.0\n0,bogus,0,0,1,0\n";
        let err = read_channels_csv(text.as_bytes(), Path::new("x.csv")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }
}
