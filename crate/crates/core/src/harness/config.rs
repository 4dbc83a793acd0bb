use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ao::{AoConfig, Problem1Mode};
use crate::chance::{EhRequirement, EnergyConstraint};
use crate::channel::{self, ChannelParams, ChannelState, NetworkTopology};
use crate::conic::SolverSettings;
use crate::error::{Error, Result};
use crate::instance::{Instance, PowerBudget};
use crate::linalg;

/// Energy-constraint model of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Bernstein surrogate of the outage constraint.
    Chance,
    /// Worst case over an error ball (the baseline).
    Deterministic,
    /// Estimate taken as the true channel.
    Nominal,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Chance => "chance",
            Variant::Deterministic => "deterministic",
            Variant::Nominal => "nominal",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chance" => Ok(Variant::Chance),
            "deterministic" => Ok(Variant::Deterministic),
            "nominal" => Ok(Variant::Nominal),
            other => Err(Error::Config(format!(
                "unknown variant `{other}` (expected chance, deterministic or nominal)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Theta,
    PBs,
    EMin,
    NumUsers,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::Theta => "theta",
            SweepAxis::PBs => "p_bs",
            SweepAxis::EMin => "e_min",
            SweepAxis::NumUsers => "num_users",
        }
    }
}

/// Seeds of one channel drop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropSeeds {
    pub drop: usize,
    pub topology: u64,
    pub channels: u64,
    pub monte_carlo: u64,
}

impl DropSeeds {
    pub fn new(seed: u64, drop: usize) -> Self {
        let base = 3 * drop as u64;
        DropSeeds {
            drop,
            topology: linalg::derive_seed(seed, base),
            channels: linalg::derive_seed(seed, base + 1),
            monte_carlo: linalg::derive_seed(seed, base + 2),
        }
    }
}

/// One experiment, read from a flat TOML file. Missing keys take their
/// defaults, unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Drop used by single runs.
    pub drop: usize,

    pub num_bs: usize,
    pub num_users: usize,
    pub antennas_per_bs: usize,
    pub area_side: f64,

    pub pathloss_intercept_db: f64,
    pub pathloss_slope: f64,
    pub antenna_gain_db: f64,
    pub shadowing_std_db: f64,
    pub noise_power: f64,
    pub csi_error_variance: f64,
    pub normalization_db: f64,

    pub e_min: f64,
    pub eta: f64,
    pub theta: f64,

    pub p_bs: f64,
    pub p_peak: f64,

    pub variant: Variant,
    /// Whitened error radius of the deterministic baseline; `√N` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_case_radius: Option<f64>,
    /// Sweeps also run the deterministic baseline on every drop.
    pub baseline: bool,

    pub sweep_axis: SweepAxis,
    pub sweep_values: Vec<f64>,
    pub n_drops: usize,
    pub n_mc: u64,

    pub r_max: usize,
    pub tau_init: f64,
    pub inner_tol: f64,
    pub outer_tol: f64,
    pub inner_max: usize,
    pub tau_margin: f64,
    pub rank_one_tol: f64,
    pub mode: Problem1Mode,
    pub solver_tol: f64,
    pub solver_max_iter: u32,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ch = ChannelParams::default();
        let ao = AoConfig::default();
        ExperimentConfig {
            seed: 1,
            output_dir: PathBuf::from("out"),
            drop: 0,
            num_bs: 5,
            num_users: 3,
            antennas_per_bs: 2,
            area_side: 800.0,
            pathloss_intercept_db: ch.pathloss_intercept_db,
            pathloss_slope: ch.pathloss_slope,
            antenna_gain_db: ch.antenna_gain_db,
            shadowing_std_db: ch.shadowing_std_db,
            noise_power: ch.noise_power,
            csi_error_variance: ch.csi_error_variance,
            normalization_db: ch.normalization_db,
            e_min: 0.1,
            eta: 0.75,
            theta: 0.2,
            p_bs: 5.0,
            p_peak: 5.0,
            variant: Variant::Chance,
            worst_case_radius: None,
            baseline: true,
            sweep_axis: SweepAxis::PBs,
            sweep_values: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            n_drops: 20,
            n_mc: 10_000,
            r_max: ao.r_max,
            tau_init: ao.tau_init,
            inner_tol: ao.inner_tol,
            outer_tol: ao.outer_tol,
            inner_max: ao.inner_max,
            tau_margin: ao.tau_margin,
            rank_one_tol: ao.rank_one_tol,
            mode: ao.mode,
            solver_tol: ao.solver.tol,
            solver_max_iter: ao.solver.max_iter,
        }
    }
}

/// Commented configuration with every key at its default value.
pub const CONFIG_TEMPLATE: &str = r#"# swipt experiment configuration. Every key is optional; omitted keys take
# the values shown here. Unknown keys are rejected.

seed = 1
# Directory receiving run and sweep outputs; it must already exist.
output_dir = "out"
# Drop index used by `swipt run` (a sweep uses drops 0..n_drops).
drop = 0

# Network
num_bs = 5
num_users = 3
antennas_per_bs = 2
# Side of the square deployment area, meters.
area_side = 800.0

# Channel: path loss = intercept + slope * log10(d / 1 km), dB
pathloss_intercept_db = 128.1
pathloss_slope = 37.6
antenna_gain_db = 9.0
shadowing_std_db = 6.0
# Receiver noise power, watts.
noise_power = 0.01
# CSI error covariance is csi_error_variance * I.
csi_error_variance = 0.01
# Offset added to every large-scale gain, dB.
normalization_db = 80.0

# Energy harvesting: minimum energy, conversion efficiency, outage probability
e_min = 0.1
eta = 0.75
theta = 0.2

# Per-BS average and peak power, watts (p_peak >= p_bs).
p_bs = 5.0
p_peak = 5.0

# Energy-constraint model: "chance", "deterministic" or "nominal".
variant = "chance"
# Whitened error radius of the deterministic model; defaults to sqrt(N).
# worst_case_radius = 3.1622776601683795
# Sweeps also run the deterministic baseline on every drop.
baseline = true

# Sweep axis: "theta", "p_bs", "e_min" or "num_users"; values sorted ascending.
sweep_axis = "p_bs"
sweep_values = [1.0, 2.0, 3.0, 4.0, 5.0]
n_drops = 20
# Monte-Carlo samples for rate and outage evaluation.
n_mc = 10000

# Alternating optimization
r_max = 20
tau_init = 0.5
inner_tol = 1e-5
outer_tol = 1e-4
inner_max = 50
tau_margin = 1e-4
rank_one_tol = 1e-3
# "staged" (information program plus an energy stage) or "joint".
mode = "staged"
solver_tol = 1e-8
solver_max_iter = 200
"#;

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.num_bs == 0 || self.num_users == 0 || self.antennas_per_bs == 0 {
            return bad("num_bs, num_users and antennas_per_bs must be at least 1".into());
        }
        if !(self.area_side > 0.0 && self.area_side.is_finite()) {
            return bad(format!("area_side must be positive, got {}", self.area_side));
        }
        self.channel_params().validate()?;
        EhRequirement::new(self.e_min, self.eta, self.theta)?;
        self.power().validate()?;
        if self.p_peak < self.p_bs {
            return bad(format!("p_peak ({}) must be at least p_bs ({})", self.p_peak, self.p_bs));
        }
        if let Some(r) = self.worst_case_radius {
            if !(r >= 0.0 && r.is_finite()) {
                return bad(format!("worst_case_radius must be >= 0, got {r}"));
            }
        }
        if self.n_drops == 0 {
            return bad("n_drops must be at least 1".into());
        }
        if self.n_mc == 0 {
            return bad("n_mc must be at least 1".into());
        }
        if self.sweep_values.is_empty() {
            return bad("sweep_values must not be empty".into());
        }
        if self.sweep_values.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("sweep_values must be strictly increasing".into());
        }
        for &v in &self.sweep_values {
            self.at(self.sweep_axis, v)?;
        }
        self.ao_config().validate()
    }

    /// Copy with the sweep axis set to `value`.
    pub fn at(&self, axis: SweepAxis, value: f64) -> Result<Self> {
        let mut c = self.clone();
        match axis {
            SweepAxis::Theta => c.theta = value,
            SweepAxis::PBs => c.p_bs = value,
            SweepAxis::EMin => c.e_min = value,
            SweepAxis::NumUsers => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::Config(format!("num_users sweep value {value} is not a positive integer")));
                }
                c.num_users = value as usize;
            }
        }
        EhRequirement::new(c.e_min, c.eta, c.theta)?;
        c.power().validate()?;
        if c.p_peak < c.p_bs {
            return Err(Error::Config(format!("p_peak ({}) must be at least p_bs ({})", c.p_peak, c.p_bs)));
        }
        Ok(c)
    }

    pub fn channel_params(&self) -> ChannelParams {
        ChannelParams {
            pathloss_intercept_db: self.pathloss_intercept_db,
            pathloss_slope: self.pathloss_slope,
            antenna_gain_db: self.antenna_gain_db,
            shadowing_std_db: self.shadowing_std_db,
            noise_power: self.noise_power,
            csi_error_variance: self.csi_error_variance,
            normalization_db: self.normalization_db,
        }
    }

    pub fn power(&self) -> PowerBudget {
        PowerBudget {
            p_bs: self.p_bs,
            p_peak: self.p_peak,
        }
    }

    pub fn ao_config(&self) -> AoConfig {
        AoConfig {
            r_max: self.r_max,
            tau_init: self.tau_init,
            inner_tol: self.inner_tol,
            outer_tol: self.outer_tol,
            inner_max: self.inner_max,
            tau_margin: self.tau_margin,
            rank_one_tol: self.rank_one_tol,
            mode: self.mode,
            solver: SolverSettings {
                tol: self.solver_tol,
                max_iter: self.solver_max_iter,
            },
        }
    }

    pub fn total_antennas(&self) -> usize {
        self.num_bs * self.antennas_per_bs
    }

    pub fn energy_constraint(&self, variant: Variant) -> EnergyConstraint {
        match variant {
            Variant::Chance => EnergyConstraint::Chance,
            Variant::Deterministic => EnergyConstraint::WorstCase {
                radius: self
                    .worst_case_radius
                    .unwrap_or_else(|| (self.total_antennas() as f64).sqrt()),
            },
            Variant::Nominal => EnergyConstraint::Nominal,
        }
    }

    pub fn requirements(&self) -> Result<Vec<EhRequirement>> {
        Ok(vec![EhRequirement::new(self.e_min, self.eta, self.theta)?; self.num_users])
    }

    pub fn topology(&self, seeds: &DropSeeds) -> Result<NetworkTopology> {
        channel::generate_topology(
            self.num_bs,
            self.num_users,
            self.antennas_per_bs,
            self.area_side,
            seeds.topology,
        )
    }

    pub fn channels(&self, seeds: &DropSeeds) -> Result<ChannelState> {
        channel::sample_channels(&self.topology(seeds)?, &self.channel_params(), seeds.channels)
    }

    /// Problem instance of one drop.
    pub fn instance(&self, seeds: &DropSeeds, variant: Variant) -> Result<Instance> {
        self.instance_with(self.channels(seeds)?, variant)
    }

    pub fn instance_with(&self, channels: ChannelState, variant: Variant) -> Result<Instance> {
        Instance::new(
            channels,
            Instance::uniform_blocks(self.num_bs, self.antennas_per_bs),
            self.requirements()?,
            self.energy_constraint(variant),
            self.power(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_parses_to_defaults() {
        assert_eq!(ExperimentConfig::from_toml_str(CONFIG_TEMPLATE).unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn empty_file_is_default() {
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let c = ExperimentConfig {
            worst_case_radius: Some(2.5),
            sweep_axis: SweepAxis::NumUsers,
            sweep_values: vec![2.0, 3.0],
            ..ExperimentConfig::default()
        };
        let text = c.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(ExperimentConfig::from_toml_str("sed = 3"), Err(Error::Config(_))));
        assert!(ExperimentConfig::from_toml_str("p_peak = 4.0").is_err());
        assert!(ExperimentConfig::from_toml_str("sweep_values = [2.0, 1.0]").is_err());
        assert!(ExperimentConfig::from_toml_str("sweep_values = []").is_err());
        assert!(ExperimentConfig::from_toml_str("sweep_axis = \"num_users\"\nsweep_values = [1.5]").is_err());
        assert!(ExperimentConfig::from_toml_str("n_mc = 0").is_err());
        assert!(ExperimentConfig::from_toml_str("theta = 0.0").is_err());
    }

    #[test]
    fn drop_seeds_are_distinct() {
        let a = DropSeeds::new(1, 0);
        let b = DropSeeds::new(1, 1);
        let all = [a.topology, a.channels, a.monte_carlo, b.topology, b.channels, b.monte_carlo];
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                assert_ne!(all[i], all[j]);
            }
        }
        assert_eq!(a, DropSeeds::new(1, 0));
    }

    #[test]
    fn default_radius_is_root_n() {
        let c = ExperimentConfig::default();
        assert_eq!(
            c.energy_constraint(Variant::Deterministic),
            EnergyConstraint::WorstCase { radius: 10f64.sqrt() }
        );
    }
}
