//! Problem data shared by the conic assembly and the AO loop, and the
//! complex-domain constraint check every solution is held to.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::chance::{EhRequirement, EnergyConstraint};
use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    /// Per-BS average power limit, watts.
    pub p_bs: f64,
    /// Per-BS peak power limit for each of the two phases, watts.
    pub p_peak: f64,
}

impl PowerBudget {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p_bs", self.p_bs), ("p_peak", self.p_peak)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub channels: ChannelState,
    /// Antenna rows of each BS; contiguous and covering `0..N`.
    pub bs_blocks: Vec<Range<usize>>,
    pub reqs: Vec<EhRequirement>,
    pub constraint: EnergyConstraint,
    pub power: PowerBudget,
}

impl Instance {
    pub fn new(
        channels: ChannelState,
        bs_blocks: Vec<Range<usize>>,
        reqs: Vec<EhRequirement>,
        constraint: EnergyConstraint,
        power: PowerBudget,
    ) -> Result<Self> {
        channels.validate()?;
        power.validate()?;
        if reqs.len() != channels.num_users() {
            return Err(Error::invalid(format!(
                "{} energy requirements for {} users",
                reqs.len(),
                channels.num_users()
            )));
        }
        let mut next = 0;
        for b in &bs_blocks {
            if b.start != next || b.end <= b.start {
                return Err(Error::invalid("BS antenna blocks must be contiguous and non-empty"));
            }
            next = b.end;
        }
        if next != channels.num_antennas() {
            return Err(Error::invalid(format!(
                "BS blocks cover {next} antennas, channels have {}",
                channels.num_antennas()
            )));
        }
        if let EnergyConstraint::WorstCase { radius } = constraint {
            if !(radius >= 0.0 && radius.is_finite()) {
                return Err(Error::invalid(format!("worst-case radius must be >= 0, got {radius}")));
            }
        }
        Ok(Instance {
            channels,
            bs_blocks,
            reqs,
            constraint,
            power,
        })
    }

    /// Equal blocks of `antennas_per_bs` rows.
    pub fn uniform_blocks(num_bs: usize, antennas_per_bs: usize) -> Vec<Range<usize>> {
        (0..num_bs).map(|l| crate::channel::bs_block(antennas_per_bs, l)).collect()
    }

    pub fn num_users(&self) -> usize {
        self.channels.num_users()
    }

    pub fn num_antennas(&self) -> usize {
        self.channels.num_antennas()
    }

    pub fn num_bs(&self) -> usize {
        self.bs_blocks.len()
    }

    pub fn has_energy_demand(&self) -> bool {
        self.reqs.iter().any(|r| r.e_min > 0.0)
    }

    /// `Σ_k ‖A_l v_k‖²` per BS.
    pub fn info_power(&self, v_info: &[CVec]) -> Vec<f64> {
        self.bs_blocks
            .iter()
            .map(|b| v_info.iter().map(|v| b.clone().map(|i| v[i].norm_sqr()).sum::<f64>()).sum())
            .collect()
    }

    /// `Tr(A_l S A_l^H)` per BS.
    pub fn energy_power(&self, s: &CMat) -> Vec<f64> {
        self.bs_blocks
            .iter()
            .map(|b| b.clone().map(|i| s[(i, i)].re).sum())
            .collect()
    }

    /// Received power each user is certified to harvest from `s`.
    pub fn guaranteed_power(&self, s: &CMat) -> Result<Vec<f64>> {
        (0..self.num_users())
            .map(|k| {
                self.constraint.guaranteed_power(
                    s,
                    &self.channels.h_est[k],
                    &self.channels.error_cov[k],
                    &self.reqs[k],
                    self.channels.noise_power[k],
                )
            })
            .collect()
    }

    /// Slacks of every constraint at `(v_info, s, tau)`; negative entries
    /// are violations.
    pub fn check(&self, v_info: &[CVec], s: &CMat, tau: f64) -> Result<ConstraintReport> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::invalid(format!("tau must lie in (0, 1), got {tau}")));
        }
        let g = self.guaranteed_power(s)?;
        let energy = g
            .iter()
            .zip(&self.reqs)
            .map(|(g, r)| g - r.e_min / (tau * r.eta))
            .collect();
        let info = self.info_power(v_info);
        let en = self.energy_power(s);
        let p = self.power;
        Ok(ConstraintReport {
            energy,
            average_power: info
                .iter()
                .zip(&en)
                .map(|(i, e)| p.p_bs - tau * e - (1.0 - tau) * i)
                .collect(),
            peak_info: info.iter().map(|i| p.p_peak - i).collect(),
            peak_energy: en.iter().map(|e| p.p_peak - e).collect(),
            psd: linalg::min_eigenvalue(s),
        })
    }
}

/// Constraint slacks in watts (energy rows are `G_k − E_k/(τη_k)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub energy: Vec<f64>,
    pub average_power: Vec<f64>,
    pub peak_info: Vec<f64>,
    pub peak_energy: Vec<f64>,
    /// Smallest eigenvalue of the aggregate energy covariance.
    pub psd: f64,
}

impl ConstraintReport {
    pub fn max_violation(&self) -> f64 {
        self.energy
            .iter()
            .chain(&self.average_power)
            .chain(&self.peak_info)
            .chain(&self.peak_energy)
            .chain(std::iter::once(&self.psd))
            .fold(0.0_f64, |a, &s| a.max(-s))
    }
}
