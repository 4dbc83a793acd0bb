use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Variant;
use super::run::{RunManifest, BEAMFORMERS_FILE, CHANNELS_FILE, MANIFEST_FILE};
use super::solution::load_beamformers_csv;
use crate::chance::{monte_carlo_outage, OutageRow};
use crate::channel::load_channels_csv;
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub variant: Variant,
    pub rows: Vec<OutageRow>,
}

impl ValidationReport {
    /// Every user's empirical outage is within `θ + 3σ`.
    pub fn passed(&self) -> bool {
        self.rows.iter().all(OutageRow::passes)
    }
}

/// Re-estimates the energy outage of a solution written by a single run in
/// `dir`, drawing `n_mc` fresh errors per user from `seed`.
pub fn validate_outage(dir: &Path, n_mc: u64, seed: u64) -> Result<ValidationReport> {
    if n_mc == 0 {
        return Err(Error::invalid("n_mc must be at least 1"));
    }
    let manifest = RunManifest::load(&dir.join(MANIFEST_FILE))?;
    let channels = load_channels_csv(&dir.join(CHANNELS_FILE))?;
    let bf = load_beamformers_csv(&dir.join(BEAMFORMERS_FILE))?;
    let cfg = &manifest.config;
    let reqs = cfg.requirements()?;
    if reqs.len() != channels.num_users() || bf.num_users() != channels.num_users() {
        return Err(Error::invalid(format!(
            "{}: configuration has {} users, channels {}, beamformers {}",
            dir.display(),
            reqs.len(),
            channels.num_users(),
            bf.num_users()
        )));
    }
    if bf.num_antennas() != channels.num_antennas() {
        return Err(Error::invalid(format!(
            "{}: beamformers have {} antennas, channels {}",
            dir.display(),
            bf.num_antennas(),
            channels.num_antennas()
        )));
    }
    let rows = (0..channels.num_users())
        .map(|k| {
            let est = monte_carlo_outage(
                &bf.v_energy,
                &channels.h_est[k],
                &channels.error_cov[k],
                &reqs[k],
                bf.tau,
                channels.noise_power[k],
                n_mc,
                linalg::derive_seed(seed, k as u64),
            )?;
            Ok(OutageRow::new(k, reqs[k].theta, &est))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ValidationReport {
        variant: cfg.variant,
        rows,
    })
}
