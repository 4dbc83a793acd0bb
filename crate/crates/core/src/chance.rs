//! Harvested-energy model and its probabilistic guarantee.
//!
//! Under imperfect CSI the energy harvested by a user is a random quadratic
//! form of the channel error. The requirement `Pr{E_k ≥ E_min} ≥ 1 − θ` is
//! replaced by a deterministic convex surrogate built from a Bernstein-type
//! tail bound for Gaussian quadratic forms: writing the error as
//! `e = ε^{1/2} c` with `c ~ CN(0, I)`,
//!
//! ```text
//! E_k/(τη) − σ² = ĥ^H S ĥ + c^H D c + 2 Re{c^H d},   S = Σ_j V_j
//! D = ε^{1/2} S ε^{1/2},   d = ε^{1/2} S ĥ,
//! ξ = E_min/(τη) − σ² − ĥ^H S ĥ
//! ```
//!
//! and the chance constraint holds whenever
//! `Tr(D) − √(2δ)·√(‖D‖_F² + 2‖d‖²) − δ·s⁻ ≥ ξ` with `δ = −ln θ` and
//! `s⁻ = max(λ_max(−D), 0)`. A Monte-Carlo oracle measures the actual outage.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};

/// Per-user energy-harvesting requirement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EhRequirement {
    /// Minimum harvested energy per slot, joules.
    pub e_min: f64,
    /// RF-to-DC conversion efficiency.
    pub eta: f64,
    /// Maximum tolerable outage probability.
    pub theta: f64,
    /// `−ln θ`.
    pub delta: f64,
}

impl EhRequirement {
    pub fn new(e_min: f64, eta: f64, theta: f64) -> Result<Self> {
        if !(e_min >= 0.0 && e_min.is_finite()) {
            return Err(Error::invalid(format!("e_min must be >= 0, got {e_min}")));
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::invalid(format!("eta must lie in (0, 1], got {eta}")));
        }
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::invalid(format!("theta must lie in (0, 1], got {theta}")));
        }
        Ok(EhRequirement {
            e_min,
            eta,
            theta,
            delta: -theta.ln(),
        })
    }
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("time-switching ratio must lie in (0, 1), got {tau}")))
    }
}

/// `τη(Σ_j h^H V_j h + σ²)`.
pub fn harvested_energy(h: &CVec, v_energy: &[CMat], tau: f64, eta: f64, noise_power: f64) -> Result<f64> {
    check_tau(tau)?;
    let received: f64 = v_energy.iter().map(|v| linalg::quad_form(v, h)).sum();
    Ok(tau * eta * (received + noise_power))
}

/// `D`, `d`, `ξ` and `s⁻` of one user's Bernstein surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinTerms {
    pub d_mat: CMat,
    pub d_vec: CVec,
    pub xi: f64,
    pub s_minus: f64,
}

impl BernsteinTerms {
    /// `√(‖D‖_F² + 2‖d‖²)`.
    pub fn deviation(&self) -> f64 {
        (linalg::frob_sq(&self.d_mat) + 2.0 * linalg::norm_sq(&self.d_vec)).sqrt()
    }
}

/// `max(λ_max(−D), 0)`.
pub fn s_minus(d: &CMat) -> f64 {
    (-linalg::min_eigenvalue(d)).max(0.0)
}

pub fn build_bernstein_terms(
    v_energy: &[CMat],
    h_est: &CVec,
    error_cov: &CMat,
    req: &EhRequirement,
    tau: f64,
    noise_power: f64,
) -> Result<BernsteinTerms> {
    check_tau(tau)?;
    let n = h_est.len();
    let sum = linalg::sum_mats(v_energy, n);
    let root = linalg::psd_sqrt(error_cov)?;
    let d_mat = linalg::hermitian_part(&(&root * &sum * &root));
    let d_vec = &root * (&sum * h_est);
    let xi = req.e_min / (tau * req.eta) - noise_power - linalg::quad_form(&sum, h_est);
    let s_minus = s_minus(&d_mat);
    Ok(BernsteinTerms {
        d_mat,
        d_vec,
        xi,
        s_minus,
    })
}

/// `Tr(D) − √(2δ)·√(‖D‖_F² + 2‖d‖²) − δ·s⁻`; the surrogate holds iff this is `≥ ξ`.
pub fn bernstein_threshold(terms: &BernsteinTerms, delta: f64) -> f64 {
    linalg::trace_re(&terms.d_mat) - (2.0 * delta).sqrt() * terms.deviation() - delta * terms.s_minus
}

/// Epigraph form of the surrogate with auxiliary scalars `x` and `m`:
///
/// ```text
/// Tr(D) − √(2δ)x − δm ≥ ξ
/// x ≥ √(‖D‖_F² + 2‖d‖²)
/// mI + D ⪰ 0,  m ≥ 0
/// ```
#[derive(Debug, Clone)]
pub struct BernsteinTriple {
    pub trace_d: f64,
    pub deviation: f64,
    pub d_mat: CMat,
    pub xi: f64,
    pub delta: f64,
}

pub fn three_inequality_form(terms: &BernsteinTerms, delta: f64) -> BernsteinTriple {
    BernsteinTriple {
        trace_d: linalg::trace_re(&terms.d_mat),
        deviation: terms.deviation(),
        d_mat: terms.d_mat.clone(),
        xi: terms.xi,
        delta,
    }
}

impl BernsteinTriple {
    /// The tightest feasible epigraph point: `x = √(‖D‖²+2‖d‖²)`, `m = s⁻`.
    pub fn witness(&self) -> (f64, f64) {
        (self.deviation, s_minus(&self.d_mat))
    }

    pub fn linear_slack(&self, x: f64, m: f64) -> f64 {
        self.trace_d - (2.0 * self.delta).sqrt() * x - self.delta * m - self.xi
    }

    pub fn soc_slack(&self, x: f64) -> f64 {
        x - self.deviation
    }

    /// Smallest eigenvalue of `mI + D`.
    pub fn lmi_slack(&self, m: f64) -> f64 {
        m + linalg::min_eigenvalue(&self.d_mat)
    }

    pub fn is_feasible(&self, x: f64, m: f64, tol: f64) -> bool {
        self.linear_slack(x, m) >= -tol
            && self.soc_slack(x) >= -tol
            && self.lmi_slack(m) >= -tol
            && m >= -tol
    }
}

/// How an energy requirement is turned into a deterministic constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnergyConstraint {
    /// Bernstein surrogate of the chance constraint at the user's θ.
    Chance,
    /// Energy guaranteed for every error with `‖ε^{-1/2} e‖ ≤ radius`, using the
    /// bound `(ĥ+e)^H S (ĥ+e) ≥ ĥ^H S ĥ − 2·radius·‖ε^{1/2} S ĥ‖`.
    WorstCase { radius: f64 },
    /// Estimate treated as the true channel; the error is ignored.
    Nominal,
}

impl EnergyConstraint {
    /// Received power `G` the model certifies for the aggregate energy
    /// covariance `s`; the requirement holds iff `τ·η·G ≥ E_min`.
    pub fn guaranteed_power(
        &self,
        s: &CMat,
        h_est: &CVec,
        error_cov: &CMat,
        req: &EhRequirement,
        noise_power: f64,
    ) -> Result<f64> {
        let nominal = linalg::quad_form(s, h_est) + noise_power;
        match *self {
            EnergyConstraint::Nominal => Ok(nominal),
            EnergyConstraint::WorstCase { radius } => {
                let root = linalg::psd_sqrt(error_cov)?;
                let d = &root * (s * h_est);
                Ok(nominal - 2.0 * radius * linalg::norm_sq(&d).sqrt())
            }
            EnergyConstraint::Chance => {
                // ξ-free part of the threshold: threshold − ξ = G − E_min/(τη)
                let root = linalg::psd_sqrt(error_cov)?;
                let d_mat = linalg::hermitian_part(&(&root * s * &root));
                let terms = BernsteinTerms {
                    s_minus: s_minus(&d_mat),
                    d_vec: &root * (s * h_est),
                    d_mat,
                    xi: 0.0,
                };
                Ok(nominal + bernstein_threshold(&terms, req.delta))
            }
        }
    }

    /// Whether the design should account for the CSI error in the rate model.
    pub fn robust_rate(&self) -> bool {
        !matches!(self, EnergyConstraint::Nominal)
    }

    pub fn label(&self) -> &'static str {
        match self {
            EnergyConstraint::Chance => "chance",
            EnergyConstraint::WorstCase { .. } => "deterministic",
            EnergyConstraint::Nominal => "nominal",
        }
    }
}

/// Number of error draws handled by one seeded chunk of the outage oracle.
pub const OUTAGE_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub outages: u64,
    pub n_samples: u64,
}

impl OutageEstimate {
    pub fn probability(&self) -> f64 {
        self.outages as f64 / self.n_samples as f64
    }
}

/// `θ + 3·√(θ(1−θ)/n)`: the largest empirical outage consistent with a true
/// outage of at most `θ` at three binomial standard deviations.
pub fn outage_acceptance_bound(theta: f64, n_samples: u64) -> f64 {
    theta + outage_half_width(theta, n_samples)
}

pub fn outage_half_width(theta: f64, n_samples: u64) -> f64 {
    3.0 * (theta * (1.0 - theta) / n_samples as f64).sqrt()
}

/// Fraction of error draws `e ~ CN(0, ε)` whose harvested energy at `ĥ + e`
/// falls below `E_min`.
///
/// Draws are split into chunks of [`OUTAGE_CHUNK`]; chunk `i` uses seed
/// `derive_seed(seed, i)`, and counts are summed in chunk order, so the result
/// does not depend on the thread count.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_outage(
    v_energy: &[CMat],
    h_est: &CVec,
    error_cov: &CMat,
    req: &EhRequirement,
    tau: f64,
    noise_power: f64,
    n_samples: u64,
    seed: u64,
) -> Result<OutageEstimate> {
    check_tau(tau)?;
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be at least 1"));
    }
    let n = h_est.len();
    let s = linalg::sum_mats(v_energy, n);
    let root = linalg::psd_sqrt(error_cov)?;
    let scale = tau * req.eta;
    let chunks = n_samples.div_ceil(OUTAGE_CHUNK as u64);
    let outages: u64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(linalg::derive_seed(seed, chunk));
            let start = chunk * OUTAGE_CHUNK as u64;
            let count = (n_samples - start).min(OUTAGE_CHUNK as u64);
            let mut local = 0u64;
            for _ in 0..count {
                let c = linalg::sample_cn(&mut rng, n);
                let h = h_est + &root * c;
                let energy = scale * (linalg::quad_form(&s, &h) + noise_power);
                if energy < req.e_min {
                    local += 1;
                }
            }
            local
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(OutageEstimate { outages, n_samples })
}

/// One row of an outage report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageRow {
    pub user: usize,
    pub theta: f64,
    pub empirical_outage: f64,
    pub n_samples: u64,
    /// Three binomial standard deviations at `θ`.
    pub ci_half_width: f64,
}

impl OutageRow {
    pub fn new(user: usize, theta: f64, est: &OutageEstimate) -> Self {
        OutageRow {
            user,
            theta,
            empirical_outage: est.probability(),
            n_samples: est.n_samples,
            ci_half_width: outage_half_width(theta, est.n_samples),
        }
    }

    pub fn passes(&self) -> bool {
        self.empirical_outage <= self.theta + self.ci_half_width
    }
}

pub const OUTAGE_CSV_HEADER: [&str; 5] = ["user", "theta", "empirical_outage", "n_samples", "ci_half_width"];

pub fn write_outage_csv<W: Write>(rows: &[OutageRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Output(format!("csv write: {e}"));
    w.write_record(OUTAGE_CSV_HEADER).map_err(err)?;
    for r in rows {
        w.write_record([
            r.user.to_string(),
            r.theta.to_string(),
            r.empirical_outage.to_string(),
            r.n_samples.to_string(),
            r.ci_half_width.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Output(format!("csv flush: {e}")))?;
    Ok(())
}
