//! Rate model and the weighted-MMSE machinery under imperfect CSI.
//!
//! Users have a single antenna, so receivers `w_k`, MSEs `M̄_k` and weights
//! `ρ_k` are scalars and every `log det` collapses to a plain logarithm.
//! Rates are in nats.
//!
//! Averaging the MSE over the CSI error adds
//! `Φ_k = E|e_k^H v_j|² summed over j = Σ_j v_j^H ε_k v_j`
//! to the receiver's effective noise; for `ε_k = ε·I` this is `ε·‖v^I‖_F²`.

use crate::error::{Error, Result};
use crate::linalg::{self, C64, CMat, CVec};

/// Information beamformers, energy covariances and the TS ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub v_info: Vec<CVec>,
    pub v_energy: Vec<CMat>,
    pub tau: f64,
}

impl BeamformerSet {
    pub fn num_users(&self) -> usize {
        self.v_info.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.v_info.first().map_or(0, |v| v.len())
    }

    pub fn energy_sum(&self) -> CMat {
        linalg::sum_mats(&self.v_energy, self.num_antennas())
    }

    /// `Σ_k ‖A_l v_k‖²` for the antenna block of one BS.
    pub fn info_power(&self, block: std::ops::Range<usize>) -> f64 {
        self.v_info
            .iter()
            .map(|v| block.clone().map(|i| v[i].norm_sqr()).sum::<f64>())
            .sum()
    }

    /// `Σ_k Tr(A_l V_k A_l^H)` for the antenna block of one BS.
    pub fn energy_power(&self, block: std::ops::Range<usize>) -> f64 {
        self.v_energy
            .iter()
            .map(|m| block.clone().map(|i| m[(i, i)].re).sum::<f64>())
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_antennas();
        if self.v_energy.len() != self.v_info.len() {
            return Err(Error::invalid("info and energy beamformer counts differ"));
        }
        if self.v_info.iter().any(|v| v.len() != n) {
            return Err(Error::invalid("information beamformers differ in length"));
        }
        for (k, m) in self.v_energy.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::invalid(format!("energy covariance {k} is not {n}x{n}")));
            }
            if !linalg::is_psd(m, 1e-8) {
                return Err(Error::NotPsd(format!("energy covariance {k}")));
            }
        }
        crate::chance::check_tau(self.tau)
    }
}

/// Receivers, averaged MSEs, weights and error terms of one BCD pass.
#[derive(Debug, Clone, PartialEq)]
pub struct WmmseState {
    pub receivers: Vec<C64>,
    pub mse: Vec<f64>,
    pub weights: Vec<f64>,
    pub phi: Vec<f64>,
}

/// `|h^H v_k|² / (Σ_{j≠k} |h^H v_j|² + σ²)`.
pub fn sinr(h: &CVec, v_info: &[CVec], k: usize, noise_power: f64) -> f64 {
    let gains: Vec<f64> = v_info.iter().map(|v| linalg::inner(h, v).norm_sqr()).collect();
    let interference: f64 = gains.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, g)| g).sum();
    gains[k] / (interference + noise_power)
}

/// `(1 − τ)·ln(1 + sinr)`.
pub fn rate(sinr: f64, tau: f64) -> Result<f64> {
    if !(sinr >= 0.0) {
        return Err(Error::invalid(format!("SINR must be non-negative, got {sinr}")));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid(format!("tau must lie in [0, 1], got {tau}")));
    }
    Ok((1.0 - tau) * sinr.ln_1p())
}

/// `Σ_j v_j^H ε v_j`, the expected error-induced power at the receiver.
pub fn phi(v_info: &[CVec], error_cov: &CMat) -> f64 {
    v_info.iter().map(|v| linalg::quad_form(error_cov, v)).sum::<f64>().max(0.0)
}

/// `Σ_j |ĥ^H v_j|² + σ² + Φ`.
fn received_power(h_est: &CVec, v_info: &[CVec], phi_k: f64, noise_power: f64) -> f64 {
    v_info.iter().map(|v| linalg::inner(h_est, v).norm_sqr()).sum::<f64>() + noise_power + phi_k
}

/// `w_k = ĥ_k^H v_k / (Σ_j |ĥ_k^H v_j|² + σ² + Φ_k)`.
pub fn mmse_receiver(h_est: &CVec, v_info: &[CVec], phi_k: f64, noise_power: f64, k: usize) -> C64 {
    linalg::inner(h_est, &v_info[k]) / received_power(h_est, v_info, phi_k, noise_power)
}

/// `1 + |w|²(Σ_j |ĥ^H v_j|² + σ² + Φ) − 2 Re{w* ĥ^H v_k}`.
pub fn avg_mse(w: C64, h_est: &CVec, v_info: &[CVec], phi_k: f64, noise_power: f64, k: usize) -> f64 {
    let signal = linalg::inner(h_est, &v_info[k]);
    1.0 + w.norm_sqr() * received_power(h_est, v_info, phi_k, noise_power) - 2.0 * (w.conj() * signal).re
}

/// MSE for one channel realization `h` (no averaging).
pub fn instantaneous_mse(w: C64, h: &CVec, v_info: &[CVec], noise_power: f64, k: usize) -> f64 {
    avg_mse(w, h, v_info, 0.0, noise_power, k)
}

/// `ρ = 1 / M̄`.
pub fn weight(mse: f64) -> Result<f64> {
    if mse > 0.0 {
        Ok(1.0 / mse)
    } else {
        Err(Error::invalid(format!("MSE must be positive, got {mse}")))
    }
}

/// SINR with the error term folded into the noise:
/// `|ĥ^H v_k|² / (Σ_{j≠k}|ĥ^H v_j|² + σ² + Φ)`.
pub fn robust_sinr(h_est: &CVec, v_info: &[CVec], phi_k: f64, noise_power: f64, k: usize) -> f64 {
    sinr(h_est, v_info, k, noise_power + phi_k)
}

/// Steps 1–3 of a BCD pass: MMSE receivers, their MSEs and weights.
/// With `robust = false` the error terms are taken as zero.
pub fn update_state(
    h_est: &[CVec],
    error_cov: &[CMat],
    noise_power: &[f64],
    v_info: &[CVec],
    robust: bool,
) -> Result<WmmseState> {
    let k_users = h_est.len();
    let mut state = WmmseState {
        receivers: Vec::with_capacity(k_users),
        mse: Vec::with_capacity(k_users),
        weights: Vec::with_capacity(k_users),
        phi: Vec::with_capacity(k_users),
    };
    for k in 0..k_users {
        let phi_k = if robust { phi(v_info, &error_cov[k]) } else { 0.0 };
        let w = mmse_receiver(&h_est[k], v_info, phi_k, noise_power[k], k);
        // M̄ at the MMSE receiver; the closed form is immune to cancellation
        let m = 1.0 - linalg::inner(&h_est[k], &v_info[k]).norm_sqr()
            / received_power(&h_est[k], v_info, phi_k, noise_power[k]);
        state.receivers.push(w);
        state.mse.push(m);
        state.weights.push(weight(m)?);
        state.phi.push(phi_k);
    }
    Ok(state)
}

/// `Σ_k (ρ_k M̄_k(w_k, v) − ln ρ_k)`: the BCD objective for fixed receivers
/// and weights.
pub fn bcd_objective(
    h_est: &[CVec],
    error_cov: &[CMat],
    noise_power: &[f64],
    v_info: &[CVec],
    receivers: &[C64],
    weights: &[f64],
    robust: bool,
) -> f64 {
    (0..h_est.len())
        .map(|k| {
            let phi_k = if robust { phi(v_info, &error_cov[k]) } else { 0.0 };
            let m = avg_mse(receivers[k], &h_est[k], v_info, phi_k, noise_power[k], k);
            weights[k] * m - weights[k].ln()
        })
        .sum()
}

/// Sum over users of `ln(1 + robust SINR)` (no `(1−τ)` factor); equals
/// `−Σ ln M̄_k` at the MMSE receivers.
pub fn lower_bound_sum_log(
    h_est: &[CVec],
    error_cov: &[CMat],
    noise_power: &[f64],
    v_info: &[CVec],
    robust: bool,
) -> f64 {
    (0..h_est.len())
        .map(|k| {
            let phi_k = if robust { phi(v_info, &error_cov[k]) } else { 0.0 };
            robust_sinr(&h_est[k], v_info, phi_k, noise_power[k], k).ln_1p()
        })
        .sum()
}

/// Convex quadratic in the information beamformers:
/// `f(v) = Σ_j v_j^H H v_j − 2 Σ_k Re{g_k^H v_k}` with
/// `H = Σ_k ρ_k |w_k|² (ĥ_k ĥ_k^H + ε_k)` and `g_k = ρ_k w_k ĥ_k`.
///
/// `f` differs from the BCD objective only by
/// `Σ_k ρ_k (1 + |w_k|² σ_k²) − ln ρ_k`, see [`SubproblemObjective::dropped_constant`].
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemObjective {
    pub hessian: CMat,
    pub linear: Vec<CVec>,
}

impl SubproblemObjective {
    pub fn evaluate(&self, v_info: &[CVec]) -> f64 {
        let quad: f64 = v_info.iter().map(|v| linalg::quad_form(&self.hessian, v)).sum();
        let lin: f64 = self
            .linear
            .iter()
            .zip(v_info)
            .map(|(g, v)| linalg::inner(g, v).re)
            .sum();
        quad - 2.0 * lin
    }

    pub fn min_hessian_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.hessian)
    }

    pub fn is_convex(&self) -> bool {
        let scale = self.hessian.iter().fold(0.0_f64, |a, z| a.max(z.norm())).max(1e-300);
        self.min_hessian_eigenvalue() >= -1e-12 * scale
    }

    /// Terms of the BCD objective that do not depend on `v`.
    pub fn dropped_constant(weights: &[f64], receivers: &[C64], noise_power: &[f64]) -> f64 {
        weights
            .iter()
            .zip(receivers)
            .zip(noise_power)
            .map(|((rho, w), s2)| rho * (1.0 + w.norm_sqr() * s2) - rho.ln())
            .sum()
    }
}

/// Step 4 objective for fixed weights and receivers. Pass zero covariances
/// for a design that ignores the CSI error.
pub fn subproblem_objective(
    weights: &[f64],
    receivers: &[C64],
    h_est: &[CVec],
    error_cov: &[CMat],
) -> SubproblemObjective {
    let n = h_est.first().map_or(0, |h| h.len());
    let mut hessian = linalg::zeros_mat(n);
    let mut linear = Vec::with_capacity(h_est.len());
    for k in 0..h_est.len() {
        let scale = weights[k] * receivers[k].norm_sqr();
        hessian += (linalg::outer(&h_est[k]) + &error_cov[k]).scale(scale);
        linear.push(&h_est[k] * (receivers[k] * weights[k]));
    }
    SubproblemObjective {
        hessian: linalg::hermitian_part(&hessian),
        linear,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, identity, unit_vec, zeros_mat};

    fn one(x: f64) -> CVec {
        CVec::from_element(1, c64(x, 0.0))
    }

    #[test]
    fn sinr_hand_values() {
        let h = unit_vec(2, 0);
        assert!((sinr(&h, &[unit_vec(2, 0)], 0, 0.01) - 100.0).abs() < 1e-9);
        assert_eq!(sinr(&h, &[CVec::zeros(2)], 0, 0.01), 0.0);
        // interferer orthogonal to the channel changes nothing
        let s = sinr(&h, &[unit_vec(2, 0), unit_vec(2, 1)], 0, 0.01);
        assert!((s - 100.0).abs() < 1e-9);
    }

    #[test]
    fn rate_hand_values() {
        assert_eq!(rate(0.0, 0.3).unwrap(), 0.0);
        assert_eq!(rate(5.0, 1.0).unwrap(), 0.0);
        assert!((rate(1.0, 0.5).unwrap() - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert!(rate(-1.0, 0.5).is_err());
    }

    #[test]
    fn phi_hand_values() {
        assert_eq!(phi(&[unit_vec(2, 0)], &zeros_mat(2)), 0.0);
        assert!((phi(&[unit_vec(2, 0)], &identity(2).scale(0.01)) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn receiver_and_mse_hand_values() {
        let w = mmse_receiver(&one(1.0), &[one(1.0)], 0.0, 1.0, 0);
        assert!((w - c64(0.5, 0.0)).norm() < 1e-15);
        let m = avg_mse(w, &one(1.0), &[one(1.0)], 0.0, 1.0, 0);
        assert!((m - 0.5).abs() < 1e-15);
        assert_eq!(mmse_receiver(&one(1.0), &[one(0.0)], 0.0, 1.0, 0), c64(0.0, 0.0));
        assert!(mmse_receiver(&one(1.0), &[one(1.0)], 1e12, 1.0, 0).norm() < 1e-11);
        // no signal: MSE is 1 + |w|²σ², smallest at w = 0
        let m0 = avg_mse(c64(0.3, 0.0), &one(1.0), &[one(0.0)], 0.0, 2.0, 0);
        assert!((m0 - (1.0 + 0.09 * 2.0)).abs() < 1e-15);
        assert_eq!(avg_mse(c64(0.0, 0.0), &one(1.0), &[one(0.0)], 0.0, 2.0, 0), 1.0);
    }

    #[test]
    fn weights() {
        assert_eq!(weight(0.5).unwrap(), 2.0);
        assert_eq!(weight(1.0).unwrap(), 1.0);
        assert!(weight(0.0).is_err());
        assert!(weight(-0.1).is_err());
    }

    #[test]
    fn zero_receivers_give_zero_objective() {
        let h = vec![unit_vec(2, 0), unit_vec(2, 1)];
        let cov = vec![identity(2).scale(0.01); 2];
        let obj = subproblem_objective(&[1.0, 2.0], &[c64(0.0, 0.0); 2], &h, &cov);
        let v = vec![CVec::from_vec(vec![c64(1.0, 2.0), c64(-1.0, 0.5)]); 2];
        assert_eq!(obj.evaluate(&v), 0.0);
    }
}
