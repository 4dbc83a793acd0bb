//! Alternating optimization of beamformers and the time-switching ratio.
//!
//! One outer iteration:
//!
//! 1. BCD on the information beamformers at fixed `τ`: MMSE receivers, MSE
//!    weights, then a conic solve of the weighted-MSE quadratic.
//! 2. Energy stage: for the information beamformers just found, the energy
//!    covariance that maximizes `1/τ`. The energy covariance does not enter
//!    the rate, so this is the tie-break that lets `τ` shrink.
//! 3. Closed-form `τ` update: the smallest feasible ratio plus a margin,
//!    never above the incumbent.
//!
//! The lower-bound sum rate `(1−τ)·Σ ln(1 + SINR̄_k)` is non-decreasing over
//! outer iterations: each step keeps the previous iterate feasible.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chance::{self, OutageEstimate};
use crate::conic::{self, Assembler, ClarabelSolver, RankOne, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::instance::{ConstraintReport, Instance};
use crate::linalg::{self, c64, CMat, CVec};
use crate::wmmse::{self, BeamformerSet, WmmseState};

/// How the beamformer step of each BCD iteration is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem1Mode {
    /// Information beamformers only, with the energy covariance's per-BS
    /// power held at its current value; the energy covariance is updated
    /// once per outer iteration by the energy stage.
    Staged,
    /// Information beamformers and energy covariance in one program.
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoConfig {
    pub r_max: usize,
    pub tau_init: f64,
    /// Relative change of the BCD objective that ends the inner loop.
    pub inner_tol: f64,
    /// Change of the lower-bound sum rate (nats) that ends the outer loop.
    pub outer_tol: f64,
    pub inner_max: usize,
    pub tau_margin: f64,
    pub rank_one_tol: f64,
    pub mode: Problem1Mode,
    pub solver: SolverSettings,
}

impl Default for AoConfig {
    fn default() -> Self {
        AoConfig {
            r_max: 20,
            tau_init: 0.5,
            inner_tol: 1e-5,
            outer_tol: 1e-4,
            inner_max: 50,
            tau_margin: 1e-4,
            rank_one_tol: conic::RANK_ONE_RATIO_TOL,
            mode: Problem1Mode::Staged,
            solver: SolverSettings::default(),
        }
    }
}

impl AoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_init > 0.0 && self.tau_init < 1.0) {
            return Err(Error::invalid(format!("tau_init must lie in (0, 1), got {}", self.tau_init)));
        }
        if self.r_max == 0 || self.inner_max == 0 {
            return Err(Error::invalid("r_max and inner_max must be at least 1"));
        }
        for (name, v) in [
            ("inner_tol", self.inner_tol),
            ("outer_tol", self.outer_tol),
            ("tau_margin", self.tau_margin),
            ("rank_one_tol", self.rank_one_tol),
            ("solver.tol", self.solver.tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.tau_margin >= 0.5 {
            return Err(Error::invalid("tau_margin must be below 0.5"));
        }
        Ok(())
    }
}

/// Constraint slack below which a solve is accepted, watts.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Relative weight of the trace penalty in the energy stage.
const ENERGY_TRACE_PENALTY: f64 = 1e-6;

/// One outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub iteration: usize,
    /// `(1−τ)·Σ_k ln(1 + SINR̄_k)`, nats.
    pub lower_bound_rate: f64,
    /// BCD objective at the end of the inner loop.
    pub wmmse_objective: f64,
    pub tau: f64,
    /// Per-user energy slack `G_k − E_k/(τη_k)`.
    pub energy_slack: Vec<f64>,
    /// Per-BS average-power slack.
    pub power_slack: Vec<f64>,
    pub max_violation: f64,
    pub inner_steps: usize,
    pub solver_status: SolveStatus,
}

/// BCD objective after one half-step of the inner loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerRecord {
    pub outer: usize,
    pub step: usize,
    /// `receivers` after the receiver/weight update, `beamformers` after the
    /// conic solve.
    pub phase: InnerPhase,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerPhase {
    Receivers,
    Beamformers,
}

impl InnerPhase {
    pub fn as_str(&self) -> &'static str {
        match self {
            InnerPhase::Receivers => "receivers",
            InnerPhase::Beamformers => "beamformers",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub outer: Vec<OuterRecord>,
    pub inner: Vec<InnerRecord>,
    pub converged: bool,
}

pub const TRACE_CSV_HEADER: [&str; 10] = [
    "iteration",
    "sum_rate_nats",
    "sum_rate_bits",
    "wmmse_objective",
    "tau",
    "min_energy_slack",
    "min_power_slack",
    "max_violation",
    "inner_steps",
    "solver_status",
];

pub const INNER_TRACE_CSV_HEADER: [&str; 4] = ["outer", "step", "phase", "wmmse_objective"];

impl IterationTrace {
    pub fn lower_bound_rates(&self) -> Vec<f64> {
        self.outer.iter().map(|r| r.lower_bound_rate).collect()
    }

    pub fn inner_objectives(&self) -> Vec<f64> {
        self.inner.iter().map(|r| r.objective).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Output(format!("trace csv: {e}"));
        w.write_record(TRACE_CSV_HEADER).map_err(err)?;
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        for r in &self.outer {
            w.write_record([
                r.iteration.to_string(),
                format!("{:?}", r.lower_bound_rate),
                format!("{:?}", r.lower_bound_rate / std::f64::consts::LN_2),
                format!("{:?}", r.wmmse_objective),
                format!("{:?}", r.tau),
                format!("{:?}", min(&r.energy_slack)),
                format!("{:?}", min(&r.power_slack)),
                format!("{:?}", r.max_violation),
                r.inner_steps.to_string(),
                r.solver_status.as_str().to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Output(format!("trace csv: {e}")))?;
        Ok(())
    }

    /// One row per BCD half-step, in execution order.
    pub fn write_inner_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Output(format!("inner trace csv: {e}"));
        w.write_record(INNER_TRACE_CSV_HEADER).map_err(err)?;
        for r in &self.inner {
            w.write_record([
                r.outer.to_string(),
                r.step.to_string(),
                r.phase.as_str().to_string(),
                format!("{:?}", r.objective),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Output(format!("inner trace csv: {e}")))?;
        Ok(())
    }
}

/// Result of the inner BCD loop at a fixed ratio.
#[derive(Debug, Clone)]
pub struct Problem1Output {
    pub v_info: Vec<CVec>,
    pub energy_cov: CMat,
    pub state: WmmseState,
    /// BCD objective after every half-step.
    pub objectives: Vec<(InnerPhase, f64)>,
    pub steps: usize,
    /// Worst status met; a failed solve keeps the previous iterate.
    pub status: SolveStatus,
}

/// Outcome of the ratio update.
#[derive(Debug, Clone, PartialEq)]
pub struct TauUpdate {
    pub tau: f64,
    /// Smallest ratio meeting every constraint.
    pub lower: f64,
    /// Largest ratio allowed by the average-power constraints (`1` if none).
    pub upper: f64,
    pub binding: String,
}

#[derive(Debug, Clone)]
pub struct AoResult {
    /// Final iterate; `v_energy` holds the per-user covariances.
    pub beamformers: BeamformerSet,
    pub energy_cov: CMat,
    /// Per-user energy beamforming vectors extracted from `v_energy`.
    pub energy_vectors: Vec<RankOne>,
    pub state: WmmseState,
    pub trace: IterationTrace,
    pub constraints: ConstraintReport,
    /// `(1−τ)·Σ_k ln(1 + SINR̄_k)`, nats.
    pub lower_bound_rate: f64,
}

fn worse(a: SolveStatus, b: SolveStatus) -> SolveStatus {
    let rank = |s: SolveStatus| match s {
        SolveStatus::Optimal => 0,
        SolveStatus::Inaccurate => 1,
        SolveStatus::MaxIter => 2,
        SolveStatus::NumericalError => 3,
        SolveStatus::Unbounded => 4,
        SolveStatus::Infeasible => 5,
    };
    if rank(b) > rank(a) {
        b
    } else {
        a
    }
}

fn design_covariances(inst: &Instance) -> Vec<CMat> {
    if inst.constraint.robust_rate() {
        inst.channels.error_cov.clone()
    } else {
        vec![linalg::zeros_mat(inst.num_antennas()); inst.num_users()]
    }
}

fn bcd_objective(inst: &Instance, v: &[CVec], state: &WmmseState) -> f64 {
    let ch = &inst.channels;
    wmmse::bcd_objective(
        &ch.h_est,
        &ch.error_cov,
        &ch.noise_power,
        v,
        &state.receivers,
        &state.weights,
        inst.constraint.robust_rate(),
    )
}

/// `Σ_k ln(1 + SINR̄_k)` of the design model (no `(1−τ)` factor).
pub fn sum_log_rate(inst: &Instance, v_info: &[CVec]) -> f64 {
    let ch = &inst.channels;
    wmmse::lower_bound_sum_log(
        &ch.h_est,
        &ch.error_cov,
        &ch.noise_power,
        v_info,
        inst.constraint.robust_rate(),
    )
}

/// Matched-filter start: each user gets `P/K` per BS along its channel
/// block, with `P = min(P_BS, P_peak)`; the energy covariance mirrors it, or
/// is zero when no user needs energy.
pub fn initial_point(inst: &Instance) -> (Vec<CVec>, CMat) {
    let n = inst.num_antennas();
    let k_users = inst.num_users();
    let share = inst.power.p_bs.min(inst.power.p_peak) / k_users as f64;
    let mut v_info = vec![CVec::zeros(n); k_users];
    let mut s = linalg::zeros_mat(n);
    for (k, h) in inst.channels.h_est.iter().enumerate() {
        for block in &inst.bs_blocks {
            let norm: f64 = block.clone().map(|i| h[i].norm_sqr()).sum::<f64>().sqrt();
            let mut u = CVec::zeros(n);
            for i in block.clone() {
                u[i] = if norm > 0.0 {
                    h[i] / norm
                } else {
                    c64(1.0 / (block.len() as f64).sqrt(), 0.0)
                };
            }
            for i in block.clone() {
                v_info[k][i] = u[i] * share.sqrt();
            }
            s += linalg::outer(&u).scale(share);
        }
    }
    if !inst.has_energy_demand() {
        s = linalg::zeros_mat(n);
    }
    (v_info, s)
}

fn power_violation(inst: &Instance, v: &[CVec], s: &CMat, tau: f64) -> f64 {
    let ip = inst.info_power(v);
    let ep = inst.energy_power(s);
    let p = inst.power;
    ip.iter()
        .zip(&ep)
        .map(|(i, e)| (tau * e + (1.0 - tau) * i - p.p_bs).max(i - p.p_peak).max(e - p.p_peak))
        .fold(0.0, f64::max)
}

/// Nearest PSD matrix (negative eigenvalues dropped).
fn psd_projection(m: &CMat) -> CMat {
    let eig = linalg::hermitian_eigen(m);
    let mut out = linalg::zeros_mat(m.nrows());
    for (i, &l) in eig.values.iter().enumerate() {
        if l > 0.0 {
            out += linalg::outer(&eig.vectors.column(i).into_owned()).scale(l);
        }
    }
    linalg::hermitian_part(&out)
}

/// BCD at fixed `τ`, started from `(v_info, energy_cov)`.
pub fn solve_problem1(
    inst: &Instance,
    v_info: &[CVec],
    energy_cov: &CMat,
    tau: f64,
    cfg: &AoConfig,
) -> Result<Problem1Output> {
    cfg.validate()?;
    chance::check_tau(tau)?;
    let asm = Assembler::new(inst)?;
    let solver = ClarabelSolver::new(cfg.solver);
    let ch = &inst.channels;
    let robust = inst.constraint.robust_rate();
    let design_cov = design_covariances(inst);
    let mut v = v_info.to_vec();
    let mut s = energy_cov.clone();
    let mut objectives = Vec::new();
    let mut status = SolveStatus::Optimal;
    let mut last: Option<f64> = None;
    let mut steps = 0;
    let mut state = wmmse::update_state(&ch.h_est, &ch.error_cov, &ch.noise_power, &v, robust)?;
    for _ in 0..cfg.inner_max {
        let before = bcd_objective(inst, &v, &state);
        objectives.push((InnerPhase::Receivers, before));
        let obj = wmmse::subproblem_objective(&state.weights, &state.receivers, &ch.h_est, &design_cov);
        let assembly = match cfg.mode {
            Problem1Mode::Staged => asm.info_step(&obj, tau, &s)?,
            Problem1Mode::Joint => asm.problem1(&obj, tau)?,
        };
        let sol = asm.solve(&assembly, &solver)?;
        status = worse(status, sol.report.status);
        let Some(v_new) = sol.v_info else {
            if sol.report.status == SolveStatus::Infeasible {
                return Err(Error::infeasible(format!(
                    "beamformer subproblem at tau = {tau} (energy or power constraints)"
                )));
            }
            break;
        };
        let s_new = sol.energy_cov.map(|m| psd_projection(&m)).unwrap_or_else(|| s.clone());
        if cfg.mode == Problem1Mode::Joint {
            let check = inst.check(&v_new, &s_new, tau)?;
            if check.max_violation() > FEASIBILITY_TOL {
                break;
            }
        } else if power_violation(inst, &v_new, &s_new, tau) > FEASIBILITY_TOL {
            break;
        }
        let after = bcd_objective(inst, &v_new, &state);
        if after > before + 1e-9 * before.abs().max(1.0) {
            // a solve that does not descend is discarded
            break;
        }
        v = v_new;
        s = s_new;
        state = wmmse::update_state(&ch.h_est, &ch.error_cov, &ch.noise_power, &v, robust)?;
        steps += 1;
        objectives.push((InnerPhase::Beamformers, after));
        let done = last.is_some_and(|prev| (prev - after).abs() <= cfg.inner_tol * after.abs().max(1.0));
        last = Some(after);
        if done {
            break;
        }
    }
    Ok(Problem1Output {
        v_info: v,
        energy_cov: s,
        state,
        objectives,
        steps,
        status,
    })
}

/// Energy covariance maximizing `1/τ` for fixed information beamformers.
/// Returns `None` when the solve fails; an all-zero demand yields `S = 0`.
pub fn solve_energy_stage(inst: &Instance, v_info: &[CVec], tau_hint: f64, cfg: &AoConfig) -> Result<(Option<CMat>, SolveStatus)> {
    if !inst.has_energy_demand() {
        return Ok((Some(linalg::zeros_mat(inst.num_antennas())), SolveStatus::Optimal));
    }
    let asm = Assembler::new(inst)?;
    let total_peak = inst.power.p_peak * inst.num_bs() as f64;
    let penalty = ENERGY_TRACE_PENALTY / tau_hint.max(1e-12) / total_peak;
    let assembly = asm.energy_stage(v_info, penalty)?;
    let sol = asm.solve(&assembly, &ClarabelSolver::new(cfg.solver))?;
    Ok((sol.energy_cov.map(|m| psd_projection(&m)), sol.report.status))
}

/// Closed-form ratio update for fixed beamformers. The rate `(1−τ)·c` falls
/// with `τ`, so the answer is the smallest feasible ratio plus `margin`,
/// capped by the average-power bound and by `incumbent` when that is itself
/// feasible.
pub fn solve_problem2_tau(
    inst: &Instance,
    v_info: &[CVec],
    energy_cov: &CMat,
    incumbent: Option<f64>,
    margin: f64,
) -> Result<TauUpdate> {
    if !(margin > 0.0 && margin < 0.5) {
        return Err(Error::invalid(format!("tau margin must lie in (0, 0.5), got {margin}")));
    }
    let mut lower = 0.0_f64;
    let mut binding = String::from("none");
    let g = inst.guaranteed_power(energy_cov)?;
    for (k, (req, g)) in inst.reqs.iter().zip(&g).enumerate() {
        if req.e_min <= 0.0 {
            continue;
        }
        if *g <= 0.0 {
            return Err(Error::infeasible(format!(
                "energy requirement of user {k}: certified received power {g:.3e} W is not positive"
            )));
        }
        let need = req.e_min / (req.eta * g);
        if need > lower {
            lower = need;
            binding = format!("energy requirement of user {k}");
        }
    }
    let mut upper = 1.0_f64;
    let mut upper_binding = String::from("none");
    let ip = inst.info_power(v_info);
    let ep = inst.energy_power(energy_cov);
    let p_bs = inst.power.p_bs;
    for (l, (i, e)) in ip.iter().zip(&ep).enumerate() {
        // τ·(E − I) ≤ P_BS − I
        let (a, b) = (e - i, p_bs - i);
        let eps = 1e-12 * p_bs.max(e.abs()).max(i.abs());
        if a > eps {
            if b / a < upper {
                upper = b / a;
                upper_binding = format!("average power of BS {l}");
            }
        } else if a < -eps {
            if b / a > lower {
                lower = b / a;
                binding = format!("average power of BS {l}");
            }
        } else if b < -eps {
            return Err(Error::infeasible(format!("average power of BS {l}")));
        }
    }
    if lower >= 1.0 {
        return Err(Error::infeasible(format!("{binding} needs tau = {lower:.6} >= 1")));
    }
    if upper <= 0.0 || lower > upper * (1.0 + 1e-9) {
        return Err(Error::infeasible(format!(
            "{binding} needs tau >= {lower:.6} but {upper_binding} needs tau <= {upper:.6}"
        )));
    }
    let cap = if upper < 1.0 { upper } else { 1.0 - margin };
    let mut tau = (lower + margin).min(cap).max(lower.min(cap));
    if let Some(inc) = incumbent {
        if inc >= lower && inc <= upper && inc < 1.0 {
            tau = tau.min(inc);
        }
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::infeasible(format!("no time-switching ratio in (0, 1): {binding}")));
    }
    Ok(TauUpdate {
        tau,
        lower,
        upper,
        binding,
    })
}

/// Scale of the information beamformers that restores the average-power
/// constraints at `tau`, at most 1.
fn info_scale(inst: &Instance, v_info: &[CVec], energy_cov: &CMat, tau: f64) -> f64 {
    let ip = inst.info_power(v_info);
    let ep = inst.energy_power(energy_cov);
    let mut c2 = 1.0_f64;
    for (i, e) in ip.iter().zip(&ep) {
        if *i > 0.0 {
            c2 = c2.min((inst.power.p_bs - tau * e) / ((1.0 - tau) * i));
            c2 = c2.min(inst.power.p_peak / i);
        }
    }
    c2.max(0.0).sqrt()
}

/// Energy stage and ratio update; when the information beamformers leave no
/// room for the energy requirement, retries with the energy stage run as if
/// no information were sent and shrinks the information beamformers to fit.
///
/// With `P_peak ≤ P_BS` the average-power rows of the energy stage are
/// implied by the peak rows, so its answer does not depend on the
/// information beamformers and `cache` carries it across outer iterations.
fn energy_and_tau(
    inst: &Instance,
    v: &mut [CVec],
    s: &mut CMat,
    tau: f64,
    cfg: &AoConfig,
    status: &mut SolveStatus,
    cache: &mut Option<CMat>,
) -> Result<TauUpdate> {
    let cacheable = inst.power.p_peak <= inst.power.p_bs;
    let stage = match cache.as_ref().filter(|_| cacheable) {
        Some(c) => Some(c.clone()),
        None => {
            let (stage, st) = solve_energy_stage(inst, v, tau, cfg)?;
            *status = worse(*status, st);
            if cacheable {
                cache.clone_from(&stage);
            }
            stage
        }
    };
    if let Some(s_new) = stage {
        if let Ok(up) = solve_problem2_tau(inst, v, &s_new, Some(tau), cfg.tau_margin) {
            *s = s_new;
            return Ok(up);
        }
    }
    if let Ok(up) = solve_problem2_tau(inst, v, s, Some(tau), cfg.tau_margin) {
        return Ok(up);
    }
    let zero = vec![CVec::zeros(inst.num_antennas()); inst.num_users()];
    let (stage, st) = solve_energy_stage(inst, &zero, tau, cfg)?;
    *status = worse(*status, st);
    let s_new = stage.ok_or_else(|| Error::infeasible("energy requirements (energy-only problem failed)"))?;
    let up = solve_problem2_tau(inst, &zero, &s_new, None, cfg.tau_margin)?;
    let c = info_scale(inst, v, &s_new, up.tau);
    if !(c > 0.0) {
        return Err(Error::infeasible("average power: no room left for information"));
    }
    for vk in v.iter_mut() {
        *vk *= c64(c, 0.0);
    }
    *s = s_new;
    Ok(up)
}

/// Alternating optimization from the matched-filter start.
pub fn run_ao(inst: &Instance, cfg: &AoConfig) -> Result<AoResult> {
    cfg.validate()?;
    let (mut v, mut s) = initial_point(inst);
    let mut tau = cfg.tau_init;
    let mut trace = IterationTrace::default();
    let mut prev_rate: Option<f64> = None;
    let mut cache = None;
    for r in 0..cfg.r_max {
        let p1 = match solve_problem1(inst, &v, &s, tau, cfg) {
            Ok(p1) => p1,
            Err(e) if e.is_infeasible() && r == 0 => {
                // move to an energy-feasible ratio and retry once
                let mut st = SolveStatus::Optimal;
                let up = energy_and_tau(inst, &mut v, &mut s, tau, cfg, &mut st, &mut cache)?;
                tau = up.tau;
                solve_problem1(inst, &v, &s, tau, cfg)?
            }
            Err(e) => return Err(e),
        };
        for (phase, objective) in &p1.objectives {
            trace.inner.push(InnerRecord {
                outer: r,
                step: trace.inner.iter().filter(|x| x.outer == r).count(),
                phase: *phase,
                objective: *objective,
            });
        }
        v = p1.v_info;
        s = p1.energy_cov;
        let mut status = p1.status;
        let up = energy_and_tau(inst, &mut v, &mut s, tau, cfg, &mut status, &mut cache)?;
        tau = up.tau;
        let rate = (1.0 - tau) * sum_log_rate(inst, &v);
        let check = inst.check(&v, &s, tau)?;
        let wmmse_objective = p1.objectives.last().map_or(f64::NAN, |x| x.1);
        log::debug!("outer {r}: rate {rate:.6} tau {tau:.6} inner {} status {:?}", p1.steps, status);
        trace.outer.push(OuterRecord {
            iteration: r,
            lower_bound_rate: rate,
            wmmse_objective,
            tau,
            energy_slack: check.energy.clone(),
            power_slack: check.average_power.clone(),
            max_violation: check.max_violation(),
            inner_steps: p1.steps,
            solver_status: status,
        });
        let done = prev_rate.is_some_and(|p| (rate - p).abs() <= cfg.outer_tol);
        prev_rate = Some(rate);
        if done {
            trace.converged = true;
            break;
        }
    }
    let ch = &inst.channels;
    let state = wmmse::update_state(&ch.h_est, &ch.error_cov, &ch.noise_power, &v, inst.constraint.robust_rate())?;
    let v_energy = conic::split_energy_covariance(&s, inst.num_users())?;
    let energy_vectors = v_energy
        .iter()
        .map(|m| conic::extract_rank_one(m, cfg.rank_one_tol))
        .collect::<Result<Vec<_>>>()?;
    let constraints = inst.check(&v, &s, tau)?;
    let lower_bound_rate = (1.0 - tau) * sum_log_rate(inst, &v);
    Ok(AoResult {
        beamformers: BeamformerSet {
            v_info: v,
            v_energy,
            tau,
        },
        energy_cov: s,
        energy_vectors,
        state,
        trace,
        constraints,
        lower_bound_rate,
    })
}

/// Per-BS split of the average transmit power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySplit {
    /// `τ·Tr(A_l S A_l^H)`.
    pub energy: f64,
    /// `(1−τ)·Σ_k ‖A_l v_k‖²`.
    pub information: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Monte-Carlo mean of `Σ_k (1−τ)·ln(1 + SINR_k)` over true channels.
    pub mc_avg_true_rate: f64,
    pub lower_bound_rate: f64,
    pub outage: Vec<OutageEstimate>,
    pub energy_split: Vec<EnergySplit>,
}

/// Monte-Carlo evaluation of a solution over CSI-error draws.
pub fn evaluate_solution(inst: &Instance, bf: &BeamformerSet, n_mc: u64, seed: u64) -> Result<Evaluation> {
    if n_mc == 0 {
        return Err(Error::invalid("n_mc must be at least 1"));
    }
    bf.validate()?;
    let ch = &inst.channels;
    let k_users = inst.num_users();
    let tau = bf.tau;
    let true_rate = |h: &[CVec]| -> f64 {
        (0..k_users)
            .map(|k| (1.0 - tau) * wmmse::sinr(&h[k], &bf.v_info, k, ch.noise_power[k]).ln_1p())
            .sum()
    };
    let exact = ch.error_cov.iter().all(|c| c.iter().all(|z| *z == c64(0.0, 0.0)));
    let mc_avg_true_rate = if exact {
        true_rate(&ch.h_est)
    } else {
        let roots = ch.error_cov.iter().map(linalg::psd_sqrt).collect::<Result<Vec<_>>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(linalg::derive_seed(seed, u64::MAX));
        let mut total = 0.0;
        for _ in 0..n_mc {
            let h: Vec<CVec> = (0..k_users)
                .map(|k| &ch.h_est[k] + &roots[k] * linalg::sample_cn(&mut rng, inst.num_antennas()))
                .collect();
            total += true_rate(&h);
        }
        total / n_mc as f64
    };
    let outage = (0..k_users)
        .map(|k| {
            chance::monte_carlo_outage(
                &bf.v_energy,
                &ch.h_est[k],
                &ch.error_cov[k],
                &inst.reqs[k],
                tau,
                ch.noise_power[k],
                n_mc,
                linalg::derive_seed(seed, k as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let s = bf.energy_sum();
    let energy_split = inst
        .energy_power(&s)
        .iter()
        .zip(inst.info_power(&bf.v_info))
        .map(|(e, i)| EnergySplit {
            energy: tau * e,
            information: (1.0 - tau) * i,
        })
        .collect();
    Ok(Evaluation {
        mc_avg_true_rate,
        lower_bound_rate: (1.0 - tau) * sum_log_rate(inst, &bf.v_info),
        outage,
        energy_split,
    })
}
