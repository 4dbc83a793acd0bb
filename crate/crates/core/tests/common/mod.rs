//! Two-antenna single-user instances and a dense grid-search oracle.
#![allow(dead_code)]

use swipt_core::chance::{EhRequirement, EnergyConstraint};
use swipt_core::channel::ChannelState;
use swipt_core::conic::{ClarabelSolver, SolverSettings};
use swipt_core::instance::{Instance, PowerBudget};
use swipt_core::linalg::{c64, identity, zeros_mat, CMat, CVec};
use swipt_core::wmmse::{self, SubproblemObjective};

pub const GRID_REL_TOL: f64 = 1e-3;
pub const RESIDUAL_TOL: f64 = 1e-6;

pub fn instance(h: [(f64, f64); 2], eps: f64, e_min: f64, constraint: EnergyConstraint, power: PowerBudget) -> Instance {
    let h = CVec::from_vec(h.iter().map(|&(re, im)| c64(re, im)).collect());
    let ch = ChannelState {
        h_true: vec![h.clone()],
        h_est: vec![h],
        error: vec![CVec::zeros(2)],
        error_cov: vec![identity(2).scale(eps)],
        noise_power: vec![0.01],
    };
    Instance::new(
        ch,
        Instance::uniform_blocks(2, 1),
        vec![EhRequirement::new(e_min, 0.75, 0.2).unwrap()],
        constraint,
        power,
    )
    .unwrap()
}

/// Maximizes `f` over a box by repeated grids, each centred on the previous
/// winner with the box shrunk to two cells either side.
pub fn grid_max(f: impl Fn(&[f64]) -> Option<f64>, lo: &[f64], hi: &[f64], points: usize, levels: usize) -> (f64, Vec<f64>) {
    let d = lo.len();
    let (mut a, mut b) = (lo.to_vec(), hi.to_vec());
    let mut best = (f64::NEG_INFINITY, lo.to_vec());
    for _ in 0..levels {
        let mut idx = vec![0usize; d];
        loop {
            let x: Vec<f64> = (0..d)
                .map(|j| a[j] + (b[j] - a[j]) * idx[j] as f64 / (points - 1) as f64)
                .collect();
            if let Some(v) = f(&x) {
                if v > best.0 {
                    best = (v, x);
                }
            }
            let mut j = 0;
            while j < d {
                idx[j] += 1;
                if idx[j] < points {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == d {
                break;
            }
        }
        for j in 0..d {
            let cell = 2.0 * (b[j] - a[j]) / (points - 1) as f64;
            a[j] = (best.1[j] - cell).max(lo[j]);
            b[j] = (best.1[j] + cell).min(hi[j]);
        }
    }
    best
}

/// Per-antenna entries of `x` pulled radially into the disc of `radius`.
pub fn clamped_beam(x: &[f64], radius: f64) -> CVec {
    let entry = |re: f64, im: f64| {
        let z = c64(re, im);
        let r = z.norm();
        if r > radius {
            z * (radius / r)
        } else {
            z
        }
    };
    CVec::from_vec(vec![entry(x[0], x[1]), entry(x[2], x[3])])
}

pub fn psd_from(x: &[f64]) -> CMat {
    let (s11, s22, r, phi) = (x[0], x[1], x[2], x[3]);
    let off = r * (s11 * s22).sqrt();
    let mut s = zeros_mat(2);
    s[(0, 0)] = c64(s11, 0.0);
    s[(1, 1)] = c64(s22, 0.0);
    s[(0, 1)] = c64(off * phi.cos(), off * phi.sin());
    s[(1, 0)] = s[(0, 1)].conj();
    s
}

pub fn solver() -> ClarabelSolver {
    ClarabelSolver::new(SolverSettings::default())
}

pub fn info_objective(inst: &Instance) -> SubproblemObjective {
    let ch = &inst.channels;
    wmmse::subproblem_objective(&[1.3], &[c64(0.4, -0.2)], &ch.h_est, &ch.error_cov)
}

pub const CHANNELS: [[(f64, f64); 2]; 3] = [
    [(0.8, 0.3), (-0.5, 0.6)],
    [(0.05, -0.02), (1.4, 0.2)],
    [(0.3, 0.0), (0.0, -0.3)],
];

