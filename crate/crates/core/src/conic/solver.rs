use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use serde::{Deserialize, Serialize};

use super::program::{Cone, ConicProgram};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Converged only to the solver's reduced tolerances.
    Inaccurate,
    Infeasible,
    Unbounded,
    MaxIter,
    NumericalError,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Inaccurate => "inaccurate",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::NumericalError => "numerical_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub objective_value: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: u32,
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub report: SolveReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Feasibility and relative gap tolerance.
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

/// A backend that solves [`ConicProgram`]s. Infeasibility and iteration
/// limits come back as a status; `Err` is reserved for malformed input.
pub trait ConicSolver {
    fn solve(&self, program: &ConicProgram) -> Result<Solution>;
}

/// Interior-point backend built on Clarabel. Single-threaded, hence
/// deterministic for identical input.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClarabelSolver {
    pub settings: SolverSettings,
}

impl ClarabelSolver {
    pub fn new(settings: SolverSettings) -> Self {
        ClarabelSolver { settings }
    }
}

fn csc(m: usize, n: usize, triplets: &[(usize, usize, f64)]) -> CscMatrix<f64> {
    let (mut i, mut j, mut v) = (Vec::new(), Vec::new(), Vec::new());
    for &(r, c, x) in triplets {
        i.push(r);
        j.push(c);
        v.push(x);
    }
    CscMatrix::new_from_triplets(m, n, i, j, v)
}

impl ConicSolver for ClarabelSolver {
    fn solve(&self, program: &ConicProgram) -> Result<Solution> {
        let s = &self.settings;
        if !(s.tol > 0.0) || s.max_iter == 0 {
            return Err(Error::invalid("solver tolerance and iteration cap must be positive"));
        }
        let n = program.n_vars();
        let m = program.n_rows();
        let covered: usize = program.cones().iter().map(Cone::rows).sum();
        if covered != m {
            return Err(Error::invalid(format!("cones cover {covered} of {m} rows")));
        }
        let p = csc(n, n, program.p_triplets());
        let a = csc(m, n, program.a_triplets());
        let cones: Vec<SupportedConeT<f64>> = program
            .cones()
            .iter()
            .map(|c| match *c {
                Cone::Zero(d) => SupportedConeT::ZeroConeT(d),
                Cone::Nonneg(d) => SupportedConeT::NonnegativeConeT(d),
                Cone::Soc(d) => SupportedConeT::SecondOrderConeT(d),
                Cone::Psd(d) => SupportedConeT::PSDTriangleConeT(d),
            })
            .collect();
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(s.max_iter)
            .tol_feas(s.tol)
            .tol_gap_abs(s.tol)
            .tol_gap_rel(s.tol)
            .max_threads(1u32)
            .build()
            .map_err(|e| Error::Solver(e.to_string()))?;
        let start = Instant::now();
        let mut solver = DefaultSolver::new(&p, program.q(), &a, program.b(), &cones, settings)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        solver.solve();
        let wall_time = start.elapsed().as_secs_f64();
        let status = match solver.solution.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::AlmostSolved => SolveStatus::Inaccurate,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
            SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::MaxIter,
            _ => SolveStatus::NumericalError,
        };
        let x = solver.solution.x.clone();
        let objective_value = program.objective_value(&x);
        let info = &solver.info;
        Ok(Solution {
            x,
            report: SolveReport {
                status,
                objective_value,
                primal_residual: info.res_primal,
                dual_residual: info.res_dual,
                gap: info.gap_rel.min(info.gap_abs),
                iterations: info.iterations,
                wall_time,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::program::AffineExpr;
    use nalgebra::DMatrix;

    #[test]
    fn trivial_ball_program() {
        // min ‖v‖² s.t. ‖v‖ ≤ 1
        let mut p = ConicProgram::new(3);
        p.add_quadratic(&DMatrix::identity(3, 3), &[0, 1, 2]);
        p.add_soc(&[AffineExpr::constant(1.0), AffineExpr::var(0), AffineExpr::var(1), AffineExpr::var(2)]);
        let sol = ClarabelSolver::default().solve(&p).unwrap();
        assert_eq!(sol.report.status, SolveStatus::Optimal);
        assert!(sol.x.iter().all(|v| v.abs() < 1e-7));
        assert!(sol.report.objective_value.abs() < 1e-10);
    }

    #[test]
    fn psd_program_matches_hand_solution() {
        // max x0 + x2 − x1 subject to [[x0, x1],[x1, x2]] ⪰ 0 and x0 + x2 ≤ 1:
        // optimum 1 + ½ at x1 = −½
        let mut p = ConicProgram::new(3);
        p.add_linear(&{
            let mut e = AffineExpr::default();
            e.add_term(0, -1.0).add_term(1, 1.0).add_term(2, -1.0);
            e
        });
        p.add_psd(2, |i, j| AffineExpr::var(i + j));
        let mut e = AffineExpr::constant(1.0);
        e.add_term(0, -1.0).add_term(2, -1.0);
        p.add_nonneg(&e);
        let sol = ClarabelSolver::default().solve(&p).unwrap();
        assert_eq!(sol.report.status, SolveStatus::Optimal);
        assert!((sol.report.objective_value + 1.5).abs() < 1e-7, "{:?}", sol.report);
        assert!(p.max_violation(&sol.x) < 1e-7);
    }

    #[test]
    fn infeasible_is_a_status() {
        let mut p = ConicProgram::new(1);
        p.add_nonneg(&AffineExpr::term(0, 1.0).plus_const(-2.0));
        p.add_nonneg(&AffineExpr::term(0, -1.0).plus_const(1.0));
        let sol = ClarabelSolver::default().solve(&p).unwrap();
        assert_eq!(sol.report.status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_is_a_status() {
        let mut p = ConicProgram::new(1);
        p.add_linear(&AffineExpr::term(0, -1.0));
        p.add_nonneg(&AffineExpr::var(0));
        let sol = ClarabelSolver::default().solve(&p).unwrap();
        assert_eq!(sol.report.status, SolveStatus::Unbounded);
    }
}
