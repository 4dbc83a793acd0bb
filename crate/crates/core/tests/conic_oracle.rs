//! Conic programs of two-antenna single-user instances checked against a
//! dense grid search evaluated directly on complex matrices.

mod common;

use std::f64::consts::PI;

use common::*;
use swipt_core::chance::EnergyConstraint;
use swipt_core::conic::{Assembler, ConicSolver, SolveStatus, SolverSettings, ClarabelSolver};
use swipt_core::instance::PowerBudget;
use swipt_core::linalg::{zeros_mat, CVec};

#[test]
fn info_step_matches_grid_search() {
    let tau = 0.3;
    for (case, h) in CHANNELS.iter().enumerate() {
        for power in [PowerBudget { p_bs: 5.0, p_peak: 5.0 }, PowerBudget { p_bs: 0.5, p_peak: 2.0 }] {
            let inst = instance(*h, 0.01, 0.0, EnergyConstraint::Chance, power);
            let obj = info_objective(&inst);
            let asm = Assembler::new(&inst).unwrap();
            let program = asm.info_step(&obj, tau, &zeros_mat(2)).unwrap();
            let sol = asm.solve(&program, &solver()).unwrap();
            assert_eq!(sol.report.status, SolveStatus::Optimal, "case {case}");
            let v = sol.v_info.unwrap();
            let solver_value = obj.evaluate(&v);

            let radius = power.p_peak.min(power.p_bs / (1.0 - tau)).sqrt();
            let (neg, _) = grid_max(
                |x| Some(-obj.evaluate(&[clamped_beam(x, radius)])),
                &[-radius; 4],
                &[radius; 4],
                17,
                12,
            );
            let grid_value = -neg;
            let scale = grid_value.abs().max(1.0);
            assert!(
                (solver_value - grid_value).abs() <= GRID_REL_TOL * scale,
                "case {case}: solver {solver_value} grid {grid_value}"
            );
            assert!(solver_value <= grid_value + 1e-7 * scale, "solver worse than grid");
            let check = inst.check(&v, &zeros_mat(2), tau).unwrap();
            assert!(check.max_violation() <= RESIDUAL_TOL, "case {case}: {check:?}");
            let reported = sol.report.objective_value + program.program.objective_constant();
            assert!((reported - solver_value).abs() <= 1e-6 * scale, "reported {reported} vs {solver_value}");
        }
    }
}

#[test]
fn energy_stage_matches_grid_search() {
    let constraints = [
        EnergyConstraint::Chance,
        EnergyConstraint::WorstCase { radius: 2f64.sqrt() },
        EnergyConstraint::Nominal,
    ];
    let power = PowerBudget { p_bs: 5.0, p_peak: 5.0 };
    for (case, h) in CHANNELS.iter().enumerate() {
        for constraint in constraints {
            let inst = instance(*h, 0.01, 0.1, constraint, power);
            let req = inst.reqs[0];
            let asm = Assembler::new(&inst).unwrap();
            let zero = vec![CVec::zeros(2)];
            let program = asm.energy_stage(&zero, 0.0).unwrap();
            let sol = asm.solve(&program, &solver()).unwrap();
            assert!(
                matches!(sol.report.status, SolveStatus::Optimal | SolveStatus::Inaccurate),
                "case {case} {constraint:?}: {:?}",
                sol.report.status
            );
            let gamma = sol.gamma.unwrap();
            let s = sol.energy_cov.unwrap();

            let p = power.p_peak;
            let (g_best, _) = grid_max(
                |x| inst.guaranteed_power(&psd_from(x)).ok().map(|g| g[0]),
                &[0.0, 0.0, 0.0, -2.0 * PI],
                &[p, p, 1.0, 2.0 * PI],
                17,
                12,
            );
            let grid_gamma = req.eta * g_best / req.e_min;
            assert!(
                (gamma - grid_gamma).abs() <= GRID_REL_TOL * grid_gamma.abs().max(1.0),
                "case {case} {constraint:?}: solver gamma {gamma} grid {grid_gamma}"
            );
            // the returned covariance certifies the returned ratio
            let tau = 1.0 / gamma;
            if tau < 1.0 {
                let check = inst.check(&zero, &s, tau).unwrap();
                assert!(check.max_violation() <= RESIDUAL_TOL, "case {case} {constraint:?}: {check:?}");
            }
            let g = inst.guaranteed_power(&s).unwrap()[0];
            assert!(req.eta * g / req.e_min >= gamma - RESIDUAL_TOL * gamma.max(1.0));
        }
    }
}

#[test]
fn single_user_two_antenna_program_has_ten_variables() {
    let inst = instance(CHANNELS[0], 0.01, 0.1, EnergyConstraint::Chance, PowerBudget { p_bs: 5.0, p_peak: 5.0 });
    let asm = Assembler::new(&inst).unwrap();
    let program = asm.problem1(&info_objective(&inst), 0.5).unwrap();
    // 4 real beamformer entries, 4 covariance parameters, 2 epigraph scalars
    assert_eq!(program.layout.n_vars, 10);
    assert_eq!(program.program.n_vars(), 10);
}

#[test]
fn joint_program_agrees_with_staged_blocks() {
    // With the energy requirement slack at tau = 0.5 the joint optimum over
    // (v, S) has the same information objective as the information step.
    let inst = instance(CHANNELS[0], 0.01, 0.01, EnergyConstraint::Chance, PowerBudget { p_bs: 5.0, p_peak: 5.0 });
    let obj = info_objective(&inst);
    let asm = Assembler::new(&inst).unwrap();
    let joint = asm.solve(&asm.problem1(&obj, 0.5).unwrap(), &solver()).unwrap();
    let v = joint.v_info.unwrap();
    let s = joint.energy_cov.unwrap();
    let check = inst.check(&v, &s, 0.5).unwrap();
    assert!(check.max_violation() <= RESIDUAL_TOL, "{check:?}");
    let staged = asm.solve(&asm.info_step(&obj, 0.5, &s).unwrap(), &solver()).unwrap();
    let a = obj.evaluate(&v);
    let b = obj.evaluate(&staged.v_info.unwrap());
    assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "joint {a} staged {b}");
}

#[test]
fn variable_permutation_leaves_the_optimum_unchanged() {
    let inst = instance(CHANNELS[1], 0.01, 0.1, EnergyConstraint::Chance, PowerBudget { p_bs: 5.0, p_peak: 5.0 });
    let asm = Assembler::new(&inst).unwrap();
    let program = asm.problem1(&info_objective(&inst), 0.4).unwrap().program;
    let n = program.n_vars();
    let base = solver().solve(&program).unwrap();
    for shift in [1, 3, 7] {
        let perm: Vec<usize> = (0..n).map(|i| (i * 3 + shift) % n).collect();
        let mut seen = perm.clone();
        seen.sort_unstable();
        if seen != (0..n).collect::<Vec<_>>() {
            continue;
        }
        let permuted = program.permute_variables(&perm).unwrap();
        let sol = solver().solve(&permuted).unwrap();
        assert_eq!(sol.report.status, base.report.status);
        let a = base.report.objective_value;
        let b = sol.report.objective_value;
        assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "shift {shift}: {a} vs {b}");
        for (i, &p) in perm.iter().enumerate() {
            assert!((sol.x[p] - base.x[i]).abs() <= 1e-4, "variable {i}");
        }
    }
}

#[test]
fn tighter_tolerance_never_hurts_feasibility() {
    let inst = instance(CHANNELS[0], 0.01, 0.0, EnergyConstraint::Chance, PowerBudget { p_bs: 2.0, p_peak: 5.0 });
    let obj = info_objective(&inst);
    let asm = Assembler::new(&inst).unwrap();
    let program = asm.info_step(&obj, 0.3, &zeros_mat(2)).unwrap();
    let mut values = Vec::new();
    for tol in [1e-4, 1e-6, 1e-8] {
        let sol = asm
            .solve(&program, &ClarabelSolver::new(SolverSettings { tol, max_iter: 200 }))
            .unwrap();
        assert_eq!(sol.report.status, SolveStatus::Optimal);
        let v = sol.v_info.unwrap();
        let viol = inst.check(&v, &zeros_mat(2), 0.3).unwrap().max_violation();
        assert!(viol <= 10.0 * tol, "tol {tol}: violation {viol}");
        values.push(obj.evaluate(&v));
    }
    let best = values[2];
    for (v, tol) in values.iter().zip([1e-4, 1e-6, 1e-8]) {
        assert!((v - best).abs() <= 100.0 * tol * best.abs().max(1.0), "tol {tol}: {v} vs {best}");
    }
}
