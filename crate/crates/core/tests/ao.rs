use swipt_core::ao::{self, AoConfig, Problem1Mode};
use swipt_core::chance::{EhRequirement, EnergyConstraint};
use swipt_core::channel::{generate_topology, sample_channels, ChannelParams, ChannelState};
use swipt_core::instance::{Instance, PowerBudget};
use swipt_core::linalg::{c64, identity, outer, unit_vec, zeros_mat, CVec};
use swipt_core::Error;

const MARGIN: f64 = 1e-4;

fn one_user(h: CVec, eps: f64, e_min: f64, constraint: EnergyConstraint, num_bs: usize) -> Instance {
    let n = h.len();
    let ch = ChannelState {
        h_true: vec![h.clone()],
        h_est: vec![h],
        error: vec![CVec::zeros(n)],
        error_cov: vec![identity(n).scale(eps)],
        noise_power: vec![0.01],
    };
    Instance::new(
        ch,
        Instance::uniform_blocks(num_bs, n / num_bs),
        vec![EhRequirement::new(e_min, 0.75, 0.2).unwrap()],
        constraint,
        PowerBudget { p_bs: 5.0, p_peak: 5.0 },
    )
    .unwrap()
}

fn table_one(seed: u64, k: usize, constraint: EnergyConstraint) -> Instance {
    let topo = generate_topology(5, k, 2, 800.0, seed).unwrap();
    let ch = sample_channels(&topo, &ChannelParams::default(), seed ^ 0xABCD).unwrap();
    Instance::new(
        ch,
        Instance::uniform_blocks(5, 2),
        vec![EhRequirement::new(0.1, 0.75, 0.2).unwrap(); k],
        constraint,
        PowerBudget { p_bs: 5.0, p_peak: 5.0 },
    )
    .unwrap()
}

#[test]
fn problem2_hand_example() {
    // G = |e1^H S e1| + σ² = 0.49 + 0.01 = 0.5
    let inst = one_user(unit_vec(2, 0), 0.0, 0.1, EnergyConstraint::Nominal, 2);
    let s = outer(&unit_vec(2, 0)).scale(0.49);
    let v = vec![CVec::zeros(2)];
    let up = ao::solve_problem2_tau(&inst, &v, &s, None, MARGIN).unwrap();
    let expected = 0.1 / (0.75 * 0.5);
    assert!((up.lower - expected).abs() < 1e-12);
    assert!((up.tau - (expected + MARGIN)).abs() < 1e-12);
    assert!(up.binding.contains("energy"));
    // every ratio below the lower end violates the energy row
    let check = inst.check(&v, &s, up.tau - 2.0 * MARGIN).unwrap();
    assert!(check.energy[0] < 0.0);
    assert!(inst.check(&v, &s, up.tau).unwrap().max_violation() == 0.0);
}

#[test]
fn problem2_without_energy_demand_returns_the_margin() {
    let inst = one_user(unit_vec(2, 0), 0.01, 0.0, EnergyConstraint::Chance, 2);
    let v = vec![CVec::from_vec(vec![c64(1.0, 0.0), c64(0.0, 1.0)])];
    let up = ao::solve_problem2_tau(&inst, &v, &zeros_mat(2), None, MARGIN).unwrap();
    assert_eq!(up.tau, MARGIN);
}

#[test]
fn problem2_rejects_non_positive_certified_power() {
    // 0.5 − 2·10·‖0.1·0.49·e1‖ = −0.48
    let inst = one_user(unit_vec(2, 0), 0.01, 0.1, EnergyConstraint::WorstCase { radius: 10.0 }, 2);
    let s = outer(&unit_vec(2, 0)).scale(0.49);
    let err = ao::solve_problem2_tau(&inst, &[CVec::zeros(2)], &s, None, MARGIN).unwrap_err();
    assert!(err.is_infeasible(), "{err}");
    assert!(err.to_string().contains("user 0"));
}

#[test]
fn problem2_reports_average_power_conflict() {
    // information at full power leaves no room for any energy phase
    let inst = one_user(unit_vec(2, 0), 0.0, 0.1, EnergyConstraint::Nominal, 2);
    let s = outer(&unit_vec(2, 0)).scale(5.0);
    let v = vec![CVec::from_vec(vec![c64(5f64.sqrt(), 0.0), c64(0.0, 0.0)])];
    let up = ao::solve_problem2_tau(&inst, &v, &s, None, MARGIN).unwrap();
    // τ·(5 − 5) ≤ 0 on BS 0 holds for every τ, so only energy binds
    assert!(up.binding.contains("energy"));
    let v = vec![CVec::from_vec(vec![c64(2.0, 0.0), c64(0.0, 0.0)])];
    let s = outer(&unit_vec(2, 0)).scale(0.0001);
    let err = ao::solve_problem2_tau(&inst, &v, &s, None, MARGIN).unwrap_err();
    assert!(err.is_infeasible());
}

#[test]
fn single_user_matches_matched_filter_optimum() {
    let h = CVec::from_vec(vec![c64(0.3, -0.1), c64(-0.2, 0.4), c64(0.05, 0.0), c64(0.0, 0.25)]);
    let inst = one_user(h.clone(), 0.0, 0.0, EnergyConstraint::Chance, 1);
    for mode in [Problem1Mode::Staged, Problem1Mode::Joint] {
        let cfg = AoConfig { mode, ..AoConfig::default() };
        let r = ao::run_ao(&inst, &cfg).unwrap();
        let tau = r.beamformers.tau;
        let p = inst.power.p_peak;
        let oracle = (1.0 - tau) * (p * h.norm_squared() / 0.01).ln_1p();
        let rel = (r.lower_bound_rate - oracle).abs() / oracle;
        assert!(rel <= 1e-3, "{mode:?}: rate {} oracle {oracle}", r.lower_bound_rate);
        // matched filter: v ∝ h
        let v = &r.beamformers.v_info[0];
        let align = h.dotc(v).norm() / (h.norm() * v.norm());
        assert!(align > 1.0 - 1e-6, "{mode:?}: alignment {align}");
        assert_eq!(tau, MARGIN);
    }
}

#[test]
fn runs_are_deterministic() {
    let inst = table_one(3, 3, EnergyConstraint::Chance);
    let a = ao::run_ao(&inst, &AoConfig::default()).unwrap();
    let b = ao::run_ao(&inst, &AoConfig::default()).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.beamformers, b.beamformers);
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    a.trace.write_csv(&mut ca).unwrap();
    b.trace.write_csv(&mut cb).unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn solutions_are_feasible_and_monotone() {
    for seed in [1, 2] {
        for constraint in [EnergyConstraint::Chance, EnergyConstraint::Nominal] {
            let inst = table_one(seed, 3, constraint);
            let r = match ao::run_ao(&inst, &AoConfig::default()) {
                Ok(r) => r,
                Err(e) if e.is_infeasible() => continue,
                Err(e) => panic!("{e}"),
            };
            assert!(r.constraints.max_violation() <= 1e-6, "{:?}", r.constraints);
            assert!(r.trace.outer.len() <= AoConfig::default().r_max);
            for w in r.trace.lower_bound_rates().windows(2) {
                assert!(w[1] >= w[0] - 1e-6, "outer dip {} -> {}", w[0], w[1]);
            }
            for w in r.trace.inner_objectives().windows(2) {
                assert!(w[1] <= w[0] + 1e-6, "inner rise {} -> {}", w[0], w[1]);
            }
            let split = ao::evaluate_solution(&inst, &r.beamformers, 200, 9).unwrap().energy_split;
            for s in split {
                assert!(s.energy + s.information <= inst.power.p_bs + 1e-6);
            }
        }
    }
}

#[test]
fn exact_csi_evaluation_is_the_deterministic_rate() {
    let h = CVec::from_vec(vec![c64(0.3, -0.1), c64(-0.2, 0.4)]);
    let inst = one_user(h.clone(), 0.0, 0.0, EnergyConstraint::Chance, 2);
    let r = ao::run_ao(&inst, &AoConfig::default()).unwrap();
    let e = ao::evaluate_solution(&inst, &r.beamformers, 50, 1).unwrap();
    assert_eq!(e.mc_avg_true_rate, e.lower_bound_rate);
    assert_eq!(e.lower_bound_rate, r.lower_bound_rate);
    assert!(matches!(
        ao::evaluate_solution(&inst, &r.beamformers, 0, 1),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn unmeetable_demand_is_reported_as_infeasible() {
    let mut inst = table_one(1, 2, EnergyConstraint::Chance);
    for r in &mut inst.reqs {
        r.e_min = 1e3;
    }
    let err = ao::run_ao(&inst, &AoConfig::default()).unwrap_err();
    assert!(err.is_infeasible(), "{err}");
}

#[test]
fn config_validation() {
    assert!(AoConfig { tau_init: 1.0, ..AoConfig::default() }.validate().is_err());
    assert!(AoConfig { r_max: 0, ..AoConfig::default() }.validate().is_err());
    assert!(AoConfig { inner_tol: 0.0, ..AoConfig::default() }.validate().is_err());
    assert!(AoConfig::default().validate().is_ok());
}
