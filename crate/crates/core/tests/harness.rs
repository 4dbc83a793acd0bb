use std::path::Path;

use swipt_core::ao::{INNER_TRACE_CSV_HEADER, TRACE_CSV_HEADER};
use swipt_core::chance::OUTAGE_CSV_HEADER;
use swipt_core::channel::CHANNEL_CSV_HEADER;
use swipt_core::harness::{
    self, mean_std, ExperimentConfig, RowStatus, SweepAxis, Variant, BEAMFORMERS_FILE, BEAMFORMER_CSV_HEADER,
    SWEEP_ROWS_CSV_HEADER, SWEEP_ROWS_FILE, SWEEP_SUMMARY_CSV_HEADER, SWEEP_SUMMARY_FILE,
};
use swipt_core::Error;

fn small(dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        output_dir: dir.to_path_buf(),
        num_users: 2,
        n_drops: 3,
        n_mc: 500,
        sweep_axis: SweepAxis::EMin,
        sweep_values: vec![0.05, 0.2],
        ..ExperimentConfig::default()
    }
}

#[test]
fn csv_schemas_are_stable() {
    let golden = [
        (TRACE_CSV_HEADER.join(","), "iteration,sum_rate_nats,sum_rate_bits,wmmse_objective,tau,min_energy_slack,min_power_slack,max_violation,inner_steps,solver_status"),
        (INNER_TRACE_CSV_HEADER.join(","), "outer,step,phase,wmmse_objective"),
        (OUTAGE_CSV_HEADER.join(","), "user,theta,empirical_outage,n_samples,ci_half_width"),
        (CHANNEL_CSV_HEADER.join(","), "user,quantity,row,col,re,im"),
        (BEAMFORMER_CSV_HEADER.join(","), "user,quantity,row,col,re,im"),
        (SWEEP_ROWS_CSV_HEADER.join(","), "sweep_axis,sweep_value,drop,variant,status,tau,lower_bound_rate_nats,lower_bound_rate_bits,mc_rate_nats,mc_rate_bits,max_outage,energy_power_w,info_power_w,outer_iterations,converged,max_violation,max_rank_ratio,message"),
        (SWEEP_SUMMARY_CSV_HEADER.join(","), "sweep_axis,sweep_value,variant,n_drops,n_solved,mean_rate_nats,std_rate_nats,mean_rate_bits,std_rate_bits,mean_mc_rate_nats,std_mc_rate_nats,mean_tau,std_tau,mean_energy_power_w,mean_info_power_w,max_outage"),
    ];
    for (found, expected) in golden {
        assert_eq!(found, expected);
    }
}

#[test]
fn single_runs_reproduce_byte_for_byte() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = harness::run_single(&small(a.path())).unwrap();
    let rb = harness::run_single(&small(b.path())).unwrap();
    assert_eq!(ra.manifest.outputs, rb.manifest.outputs);
    assert_eq!(ra.manifest.outputs.len(), 6);
    for f in &ra.manifest.outputs {
        let bytes = std::fs::read(a.path().join(&f.name)).unwrap();
        assert_eq!(swipt_core::io::sha256_hex(&bytes), f.sha256, "{}", f.name);
        assert_eq!(bytes, std::fs::read(b.path().join(&f.name)).unwrap());
    }
    // the stored manifest reproduces the run
    let stored = harness::RunManifest::load(&a.path().join(harness::MANIFEST_FILE)).unwrap();
    assert_eq!(stored.config, small(a.path()));
    let c = tempfile::tempdir().unwrap();
    let again = harness::run_single(&ExperimentConfig {
        output_dir: c.path().to_path_buf(),
        ..stored.config
    })
    .unwrap();
    assert_eq!(again.manifest.outputs, ra.manifest.outputs);
}

#[test]
fn missing_output_directory_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent");
    let err = harness::run_single(&small(&missing)).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("absent"), "{err}");
}

#[test]
fn sweep_summary_is_recomputable_from_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = harness::run_sweep(&small(dir.path())).unwrap();
    // rows in (value, drop, variant) order
    let keys: Vec<(f64, usize, Variant)> = out.rows.iter().map(|r| (r.sweep_value, r.drop, r.variant)).collect();
    let mut expected = Vec::new();
    for v in [0.05, 0.2] {
        for d in 0..3 {
            for var in [Variant::Chance, Variant::Deterministic] {
                expected.push((v, d, var));
            }
        }
    }
    assert_eq!(keys, expected);

    let mut rows = csv::Reader::from_path(dir.path().join(SWEEP_ROWS_FILE)).unwrap();
    let records: Vec<csv::StringRecord> = rows.records().map(|r| r.unwrap()).collect();
    let mut summary = csv::Reader::from_path(dir.path().join(SWEEP_SUMMARY_FILE)).unwrap();
    let cells: Vec<csv::StringRecord> = summary.records().map(|r| r.unwrap()).collect();
    assert_eq!(cells.len(), 4);
    let parse = |s: &str| -> Option<f64> { (!s.is_empty()).then(|| s.parse().unwrap()) };
    for cell in &cells {
        let members: Vec<&csv::StringRecord> = records
            .iter()
            .filter(|r| r[1] == cell[1] && r[3] == cell[2])
            .collect();
        assert_eq!(members.len().to_string(), &cell[3]);
        let solved: Vec<&&csv::StringRecord> = members.iter().filter(|r| &r[4] == "ok").collect();
        assert_eq!(solved.len().to_string(), &cell[4]);
        let rates: Vec<f64> = members.iter().map(|r| r[6].parse().unwrap()).collect();
        let (m, s) = mean_std(&rates);
        assert_eq!(m, parse(&cell[5]));
        assert_eq!(s, parse(&cell[6]));
        let taus: Vec<f64> = solved.iter().map(|r| r[5].parse().unwrap()).collect();
        let (m, s) = mean_std(&taus);
        assert_eq!(m, parse(&cell[11]));
        assert_eq!(s, parse(&cell[12]));
    }
    for r in &out.rows {
        match r.status {
            RowStatus::Ok => assert!(r.tau.is_some() && r.message.is_empty()),
            _ => assert!(r.tau.is_none() && r.lower_bound_rate == 0.0 && !r.message.is_empty()),
        }
    }
    let again = harness::sweep_rows(&small(dir.path())).unwrap();
    assert_eq!(again, out.rows);
}

#[test]
fn stored_solutions_validate() {
    let dir = tempfile::tempdir().unwrap();
    let run = harness::run_single(&small(dir.path())).unwrap();
    assert_eq!(run.summary.variant, Variant::Chance);
    let report = harness::validate_outage(dir.path(), 2000, 7).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert!(report.passed(), "{report:?}");
    assert!(matches!(harness::validate_outage(dir.path(), 0, 7), Err(Error::InvalidInput(_))));

    let path = dir.path().join(BEAMFORMERS_FILE);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[3] = "0,v_info,0,0,not-a-number,0";
    std::fs::write(&path, lines.join("\n")).unwrap();
    match harness::validate_outage(dir.path(), 100, 7) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("{other:?}"),
    }
}
