use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DropSeeds, ExperimentConfig, SweepAxis, Variant};
use super::run::{OutputWriter, RunManifest};
use crate::ao;
use crate::error::{Error, Result};

pub const SWEEP_ROWS_FILE: &str = "sweep_rows.csv";
pub const SWEEP_SUMMARY_FILE: &str = "sweep_summary.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Infeasible,
    /// Any other failure (solver breakdown); the message column says which.
    Error,
}

impl RowStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Infeasible => "infeasible",
            RowStatus::Error => "error",
        }
    }
}

/// One (sweep value, drop, variant) solve. Rates of drops that were not
/// solved are 0: the drop cannot be served. Other quantities are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep_axis: SweepAxis,
    pub sweep_value: f64,
    pub drop: usize,
    pub variant: Variant,
    pub status: RowStatus,
    pub tau: Option<f64>,
    pub lower_bound_rate: f64,
    pub mc_rate: f64,
    pub max_outage: Option<f64>,
    /// `Σ_l τ·Tr(A_l S A_l^H)`, watts.
    pub energy_power: Option<f64>,
    /// `Σ_l (1−τ)·Σ_k ‖A_l v_k‖²`, watts.
    pub info_power: Option<f64>,
    pub outer_iterations: Option<usize>,
    pub converged: Option<bool>,
    pub max_violation: Option<f64>,
    /// Largest `λ₂/λ₁` over the users' energy covariances.
    pub max_rank_ratio: Option<f64>,
    pub message: String,
}

impl SweepRow {
    pub fn solved(&self) -> bool {
        self.status == RowStatus::Ok
    }
}

pub const SWEEP_ROWS_CSV_HEADER: [&str; 18] = [
    "sweep_axis",
    "sweep_value",
    "drop",
    "variant",
    "status",
    "tau",
    "lower_bound_rate_nats",
    "lower_bound_rate_bits",
    "mc_rate_nats",
    "mc_rate_bits",
    "max_outage",
    "energy_power_w",
    "info_power_w",
    "outer_iterations",
    "converged",
    "max_violation",
    "max_rank_ratio",
    "message",
];

/// Statistics of one (sweep value, variant) cell. Rate means run over all
/// drops; the other means only over solved drops. Standard deviations are
/// sample deviations (`n − 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub sweep_axis: SweepAxis,
    pub sweep_value: f64,
    pub variant: Variant,
    pub n_drops: usize,
    pub n_solved: usize,
    pub mean_rate: Option<f64>,
    pub std_rate: Option<f64>,
    pub mean_mc_rate: Option<f64>,
    pub std_mc_rate: Option<f64>,
    pub mean_tau: Option<f64>,
    pub std_tau: Option<f64>,
    pub mean_energy_power: Option<f64>,
    pub mean_info_power: Option<f64>,
    pub max_outage: Option<f64>,
}

pub const SWEEP_SUMMARY_CSV_HEADER: [&str; 16] = [
    "sweep_axis",
    "sweep_value",
    "variant",
    "n_drops",
    "n_solved",
    "mean_rate_nats",
    "std_rate_nats",
    "mean_rate_bits",
    "std_rate_bits",
    "mean_mc_rate_nats",
    "std_mc_rate_nats",
    "mean_tau",
    "std_tau",
    "mean_energy_power_w",
    "mean_info_power_w",
    "max_outage",
];

/// Mean and sample standard deviation; `None` where undefined.
pub fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (Some(mean), None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

/// Variants solved on every drop.
pub fn sweep_variants(cfg: &ExperimentConfig) -> Vec<Variant> {
    let mut v = vec![cfg.variant];
    if cfg.baseline && cfg.variant != Variant::Deterministic {
        v.push(Variant::Deterministic);
    }
    v
}

fn solve_row(cfg: &ExperimentConfig, value: f64, seeds: DropSeeds, variant: Variant) -> Result<SweepRow> {
    let at = cfg.at(cfg.sweep_axis, value)?;
    let inst = at.instance(&seeds, variant)?;
    let mut row = SweepRow {
        sweep_axis: cfg.sweep_axis,
        sweep_value: value,
        drop: seeds.drop,
        variant,
        status: RowStatus::Ok,
        tau: None,
        lower_bound_rate: 0.0,
        mc_rate: 0.0,
        max_outage: None,
        energy_power: None,
        info_power: None,
        outer_iterations: None,
        converged: None,
        max_violation: None,
        max_rank_ratio: None,
        message: String::new(),
    };
    let solved = ao::run_ao(&inst, &at.ao_config())
        .and_then(|r| ao::evaluate_solution(&inst, &r.beamformers, at.n_mc, seeds.monte_carlo).map(|e| (r, e)));
    match solved {
        Ok((r, e)) => {
            row.tau = Some(r.beamformers.tau);
            row.lower_bound_rate = r.lower_bound_rate;
            row.mc_rate = e.mc_avg_true_rate;
            row.max_outage = e.outage.iter().map(|o| o.probability()).reduce(f64::max);
            row.energy_power = Some(e.energy_split.iter().map(|s| s.energy).sum());
            row.info_power = Some(e.energy_split.iter().map(|s| s.information).sum());
            row.outer_iterations = Some(r.trace.outer.len());
            row.converged = Some(r.trace.converged);
            row.max_violation = Some(r.constraints.max_violation());
            row.max_rank_ratio = r.energy_vectors.iter().map(|v| v.ratio).reduce(f64::max);
        }
        Err(e) => {
            row.status = if e.is_infeasible() {
                RowStatus::Infeasible
            } else {
                log::warn!("drop {} at {} = {value}: {e}", seeds.drop, cfg.sweep_axis.as_str());
                RowStatus::Error
            };
            row.message = e.to_string();
        }
    }
    Ok(row)
}

/// Solves every (sweep value, drop, variant) combination. Drops run on the
/// rayon pool; rows come back in (value, drop, variant) order.
pub fn sweep_rows(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let variants = sweep_variants(cfg);
    let jobs: Vec<(f64, DropSeeds, Variant)> = cfg
        .sweep_values
        .iter()
        .flat_map(|&v| {
            let variants = &variants;
            (0..cfg.n_drops).flat_map(move |d| variants.iter().map(move |&var| (v, DropSeeds::new(cfg.seed, d), var)))
        })
        .collect();
    jobs.into_par_iter()
        .map(|(v, seeds, var)| solve_row(cfg, v, seeds, var))
        .collect()
}

/// Groups rows by (sweep value, variant) in first-appearance order.
pub fn summarize(rows: &[SweepRow]) -> Vec<SweepSummary> {
    let mut keys: Vec<(SweepAxis, f64, Variant)> = Vec::new();
    for r in rows {
        let key = (r.sweep_axis, r.sweep_value, r.variant);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(axis, value, variant)| {
            let cell: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.sweep_axis == axis && r.sweep_value == value && r.variant == variant)
                .collect();
            let solved: Vec<&&SweepRow> = cell.iter().filter(|r| r.solved()).collect();
            let all = |f: fn(&SweepRow) -> f64| cell.iter().map(|r| f(r)).collect::<Vec<_>>();
            let some = |f: fn(&SweepRow) -> Option<f64>| solved.iter().filter_map(|r| f(r)).collect::<Vec<_>>();
            let (mean_rate, std_rate) = mean_std(&all(|r| r.lower_bound_rate));
            let (mean_mc_rate, std_mc_rate) = mean_std(&all(|r| r.mc_rate));
            let (mean_tau, std_tau) = mean_std(&some(|r| r.tau));
            SweepSummary {
                sweep_axis: axis,
                sweep_value: value,
                variant,
                n_drops: cell.len(),
                n_solved: solved.len(),
                mean_rate,
                std_rate,
                mean_mc_rate,
                std_mc_rate,
                mean_tau,
                std_tau,
                mean_energy_power: mean_std(&some(|r| r.energy_power)).0,
                mean_info_power: mean_std(&some(|r| r.info_power)).0,
                max_outage: some(|r| r.max_outage).into_iter().reduce(f64::max),
            }
        })
        .collect()
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn bits(x: f64) -> f64 {
    x / std::f64::consts::LN_2
}

pub fn write_rows_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Output(format!("sweep rows csv: {e}"));
    w.write_record(SWEEP_ROWS_CSV_HEADER).map_err(err)?;
    for r in rows {
        w.write_record([
            r.sweep_axis.as_str().to_string(),
            num(r.sweep_value),
            r.drop.to_string(),
            r.variant.as_str().to_string(),
            r.status.as_str().to_string(),
            opt(r.tau),
            num(r.lower_bound_rate),
            num(bits(r.lower_bound_rate)),
            num(r.mc_rate),
            num(bits(r.mc_rate)),
            opt(r.max_outage),
            opt(r.energy_power),
            opt(r.info_power),
            r.outer_iterations.map(|n| n.to_string()).unwrap_or_default(),
            r.converged.map(|c| c.to_string()).unwrap_or_default(),
            opt(r.max_violation),
            opt(r.max_rank_ratio),
            r.message.clone(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Output(format!("sweep rows csv: {e}")))?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(summary: &[SweepSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Output(format!("sweep summary csv: {e}"));
    w.write_record(SWEEP_SUMMARY_CSV_HEADER).map_err(err)?;
    for s in summary {
        w.write_record([
            s.sweep_axis.as_str().to_string(),
            num(s.sweep_value),
            s.variant.as_str().to_string(),
            s.n_drops.to_string(),
            s.n_solved.to_string(),
            opt(s.mean_rate),
            opt(s.std_rate),
            opt(s.mean_rate.map(bits)),
            opt(s.std_rate.map(bits)),
            opt(s.mean_mc_rate),
            opt(s.std_mc_rate),
            opt(s.mean_tau),
            opt(s.std_tau),
            opt(s.mean_energy_power),
            opt(s.mean_info_power),
            opt(s.max_outage),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Output(format!("sweep summary csv: {e}")))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SweepSummary>,
    pub manifest: RunManifest,
}

/// Runs the sweep and writes raw rows, the per-cell summary and the
/// manifest into `cfg.output_dir`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    let started = Instant::now();
    cfg.validate()?;
    let mut out = OutputWriter::new(&cfg.output_dir)?;
    let rows = sweep_rows(cfg)?;
    let summary = summarize(&rows);
    let mut buf = Vec::new();
    write_rows_csv(&rows, &mut buf)?;
    out.emit(SWEEP_ROWS_FILE, &buf)?;
    let mut buf = Vec::new();
    write_summary_csv(&summary, &mut buf)?;
    out.emit(SWEEP_SUMMARY_FILE, &buf)?;
    let drops = (0..cfg.n_drops).map(|d| DropSeeds::new(cfg.seed, d)).collect();
    let manifest = out.finish("sweep", cfg, drops, started)?;
    Ok(SweepOutput { rows, summary, manifest })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_hand_values() {
        assert_eq!(mean_std(&[]), (None, None));
        assert_eq!(mean_std(&[2.0]), (Some(2.0), None));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, Some(2.5));
        assert!((s.unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn baseline_added_once() {
        let mut c = ExperimentConfig::default();
        assert_eq!(sweep_variants(&c), vec![Variant::Chance, Variant::Deterministic]);
        c.variant = Variant::Deterministic;
        assert_eq!(sweep_variants(&c), vec![Variant::Deterministic]);
        c.baseline = false;
        c.variant = Variant::Nominal;
        assert_eq!(sweep_variants(&c), vec![Variant::Nominal]);
    }
}
