use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{DropSeeds, ExperimentConfig, Variant};
use super::solution::write_beamformers_csv;
use crate::ao::{self, AoResult, EnergySplit, Evaluation};
use crate::chance::{write_outage_csv, OutageRow};
use crate::channel::write_channels_csv;
use crate::error::{Error, Result};
use crate::instance::ConstraintReport;
use crate::io::{sha256_hex, write_file};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHANNELS_FILE: &str = "channels.csv";
pub const BEAMFORMERS_FILE: &str = "beamformers.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const INNER_TRACE_FILE: &str = "inner_trace.csv";
pub const OUTAGE_FILE: &str = "outage.csv";
pub const SOLUTION_FILE: &str = "solution.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Everything needed to regenerate the outputs of a run or sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub drops: Vec<DropSeeds>,
    pub wall_time_s: f64,
    /// In write order; the manifest itself is not listed.
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.into(),
            line: e.line() as u64,
            msg: e.to_string(),
        })
    }

    pub fn checksum(&self, name: &str) -> Option<&str> {
        self.outputs.iter().find(|o| o.name == name).map(|o| o.sha256.as_str())
    }
}

/// Collects output files in memory order and records their checksums.
pub(crate) struct OutputWriter {
    dir: PathBuf,
    pub(crate) files: Vec<OutputFile>,
}

impl OutputWriter {
    /// Fails when `dir` is not an existing directory.
    pub(crate) fn new(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::io(
                dir,
                std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
            ));
        }
        Ok(OutputWriter {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub(crate) fn emit(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_file(&self.dir.join(name), bytes)?;
        self.files.push(OutputFile {
            name: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub(crate) fn finish(self, command: &str, config: &ExperimentConfig, drops: Vec<DropSeeds>, started: Instant) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            drops,
            wall_time_s: started.elapsed().as_secs_f64(),
            outputs: self.files,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Output(format!("manifest: {e}")))?;
        let path = self.dir.join(MANIFEST_FILE);
        write_file(&path, text.as_bytes())?;
        Ok(manifest)
    }
}

/// Headline numbers of a single run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub variant: Variant,
    pub tau: f64,
    pub lower_bound_rate_nats: f64,
    pub lower_bound_rate_bits: f64,
    pub mc_avg_true_rate_nats: f64,
    pub mc_avg_true_rate_bits: f64,
    pub outage: Vec<f64>,
    pub energy_split: Vec<EnergySplit>,
    pub constraints: ConstraintReport,
    /// `λ₂/λ₁` of each user's energy covariance.
    pub rank_ratios: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
}

impl SolutionSummary {
    pub fn new(variant: Variant, result: &AoResult, eval: &Evaluation) -> Self {
        let ln2 = std::f64::consts::LN_2;
        SolutionSummary {
            variant,
            tau: result.beamformers.tau,
            lower_bound_rate_nats: result.lower_bound_rate,
            lower_bound_rate_bits: result.lower_bound_rate / ln2,
            mc_avg_true_rate_nats: eval.mc_avg_true_rate,
            mc_avg_true_rate_bits: eval.mc_avg_true_rate / ln2,
            outage: eval.outage.iter().map(|o| o.probability()).collect(),
            energy_split: eval.energy_split.clone(),
            constraints: result.constraints.clone(),
            rank_ratios: result.energy_vectors.iter().map(|e| e.ratio).collect(),
            outer_iterations: result.trace.outer.len(),
            converged: result.trace.converged,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SingleRun {
    pub result: AoResult,
    pub evaluation: Evaluation,
    pub summary: SolutionSummary,
    pub manifest: RunManifest,
}

fn to_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Solves drop `cfg.drop` with `cfg.variant` and writes the channel
/// realization, traces, beamformers, outage estimates, a solution summary
/// and the manifest into `cfg.output_dir`.
pub fn run_single(cfg: &ExperimentConfig) -> Result<SingleRun> {
    let started = Instant::now();
    cfg.validate()?;
    let mut out = OutputWriter::new(&cfg.output_dir)?;
    let seeds = DropSeeds::new(cfg.seed, cfg.drop);
    let inst = cfg.instance(&seeds, cfg.variant)?;
    let result = ao::run_ao(&inst, &cfg.ao_config())?;
    let evaluation = ao::evaluate_solution(&inst, &result.beamformers, cfg.n_mc, seeds.monte_carlo)?;
    let summary = SolutionSummary::new(cfg.variant, &result, &evaluation);

    out.emit(CHANNELS_FILE, &to_bytes(|b| write_channels_csv(&inst.channels, b))?)?;
    out.emit(TRACE_FILE, &to_bytes(|b| result.trace.write_csv(b))?)?;
    out.emit(INNER_TRACE_FILE, &to_bytes(|b| result.trace.write_inner_csv(b))?)?;
    let vectors: Vec<_> = result.energy_vectors.iter().map(|e| e.vector.clone()).collect();
    out.emit(BEAMFORMERS_FILE, &to_bytes(|b| write_beamformers_csv(&result.beamformers, &vectors, b))?)?;
    let rows: Vec<OutageRow> = evaluation
        .outage
        .iter()
        .zip(&inst.reqs)
        .enumerate()
        .map(|(k, (o, r))| OutageRow::new(k, r.theta, o))
        .collect();
    out.emit(OUTAGE_FILE, &to_bytes(|b| write_outage_csv(&rows, b))?)?;
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Output(format!("solution summary: {e}")))?;
    out.emit(SOLUTION_FILE, json.as_bytes())?;
    let manifest = out.finish("run", cfg, vec![seeds], started)?;
    Ok(SingleRun {
        result,
        evaluation,
        summary,
        manifest,
    })
}
