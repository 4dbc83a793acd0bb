//! Experiment plumbing: TOML configuration, single runs with full artifact
//! dumps, parameter sweeps over channel drops, and outage validation of
//! stored solutions.
//!
//! Every output file is listed with its SHA-256 in a `manifest.json` next to
//! it. Given the manifest's configuration, the outputs are reproduced byte
//! for byte.

mod config;
mod run;
mod solution;
mod sweep;
mod validate;

pub use config::{DropSeeds, ExperimentConfig, SweepAxis, Variant, CONFIG_TEMPLATE};
pub use run::{
    run_single, OutputFile, RunManifest, SingleRun, SolutionSummary, BEAMFORMERS_FILE, CHANNELS_FILE,
    INNER_TRACE_FILE, MANIFEST_FILE, OUTAGE_FILE, SOLUTION_FILE, TRACE_FILE,
};
pub use solution::{load_beamformers_csv, read_beamformers_csv, write_beamformers_csv, BEAMFORMER_CSV_HEADER};
pub use sweep::{
    mean_std, run_sweep, summarize, sweep_rows, sweep_variants, write_rows_csv, write_summary_csv, RowStatus,
    SweepOutput, SweepRow, SweepSummary, SWEEP_ROWS_CSV_HEADER, SWEEP_ROWS_FILE, SWEEP_SUMMARY_CSV_HEADER,
    SWEEP_SUMMARY_FILE,
};
pub use validate::{validate_outage, ValidationReport};
