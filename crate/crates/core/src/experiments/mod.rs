//! Config-driven sweeps with CSV, JSON and SVG output.
//!
//! A run validates its [`ExperimentConfig`], executes independent tasks on a
//! rayon pool of the requested size, sorts the records and lays out:
//!
//! - `<kind>_n<n>.csv`, one per chain length (for `ising`, per bath size);
//! - kind-specific data files such as gap histograms or the `f(m)` curve;
//! - `<kind>.svg` when plots are enabled;
//! - `<kind>_summary.json` with the config echo, a SHA-256 content hash of
//!   the files above and per-`n` aggregates.
//!
//! Every random draw comes from a stream labelled by `(kind, n, sample)`, and
//! the summary echo leaves out `workers` and `output_dir`, so output bytes do
//! not depend on the worker count or destination.

mod config;
mod output;
mod runners;
pub mod svg;

use std::collections::BTreeMap;

pub use config::{DeltaSchedule, ExperimentConfig, IsingParams, Kind, ModelInstance, ModelSpec, SamplerKind};
pub use output::{aggregates, mean_std, records_to_csv, ExperimentRecord, RunFiles, BASE_COLUMNS};
pub use runners::{
    eigenstate_indices, flat_window_state, local_gibbs, locality_violated, run_dynamics, run_equivalence, run_eth, run_gapstats,
    run_ising, run_typicality, triangle_weight, Partial,
};

use crate::error::{Error, Result};

/// Records and files of a finished run.
#[derive(Debug)]
pub struct RunOutput {
    pub records: Vec<ExperimentRecord>,
    pub flags: Vec<String>,
    pub files: RunFiles,
}

impl RunOutput {
    pub fn summary_name(kind: Kind) -> String {
        format!("{}_summary.json", kind.name())
    }
}

/// Runs the experiment without touching the filesystem.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let kind = config.kind()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let part = pool.install(|| match kind {
        Kind::Typicality => run_typicality(config),
        Kind::Gaps => run_gapstats(config),
        Kind::Equivalence => run_equivalence(config),
        Kind::Dynamics => run_dynamics(config),
        Kind::Ising => run_ising(config),
        Kind::Eth => run_eth(config),
    })?;
    let mut files = RunFiles::default();
    if part.records.is_empty() && part.files.is_empty() {
        return Ok(RunOutput { records: part.records, flags: part.flags, files });
    }
    let mut by_n: BTreeMap<usize, Vec<ExperimentRecord>> = BTreeMap::new();
    for r in &part.records {
        by_n.entry(r.n).or_default().push(r.clone());
    }
    for (n, rows) in &by_n {
        files.files.insert(format!("{}_n{n}.csv", kind.name()), records_to_csv(rows)?);
    }
    files.files.extend(part.files);
    if config.plots {
        files.files.extend(part.plots);
    }
    let mut echo = config.clone();
    echo.workers = None;
    echo.output_dir = Default::default();
    let summary = output::summary_json(&echo, &files, &part.records, &part.flags, part.notes)?;
    files.files.insert(RunOutput::summary_name(kind), summary);
    Ok(RunOutput { records: part.records, flags: part.flags, files })
}

/// [`run`], then writes the files into `config.output_dir`.
pub fn run_and_write(config: &ExperimentConfig) -> Result<RunOutput> {
    let out = run(config)?;
    if !out.files.files.is_empty() {
        out.files.write(&config.output_dir)?;
    }
    Ok(out)
}
