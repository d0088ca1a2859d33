use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use thermolattice::experiments::{run_and_write, ExperimentConfig, Kind};
use thermolattice::Error;

/// Run a thermalization experiment described by a JSON config.
#[derive(Debug, Parser)]
#[command(name = "thermolattice", version)]
struct Cli {
    /// typicality, gaps, equivalence, dynamics, ising or eth
    kind: String,
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn load(cli: &Cli) -> thermolattice::Result<ExperimentConfig> {
    let kind = Kind::parse(&cli.kind)?;
    let mut cfg = ExperimentConfig::from_file(&cli.config)?;
    match cfg.kind {
        Some(k) if k != kind => {
            return Err(Error::Config(format!("config is for {}, not {}", k.name(), kind.name())));
        }
        _ => cfg.kind = Some(kind),
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    if let Some(s) = cli.samples {
        cfg.samples = s;
    }
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    Ok(cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json(_) => 2,
        Error::Infeasible { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load(&cli).and_then(|cfg| run_and_write(&cfg).map(|out| (cfg, out)));
    match result {
        Ok((cfg, out)) => {
            for f in &out.flags {
                eprintln!("flag: {f}");
            }
            if out.files.files.is_empty() {
                println!("nothing to run");
            } else {
                println!("{} records, {} files in {}", out.records.len(), out.files.files.len(), cfg.output_dir.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
