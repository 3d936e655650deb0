//! Command-line verbs. Exit codes: 0 success, 1 configuration error,
//! 2 runtime failure (including a sweep with failed rows).

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sram_mcmc::gmm::LutTable;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::output;
use crate::sweep::{self, SweepRow, TraceSink};

/// Grid size for the LUT error scan.
pub const LUT_SCAN_POINTS: usize = 100_000;

#[derive(Debug, Parser)]
#[command(
    name = "sram-mcmc",
    version,
    about = "MCMC sampling on a modeled in-SRAM datapath"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the base point (sweep axes ignored).
    Run(Common),
    /// Run every sweep point and replicate.
    Sweep(Common),
    /// Check a configuration document without running anything.
    Validate(Common),
    /// Measure the worst-case LUT error for the configured table.
    CalibrateLut(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Configuration document (TOML). Defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides sweep.base_seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides output.path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides sweep.replicates (`run` defaults to 1).
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Also write per-row trace, trajectory and ground-truth files.
    #[arg(long)]
    pub emit_trace: bool,
}

impl Common {
    pub fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_path(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.sweep.base_seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output.path = out.clone();
        }
        if let Some(r) = self.replicates {
            cfg.sweep.replicates = r;
        }
        cfg.output.emit_trace |= self.emit_trace;
        Ok(cfg)
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(args) => {
            let mut cfg = args.load()?;
            cfg.sweep.axes.clear();
            if args.replicates.is_none() {
                cfg.sweep.replicates = 1;
            }
            run_and_write(&cfg)
        }
        Command::Sweep(args) => run_and_write(&args.load()?),
        Command::Validate(args) => {
            let cfg = args.load()?;
            cfg.validate()?;
            let points = cfg.points()?.len();
            println!(
                "ok: {points} point(s) x {} replicate(s) = {} row(s); config_sha256 {}",
                cfg.sweep.replicates,
                points * cfg.sweep.replicates,
                cfg.hash()
            );
            Ok(())
        }
        Command::CalibrateLut(args) => {
            let cfg = args.load()?;
            let lut = LutTable::new(cfg.hardware.lut).map_err(HarnessError::from_config)?;
            let err = lut.max_abs_error(LUT_SCAN_POINTS);
            let c = lut.config();
            println!(
                "lut: [{}, {}] x {} entries, {} interpolation",
                c.x_lo, c.x_hi, c.entries, c.interpolation
            );
            println!(
                "max_abs_error over {LUT_SCAN_POINTS} points on [{}, 0]: {err:e}",
                c.x_lo - 1.0
            );
            Ok(())
        }
    }
}

fn run_and_write(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate()?;
    let path = &cfg.output.path;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| HarnessError::Runtime(format!("{}: {e}", dir.display())))?;
    }
    let file = File::create(path)
        .map_err(|e| HarnessError::Runtime(format!("{}: {e}", path.display())))?;
    let sink = TraceSink {
        results_path: cfg.output.emit_trace.then_some(path.as_path()),
    };
    let rows = sweep::run_sweep(cfg, BufWriter::new(file), sink)?;
    let summary = sweep::summarize(&rows);
    let summary_path = output::sibling(path, "summary.csv");
    output::write_summary(BufWriter::new(File::create(&summary_path)?), cfg, &summary)?;
    report(&rows, path, &summary_path)
}

fn report(rows: &[SweepRow], path: &std::path::Path, summary: &std::path::Path) -> Result<()> {
    let failed: Vec<&SweepRow> = rows.iter().filter(|r| r.outcome.is_err()).collect();
    eprintln!(
        "wrote {} row(s) to {} and summary to {}",
        rows.len(),
        path.display(),
        summary.display()
    );
    match failed.first() {
        None => Ok(()),
        Some(first) => Err(HarnessError::Runtime(format!(
            "{} of {} row(s) failed; first: row {}: {}",
            failed.len(),
            rows.len(),
            first.row,
            first.outcome.as_ref().err().map_or("", String::as_str)
        ))),
    }
}
