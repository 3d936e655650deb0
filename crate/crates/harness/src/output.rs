//! Result files.
//!
//! The results CSV starts with `#` metadata lines followed by a header row
//! with the columns of [`RESULT_COLUMNS`], in that order. Failed rows carry
//! `failed: <message>` in `status` and leave every metric blank.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sram_mcmc::metrics::ground_truth_distribution;
use sram_mcmc::metrics::MAX_JOINT_DIMENSION;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::sweep::{self, PointRun, PointSummary, SweepRow};

pub const RESULT_COLUMNS: &[&str] = &[
    "row",
    "point",
    "replicate",
    "seed",
    "status",
    // model
    "model_source",
    "distance",
    "dimension",
    "mixtures",
    "generator_seed",
    // chain and proposal
    "arithmetic",
    "total_samples",
    "burn_in",
    "refresh_period",
    "proposal_kind",
    "step_scale",
    // hardware
    "dac_bits",
    "adc_bits",
    "weight_bits",
    "operand_range",
    "rows",
    "noise_sigma_norm",
    "dac_ref_current_na",
    "clm_epsilon",
    "rng_bias",
    "rng_source",
    "frozen_mismatch",
    "lut_x_lo",
    "lut_x_hi",
    "lut_entries",
    "lut_interpolation",
    // perf inputs
    "e_sram",
    "e_dac",
    "e_adc",
    "adc_conversions_per_iteration",
    "cycles_per_iteration",
    "clock_frequency",
    // grid
    "grid_bins",
    "pseudo_count",
    // metrics
    "kl_joint",
    "kl_marginal",
    "acceptance_rate",
    "samples",
    "mean_avg",
    "var_avg",
    // perf report
    "power_w",
    "sram_w",
    "dac_w",
    "adc_w",
    "adc_comparator_w",
    "sram_fraction",
    "dac_fraction",
    "adc_fraction",
    "iterations",
    "total_cycles",
    "wall_clock_s",
    "samples_per_kcycle",
    "perf_calibration",
];

pub const SUMMARY_COLUMNS: &[&str] = &[
    "point",
    "assignments",
    "replicates",
    "failed",
    "kl_mean",
    "kl_std",
    "kl_marginal_mean",
    "kl_marginal_std",
    "acceptance_mean",
    "acceptance_std",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// The CSV record for one row; see [`RESULT_COLUMNS`].
pub fn result_record(row: &SweepRow, cfg: &ExperimentConfig) -> Vec<String> {
    let (m, h, c, p, pf) = (
        &cfg.model,
        &cfg.hardware,
        &cfg.chain,
        &cfg.proposal,
        &cfg.perf,
    );
    let inline = m.inline.as_ref();
    let dimension = inline.map_or(Some(m.dimension), |g| g.means.first().map(Vec::len));
    let mixtures = inline.map_or(m.mixtures, |g| g.weights.len());
    let status = match &row.outcome {
        Ok(_) => "ok".to_string(),
        Err(e) => format!("failed: {e}"),
    };
    let mut rec = vec![
        row.row.to_string(),
        row.point.to_string(),
        row.replicate.to_string(),
        row.seed.to_string(),
        status,
        sweep::model_source(m).to_string(),
        if inline.is_some() {
            String::new()
        } else {
            m.distance.to_string()
        },
        opt(dimension),
        mixtures.to_string(),
        m.generator_seed.to_string(),
        c.arithmetic.to_string(),
        c.total_samples.to_string(),
        c.burn_in.to_string(),
        c.refresh_period.to_string(),
        p.kind.to_string(),
        p.step_scale.to_string(),
        h.dac_bits.to_string(),
        h.adc_bits.to_string(),
        h.weight_bits.to_string(),
        h.operand_range.to_string(),
        opt(dimension.map(|n| h.active_rows(n))),
        h.noise_sigma_norm.to_string(),
        h.dac_ref_current_na.to_string(),
        h.clm_epsilon.to_string(),
        h.rng_bias.to_string(),
        h.rng_source.to_string(),
        h.frozen_mismatch.to_string(),
        h.lut.x_lo.to_string(),
        h.lut.x_hi.to_string(),
        h.lut.entries.to_string(),
        h.lut.interpolation.to_string(),
        pf.e_sram.to_string(),
        pf.e_dac.to_string(),
        pf.e_adc.to_string(),
        pf.adc_conversions_per_iteration.to_string(),
        pf.cycles_per_iteration.to_string(),
        pf.clock_frequency.to_string(),
        cfg.grid.bins.to_string(),
        cfg.grid.pseudo_count.to_string(),
    ];
    match &row.outcome {
        Ok(x) => {
            let (pw, cy) = (&x.perf.power, &x.perf.cycles);
            rec.extend([
                opt(x.kl_joint),
                x.kl_marginal.to_string(),
                x.acceptance_rate.to_string(),
                x.samples.to_string(),
                x.mean_avg.to_string(),
                x.var_avg.to_string(),
                pw.total_w.to_string(),
                pw.sram_w.to_string(),
                pw.dac_w.to_string(),
                pw.adc_w.to_string(),
                pw.adc_comparator_w.to_string(),
                pw.fractions[0].to_string(),
                pw.fractions[1].to_string(),
                pw.fractions[2].to_string(),
                cy.iterations.to_string(),
                cy.total_cycles.to_string(),
                cy.wall_clock_s.to_string(),
                cy.samples_per_kcycle.to_string(),
                calibration_label(x.perf.calibrated_default).to_string(),
            ]);
        }
        Err(_) => rec.resize(RESULT_COLUMNS.len(), String::new()),
    }
    debug_assert_eq!(rec.len(), RESULT_COLUMNS.len());
    rec
}

pub fn calibration_label(default: bool) -> &'static str {
    if default {
        "calibrated-default"
    } else {
        "custom"
    }
}

/// `#` lines describing how every row of the file was produced.
pub fn metadata_lines(cfg: &ExperimentConfig) -> Vec<String> {
    let bounds = match (&cfg.grid.lower, &cfg.grid.upper) {
        (Some(lo), Some(hi)) => format!("explicit lower={lo:?} upper={hi:?}"),
        _ => "min mean - 4 max sigma .. max mean + 4 max sigma per axis".to_string(),
    };
    let seeds = match cfg.sweep.seed_policy {
        crate::config::SeedPolicy::Row => "base_seed + row index",
        crate::config::SeedPolicy::Replicate => "base_seed + replicate index",
    };
    vec![
        format!(
            "# sram-mcmc-harness {} (sram-mcmc {})",
            env!("CARGO_PKG_VERSION"),
            sram_mcmc::VERSION
        ),
        format!("# config_sha256: {}", cfg.hash()),
        format!("# timestamp: {}", chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
        format!(
            "# kl: KL(truth || empirical), {} bins per axis, pseudo_count {}, bounds {bounds}; \
             kl_joint only for dimension <= {MAX_JOINT_DIMENSION}, kl_marginal is the mean of 1-D marginal KLs",
            cfg.grid.bins, cfg.grid.pseudo_count
        ),
        format!(
            "# seeds: base_seed {}, replicates {}, seed = {seeds}",
            cfg.sweep.base_seed, cfg.sweep.replicates
        ),
        "# perf: calibrated-default energies reproduce 91 uW at 1 GHz, 4 cycles/iteration, \
         5/13/82 % SRAM/DAC/ADC; bookkeeping, not circuit physics"
            .to_string(),
    ]
}

/// Streams result rows, flushing after each so a later failure never
/// truncates rows already written.
pub struct ResultsWriter<W: Write> {
    csv: csv::Writer<W>,
}

impl<W: Write> ResultsWriter<W> {
    pub fn new(mut out: W, cfg: &ExperimentConfig) -> Result<Self> {
        for line in metadata_lines(cfg) {
            writeln!(out, "{line}")?;
        }
        let mut csv = csv::Writer::from_writer(out);
        csv.write_record(RESULT_COLUMNS)?;
        csv.flush()?;
        Ok(Self { csv })
    }

    pub fn write_row(&mut self, record: &[String]) -> Result<()> {
        self.csv.write_record(record)?;
        self.csv.flush()?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.csv.flush()?;
        Ok(())
    }
}

pub fn write_summary<W: Write>(
    out: W,
    cfg: &ExperimentConfig,
    summary: &[PointSummary],
) -> Result<()> {
    let points = cfg.points()?;
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(SUMMARY_COLUMNS)?;
    for s in summary {
        let assignments = points[s.point]
            .assignments
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        csv.write_record([
            s.point.to_string(),
            assignments,
            s.replicates.to_string(),
            s.failed.to_string(),
            s.kl.0.to_string(),
            s.kl.1.to_string(),
            s.kl_marginal.0.to_string(),
            s.kl_marginal.1.to_string(),
            s.acceptance_rate.0.to_string(),
            s.acceptance_rate.1.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// `results.csv` -> `results.summary.csv` and friends.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(|| "results".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Prefix for the per-row files of `row`.
pub fn row_file_stem(results: &Path, row: usize) -> PathBuf {
    sibling(results, &format!("row{row}"))
}

/// Writes `<stem>.trace.csv`, `<stem>.trajectory.csv` and, for models of
/// dimension at most 3, `<stem>.truth.csv`.
pub fn emit_run_files(stem: &Path, run: &PointRun, trajectory_steps: usize) -> Result<()> {
    let with = |ext: &str| {
        let mut s = stem.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    let mut f = BufWriter::new(File::create(with(".trace.csv"))?);
    run.trace.write_csv(&mut f)?;
    f.flush()?;

    let mut f = BufWriter::new(File::create(with(".trajectory.csv"))?);
    write_trajectory(&mut f, run, trajectory_steps)?;
    f.flush()?;

    if run.model.dimension() <= MAX_JOINT_DIMENSION {
        let truth = ground_truth_distribution(&run.model, &run.grid)
            .map_err(crate::error::HarnessError::from_runtime)?;
        let mut f = BufWriter::new(File::create(with(".truth.csv"))?);
        truth.write_csv(&run.grid, &mut f)?;
        f.flush()?;
    }
    Ok(())
}

/// The first `steps` post-burn-in iterations: candidate, verdict and the
/// resulting position.
pub fn write_trajectory<W: Write>(mut out: W, run: &PointRun, steps: usize) -> std::io::Result<()> {
    let n = run.model.dimension();
    let mut header = vec!["step".to_string(), "t".to_string()];
    header.extend((0..n).map(|i| format!("cand{i}")));
    header.push("accepted".into());
    header.extend((0..n).map(|i| format!("x{i}")));
    writeln!(out, "{}", header.join(","))?;
    let segment = run
        .trace
        .iterations
        .iter()
        .filter(|r| r.t > run.trace.burn_in)
        .take(steps);
    for (k, r) in segment.enumerate() {
        let mut fields = vec![k.to_string(), r.t.to_string()];
        fields.extend(r.candidate.iter().map(f64::to_string));
        fields.push(u8::from(r.accepted).to_string());
        fields.extend(r.state.iter().map(f64::to_string));
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}
