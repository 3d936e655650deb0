//! Sweep execution: one chain per (point, replicate), rows written in order.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sram_mcmc::gmm::GmmModel;
use sram_mcmc::metrics::{self, GridSpec, KlMode, MAX_JOINT_DIMENSION};
use sram_mcmc::perf::{perf_report, PerfReport};
use sram_mcmc::sampler::{run_chain, Arithmetic, SampleTrace};

use crate::config::{ExperimentConfig, GridSection, ModelSection, SeedPolicy, SweepPoint};
use crate::error::{HarnessError, Result};
use crate::output;

/// Two-mixture family `mu1 = d(+1, -1, +1, ...)`, `mu2 = -mu1`, unit
/// variances, equal weights. Other mixture counts get equal weights and
/// means drawn uniformly from `[-d, d]` with `generator_seed`.
pub fn generate_model(
    distance: f64,
    dimension: usize,
    mixtures: usize,
    generator_seed: u64,
) -> Result<GmmModel> {
    if !(distance.is_finite() && distance > 0.0) {
        return Err(HarnessError::Config(format!(
            "model.distance must be > 0, got {distance}"
        )));
    }
    if dimension == 0 || mixtures == 0 {
        return Err(HarnessError::Config(
            "model.dimension and model.mixtures must be >= 1".into(),
        ));
    }
    if mixtures == 2 {
        return GmmModel::symmetric_pair(distance, dimension).map_err(HarnessError::from_config);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(generator_seed);
    let means = (0..mixtures)
        .map(|_| {
            (0..dimension)
                .map(|_| rng.random_range(-distance..=distance))
                .collect()
        })
        .collect();
    GmmModel::from_parts(
        vec![1.0 / mixtures as f64; mixtures],
        means,
        vec![vec![1.0; dimension]; mixtures],
    )
    .map_err(HarnessError::from_config)
}

pub fn build_model(m: &ModelSection) -> Result<GmmModel> {
    match &m.inline {
        Some(params) => GmmModel::new(params.clone()).map_err(HarnessError::from_config),
        None => generate_model(m.distance, m.dimension, m.mixtures, m.generator_seed),
    }
}

/// How the model of a row was obtained.
pub fn model_source(m: &ModelSection) -> &'static str {
    match (&m.inline, m.mixtures) {
        (Some(_), _) => "inline",
        (None, 2) => "symmetric-pair",
        (None, _) => "random-means",
    }
}

pub fn grid_for(section: &GridSection, model: &GmmModel) -> Result<GridSpec> {
    let mut grid = GridSpec::for_model(model, section.bins, section.pseudo_count);
    if let (Some(lo), Some(hi)) = (&section.lower, &section.upper) {
        grid.lower = lo.clone();
        grid.upper = hi.clone();
    }
    grid.validate().map_err(HarnessError::from_config)?;
    Ok(grid)
}

/// Everything measured on one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Absent above [`MAX_JOINT_DIMENSION`].
    pub kl_joint: Option<f64>,
    pub kl_marginal: f64,
    pub acceptance_rate: f64,
    pub samples: usize,
    /// Per-coordinate sample mean and variance, averaged over coordinates.
    pub mean_avg: f64,
    pub var_avg: f64,
    pub perf: PerfReport,
}

impl Metrics {
    /// The KL the sweep trends are judged on: joint where available.
    pub fn kl(&self) -> f64 {
        self.kl_joint.unwrap_or(self.kl_marginal)
    }
}

pub struct PointRun {
    pub model: GmmModel,
    pub grid: GridSpec,
    pub trace: SampleTrace,
    pub metrics: Metrics,
}

/// Run one chain of `cfg` (sweep axes ignored) with `seed`.
pub fn run_point(cfg: &ExperimentConfig, seed: u64) -> Result<PointRun> {
    let model = build_model(&cfg.model)?;
    let grid = grid_for(&cfg.grid, &model)?;
    let trace = run_chain(
        &model,
        &cfg.chain.with_seed(seed),
        &cfg.proposal,
        &cfg.hardware,
    )
    .map_err(HarnessError::from_runtime)?;
    let kl_joint = if model.dimension() <= MAX_JOINT_DIMENSION {
        Some(
            metrics::marginal_kl(&trace.samples, &model, &grid, KlMode::Joint)
                .map_err(HarnessError::from_runtime)?,
        )
    } else {
        None
    };
    let kl_marginal = metrics::marginal_kl(&trace.samples, &model, &grid, KlMode::Marginal1d)
        .map_err(HarnessError::from_runtime)?;
    let (mean, var) =
        metrics::coordinate_moments(&trace.samples).map_err(HarnessError::from_runtime)?;
    let n = mean.len() as f64;
    let perf = perf_report(&trace, &cfg.perf).map_err(HarnessError::from_runtime)?;
    let metrics = Metrics {
        kl_joint,
        kl_marginal,
        acceptance_rate: trace.acceptance_rate(),
        samples: trace.samples.len(),
        mean_avg: mean.iter().sum::<f64>() / n,
        var_avg: var.iter().sum::<f64>() / n,
        perf,
    };
    Ok(PointRun {
        model,
        grid,
        trace,
        metrics,
    })
}

/// One (point, replicate) result.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub row: usize,
    pub point: usize,
    pub replicate: usize,
    pub seed: u64,
    pub outcome: std::result::Result<Metrics, String>,
}

pub fn seed_for(cfg: &ExperimentConfig, row: usize, replicate: usize) -> u64 {
    let offset = match cfg.sweep.seed_policy {
        SeedPolicy::Row => row,
        SeedPolicy::Replicate => replicate,
    };
    cfg.sweep.base_seed.wrapping_add(offset as u64)
}

/// Where per-row trace files go, if anywhere.
#[derive(Debug, Clone, Default)]
pub struct TraceSink<'a> {
    pub results_path: Option<&'a Path>,
}

/// Run every (point, replicate) concurrently and write the results CSV to
/// `out` in row order as rows complete. Rows are ordered point-major with
/// replicates innermost. A failing row is written with its error in the
/// `status` column and does not stop the sweep.
pub fn run_sweep<W: Write>(
    cfg: &ExperimentConfig,
    out: W,
    traces: TraceSink<'_>,
) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let points = cfg.points()?;
    let reps = cfg.sweep.replicates;
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..reps).map(move |r| (p, r)))
        .collect();
    let mut writer = output::ResultsWriter::new(out, cfg)?;
    let cancel = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(SweepRow, Vec<String>)>();
    let mut rows = Vec::with_capacity(jobs.len());
    let mut write_err = None;

    std::thread::scope(|s| {
        let points = &points;
        let cancel = &cancel;
        let jobs = &jobs;
        s.spawn(move || {
            jobs.par_iter()
                .enumerate()
                .for_each_with(tx, |tx, (row, &(p, r))| {
                    if cancel.load(Ordering::Relaxed) {
                        return;
                    }
                    let done = run_row(cfg, &points[p], row, r, &traces);
                    let _ = tx.send(done);
                });
        });
        let mut pending = BTreeMap::new();
        for (row, record) in rx {
            pending.insert(row.row, (row, record));
            while let Some((row, record)) = pending.remove(&rows.len()) {
                if let Err(e) = writer.write_row(&record) {
                    cancel.store(true, Ordering::Relaxed);
                    write_err = Some(e);
                    return;
                }
                rows.push(row);
            }
        }
    });
    if let Some(e) = write_err {
        return Err(e);
    }
    writer.finish()?;
    Ok(rows)
}

fn run_row(
    cfg: &ExperimentConfig,
    point: &SweepPoint,
    row: usize,
    replicate: usize,
    traces: &TraceSink<'_>,
) -> (SweepRow, Vec<String>) {
    let seed = seed_for(cfg, row, replicate);
    let outcome = run_point(&point.config, seed).and_then(|run| {
        if let Some(path) = traces.results_path {
            output::emit_run_files(
                &output::row_file_stem(path, row),
                &run,
                point.config.output.trajectory_steps,
            )?;
        }
        Ok(run.metrics)
    });
    let row = SweepRow {
        row,
        point: point.index,
        replicate,
        seed,
        outcome: outcome.map_err(|e| e.to_string()),
    };
    let record = output::result_record(&row, &point.config);
    (row, record)
}

/// Mean and sample standard deviation; std is 0 for fewer than two values.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-point replicate statistics of successful rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub point: usize,
    pub replicates: usize,
    pub failed: usize,
    pub kl: (f64, f64),
    pub kl_marginal: (f64, f64),
    pub acceptance_rate: (f64, f64),
}

pub fn summarize(rows: &[SweepRow]) -> Vec<PointSummary> {
    let mut by_point: BTreeMap<usize, Vec<&SweepRow>> = BTreeMap::new();
    for r in rows {
        by_point.entry(r.point).or_default().push(r);
    }
    by_point
        .into_iter()
        .map(|(point, rs)| {
            let ok: Vec<&Metrics> = rs.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
            let col =
                |f: fn(&Metrics) -> f64| mean_std(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
            PointSummary {
                point,
                replicates: rs.len(),
                failed: rs.len() - ok.len(),
                kl: col(Metrics::kl),
                kl_marginal: col(|m| m.kl_marginal),
                acceptance_rate: col(|m| m.acceptance_rate),
            }
        })
        .collect()
}

/// Mean KL of the exact-arithmetic chain at the base point, over the same
/// seeds the sweep would use for its first point.
pub fn exact_baseline(cfg: &ExperimentConfig) -> Result<(f64, f64)> {
    let mut base = cfg.clone();
    base.chain.arithmetic = Arithmetic::Exact;
    let kls = (0..cfg.sweep.replicates)
        .into_par_iter()
        .map(|r| run_point(&base, seed_for(cfg, r, r)).map(|p| p.metrics.kl()))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_std(&kls))
}
