//! Sampling-fidelity metrics: gridded histograms, the discretized target,
//! KL divergence and Monte Carlo expectations over a trace.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::{log_density_exact, GmmModel};
use crate::sampler::SampleTrace;

const SUM_TOL: f64 = 1e-9;

/// Largest dimension accepted by joint-grid KL.
pub const MAX_JOINT_DIMENSION: usize = 3;

/// Axis-aligned regular grid with a per-cell pseudo-count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub bins: Vec<usize>,
    pub pseudo_count: f64,
}

impl GridSpec {
    /// Bounds `[min mu - 4 max sigma, max mu + 4 max sigma]` on every axis.
    pub fn for_model(model: &GmmModel, bins_per_dim: usize, pseudo_count: f64) -> Self {
        let n = model.dimension();
        let mut lower = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n);
        for i in 0..n {
            let mus = (0..model.num_mixtures()).map(|j| model.mean(j)[i]);
            let sig = (0..model.num_mixtures())
                .map(|j| model.stddev(j)[i])
                .fold(0.0f64, f64::max);
            let lo = mus.clone().fold(f64::INFINITY, f64::min);
            let hi = mus.fold(f64::NEG_INFINITY, f64::max);
            lower.push(lo - 4.0 * sig);
            upper.push(hi + 4.0 * sig);
        }
        Self {
            lower,
            upper,
            bins: vec![bins_per_dim; n],
            pseudo_count,
        }
    }

    pub fn dimension(&self) -> usize {
        self.bins.len()
    }

    pub fn total_cells(&self) -> usize {
        self.bins.iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.bins.len();
        if n == 0 || self.lower.len() != n || self.upper.len() != n {
            return Err(Error::GridMismatch(format!(
                "grid has {} lower, {} upper and {} bin entries",
                self.lower.len(),
                self.upper.len(),
                n
            )));
        }
        for i in 0..n {
            if !(self.lower[i].is_finite()
                && self.upper[i].is_finite()
                && self.lower[i] < self.upper[i])
            {
                return Err(Error::InvalidConfig(format!(
                    "grid axis {i}: need finite lower < upper, got [{}, {}]",
                    self.lower[i], self.upper[i]
                )));
            }
            if self.bins[i] == 0 {
                return Err(Error::InvalidConfig(format!("grid axis {i} has zero bins")));
            }
        }
        if self.total_cells() < 4 {
            return Err(Error::InvalidConfig("grid needs at least 4 cells".into()));
        }
        if !(self.pseudo_count.is_finite() && self.pseudo_count >= 0.0) {
            return Err(Error::InvalidConfig("pseudo_count must be >= 0".into()));
        }
        Ok(())
    }

    fn width(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / self.bins[axis] as f64
    }

    /// Row-major cell index of `point`; out-of-grid coordinates clamp to the
    /// edge bins.
    pub fn cell_index(&self, point: &[f64]) -> usize {
        let mut idx = 0;
        for (axis, &v) in point.iter().enumerate() {
            let b = self.bins[axis];
            let k = ((v - self.lower[axis]) / self.width(axis)).floor();
            let k = if k < 0.0 { 0 } else { (k as usize).min(b - 1) };
            idx = idx * b + k;
        }
        idx
    }

    pub fn cell_center(&self, mut index: usize) -> Vec<f64> {
        let n = self.dimension();
        let mut center = vec![0.0; n];
        for axis in (0..n).rev() {
            let b = self.bins[axis];
            let k = index % b;
            index /= b;
            center[axis] = self.lower[axis] + (k as f64 + 0.5) * self.width(axis);
        }
        center
    }

    /// The one-axis grid for coordinate `axis`.
    pub fn axis(&self, axis: usize) -> GridSpec {
        GridSpec {
            lower: vec![self.lower[axis]],
            upper: vec![self.upper[axis]],
            bins: vec![self.bins[axis]],
            pseudo_count: self.pseudo_count,
        }
    }
}

/// Probabilities over the cells of a grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    pub shape: Vec<usize>,
    pub probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(shape: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if shape.iter().product::<usize>() != probs.len() {
            return Err(Error::GridMismatch(format!(
                "shape {shape:?} does not match {} cells",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidConfig(
                "probabilities must be finite and >= 0".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidConfig(format!("probabilities sum to {sum}")));
        }
        Ok(Self { shape, probs })
    }

    fn normalized(shape: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "cannot normalize total mass {total}"
            )));
        }
        Self::new(shape, weights.into_iter().map(|w| w / total).collect())
    }

    /// `c0..c{N-1},probability` with one row per cell.
    pub fn write_csv<W: Write>(&self, grid: &GridSpec, mut out: W) -> io::Result<()> {
        let mut header: Vec<String> = (0..grid.dimension()).map(|i| format!("c{i}")).collect();
        header.push("probability".into());
        writeln!(out, "{}", header.join(","))?;
        for (k, p) in self.probs.iter().enumerate() {
            for c in grid.cell_center(k) {
                write!(out, "{c},")?;
            }
            writeln!(out, "{p}")?;
        }
        Ok(())
    }
}

/// Bin `samples`, add the grid's pseudo-count to every cell, normalize.
pub fn histogram_distribution(
    samples: &[Vec<f64>],
    grid: &GridSpec,
) -> Result<DiscreteDistribution> {
    grid.validate()?;
    if samples.is_empty() {
        return Err(Error::Empty("sample set"));
    }
    let mut counts = vec![grid.pseudo_count; grid.total_cells()];
    for s in samples {
        if s.len() != grid.dimension() {
            return Err(Error::DimensionMismatch {
                expected: grid.dimension(),
                actual: s.len(),
            });
        }
        if s.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite("sample coordinate"));
        }
        counts[grid.cell_index(s)] += 1.0;
    }
    DiscreteDistribution::normalized(grid.bins.clone(), counts)
}

/// The target's mass per cell, by midpoint rule, renormalized over the grid.
pub fn ground_truth_distribution(
    model: &GmmModel,
    grid: &GridSpec,
) -> Result<DiscreteDistribution> {
    grid.validate()?;
    if grid.dimension() != model.dimension() {
        return Err(Error::DimensionMismatch {
            expected: model.dimension(),
            actual: grid.dimension(),
        });
    }
    let logs = (0..grid.total_cells())
        .map(|k| log_density_exact(&grid.cell_center(k), model))
        .collect::<Result<Vec<_>>>()?;
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // constant cell volume cancels in the normalization
    let weights = logs.into_iter().map(|l| (l - peak).exp()).collect();
    DiscreteDistribution::normalized(grid.bins.clone(), weights)
}

/// `sum_x F(x) ln(F(x) / G(x))`, with `0 ln 0 = 0`.
pub fn kl_divergence(f: &DiscreteDistribution, g: &DiscreteDistribution) -> Result<f64> {
    if f.shape != g.shape || f.probs.len() != g.probs.len() {
        return Err(Error::GridMismatch(format!(
            "shapes {:?} and {:?}",
            f.shape, g.shape
        )));
    }
    let mut total = 0.0;
    for (k, (&p, &q)) in f.probs.iter().zip(&g.probs).enumerate() {
        if p == 0.0 {
            continue;
        }
        if q == 0.0 {
            return Err(Error::ZeroReferenceMass(k));
        }
        total += p * (p / q).ln();
    }
    Ok(total.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KlMode {
    #[default]
    Joint,
    /// Mean of per-coordinate 1-D KL values.
    Marginal1d,
}

/// KL(truth ‖ empirical) over the joint grid or averaged over 1-D marginals.
pub fn marginal_kl(
    samples: &[Vec<f64>],
    model: &GmmModel,
    grid: &GridSpec,
    mode: KlMode,
) -> Result<f64> {
    let n = model.dimension();
    match mode {
        KlMode::Joint => {
            if n > MAX_JOINT_DIMENSION {
                return Err(Error::InvalidConfig(format!(
                    "joint KL needs dimension <= {MAX_JOINT_DIMENSION}, got {n}"
                )));
            }
            let truth = ground_truth_distribution(model, grid)?;
            let emp = histogram_distribution(samples, grid)?;
            kl_divergence(&truth, &emp)
        }
        KlMode::Marginal1d => {
            if grid.dimension() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: grid.dimension(),
                });
            }
            let mut sum = 0.0;
            for i in 0..n {
                let axis = grid.axis(i);
                let truth = ground_truth_distribution(&model.marginal(i)?, &axis)?;
                let coords: Vec<Vec<f64>> = samples
                    .iter()
                    .map(|s| {
                        s.get(i).map(|v| vec![*v]).ok_or(Error::DimensionMismatch {
                            expected: n,
                            actual: s.len(),
                        })
                    })
                    .collect::<Result<_>>()?;
                let emp = histogram_distribution(&coords, &axis)?;
                sum += kl_divergence(&truth, &emp)?;
            }
            Ok(sum / n as f64)
        }
    }
}

/// `(1/T) sum_t g(x_t)` over the post-burn-in samples.
pub fn mc_expectation<G: Fn(&[f64]) -> f64>(trace: &SampleTrace, g: G) -> Result<f64> {
    if trace.samples.is_empty() {
        return Err(Error::Empty("trace"));
    }
    Ok(trace.samples.iter().map(|s| g(s)).sum::<f64>() / trace.samples.len() as f64)
}

/// Per-coordinate sample mean and (unbiased) variance.
pub fn coordinate_moments(samples: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = samples.first().ok_or(Error::Empty("sample set"))?;
    let n = first.len();
    let t = samples.len() as f64;
    let mut mean = vec![0.0; n];
    for s in samples {
        mean.iter_mut().zip(s).for_each(|(m, v)| *m += v / t);
    }
    let mut var = vec![0.0; n];
    if samples.len() > 1 {
        for s in samples {
            var.iter_mut()
                .zip(s.iter().zip(&mean))
                .for_each(|(acc, (v, m))| *acc += (v - m).powi(2));
        }
        var.iter_mut().for_each(|v| *v /= t - 1.0);
    }
    Ok((mean, var))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_1d(bins: usize, pseudo: f64) -> GridSpec {
        GridSpec {
            lower: vec![0.0],
            upper: vec![bins as f64],
            bins: vec![bins],
            pseudo_count: pseudo,
        }
    }

    #[test]
    fn histogram_examples() {
        let g = grid_1d(4, 0.0);
        let same = vec![vec![1.5]; 7];
        assert_eq!(
            histogram_distribution(&same, &g).unwrap().probs,
            vec![0.0, 1.0, 0.0, 0.0]
        );
        let spread: Vec<Vec<f64>> = (0..4).map(|k| vec![k as f64 + 0.5]).collect();
        assert_eq!(
            histogram_distribution(&spread, &g).unwrap().probs,
            vec![0.25; 4]
        );

        // 100 samples in the first 99 cells of 100, plus one extra in cell 0
        let g = grid_1d(100, 1.0);
        let mut xs: Vec<Vec<f64>> = (0..99).map(|k| vec![k as f64 + 0.5]).collect();
        xs.push(vec![0.5]);
        let d = histogram_distribution(&xs, &g).unwrap();
        assert!((d.probs[99] - 1.0 / 200.0).abs() < 1e-15);
    }

    #[test]
    fn histogram_clamps_and_errors() {
        let g = grid_1d(4, 0.0);
        let d = histogram_distribution(&[vec![-10.0], vec![99.0]], &g).unwrap();
        assert_eq!(d.probs, vec![0.5, 0.0, 0.0, 0.5]);
        assert!(matches!(
            histogram_distribution(&[], &g),
            Err(Error::Empty(_))
        ));
        assert!(histogram_distribution(&[vec![0.0, 1.0]], &g).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(grid_1d(3, 0.5).validate().is_err());
        let mut g = grid_1d(4, 0.5);
        g.upper[0] = g.lower[0];
        assert!(g.validate().is_err());
    }

    #[test]
    fn kl_examples() {
        let f = DiscreteDistribution::new(vec![2], vec![0.5, 0.5]).unwrap();
        let g = DiscreteDistribution::new(vec![2], vec![0.25, 0.75]).unwrap();
        assert_eq!(kl_divergence(&f, &f).unwrap(), 0.0);
        let fg = kl_divergence(&f, &g).unwrap();
        let gf = kl_divergence(&g, &f).unwrap();
        assert!((fg - (0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln())).abs() < 1e-15);
        assert!((fg - 0.143_841).abs() < 1e-6);
        assert!((gf - 0.130_812).abs() < 1e-6);
        assert!(fg != gf);
    }

    #[test]
    fn kl_errors() {
        let f = DiscreteDistribution::new(vec![2], vec![0.5, 0.5]).unwrap();
        let g = DiscreteDistribution::new(vec![2], vec![1.0, 0.0]).unwrap();
        assert_eq!(kl_divergence(&f, &g), Err(Error::ZeroReferenceMass(1)));
        assert_eq!(kl_divergence(&g, &f).unwrap(), 2f64.ln());
        let h = DiscreteDistribution::new(vec![4], vec![0.25; 4]).unwrap();
        assert!(matches!(kl_divergence(&f, &h), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn ground_truth_symmetry() {
        let m = GmmModel::symmetric_pair(1.0, 2).unwrap();
        let grid = GridSpec::for_model(&m, 30, 0.5);
        assert_eq!(grid.lower, vec![-5.0, -5.0]);
        let d = ground_truth_distribution(&m, &grid).unwrap();
        let a = d.probs[grid.cell_index(&[1.0, -1.0])];
        let b = d.probs[grid.cell_index(&[-1.0, 1.0])];
        assert!((a - b).abs() < 1e-9);
        assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ground_truth_tight_and_wide() {
        let grid = GridSpec {
            lower: vec![-5.0, -5.0],
            upper: vec![5.0, 5.0],
            bins: vec![10, 10],
            pseudo_count: 0.0,
        };
        // center of cell (5, 5) is (0.5, 0.5); sigma 0.05 keeps 10 sigma inside it
        let tight =
            GmmModel::from_parts(vec![1.0], vec![vec![0.5, 0.5]], vec![vec![0.05, 0.05]]).unwrap();
        let d = ground_truth_distribution(&tight, &grid).unwrap();
        assert!(d.probs[grid.cell_index(&[0.5, 0.5])] > 0.99);

        let wide = GmmModel::from_parts(vec![1.0], vec![vec![0.0, 0.0]], vec![vec![100.0, 100.0]])
            .unwrap();
        let d = ground_truth_distribution(&wide, &grid).unwrap();
        let max = d.probs.iter().copied().fold(0.0, f64::max);
        let min = d.probs.iter().copied().fold(1.0, f64::min);
        assert!(max / min < 1.1);
    }

    #[test]
    fn one_dimensional_modes_agree() {
        let m = GmmModel::from_parts(
            vec![0.3, 0.7],
            vec![vec![-1.0], vec![2.0]],
            vec![vec![0.5], vec![1.0]],
        )
        .unwrap();
        let grid = GridSpec::for_model(&m, 30, 0.5);
        let xs: Vec<Vec<f64>> = (0..200).map(|k| vec![-3.0 + 0.03 * k as f64]).collect();
        let joint = marginal_kl(&xs, &m, &grid, KlMode::Joint).unwrap();
        let marg = marginal_kl(&xs, &m, &grid, KlMode::Marginal1d).unwrap();
        assert!((joint - marg).abs() < 1e-9);
    }

    #[test]
    fn joint_mode_rejects_high_dimension() {
        let m = GmmModel::symmetric_pair(1.0, 8).unwrap();
        let grid = GridSpec::for_model(&m, 4, 0.5);
        let xs = vec![vec![0.0; 8]];
        assert!(marginal_kl(&xs, &m, &grid, KlMode::Joint).is_err());
        assert!(marginal_kl(&xs, &m, &grid, KlMode::Marginal1d).is_ok());
    }

    #[test]
    fn moments() {
        let (m, v) = coordinate_moments(&[vec![1.0, 0.0], vec![3.0, 0.0]]).unwrap();
        assert_eq!(m, vec![2.0, 0.0]);
        assert_eq!(v, vec![2.0, 0.0]);
        assert!(coordinate_moments(&[]).is_err());
    }
}
