//! Diagonal-covariance Gaussian mixture target and log-domain density
//! evaluation.
//!
//! A mixture component's contribution in log domain is `c_j - E_j / 2`,
//! where `E_j` is the squared standardized distance of `x` from the mean and
//! `c_j = ln p_j - sum_i ln sigma_ij - (N/2) ln 2pi` is precomputed. Mixture
//! terms are combined with the pairwise identity
//! `ln(e^a + e^b) = max + ln(1 + e^(min - max))`.

mod lut;

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lut::{ln1pexp, lut_ln1pexp, Interpolation, LutConfig, LutTable};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Raw mixture parameters as written in a configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmParams {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub stddevs: Vec<Vec<f64>>,
}

/// One broken model invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoMixtures,
    ZeroDimension,
    ShapeMismatch(String),
    NonFinite(String),
    WeightsSum(f64),
    NonPositiveWeight {
        mixture: usize,
        value: f64,
    },
    NonPositiveStddev {
        mixture: usize,
        coord: usize,
        value: f64,
    },
    LogNormConst {
        mixture: usize,
        stored: f64,
        expected: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoMixtures => f.write_str("no mixtures"),
            Violation::ZeroDimension => f.write_str("zero dimension"),
            Violation::ShapeMismatch(s) => write!(f, "shape mismatch: {s}"),
            Violation::NonFinite(s) => write!(f, "non-finite parameter: {s}"),
            Violation::WeightsSum(s) => write!(f, "weights sum ≠ 1 (sum = {s})"),
            Violation::NonPositiveWeight { mixture, value } => {
                write!(f, "nonpositive weight p[{mixture}] = {value}")
            }
            Violation::NonPositiveStddev {
                mixture,
                coord,
                value,
            } => write!(f, "nonpositive stddev sigma[{mixture}][{coord}] = {value}"),
            Violation::LogNormConst {
                mixture,
                stored,
                expected,
            } => write!(
                f,
                "log normalizer c[{mixture}] = {stored} differs from {expected}"
            ),
        }
    }
}

/// Outcome of [`validate_model`]: empty means the model is usable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationResult {
    pub violations: Vec<Violation>,
}

impl ValidationResult {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            let msg = self
                .violations
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; ");
            Err(Error::InvalidModel(msg))
        }
    }
}

/// Check every structural and numeric invariant of a mixture description.
// negated comparisons so that NaN counts as a violation
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate_model(params: &GmmParams) -> ValidationResult {
    let mut violations = Vec::new();
    let m = params.weights.len();
    if m == 0 {
        violations.push(Violation::NoMixtures);
        return ValidationResult { violations };
    }
    if params.means.len() != m || params.stddevs.len() != m {
        violations.push(Violation::ShapeMismatch(format!(
            "{m} weights, {} mean vectors, {} stddev vectors",
            params.means.len(),
            params.stddevs.len()
        )));
        return ValidationResult { violations };
    }
    let n = params.means[0].len();
    if n == 0 {
        violations.push(Violation::ZeroDimension);
    }
    for j in 0..m {
        if params.means[j].len() != n || params.stddevs[j].len() != n {
            violations.push(Violation::ShapeMismatch(format!(
                "mixture {j} has mean length {} and stddev length {}, expected {n}",
                params.means[j].len(),
                params.stddevs[j].len()
            )));
        }
    }
    if !params.weights.iter().all(|p| p.is_finite()) {
        violations.push(Violation::NonFinite("weights".into()));
    }
    if params.means.iter().flatten().any(|v| !v.is_finite()) {
        violations.push(Violation::NonFinite("means".into()));
    }
    if params.stddevs.iter().flatten().any(|v| !v.is_finite()) {
        violations.push(Violation::NonFinite("stddevs".into()));
    }
    let sum: f64 = params.weights.iter().sum();
    if !((sum - 1.0).abs() <= WEIGHT_SUM_TOL) {
        violations.push(Violation::WeightsSum(sum));
    }
    for (j, &p) in params.weights.iter().enumerate() {
        if !(p > 0.0) {
            violations.push(Violation::NonPositiveWeight {
                mixture: j,
                value: p,
            });
        }
    }
    for (j, row) in params.stddevs.iter().enumerate() {
        for (i, &s) in row.iter().enumerate() {
            if !(s > 0.0) {
                violations.push(Violation::NonPositiveStddev {
                    mixture: j,
                    coord: i,
                    value: s,
                });
            }
        }
    }
    ValidationResult { violations }
}

fn log_norm_const(weight: f64, stddevs: &[f64]) -> f64 {
    let n = stddevs.len() as f64;
    weight.ln() - stddevs.iter().map(|s| s.ln()).sum::<f64>() - 0.5 * n * (2.0 * PI).ln()
}

/// A validated mixture with its per-component log normalizers.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    params: GmmParams,
    log_norm: Vec<f64>,
    inv_var: Vec<Vec<f64>>,
}

impl GmmModel {
    pub fn new(params: GmmParams) -> Result<Self> {
        validate_model(&params).into_result()?;
        let log_norm = params
            .weights
            .iter()
            .zip(&params.stddevs)
            .map(|(&p, s)| log_norm_const(p, s))
            .collect();
        let inv_var = params
            .stddevs
            .iter()
            .map(|row| row.iter().map(|s| 1.0 / (s * s)).collect())
            .collect();
        Ok(Self {
            params,
            log_norm,
            inv_var,
        })
    }

    pub fn from_parts(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        stddevs: Vec<Vec<f64>>,
    ) -> Result<Self> {
        Self::new(GmmParams {
            weights,
            means,
            stddevs,
        })
    }

    /// The two-mixture test model with means `(d, -d, ...)` and its negation.
    pub fn symmetric_pair(distance: f64, dimension: usize) -> Result<Self> {
        let mu: Vec<f64> = (0..dimension)
            .map(|i| if i % 2 == 0 { distance } else { -distance })
            .collect();
        let neg: Vec<f64> = mu.iter().map(|v| -v).collect();
        Self::from_parts(vec![0.5, 0.5], vec![mu, neg], vec![vec![1.0; dimension]; 2])
    }

    pub fn params(&self) -> &GmmParams {
        &self.params
    }

    pub fn num_mixtures(&self) -> usize {
        self.params.weights.len()
    }

    pub fn dimension(&self) -> usize {
        self.params.means[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.params.weights
    }

    pub fn mean(&self, j: usize) -> &[f64] {
        &self.params.means[j]
    }

    pub fn stddev(&self, j: usize) -> &[f64] {
        &self.params.stddevs[j]
    }

    /// `1 / sigma_j^2`, elementwise.
    pub fn inv_variance(&self, j: usize) -> &[f64] {
        &self.inv_var[j]
    }

    pub fn log_norm_consts(&self) -> &[f64] {
        &self.log_norm
    }

    /// Re-check all invariants, including the stored log normalizers.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> ValidationResult {
        let mut result = validate_model(&self.params);
        for (j, &c) in self.log_norm.iter().enumerate() {
            let expected = log_norm_const(self.params.weights[j], &self.params.stddevs[j]);
            if !((c - expected).abs() <= 1e-12) {
                result.violations.push(Violation::LogNormConst {
                    mixture: j,
                    stored: c,
                    expected,
                });
            }
        }
        result
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample coordinate"));
        }
        Ok(())
    }

    /// The one-dimensional marginal of coordinate `coord`.
    pub fn marginal(&self, coord: usize) -> Result<GmmModel> {
        if coord >= self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                actual: coord + 1,
            });
        }
        GmmModel::from_parts(
            self.params.weights.clone(),
            self.params.means.iter().map(|m| vec![m[coord]]).collect(),
            self.params.stddevs.iter().map(|s| vec![s[coord]]).collect(),
        )
    }
}

/// `E_j(x) = sum_i ((x_i - mu_ij) / sigma_ij)^2`.
pub fn exponent_direct(x: &[f64], model: &GmmModel, j: usize) -> Result<f64> {
    if j >= model.num_mixtures() {
        return Err(Error::MixtureIndex {
            index: j,
            mixtures: model.num_mixtures(),
        });
    }
    model.check_point(x)?;
    Ok(x.iter()
        .zip(model.mean(j))
        .zip(model.stddev(j))
        .map(|((xi, mu), s)| {
            let z = (xi - mu) / s;
            z * z
        })
        .sum())
}

/// `max(a, b) + ln(1 + e^(min - max))`, through `lut` when given.
pub fn log_sum_exp(a: f64, b: f64, lut: Option<&LutTable>) -> Result<f64> {
    if a.is_nan() || b.is_nan() {
        return Err(Error::NonFinite("log-sum-exp argument"));
    }
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        return Err(Error::BothNegativeInfinity);
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    let diff = lo - hi;
    let corr = match lut {
        Some(table) => table.lookup(diff),
        None => ln1pexp(diff),
    };
    Ok(hi + corr)
}

/// Combine per-mixture log terms `c_j - E_j/2` into the mixture log density.
///
/// Terms are folded in descending order (ties by index), so the result does
/// not depend on how mixtures are stored.
pub fn combine_log_terms(terms: &[f64], lut: Option<&LutTable>) -> Result<f64> {
    if terms.is_empty() {
        return Err(Error::Empty("mixture terms"));
    }
    if terms.iter().any(|t| t.is_nan()) {
        return Err(Error::NonFinite("mixture term"));
    }
    let mut order: Vec<usize> = (0..terms.len()).collect();
    order.sort_by(|&i, &k| terms[k].total_cmp(&terms[i]).then(i.cmp(&k)));
    let mut acc = terms[order[0]];
    for &j in &order[1..] {
        if acc == f64::NEG_INFINITY && terms[j] == f64::NEG_INFINITY {
            continue;
        }
        acc = log_sum_exp(acc, terms[j], lut)?;
    }
    Ok(acc)
}

/// Mixture log density from cached exponents.
pub fn log_density_from_exponents(
    model: &GmmModel,
    exponents: &[f64],
    lut: Option<&LutTable>,
) -> Result<f64> {
    if exponents.len() != model.num_mixtures() {
        return Err(Error::DimensionMismatch {
            expected: model.num_mixtures(),
            actual: exponents.len(),
        });
    }
    let terms: Vec<f64> = model
        .log_norm_consts()
        .iter()
        .zip(exponents)
        .map(|(c, e)| c - 0.5 * e)
        .collect();
    combine_log_terms(&terms, lut)
}

/// `ln G(x)` in exact floating point.
pub fn log_density_exact(x: &[f64], model: &GmmModel) -> Result<f64> {
    model.check_point(x)?;
    let exponents = (0..model.num_mixtures())
        .map(|j| exponent_direct(x, model, j))
        .collect::<Result<Vec<_>>>()?;
    log_density_from_exponents(model, &exponents, None)
}
