//! Table approximation of `ln(1 + e^x)` for `x <= 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Nearest,
    #[default]
    Linear,
}

impl std::fmt::Display for Interpolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Interpolation::Nearest => f.write_str("nearest"),
            Interpolation::Linear => f.write_str("linear"),
        }
    }
}

/// Shape of a [`LutTable`]; this is what configuration documents carry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LutConfig {
    pub x_lo: f64,
    pub x_hi: f64,
    pub entries: usize,
    pub interpolation: Interpolation,
}

impl Default for LutConfig {
    fn default() -> Self {
        Self {
            x_lo: -16.0,
            x_hi: 0.0,
            entries: 256,
            interpolation: Interpolation::Linear,
        }
    }
}

/// Exact `ln(1 + e^x)`, stable for large negative `x`.
#[inline]
pub fn ln1pexp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Uniformly spaced samples of `ln(1 + e^x)` on `[x_lo, x_hi]`.
///
/// Entry `i` holds the exact value at `x_lo + i * step`, so both domain
/// endpoints are table points.
#[derive(Debug, Clone, PartialEq)]
pub struct LutTable {
    config: LutConfig,
    step: f64,
    values: Vec<f64>,
}

impl LutTable {
    pub fn new(config: LutConfig) -> Result<Self> {
        let LutConfig {
            x_lo,
            x_hi,
            entries,
            ..
        } = config;
        if !(x_lo.is_finite() && x_hi.is_finite()) {
            return Err(Error::InvalidConfig("LUT bounds must be finite".into()));
        }
        if x_lo >= x_hi || x_hi > 0.0 {
            return Err(Error::InvalidConfig(format!(
                "LUT domain must satisfy x_lo < x_hi <= 0, got [{x_lo}, {x_hi}]"
            )));
        }
        if entries < 2 {
            return Err(Error::InvalidConfig("LUT needs at least 2 entries".into()));
        }
        let step = (x_hi - x_lo) / (entries - 1) as f64;
        let values = (0..entries)
            .map(|i| {
                // pin the last point to x_hi so it is not off by a rounding step
                let x = if i + 1 == entries {
                    x_hi
                } else {
                    x_lo + i as f64 * step
                };
                ln1pexp(x)
            })
            .collect();
        Ok(Self {
            config,
            step,
            values,
        })
    }

    pub fn config(&self) -> &LutConfig {
        &self.config
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Spacing between adjacent table points.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Table lookup of `ln(1 + e^x)`.
    ///
    /// Below `x_lo` the result is 0; above `x_hi` the last entry is used.
    pub fn lookup(&self, x: f64) -> f64 {
        let LutConfig { x_lo, x_hi, .. } = self.config;
        if x.is_nan() {
            return f64::NAN;
        }
        if x < x_lo {
            return 0.0;
        }
        let last = self.values.len() - 1;
        if x >= x_hi {
            return self.values[last];
        }
        let pos = (x - x_lo) / self.step;
        match self.config.interpolation {
            Interpolation::Nearest => self.values[(pos.round() as usize).min(last)],
            Interpolation::Linear => {
                let i = (pos.floor() as usize).min(last - 1);
                let frac = (pos - i as f64).clamp(0.0, 1.0);
                self.values[i] + frac * (self.values[i + 1] - self.values[i])
            }
        }
    }

    /// Largest `|lookup(x) - ln(1 + e^x)|` over `points` evenly spaced
    /// abscissae covering `[x_lo - 1, 0]`.
    pub fn max_abs_error(&self, points: usize) -> f64 {
        let lo = self.config.x_lo - 1.0;
        let n = points.max(2);
        (0..n)
            .map(|k| {
                let x = lo + (0.0 - lo) * k as f64 / (n - 1) as f64;
                (self.lookup(x) - ln1pexp(x)).abs()
            })
            .fold(0.0, f64::max)
    }
}

impl Default for LutTable {
    fn default() -> Self {
        Self::new(LutConfig::default()).expect("default LUT config is valid")
    }
}

/// `ln(1 + e^x)` for `x <= 0` through the table.
pub fn lut_ln1pexp(x: f64, lut: &LutTable) -> f64 {
    lut.lookup(x)
}
