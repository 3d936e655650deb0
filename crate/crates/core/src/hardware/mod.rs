//! Behavioral model of the in-SRAM scalar-product datapath.
//!
//! For `V . W`, the stored vector `W` is bit-sliced into binary columns and
//! `V` drives the rows through per-row DACs. A cell holding `1` passes its
//! row current onto the column, so each column carries the masked sum of DAC
//! values. Every column is read by an ADC and the codes are recombined with
//! powers-of-two weights (negative for the sign plane).
//!
//! Column currents see two non-idealities: a signal-dependent CLM gain and a
//! unit-mean log-normal multiplicative spread. The spread is given directly
//! as `noise_sigma_norm`; for reference, a normalized spread of 1.43 was
//! observed at a DAC reference current of 5 nA with 30 mV threshold-voltage
//! variation.

pub mod quant;
pub mod trng;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::LutConfig;
use crate::rng::{stream_rng, SourceKind, STREAM_NOISE};

pub use quant::{
    adc_convert, bit_slice, max_code, plane_weight, quantize_dac, quantize_weights, recombine,
    QuantizedVector,
};
pub use trng::{trng_gaussian, trng_uniform};

/// Normalized column-current spread observed at the 5 nA calibration point.
pub const SIGMA_NORM_AT_5NA: f64 = 1.43;

/// Widest supported converter or storage format.
pub const MAX_BITS: u32 = 52;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardwareConfig {
    pub dac_bits: u32,
    pub adc_bits: u32,
    /// Bit planes per stored operand.
    pub weight_bits: u32,
    /// DAC clip bound `Vmax`.
    pub operand_range: f64,
    /// Rows per column. `None` uses two rows per operand element, one for
    /// each polarity of the signed DAC input.
    pub rows: Option<usize>,
    /// Std-dev of the multiplicative column noise relative to its mean.
    pub noise_sigma_norm: f64,
    /// Informational: DAC reference current (nA) the noise level stands for.
    pub dac_ref_current_na: f64,
    /// CLM gain error at full scale; 0 disables.
    pub clm_epsilon: f64,
    /// Probability of a `1` from the TRNG cell.
    pub rng_bias: f64,
    /// Draw one static multiplier per column per run instead of per access.
    pub frozen_mismatch: bool,
    /// Source of proposal and threshold draws in hardware mode.
    pub rng_source: SourceKind,
    pub lut: LutConfig,
}

impl Default for HardwareConfig {
    fn default() -> Self {
        Self {
            dac_bits: 8,
            adc_bits: 6,
            weight_bits: 8,
            operand_range: 4.0,
            rows: None,
            noise_sigma_norm: 0.0,
            dac_ref_current_na: 5.0,
            clm_epsilon: 0.0,
            rng_bias: 0.5,
            frozen_mismatch: false,
            rng_source: SourceKind::Trng,
            lut: LutConfig::default(),
        }
    }
}

impl HardwareConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        for (name, bits) in [
            ("dac_bits", self.dac_bits),
            ("adc_bits", self.adc_bits),
            ("weight_bits", self.weight_bits),
        ] {
            if !(2..=MAX_BITS).contains(&bits) {
                return bad(format!("{name} must be in 2..={MAX_BITS}, got {bits}"));
            }
        }
        if !(self.operand_range.is_finite() && self.operand_range > 0.0) {
            return bad(format!(
                "operand_range must be > 0, got {}",
                self.operand_range
            ));
        }
        if self.rows == Some(0) {
            return bad("rows must be positive".into());
        }
        if !(self.noise_sigma_norm.is_finite() && self.noise_sigma_norm >= 0.0) {
            return bad(format!(
                "noise_sigma_norm must be >= 0, got {}",
                self.noise_sigma_norm
            ));
        }
        if !(self.dac_ref_current_na.is_finite() && self.dac_ref_current_na > 0.0) {
            return bad("dac_ref_current_na must be > 0".into());
        }
        if !self.clm_epsilon.is_finite() {
            return bad("clm_epsilon must be finite".into());
        }
        if !(self.rng_bias > 0.0 && self.rng_bias < 1.0) {
            return bad(format!("rng_bias must be in (0, 1), got {}", self.rng_bias));
        }
        crate::gmm::LutTable::new(self.lut)?;
        Ok(())
    }

    /// Rows used for an operand of length `len`.
    pub fn active_rows(&self, len: usize) -> usize {
        self.rows.unwrap_or(2 * len)
    }

    /// ADC full scale: every active row driving the top DAC value.
    pub fn full_scale(&self, len: usize) -> f64 {
        self.active_rows(len) as f64 * self.operand_range
    }

    /// One ADC step in column-current units.
    pub fn adc_lsb(&self, len: usize) -> f64 {
        self.full_scale(len) / max_code(self.adc_bits) as f64
    }
}

/// `ideal * (1 + clm_epsilon * ideal / full_scale)`.
pub fn apply_clm_gain(ideal: f64, full_scale: f64, cfg: &HardwareConfig) -> f64 {
    if cfg.clm_epsilon == 0.0 {
        return ideal;
    }
    ideal * (1.0 + cfg.clm_epsilon * ideal / full_scale)
}

fn lognormal(sigma_norm: f64) -> LogNormal<f64> {
    let var_ln = (1.0 + sigma_norm * sigma_norm).ln();
    LogNormal::new(-0.5 * var_ln, var_ln.sqrt()).expect("finite log-normal parameters")
}

/// Multiply by a log-normal factor with mean 1 and std `noise_sigma_norm`.
pub fn sample_column_noise<R: Rng + ?Sized>(ideal: f64, cfg: &HardwareConfig, rng: &mut R) -> f64 {
    if cfg.noise_sigma_norm == 0.0 || ideal == 0.0 {
        return ideal;
    }
    ideal * lognormal(cfg.noise_sigma_norm).sample(rng)
}

fn masked_sum(plane: &[u8], dac_values: &[f64]) -> f64 {
    plane
        .iter()
        .zip(dac_values)
        .filter(|(bit, _)| **bit != 0)
        .map(|(_, v)| v)
        .sum()
}

fn check_rows(len: usize, cfg: &HardwareConfig) -> Result<()> {
    let rows = cfg.active_rows(len);
    if len > rows {
        return Err(Error::InvalidConfig(format!(
            "operand length {len} exceeds {rows} rows"
        )));
    }
    Ok(())
}

/// Current on one bit-plane column: the DAC values of rows whose cell holds
/// a `1`, then CLM gain and per-access noise.
pub fn column_accumulate<R: Rng + ?Sized>(
    plane: &[u8],
    dac_values: &[f64],
    rng: &mut R,
    cfg: &HardwareConfig,
) -> Result<f64> {
    if plane.len() != dac_values.len() {
        return Err(Error::DimensionMismatch {
            expected: plane.len(),
            actual: dac_values.len(),
        });
    }
    check_rows(plane.len(), cfg)?;
    let fs = cfg.full_scale(plane.len());
    let gained = apply_clm_gain(masked_sum(plane, dac_values), fs, cfg);
    Ok(sample_column_noise(gained, cfg, rng))
}

/// A hardware dot product together with its exact reference.
#[derive(Debug, Clone, PartialEq)]
pub struct HwDot {
    pub value: f64,
    /// Exact dot product of the two quantized operands.
    pub quantized_exact: f64,
    /// Output change for one ADC step on the sign plane.
    pub lsb_equivalent: f64,
}

fn dot_impl(
    v: &[f64],
    w: &[f64],
    cfg: &HardwareConfig,
    mut column_factor: impl FnMut(usize, f64) -> f64,
) -> Result<HwDot> {
    if v.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: v.len(),
            actual: w.len(),
        });
    }
    check_rows(v.len(), cfg)?;
    let qv = quantize_dac(v, cfg)?;
    let qw = quantize_weights(w, cfg.weight_bits)?;
    let dac_values = qv.values();
    let fs = cfg.full_scale(v.len());
    let lsb = cfg.adc_lsb(v.len());
    let mut acc = 0i128;
    for (k, plane) in bit_slice(&qw).iter().enumerate() {
        let current = apply_clm_gain(masked_sum(plane, &dac_values), fs, cfg);
        let current = column_factor(k, current);
        let code = adc_convert(current, fs, cfg)?;
        acc += i128::from(code) * i128::from(plane_weight(k as u32, cfg.weight_bits));
    }
    let quantized_exact = qv
        .codes
        .iter()
        .zip(&qw.codes)
        .map(|(a, b)| (a * b) as f64)
        .sum::<f64>()
        * qv.scale
        * qw.scale;
    Ok(HwDot {
        value: acc as f64 * lsb * qw.scale,
        quantized_exact,
        lsb_equivalent: lsb * qw.scale * (1u64 << (cfg.weight_bits - 1)) as f64,
    })
}

/// Dot product through the full datapath with per-access column noise.
pub fn dot_product_hw<R: Rng + ?Sized>(
    v: &[f64],
    w: &[f64],
    cfg: &HardwareConfig,
    rng: &mut R,
) -> Result<f64> {
    dot_product_hw_report(v, w, cfg, rng).map(|d| d.value)
}

pub fn dot_product_hw_report<R: Rng + ?Sized>(
    v: &[f64],
    w: &[f64],
    cfg: &HardwareConfig,
    rng: &mut R,
) -> Result<HwDot> {
    dot_impl(v, w, cfg, |_, current| {
        sample_column_noise(current, cfg, rng)
    })
}

/// Evaluates the two scalar products of the incremental exponent update.
pub trait DotProductEngine {
    /// `v . w`. `array` names the column group holding `w`, which matters
    /// only to engines with per-column state.
    fn dot(&mut self, v: &[f64], w: &[f64], array: usize) -> Result<f64>;
}

impl<T: DotProductEngine + ?Sized> DotProductEngine for Box<T> {
    fn dot(&mut self, v: &[f64], w: &[f64], array: usize) -> Result<f64> {
        (**self).dot(v, w, array)
    }
}

/// Plain floating-point dot product.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactEngine;

impl DotProductEngine for ExactEngine {
    fn dot(&mut self, v: &[f64], w: &[f64], _array: usize) -> Result<f64> {
        if v.len() != w.len() {
            return Err(Error::DimensionMismatch {
                expected: v.len(),
                actual: w.len(),
            });
        }
        Ok(v.iter().zip(w).map(|(a, b)| a * b).sum())
    }
}

/// The in-SRAM datapath with its own noise stream.
#[derive(Debug, Clone)]
pub struct HardwareEngine {
    cfg: HardwareConfig,
    rng: ChaCha8Rng,
    mismatch: Vec<f64>,
}

impl HardwareEngine {
    pub fn new(cfg: HardwareConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            rng: stream_rng(seed, STREAM_NOISE),
            mismatch: Vec::new(),
        })
    }

    pub fn config(&self) -> &HardwareConfig {
        &self.cfg
    }

    fn frozen_factor(&mut self, column: usize) -> f64 {
        let dist = lognormal(self.cfg.noise_sigma_norm);
        while self.mismatch.len() <= column {
            self.mismatch.push(dist.sample(&mut self.rng));
        }
        self.mismatch[column]
    }
}

impl DotProductEngine for HardwareEngine {
    fn dot(&mut self, v: &[f64], w: &[f64], array: usize) -> Result<f64> {
        let cfg = self.cfg.clone();
        let base = array * cfg.weight_bits as usize;
        let frozen = cfg.frozen_mismatch && cfg.noise_sigma_norm > 0.0;
        let out = dot_impl(v, w, &cfg, |k, current| {
            if frozen {
                current * self.frozen_factor(base + k)
            } else {
                sample_column_noise(current, &cfg, &mut self.rng)
            }
        })?;
        Ok(out.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn ideal(bits: u32) -> HardwareConfig {
        HardwareConfig {
            dac_bits: bits,
            adc_bits: bits,
            weight_bits: bits,
            ..HardwareConfig::default()
        }
    }

    #[test]
    fn default_config_is_valid() {
        HardwareConfig::default().validate().unwrap();
        assert!(HardwareConfig {
            adc_bits: 1,
            ..HardwareConfig::default()
        }
        .validate()
        .is_err());
        assert!(HardwareConfig {
            rng_bias: 1.0,
            ..HardwareConfig::default()
        }
        .validate()
        .is_err());
        assert!(HardwareConfig {
            rows: Some(0),
            ..HardwareConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn column_examples() {
        let mut rng = stream_rng(1, 0);
        let noisy = HardwareConfig {
            noise_sigma_norm: 0.8,
            rows: Some(3),
            ..HardwareConfig::default()
        };
        assert_eq!(
            column_accumulate(&[0, 0, 0], &[3.0, 4.0, 5.0], &mut rng, &noisy).unwrap(),
            0.0
        );
        let clean = HardwareConfig {
            rows: Some(3),
            ..HardwareConfig::default()
        };
        assert_eq!(
            column_accumulate(&[1, 1, 0], &[3.0, 4.0, 5.0], &mut rng, &clean).unwrap(),
            7.0
        );
        assert!(column_accumulate(&[1, 1], &[3.0, 4.0, 5.0], &mut rng, &clean).is_err());
        let two_rows = HardwareConfig {
            rows: Some(2),
            ..HardwareConfig::default()
        };
        assert!(column_accumulate(&[1, 1, 0], &[3.0, 4.0, 5.0], &mut rng, &two_rows).is_err());
    }

    #[test]
    fn column_noise_statistics() {
        let mut rng = stream_rng(2, 0);
        let cfg = HardwareConfig {
            noise_sigma_norm: 0.3,
            rows: Some(3),
            ..HardwareConfig::default()
        };
        let n = 10_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| column_accumulate(&[1, 1, 0], &[3.0, 4.0, 5.0], &mut rng, &cfg).unwrap())
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((mean / 7.0 - 1.0).abs() < 0.02, "mean {mean}");
        assert!((sd / mean / 0.3 - 1.0).abs() < 0.10, "cv {}", sd / mean);
    }

    #[test]
    fn noise_at_calibration_point_has_unit_mean() {
        let mut rng = stream_rng(3, 0);
        let cfg = HardwareConfig {
            noise_sigma_norm: SIGMA_NORM_AT_5NA,
            dac_ref_current_na: 5.0,
            ..HardwareConfig::default()
        };
        let n = 100_000;
        let mean = (0..n)
            .map(|_| sample_column_noise(2.0, &cfg, &mut rng))
            .sum::<f64>()
            / n as f64;
        assert!(
            (0.98..=1.02).contains(&(mean / 2.0)),
            "ratio {}",
            mean / 2.0
        );
        assert_eq!(
            sample_column_noise(2.0, &HardwareConfig::default(), &mut rng),
            2.0
        );
    }

    #[test]
    fn clm_examples() {
        let cfg = HardwareConfig {
            clm_epsilon: 0.05,
            ..HardwareConfig::default()
        };
        assert_eq!(apply_clm_gain(0.0, 8.0, &cfg), 0.0);
        assert!((apply_clm_gain(8.0, 8.0, &cfg) - 1.05 * 8.0).abs() < 1e-12);
        assert_eq!(apply_clm_gain(3.3, 8.0, &HardwareConfig::default()), 3.3);
    }

    #[test]
    fn dot_zero_operand() {
        let mut rng = stream_rng(4, 0);
        for cfg in [
            HardwareConfig::default(),
            HardwareConfig {
                noise_sigma_norm: 1.0,
                clm_epsilon: 0.2,
                ..HardwareConfig::default()
            },
        ] {
            assert_eq!(
                dot_product_hw(&[0.0, 0.0], &[1.5, -2.0], &cfg, &mut rng).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn dot_small_integers() {
        let mut rng = stream_rng(5, 0);
        let cfg = ideal(8);
        let d = dot_product_hw_report(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &cfg, &mut rng).unwrap();
        assert!((d.value - 32.0).abs() <= d.lsb_equivalent, "{d:?}");
    }

    #[test]
    fn wide_adc_matches_quantized_exact() {
        let mut rng = stream_rng(6, 0);
        let cfg = HardwareConfig {
            adc_bits: 48,
            ..HardwareConfig::default()
        };
        for _ in 0..200 {
            let v: Vec<f64> = (0..4).map(|_| rng.random_range(-4.0..4.0)).collect();
            let w: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let d = dot_product_hw_report(&v, &w, &cfg, &mut rng).unwrap();
            assert!((d.value - d.quantized_exact).abs() < 1e-6, "{d:?}");
        }
    }

    #[test]
    fn dot_errors() {
        let mut rng = stream_rng(7, 0);
        let cfg = HardwareConfig::default();
        assert!(dot_product_hw(&[1.0], &[1.0, 2.0], &cfg, &mut rng).is_err());
        assert!(dot_product_hw(&[f64::NAN], &[1.0], &cfg, &mut rng).is_err());
        assert!(ExactEngine.dot(&[1.0], &[1.0, 2.0], 0).is_err());
    }

    #[test]
    fn frozen_mismatch_is_static() {
        let cfg = HardwareConfig {
            noise_sigma_norm: 0.5,
            frozen_mismatch: true,
            adc_bits: 30,
            ..HardwareConfig::default()
        };
        let mut eng = HardwareEngine::new(cfg, 9).unwrap();
        let a = eng.dot(&[1.0, 0.5], &[2.0, -1.0], 3).unwrap();
        let b = eng.dot(&[1.0, 0.5], &[2.0, -1.0], 3).unwrap();
        assert_eq!(a, b);
        let mut temporal = HardwareEngine::new(
            HardwareConfig {
                frozen_mismatch: false,
                ..eng.config().clone()
            },
            9,
        )
        .unwrap();
        let c = temporal.dot(&[1.0, 0.5], &[2.0, -1.0], 3).unwrap();
        let d = temporal.dot(&[1.0, 0.5], &[2.0, -1.0], 3).unwrap();
        assert_ne!(c, d);
    }
}
