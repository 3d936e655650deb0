//! Energy, power and cycle bookkeeping per sampling iteration.
//!
//! The default energies are not derived from circuit physics: they are
//! solved so that a 2-D, 2-mixture run at 1 GHz and 4 cycles per iteration
//! draws 91 µW split 5 % SRAM, 13 % DAC, 82 % ADC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::SampleTrace;

pub const CALIBRATED_TOTAL_POWER_W: f64 = 91e-6;
pub const CALIBRATED_FRACTIONS: [f64; 3] = [0.05, 0.13, 0.82];
/// Share of ADC power spent in the flash comparators (annotation only).
pub const ADC_COMPARATOR_SHARE: f64 = 0.60;

const DEFAULT_CLOCK_HZ: f64 = 1e9;
const DEFAULT_CYCLES_PER_ITERATION: u64 = 4;
/// 2 mixtures x 2 scalar products x 8 bit planes.
const DEFAULT_ADC_CONVERSIONS: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerfConfig {
    /// Joules per iteration spent in SRAM array accesses.
    pub e_sram: f64,
    /// Joules per iteration spent in DACs.
    pub e_dac: f64,
    /// Joules per ADC conversion.
    pub e_adc: f64,
    pub adc_conversions_per_iteration: u64,
    pub cycles_per_iteration: u64,
    pub clock_frequency: f64,
}

impl Default for PerfConfig {
    fn default() -> Self {
        let per_iter =
            CALIBRATED_TOTAL_POWER_W / (DEFAULT_CLOCK_HZ / DEFAULT_CYCLES_PER_ITERATION as f64);
        Self {
            e_sram: CALIBRATED_FRACTIONS[0] * per_iter,
            e_dac: CALIBRATED_FRACTIONS[1] * per_iter,
            e_adc: CALIBRATED_FRACTIONS[2] * per_iter / DEFAULT_ADC_CONVERSIONS as f64,
            adc_conversions_per_iteration: DEFAULT_ADC_CONVERSIONS,
            cycles_per_iteration: DEFAULT_CYCLES_PER_ITERATION,
            clock_frequency: DEFAULT_CLOCK_HZ,
        }
    }
}

impl PerfConfig {
    pub fn validate(&self) -> Result<()> {
        let energies = [self.e_sram, self.e_dac, self.e_adc];
        if energies.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::InvalidConfig(
                "energies must be finite and >= 0".into(),
            ));
        }
        if !(self.clock_frequency.is_finite() && self.clock_frequency > 0.0) {
            return Err(Error::InvalidConfig("clock_frequency must be > 0".into()));
        }
        if self.cycles_per_iteration == 0 {
            return Err(Error::InvalidConfig(
                "cycles_per_iteration must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn iterations_per_second(&self) -> f64 {
        self.clock_frequency / self.cycles_per_iteration as f64
    }

    /// Whether these are the shipped calibration values.
    pub fn is_calibrated_default(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerReport {
    pub total_w: f64,
    pub sram_w: f64,
    pub dac_w: f64,
    pub adc_w: f64,
    /// SRAM, DAC, ADC shares of the total.
    pub fractions: [f64; 3],
    /// Part of `adc_w` attributed to comparators; not a separate component.
    pub adc_comparator_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleReport {
    pub iterations: u64,
    pub total_cycles: u64,
    pub wall_clock_s: f64,
    /// Emitted post-burn-in samples.
    pub samples: u64,
    pub samples_per_kcycle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerfReport {
    pub power: PowerReport,
    pub cycles: CycleReport,
    pub calibrated_default: bool,
}

pub fn estimate_iteration_power(cfg: &PerfConfig) -> Result<PowerReport> {
    cfg.validate()?;
    let ips = cfg.iterations_per_second();
    let sram_w = cfg.e_sram * ips;
    let dac_w = cfg.e_dac * ips;
    let adc_w = cfg.e_adc * cfg.adc_conversions_per_iteration as f64 * ips;
    let total_w = sram_w + dac_w + adc_w;
    let fractions = if total_w > 0.0 {
        [sram_w / total_w, dac_w / total_w, adc_w / total_w]
    } else {
        [0.0; 3]
    };
    Ok(PowerReport {
        total_w,
        sram_w,
        dac_w,
        adc_w,
        fractions,
        adc_comparator_w: ADC_COMPARATOR_SHARE * adc_w,
    })
}

/// Cycle accounting for `iterations` MH iterations emitting `samples`.
pub fn cycles_for(iterations: u64, samples: u64, cfg: &PerfConfig) -> Result<CycleReport> {
    cfg.validate()?;
    if iterations == 0 {
        return Err(Error::Empty("trace"));
    }
    let total_cycles = iterations * cfg.cycles_per_iteration;
    Ok(CycleReport {
        iterations,
        total_cycles,
        wall_clock_s: total_cycles as f64 / cfg.clock_frequency,
        samples,
        samples_per_kcycle: 1000.0 * samples as f64 / total_cycles as f64,
    })
}

/// Every iteration of the trace, burn-in included, costs
/// `cycles_per_iteration`.
pub fn estimate_run_cycles(trace: &SampleTrace, cfg: &PerfConfig) -> Result<CycleReport> {
    cycles_for(
        trace.iterations.len() as u64,
        trace.samples.len() as u64,
        cfg,
    )
}

pub fn perf_report(trace: &SampleTrace, cfg: &PerfConfig) -> Result<PerfReport> {
    Ok(PerfReport {
        power: estimate_iteration_power(cfg)?,
        cycles: estimate_run_cycles(trace, cfg)?,
        calibrated_default: cfg.is_calibrated_default(),
    })
}
