//! Metropolis-Hastings chain with incremental exponent updates.
//!
//! A candidate `x + R` is scored without re-evaluating each exponent from
//! scratch: with `D_j = x - mu_j` cached,
//!
//! ```text
//! E_j(cand) = E_j(x) + (R / sigma_j^2) . R + 2 (R / sigma_j^2) . D_j
//! ```
//!
//! so each step costs two scalar products per mixture. Those products go
//! through a [`DotProductEngine`], which is either exact arithmetic or the
//! in-SRAM datapath model.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::{exponent_direct, log_density_from_exponents, GmmModel, LutTable};
use crate::hardware::{DotProductEngine, ExactEngine, HardwareConfig, HardwareEngine};
use crate::rng::{BiasedBits, IdealSource, RandomSource, SourceKind, TrngSource};

/// Replacement for a zero threshold draw so that `ln u` stays finite.
pub const MIN_UNIFORM: f64 = 1.0 / 9_007_199_254_740_992.0; // 2^-53

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProposalKind {
    #[default]
    Gaussian,
    Uniform,
}

impl std::fmt::Display for ProposalKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProposalKind::Gaussian => "gaussian",
            ProposalKind::Uniform => "uniform",
        })
    }
}

/// Zero-centered random-walk proposal. `step_scale` is the per-coordinate
/// std-dev (gaussian) or half-width (uniform).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProposalConfig {
    pub kind: ProposalKind,
    pub step_scale: f64,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self {
            kind: ProposalKind::Gaussian,
            step_scale: 0.5,
        }
    }
}

impl ProposalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step_scale.is_finite() && self.step_scale > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "proposal step_scale must be > 0, got {}",
                self.step_scale
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Arithmetic {
    #[default]
    Exact,
    Hardware,
}

impl std::fmt::Display for Arithmetic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Arithmetic::Exact => "exact",
            Arithmetic::Hardware => "hardware",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    /// Post-burn-in samples kept in the trace.
    pub total_samples: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Re-derive the cached exponents exactly every `refresh_period` steps;
    /// 0 never does.
    pub refresh_period: usize,
    pub arithmetic: Arithmetic,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            total_samples: 500,
            burn_in: 50,
            seed: 0,
            refresh_period: 0,
            arithmetic: Arithmetic::Exact,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_samples == 0 {
            return Err(Error::InvalidConfig(
                "total_samples must be positive".into(),
            ));
        }
        self.total_samples
            .checked_add(self.burn_in)
            .map(|_| ())
            .ok_or_else(|| Error::InvalidConfig("burn_in + total_samples overflows".into()))
    }
}

/// Markov-chain memory between iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub t: usize,
    pub x: Vec<f64>,
    /// `E_j` at `x`.
    pub exponents: Vec<f64>,
    /// `D_j = x - mu_j`.
    pub deviations: Vec<Vec<f64>>,
    pub log_density: f64,
}

impl ChainState {
    /// Exact state at `x`; the log density uses `lut` for the mixture combine.
    pub fn new(model: &GmmModel, x: Vec<f64>, lut: Option<&LutTable>) -> Result<Self> {
        model.check_point(&x)?;
        let exponents = (0..model.num_mixtures())
            .map(|j| exponent_direct(&x, model, j))
            .collect::<Result<Vec<_>>>()?;
        let deviations = (0..model.num_mixtures())
            .map(|j| x.iter().zip(model.mean(j)).map(|(a, m)| a - m).collect())
            .collect();
        let log_density = log_density_from_exponents(model, &exponents, lut)?;
        Ok(Self {
            t: 0,
            x,
            exponents,
            deviations,
            log_density,
        })
    }

    /// Same state value ignoring the step counter.
    pub fn same_value(&self, other: &ChainState) -> bool {
        self.x == other.x
            && self.exponents == other.exponents
            && self.deviations == other.deviations
            && self.log_density.to_bits() == other.log_density.to_bits()
    }
}

/// One MH iteration as seen from outside.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub t: usize,
    pub candidate: Vec<f64>,
    pub candidate_log_density: f64,
    pub u: f64,
    pub accepted: bool,
    /// Cached exponents were re-derived after this step.
    pub refreshed: bool,
    /// Chain position after the step.
    pub state: Vec<f64>,
    pub log_density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleTrace {
    pub seed: u64,
    pub burn_in: usize,
    /// Chain position after each post-burn-in step; rejections repeat the
    /// previous position.
    pub samples: Vec<Vec<f64>>,
    /// Every iteration, burn-in included.
    pub iterations: Vec<IterationRecord>,
}

impl SampleTrace {
    pub fn dimension(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn refresh_count(&self) -> usize {
        self.iterations.iter().filter(|r| r.refreshed).count()
    }

    pub fn accepted_count(&self) -> usize {
        self.iterations.iter().filter(|r| r.accepted).count()
    }

    /// Fraction of accepted candidates over all iterations.
    pub fn acceptance_rate(&self) -> f64 {
        if self.iterations.is_empty() {
            return 0.0;
        }
        self.accepted_count() as f64 / self.iterations.len() as f64
    }

    /// Writes `t, x0..x{N-1}, log_density, u, accepted`, one row per iteration.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let n = self.iterations.first().map_or(0, |r| r.state.len());
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("x{i}")));
        header.extend(["log_density", "u", "accepted"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        for r in &self.iterations {
            write!(out, "{}", r.t)?;
            for v in &r.state {
                write!(out, ",{v}")?;
            }
            writeln!(out, ",{},{},{}", r.log_density, r.u, u8::from(r.accepted))?;
        }
        Ok(())
    }
}

/// Draw `R` and return `(x + R, R)`.
pub fn propose<S: RandomSource + ?Sized>(
    state: &ChainState,
    cfg: &ProposalConfig,
    rng: &mut S,
) -> (Vec<f64>, Vec<f64>) {
    let r: Vec<f64> = state
        .x
        .iter()
        .map(|_| match cfg.kind {
            ProposalKind::Gaussian => cfg.step_scale * rng.standard_normal(),
            ProposalKind::Uniform => cfg.step_scale * (2.0 * rng.uniform() - 1.0),
        })
        .collect();
    let candidate = state.x.iter().zip(&r).map(|(x, d)| x + d).collect();
    (candidate, r)
}

/// Candidate exponents from the cached ones, clamped below at zero.
pub fn incremental_exponents<D: DotProductEngine + ?Sized>(
    state: &ChainState,
    r: &[f64],
    model: &GmmModel,
    dp: &mut D,
) -> Result<Vec<f64>> {
    if r.len() != model.dimension() {
        return Err(Error::DimensionMismatch {
            expected: model.dimension(),
            actual: r.len(),
        });
    }
    (0..model.num_mixtures())
        .map(|j| {
            let scaled: Vec<f64> = r
                .iter()
                .zip(model.inv_variance(j))
                .map(|(a, iv)| a * iv)
                .collect();
            let rr = dp.dot(&scaled, r, 2 * j)?;
            let rd = dp.dot(&scaled, &state.deviations[j], 2 * j + 1)?;
            Ok((state.exponents[j] + rr + 2.0 * rd).max(0.0))
        })
        .collect()
}

/// MH test in log domain: accept iff `cand - prev > ln u`.
pub fn mh_accept(log_density_cand: f64, log_density_prev: f64, u: f64) -> Result<bool> {
    if log_density_cand.is_nan() || log_density_prev.is_nan() {
        return Err(Error::NanLogDensity);
    }
    if log_density_cand >= log_density_prev {
        return Ok(true);
    }
    Ok(log_density_cand - log_density_prev > u.ln())
}

/// One proposal, score and accept/reject. On rejection the returned state is
/// the input state with `t` advanced.
pub fn step<S, D>(
    mut state: ChainState,
    model: &GmmModel,
    proposal: &ProposalConfig,
    rng: &mut S,
    dp: &mut D,
    lut: Option<&LutTable>,
) -> Result<(ChainState, IterationRecord)>
where
    S: RandomSource + ?Sized,
    D: DotProductEngine + ?Sized,
{
    let (candidate, r) = propose(&state, proposal, rng);
    let cand_exponents = incremental_exponents(&state, &r, model, dp)?;
    let cand_log_density = log_density_from_exponents(model, &cand_exponents, lut)?;
    let u = match rng.uniform() {
        u if u <= 0.0 => MIN_UNIFORM,
        u => u,
    };
    let accepted = mh_accept(cand_log_density, state.log_density, u)?;
    if accepted {
        for dev in &mut state.deviations {
            dev.iter_mut().zip(&r).for_each(|(d, step)| *d += step);
        }
        state.x = candidate.clone();
        state.exponents = cand_exponents;
        state.log_density = cand_log_density;
    }
    state.t += 1;
    let record = IterationRecord {
        t: state.t,
        candidate,
        candidate_log_density: cand_log_density,
        u,
        accepted,
        refreshed: false,
        state: state.x.clone(),
        log_density: state.log_density,
    };
    Ok((state, record))
}

/// Re-derive `D`, `E` and the log density at the current `x` in exact
/// arithmetic.
pub fn refresh_exact(state: &ChainState, model: &GmmModel) -> Result<ChainState> {
    let mut fresh = ChainState::new(model, state.x.clone(), None)?;
    fresh.t = state.t;
    Ok(fresh)
}

fn hardware_source(seed: u64, hw: &HardwareConfig) -> Box<dyn RandomSource> {
    match hw.rng_source {
        SourceKind::Ideal => Box::new(IdealSource::new(seed)),
        SourceKind::Trng => Box::new(TrngSource::new(
            BiasedBits::new(seed, hw.rng_bias),
            hw.dac_bits,
        )),
    }
}

/// Run `burn_in + total_samples` steps from the origin.
///
/// Exact arithmetic uses the ideal random source and exact mixture
/// combination; hardware arithmetic routes the scalar products through the
/// datapath model, combines mixtures through the LUT and draws from the
/// source selected in `hw`.
pub fn run_chain(
    model: &GmmModel,
    chain: &ChainConfig,
    proposal: &ProposalConfig,
    hw: &HardwareConfig,
) -> Result<SampleTrace> {
    chain.validate()?;
    proposal.validate()?;
    let (mut rng, mut dp, lut): (Box<dyn RandomSource>, Box<dyn DotProductEngine>, _) =
        match chain.arithmetic {
            Arithmetic::Exact => (
                Box::new(IdealSource::new(chain.seed)),
                Box::new(ExactEngine),
                None,
            ),
            Arithmetic::Hardware => {
                hw.validate()?;
                (
                    hardware_source(chain.seed, hw),
                    Box::new(HardwareEngine::new(hw.clone(), chain.seed)?),
                    Some(LutTable::new(hw.lut)?),
                )
            }
        };
    let total = chain.burn_in + chain.total_samples;
    let mut state = ChainState::new(model, vec![0.0; model.dimension()], lut.as_ref())?;
    let mut iterations = Vec::with_capacity(total);
    let mut samples = Vec::with_capacity(chain.total_samples);
    for _ in 0..total {
        let (next, mut record) = step(state, model, proposal, &mut rng, &mut dp, lut.as_ref())?;
        state = next;
        if chain.refresh_period > 0 && state.t % chain.refresh_period == 0 {
            state = refresh_exact(&state, model)?;
            if lut.is_some() {
                state.log_density =
                    log_density_from_exponents(model, &state.exponents, lut.as_ref())?;
            }
            record.refreshed = true;
            record.log_density = state.log_density;
        }
        if state.t > chain.burn_in {
            samples.push(state.x.clone());
        }
        iterations.push(record);
    }
    Ok(SampleTrace {
        seed: chain.seed,
        burn_in: chain.burn_in,
        samples,
        iterations,
    })
}
