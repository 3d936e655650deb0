//! Experiment configuration document.
//!
//! The document is TOML with one table per concern. Every key is optional
//! and falls back to the defaults below; unknown keys are rejected.
//!
//! ```toml
//! [model]              # generator family, or an inline mixture
//! distance = 1.0       # means (d, -d, d, ...) and the negation
//! dimension = 2
//! mixtures = 2
//! generator_seed = 0   # random means when mixtures != 2
//! # inline = { weights = [...], means = [[...]], stddevs = [[...]] }
//!
//! [chain]
//! total_samples = 500
//! burn_in = 50
//! refresh_period = 0
//! arithmetic = "hardware"   # or "exact"
//!
//! [proposal]
//! kind = "gaussian"    # or "uniform"
//! step_scale = 0.5
//!
//! [hardware]           # see sram_mcmc::HardwareConfig
//! dac_bits = 8
//! adc_bits = 6
//! [hardware.lut]
//! entries = 256
//!
//! [perf]               # see sram_mcmc::perf::PerfConfig
//!
//! [grid]
//! bins = 30
//! pseudo_count = 0.5
//!
//! [sweep]
//! replicates = 20
//! base_seed = 0
//! seed_policy = "row"  # seed = base_seed + row index; "replicate" reuses
//!                      # base_seed + replicate at every point
//! [[sweep.axis]]
//! param = "hardware.adc_bits"
//! values = [3, 4, 5, 6, 7, 8]
//!
//! [output]
//! path = "results.csv"
//! emit_trace = false
//! trajectory_steps = 75
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sram_mcmc::gmm::GmmParams;
use sram_mcmc::hardware::HardwareConfig;
use sram_mcmc::perf::PerfConfig;
use sram_mcmc::sampler::{Arithmetic, ChainConfig, ProposalConfig};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub distance: f64,
    pub dimension: usize,
    pub mixtures: usize,
    pub generator_seed: u64,
    /// Overrides the generator when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inline: Option<GmmParams>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            distance: 1.0,
            dimension: 2,
            mixtures: 2,
            generator_seed: 0,
            inline: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    pub total_samples: usize,
    pub burn_in: usize,
    pub refresh_period: usize,
    pub arithmetic: Arithmetic,
}

impl Default for ChainSection {
    fn default() -> Self {
        Self {
            total_samples: 500,
            burn_in: 50,
            refresh_period: 0,
            arithmetic: Arithmetic::Hardware,
        }
    }
}

impl ChainSection {
    pub fn with_seed(&self, seed: u64) -> ChainConfig {
        ChainConfig {
            total_samples: self.total_samples,
            burn_in: self.burn_in,
            seed,
            refresh_period: self.refresh_period,
            arithmetic: self.arithmetic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub bins: usize,
    pub pseudo_count: f64,
    /// Explicit bounds; both or neither. Default: mixture means +- 4 sigma.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            bins: 30,
            pseudo_count: 0.5,
            lower: None,
            upper: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SeedPolicy {
    /// `base_seed + row index`.
    #[default]
    Row,
    /// `base_seed + replicate`: every point reuses the same seeds.
    Replicate,
}

impl std::fmt::Display for SeedPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SeedPolicy::Row => "row",
            SeedPolicy::Replicate => "replicate",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// Dotted path of the swept key, e.g. `hardware.adc_bits`.
    pub param: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub replicates: usize,
    pub base_seed: u64,
    pub seed_policy: SeedPolicy,
    #[serde(rename = "axis", skip_serializing_if = "Vec::is_empty")]
    pub axes: Vec<Axis>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            replicates: 20,
            base_seed: 0,
            seed_policy: SeedPolicy::Row,
            axes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: PathBuf,
    pub emit_trace: bool,
    pub trajectory_steps: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            path: PathBuf::from("results.csv"),
            emit_trace: false,
            trajectory_steps: 75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub chain: ChainSection,
    pub proposal: ProposalConfig,
    pub hardware: HardwareConfig,
    pub perf: PerfConfig,
    pub grid: GridSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

/// Sections a sweep axis may address.
const SWEEPABLE: &[&str] = &["model", "chain", "proposal", "hardware", "perf", "grid"];

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical serialization, `[output]` excluded since it
    /// does not influence any result.
    pub fn hash(&self) -> String {
        let mut cfg = self.clone();
        cfg.output = OutputSection::default();
        hex::encode(Sha256::digest(cfg.to_toml_string().as_bytes()))
    }

    /// Check everything that can be checked without running a chain,
    /// including every resolved sweep point.
    pub fn validate(&self) -> Result<()> {
        if self.sweep.replicates == 0 {
            return Err(HarnessError::Config("sweep.replicates must be >= 1".into()));
        }
        for point in self.points()? {
            point.validate()?;
        }
        Ok(())
    }

    /// The Cartesian product of the sweep axes, first axis outermost.
    /// Without axes this is the single base point.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        for axis in &self.sweep.axes {
            let head = axis.param.split('.').next().unwrap_or_default();
            if !SWEEPABLE.contains(&head) || !axis.param.contains('.') {
                return Err(HarnessError::Config(format!(
                    "sweep axis `{}` does not name a parameter in {SWEEPABLE:?}",
                    axis.param
                )));
            }
            if axis.values.is_empty() {
                return Err(HarnessError::Config(format!(
                    "sweep axis `{}` has no values",
                    axis.param
                )));
            }
        }
        let base = toml::Value::try_from(self)
            .map_err(|e| HarnessError::Config(format!("cannot serialize configuration: {e}")))?;
        let lens: Vec<usize> = self.sweep.axes.iter().map(|a| a.values.len()).collect();
        let total: usize = lens.iter().product();
        let mut points = Vec::with_capacity(total);
        for index in 0..total {
            let mut rem = index;
            let mut picks = vec![0; lens.len()];
            for (k, len) in lens.iter().enumerate().rev() {
                picks[k] = rem % len;
                rem /= len;
            }
            let mut value = base.clone();
            let mut assignments = Vec::new();
            for (axis, &pick) in self.sweep.axes.iter().zip(&picks) {
                let v = axis.values[pick].clone();
                set_path(&mut value, &axis.param, v.clone())?;
                assignments.push((axis.param.clone(), v));
            }
            let config: ExperimentConfig = value.try_into().map_err(|e: toml::de::Error| {
                HarnessError::Config(format!("sweep point {index}: {e}"))
            })?;
            points.push(SweepPoint {
                index,
                assignments,
                config,
            });
        }
        Ok(points)
    }
}

fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<()> {
    let keys: Vec<&str> = path.split('.').collect();
    let (last, parents) = keys.split_last().expect("non-empty path");
    let mut cur = root;
    for key in parents {
        let table = cur.as_table_mut().ok_or_else(|| {
            HarnessError::Config(format!("sweep axis `{path}`: `{key}` is not a table"))
        })?;
        cur = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = cur
        .as_table_mut()
        .ok_or_else(|| HarnessError::Config(format!("sweep axis `{path}` has no parent table")))?;
    table.insert(last.to_string(), value);
    Ok(())
}

/// One resolved point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub assignments: Vec<(String, toml::Value)>,
    pub config: ExperimentConfig,
}

impl SweepPoint {
    pub fn validate(&self) -> Result<()> {
        let cfg = &self.config;
        let model = crate::sweep::build_model(&cfg.model)?;
        cfg.chain
            .with_seed(0)
            .validate()
            .map_err(HarnessError::from_config)?;
        cfg.proposal.validate().map_err(HarnessError::from_config)?;
        cfg.hardware.validate().map_err(HarnessError::from_config)?;
        cfg.perf.validate().map_err(HarnessError::from_config)?;
        if cfg.grid.bins == 0 {
            return Err(HarnessError::Config("grid.bins must be >= 1".into()));
        }
        if cfg.grid.lower.is_some() != cfg.grid.upper.is_some() {
            return Err(HarnessError::Config(
                "grid.lower and grid.upper must be given together".into(),
            ));
        }
        if !(cfg.grid.pseudo_count.is_finite() && cfg.grid.pseudo_count >= 0.0) {
            return Err(HarnessError::Config(
                "grid.pseudo_count must be >= 0".into(),
            ));
        }
        crate::sweep::grid_for(&cfg.grid, &model)?;
        if cfg.chain.arithmetic == Arithmetic::Hardware {
            let n = model.dimension();
            let rows = cfg.hardware.active_rows(n);
            if rows < n {
                return Err(HarnessError::Config(format!(
                    "hardware.rows = {rows} is smaller than the model dimension {n}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_all_defaults() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        cfg.validate().unwrap();
        assert_eq!(cfg.points().unwrap().len(), 1);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("[hardware]\nadc_bitz = 4\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[bogus]\n").is_err());
    }

    #[test]
    fn axes_expand_in_order() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            [[sweep.axis]]
            param = "hardware.adc_bits"
            values = [3, 4]
            [[sweep.axis]]
            param = "model.distance"
            values = [1.0, 5.0, 9.0]
            "#,
        )
        .unwrap();
        let pts = cfg.points().unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0].config.hardware.adc_bits, 3);
        assert_eq!(pts[2].config.model.distance, 9.0);
        assert_eq!(pts[3].config.hardware.adc_bits, 4);
        assert_eq!(pts[3].config.model.distance, 1.0);
    }

    #[test]
    fn optional_keys_can_be_swept() {
        let cfg = ExperimentConfig::from_toml_str(
            "[[sweep.axis]]\nparam = \"hardware.rows\"\nvalues = [4, 8]\n",
        )
        .unwrap();
        let pts = cfg.points().unwrap();
        assert_eq!(pts[1].config.hardware.rows, Some(8));
    }

    #[test]
    fn bad_axes_are_config_errors() {
        for doc in [
            "[[sweep.axis]]\nparam = \"hardware.adc_bitz\"\nvalues = [3]\n",
            "[[sweep.axis]]\nparam = \"sweep.replicates\"\nvalues = [3]\n",
            "[[sweep.axis]]\nparam = \"hardware.adc_bits\"\nvalues = []\n",
            "[[sweep.axis]]\nparam = \"hardware.adc_bits\"\nvalues = [\"six\"]\n",
        ] {
            let cfg = ExperimentConfig::from_toml_str(doc).unwrap();
            assert!(
                matches!(cfg.validate(), Err(HarnessError::Config(_))),
                "{doc}"
            );
        }
    }

    #[test]
    fn invalid_values_fail_validation() {
        let cfg = ExperimentConfig::from_toml_str("[sweep]\nreplicates = 0\n").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::from_toml_str("[model]\ndistance = -1.0\n").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::from_toml_str("[hardware]\nrows = 1\n").unwrap();
        assert!(cfg.validate().is_err());
        let cfg =
            ExperimentConfig::from_toml_str("[grid]\nlower = [-1.0]\nupper = [1.0]\n").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn inline_model_parses() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            [model.inline]
            weights = [0.25, 0.75]
            means = [[0.0], [3.0]]
            stddevs = [[1.0], [0.5]]
            "#,
        )
        .unwrap();
        cfg.validate().unwrap();
        let bad = ExperimentConfig::from_toml_str(
            "[model.inline]\nweights = [0.6, 0.6]\nmeans = [[0.0], [1.0]]\nstddevs = [[1.0], [1.0]]\n",
        )
        .unwrap();
        assert!(bad.validate().is_err());
    }
}
