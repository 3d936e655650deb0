//! Metropolis-Hastings sampling of diagonal-covariance Gaussian mixtures,
//! evaluated either in exact floating point or through a behavioral model of
//! an in-SRAM analog compute datapath (DAC operand quantization, bit-sliced
//! current-mode dot products, column noise, ADC readout, TRNG bit source).
//!
//! Module map:
//!
//! - [`gmm`]: the target density, exponents, log-sum-exp and its LUT.
//! - [`sampler`]: the MH chain with incremental exponent updates.
//! - [`hardware`]: the datapath model and the random bit source.
//! - [`metrics`]: histograms, KL divergence, Monte Carlo expectations.
//! - [`perf`]: energy, power and cycle accounting.

pub mod error;
pub mod gmm;
pub mod hardware;
pub mod metrics;
pub mod perf;
pub mod rng;
pub mod sampler;

/// Crate version, recorded in result file headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use gmm::{GmmModel, LutTable};
pub use hardware::HardwareConfig;
pub use sampler::{ChainConfig, ProposalConfig, SampleTrace};
