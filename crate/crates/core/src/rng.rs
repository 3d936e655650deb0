//! Random sources driving the chain: an ideal software source and a model of
//! the on-chip metastability bit generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::hardware::trng::{trng_gaussian, trng_uniform};

/// Stream used for proposals and acceptance thresholds.
pub const STREAM_CHAIN: u64 = 0;
/// Stream used for analog noise draws, so enabling noise does not shift
/// the proposal sequence.
pub const STREAM_NOISE: u64 = 1;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform and standard-normal draws for proposals and MH thresholds.
pub trait RandomSource {
    /// A draw in `[0, 1)`.
    fn uniform(&mut self) -> f64;
    fn standard_normal(&mut self) -> f64;
}

impl<T: RandomSource + ?Sized> RandomSource for &mut T {
    fn uniform(&mut self) -> f64 {
        (**self).uniform()
    }
    fn standard_normal(&mut self) -> f64 {
        (**self).standard_normal()
    }
}

impl<T: RandomSource + ?Sized> RandomSource for Box<T> {
    fn uniform(&mut self) -> f64 {
        (**self).uniform()
    }
    fn standard_normal(&mut self) -> f64 {
        (**self).standard_normal()
    }
}

/// Which source feeds a hardware-mode chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    /// 53-bit uniforms and exact Gaussian draws.
    Ideal,
    /// TRNG bits assembled into grid uniforms, Irwin-Hall Gaussians.
    #[default]
    Trng,
}

impl std::fmt::Display for SourceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SourceKind::Ideal => "ideal",
            SourceKind::Trng => "trng",
        })
    }
}

#[derive(Debug, Clone)]
pub struct IdealSource {
    rng: ChaCha8Rng,
}

impl IdealSource {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: stream_rng(seed, STREAM_CHAIN),
        }
    }
}

impl RandomSource for IdealSource {
    fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

/// One random bit per call.
pub trait BitSource {
    fn next_bit(&mut self) -> bool;
}

/// Bernoulli(`bias`) bits: the behavioral stand-in for a cross-coupled
/// inverter pair resolving from metastability.
#[derive(Debug, Clone)]
pub struct BiasedBits {
    rng: ChaCha8Rng,
    bias: f64,
}

impl BiasedBits {
    pub fn new(seed: u64, bias: f64) -> Self {
        Self {
            rng: stream_rng(seed, STREAM_CHAIN),
            bias,
        }
    }
}

impl BitSource for BiasedBits {
    fn next_bit(&mut self) -> bool {
        if self.bias == 0.5 {
            self.rng.random::<bool>()
        } else {
            self.rng.random::<f64>() < self.bias
        }
    }
}

/// Uniforms and Gaussians built from raw TRNG bits.
#[derive(Debug, Clone)]
pub struct TrngSource<B> {
    bits: B,
    width: u32,
}

impl<B: BitSource> TrngSource<B> {
    /// `width` bits are assembled per uniform draw.
    pub fn new(bits: B, width: u32) -> Self {
        Self { bits, width }
    }
}

impl<B: BitSource> RandomSource for TrngSource<B> {
    fn uniform(&mut self) -> f64 {
        trng_uniform(&mut self.bits, self.width)
    }

    fn standard_normal(&mut self) -> f64 {
        trng_gaussian(&mut self.bits, self.width)
    }
}
