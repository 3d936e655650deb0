//! Conversions from raw TRNG bits to uniform and Gaussian draws.

use crate::rng::BitSource;

/// Assemble `width` bits (first bit most significant) into an integer `m`
/// and return `(m + 0.5) / 2^width`, a mid-rise point on a `2^width` grid.
pub fn trng_uniform<B: BitSource + ?Sized>(bits: &mut B, width: u32) -> f64 {
    let mut m: u64 = 0;
    for _ in 0..width {
        m = (m << 1) | u64::from(bits.next_bit());
    }
    (m as f64 + 0.5) / 2f64.powi(width as i32)
}

/// Irwin-Hall approximation of a standard normal: twelve uniforms minus six.
pub fn trng_gaussian<B: BitSource + ?Sized>(bits: &mut B, width: u32) -> f64 {
    (0..12).map(|_| trng_uniform(bits, width)).sum::<f64>() - 6.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::BiasedBits;

    struct Zeros;
    impl BitSource for Zeros {
        fn next_bit(&mut self) -> bool {
            false
        }
    }

    /// Records every bit it hands out.
    struct Tap<B> {
        inner: B,
        seen: Vec<bool>,
    }
    impl<B: BitSource> BitSource for Tap<B> {
        fn next_bit(&mut self) -> bool {
            let b = self.inner.next_bit();
            self.seen.push(b);
            b
        }
    }

    #[test]
    fn zero_bits_give_lowest_grid_point() {
        assert_eq!(trng_uniform(&mut Zeros, 8), 0.5 / 256.0);
        let g = trng_gaussian(&mut Zeros, 8);
        assert_eq!(g, 12.0 * (0.5 / 256.0) - 6.0);
        assert!((g + 6.0).abs() < 0.03);
    }

    #[test]
    fn uniform_mean() {
        let mut bits = BiasedBits::new(11, 0.5);
        let n = 100_000;
        let mean = (0..n).map(|_| trng_uniform(&mut bits, 8)).sum::<f64>() / n as f64;
        assert!((0.495..=0.505).contains(&mean), "mean {mean}");
    }

    #[test]
    fn biased_bits_per_position() {
        let width = 8u32;
        let mut tap = Tap {
            inner: BiasedBits::new(5, 0.7),
            seen: Vec::new(),
        };
        let n = 100_000;
        for _ in 0..n {
            trng_uniform(&mut tap, width);
        }
        for pos in 0..width as usize {
            let ones = tap
                .seen
                .iter()
                .skip(pos)
                .step_by(width as usize)
                .filter(|b| **b)
                .count();
            let frac = ones as f64 / n as f64;
            assert!((0.69..=0.71).contains(&frac), "position {pos}: {frac}");
        }
    }

    #[test]
    fn gaussian_moments_and_support() {
        let mut bits = BiasedBits::new(9, 0.5);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| trng_gaussian(&mut bits, 8)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((-0.02..=0.02).contains(&mean), "mean {mean}");
        assert!((0.97..=1.03).contains(&var), "var {var}");
        assert!(draws.iter().all(|d| (-6.0..=6.0).contains(d)));
    }
}
