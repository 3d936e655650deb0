use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sram_mcmc::hardware::{
    adc_convert, bit_slice, column_accumulate, dot_product_hw_report, quantize_weights, recombine,
    sample_column_noise, HardwareConfig,
};

fn noisy(sigma: f64) -> HardwareConfig {
    HardwareConfig {
        noise_sigma_norm: sigma,
        ..HardwareConfig::default()
    }
}

proptest! {
    #[test]
    fn adc_is_monotone(a in -100.0f64..100.0, b in -100.0f64..100.0, bits in 2u32..=12) {
        let cfg = HardwareConfig { adc_bits: bits, ..HardwareConfig::default() };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(adc_convert(lo, 32.0, &cfg).unwrap() <= adc_convert(hi, 32.0, &cfg).unwrap());
    }

    #[test]
    fn slicing_round_trips_quantized_weights(
        w in prop::collection::vec(-10.0f64..10.0, 1..20),
        bits in 2u32..=16,
    ) {
        let q = quantize_weights(&w, bits).unwrap();
        prop_assert_eq!(recombine(&bit_slice(&q)), q.codes);
    }

    #[test]
    fn zero_current_stays_zero(sigma in 0.0f64..3.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert_eq!(sample_column_noise(0.0, &noisy(sigma), &mut rng), 0.0);
    }
}

#[test]
fn column_noise_is_log_normal() {
    let cfg = noisy(1.43);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let plane = [1u8, 0, 1, 1];
    let dac = [1.0, 2.0, 0.5, 0.25];
    let logs: Vec<f64> = (0..100_000)
        .map(|_| {
            column_accumulate(&plane, &dac, &mut rng, &cfg)
                .unwrap()
                .ln()
        })
        .collect();
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let m2 = logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
    let m3 = logs.iter().map(|l| (l - mean).powi(3)).sum::<f64>() / n;
    let skew = m3 / m2.powf(1.5);
    // standard error of sample skewness is sqrt(6/n) ~ 0.008
    assert!(skew.abs() < 0.04, "skewness of log {skew}");
}

#[test]
fn dot_product_with_wide_adc_is_exact_on_quantized_operands() {
    let cfg = HardwareConfig {
        adc_bits: 40,
        ..HardwareConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..500 {
        let n = rng.random_range(1..=12);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..=4.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..=5.0)).collect();
        let d = dot_product_hw_report(&v, &w, &cfg, &mut rng).unwrap();
        assert!(
            (d.value - d.quantized_exact).abs() < 1e-6,
            "{} vs {}",
            d.value,
            d.quantized_exact
        );
    }
}

#[test]
fn small_integer_dot_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let d = dot_product_hw_report(
        &[1.0, 2.0, 3.0],
        &[4.0, 5.0, 6.0],
        &HardwareConfig::default(),
        &mut rng,
    )
    .unwrap();
    assert!((d.value - 32.0).abs() <= d.lsb_equivalent, "{}", d.value);
    let z = dot_product_hw_report(&[0.0; 3], &[4.0, 5.0, 6.0], &noisy(1.43), &mut rng).unwrap();
    assert_eq!(z.value, 0.0);
}
