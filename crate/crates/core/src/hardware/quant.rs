//! Fixed-point operand formats: DAC inputs, bit-sliced stored vectors, and
//! ADC output codes.

use crate::error::{Error, Result};

use super::HardwareConfig;

/// `value_i = codes_i * scale`, each code a signed `bits`-wide integer.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedVector {
    pub codes: Vec<i64>,
    pub scale: f64,
    pub bits: u32,
}

impl QuantizedVector {
    pub fn values(&self) -> Vec<f64> {
        self.codes.iter().map(|&c| c as f64 * self.scale).collect()
    }

    /// True when every code fits a signed `bits`-wide two's-complement word.
    pub fn is_representable(&self) -> bool {
        let lo = -(1i64 << (self.bits - 1));
        let hi = (1i64 << (self.bits - 1)) - 1;
        self.codes.iter().all(|c| (lo..=hi).contains(c))
    }
}

/// Largest symmetric code magnitude of a signed `bits`-wide format.
#[inline]
pub fn max_code(bits: u32) -> i64 {
    (1i64 << (bits - 1)) - 1
}

fn check_finite(v: &[f64], what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Clip to `[-Vmax, Vmax]` and round onto the signed DAC grid with
/// `scale = Vmax / (2^(dac_bits-1) - 1)`. Ties round away from zero.
pub fn quantize_dac(v: &[f64], cfg: &HardwareConfig) -> Result<QuantizedVector> {
    check_finite(v, "DAC operand")?;
    let vmax = cfg.operand_range;
    let top = max_code(cfg.dac_bits);
    let scale = vmax / top as f64;
    let codes = v
        .iter()
        .map(|&x| (x.clamp(-vmax, vmax) / scale).round() as i64)
        .map(|c| c.clamp(-top, top))
        .collect();
    Ok(QuantizedVector {
        codes,
        scale,
        bits: cfg.dac_bits,
    })
}

/// Quantize a stored vector to `bits` with a per-vector scale chosen so the
/// largest magnitude lands on the top code.
pub fn quantize_weights(w: &[f64], bits: u32) -> Result<QuantizedVector> {
    check_finite(w, "stored operand")?;
    let top = max_code(bits);
    let peak = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = if peak > 0.0 { peak / top as f64 } else { 1.0 };
    let codes = w
        .iter()
        .map(|&x| ((x / scale).round() as i64).clamp(-top, top))
        .collect();
    Ok(QuantizedVector { codes, scale, bits })
}

/// Digital weight of bit plane `k` of an `n`-bit two's-complement word.
#[inline]
pub fn plane_weight(k: u32, n: u32) -> i64 {
    if k + 1 == n {
        -(1i64 << k)
    } else {
        1i64 << k
    }
}

/// Split codes into `bits` binary planes, least significant first. The
/// last plane is the sign plane and carries weight `-2^(n-1)`.
pub fn bit_slice(w: &QuantizedVector) -> Vec<Vec<u8>> {
    (0..w.bits)
        .map(|k| w.codes.iter().map(|&c| ((c >> k) & 1) as u8).collect())
        .collect()
}

/// Inverse of [`bit_slice`].
pub fn recombine(planes: &[Vec<u8>]) -> Vec<i64> {
    let n = planes.len() as u32;
    let len = planes.first().map_or(0, Vec::len);
    (0..len)
        .map(|i| {
            planes
                .iter()
                .enumerate()
                .map(|(k, p)| i64::from(p[i]) * plane_weight(k as u32, n))
                .sum()
        })
        .collect()
}

/// Map `[-full_scale, full_scale]` onto signed `adc_bits` codes, rounding to
/// nearest and saturating outside the range.
pub fn adc_convert(analog: f64, full_scale: f64, cfg: &HardwareConfig) -> Result<i64> {
    if !analog.is_finite() {
        return Err(Error::NonFinite("ADC input"));
    }
    let top = max_code(cfg.adc_bits);
    let code = (analog / full_scale * top as f64).round();
    Ok(code.clamp(-(top as f64), top as f64) as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dac: u32, adc: u32) -> HardwareConfig {
        HardwareConfig {
            dac_bits: dac,
            adc_bits: adc,
            operand_range: 1.0,
            ..HardwareConfig::default()
        }
    }

    #[test]
    fn dac_zero_and_full_scale() {
        for bits in 2..=16 {
            let c = cfg(bits, 6);
            let q = quantize_dac(&[0.0, 1.0, -1.0, 5.0], &c).unwrap();
            assert_eq!(
                q.codes,
                vec![0, max_code(bits), -max_code(bits), max_code(bits)]
            );
            assert!(q.is_representable());
        }
    }

    #[test]
    fn dac_rounding_example() {
        let q = quantize_dac(&[0.5], &cfg(8, 6)).unwrap();
        assert_eq!(q.codes, vec![64]);
        assert!((q.values()[0] - 0.503_937).abs() < 1e-6);
    }

    #[test]
    fn dac_ties_away_from_zero() {
        // 1.5 steps and -1.5 steps with scale 1/127
        let c = cfg(8, 6);
        let q = quantize_dac(&[1.5 / 127.0, -1.5 / 127.0], &c).unwrap();
        assert_eq!(q.codes, vec![2, -2]);
    }

    #[test]
    fn dac_rejects_nan() {
        assert!(quantize_dac(&[f64::NAN], &cfg(8, 6)).is_err());
        assert!(quantize_weights(&[f64::INFINITY], 8).is_err());
    }

    #[test]
    fn slice_examples() {
        let q = |c: i64| QuantizedVector {
            codes: vec![c],
            scale: 1.0,
            bits: 4,
        };
        let flat = |p: Vec<Vec<u8>>| p.into_iter().map(|v| v[0]).collect::<Vec<_>>();
        assert_eq!(flat(bit_slice(&q(5))), vec![1, 0, 1, 0]);
        assert_eq!(flat(bit_slice(&q(0))), vec![0, 0, 0, 0]);
        assert_eq!(flat(bit_slice(&q(-1))), vec![1, 1, 1, 1]);
    }

    #[test]
    fn weights_hit_top_code() {
        let q = quantize_weights(&[4.0, -5.0, 6.0], 8).unwrap();
        assert_eq!(q.codes, vec![85, -106, 127]);
        assert!(q.is_representable());
        let z = quantize_weights(&[0.0, 0.0], 8).unwrap();
        assert_eq!(z.codes, vec![0, 0]);
    }

    #[test]
    fn adc_examples() {
        let c = cfg(8, 6);
        let fs = 31.0;
        assert_eq!(adc_convert(0.0, fs, &c).unwrap(), 0);
        assert_eq!(adc_convert(fs / 2.0, fs, &c).unwrap(), 16);
        assert_eq!(adc_convert(fs, fs, &c).unwrap(), 31);
        assert_eq!(adc_convert(10.0 * fs, fs, &c).unwrap(), 31);
        assert_eq!(adc_convert(-10.0 * fs, fs, &c).unwrap(), -31);
        assert!(adc_convert(f64::NAN, fs, &c).is_err());
    }
}
