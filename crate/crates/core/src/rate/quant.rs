use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Quantization step control: values are scaled by `q` before rounding, so
/// the reconstruction step is `1 / q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantConfig {
    q: f64,
}

impl QuantConfig {
    pub fn new(q: f64) -> Result<Self> {
        ensure!(
            q.is_finite() && q > 0.0,
            Config,
            "quantization parameter must be positive, got {q}"
        );
        Ok(QuantConfig { q })
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

/// Project-wide rounding rule: half away from zero.
#[inline]
pub fn round_half_away(x: f64) -> f64 {
    x.round()
}

/// Training-time stand-in for rounding: `(q x + u) / q`, `u ~ U(-1/2, 1/2)`
/// drawn independently per element. The map is treated as the identity by
/// the backward pass.
pub fn simulate_quantize<R: Rng + ?Sized>(x: &[f64], quant: QuantConfig, rng: &mut R) -> Vec<f64> {
    let mut out = x.to_vec();
    simulate_quantize_in_place(&mut out, quant, rng);
    out
}

pub fn simulate_quantize_in_place<R: Rng + ?Sized>(x: &mut [f64], quant: QuantConfig, rng: &mut R) {
    let q = quant.q();
    for v in x.iter_mut() {
        let u: f64 = rng.gen::<f64>() - 0.5;
        *v = (q * *v + u) / q;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stays_within_half_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..1000).map(|i| (i as f64 - 500.0) * 0.013).collect();
        for q in [1.0, 2.0, 5.0, 10.0, 0.3] {
            let y = simulate_quantize(&x, QuantConfig::new(q).unwrap(), &mut rng);
            for (a, b) in x.iter().zip(&y) {
                assert!((a - b).abs() <= 0.5 / q + 1e-12);
            }
        }
    }

    #[test]
    fn zero_at_q10_stays_in_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = simulate_quantize(&[0.0; 500], QuantConfig::new(10.0).unwrap(), &mut rng);
        assert!(y.iter().all(|v| (-0.05..=0.05).contains(v)));
    }

    #[test]
    fn noise_is_zero_mean() {
        // Mean of U(-1/2, 1/2) / q over 1e6 draws: std = 1 / (q sqrt(12e6)).
        let q = 5.0;
        let n = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = simulate_quantize(&vec![0.25; n], QuantConfig::new(q).unwrap(), &mut rng);
        let mean = y.iter().map(|v| v - 0.25).sum::<f64>() / n as f64;
        let three_sigma = 3.0 / ((12.0 * n as f64).sqrt() * q);
        assert!(mean.abs() < three_sigma, "{mean} vs {three_sigma}");
    }

    #[test]
    fn reproducible_with_seed() {
        let x = [0.1, -0.2, 0.3];
        let qc = QuantConfig::new(2.0).unwrap();
        let a = simulate_quantize(&x, qc, &mut ChaCha8Rng::seed_from_u64(4));
        let b = simulate_quantize(&x, qc, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
    }

    #[test]
    fn rounding_rule() {
        assert_eq!(round_half_away(2.5), 3.0);
        assert_eq!(round_half_away(-2.5), -3.0);
        assert_eq!(round_half_away(-0.4), 0.0);
        assert!(QuantConfig::new(0.0).is_err());
    }
}
