use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SIGNAL_FLOOR;

/// Where the Gaussian perturbation is applied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    /// `exp(ln s + ε)`, the model the likelihood assumes.
    #[default]
    Log,
    /// `s + σ·S0·ε`, clamped at the signal floor.
    Linear,
}

/// Returns `exp(ln(signal) + ε)` with `ε ~ N(0, sigma²)`.
pub fn add_log_noise<R: Rng + ?Sized>(signal: f64, sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return signal;
    }
    let eps: f64 = rng.sample(StandardNormal);
    (signal.ln() + sigma * eps).exp()
}

/// Additive Gaussian noise with standard deviation `sigma · s0`.
pub fn add_linear_noise<R: Rng + ?Sized>(signal: f64, sigma: f64, s0: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return signal;
    }
    let eps: f64 = rng.sample(StandardNormal);
    (signal + sigma * s0 * eps).max(SIGNAL_FLOOR)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn zero_sigma_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for s in [1e-6, 0.37, 55.0] {
            assert_eq!(add_log_noise(s, 0.0, &mut rng), s);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            (0..16)
                .map(|_| add_log_noise(10.0, 0.1, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn log_residual_moments() {
        // Monte-Carlo moment check over 1e6 draws.
        let sigma = 0.05;
        let n = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..n {
            let r = (add_log_noise(20.0, sigma, &mut rng) / 20.0).ln();
            sum += r;
            sum_sq += r * r;
        }
        let mean = sum / n as f64;
        let std = (sum_sq / n as f64 - mean * mean).sqrt();
        assert!((std - sigma).abs() < 0.01 * sigma, "std {std}");
        let stderr = sigma / (n as f64).sqrt();
        assert!(mean.abs() < 3.0 * stderr, "mean {mean}");
    }
}
