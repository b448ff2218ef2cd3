use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::sphere::SpherePointSet;
use crate::vec3::{dot, Vec3};

/// Probability mass over the points of a sphere set.
#[derive(Debug, Clone)]
pub struct OrientationDistribution {
    sphere: Arc<SpherePointSet>,
    probs: Vec<f64>,
}

impl OrientationDistribution {
    /// Wraps already-normalized probabilities.
    pub fn new(sphere: Arc<SpherePointSet>, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != sphere.len() {
            return Err(Error::Precondition(format!(
                "{} probabilities for {} sphere points",
                probs.len(),
                sphere.len()
            )));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Precondition("probabilities must be ≥ 0".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Precondition(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { sphere, probs })
    }

    pub fn sphere(&self) -> &SpherePointSet {
        &self.sphere
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Index of the most probable point (lowest index on ties).
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Clamped-linear directional prior: `max(vᵀv_prev, 0)`.
#[inline]
pub fn prior_weight(v: &Vec3, v_prev: &Vec3) -> f64 {
    let c = dot(v, v_prev);
    if c >= 0.0 {
        c
    } else {
        0.0
    }
}

/// Normalizes `exp(log_like) · prior` over the sphere.
///
/// `v_prev = None` applies a uniform prior over the whole sphere, which is
/// how the first direction at a seed is drawn.
pub fn posterior(
    log_likes: &[f64],
    v_prev: Option<&Vec3>,
    sphere: &Arc<SpherePointSet>,
) -> Result<OrientationDistribution> {
    if log_likes.len() != sphere.len() {
        return Err(Error::Precondition(format!(
            "{} log-likelihoods for {} sphere points",
            log_likes.len(),
            sphere.len()
        )));
    }
    if log_likes.iter().any(|l| l.is_nan()) {
        return Err(Error::Domain("log-likelihood is NaN".into()));
    }
    let priors: Vec<f64> = match v_prev {
        Some(prev) => sphere.points().iter().map(|p| prior_weight(p, prev)).collect(),
        None => vec![1.0; sphere.len()],
    };
    // max over the prior's support so forward mass cannot underflow away
    let max = log_likes
        .iter()
        .zip(&priors)
        .filter(|(_, w)| **w > 0.0)
        .map(|(l, _)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DeadEnd);
    }
    let mut probs: Vec<f64> = log_likes
        .iter()
        .zip(&priors)
        .map(|(l, w)| if *w > 0.0 { (l - max).exp() * w } else { 0.0 })
        .collect();
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DeadEnd);
    }
    for p in probs.iter_mut() {
        *p /= total;
    }
    Ok(OrientationDistribution {
        sphere: Arc::clone(sphere),
        probs,
    })
}

/// Inverse-CDF draw over the fixed point order.
pub fn sample_direction<R: Rng + ?Sized>(dist: &OrientationDistribution, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, p) in dist.probs.iter().enumerate() {
        if *p > 0.0 {
            cum += p;
            last_positive = i;
            if cum > u {
                return i;
            }
        }
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::sphere::icosphere;

    #[test]
    fn prior_examples() {
        let x = [1.0, 0.0, 0.0];
        assert_eq!(prior_weight(&x, &x), 1.0);
        assert_eq!(prior_weight(&[0.0, 1.0, 0.0], &x), 0.0);
        assert_eq!(prior_weight(&[-1.0, 0.0, 0.0], &x), 0.0);
        let h = 0.5f64.sqrt();
        assert!((prior_weight(&[h, h, 0.0], &x) - h).abs() < 1e-16);
    }

    #[test]
    fn uniform_likelihood_gives_clamped_cosine() {
        let sphere = Arc::new(icosphere(2).unwrap());
        let prev = sphere.point(5);
        let post = posterior(&vec![-3.0; sphere.len()], Some(&prev), &sphere).unwrap();
        let weights: Vec<f64> = sphere.points().iter().map(|p| dot(p, &prev).max(0.0)).collect();
        let total: f64 = weights.iter().sum();
        for (p, w) in post.probs().iter().zip(&weights) {
            assert!((p - w / total).abs() < 1e-15);
        }
    }

    #[test]
    fn dominant_point_takes_all_mass() {
        let sphere = Arc::new(icosphere(3).unwrap());
        let prev = [0.0, 0.0, 1.0];
        let k = crate::sphere::nearest_point(&[0.3, 0.1, 0.9], &sphere);
        let mut ll = vec![-100.0; sphere.len()];
        ll[k] = -40.0;
        let post = posterior(&ll, Some(&prev), &sphere).unwrap();
        assert!(post.probs()[k] > 1.0 - 1e-12);
        assert_eq!(post.mode(), k);
    }

    #[test]
    fn backward_only_support_is_dead_end() {
        let sphere = Arc::new(icosphere(0).unwrap());
        let mut ll = vec![f64::NEG_INFINITY; sphere.len()];
        // only finite likelihood lies behind the previous direction
        let prev = sphere.point(0);
        let behind = crate::sphere::nearest_point(&crate::vec3::neg(&prev), &sphere);
        ll[behind] = 0.0;
        assert!(matches!(posterior(&ll, Some(&prev), &sphere), Err(Error::DeadEnd)));
    }

    #[test]
    fn single_atom_always_sampled() {
        let sphere = Arc::new(icosphere(0).unwrap());
        let mut probs = vec![0.0; 12];
        probs[7] = 1.0;
        let d = OrientationDistribution::new(sphere, probs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..1000).all(|_| sample_direction(&d, &mut rng) == 7));
    }

    #[test]
    fn two_equal_atoms_split_evenly() {
        let sphere = Arc::new(icosphere(0).unwrap());
        let mut probs = vec![0.0; 12];
        probs[2] = 0.5;
        probs[9] = 0.5;
        let d = OrientationDistribution::new(sphere, probs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| sample_direction(&d, &mut rng) == 2).count();
        let frac = hits as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.002, "{frac}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let sphere = Arc::new(icosphere(1).unwrap());
        let post = posterior(&vec![0.0; sphere.len()], None, &sphere).unwrap();
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            (0..50).map(|_| sample_direction(&post, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }
}
