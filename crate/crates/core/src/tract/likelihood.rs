use crate::dti::VoxelModelParams;
use crate::dwi::GradientTable;
use crate::error::{Error, Result};
use crate::sphere::SpherePointSet;
use crate::vec3::{dot, Vec3};

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// Per-voxel constants of the constrained log-signal likelihood
/// `Σⱼ [ln μⱼ − ln(σ√(2π)) − (μⱼ²/2σ²)(zⱼ − ln μⱼ)²]` with
/// `ln μⱼ = ln μ0 − α bⱼ − β bⱼ (gⱼᵀv)²`.
#[derive(Debug, Clone)]
pub struct LikelihoodModel {
    /// `(zⱼ, ln μ0 − α bⱼ, β bⱼ, gⱼ)`
    shells: Vec<(f64, f64, f64, Vec3)>,
    norm_term: f64,
    inv_two_var: f64,
}

impl LikelihoodModel {
    pub fn new(signals: &[f64], params: &VoxelModelParams, table: &GradientTable) -> Result<Self> {
        if !(params.sigma > 0.0 && params.sigma.is_finite()) {
            return Err(Error::DegenerateModel(format!(
                "likelihood needs σ > 0, got {}",
                params.sigma
            )));
        }
        if !(params.mu0 > 0.0) {
            return Err(Error::DegenerateModel(format!(
                "likelihood needs μ0 > 0, got {}",
                params.mu0
            )));
        }
        if signals.len() != table.len() {
            return Err(Error::Precondition(format!(
                "{} signals for a {}-entry table",
                signals.len(),
                table.len()
            )));
        }
        let ln_mu0 = params.mu0.ln();
        let shells = signals
            .iter()
            .zip(table.iter())
            .map(|(&s, e)| {
                if s > 0.0 {
                    Ok((
                        s.ln(),
                        ln_mu0 - params.alpha * e.b_value,
                        params.beta * e.b_value,
                        e.gradient,
                    ))
                } else {
                    Err(Error::Precondition(format!("signal {s} is not positive")))
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            shells,
            norm_term: params.sigma.ln() + HALF_LN_TWO_PI,
            inv_two_var: 0.5 / (params.sigma * params.sigma),
        })
    }

    /// Log-likelihood of orientation `v`.
    #[inline]
    pub fn eval(&self, v: &Vec3) -> f64 {
        let mut acc = 0.0;
        for &(z, base, beta_b, g) in &self.shells {
            let c = dot(&g, v);
            let ln_mu = base - beta_b * c * c;
            let mu_sq = (2.0 * ln_mu).exp();
            let r = z - ln_mu;
            acc += ln_mu - self.norm_term - mu_sq * self.inv_two_var * r * r;
        }
        acc
    }

    /// Log-likelihood at every point of `sphere`.
    pub fn eval_sphere(&self, sphere: &SpherePointSet) -> Vec<f64> {
        sphere.points().iter().map(|p| self.eval(p)).collect()
    }
}

/// Log-likelihood of one orientation for one voxel.
pub fn log_likelihood(
    signals: &[f64],
    params: &VoxelModelParams,
    v: &Vec3,
    table: &GradientTable,
) -> Result<f64> {
    Ok(LikelihoodModel::new(signals, params, table)?.eval(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dwi::GradientTable;

    fn params(beta: f64) -> VoxelModelParams {
        VoxelModelParams {
            mu0: 90.0,
            alpha: 0.3e-3,
            beta,
            v_hat: [1.0, 0.0, 0.0],
            sigma: 0.05,
        }
    }

    #[test]
    fn beta_zero_is_orientation_free() {
        let table = GradientTable::six_direction(1000.0);
        let s = vec![90.0, 60.0, 50.0, 40.0, 55.0, 62.0, 48.0];
        let m = LikelihoodModel::new(&s, &params(0.0), &table).unwrap();
        let a = m.eval(&[1.0, 0.0, 0.0]);
        for v in [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.6, 0.8, 0.0]] {
            assert_eq!(m.eval(&v), a);
        }
    }

    #[test]
    fn exact_fit_leaves_normalization_only() {
        let table = GradientTable::six_direction(1000.0);
        let p = params(1.2e-3);
        let v = [0.0, 0.6, 0.8];
        let mus: Vec<f64> = table
            .iter()
            .map(|e| {
                p.mu0 * (-p.alpha * e.b_value).exp() * (-p.beta * e.b_value * dot(&e.gradient, &v).powi(2)).exp()
            })
            .collect();
        let ll = log_likelihood(&mus, &p, &v, &table).unwrap();
        let expect: f64 = mus
            .iter()
            .map(|mu| mu.ln() - (p.sigma * (2.0 * std::f64::consts::PI).sqrt()).ln())
            .sum();
        assert!((ll - expect).abs() < 1e-9, "{ll} vs {expect}");
    }

    #[test]
    fn zero_sigma_is_degenerate() {
        let table = GradientTable::six_direction(1000.0);
        let p = VoxelModelParams {
            sigma: 0.0,
            ..params(1e-3)
        };
        assert!(matches!(
            log_likelihood(&[1.0; 7], &p, &[1.0, 0.0, 0.0], &table),
            Err(Error::DegenerateModel(_))
        ));
    }
}
