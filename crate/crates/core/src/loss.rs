//! Angular distance between orientation vectors: the arccos form, which
//! is singular at (anti)alignment, and the atan2 form used for training.

use crate::error::{Error, Result};
use crate::vec3::{cross, dot, norm, Vec3};

/// `|x|` above this counts as a singular arccos configuration.
pub const ARCCOS_SINGULAR_TOLERANCE: f64 = 1e-12;
/// Gradient of the atan2 form is refused when `sin θ` is below this.
pub const PARALLEL_TOLERANCE: f64 = 1e-10;

/// An angle in radians, always within `[0, π]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AngleLoss(pub f64);

impl AngleLoss {
    pub fn radians(&self) -> f64 {
        self.0
    }

    pub fn degrees(&self) -> f64 {
        self.0.to_degrees()
    }
}

/// Gradient of an angle with respect to the estimate vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossGradient {
    pub d_theta_d_w: Vec3,
}

impl LossGradient {
    pub fn norm(&self) -> f64 {
        norm(&self.d_theta_d_w)
    }
}

fn nonzero(v: &Vec3, what: &str) -> Result<f64> {
    let n = norm(v);
    if n > 0.0 && n.is_finite() {
        Ok(n)
    } else {
        Err(Error::Domain(format!("{what} must have nonzero finite norm")))
    }
}

/// `(v·w)/(‖v‖‖w‖)` clamped to `[−1, 1]`.
pub fn cosine_similarity(v: &Vec3, w: &Vec3) -> Result<f64> {
    let nv = nonzero(v, "v")?;
    let nw = nonzero(w, "w")?;
    Ok((dot(v, w) / (nv * nw)).clamp(-1.0, 1.0))
}

/// Angle via arccos of the cosine similarity, with its gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArccosAngle {
    pub angle: AngleLoss,
    /// `dθ/dx = −1/√(1 − x²)`; infinite at `|x| = 1`.
    pub scalar_factor: f64,
    pub gradient: LossGradient,
    /// Set when `|x| > 1 − 1e-12`, where the factor blows up.
    pub singular: bool,
}

pub fn angle_arccos(v: &Vec3, w: &Vec3) -> Result<ArccosAngle> {
    let nv = nonzero(v, "v")?;
    let nw = nonzero(w, "w")?;
    let x = cosine_similarity(v, w)?;
    let scalar_factor = -1.0 / (1.0 - x * x).sqrt();
    // dx/dw = v/(‖v‖‖w‖) − x·w/‖w‖²
    let g = [0, 1, 2].map(|k| scalar_factor * (v[k] / (nv * nw) - x * w[k] / (nw * nw)));
    Ok(ArccosAngle {
        angle: AngleLoss(x.acos()),
        scalar_factor,
        gradient: LossGradient { d_theta_d_w: g },
        singular: x.abs() > 1.0 - ARCCOS_SINGULAR_TOLERANCE,
    })
}

/// `atan2(‖v × w‖, v·w)`.
pub fn angle_atan2(v: &Vec3, w: &Vec3) -> Result<AngleLoss> {
    nonzero(v, "v")?;
    nonzero(w, "w")?;
    Ok(AngleLoss(norm(&cross(v, w)).atan2(dot(v, w))))
}

/// `∂θ/∂w` of the atan2 angle, with `v` held fixed as the ground truth.
///
/// With `x = ‖v×w‖` and `y = v·w`, `dθ = (y dx − x dy)/(x² + y²)` where
/// `dx/dw = ((v×w)×v)/x` and `dy/dw = v`.
pub fn grad_atan2(v: &Vec3, w: &Vec3) -> Result<LossGradient> {
    let nv = nonzero(v, "v")?;
    let nw = nonzero(w, "w")?;
    let u = cross(v, w);
    let x = norm(&u);
    let y = dot(v, w);
    if x <= PARALLEL_TOLERANCE * nv * nw {
        return Err(Error::GradientUndefined(
            "vectors are parallel or antiparallel".into(),
        ));
    }
    let dx = cross(&u, v);
    let r2 = x * x + y * y;
    let g = [0, 1, 2].map(|k| (y * dx[k] / x - x * v[k]) / r2);
    Ok(LossGradient { d_theta_d_w: g })
}

/// Sign-invariant angle `min(θ(v, w), θ(v, −w))` and its gradient in `w`.
///
/// Orientations are axial, so a prediction and its negation are equivalent.
/// Returns a zero gradient and `degenerate = true` when the gradient is
/// undefined (the loss is already at an extremum).
pub fn axial_angle_atan2(v: &Vec3, w: &Vec3) -> Result<(AngleLoss, LossGradient, bool)> {
    nonzero(v, "v")?;
    nonzero(w, "w")?;
    let x = norm(&cross(v, w));
    let y = dot(v, w);
    let theta = x.atan2(y.abs());
    let flip = y < 0.0;
    match grad_atan2(v, w) {
        Ok(g) => {
            let s = if flip { -1.0 } else { 1.0 };
            Ok((
                AngleLoss(theta),
                LossGradient {
                    d_theta_d_w: g.d_theta_d_w.map(|c| s * c),
                },
                false,
            ))
        }
        Err(Error::GradientUndefined(_)) => Ok((
            AngleLoss(theta),
            LossGradient {
                d_theta_d_w: [0.0; 3],
            },
            true,
        )),
        Err(e) => Err(e),
    }
}

/// Central finite differences of `f` at `x` with step `h`.
pub fn finite_difference<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let plus = f(&probe);
            probe[i] = x[i] - h;
            let minus = f(&probe);
            probe[i] = x[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use super::*;

    #[test]
    fn cosine_examples() {
        let x = [1.0, 0.0, 0.0];
        assert_eq!(cosine_similarity(&x, &x).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&x, &[0.0, 2.0, 0.0]).unwrap(), 0.0);
        let c = cosine_similarity(&x, &[1.0, 1.0, 0.0]).unwrap();
        assert!((c - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(cosine_similarity(&x, &[0.0; 3]).is_err());
    }

    #[test]
    fn arccos_examples() {
        let x = [1.0, 0.0, 0.0];
        let a = angle_arccos(&x, &x).unwrap();
        assert_eq!(a.angle.0, 0.0);
        assert!(a.singular);
        let o = angle_arccos(&x, &[0.0, 1.0, 0.0]).unwrap();
        assert!((o.angle.0 - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(o.scalar_factor.abs(), 1.0);
        assert!(!o.singular);
        let t: f64 = 1e-4;
        let s = angle_arccos(&x, &[t.cos(), t.sin(), 0.0]).unwrap();
        // 1/sin(1e-4) ≈ 1.0000000016666665e4
        assert!(s.scalar_factor.abs() > 1e3);
        assert!((s.scalar_factor.abs() - 10000.000016666665).abs() < 1e-3 * 1e4);
    }

    #[test]
    fn atan2_examples() {
        let v = [0.3, -0.2, 0.9];
        assert_eq!(angle_atan2(&v, &v).unwrap().0, 0.0);
        let w = [-0.3, 0.2, -0.9];
        assert!((angle_atan2(&v, &w).unwrap().0 - PI).abs() < 1e-15);
        assert!(angle_atan2(&[0.0; 3], &v).is_err());
    }

    #[test]
    fn atan2_gradient_orthogonal() {
        let v = [1.0, 0.0, 0.0];
        let w = [0.0, 1.0, 0.0];
        let g = grad_atan2(&v, &w).unwrap();
        assert!((g.norm() - 1.0).abs() < 1e-15);
        assert!((g.d_theta_d_w[0] + 1.0).abs() < 1e-15);
        let fd = finite_difference(
            |p| angle_atan2(&v, &[p[0], p[1], p[2]]).unwrap().0,
            &w,
            1e-6,
        );
        for k in 0..3 {
            assert!((fd[k] - g.d_theta_d_w[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn atan2_gradient_refuses_parallel() {
        let v = [0.0, 0.0, 2.0];
        assert!(matches!(
            grad_atan2(&v, &[0.0, 0.0, 1.0]),
            Err(Error::GradientUndefined(_))
        ));
        assert!(grad_atan2(&v, &[0.0, 0.0, -1.0]).is_err());
    }

    #[test]
    fn axial_angle_is_sign_invariant() {
        let v = [0.2, 0.5, -0.7];
        let w = [0.4, 0.1, -0.3];
        let neg = w.map(|c| -c);
        let (a, ga, _) = axial_angle_atan2(&v, &w).unwrap();
        let (b, gb, _) = axial_angle_atan2(&v, &neg).unwrap();
        assert!((a.0 - b.0).abs() < 1e-15);
        for k in 0..3 {
            assert!((ga.d_theta_d_w[k] + gb.d_theta_d_w[k]).abs() < 1e-15);
        }
        let fd = finite_difference(
            |p| axial_angle_atan2(&v, &[p[0], p[1], p[2]]).unwrap().0 .0,
            &neg,
            1e-6,
        );
        for k in 0..3 {
            assert!((fd[k] - gb.d_theta_d_w[k]).abs() < 1e-8);
        }
        let (_, g, degenerate) = axial_angle_atan2(&v, &v).unwrap();
        assert!(degenerate && g.d_theta_d_w == [0.0; 3]);
    }

    #[test]
    fn finite_difference_examples() {
        let c = [0.5, -2.0, 3.0];
        let g = finite_difference(|x| x.iter().zip(&c).map(|(a, b)| a * b).sum(), &[1.0, 2.0, 3.0], 1e-3);
        for k in 0..3 {
            assert!((g[k] - c[k]).abs() < 1e-10);
        }
        let x = [0.3, -1.2, 2.5];
        let g = finite_difference(|x| x.iter().map(|a| a * a).sum(), &x, 1e-5);
        for k in 0..3 {
            assert!((g[k] - 2.0 * x[k]).abs() < 1e-8);
        }
    }
}
