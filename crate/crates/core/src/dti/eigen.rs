use super::DiffusionTensor;
use crate::error::{Error, Result};
use crate::vec3::Vec3;

const OFF_DIAGONAL_TOLERANCE: f64 = 1e-13;
const MAX_SWEEPS: usize = 64;

/// Eigen-decomposition of a symmetric 3×3 tensor with eigenvalues sorted
/// in descending order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorDecomposition {
    /// λ1 ≥ λ2 ≥ λ3 exactly as computed; may be negative for noisy fits.
    pub eigenvalues: [f64; 3],
    /// Unit eigenvectors ê1, ê2, ê3 matching `eigenvalues`.
    pub eigenvectors: [Vec3; 3],
}

/// Floor applied to eigenvalues before scalar maps and model parameters.
pub const EIGENVALUE_FLOOR: f64 = 1e-9;

impl TensorDecomposition {
    pub fn principal(&self) -> Vec3 {
        self.eigenvectors[0]
    }

    /// Copy with every eigenvalue raised to at least [`EIGENVALUE_FLOOR`].
    pub fn clamped(&self) -> Self {
        Self {
            eigenvalues: self.eigenvalues.map(|l| l.max(EIGENVALUE_FLOOR)),
            eigenvectors: self.eigenvectors,
        }
    }

    pub fn reconstruct(&self) -> DiffusionTensor {
        DiffusionTensor::from_eigen(self.eigenvalues, self.eigenvectors)
    }
}

/// Cyclic Jacobi diagonalization.
///
/// Each eigenvector is sign-normalized so its largest-magnitude component is
/// positive, with ties resolved toward the earliest axis.
pub fn eigendecompose(d: &DiffusionTensor) -> Result<TensorDecomposition> {
    let mut a = d.to_matrix();
    if a.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Fit("tensor has non-finite components".into()));
    }
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let scale = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let threshold = OFF_DIAGONAL_TOLERANCE * scale;

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let off = (2.0 * (a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2])).sqrt();
        if off <= threshold {
            converged = true;
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            // A ← Jᵀ A J with J the rotation in the (p, q) plane
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            a[p][q] = 0.0;
            a[q][p] = 0.0;
            for row in v.iter_mut() {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    if !converged {
        return Err(Error::Fit(format!(
            "Jacobi iteration did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let eigenvalues = order.map(|i| a[i][i]);
    let eigenvectors = order.map(|i| canonical_sign([v[0][i], v[1][i], v[2][i]]));
    Ok(TensorDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn canonical_sign(e: Vec3) -> Vec3 {
    let mut lead = 0;
    for k in 1..3 {
        if e[k].abs() > e[lead].abs() {
            lead = k;
        }
    }
    if e[lead] < 0.0 {
        [-e[0], -e[1], -e[2]]
    } else {
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec3::{dot, norm};

    #[test]
    fn diagonal_tensor() {
        let dec = eigendecompose(&DiffusionTensor::diagonal(3.0, 2.0, 1.0)).unwrap();
        assert_eq!(dec.eigenvalues, [3.0, 2.0, 1.0]);
        assert_eq!(
            dec.eigenvectors,
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        );
        let dec = eigendecompose(&DiffusionTensor::diagonal(1.0, 3.0, 2.0)).unwrap();
        assert_eq!(dec.eigenvalues, [3.0, 2.0, 1.0]);
        assert_eq!(dec.eigenvectors[0], [0.0, 1.0, 0.0]);
    }

    #[test]
    fn degenerate_spectrum() {
        let d = DiffusionTensor::isotropic(0.7e-3);
        let dec = eigendecompose(&d).unwrap();
        assert_eq!(dec.eigenvalues, [0.7e-3; 3]);
        assert!(dec.reconstruct().max_abs_diff(&d) < 1e-15);
        let dec = eigendecompose(&DiffusionTensor::zero()).unwrap();
        assert_eq!(dec.eigenvalues, [0.0; 3]);
    }

    #[test]
    fn sign_convention() {
        let d = DiffusionTensor {
            dxx: 1.0,
            dyy: 1.0,
            dzz: 0.2,
            dxy: -0.5,
            dxz: 0.0,
            dyz: 0.0,
        };
        let dec = eigendecompose(&d).unwrap();
        // principal axis (1,-1,0)/√2: tie in magnitude resolved by x
        let e1 = dec.principal();
        assert!(e1[0] > 0.0 && e1[1] < 0.0);
        assert!((e1[0] + e1[1]).abs() < 1e-15);
        for e in dec.eigenvectors {
            assert!((norm(&e) - 1.0).abs() < 1e-12);
        }
        assert!(dot(&dec.eigenvectors[0], &dec.eigenvectors[1]).abs() < 1e-12);
    }

    #[test]
    fn clamps_negative_eigenvalues_only_on_request() {
        let d = DiffusionTensor::diagonal(2.0, 0.5, -0.1);
        let dec = eigendecompose(&d).unwrap();
        assert_eq!(dec.eigenvalues[2], -0.1);
        assert_eq!(dec.clamped().eigenvalues, [2.0, 0.5, EIGENVALUE_FLOOR]);
    }
}
