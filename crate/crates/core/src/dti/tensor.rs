use serde::{Deserialize, Serialize};

use crate::vec3::Vec3;

/// Symmetric diffusion tensor stored as its six unique components (mm²/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiffusionTensor {
    pub dxx: f64,
    pub dyy: f64,
    pub dzz: f64,
    pub dxy: f64,
    pub dxz: f64,
    pub dyz: f64,
}

impl DiffusionTensor {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn isotropic(d: f64) -> Self {
        Self::diagonal(d, d, d)
    }

    pub fn diagonal(a: f64, b: f64, c: f64) -> Self {
        Self {
            dxx: a,
            dyy: b,
            dzz: c,
            ..Self::default()
        }
    }

    /// Components in the order `(xx, yy, zz, xy, xz, yz)`.
    pub fn components(&self) -> [f64; 6] {
        [self.dxx, self.dyy, self.dzz, self.dxy, self.dxz, self.dyz]
    }

    pub fn from_components(c: [f64; 6]) -> Self {
        Self {
            dxx: c[0],
            dyy: c[1],
            dzz: c[2],
            dxy: c[3],
            dxz: c[4],
            dyz: c[5],
        }
    }

    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        [
            [self.dxx, self.dxy, self.dxz],
            [self.dxy, self.dyy, self.dyz],
            [self.dxz, self.dyz, self.dzz],
        ]
    }

    /// Builds a tensor from a matrix, averaging the off-diagonal pairs.
    pub fn from_matrix(m: &[[f64; 3]; 3]) -> Self {
        Self {
            dxx: m[0][0],
            dyy: m[1][1],
            dzz: m[2][2],
            dxy: 0.5 * (m[0][1] + m[1][0]),
            dxz: 0.5 * (m[0][2] + m[2][0]),
            dyz: 0.5 * (m[1][2] + m[2][1]),
        }
    }

    /// `Σ λᵢ eᵢ eᵢᵀ`.
    pub fn from_eigen(values: [f64; 3], vectors: [Vec3; 3]) -> Self {
        let mut m = [[0.0; 3]; 3];
        for (l, e) in values.iter().zip(vectors.iter()) {
            for r in 0..3 {
                for c in 0..3 {
                    m[r][c] += l * e[r] * e[c];
                }
            }
        }
        Self::from_matrix(&m)
    }

    /// `gᵀ D g`.
    #[inline]
    pub fn quadratic_form(&self, g: &Vec3) -> f64 {
        self.dxx * g[0] * g[0]
            + self.dyy * g[1] * g[1]
            + self.dzz * g[2] * g[2]
            + 2.0 * (self.dxy * g[0] * g[1] + self.dxz * g[0] * g[2] + self.dyz * g[1] * g[2])
    }

    pub fn trace(&self) -> f64 {
        self.dxx + self.dyy + self.dzz
    }

    /// `R D Rᵀ` for a rotation (or any) matrix `R`.
    pub fn rotated(&self, r: &[[f64; 3]; 3]) -> Self {
        let d = self.to_matrix();
        let mut rd = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                rd[i][j] = (0..3).map(|k| r[i][k] * d[k][j]).sum();
            }
        }
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = (0..3).map(|k| rd[i][k] * r[j][k]).sum();
            }
        }
        Self::from_matrix(&out)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.components()
            .iter()
            .zip(other.components().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
