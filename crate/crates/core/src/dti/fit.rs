use nalgebra::DMatrix;

use super::DiffusionTensor;
use crate::dwi::GradientTable;
use crate::error::{Error, Result};
use crate::vec3::dot;

/// Minimum number of measurements for the 7-unknown log-linear system.
pub const MIN_MEASUREMENTS: usize = 7;
const RANK_TOLERANCE: f64 = 1e-12;

/// Output of a per-voxel log-linear fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorFit {
    pub tensor: DiffusionTensor,
    pub s0: f64,
    /// Root-mean-square log residual with `N − 7` degrees of freedom
    /// (zero when the system is exactly determined).
    pub sigma: f64,
}

/// Log-linear least-squares tensor estimator for one gradient table.
///
/// The design matrix depends only on the table, so it is factored once
/// (Householder QR) and each voxel costs a single `7 × N` product.
#[derive(Debug, Clone)]
pub struct TensorFitter {
    n: usize,
    /// Rows `(1, −b gx², −b gy², −b gz², −2b gx gy, −2b gx gz, −2b gy gz)`.
    design: Vec<[f64; 7]>,
    /// `R⁻¹ Qᵀ`, row-major `7 × n`.
    solve: Vec<f64>,
}

impl TensorFitter {
    pub fn new(table: &GradientTable) -> Result<Self> {
        let n = table.len();
        if n < MIN_MEASUREMENTS {
            return Err(Error::Precondition(format!(
                "tensor fit needs at least {MIN_MEASUREMENTS} measurements, table has {n}"
            )));
        }
        let distinct = distinct_directions(table);
        if distinct < 6 {
            return Err(Error::Precondition(format!(
                "tensor fit needs 6 distinct weighted directions, table has {distinct}"
            )));
        }
        let design: Vec<[f64; 7]> = table
            .iter()
            .map(|e| {
                let [gx, gy, gz] = e.gradient;
                let b = e.b_value;
                [
                    1.0,
                    -b * gx * gx,
                    -b * gy * gy,
                    -b * gz * gz,
                    -2.0 * b * gx * gy,
                    -2.0 * b * gx * gz,
                    -2.0 * b * gy * gz,
                ]
            })
            .collect();
        let a = DMatrix::from_fn(n, 7, |r, c| design[r][c]);

        let sv = a.singular_values();
        let max = sv.max();
        let min = sv.min();
        if !(max > 0.0) || min < RANK_TOLERANCE * max {
            return Err(Error::Fit(format!(
                "rank-deficient design matrix (singular values {min:e} .. {max:e})"
            )));
        }

        let qr = a.qr();
        let q = qr.q();
        let r = qr.r();
        let qt = q.transpose();
        let solve = r
            .solve_upper_triangular(&qt)
            .ok_or_else(|| Error::Fit("singular triangular factor".into()))?;
        let solve = (0..7)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| solve[(i, j)])
            .collect();
        Ok(Self { n, design, solve })
    }

    pub fn n_measurements(&self) -> usize {
        self.n
    }

    /// Fits one voxel's per-shell signals.
    pub fn fit(&self, signals: &[f64]) -> Result<TensorFit> {
        if signals.len() != self.n {
            return Err(Error::Precondition(format!(
                "expected {} signals, got {}",
                self.n,
                signals.len()
            )));
        }
        let mut z = [0.0; 128];
        let mut z_heap;
        let z: &mut [f64] = if self.n <= z.len() {
            &mut z[..self.n]
        } else {
            z_heap = vec![0.0; self.n];
            &mut z_heap
        };
        for (zi, &s) in z.iter_mut().zip(signals) {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Precondition(format!(
                    "signals must be positive and finite, got {s}"
                )));
            }
            *zi = s.ln();
        }
        let mut x = [0.0; 7];
        for (i, xi) in x.iter_mut().enumerate() {
            let row = &self.solve[i * self.n..(i + 1) * self.n];
            *xi = row.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
        }
        let sigma = if self.n > 7 {
            let ss: f64 = self
                .design
                .iter()
                .zip(z.iter())
                .map(|(row, zi)| {
                    let pred: f64 = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                    (zi - pred).powi(2)
                })
                .sum();
            (ss / (self.n - 7) as f64).sqrt()
        } else {
            0.0
        };
        Ok(TensorFit {
            tensor: DiffusionTensor {
                dxx: x[1],
                dyy: x[2],
                dzz: x[3],
                dxy: x[4],
                dxz: x[5],
                dyz: x[6],
            },
            s0: x[0].exp(),
            sigma,
        })
    }
}

/// Fits `signals` against `table`; convenience wrapper around [`TensorFitter`].
pub fn fit_tensor(signals: &[f64], table: &GradientTable) -> Result<TensorFit> {
    TensorFitter::new(table)?.fit(signals)
}

fn distinct_directions(table: &GradientTable) -> usize {
    let mut seen: Vec<[f64; 3]> = Vec::new();
    for e in table.iter().filter(|e| e.b_value > 0.0) {
        let g = e.gradient;
        if !seen.iter().any(|s| dot(s, &g).abs() > 1.0 - 1e-9) {
            seen.push(g);
        }
    }
    seen.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dwi::{synthesize_signal, GradientEntry};

    fn signals_for(d: &DiffusionTensor, s0: f64, table: &GradientTable) -> Vec<f64> {
        table.iter().map(|e| synthesize_signal(d, s0, e)).collect()
    }

    #[test]
    fn recovers_noiseless_tensor() {
        let table = GradientTable::six_direction(1000.0);
        let d = DiffusionTensor {
            dxx: 1.2e-3,
            dyy: 0.6e-3,
            dzz: 0.4e-3,
            dxy: 0.2e-3,
            dxz: -0.1e-3,
            dyz: 0.05e-3,
        };
        let fit = fit_tensor(&signals_for(&d, 87.0, &table), &table).unwrap();
        assert!(fit.tensor.max_abs_diff(&d) < 1e-9);
        assert!((fit.s0 - 87.0).abs() < 1e-9);
        assert_eq!(fit.sigma, 0.0);

        let dense = GradientTable::dense(1000.0, 30);
        let fit = fit_tensor(&signals_for(&d, 87.0, &dense), &dense).unwrap();
        assert!(fit.tensor.max_abs_diff(&d) < 1e-9);
        assert!(fit.sigma < 1e-12);
    }

    #[test]
    fn isotropic_signals_have_no_off_diagonals() {
        let table = GradientTable::dense(1000.0, 20);
        let d = DiffusionTensor::isotropic(0.8e-3);
        let fit = fit_tensor(&signals_for(&d, 50.0, &table), &table).unwrap();
        for c in [fit.tensor.dxy, fit.tensor.dxz, fit.tensor.dyz] {
            assert!(c.abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_short_and_degenerate_tables() {
        let short = GradientTable::new(vec![
            GradientEntry::new(0.0, [0.0; 3]),
            GradientEntry::new(1000.0, [1.0, 0.0, 0.0]),
        ])
        .unwrap();
        assert!(matches!(TensorFitter::new(&short), Err(Error::Precondition(_))));

        // seven measurements but only three distinct axes
        let mut entries = vec![GradientEntry::new(0.0, [0.0; 3])];
        for g in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
            entries.push(GradientEntry::new(1000.0, g));
            entries.push(GradientEntry::new(1000.0, [-g[0], -g[1], -g[2]]));
        }
        let degenerate = GradientTable::new(entries).unwrap();
        assert!(matches!(
            TensorFitter::new(&degenerate),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn rank_deficient_design_is_a_fit_error() {
        // six distinct directions all in the x-y plane: z components unobservable
        let mut entries = vec![GradientEntry::new(0.0, [0.0; 3])];
        for k in 0..6 {
            let t = k as f64 * std::f64::consts::PI / 6.0;
            entries.push(GradientEntry::new(1000.0, [t.cos(), t.sin(), 0.0]));
        }
        let planar = GradientTable::new(entries).unwrap();
        assert!(matches!(TensorFitter::new(&planar), Err(Error::Fit(_))));
    }

    #[test]
    fn rejects_nonpositive_signals() {
        let table = GradientTable::six_direction(1000.0);
        let fitter = TensorFitter::new(&table).unwrap();
        let mut s = vec![10.0; 7];
        s[3] = 0.0;
        assert!(matches!(fitter.fit(&s), Err(Error::Precondition(_))));
        assert!(fitter.fit(&s[..6]).is_err());
    }
}
