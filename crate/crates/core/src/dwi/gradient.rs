use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::{norm, scale, Vec3};

/// Maximum norm deviation that `parse_fsl` silently renormalizes.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-3;
const UNIT_TOLERANCE: f64 = 1e-8;

/// One diffusion-weighted acquisition: a b-value (s/mm²) and its gradient direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientEntry {
    pub b_value: f64,
    pub gradient: Vec3,
}

impl GradientEntry {
    pub const fn new(b_value: f64, gradient: Vec3) -> Self {
        Self { b_value, gradient }
    }
}

/// Ordered list of acquisitions, one per shell of a [`DwiVolume`](super::DwiVolume).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<GradientEntry>", into = "Vec<GradientEntry>")]
pub struct GradientTable {
    entries: Vec<GradientEntry>,
}

impl GradientTable {
    /// Validates the entries: every weighted direction is unit length, b ≥ 0,
    /// and at least one baseline (b = 0) is present.
    pub fn new(entries: Vec<GradientEntry>) -> Result<Self> {
        for (i, e) in entries.iter().enumerate() {
            if !(e.b_value.is_finite() && e.b_value >= 0.0) {
                return Err(Error::Config(format!(
                    "entry {i}: b-value must be finite and nonnegative, got {}",
                    e.b_value
                )));
            }
            if e.gradient.iter().any(|c| !c.is_finite()) {
                return Err(Error::Config(format!("entry {i}: non-finite gradient")));
            }
            if e.b_value > 0.0 && (norm(&e.gradient) - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::Config(format!(
                    "entry {i}: gradient {:?} is not unit length",
                    e.gradient
                )));
            }
        }
        if !entries.iter().any(|e| e.b_value == 0.0) {
            return Err(Error::Config("gradient table has no b = 0 baseline".into()));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[GradientEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &GradientEntry> {
        self.entries.iter()
    }

    /// One baseline plus the six antipodal-pair axes of a regular icosahedron.
    pub fn six_direction(b_value: f64) -> Self {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let raw: [Vec3; 6] = [
            [0.0, 1.0, phi],
            [0.0, 1.0, -phi],
            [1.0, phi, 0.0],
            [-1.0, phi, 0.0],
            [phi, 0.0, 1.0],
            [phi, 0.0, -1.0],
        ];
        let mut entries = vec![GradientEntry::new(0.0, [0.0; 3])];
        entries.extend(
            raw.iter()
                .map(|g| GradientEntry::new(b_value, scale(g, 1.0 / norm(g)))),
        );
        Self { entries }
    }

    /// One baseline plus `directions` near-uniform directions on the upper
    /// hemisphere (Fibonacci lattice).
    pub fn dense(b_value: f64, directions: usize) -> Self {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let mut entries = vec![GradientEntry::new(0.0, [0.0; 3])];
        for i in 0..directions {
            let z = 1.0 - (i as f64 + 0.5) / directions as f64;
            let r = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            let g = [r * t.cos(), r * t.sin(), z];
            entries.push(GradientEntry::new(b_value, scale(&g, 1.0 / norm(&g))));
        }
        Self { entries }
    }

    /// Parses FSL-style text: one row of N b-values and three rows of N
    /// gradient components.
    pub fn parse_fsl(bvals: &str, bvecs: &str) -> Result<Self> {
        let bvals = parse_row(bvals.trim(), "bvals")?;
        let rows: Vec<Vec<f64>> = bvecs
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| parse_row(l, "bvecs"))
            .collect::<Result<_>>()?;
        if rows.len() != 3 {
            return Err(Error::Parse(format!(
                "bvecs must have 3 rows, found {}",
                rows.len()
            )));
        }
        let n = bvals.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Parse(format!(
                "column count mismatch: {n} b-values but a bvecs row has {} entries",
                r.len()
            )));
        }
        let mut entries = Vec::with_capacity(n);
        for i in 0..n {
            let b = bvals[i];
            let mut g = [rows[0][i], rows[1][i], rows[2][i]];
            let len = norm(&g);
            if b > 0.0 {
                if (len - 1.0).abs() > RENORMALIZE_TOLERANCE {
                    return Err(Error::Parse(format!(
                        "column {i}: gradient norm {len} with b = {b} is not unit"
                    )));
                }
                if len != 1.0 {
                    g = scale(&g, 1.0 / len);
                }
            }
            entries.push(GradientEntry::new(b, g));
        }
        Self::new(entries).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Serializes to FSL-style `(bvals, bvecs)` text using shortest
    /// round-trip float formatting.
    pub fn to_fsl(&self) -> (String, String) {
        let join = |f: &dyn Fn(&GradientEntry) -> f64| {
            self.entries
                .iter()
                .map(|e| format!("{}", f(e)))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let bvals = join(&|e| e.b_value) + "\n";
        let bvecs = (0..3)
            .map(|axis| join(&|e| e.gradient[axis]))
            .collect::<Vec<_>>()
            .join("\n")
            + "\n";
        (bvals, bvecs)
    }
}

impl TryFrom<Vec<GradientEntry>> for GradientTable {
    type Error = Error;

    fn try_from(entries: Vec<GradientEntry>) -> Result<Self> {
        Self::new(entries)
    }
}

impl From<GradientTable> for Vec<GradientEntry> {
    fn from(t: GradientTable) -> Self {
        t.entries
    }
}

fn parse_row(line: &str, what: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::Parse(format!("{what}: malformed number {tok:?}")))
        })
        .collect()
}
