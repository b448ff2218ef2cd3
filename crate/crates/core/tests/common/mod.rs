#![allow(dead_code)]

use fibertrack::dti::VoxelModelParams;
use fibertrack::dwi::GradientTable;
use fibertrack::sphere::{NeighborOffset, RouterTable};
use fibertrack::vec3::{cross, dot, norm, normalize, sub, Vec3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One face of the solid: its lattice offset and its outline in
/// counter-clockwise order seen from outside.
pub struct Face {
    pub offset: [i8; 3],
    normal: Vec3,
    pub outline: Vec<Vec3>,
}

/// Builds the faces directly from the vertex coordinates: a face is the set
/// of vertices maximizing the integer offset's dot product.
pub fn faces() -> Vec<Face> {
    let verts = RouterTable::vertices();
    NeighborOffset::all()
        .map(|o| {
            let d = o.0.map(f64::from);
            let best = verts.iter().map(|v| dot(v, &d)).fold(f64::NEG_INFINITY, f64::max);
            let mut outline: Vec<Vec3> = verts
                .iter()
                .filter(|v| (dot(v, &d) - best).abs() < 1e-9)
                .copied()
                .collect();
            assert!(outline.len() == 3 || outline.len() == 4, "{o:?}: {}", outline.len());
            let c = outline.iter().fold([0.0; 3], |a, v| [a[0] + v[0], a[1] + v[1], a[2] + v[2]]);
            let c = c.map(|x| x / outline.len() as f64);
            let normal = normalize(&d).unwrap();
            let u = normalize(&sub(&outline[0], &c)).unwrap();
            let w = cross(&normal, &u);
            outline.sort_by(|a, b| {
                let ang = |p: &Vec3| {
                    let r = sub(p, &c);
                    dot(&r, &w).atan2(dot(&r, &u))
                };
                ang(a).total_cmp(&ang(b))
            });
            Face { offset: o.0, normal, outline }
        })
        .collect()
}

/// Smallest distance (relative to edge length) from the ray's crossing of
/// the face plane to the face outline; negative when outside.
fn inside_margin(dir: &Vec3, f: &Face) -> Option<f64> {
    let denom = dot(dir, &f.normal);
    if denom <= 0.0 {
        return None;
    }
    let t = dot(&f.outline[0], &f.normal) / denom;
    let x = dir.map(|c| c * t);
    let n = f.outline.len();
    Some(
        (0..n)
            .map(|i| {
                let p = f.outline[i];
                let e = sub(&f.outline[(i + 1) % n], &p);
                dot(&cross(&e, &sub(&x, &p)), &f.normal) / dot(&e, &e)
            })
            .fold(f64::INFINITY, f64::min),
    )
}

/// Face the ray exits through and whether the exit point is clear of the
/// face outline.
pub fn ray_cast(dir: &Vec3, faces: &[Face]) -> ([i8; 3], bool) {
    let (o, m) = faces
        .iter()
        .filter_map(|f| inside_margin(dir, f).map(|m| (f.offset, m)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("ray leaves the solid");
    assert!(m > -1e-9, "no face contains the exit point of {dir:?}");
    (o, m > 1e-7)
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let n = norm(&v);
        if n > 0.1 && n <= 1.0 {
            return v.map(|c| c / n);
        }
    }
}

/// Posterior written out term by term in the linear domain: Gaussian
/// densities of the log-signals with variance σ²/μ², times the clamped
/// cosine prior, divided by the sum.
pub fn brute_force_posterior(
    signals: &[f64],
    p: &VoxelModelParams,
    table: &GradientTable,
    points: &[Vec3],
    prev: Option<&Vec3>,
) -> Vec<f64> {
    let weights: Vec<f64> = points
        .iter()
        .map(|v| {
            let mut like = 1.0;
            for (s, e) in signals.iter().zip(table.iter()) {
                let c = dot(&e.gradient, v);
                let mu = p.mu0 * (-p.alpha * e.b_value - p.beta * e.b_value * c * c).exp();
                let sd = p.sigma / mu;
                let r = s.ln() - mu.ln();
                like *= (-(r * r) / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
            }
            let prior = match prev {
                Some(u) => dot(v, u).max(0.0),
                None => 1.0,
            };
            like * prior
        })
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

/// Largest angle from any sphere point to its nearest neighbor.
pub fn max_spacing(points: &[Vec3]) -> f64 {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let best = points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| dot(p, q))
                .fold(f64::NEG_INFINITY, f64::max);
            best.min(1.0).acos()
        })
        .fold(0.0, f64::max)
}
