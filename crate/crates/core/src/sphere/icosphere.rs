use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::vec3::{dot, normalize, Vec3};

pub const MAX_LEVEL: u8 = 4;
/// Level 4 yields the 2562-point set used for orientation distributions.
pub const DEFAULT_LEVEL: u8 = 4;

/// Vertices of a subdivided icosahedron projected onto the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePointSet {
    points: Vec<Vec3>,
    level: u8,
}

impl SpherePointSet {
    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn point(&self, i: usize) -> Vec3 {
        self.points[i]
    }
}

/// Point set of the given subdivision level (0..=4).
pub fn icosphere(level: u8) -> Result<SpherePointSet> {
    let (points, _) = icosphere_mesh(level)?;
    Ok(SpherePointSet { points, level })
}

/// Vertices and triangular faces of the subdivided icosahedron.
pub fn icosphere_mesh(level: u8) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    if level > MAX_LEVEL {
        return Err(Error::Precondition(format!(
            "icosphere level must be ≤ {MAX_LEVEL}, got {level}"
        )));
    }
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut points: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| normalize(p).unwrap())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..level {
        // shared edges produce one midpoint each
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, points: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let (pa, pb) = (points[a], points[b]);
                let m = normalize(&[pa[0] + pb[0], pa[1] + pb[1], pa[2] + pb[2]]).unwrap();
                points.push(m);
                points.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut points);
            let bc = midpoint(b, c, &mut points);
            let ca = midpoint(c, a, &mut points);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    Ok((points, faces))
}

/// Index of the point with the largest dot product with `v`; the lowest
/// index wins ties.
pub fn nearest_point(v: &Vec3, set: &SpherePointSet) -> usize {
    let mut best = 0;
    let mut best_dot = f64::NEG_INFINITY;
    for (i, p) in set.points.iter().enumerate() {
        let d = dot(v, p);
        if d > best_dot {
            best_dot = d;
            best = i;
        }
    }
    best
}
