use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::vec3::{dot, norm, scale, Vec3};

/// Allowed deviation of `‖v‖` from 1 for [`route`].
pub const ROUTE_UNIT_TOLERANCE: f64 = 1e-6;
/// Relative score gap below which two faces count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// Step to one of the 26 lattice neighbors; components in {−1, 0, 1}, not all zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NeighborOffset(pub [i8; 3]);

impl NeighborOffset {
    /// All 26 offsets in lexicographic order of `(ox, oy, oz)`.
    pub fn all() -> impl Iterator<Item = NeighborOffset> {
        (-1i8..=1).flat_map(|x| {
            (-1i8..=1).flat_map(move |y| {
                (-1i8..=1)
                    .filter(move |&z| (x, y, z) != (0, 0, 0))
                    .map(move |z| NeighborOffset([x, y, z]))
            })
        })
    }

    pub fn direction(&self) -> Vec3 {
        let v = self.0.map(f64::from);
        scale(&v, 1.0 / norm(&v))
    }

    pub fn neg(&self) -> Self {
        NeighborOffset(self.0.map(|c| -c))
    }

    /// Number of nonzero components: 1 for square axial faces, 2 for square
    /// edge faces, 3 for triangular corner faces.
    pub fn order(&self) -> usize {
        self.0.iter().filter(|c| **c != 0).count()
    }

    pub fn apply(&self, voxel: [i64; 3]) -> [i64; 3] {
        [
            voxel[0] + i64::from(self.0[0]),
            voxel[1] + i64::from(self.0[1]),
            voxel[2] + i64::from(self.0[2]),
        ]
    }
}

/// Faces of the canonical rhombicuboctahedron, one per neighbor offset.
#[derive(Debug, Clone, PartialEq)]
pub struct RouterTable {
    pub normals: Vec<Vec3>,
    pub distances: Vec<f64>,
    pub offsets: Vec<NeighborOffset>,
}

impl RouterTable {
    /// The 24 vertices: all permutations of `(±1, ±1, ±(1+√2))`.
    pub fn vertices() -> Vec<Vec3> {
        let a = 1.0 + 2f64.sqrt();
        let mut out = Vec::with_capacity(24);
        for long_axis in 0..3 {
            for sx in [-1.0, 1.0] {
                for sy in [-1.0, 1.0] {
                    for sz in [-1.0, 1.0] {
                        let mut v = [sx, sy, sz];
                        v[long_axis] *= a;
                        out.push(v);
                    }
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// Builds the face table; each plane distance is the support value of the
/// canonical vertex set along the face normal.
pub fn build_router() -> RouterTable {
    let verts = RouterTable::vertices();
    let offsets: Vec<NeighborOffset> = NeighborOffset::all().collect();
    let normals: Vec<Vec3> = offsets.iter().map(NeighborOffset::direction).collect();
    let distances = normals
        .iter()
        .map(|n| {
            verts
                .iter()
                .map(|v| dot(v, n))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    RouterTable {
        normals,
        distances,
        offsets,
    }
}

pub(crate) fn shared_router() -> &'static RouterTable {
    static TABLE: OnceLock<RouterTable> = OnceLock::new();
    TABLE.get_or_init(build_router)
}

/// Neighbor whose face a ray from the center along `v` exits through.
pub fn route(v: &Vec3, table: &RouterTable) -> Result<NeighborOffset> {
    let len = norm(v);
    if !((len - 1.0).abs() <= ROUTE_UNIT_TOLERANCE) {
        return Err(Error::Precondition(format!(
            "route expects a unit vector, got norm {len}"
        )));
    }
    let scores: Vec<f64> = table
        .normals
        .iter()
        .zip(&table.distances)
        .map(|(n, d)| dot(v, n) / d)
        .collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cut = max - TIE_TOLERANCE * max.abs().max(1.0);
    // offsets are stored in lexicographic order, so the first hit is the smallest
    let best = scores.iter().position(|&s| s >= cut).expect("26 faces");
    Ok(table.offsets[best])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_six_distinct_offsets() {
        let all: Vec<_> = NeighborOffset::all().collect();
        assert_eq!(all.len(), 26);
        let mut sorted = all.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted, all);
    }

    #[test]
    fn plane_distances() {
        let r = build_router();
        let s2 = 2f64.sqrt();
        let s3 = 3f64.sqrt();
        for (o, d) in r.offsets.iter().zip(&r.distances) {
            let expect = match o.order() {
                // vertex (1+√2, 1, 1) on the axial face
                1 => 1.0 + s2,
                // vertex (1, 1+√2, 1) on the (1,1,0) face
                2 => (2.0 + s2) / s2,
                // vertex (1, 1, 1+√2) on the (1,1,1) face
                _ => (3.0 + s2) / s3,
            };
            assert!((d - expect).abs() < 1e-12, "{o:?}: {d} vs {expect}");
        }
        assert!(((2.0 + s2) / s2 - (1.0 + s2)).abs() < 1e-15);
        let mut distinct: Vec<f64> = r.distances.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        assert_eq!(distinct.len(), 2);
    }

    #[test]
    fn face_centers_route_to_themselves() {
        let r = build_router();
        assert_eq!(route(&[1.0, 0.0, 0.0], &r).unwrap(), NeighborOffset([1, 0, 0]));
        let k = 1.0 / 3f64.sqrt();
        assert_eq!(route(&[k, k, k], &r).unwrap(), NeighborOffset([1, 1, 1]));
        for o in NeighborOffset::all() {
            assert_eq!(route(&o.direction(), &r).unwrap(), o);
        }
    }

    #[test]
    fn rejects_non_unit_input() {
        let r = build_router();
        assert!(matches!(route(&[2.0, 0.0, 0.0], &r), Err(Error::Precondition(_))));
        assert!(route(&[0.0; 3], &r).is_err());
        assert!(route(&[f64::NAN, 0.0, 0.0], &r).is_err());
    }

    #[test]
    fn ties_take_the_smallest_offset() {
        let r = build_router();
        // on the boundary between the (1,0,0) and (1,1,0) faces
        let v = crate::vec3::normalize(&[1.0, 2f64.sqrt() - 1.0, 0.0]).unwrap();
        assert_eq!(route(&v, &r).unwrap(), NeighborOffset([1, 0, 0]));
        let w = crate::vec3::neg(&v);
        assert_eq!(route(&w, &r).unwrap(), NeighborOffset([-1, -1, 0]));
    }
}
