mod common;

use common::{faces, random_unit, ray_cast};
use fibertrack::sphere::{build_router, icosphere, nearest_point, route, NeighborOffset};
use fibertrack::vec3::{dot, norm};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn router_matches_ray_cast_oracle() {
    let table = build_router();
    let faces = faces();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    for _ in 0..10_000 {
        let v = random_unit(&mut rng);
        let (want, clear) = ray_cast(&v, &faces);
        if !clear {
            continue;
        }
        checked += 1;
        assert_eq!(route(&v, &table).unwrap().0, want, "{v:?}");
    }
    assert!(checked > 9_900, "{checked}");
}

#[test]
fn router_equivariance() {
    let table = build_router();
    let faces = faces();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for _ in 0..2000 {
        let v = random_unit(&mut rng);
        if !ray_cast(&v, &faces).1 {
            continue;
        }
        let o = route(&v, &table).unwrap();
        assert_eq!(route(&v.map(|c| -c), &table).unwrap(), o.neg());
        for perm in perms {
            for signs in 0..8u8 {
                let s = |i: usize| if signs >> i & 1 == 1 { -1.0 } else { 1.0 };
                let pv = [0, 1, 2].map(|i| s(i) * v[perm[i]]);
                let po = [0, 1, 2].map(|i| (s(i) as i8) * o.0[perm[i]]);
                assert_eq!(route(&pv, &table).unwrap().0, po);
            }
        }
    }
}

#[test]
fn all_face_centers_are_fixed_points() {
    let table = build_router();
    for o in NeighborOffset::all() {
        assert_eq!(route(&o.direction(), &table).unwrap(), o);
    }
}

#[test]
fn nearest_point_agrees_with_linear_scan() {
    let sphere = icosphere(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let v = random_unit(&mut rng);
        let k = nearest_point(&v, &sphere);
        let best = sphere
            .points()
            .iter()
            .map(|p| dot(p, &v))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(dot(&sphere.point(k), &v), best);
    }
}

#[test]
fn level_four_sphere() {
    let s = icosphere(4).unwrap();
    assert_eq!(s.len(), 2562);
    for p in s.points() {
        assert!((norm(p) - 1.0).abs() < 1e-12);
    }
}
