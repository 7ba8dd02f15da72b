#![allow(dead_code)]

use nalgebra::Vector3;
use partgrasp::scene::catalog::{desk_camera, place, table, wall, Kind};
use partgrasp::scene::{SceneDescription, Shape};
use proptest::prelude::*;

pub fn kind() -> impl Strategy<Value = Kind> {
    proptest::sample::select(Kind::ALL.to_vec())
}

/// Up to four catalog objects on a table, optionally in front of a wall,
/// rendered at a reduced resolution.
pub fn scene(width: usize) -> impl Strategy<Value = SceneDescription<f64>> {
    (
        prop::collection::vec((kind(), -0.2..0.2f64, -0.1..0.2f64, -3.1..3.1f64), 1..=4),
        any::<bool>(),
        any::<u64>(),
    )
        .prop_map(move |(objs, with_wall, seed)| {
            let mut camera = desk_camera();
            camera.intrinsics = camera.intrinsics.rescaled(width, width * 3 / 4);
            let mut background = vec![table(0.6, 0.5)];
            if with_wall {
                background.push(wall(0.3, 0.6, 0.4));
            }
            SceneDescription {
                camera,
                objects: objs
                    .into_iter()
                    .enumerate()
                    .map(|(i, (k, x, y, yaw))| place(k, &format!("{}_{i}", k.name()), x, y, yaw))
                    .collect(),
                background,
                seed,
            }
        })
}

/// Strict interior test with a margin, in the primitive's local frame.
/// Planes have no interior.
pub fn strictly_inside(shape: &Shape<f64>, p: &Vector3<f64>, margin: f64) -> bool {
    match *shape {
        Shape::Sphere { radius } => p.norm() < radius - margin,
        Shape::Box { half_extents } => (0..3).all(|i| p[i].abs() < half_extents[i] - margin),
        Shape::Cylinder { radius, height } => p.x.hypot(p.y) < radius - margin && p.z.abs() < height / 2.0 - margin,
        Shape::Plane { .. } => false,
    }
}

/// Whether the segment from `a` to `b` (local frame) crosses a plane rectangle.
pub fn crosses_plane(shape: &Shape<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> bool {
    let Shape::Plane { half_extents } = *shape else {
        return false;
    };
    if a.z * b.z >= 0.0 {
        return false;
    }
    let t = a.z / (a.z - b.z);
    let x = a + (b - a) * t;
    x.x.abs() < half_extents[0] && x.y.abs() < half_extents[1]
}

/// Unsigned distance from a local-frame point to a primitive's surface.
pub fn surface_distance(shape: &Shape<f64>, p: &Vector3<f64>) -> f64 {
    match *shape {
        Shape::Sphere { radius } => (p.norm() - radius).abs(),
        Shape::Plane { half_extents } => {
            let ex = (p.x.abs() - half_extents[0]).max(0.0);
            let ey = (p.y.abs() - half_extents[1]).max(0.0);
            (ex * ex + ey * ey + p.z * p.z).sqrt()
        }
        Shape::Cylinder { radius, height } => {
            let r = p.x.hypot(p.y);
            let hz = height / 2.0;
            let side = (r - radius).hypot((p.z.abs() - hz).max(0.0));
            let cap = (p.z.abs() - hz).hypot((r - radius).max(0.0));
            side.min(cap)
        }
        Shape::Box { half_extents } => {
            let q: Vec<f64> = (0..3).map(|i| p[i].abs() - half_extents[i]).collect();
            let outside = q.iter().map(|v| v.max(0.0).powi(2)).sum::<f64>().sqrt();
            if outside > 0.0 {
                outside
            } else {
                -q.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }
}
