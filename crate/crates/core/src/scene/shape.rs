//! Analytic primitives: ray intersection and signed distance in the local frame.
//!
//! Local conventions: boxes are centered with half-extents along x/y/z,
//! cylinders have their axis on local z and span `±height/2`, spheres are
//! centered, planes are finite rectangles in local z = 0.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape<T> {
    Box { half_extents: [T; 3] },
    Cylinder { radius: T, height: T },
    Sphere { radius: T },
    Plane { half_extents: [T; 2] },
}

impl<T: Real> Shape<T> {
    pub fn dimensions(&self) -> Vec<T> {
        match *self {
            Shape::Box { half_extents } => half_extents.to_vec(),
            Shape::Cylinder { radius, height } => vec![radius, height],
            Shape::Sphere { radius } => vec![radius],
            Shape::Plane { half_extents } => half_extents.to_vec(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Shape::Box { .. } => "box",
            Shape::Cylinder { .. } => "cylinder",
            Shape::Sphere { .. } => "sphere",
            Shape::Plane { .. } => "plane",
        }
    }

    /// Smallest ray parameter `s > min_s` with `origin + s * dir` on the surface.
    pub fn intersect(&self, origin: &Vector3<T>, dir: &Vector3<T>, min_s: T) -> Option<T> {
        match *self {
            Shape::Sphere { radius } => {
                let a = dir.norm_squared();
                let b = origin.dot(dir);
                let c = origin.norm_squared() - radius * radius;
                smallest_quadratic_root(a, b, c, min_s)
            }
            Shape::Box { half_extents } => intersect_box(origin, dir, &half_extents, min_s),
            Shape::Cylinder { radius, height } => {
                intersect_cylinder(origin, dir, radius, height * T::lit(0.5), min_s)
            }
            Shape::Plane { half_extents } => {
                if dir.z == T::zero() {
                    return None;
                }
                let s = -origin.z / dir.z;
                if s <= min_s {
                    return None;
                }
                let p = origin + dir * s;
                (p.x.abs() <= half_extents[0] && p.y.abs() <= half_extents[1]).then_some(s)
            }
        }
    }

    /// Signed distance from a local-frame point to the surface (negative inside).
    /// Planes have zero thickness, so their distance is unsigned.
    pub fn signed_distance(&self, p: &Vector3<T>) -> T {
        let zero = T::zero();
        match *self {
            Shape::Sphere { radius } => p.norm() - radius,
            Shape::Box { half_extents } => {
                let q = Vector3::new(
                    p.x.abs() - half_extents[0],
                    p.y.abs() - half_extents[1],
                    p.z.abs() - half_extents[2],
                );
                let outside = q.map(|v| v.max(zero)).norm();
                outside + q.x.max(q.y.max(q.z)).min(zero)
            }
            Shape::Cylinder { radius, height } => {
                let dx = (p.x * p.x + p.y * p.y).sqrt() - radius;
                let dz = p.z.abs() - height * T::lit(0.5);
                let outside = (dx.max(zero).powi(2) + dz.max(zero).powi(2)).sqrt();
                outside + dx.max(dz).min(zero)
            }
            Shape::Plane { half_extents } => {
                let ex = (p.x.abs() - half_extents[0]).max(zero);
                let ey = (p.y.abs() - half_extents[1]).max(zero);
                (ex * ex + ey * ey + p.z * p.z).sqrt()
            }
        }
    }
}

fn smallest_quadratic_root<T: Real>(a: T, half_b: T, c: T, min_s: T) -> Option<T> {
    let disc = half_b * half_b - a * c;
    if disc < T::zero() {
        return None;
    }
    let sq = disc.sqrt();
    let s0 = (-half_b - sq) / a;
    let s1 = (-half_b + sq) / a;
    if s0 > min_s {
        Some(s0)
    } else if s1 > min_s {
        Some(s1)
    } else {
        None
    }
}

fn intersect_box<T: Real>(
    origin: &Vector3<T>,
    dir: &Vector3<T>,
    half: &[T; 3],
    min_s: T,
) -> Option<T> {
    let mut t_near = T::lit(f64::NEG_INFINITY);
    let mut t_far = T::lit(f64::INFINITY);
    for axis in 0..3 {
        let o = origin[axis];
        let d = dir[axis];
        let h = half[axis];
        if d == T::zero() {
            if o.abs() > h {
                return None;
            }
            continue;
        }
        let mut t0 = (-h - o) / d;
        let mut t1 = (h - o) / d;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_near = t_near.max(t0);
        t_far = t_far.min(t1);
        if t_near > t_far {
            return None;
        }
    }
    if t_near > min_s {
        Some(t_near)
    } else if t_far > min_s {
        Some(t_far)
    } else {
        None
    }
}

fn intersect_cylinder<T: Real>(
    origin: &Vector3<T>,
    dir: &Vector3<T>,
    radius: T,
    half_height: T,
    min_s: T,
) -> Option<T> {
    let mut best: Option<T> = None;
    let mut consider = |s: T| {
        if s > min_s && best.is_none_or(|b| s < b) {
            best = Some(s);
        }
    };

    let a = dir.x * dir.x + dir.y * dir.y;
    if a > T::zero() {
        let half_b = origin.x * dir.x + origin.y * dir.y;
        let c = origin.x * origin.x + origin.y * origin.y - radius * radius;
        let disc = half_b * half_b - a * c;
        if disc >= T::zero() {
            let sq = disc.sqrt();
            for s in [(-half_b - sq) / a, (-half_b + sq) / a] {
                let z = origin.z + dir.z * s;
                if z.abs() <= half_height {
                    consider(s);
                }
            }
        }
    }
    if dir.z != T::zero() {
        for cap in [half_height, -half_height] {
            let s = (cap - origin.z) / dir.z;
            let x = origin.x + dir.x * s;
            let y = origin.y + dir.y * s;
            if x * x + y * y <= radius * radius {
                consider(s);
            }
        }
    }
    best
}
