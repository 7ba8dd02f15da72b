use std::collections::HashSet;

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::gripper::{min_free_depth, GraspPose, GripperModel};
use super::normals::OrientedPoint;
use crate::scalar::Real;
use crate::spatial::GridIndex;

/// Grid cell side for partner search (meters).
const PARTNER_CELL: f64 = 0.01;

/// Antipodal quality of contacts at `p1`, `p2` with outward normals `n1`, `n2`:
/// `min(-n1·a, n2·a)` with `a` the unit vector from `p1` to `p2`.
pub fn antipodal_quality<T: Real>(p1: &Vector3<T>, n1: &Vector3<T>, p2: &Vector3<T>, n2: &Vector3<T>) -> T {
    let a = (p2 - p1).normalize();
    (-n1.dot(&a)).min(n2.dot(&a))
}

/// Confidence: `0.7·clip(q, 0, 1) + 0.3·(1 − width / max_width)`.
pub fn score<T: Real>(q: T, width: T, max_width: T) -> T {
    let q = q.max(T::zero()).min(T::one());
    T::lit(0.7) * q + T::lit(0.3) * (T::one() - width / max_width)
}

#[derive(Debug, Clone, Copy)]
pub struct SamplerParams<T: Real> {
    pub friction_half_angle_deg: T,
    pub approach_rotations: usize,
    pub max_pairs: usize,
    pub seed: u64,
}

/// Raw candidate with its antipodal quality.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<T: Real> {
    pub pose: GraspPose<T>,
    pub quality: T,
}

/// Samples antipodal contact pairs among target points and expands each into
/// discrete approach directions about its closing axis.
///
/// Up to `max_pairs` seed points are drawn without replacement; each is paired
/// with the partner within `max_width` of best quality (ties: nearer, then
/// lower index). A pair is accepted when its quality is at least
/// `cos(friction_half_angle)`. Approach `k` is the view ray at the grasp center,
/// made perpendicular to the closing axis and rotated by `2πk/K` about it;
/// only approaches with a positive component along the view ray are kept.
/// Each candidate's approach distance is the smallest one at which no target
/// point collides with the gripper; candidates with none are dropped.
pub fn sample_antipodal<T: Real>(
    points: &[OrientedPoint<T>],
    gripper: &GripperModel<T>,
    params: &SamplerParams<T>,
) -> Vec<Candidate<T>> {
    if points.len() < 2 {
        return Vec::new();
    }
    let cos_friction = params.friction_half_angle_deg.deg_to_rad().cos();
    let positions: Vec<Vector3<T>> = points.iter().map(|p| p.position).collect();
    let eligible = eligible_mask(points, gripper.max_width, params.friction_half_angle_deg);
    let seeds = choose_seeds(&eligible, params.max_pairs, params.seed);
    let grid = GridIndex::new(&positions, T::lit(PARTNER_CELL));
    let reach = gripper.reach();
    let (offset, radius) = partner_ball(gripper.max_width, cos_friction);

    let pairs: Vec<(usize, usize, T)> = seeds
        .par_iter()
        .filter_map(|&i| {
            let pi = &points[i];
            let mut best: Option<(T, T, usize)> = None;
            let center = pi.position - pi.normal * offset;
            grid.for_each_within(&center, radius, |j| {
                if j == i || !eligible[j] {
                    return;
                }
                let pj = &points[j];
                let dist = (pj.position - pi.position).norm();
                if dist <= T::lit(1e-6) || dist > gripper.max_width {
                    return;
                }
                let q = antipodal_quality(&pi.position, &pi.normal, &pj.position, &pj.normal);
                if q < cos_friction {
                    return;
                }
                let better = match best {
                    None => true,
                    Some((bq, bd, bj)) => q > bq || (q == bq && (dist < bd || (dist == bd && j < bj))),
                };
                if better {
                    best = Some((q, dist, j));
                }
            });
            best.map(|(q, _, j)| (i.min(j), i.max(j), q))
        })
        .collect();

    let mut seen = HashSet::new();
    let unique: Vec<(usize, usize, T)> = pairs.into_iter().filter(|&(a, b, _)| seen.insert((a, b))).collect();

    unique
        .par_iter()
        .flat_map_iter(|&(i, j, q)| {
            approach_poses(&points[i], &points[j], q, gripper, params.approach_rotations)
                .into_iter()
                .filter_map(|mut cand| {
                    let mut near = Vec::new();
                    grid.for_each_within(&cand.pose.translation, reach, |k| near.push(positions[k]));
                    let depth = min_free_depth(&cand.pose, near.into_iter(), gripper, T::zero())?;
                    cand.pose.approach_distance = depth;
                    Some(cand)
                })
        })
        .collect()
}

/// Ball `(offset along -n1, radius)` containing every partner `p2` with
/// `|p2 - p1| <= L` and `-n1·a >= cos θ`. With `d = p2 - p1` and `c = -n1·L/2`,
/// `|d - c|² <= |d|² - L·|d|·cos θ + L²/4`, convex in `|d|`, so its maximum
/// is at `|d| = 0` or `|d| = L`. Falls back to the plain `L` ball when that is smaller.
fn partner_ball<T: Real>(max_width: T, cos_friction: T) -> (T, T) {
    let slack = T::lit(1.0 + 1e-9);
    let r2 = T::lit(0.25).max(T::lit(1.25) - cos_friction);
    if r2 >= T::one() {
        return (T::zero(), max_width * slack);
    }
    (max_width * T::lit(0.5), max_width * r2.sqrt() * slack)
}

/// Necessary condition for a point to be part of an accepted pair seen from
/// the origin: its normal is within `2θ + β` of perpendicular to its view ray,
/// where `β` bounds the angle between view rays of points `max_width` apart.
fn eligible_mask<T: Real>(points: &[OrientedPoint<T>], max_width: T, friction_deg: T) -> Vec<bool> {
    let theta = friction_deg.deg_to_rad();
    points
        .iter()
        .map(|p| {
            let dist = p.position.norm();
            if max_width >= dist {
                return true;
            }
            let limit = T::lit(2.0) * theta + (max_width / dist).asin();
            if limit >= T::frac_pi_2() {
                return true;
            }
            (p.normal.dot(&p.position) / dist).abs() < limit.sin()
        })
        .collect()
}

fn choose_seeds(eligible: &[bool], max_pairs: usize, seed: u64) -> Vec<usize> {
    let pool: Vec<usize> = (0..eligible.len()).filter(|&i| eligible[i]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let take = max_pairs.min(pool.len());
    rand::seq::index::sample(&mut rng, pool.len(), take)
        .into_iter()
        .map(|k| pool[k])
        .collect()
}

fn approach_poses<T: Real>(
    p1: &OrientedPoint<T>,
    p2: &OrientedPoint<T>,
    q: T,
    gripper: &GripperModel<T>,
    rotations: usize,
) -> Vec<Candidate<T>> {
    let delta = p2.position - p1.position;
    let width = delta.norm();
    if width > gripper.max_width || width <= T::zero() {
        return Vec::new();
    }
    let a = delta / width;
    let center = (p1.position + p2.position) * T::lit(0.5);
    let view = center.normalize();
    let e1 = view - a * view.dot(&a);
    let e1_norm = e1.norm();
    if e1_norm <= T::lit(1e-9) {
        return Vec::new();
    }
    let e1 = e1 / e1_norm;
    let e2 = a.cross(&e1);
    let s = score(q, width, gripper.max_width);
    (0..rotations.max(1))
        .filter_map(|k| {
            let phi = T::two_pi() * T::lit(k as f64) / T::lit(rotations.max(1) as f64);
            let approach = e1 * phi.cos() + e2 * phi.sin();
            // phi = ±pi/2 is perpendicular to the view up to rounding
            if approach.dot(&view) <= T::lit(1e-9) {
                return None;
            }
            let finger = approach.cross(&a);
            Some(Candidate {
                pose: GraspPose {
                    rotation: Matrix3::from_columns(&[a, finger, approach]),
                    translation: center,
                    width,
                    approach_distance: T::zero(),
                    score: s,
                    contacts: [p1.index, p2.index],
                },
                quality: q,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patch(x: f64, nx: f64, start: usize) -> Vec<OrientedPoint<f64>> {
        let mut out = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                out.push(OrientedPoint {
                    position: Vector3::new(x, -0.002 + 0.001 * i as f64, 0.5 - 0.002 + 0.001 * j as f64),
                    normal: Vector3::new(nx, 0.0, -1e-3).normalize(),
                    index: start + out.len(),
                });
            }
        }
        out
    }

    fn params() -> SamplerParams<f64> {
        SamplerParams {
            friction_half_angle_deg: 10.0,
            approach_rotations: 8,
            max_pairs: 500,
            seed: 3,
        }
    }

    #[test]
    fn opposing_patches_three_cm_apart() {
        let mut pts = patch(-0.015, -1.0, 0);
        pts.extend(patch(0.015, 1.0, 25));
        let cands = sample_antipodal(&pts, &GripperModel::default(), &params());
        assert!(!cands.is_empty());
        let best = cands.iter().max_by(|a, b| a.pose.score.partial_cmp(&b.pose.score).unwrap()).unwrap();
        assert!((best.pose.width - 0.03).abs() < 1e-9);
        assert!(best.quality > 0.999);
    }

    #[test]
    fn patches_ten_cm_apart_are_rejected() {
        let mut pts = patch(-0.05, -1.0, 0);
        pts.extend(patch(0.05, 1.0, 25));
        assert!(sample_antipodal(&pts, &GripperModel::default(), &params()).is_empty());
    }

    #[test]
    fn partner_ball_contains_the_friction_cone() {
        let l = 0.085;
        for deg in [5.0f64, 30.0, 60.0, 89.0, 120.0] {
            let (offset, radius) = partner_ball(l, deg.to_radians().cos());
            let n1 = Vector3::new(0.0, 0.0, 1.0);
            let center = -n1 * offset;
            for i in 0..=20 {
                for j in 0..=20 {
                    let len = l * i as f64 / 20.0;
                    let phi = deg.min(180.0).to_radians() * j as f64 / 20.0;
                    let d = Vector3::new(phi.sin(), 0.0, -phi.cos()) * len;
                    assert!((d - center).norm() <= radius, "θ {deg}: {d:?} outside");
                }
            }
        }
    }

    #[test]
    fn score_arithmetic() {
        assert!((score(1.0f64, 0.0, 0.085) - 1.0).abs() < 1e-15);
        let q = 10f64.deg_to_rad().cos();
        assert!((score(q, 0.085, 0.085) - 0.7 * q).abs() < 1e-15);
        assert!((score(q, 0.085, 0.085) - 0.689).abs() < 1e-3);
        assert_eq!(score(1.7, 0.0, 0.085), 1.0);
    }
}
