use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Parallel-jaw gripper dimensions (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GripperModel<T: Real> {
    pub max_width: T,
    pub finger_length: T,
    pub finger_thickness: T,
    pub palm_depth: T,
}

impl<T: Real> Default for GripperModel<T> {
    fn default() -> Self {
        Self {
            max_width: T::lit(0.085),
            finger_length: T::lit(0.04),
            finger_thickness: T::lit(0.01),
            palm_depth: T::lit(0.02),
        }
    }
}

impl<T: Real> GripperModel<T> {
    pub fn is_valid(&self) -> bool {
        [self.max_width, self.finger_length, self.finger_thickness, self.palm_depth]
            .iter()
            .all(|v| *v > T::zero() && v.is_finite())
    }

    /// Radius of a sphere around the grasp center containing the swept volume
    /// for any approach distance up to `finger_length`.
    pub fn reach(&self) -> T {
        let x = self.max_width * T::lit(0.5) + T::lit(OPENING_CLEARANCE) + self.finger_thickness;
        let y = self.finger_thickness * T::lit(0.5);
        let z = self.finger_length + self.palm_depth;
        (x * x + y * y + z * z).sqrt()
    }
}

/// Extra opening on each side of the contacts.
pub const OPENING_CLEARANCE: f64 = 0.001;
/// Points this close to a contact never count as collisions.
pub const CONTACT_TOLERANCE: f64 = 0.001;

/// 6-DoF grasp in the camera frame.
///
/// Rotation columns are the closing axis, the finger axis, and the approach
/// axis. The palm sits `approach_distance` behind the center along the
/// approach axis; fingertips reach `finger_length - approach_distance` past it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GraspPose<T: Real> {
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
    pub width: T,
    pub approach_distance: T,
    pub score: T,
    /// Indices of the two contact points in the cloud the grasp was detected on.
    pub contacts: [usize; 2],
}

impl<T: Real> GraspPose<T> {
    pub fn closing_axis(&self) -> Vector3<T> {
        self.rotation.column(0).into_owned()
    }

    pub fn approach_axis(&self) -> Vector3<T> {
        self.rotation.column(2).into_owned()
    }

    /// The two contact positions implied by center, closing axis and width.
    pub fn contact_points(&self) -> [Vector3<T>; 2] {
        let half = self.closing_axis() * (self.width * T::lit(0.5));
        [self.translation - half, self.translation + half]
    }

    /// Coordinates of a camera-frame point in the grasp frame.
    #[inline]
    pub fn to_local(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation.tr_mul(&(p - self.translation))
    }

    pub fn row_major_rotation(&self) -> [T; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)],
            r[(1, 0)], r[(1, 1)], r[(1, 2)],
            r[(2, 0)], r[(2, 1)], r[(2, 2)],
        ]
    }
}

/// Depth intervals, in approach distance, over which a grasp-frame point is
/// strictly inside a finger or the palm. Empty for points outside the finger slab.
pub(crate) fn blocked_depths<T: Real>(
    local: &Vector3<T>,
    width: T,
    gripper: &GripperModel<T>,
) -> impl Iterator<Item = (T, T)> {
    let h = width * T::lit(0.5) + T::lit(OPENING_CLEARANCE);
    let outer = h + gripper.finger_thickness;
    let in_slab = local.y.abs() < gripper.finger_thickness * T::lit(0.5);
    let ax = local.x.abs();
    let z = local.z;
    let finger = (in_slab && ax > h && ax < outer).then(|| (-z, gripper.finger_length - z));
    let palm = (in_slab && ax < outer).then(|| (-z - gripper.palm_depth, -z));
    finger.into_iter().chain(palm)
}

fn near_contact<T: Real>(p: &Vector3<T>, contacts: &[Vector3<T>; 2]) -> bool {
    let tol = T::lit(CONTACT_TOLERANCE);
    contacts.iter().any(|c| (p - c).norm() <= tol)
}

/// True iff some point lies strictly inside a finger box or the palm box,
/// with fingers opened 1 mm beyond each contact. Points within 1 mm of a
/// contact are exempt.
pub fn collision_check<T: Real>(grasp: &GraspPose<T>, points: &[Vector3<T>], gripper: &GripperModel<T>) -> bool {
    let contacts = grasp.contact_points();
    let d = grasp.approach_distance;
    points.iter().any(|p| {
        if near_contact(p, &contacts) {
            return false;
        }
        let local = grasp.to_local(p);
        blocked_depths(&local, grasp.width, gripper).any(|(lo, hi)| lo < d && d < hi)
    })
}

/// Smallest approach distance in `[0, finger_length]` at which none of the
/// given points collide, keeping `margin` clear of every blocked interval.
pub(crate) fn min_free_depth<T: Real>(
    grasp: &GraspPose<T>,
    points: impl Iterator<Item = Vector3<T>>,
    gripper: &GripperModel<T>,
    margin: T,
) -> Option<T> {
    let contacts = grasp.contact_points();
    let mut blocked: Vec<(T, T)> = Vec::new();
    for p in points {
        if near_contact(&p, &contacts) {
            continue;
        }
        let local = grasp.to_local(&p);
        for (lo, hi) in blocked_depths(&local, grasp.width, gripper) {
            blocked.push((lo - margin, hi + margin));
        }
    }
    blocked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut d = T::zero();
    for (lo, hi) in blocked {
        if lo >= d {
            break;
        }
        if hi > d {
            d = hi;
        }
    }
    (d <= gripper.finger_length).then_some(d)
}
