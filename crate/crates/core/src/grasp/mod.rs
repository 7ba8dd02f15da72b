//! Antipodal 6-DoF grasp detection on a region-of-interest cloud.

mod gripper;
mod normals;
mod sampler;

use std::cmp::Ordering;
use std::path::Path;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gripper::{collision_check, GraspPose, GripperModel, CONTACT_TOLERANCE, OPENING_CLEARANCE};
pub use normals::{estimate_normals, oriented_points, NormalError, OrientedPoint};
pub use sampler::{antipodal_quality, sample_antipodal, score, Candidate, SamplerParams};

use crate::error::IoError;
use crate::localization::PointCloud;
use crate::scalar::Real;
use crate::spatial::GridIndex;

/// Detection parameters. The seed has no default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GraspConfig<T: Real> {
    #[serde(default)]
    pub gripper: GripperModel<T>,
    #[serde(default = "defaults::k_neighbors")]
    pub k_neighbors: usize,
    #[serde(default = "defaults::friction")]
    pub friction_half_angle_deg: T,
    #[serde(default = "defaults::rotations")]
    pub approach_rotations: usize,
    #[serde(default = "defaults::max_pairs")]
    pub max_pairs: usize,
    /// Clearance kept between the gripper and ROI points when backing off
    /// the approach distance, absorbing depth quantization.
    #[serde(default = "defaults::depth_margin")]
    pub depth_margin: T,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    use crate::scalar::Real;

    pub fn k_neighbors() -> usize {
        16
    }
    pub fn friction<T: Real>() -> T {
        T::lit(30.0)
    }
    pub fn rotations() -> usize {
        8
    }
    pub fn max_pairs() -> usize {
        500
    }
    pub fn depth_margin<T: Real>() -> T {
        T::lit(0.0015)
    }
}

impl<T: Real> GraspConfig<T> {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            gripper: GripperModel::default(),
            k_neighbors: defaults::k_neighbors(),
            friction_half_angle_deg: defaults::friction(),
            approach_rotations: defaults::rotations(),
            max_pairs: defaults::max_pairs(),
            depth_margin: defaults::depth_margin(),
            seed,
        }
    }

    fn sampler_params(&self) -> SamplerParams<T> {
        SamplerParams {
            friction_half_angle_deg: self.friction_half_angle_deg,
            approach_rotations: self.approach_rotations,
            max_pairs: self.max_pairs,
            seed: self.seed,
        }
    }
}

/// Collision-free candidates in descending score order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GraspSet<T: Real> {
    pub candidates: Vec<GraspPose<T>>,
    pub seed: u64,
}

impl<T: Real> GraspSet<T> {
    pub fn top(&self) -> Option<&GraspPose<T>> {
        self.candidates.first()
    }

    /// Export records for the first `n` candidates.
    pub fn export(&self, n: usize) -> Vec<GraspRecord> {
        self.candidates.iter().take(n).map(GraspRecord::from_pose).collect()
    }

    pub fn to_json(&self, n: usize) -> Result<String, IoError> {
        Ok(serde_json::to_string_pretty(&self.export(n))?)
    }

    pub fn save_json(&self, path: impl AsRef<Path>, n: usize) -> Result<(), IoError> {
        std::fs::write(path, self.to_json(n)?)?;
        Ok(())
    }
}

/// Grasp as exported to JSON: row-major rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspRecord {
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    pub width: f64,
    pub approach_distance: f64,
    pub score: f64,
}

impl GraspRecord {
    pub fn from_pose<T: Real>(g: &GraspPose<T>) -> Self {
        Self {
            rotation: g.row_major_rotation().map(|v| v.as_f64()),
            translation: [g.translation.x.as_f64(), g.translation.y.as_f64(), g.translation.z.as_f64()],
            width: g.width.as_f64(),
            approach_distance: g.approach_distance.as_f64(),
            score: g.score.as_f64(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraspError {
    #[error("region of interest has no target points")]
    NoTarget,
    #[error(transparent)]
    Normals(#[from] NormalError),
    #[error("invalid gripper model")]
    InvalidGripper,
    #[error("no collision-free grasp found ({sampled} candidates sampled)")]
    NoGrasp { sampled: usize },
}

/// Descending score; ties by smaller width, then lexicographic translation,
/// then row-major rotation.
pub fn grasp_order<T: Real>(a: &GraspPose<T>, b: &GraspPose<T>) -> Ordering {
    let cmp = |x: T, y: T| x.as_f64().total_cmp(&y.as_f64());
    cmp(b.score, a.score)
        .then_with(|| cmp(a.width, b.width))
        .then_with(|| {
            (0..3)
                .map(|i| cmp(a.translation[i], b.translation[i]))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| {
            let (ra, rb) = (a.row_major_rotation(), b.row_major_rotation());
            (0..9).map(|i| cmp(ra[i], rb[i])).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
        })
}

/// Normals over the whole ROI, antipodal sampling on target points, then a
/// back-off of each candidate's approach distance until it clears every ROI
/// point (target and context). Candidates that cannot clear are dropped.
pub fn detect_grasps<T: Real>(roi: &PointCloud<T>, config: &GraspConfig<T>) -> Result<GraspSet<T>, GraspError> {
    if !config.gripper.is_valid() {
        return Err(GraspError::InvalidGripper);
    }
    let targets = roi.target_indices();
    if targets.is_empty() {
        return Err(GraspError::NoTarget);
    }
    let normals = estimate_normals(roi.points(), config.k_neighbors)?;
    let oriented = oriented_points(roi.points(), &normals, targets);
    let raw = sample_antipodal(&oriented, &config.gripper, &config.sampler_params());
    let sampled = raw.len();

    let grid = GridIndex::new(roi.points(), T::lit(0.01));
    let reach = config.gripper.reach();
    let mut candidates: Vec<GraspPose<T>> = raw
        .par_iter()
        .filter_map(|c| {
            let mut pose = c.pose;
            let mut near: Vec<Vector3<T>> = Vec::new();
            grid.for_each_within(&pose.translation, reach, |i| near.push(roi.points()[i]));
            let d = gripper::min_free_depth(&pose, near.iter().copied(), &config.gripper, config.depth_margin)?;
            pose.approach_distance = d;
            (!collision_check(&pose, &near, &config.gripper)).then_some(pose)
        })
        .collect();
    if candidates.is_empty() {
        return Err(GraspError::NoGrasp { sampled });
    }
    candidates.sort_by(grasp_order);
    Ok(GraspSet {
        candidates,
        seed: config.seed,
    })
}
