//! Language-conditioned part-level grasping on synthetic RGB-D scenes.
//!
//! Stages: dialogue to a structured action sequence ([`perception`]), mask
//! expansion and point-cloud cropping ([`localization`]), and antipodal
//! grasp detection ([`grasp`]). [`scene`] renders the RGB-D input and
//! [`eval`] scores sequences and localization strategies.

pub mod error;
pub mod eval;
pub mod geometry;
pub mod grasp;
pub mod query;
pub mod raster;
pub mod scalar;
pub mod localization;
pub mod perception;
pub mod scene;
pub mod spatial;

pub use error::IoError;
pub use geometry::RigidTransform;
pub use query::TargetQuery;
pub use raster::{BinaryMask, Raster};
pub use scalar::Real;

pub type RigidTransformF64 = geometry::RigidTransform<f64>;
pub type RigidTransformF32 = geometry::RigidTransform<f32>;
pub type SceneDescriptionF64 = scene::SceneDescription<f64>;
pub type SceneDescriptionF32 = scene::SceneDescription<f32>;
pub type RgbdFrameF64 = scene::RgbdFrame<f64>;
pub type RgbdFrameF32 = scene::RgbdFrame<f32>;
pub type PointCloudF64 = localization::PointCloud<f64>;
pub type PointCloudF32 = localization::PointCloud<f32>;
pub type GraspPoseF64 = grasp::GraspPose<f64>;
pub type GraspPoseF32 = grasp::GraspPose<f32>;
pub type GraspSetF64 = grasp::GraspSet<f64>;
pub type GraspSetF32 = grasp::GraspSet<f32>;
