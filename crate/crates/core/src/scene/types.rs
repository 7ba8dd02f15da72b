use std::collections::HashSet;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::shape::Shape;
use crate::geometry::RigidTransform;
use crate::scalar::Real;

/// Pinhole intrinsics. Pixel `(u, v)` has its center at integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics<T> {
    pub width: usize,
    pub height: usize,
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
}

impl<T: Real> CameraIntrinsics<T> {
    /// 640×480 with a 615 px focal length and centered principal point.
    pub fn desk_default() -> Self {
        Self {
            width: 640,
            height: 480,
            fx: T::lit(615.0),
            fy: T::lit(615.0),
            cx: T::lit(320.0),
            cy: T::lit(240.0),
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |msg: &str| Err(SceneError::InvalidIntrinsics(msg.to_string()));
        if self.width == 0 || self.height == 0 {
            return bad("width and height must be at least 1");
        }
        if !(self.fx > T::zero() && self.fy > T::zero()) {
            return bad("fx and fy must be positive");
        }
        if !(self.cx >= T::zero() && self.cx < T::lit(self.width as f64)) {
            return bad("cx must lie in [0, width)");
        }
        if !(self.cy >= T::zero() && self.cy < T::lit(self.height as f64)) {
            return bad("cy must lie in [0, height)");
        }
        Ok(())
    }

    /// Unnormalized ray through a pixel center, with unit z component.
    #[inline]
    pub fn ray(&self, u: usize, v: usize) -> Vector3<T> {
        Vector3::new(
            (T::lit(u as f64) - self.cx) / self.fx,
            (T::lit(v as f64) - self.cy) / self.fy,
            T::one(),
        )
    }

    /// Continuous pixel coordinates of a camera-frame point with `z > 0`.
    #[inline]
    pub fn project(&self, p: &Vector3<T>) -> (T, T) {
        (
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        )
    }

    /// Same camera at a different resolution, scaling focal length and principal point.
    pub fn rescaled(&self, width: usize, height: usize) -> Self {
        let sx = T::lit(width as f64 / self.width as f64);
        let sy = T::lit(height as f64 / self.height as f64);
        Self {
            width,
            height,
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
        }
    }
}

/// Camera intrinsics plus camera-to-world pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CameraSetup<T: Real> {
    pub intrinsics: CameraIntrinsics<T>,
    pub pose: RigidTransform<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PartPrimitive<T: Real> {
    pub part_name: String,
    pub shape: Shape<T>,
    /// Local-to-world pose.
    pub pose: RigidTransform<T>,
    pub color: [u8; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SceneObject<T: Real> {
    pub name: String,
    pub parts: Vec<PartPrimitive<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SceneDescription<T: Real> {
    pub camera: CameraSetup<T>,
    pub objects: Vec<SceneObject<T>>,
    pub background: Vec<PartPrimitive<T>>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("non-rigid pose: {0}")]
    NonRigidPose(String),
    #[error("non-positive or non-finite dimension on {0}")]
    BadDimension(String),
    #[error("empty name: {0}")]
    EmptyName(String),
    #[error("duplicate object name `{0}`")]
    DuplicateObject(String),
    #[error("duplicate part `{1}` on object `{0}`")]
    DuplicatePart(String, String),
    #[error("scene has no background primitive")]
    NoBackground,
    #[error("too many primitives for 16-bit labels ({0})")]
    TooManyPrimitives(usize),
}

/// A primitive placed in the camera frame with its label id.
#[derive(Debug, Clone, Copy)]
pub struct PlacedPrimitive<T: Real> {
    pub label: u16,
    pub shape: Shape<T>,
    /// Local-to-camera pose.
    pub pose: RigidTransform<T>,
    pub color: [u8; 3],
}

impl<T: Real> PlacedPrimitive<T> {
    /// Signed distance from a camera-frame point to this primitive's surface.
    pub fn signed_distance(&self, p: &Vector3<T>) -> T {
        self.shape.signed_distance(&self.pose.apply_inverse(p))
    }
}

fn check_primitive<T: Real>(owner: &str, p: &PartPrimitive<T>) -> Result<(), SceneError> {
    let what = format!("{owner}/{}", p.part_name);
    if p.part_name.trim().is_empty() {
        return Err(SceneError::EmptyName(format!("part of `{owner}`")));
    }
    if !p
        .shape
        .dimensions()
        .iter()
        .all(|d| *d > T::zero() && d.is_finite())
    {
        return Err(SceneError::BadDimension(what));
    }
    if !p.pose.is_rigid() || !p.pose.translation.iter().all(|v| v.is_finite()) {
        return Err(SceneError::NonRigidPose(what));
    }
    Ok(())
}

impl<T: Real> SceneDescription<T> {
    pub fn validate(&self) -> Result<(), SceneError> {
        self.camera.intrinsics.validate()?;
        if !self.camera.pose.is_rigid() {
            return Err(SceneError::NonRigidPose("camera".into()));
        }
        if self.background.is_empty() {
            return Err(SceneError::NoBackground);
        }
        for b in &self.background {
            check_primitive("background", b)?;
        }
        let mut names = HashSet::new();
        for obj in &self.objects {
            if obj.name.trim().is_empty() {
                return Err(SceneError::EmptyName("object".into()));
            }
            if !names.insert(obj.name.as_str()) {
                return Err(SceneError::DuplicateObject(obj.name.clone()));
            }
            let mut parts = HashSet::new();
            for p in &obj.parts {
                check_primitive(&obj.name, p)?;
                if !parts.insert(p.part_name.as_str()) {
                    return Err(SceneError::DuplicatePart(
                        obj.name.clone(),
                        p.part_name.clone(),
                    ));
                }
            }
        }
        let n_parts: usize = self.objects.iter().map(|o| o.parts.len()).sum();
        if n_parts + 2 > u16::MAX as usize {
            return Err(SceneError::TooManyPrimitives(n_parts));
        }
        Ok(())
    }

    /// Every primitive in the camera frame. Object parts get labels from 2
    /// upward in scene order; background primitives share label 1.
    pub fn placed_primitives(&self) -> Vec<PlacedPrimitive<T>> {
        let cam_from_world = self.camera.pose.inverse();
        let mut out = Vec::new();
        let mut label = super::LABEL_FIRST_PART;
        for obj in &self.objects {
            for p in &obj.parts {
                out.push(PlacedPrimitive {
                    label,
                    shape: p.shape,
                    pose: cam_from_world.compose(&p.pose),
                    color: p.color,
                });
                label += 1;
            }
        }
        for b in &self.background {
            out.push(PlacedPrimitive {
                label: super::LABEL_BACKGROUND,
                shape: b.shape,
                pose: cam_from_world.compose(&b.pose),
                color: b.color,
            });
        }
        out
    }

    /// Camera-frame primitive of a named part, if present.
    pub fn placed_part(&self, object: &str, part: &str) -> Option<PlacedPrimitive<T>> {
        let keys = self
            .objects
            .iter()
            .flat_map(|o| o.parts.iter().map(move |p| (o.name.as_str(), p.part_name.as_str())));
        keys.zip(self.placed_primitives())
            .find(|((o, p), _)| *o == object && *p == part)
            .map(|(_, placed)| placed)
    }
}
