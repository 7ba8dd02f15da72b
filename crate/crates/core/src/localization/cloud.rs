use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::IoError;
use crate::raster::{BinaryMask, Raster};
use crate::scalar::Real;
use crate::scene::CameraIntrinsics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Target,
    Context,
}

/// Camera-frame points with their source pixel and provenance tag.
///
/// Built by [`back_project`] with every point tagged `Context`;
/// [`crop_roi`] assigns the final tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PointCloud<T: Real> {
    width: usize,
    height: usize,
    points: Vec<Vector3<T>>,
    provenance: Vec<Provenance>,
    pixels: Vec<[u32; 2]>,
}

impl<T: Real> PointCloud<T> {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            points: Vec::new(),
            provenance: Vec::new(),
            pixels: Vec::new(),
        }
    }

    /// Appends a point. Panics if `z <= 0` or the pixel is out of bounds.
    pub fn push(&mut self, point: Vector3<T>, pixel: [u32; 2], tag: Provenance) {
        assert!(point.z > T::zero(), "point must lie in front of the camera");
        assert!(
            (pixel[0] as usize) < self.width && (pixel[1] as usize) < self.height,
            "source pixel out of bounds"
        );
        self.points.push(point);
        self.pixels.push(pixel);
        self.provenance.push(tag);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn source_dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn points(&self) -> &[Vector3<T>] {
        &self.points
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn pixels(&self) -> &[[u32; 2]] {
        &self.pixels
    }

    pub fn count(&self, tag: Provenance) -> usize {
        self.provenance.iter().filter(|&&t| t == tag).count()
    }

    /// Indices of target-tagged points.
    pub fn target_indices(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.provenance[i] == Provenance::Target)
            .collect()
    }

    pub fn target_points(&self) -> Vec<Vector3<T>> {
        self.target_indices().into_iter().map(|i| self.points[i]).collect()
    }

    /// ASCII PLY with float xyz, source pixel, and provenance (0 target, 1 context).
    pub fn to_ply(&self) -> String {
        let mut s = String::new();
        s.push_str("ply\nformat ascii 1.0\n");
        let _ = writeln!(s, "element vertex {}", self.len());
        s.push_str("property float x\nproperty float y\nproperty float z\n");
        s.push_str("property uint u\nproperty uint v\nproperty uchar provenance\nend_header\n");
        for i in 0..self.len() {
            let p = &self.points[i];
            let tag = match self.provenance[i] {
                Provenance::Target => 0,
                Provenance::Context => 1,
            };
            let _ = writeln!(
                s,
                "{} {} {} {} {} {}",
                p.x.as_f64(),
                p.y.as_f64(),
                p.z.as_f64(),
                self.pixels[i][0],
                self.pixels[i][1],
                tag
            );
        }
        s
    }

    pub fn save_ply(&self, path: impl AsRef<Path>) -> Result<(), IoError> {
        std::fs::write(path, self.to_ply())?;
        Ok(())
    }
}

/// One point per pixel with positive depth: `z = d / 1000`,
/// `x = (u - cx) z / fx`, `y = (v - cy) z / fy`.
pub fn back_project<T: Real>(depth: &Raster<u16>, intr: &CameraIntrinsics<T>) -> PointCloud<T> {
    assert_eq!(
        depth.dims(),
        (intr.width, intr.height),
        "depth raster does not match intrinsics"
    );
    let mut cloud = PointCloud::empty(intr.width, intr.height);
    let scale = T::lit(1e-3);
    for v in 0..intr.height {
        for u in 0..intr.width {
            let d = *depth.get(u, v);
            if d == 0 {
                continue;
            }
            let z = T::lit(d as f64) * scale;
            let point = intr.ray(u, v) * z;
            cloud.points.push(point);
            cloud.pixels.push([u as u32, v as u32]);
            cloud.provenance.push(Provenance::Context);
        }
    }
    cloud
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("region of interest has no target points")]
pub struct EmptyTargetError;

/// Keeps points whose source pixel is in `expanded`; tags them `Target` when
/// the pixel is also in `target`, `Context` otherwise.
pub fn crop_roi<T: Real>(
    cloud: &PointCloud<T>,
    target: &BinaryMask,
    expanded: &BinaryMask,
) -> Result<PointCloud<T>, EmptyTargetError> {
    assert_eq!(target.dims(), cloud.source_dims(), "target mask dims");
    assert_eq!(expanded.dims(), cloud.source_dims(), "expanded mask dims");
    let mut out = PointCloud::empty(cloud.width, cloud.height);
    for i in 0..cloud.len() {
        let [u, v] = cloud.pixels[i];
        let (u, v) = (u as usize, v as usize);
        if !expanded.get(u, v) {
            continue;
        }
        let tag = if target.get(u, v) {
            Provenance::Target
        } else {
            Provenance::Context
        };
        out.points.push(cloud.points[i]);
        out.pixels.push(cloud.pixels[i]);
        out.provenance.push(tag);
    }
    if out.count(Provenance::Target) == 0 {
        return Err(EmptyTargetError);
    }
    Ok(out)
}
