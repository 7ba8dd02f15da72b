use nalgebra::Vector3;
use rayon::prelude::*;

use super::frame::{LabelIndex, PartKey, RgbdFrame};
use super::types::{SceneDescription, SceneError};
use super::LABEL_EMPTY;
use crate::raster::Raster;
use crate::scalar::Real;

/// Ray-casts every pixel center against the scene's primitives.
///
/// The nearest hit sets the flat part color, the label, and the z-depth in
/// millimeters (rounded). Hits that round outside `1..=65535` mm count as misses.
pub fn render<T: Real>(scene: &SceneDescription<T>) -> Result<RgbdFrame<T>, SceneError> {
    scene.validate()?;
    let intr = scene.camera.intrinsics;
    let placed = scene.placed_primitives();
    // ray origin and direction in each primitive's local frame: origin is fixed per primitive
    let origins: Vec<Vector3<T>> = placed
        .iter()
        .map(|p| p.pose.apply_inverse(&Vector3::zeros()))
        .collect();
    let (w, h) = (intr.width, intr.height);
    let min_s = T::lit(1e-9);
    let thousand = T::lit(1000.0);

    let rows: Vec<Vec<([u8; 3], u16, u16)>> = (0..h)
        .into_par_iter()
        .map(|v| {
            (0..w)
                .map(|u| {
                    let ray = intr.ray(u, v);
                    let mut best: Option<(T, usize)> = None;
                    for (i, prim) in placed.iter().enumerate() {
                        let dir = prim.pose.rotate_inverse(&ray);
                        if let Some(s) = prim.shape.intersect(&origins[i], &dir, min_s) {
                            if best.is_none_or(|(b, _)| s < b) {
                                best = Some((s, i));
                            }
                        }
                    }
                    match best {
                        Some((s, i)) => {
                            // ray z is 1, so the ray parameter is the z-depth
                            let mm = (s * thousand).round().as_f64();
                            if (1.0..=65535.0).contains(&mm) {
                                (placed[i].color, mm as u16, placed[i].label)
                            } else {
                                ([0; 3], 0, LABEL_EMPTY)
                            }
                        }
                        None => ([0; 3], 0, LABEL_EMPTY),
                    }
                })
                .collect()
        })
        .collect();

    let mut color = Vec::with_capacity(w * h);
    let mut depth = Vec::with_capacity(w * h);
    let mut labels = Vec::with_capacity(w * h);
    for (c, d, l) in rows.into_iter().flatten() {
        color.push(c);
        depth.push(d);
        labels.push(l);
    }
    let label_index = LabelIndex {
        entries: scene
            .objects
            .iter()
            .flat_map(|o| {
                o.parts.iter().map(|p| PartKey {
                    object: o.name.clone(),
                    part: p.part_name.clone(),
                })
            })
            .collect(),
    };
    Ok(RgbdFrame {
        intrinsics: intr,
        color: Raster::from_vec(w, h, color).expect("dims"),
        depth: Raster::from_vec(w, h, depth).expect("dims"),
        labels: Raster::from_vec(w, h, labels).expect("dims"),
        label_index,
    })
}
