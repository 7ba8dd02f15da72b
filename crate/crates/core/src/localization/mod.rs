//! Target localization: segment, dilate, back-project, crop.

mod cloud;
mod morphology;
mod segment;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cloud::{back_project, crop_roi, EmptyTargetError, PointCloud, Provenance};
pub use morphology::{binarize, dilate, StructuringElement};
pub use segment::{ColorSegmenter, GroundTruthSegmenter, Segmenter};

use crate::query::TargetQuery;
use crate::raster::BinaryMask;
use crate::scalar::Real;
use crate::scene::{EmptyMaskError, RgbdFrame};

/// How the region of interest is cut from the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Whole frame as both target and region.
    Global,
    /// Raw target mask, no surrounding context.
    MaskBased,
    /// Target mask plus a dilation ring of context.
    Expansion,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Global, Strategy::MaskBased, Strategy::Expansion];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Global => "global",
            Strategy::MaskBased => "mask_based",
            Strategy::Expansion => "expansion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LocateError {
    #[error(transparent)]
    EmptyMask(#[from] EmptyMaskError),
    #[error("no target pixel of `{0}` has valid depth")]
    EmptyTarget(TargetQuery),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoiStats {
    pub target_pixels: usize,
    pub expanded_pixels: usize,
    pub target_points: usize,
    pub context_points: usize,
    pub invalid_target_pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Localization<T: Real> {
    pub target_mask: BinaryMask,
    pub expanded_mask: BinaryMask,
    pub roi: PointCloud<T>,
    pub stats: RoiStats,
    /// Set when more than half of the target pixels lack depth.
    pub degraded: bool,
}

/// Expansion localization: segment, dilate by `element`, binarize, back-project, crop.
pub fn locate<T: Real>(
    frame: &RgbdFrame<T>,
    query: &TargetQuery,
    segmenter: &dyn Segmenter<T>,
    element: &StructuringElement,
) -> Result<Localization<T>, LocateError> {
    locate_with(frame, query, segmenter, element, Strategy::Expansion)
}

pub fn locate_with<T: Real>(
    frame: &RgbdFrame<T>,
    query: &TargetQuery,
    segmenter: &dyn Segmenter<T>,
    element: &StructuringElement,
    strategy: Strategy,
) -> Result<Localization<T>, LocateError> {
    let raw = segmenter.segment(frame, query)?;
    let (target_mask, expanded_mask) = match strategy {
        Strategy::Global => {
            let all = BinaryMask::ones(frame.width(), frame.height());
            (all.clone(), all)
        }
        Strategy::MaskBased => (raw.clone(), raw),
        Strategy::Expansion => {
            let grown = binarize(dilate(&raw, element).as_raster());
            (raw, grown)
        }
    };
    let cloud = back_project(&frame.depth, &frame.intrinsics);
    let roi = crop_roi(&cloud, &target_mask, &expanded_mask)
        .map_err(|_| LocateError::EmptyTarget(query.clone()))?;

    let target_pixels = target_mask.count();
    let invalid_target_pixels = target_mask
        .bits()
        .iter()
        .zip(frame.depth.as_slice())
        .filter(|(&m, &d)| m != 0 && d == 0)
        .count();
    let degraded = 2 * invalid_target_pixels > target_pixels;
    if degraded {
        log::warn!(
            "degraded localization for `{query}`: {invalid_target_pixels}/{target_pixels} target pixels lack depth"
        );
    }
    let stats = RoiStats {
        target_pixels,
        expanded_pixels: expanded_mask.count(),
        target_points: roi.count(Provenance::Target),
        context_points: roi.count(Provenance::Context),
        invalid_target_pixels,
    };
    Ok(Localization {
        target_mask,
        expanded_mask,
        roi,
        stats,
        degraded,
    })
}
