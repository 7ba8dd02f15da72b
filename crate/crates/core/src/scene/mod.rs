//! Deterministic synthetic RGB-D scenes from part-labeled primitives.

pub mod catalog;
mod export;
mod frame;
mod render;
mod shape;
mod types;

pub use export::{color_image, color_png_bytes, export_frame, import_frame};
pub use frame::{
    ground_truth_mask, EmptyMaskError, InventoryEntry, LabelIndex, PartKey, RgbdFrame,
};
pub use render::render;
pub use shape::Shape;
pub use types::{
    CameraIntrinsics, CameraSetup, PartPrimitive, PlacedPrimitive, SceneDescription, SceneError,
    SceneObject,
};

/// Label of pixels with no hit.
pub const LABEL_EMPTY: u16 = 0;
/// Label shared by all background primitives.
pub const LABEL_BACKGROUND: u16 = 1;
/// Label of the first object part; later parts follow in scene order.
pub const LABEL_FIRST_PART: u16 = 2;
