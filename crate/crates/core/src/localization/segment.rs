use crate::query::TargetQuery;
use crate::raster::BinaryMask;
use crate::scalar::Real;
use crate::scene::{ground_truth_mask, EmptyMaskError, PartKey, RgbdFrame, SceneDescription};

/// 2-D target segmentation for a query.
pub trait Segmenter<T: Real>: Send + Sync {
    fn segment(&self, frame: &RgbdFrame<T>, query: &TargetQuery) -> Result<BinaryMask, EmptyMaskError>;
}

/// Exact lookup in the frame's part-label raster.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroundTruthSegmenter;

impl<T: Real> Segmenter<T> for GroundTruthSegmenter {
    fn segment(&self, frame: &RgbdFrame<T>, query: &TargetQuery) -> Result<BinaryMask, EmptyMaskError> {
        ground_truth_mask(frame, query)
    }
}

/// Nearest-reference-color classifier for flat-colored scenes.
///
/// Each pixel is assigned to the palette entry with the closest RGB color
/// (ties go to the earlier entry); the mask holds pixels assigned to parts
/// the query selects. Background and empty pixels have their own entries.
#[derive(Debug, Clone)]
pub struct ColorSegmenter {
    palette: Vec<(Option<PartKey>, [u8; 3])>,
}

impl ColorSegmenter {
    pub fn new(palette: Vec<(Option<PartKey>, [u8; 3])>) -> Self {
        Self { palette }
    }

    /// Palette from the scene's part colors, background colors, and black for empty.
    pub fn from_scene<T: Real>(scene: &SceneDescription<T>) -> Self {
        let mut palette = Vec::new();
        for obj in &scene.objects {
            for p in &obj.parts {
                palette.push((
                    Some(PartKey {
                        object: obj.name.clone(),
                        part: p.part_name.clone(),
                    }),
                    p.color,
                ));
            }
        }
        for b in &scene.background {
            palette.push((None, b.color));
        }
        palette.push((None, [0, 0, 0]));
        Self { palette }
    }

    fn classify(&self, c: [u8; 3]) -> usize {
        let dist = |r: &[u8; 3]| -> i32 {
            (0..3)
                .map(|i| {
                    let d = i32::from(c[i]) - i32::from(r[i]);
                    d * d
                })
                .sum()
        };
        let mut best = 0;
        for i in 1..self.palette.len() {
            if dist(&self.palette[i].1) < dist(&self.palette[best].1) {
                best = i;
            }
        }
        best
    }
}

impl<T: Real> Segmenter<T> for ColorSegmenter {
    fn segment(&self, frame: &RgbdFrame<T>, query: &TargetQuery) -> Result<BinaryMask, EmptyMaskError> {
        let selected: Vec<bool> = self
            .palette
            .iter()
            .map(|(k, _)| k.as_ref().is_some_and(|k| query.matches(&k.object, &k.part)))
            .collect();
        let bits = frame
            .color
            .as_slice()
            .iter()
            .map(|&c| u8::from(!self.palette.is_empty() && selected[self.classify(c)]))
            .collect();
        let mask = BinaryMask::from_bits(frame.width(), frame.height(), bits).expect("dims");
        if mask.is_all_zero() {
            return Err(EmptyMaskError {
                query: query.clone(),
            });
        }
        Ok(mask)
    }
}
