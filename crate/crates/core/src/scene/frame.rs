use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CameraIntrinsics, LABEL_BACKGROUND, LABEL_EMPTY, LABEL_FIRST_PART};
use crate::query::TargetQuery;
use crate::raster::{BinaryMask, Raster};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartKey {
    pub object: String,
    pub part: String,
}

/// Maps 16-bit label ids to (object, part) keys. Id `2 + i` is `entries[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelIndex {
    pub entries: Vec<PartKey>,
}

impl LabelIndex {
    pub fn key(&self, label: u16) -> Option<&PartKey> {
        label
            .checked_sub(LABEL_FIRST_PART)
            .and_then(|i| self.entries.get(i as usize))
    }

    pub fn label_of(&self, object: &str, part: &str) -> Option<u16> {
        self.entries
            .iter()
            .position(|k| k.object == object && k.part == part)
            .map(|i| i as u16 + LABEL_FIRST_PART)
    }

    /// All label ids the query selects.
    pub fn matching(&self, query: &TargetQuery) -> Vec<u16> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, k)| query.matches(&k.object, &k.part))
            .map(|(i, _)| i as u16 + LABEL_FIRST_PART)
            .collect()
    }
}

/// Registered color, depth (mm, 0 = no hit) and part-label rasters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RgbdFrame<T: Real> {
    pub intrinsics: CameraIntrinsics<T>,
    pub color: Raster<[u8; 3]>,
    pub depth: Raster<u16>,
    pub labels: Raster<u16>,
    pub label_index: LabelIndex,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("no pixels match target `{query}`")]
pub struct EmptyMaskError {
    pub query: TargetQuery,
}

/// Visible object with the parts that own at least one pixel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InventoryEntry {
    pub object: String,
    pub parts: Vec<String>,
}

impl<T: Real> RgbdFrame<T> {
    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    /// Objects in label order with their visible parts.
    pub fn visible_inventory(&self) -> Vec<InventoryEntry> {
        let mut seen = vec![false; self.label_index.entries.len()];
        for &l in self.labels.as_slice() {
            if let Some(i) = l.checked_sub(LABEL_FIRST_PART) {
                seen[i as usize] = true;
            }
        }
        let mut out: Vec<InventoryEntry> = Vec::new();
        for (key, _) in self.label_index.entries.iter().zip(&seen).filter(|(_, s)| **s) {
            match out.iter_mut().find(|e| e.object == key.object) {
                Some(e) => e.parts.push(key.part.clone()),
                None => out.push(InventoryEntry {
                    object: key.object.clone(),
                    parts: vec![key.part.clone()],
                }),
            }
        }
        out
    }

    pub fn label_mask(&self, mut pred: impl FnMut(u16) -> bool) -> BinaryMask {
        let bits = self.labels.as_slice().iter().map(|&l| u8::from(pred(l))).collect();
        BinaryMask::from_bits(self.width(), self.height(), bits).expect("frame dims")
    }

    pub fn background_mask(&self) -> BinaryMask {
        self.label_mask(|l| l == LABEL_BACKGROUND)
    }

    pub fn empty_mask(&self) -> BinaryMask {
        self.label_mask(|l| l == LABEL_EMPTY)
    }
}

/// Pixels whose label matches the query (every part when no part is given).
pub fn ground_truth_mask<T: Real>(
    frame: &RgbdFrame<T>,
    query: &TargetQuery,
) -> Result<BinaryMask, EmptyMaskError> {
    let ids = frame.label_index.matching(query);
    let mask = frame.label_mask(|l| ids.contains(&l));
    if mask.is_all_zero() {
        return Err(EmptyMaskError {
            query: query.clone(),
        });
    }
    Ok(mask)
}
