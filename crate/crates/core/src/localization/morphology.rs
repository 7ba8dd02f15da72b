use serde::{Deserialize, Serialize};

use crate::raster::{BinaryMask, Raster};

/// Rectangular structuring element of `(2·half_width + 1) × (2·half_height + 1)`
/// offsets centered on the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StructuringElement {
    pub half_width: usize,
    pub half_height: usize,
}

impl StructuringElement {
    pub const fn new(half_width: usize, half_height: usize) -> Self {
        Self {
            half_width,
            half_height,
        }
    }

    /// Square element with an odd side length. Even sizes are rejected.
    pub fn square(size: usize) -> Option<Self> {
        (size % 2 == 1).then_some(Self::new(size / 2, size / 2))
    }

    /// 49×49 at 640 px wide, scaled with image width. At desk range the ring
    /// then reaches the points a fully inserted palm can sweep beside the target.
    pub fn default_for_width(width: usize) -> Self {
        let half = (24.0 * width as f64 / 640.0).round() as usize;
        Self::new(half, half)
    }

    pub fn width(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn height(&self) -> usize {
        2 * self.half_height + 1
    }

    pub fn offsets(&self) -> impl Iterator<Item = (isize, isize)> + '_ {
        let (hw, hh) = (self.half_width as isize, self.half_height as isize);
        (-hh..=hh).flat_map(move |n| (-hw..=hw).map(move |m| (m, n)))
    }

    /// Minkowski sum of two rectangles.
    pub fn minkowski(&self, other: &Self) -> Self {
        Self::new(
            self.half_width + other.half_width,
            self.half_height + other.half_height,
        )
    }
}

/// Binary dilation with zero padding:
/// `out(x, y) = max over (m, n) in S of in(x + m, y + n)`.
///
/// Separable: a horizontal running window over each row, then a vertical
/// one over each column, each via prefix counts. O(W·H) regardless of `S`.
pub fn dilate(mask: &BinaryMask, s: &StructuringElement) -> BinaryMask {
    let (w, h) = mask.dims();
    if w == 0 || h == 0 {
        return mask.clone();
    }
    let horizontal = window_any(mask.bits(), w, h, s.half_width, true);
    let both = window_any(&horizontal, w, h, s.half_height, false);
    BinaryMask::from_bits(w, h, both).expect("dims")
}

/// For each pixel, 1 if any pixel within `half` along the chosen axis is set.
fn window_any(bits: &[u8], w: usize, h: usize, half: usize, along_rows: bool) -> Vec<u8> {
    let (lines, len) = if along_rows { (h, w) } else { (w, h) };
    let at = |line: usize, i: usize| {
        if along_rows {
            line * w + i
        } else {
            i * w + line
        }
    };
    let mut out = vec![0u8; w * h];
    let mut prefix = vec![0u32; len + 1];
    for line in 0..lines {
        for i in 0..len {
            prefix[i + 1] = prefix[i] + u32::from(bits[at(line, i)] != 0);
        }
        for i in 0..len {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(len);
            if prefix[hi] > prefix[lo] {
                out[at(line, i)] = 1;
            }
        }
    }
    out
}

/// Thresholds a raster at `> 0`.
pub fn binarize<P: PartialOrd + Default>(raster: &Raster<P>) -> BinaryMask {
    let zero = P::default();
    let bits = raster.as_slice().iter().map(|v| u8::from(*v > zero)).collect();
    BinaryMask::from_bits(raster.width(), raster.height(), bits).expect("dims")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pixel_becomes_block() {
        let mut m = BinaryMask::zeros(12, 12);
        m.set(5, 5, true);
        let d = dilate(&m, &StructuringElement::square(3).unwrap());
        let expected = BinaryMask::from_fn(12, 12, |x, y| (4..=6).contains(&x) && (4..=6).contains(&y));
        assert_eq!(d, expected);
    }

    #[test]
    fn zeros_stay_zero() {
        let m = BinaryMask::zeros(9, 7);
        assert!(dilate(&m, &StructuringElement::new(3, 2)).is_all_zero());
    }

    #[test]
    fn border_pixel_is_clipped() {
        let mut m = BinaryMask::zeros(5, 5);
        m.set(0, 4, true);
        let d = dilate(&m, &StructuringElement::new(1, 1));
        assert_eq!(d.count(), 4);
    }

    #[test]
    fn element_geometry() {
        assert!(StructuringElement::square(4).is_none());
        let s = StructuringElement::new(2, 1);
        assert_eq!((s.width(), s.height()), (5, 3));
        assert_eq!(s.offsets().count(), 15);
        assert!(s.offsets().any(|o| o == (0, 0)));
        assert_eq!(StructuringElement::default_for_width(640), StructuringElement::new(24, 24));
        assert_eq!(StructuringElement::default_for_width(1280), StructuringElement::new(48, 48));
    }

    #[test]
    fn binarize_thresholds_above_zero() {
        let r = Raster::from_vec(3, 1, vec![0.0, 0.4, 255.0]).unwrap();
        assert_eq!(binarize(&r).bits(), &[0, 1, 1]);
        let m = BinaryMask::from_fn(4, 4, |x, y| x == y);
        assert_eq!(binarize(m.as_raster()), m);
    }
}
