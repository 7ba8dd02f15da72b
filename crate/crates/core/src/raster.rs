//! Row-major 2-D rasters and binary masks.

use std::path::Path;

use image::{GrayImage, Luma};
use serde::{Deserialize, Serialize};

use crate::error::IoError;

/// Dense row-major raster of `width * height` pixels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Raster<P> {
    width: usize,
    height: usize,
    data: Vec<P>,
}

impl<P: Clone> Raster<P> {
    pub fn filled(width: usize, height: usize, value: P) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<P> Raster<P> {
    /// Wraps an existing buffer. Returns `None` if its length is not `width * height`.
    pub fn from_vec(width: usize, height: usize, data: Vec<P>) -> Option<Self> {
        (data.len() == width * height).then_some(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> P) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[P] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [P] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<P> {
        self.data
    }

    #[inline]
    pub fn index_of(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &P {
        &self.data[self.index_of(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: P) {
        let i = self.index_of(x, y);
        self.data[i] = value;
    }

    pub fn map<Q>(&self, f: impl FnMut(&P) -> Q) -> Raster<Q> {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }
}

/// Binary raster with values in `{0, 1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMask(Raster<u8>);

impl BinaryMask {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self(Raster::filled(width, height, 0))
    }

    pub fn ones(width: usize, height: usize) -> Self {
        Self(Raster::filled(width, height, 1))
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        Self(Raster::from_fn(width, height, |x, y| u8::from(f(x, y))))
    }

    /// Builds a mask from raw bits; any non-zero byte becomes 1.
    pub fn from_bits(width: usize, height: usize, bits: Vec<u8>) -> Option<Self> {
        let bits = bits.into_iter().map(|b| u8::from(b != 0)).collect();
        Raster::from_vec(width, height, bits).map(Self)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.0.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.0.height()
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        *self.0.get(x, y) != 0
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.0.set(x, y, u8::from(on));
    }

    #[inline]
    pub fn bits(&self) -> &[u8] {
        self.0.as_slice()
    }

    pub fn count(&self) -> usize {
        self.bits().iter().filter(|&&b| b != 0).count()
    }

    pub fn is_all_zero(&self) -> bool {
        self.bits().iter().all(|&b| b == 0)
    }

    /// Pixelwise `self ⊆ other`. Masks of different size are never subsets.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims()
            && self
                .bits()
                .iter()
                .zip(other.bits())
                .all(|(&a, &b)| a == 0 || b != 0)
    }

    pub fn union(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!(self.dims(), other.dims(), "mask dimensions differ");
        let bits = self
            .bits()
            .iter()
            .zip(other.bits())
            .map(|(&a, &b)| a | b)
            .collect();
        Self(Raster::from_vec(self.width(), self.height(), bits).expect("same dims"))
    }

    pub fn as_raster(&self) -> &Raster<u8> {
        &self.0
    }

    pub fn to_gray_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width() as u32, self.height() as u32, |x, y| {
            Luma([if self.get(x as usize, y as usize) { 255 } else { 0 }])
        })
    }

    /// Writes the mask as an 8-bit PNG with values 0/255.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), IoError> {
        self.to_gray_image()
            .save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>, IoError> {
        let mut out = std::io::Cursor::new(Vec::new());
        self.to_gray_image()
            .write_to(&mut out, image::ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    /// Reads an 8-bit PNG; any non-zero value is foreground.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self, IoError> {
        let img = image::open(path)?.into_luma8();
        let (w, h) = img.dimensions();
        Ok(Self::from_bits(w as usize, h as usize, img.into_raw()).expect("image dims"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Raster::from_vec(2, 2, vec![0u8; 3]).is_none());
        assert!(Raster::from_vec(2, 2, vec![0u8; 4]).is_some());
    }

    #[test]
    fn raster_is_row_major() {
        let r = Raster::from_fn(3, 2, |x, y| 10 * y + x);
        assert_eq!(r.as_slice(), &[0, 1, 2, 10, 11, 12]);
        assert_eq!(*r.get(2, 1), 12);
    }

    #[test]
    fn mask_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let mask = BinaryMask::from_fn(7, 5, |x, y| (x + y) % 3 == 0);
        mask.save_png(&path).unwrap();
        assert_eq!(BinaryMask::load_png(&path).unwrap(), mask);
    }

    #[test]
    fn subset_and_union() {
        let a = BinaryMask::from_fn(4, 4, |x, _| x == 0);
        let b = BinaryMask::from_fn(4, 4, |x, _| x <= 1);
        assert!(a.is_subset_of(&b));
        assert!(!b.is_subset_of(&a));
        assert_eq!(a.union(&b), b);
        assert_eq!(b.count(), 8);
    }
}
