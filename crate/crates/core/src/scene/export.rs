//! Frame artifacts on disk: `color.png` (RGB8), `depth.png` and `labels.png`
//! (16-bit gray, depth in mm), `labels.json` and `intrinsics.json` sidecars.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{ImageBuffer, ImageFormat, Luma, Rgb, RgbImage};

use super::frame::{LabelIndex, RgbdFrame};
use super::CameraIntrinsics;
use crate::error::IoError;
use crate::raster::Raster;
use crate::scalar::Real;

type Gray16 = ImageBuffer<Luma<u16>, Vec<u16>>;

pub fn color_image<T: Real>(frame: &RgbdFrame<T>) -> RgbImage {
    let (w, h) = frame.color.dims();
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        Rgb(*frame.color.get(x as usize, y as usize))
    })
}

pub fn color_png_bytes<T: Real>(frame: &RgbdFrame<T>) -> Result<Vec<u8>, IoError> {
    let mut out = Cursor::new(Vec::new());
    color_image(frame).write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

fn gray16(r: &Raster<u16>) -> Gray16 {
    let (w, h) = r.dims();
    Gray16::from_raw(w as u32, h as u32, r.as_slice().to_vec()).expect("dims")
}

fn read_gray16(path: &Path) -> Result<Raster<u16>, IoError> {
    let img = image::open(path)?.into_luma16();
    let (w, h) = img.dimensions();
    Ok(Raster::from_vec(w as usize, h as usize, img.into_raw()).expect("dims"))
}

pub fn export_frame<T: Real>(frame: &RgbdFrame<T>, dir: impl AsRef<Path>) -> Result<(), IoError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    color_image(frame).save_with_format(dir.join("color.png"), ImageFormat::Png)?;
    gray16(&frame.depth).save_with_format(dir.join("depth.png"), ImageFormat::Png)?;
    gray16(&frame.labels).save_with_format(dir.join("labels.png"), ImageFormat::Png)?;
    fs::write(
        dir.join("labels.json"),
        serde_json::to_string_pretty(&frame.label_index)?,
    )?;
    fs::write(
        dir.join("intrinsics.json"),
        serde_json::to_string_pretty(&frame.intrinsics)?,
    )?;
    Ok(())
}

pub fn import_frame<T: Real>(dir: impl AsRef<Path>) -> Result<RgbdFrame<T>, IoError> {
    let dir = dir.as_ref();
    let intrinsics: CameraIntrinsics<T> =
        serde_json::from_str(&fs::read_to_string(dir.join("intrinsics.json"))?)?;
    let label_index: LabelIndex =
        serde_json::from_str(&fs::read_to_string(dir.join("labels.json"))?)?;
    let rgb = image::open(dir.join("color.png"))?.into_rgb8();
    let (w, h) = rgb.dimensions();
    let color = Raster::from_vec(w as usize, h as usize, rgb.pixels().map(|p| p.0).collect())
        .expect("dims");
    let depth = read_gray16(&dir.join("depth.png"))?;
    let labels = read_gray16(&dir.join("labels.png"))?;
    let dims = (intrinsics.width, intrinsics.height);
    if color.dims() != dims || depth.dims() != dims || labels.dims() != dims {
        return Err(IoError::Format(
            "raster dimensions disagree with intrinsics".into(),
        ));
    }
    Ok(RgbdFrame {
        intrinsics,
        color,
        depth,
        labels,
        label_index,
    })
}
