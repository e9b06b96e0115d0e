//! PNG reading and writing. Images are 8-bit RGB; masks and edge maps are
//! 8-bit grayscale with 0 for "off" and 255 for "on".

use std::path::Path;

use image::{ColorType, DynamicImage, GrayImage, ImageReader, RgbImage};

use super::{EdgeMap, Image, Mask};
use crate::error::{Error, Result};

fn decode(path: &Path) -> Result<DynamicImage> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    reader.decode().map_err(|e| Error::Image {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

fn unsupported(path: &Path, expected: &str, found: ColorType) -> Error {
    let depth = if found.bytes_per_pixel() / found.channel_count().max(1) > 1 {
        "16-bit"
    } else {
        "8-bit"
    };
    Error::UnsupportedFormat {
        path: path.to_path_buf(),
        msg: format!("expected {expected}, found {depth} {found:?}"),
    }
}

fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Loads an 8-bit RGB PNG, mapping each component `v` to `v / 255`.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    match decode(path)? {
        DynamicImage::ImageRgb8(buf) => {
            let (w, h) = buf.dimensions();
            let data = buf
                .into_raw()
                .into_iter()
                .map(|v| f32::from(v) / 255.0)
                .collect();
            Image::new(h as usize, w as usize, data)
        }
        other => Err(unsupported(path, "8-bit RGB", other.color())),
    }
}

/// Saves as 8-bit RGB PNG, rounding to the nearest level.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let raw: Vec<u8> = img.data().iter().map(|&v| to_u8(v)).collect();
    let buf = RgbImage::from_raw(img.width() as u32, img.height() as u32, raw)
        .expect("buffer sized from image");
    buf.save(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

fn load_binary(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    match decode(path)? {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            let data = buf
                .into_raw()
                .into_iter()
                .map(|v| u8::from(v >= 128))
                .collect();
            Ok((h as usize, w as usize, data))
        }
        other => Err(unsupported(path, "8-bit grayscale", other.color())),
    }
}

fn save_binary(h: usize, w: usize, data: &[u8], path: &Path) -> Result<()> {
    let raw = data.iter().map(|&v| v * 255).collect();
    let buf = GrayImage::from_raw(w as u32, h as u32, raw).expect("buffer sized from mask");
    buf.save(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Loads a grayscale mask; values of 128 and above are holes.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let (h, w, data) = load_binary(path.as_ref())?;
    Mask::new(h, w, data)
}

pub fn save_mask(m: &Mask, path: impl AsRef<Path>) -> Result<()> {
    save_binary(m.height(), m.width(), m.data(), path.as_ref())
}

pub fn load_edge_map(path: impl AsRef<Path>) -> Result<EdgeMap> {
    let (h, w, data) = load_binary(path.as_ref())?;
    EdgeMap::new(h, w, data)
}

pub fn save_edge_map(e: &EdgeMap, path: impl AsRef<Path>) -> Result<()> {
    save_binary(e.height(), e.width(), e.data(), path.as_ref())
}
