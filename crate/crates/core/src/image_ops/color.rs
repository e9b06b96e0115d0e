//! Hexcone RGB/HSV conversion. Arithmetic is carried out in f64 and rounded
//! once, so round trips stay within a few ulps of f32.

use super::{HsvImage, Image};

/// Converts one RGB triple to `[h, s, v]` with `h` in `[0, 1)`.
/// Hue is 0 when saturation is 0 (grays, black).
pub fn rgb_pixel_to_hsv(rgb: [f32; 3]) -> [f32; 3] {
    let [r, g, b] = rgb.map(f64::from);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let chroma = max - min;
    let s = if max > 0.0 { chroma / max } else { 0.0 };
    let h = if chroma == 0.0 {
        0.0
    } else if max == r {
        let sector = (g - b) / chroma;
        if sector < 0.0 {
            sector + 6.0
        } else {
            sector
        }
    } else if max == g {
        (b - r) / chroma + 2.0
    } else {
        (r - g) / chroma + 4.0
    };
    let mut h = (h / 6.0) as f32;
    if h >= 1.0 {
        h = 0.0;
    }
    [h, s as f32, max as f32]
}

pub fn hsv_pixel_to_rgb(hsv: [f32; 3]) -> [f32; 3] {
    let [h, s, v] = hsv.map(f64::from);
    let h6 = (h * 6.0).rem_euclid(6.0);
    let sector = h6.floor();
    let f = h6 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    let (r, g, b) = match sector as u8 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [r as f32, g as f32, b as f32]
}

pub fn rgb_to_hsv(img: &Image) -> HsvImage {
    let data = img
        .data()
        .chunks_exact(3)
        .flat_map(|p| rgb_pixel_to_hsv([p[0], p[1], p[2]]))
        .collect();
    HsvImage::new(img.height(), img.width(), data).expect("hexcone output is in range")
}

pub fn hsv_to_rgb(hsv: &HsvImage) -> Image {
    let data = hsv
        .data()
        .chunks_exact(3)
        .flat_map(|p| hsv_pixel_to_rgb([p[0], p[1], p[2]]).map(|c| c.clamp(0.0, 1.0)))
        .collect();
    Image::new(hsv.height(), hsv.width(), data).expect("clamped output is in range")
}
