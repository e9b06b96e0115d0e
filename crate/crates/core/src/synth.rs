//! Procedural training images: a two-color linear gradient with a few
//! saturated rectangles and discs on top. Used when no image directory is
//! configured, and by tests.

use stripepaint_tensor::Rng;

use crate::error::Result;
use crate::image_ops::{hsv_pixel_to_rgb, Image};

fn random_color(rng: &mut Rng, s_lo: f32, v_lo: f32) -> [f32; 3] {
    let h = rng.uniform();
    let s = rng.uniform_range(s_lo, 1.0);
    let v = rng.uniform_range(v_lo, 1.0);
    hsv_pixel_to_rgb([h, s, v])
}

enum Shape {
    Rect { y0: f32, x0: f32, y1: f32, x1: f32 },
    Disc { cy: f32, cx: f32, r: f32 },
}

impl Shape {
    fn contains(&self, y: f32, x: f32) -> bool {
        match *self {
            Shape::Rect { y0, x0, y1, x1 } => y >= y0 && y < y1 && x >= x0 && x < x1,
            Shape::Disc { cy, cx, r } => (y - cy).powi(2) + (x - cx).powi(2) <= r * r,
        }
    }
}

/// One `size×size` image drawn from `rng`.
pub fn synth_image(size: usize, rng: &mut Rng) -> Result<Image> {
    let s = size as f32;
    let (c0, c1) = (random_color(rng, 0.2, 0.3), random_color(rng, 0.2, 0.3));
    let angle = rng.uniform() * std::f32::consts::TAU;
    let (dy, dx) = angle.sin_cos();
    let shapes: Vec<(Shape, [f32; 3])> = (0..rng.range_inclusive(2, 4))
        .map(|_| {
            let shape = if rng.uniform() < 0.5 {
                let (h, w) = (
                    rng.uniform_range(0.15, 0.45) * s,
                    rng.uniform_range(0.15, 0.45) * s,
                );
                let (y0, x0) = (rng.uniform() * (s - h), rng.uniform() * (s - w));
                Shape::Rect {
                    y0,
                    x0,
                    y1: y0 + h,
                    x1: x0 + w,
                }
            } else {
                Shape::Disc {
                    cy: rng.uniform() * s,
                    cx: rng.uniform() * s,
                    r: rng.uniform_range(0.1, 0.25) * s,
                }
            };
            (shape, random_color(rng, 0.5, 0.4))
        })
        .collect();
    Image::from_fn(size, size, |y, x| {
        let (fy, fx) = (y as f32 + 0.5, x as f32 + 0.5);
        for (shape, color) in shapes.iter().rev() {
            if shape.contains(fy, fx) {
                return *color;
            }
        }
        let t = (((fy / s - 0.5) * dy + (fx / s - 0.5) * dx) / std::f32::consts::SQRT_2 + 0.5)
            .clamp(0.0, 1.0);
        std::array::from_fn(|c| c0[c] * (1.0 - t) + c1[c] * t)
    })
}

/// `n` images from the `synth` substream of `seed`.
pub fn synth_corpus(n: usize, size: usize, seed: u64) -> Result<Vec<Image>> {
    let mut rng = Rng::substream(seed, "synth");
    (0..n).map(|_| synth_image(size, &mut rng)).collect()
}
