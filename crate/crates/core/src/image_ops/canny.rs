use std::collections::VecDeque;

use super::{EdgeMap, Image};
use crate::error::{Error, Result};

/// Canny thresholds apply to the gradient magnitude after normalising it by
/// its maximum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CannyParams {
    pub sigma: f32,
    pub low: f32,
    pub high: f32,
}

impl Default for CannyParams {
    fn default() -> Self {
        CannyParams {
            sigma: 1.4,
            low: 0.1,
            high: 0.2,
        }
    }
}

impl CannyParams {
    pub fn detect(&self, img: &Image) -> Result<EdgeMap> {
        canny(img, self.sigma, self.low, self.high)
    }
}

/// Classic Canny: luma, Gaussian blur, Sobel, non-maximum suppression,
/// double threshold and hysteresis over 8-connected components.
/// The one-pixel border never holds edges.
pub fn canny(img: &Image, sigma: f32, low: f32, high: f32) -> Result<EdgeMap> {
    if !(0.0..=1.0).contains(&low) || !(0.0..=1.0).contains(&high) || low >= high {
        return Err(Error::Param(format!(
            "canny thresholds need 0 <= low < high <= 1, got {low}, {high}"
        )));
    }
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::Param(format!(
            "canny sigma must be finite and >= 0, got {sigma}"
        )));
    }
    let (h, w) = (img.height(), img.width());
    let gray: Vec<f64> = img.luma().into_iter().map(f64::from).collect();
    let smooth = gaussian_blur(&gray, h, w, f64::from(sigma));

    let at = |y: isize, x: isize| -> f64 {
        let y = y.clamp(0, h as isize - 1) as usize;
        let x = x.clamp(0, w as isize - 1) as usize;
        smooth[y * w + x]
    };
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    let mut mag = vec![0.0; h * w];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let sx = (at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1))
                - (at(y - 1, x - 1) + 2.0 * at(y, x - 1) + at(y + 1, x - 1));
            let sy = (at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1))
                - (at(y - 1, x - 1) + 2.0 * at(y - 1, x) + at(y - 1, x + 1));
            let i = y as usize * w + x as usize;
            gx[i] = sx;
            gy[i] = sy;
            mag[i] = sx.hypot(sy);
        }
    }
    let max = mag.iter().copied().fold(0.0, f64::max);
    if max <= 1e-12 || h < 3 || w < 3 {
        return EdgeMap::new(h, w, vec![0; h * w]);
    }
    mag.iter_mut().for_each(|m| *m /= max);

    // Non-maximum suppression along the quantised gradient direction.
    let tan22 = std::f64::consts::FRAC_PI_8.tan();
    let mut thin = vec![0.0; h * w];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            let m = mag[i];
            if m == 0.0 {
                continue;
            }
            let (dx, dy) = (gx[i], gy[i]);
            let (ox, oy): (isize, isize) = if dy.abs() <= tan22 * dx.abs() {
                (1, 0)
            } else if dx.abs() <= tan22 * dy.abs() {
                (0, 1)
            } else if dx * dy > 0.0 {
                (1, 1)
            } else {
                (1, -1)
            };
            let a = mag[(y as isize + oy) as usize * w + (x as isize + ox) as usize];
            let b = mag[(y as isize - oy) as usize * w + (x as isize - ox) as usize];
            // Strict on one side: of two equal neighbours across a step only
            // the one further along the gradient direction survives.
            if m > a && m >= b {
                thin[i] = m;
            }
        }
    }

    let (low, high) = (f64::from(low), f64::from(high));
    let mut edges = vec![0u8; h * w];
    let mut queue: VecDeque<usize> = thin
        .iter()
        .enumerate()
        .filter(|(_, &m)| m >= high)
        .map(|(i, _)| i)
        .collect();
    for &i in &queue {
        edges[i] = 1;
    }
    while let Some(i) = queue.pop_front() {
        let (y, x) = ((i / w) as isize, (i % w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (ny, nx) = (y + dy, x + dx);
                if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if edges[j] == 0 && thin[j] >= low && thin[j] > 0.0 {
                    edges[j] = 1;
                    queue.push_back(j);
                }
            }
        }
    }
    EdgeMap::new(h, w, edges)
}

/// Separable Gaussian with radius `ceil(3σ)` and replicated borders.
fn gaussian_blur(src: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return src.to_vec();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / norm).collect();

    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = (-radius..=radius)
                .map(|k| {
                    let xx = (x as isize + k).clamp(0, w as isize - 1) as usize;
                    kernel[(k + radius) as usize] * src[y * w + xx]
                })
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = (-radius..=radius)
                .map(|k| {
                    let yy = (y as isize + k).clamp(0, h as isize - 1) as usize;
                    kernel[(k + radius) as usize] * tmp[yy * w + x]
                })
                .sum();
        }
    }
    out
}
