//! Image quality metrics.

mod report;

pub use report::{evaluate_pairs, BandSummary, EvalOptions, MetricReport, PairMetrics};

use crate::error::{Error, Result};
use crate::image_ops::{rgb_pixel_to_hsv, Image, Mask};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_pair(a: &Image, b: &Image) -> Result<()> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::Size(format!(
            "{}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    Ok(())
}

fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

/// `10·log10(1 / MSE)` over all pixels and channels, peak 1. Identical
/// images give `+∞`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    check_pair(a, b)?;
    let se: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
        .sum();
    Ok(psnr_from_mse(se / a.data().len() as f64))
}

/// PSNR restricted to hole pixels (all three channels). Errors when the mask
/// has no holes.
pub fn psnr_in_holes(a: &Image, b: &Image, m: &Mask) -> Result<f64> {
    check_pair(a, b)?;
    if m.height() != a.height() || m.width() != a.width() {
        return Err(Error::Size("mask does not match the images".into()));
    }
    let holes = m.hole_count();
    if holes == 0 {
        return Err(Error::Param("mask has no hole pixels".into()));
    }
    let mut se = 0.0f64;
    for (i, &h) in m.data().iter().enumerate() {
        if h == 1 {
            for c in 0..3 {
                se += (f64::from(a.data()[i * 3 + c]) - f64::from(b.data()[i * 3 + c])).powi(2);
            }
        }
    }
    Ok(psnr_from_mse(se / (3 * holes) as f64))
}

/// Mean circular hue distance (in turns, at most 0.5) over hole pixels.
pub fn hue_mae_in_holes(a: &Image, b: &Image, m: &Mask) -> Result<f64> {
    check_pair(a, b)?;
    if m.height() != a.height() || m.width() != a.width() {
        return Err(Error::Size("mask does not match the images".into()));
    }
    let holes = m.hole_count();
    if holes == 0 {
        return Err(Error::Param("mask has no hole pixels".into()));
    }
    let mut total = 0.0f64;
    for y in 0..a.height() {
        for x in 0..a.width() {
            if m.is_hole(y, x) {
                let ha = f64::from(rgb_pixel_to_hsv(a.pixel(y, x))[0]);
                let hb = f64::from(rgb_pixel_to_hsv(b.pixel(y, x))[0]);
                let d = (ha - hb).abs();
                total += d.min(1.0 - d);
            }
        }
    }
    Ok(total / holes as f64)
}

/// Normalised 1-D Gaussian taps.
fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let t = i as f64 - r;
        *v = (-t * t / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Valid-mode separable Gaussian filter of an `h×w` plane.
fn filter_valid(x: &[f64], h: usize, w: usize) -> Vec<f64> {
    let k = gaussian_taps();
    let (ho, wo) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; h * wo];
    for y in 0..h {
        for xo in 0..wo {
            rows[y * wo + xo] = (0..SSIM_WINDOW).map(|i| k[i] * x[y * w + xo + i]).sum();
        }
    }
    let mut out = vec![0.0; ho * wo];
    for yo in 0..ho {
        for xo in 0..wo {
            out[yo * wo + xo] = (0..SSIM_WINDOW)
                .map(|i| k[i] * rows[(yo + i) * wo + xo])
                .sum();
        }
    }
    out
}

/// Single-scale SSIM on Rec. 601 luma with an 11×11 Gaussian window
/// (σ = 1.5), `K1 = 0.01`, `K2 = 0.03`, dynamic range 1, averaged over every
/// window position that lies fully inside the image.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_pair(a, b)?;
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Param(format!(
            "ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    let la: Vec<f64> = a.luma().into_iter().map(f64::from).collect();
    let lb: Vec<f64> = b.luma().into_iter().map(f64::from).collect();
    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
    let mu_a = filter_valid(&la, h, w);
    let mu_b = filter_valid(&lb, h, w);
    let e_aa = filter_valid(&prod(&la, &la), h, w);
    let e_bb = filter_valid(&prod(&lb, &lb), h, w);
    let e_ab = filter_valid(&prod(&la, &lb), h, w);
    let (c1, c2) = (SSIM_K1 * SSIM_K1, SSIM_K2 * SSIM_K2);
    let n = mu_a.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use stripepaint_tensor::Rng;

    use super::*;

    fn random_image(h: usize, w: usize, seed: u64) -> Image {
        let mut rng = Rng::new(seed);
        Image::new(h, w, (0..h * w * 3).map(|_| rng.uniform()).collect()).unwrap()
    }

    #[test]
    fn psnr_analytic_values() {
        let a = Image::filled(8, 8, [0.5; 3]).unwrap();
        let b = Image::filled(8, 8, [0.6; 3]).unwrap();
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-4);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let zeros = Image::filled(4, 4, [0.0; 3]).unwrap();
        let ones = Image::filled(4, 4, [1.0; 3]).unwrap();
        assert_eq!(psnr(&zeros, &ones).unwrap(), 0.0);
    }

    #[test]
    fn ssim_identity_and_constants() {
        let a = random_image(16, 16, 0);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        let half = Image::filled(12, 12, [0.5; 3]).unwrap();
        let inverted = Image::from_fn(12, 12, |y, x| half.pixel(y, x).map(|v| 1.0 - v)).unwrap();
        assert!((ssim(&half, &inverted).unwrap() - 1.0).abs() < 1e-12);
        assert!(ssim(&random_image(10, 16, 1), &random_image(10, 16, 2)).is_err());
    }

    #[test]
    fn symmetric_and_flip_invariant() {
        let (a, b) = (random_image(14, 15, 3), random_image(14, 15, 4));
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        let s = ssim(&a, &b).unwrap();
        assert!((s - ssim(&b, &a).unwrap()).abs() < 1e-12);
        let flipped = ssim(&a.flip_horizontal(), &b.flip_horizontal()).unwrap();
        assert!((s - flipped).abs() < 1e-9);
    }

    #[test]
    fn hole_metrics() {
        let a = Image::filled(4, 4, [1.0, 0.0, 0.0]).unwrap();
        // hue 0.95 is 0.05 turns from red around the circle
        let b = Image::from_fn(4, 4, |y, _| {
            if y < 2 {
                [1.0, 0.0, 0.3]
            } else {
                [1.0, 0.0, 0.0]
            }
        })
        .unwrap();
        let m = Mask::from_fn(4, 4, |y, _| y < 2).unwrap();
        let mae = hue_mae_in_holes(&a, &b, &m).unwrap();
        assert!((mae - 0.05).abs() < 1e-6, "{mae}");
        let p = psnr_in_holes(&a, &b, &m).unwrap();
        assert!((p - 10.0 * (1.0f64 / (0.09 / 3.0)).log10()).abs() < 1e-4);
        assert!(psnr_in_holes(&a, &b, &Mask::zeros(4, 4).unwrap()).is_err());
    }
}
