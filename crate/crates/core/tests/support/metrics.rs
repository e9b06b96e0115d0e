//! Plain-loop PSNR and SSIM, and test images for them.

use stripepaint::image_ops::Image;
use stripepaint_tensor::Rng;

pub fn random_image(h: usize, w: usize, seed: u64) -> Image {
    let mut rng = Rng::new(seed);
    Image::new(h, w, (0..h * w * 3).map(|_| rng.uniform()).collect()).unwrap()
}

/// `b` = `a` plus uniform noise of amplitude `amp`, clamped.
pub fn noisy(a: &Image, amp: f32, seed: u64) -> Image {
    let mut rng = Rng::new(seed);
    let data = a
        .data()
        .iter()
        .map(|&v| (v + amp * (2.0 * rng.uniform() - 1.0)).clamp(0.0, 1.0))
        .collect();
    Image::new(a.height(), a.width(), data).unwrap()
}

pub fn naive_psnr(a: &Image, b: &Image) -> f64 {
    let mut se = 0.0;
    let mut n = 0.0;
    for y in 0..a.height() {
        for x in 0..a.width() {
            let (p, q) = (a.pixel(y, x), b.pixel(y, x));
            for c in 0..3 {
                se += (f64::from(p[c]) - f64::from(q[c])).powi(2);
                n += 1.0;
            }
        }
    }
    -10.0 * (se / n).log10()
}

/// Direct 2-D window sums: Gaussian weights over each fully contained 11×11
/// window of the luma planes, statistics from the weighted moments.
pub fn naive_ssim(a: &Image, b: &Image) -> f64 {
    let luma = |im: &Image, y: usize, x: usize| {
        let p = im.pixel(y, x);
        0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])
    };
    let mut wts = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (i, row) in wts.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
            total += *v;
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let (mut sum, mut count) = (0.0, 0.0);
    for y0 in 0..=a.height() - 11 {
        for x0 in 0..=a.width() - 11 {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (i, row) in wts.iter().enumerate() {
                for (j, &wt) in row.iter().enumerate() {
                    let w = wt / total;
                    let (p, q) = (luma(a, y0 + i, x0 + j), luma(b, y0 + i, x0 + j));
                    ma += w * p;
                    mb += w * q;
                    saa += w * p * p;
                    sbb += w * q * q;
                    sab += w * p * q;
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1.0;
        }
    }
    sum / count
}
