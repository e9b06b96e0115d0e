//! PSNR, SSIM and hole-region hue error for increasingly noisy copies of a
//! synthetic image.

use stripepaint::image_ops::{Image, Mask};
use stripepaint::metrics::{hue_mae_in_holes, psnr, psnr_in_holes, ssim};
use stripepaint::synth::synth_image;
use stripepaint_tensor::Rng;

fn main() -> stripepaint::Result<()> {
    let mut rng = Rng::new(7);
    let img = synth_image(64, &mut rng)?;
    let hole = Mask::from_fn(64, 64, |y, x| {
        (16..40).contains(&y) && (20..52).contains(&x)
    })?;
    println!(
        "{:>6} {:>8} {:>7} {:>11} {:>8}",
        "noise", "psnr", "ssim", "hole psnr", "hue mae"
    );
    for amp in [0.0, 0.02, 0.05, 0.1, 0.2] {
        let data = img
            .data()
            .iter()
            .map(|&v| (v + amp * (2.0 * rng.uniform() - 1.0)).clamp(0.0, 1.0))
            .collect();
        let noisy = Image::new(64, 64, data)?;
        println!(
            "{amp:>6} {:>8.3} {:>7.4} {:>11.3} {:>8.5}",
            psnr(&noisy, &img)?,
            ssim(&noisy, &img)?,
            psnr_in_holes(&noisy, &img, &hole)?,
            hue_mae_in_holes(&noisy, &img, &hole)?
        );
    }
    Ok(())
}
