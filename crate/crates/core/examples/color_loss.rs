//! RGB/HSV conversion and the HSV color loss: a brightness change leaves the
//! loss at zero unless the value channel is switched on, while a hue shift
//! does not.

use stripepaint::image_ops::{hsv_pixel_to_rgb, rgb_pixel_to_hsv};
use stripepaint::losses::{hsv_losses, HueDistance};
use stripepaint_tensor::{Rng, Tensor};

fn main() -> stripepaint::Result<()> {
    for rgb in [[1.0, 0.0, 0.0], [0.2, 0.6, 0.4], [0.5, 0.5, 0.5]] {
        let hsv = rgb_pixel_to_hsv(rgb);
        println!(
            "rgb {rgb:?} -> hsv [{:.4}, {:.4}, {:.4}] -> rgb {:?}",
            hsv[0],
            hsv[1],
            hsv[2],
            hsv_pixel_to_rgb(hsv)
        );
    }

    let img = Tensor::rand_uniform(&[1, 3, 16, 16], 0.0, 1.0, &mut Rng::new(1))?;
    let darker = img.scale(0.5)?;
    let shifted = {
        let data = img
            .data()
            .chunks(256)
            .cycle()
            .skip(1)
            .take(3)
            .flatten()
            .copied()
            .collect();
        Tensor::from_vec(data, &[1, 3, 16, 16])?
    };
    let edge = Tensor::full(&[1, 1, 16, 16], 1.0)?;
    for (what, other) in [("half brightness", &darker), ("rotated channels", &shifted)] {
        for include_v in [false, true] {
            let l = hsv_losses(
                &img,
                other,
                &edge,
                10.0,
                100.0,
                include_v,
                HueDistance::Plain,
            )?;
            println!(
                "{what:<17} value channel {:<5}: L_HSV {:.5}, total {:.4}",
                include_v,
                l.hsv.item()?,
                l.total.item()?
            );
        }
    }
    Ok(())
}
