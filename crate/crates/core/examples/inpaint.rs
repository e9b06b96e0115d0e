//! Trains the tiny model for a few steps, then fills a hole in a synthetic
//! image and writes the input, mask and composite.
//!
//! ```text
//! cargo run --release --example inpaint -- [out_dir] [steps]
//! ```

use std::path::PathBuf;

use stripepaint::image_ops::{gen_irregular_mask, save_image, save_mask, Bucket};
use stripepaint::synth::synth_image;
use stripepaint::train::{cmd_inpaint, cmd_train, RunConfig};
use stripepaint_tensor::Rng;

fn main() -> stripepaint::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().map_or_else(
        || std::env::temp_dir().join("stripepaint-inpaint"),
        PathBuf::from,
    );
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(50);
    let cfg = RunConfig::parse(&format!(
        "model.preset = tiny\ndata.synthetic_images = 8\ntrain.steps = {steps}\noutput.dir = {}\n",
        dir.join("run").display()
    ))?;
    let ckpt = cmd_train(&cfg)?;

    let size = cfg.image_size();
    let img = synth_image(size, &mut Rng::new(99))?;
    let mask = gen_irregular_mask(size, size, Bucket::new(0.2, 0.3)?, 5)?;
    let (img_path, mask_path) = (dir.join("input.png"), dir.join("mask.png"));
    save_image(&img, &img_path)?;
    save_mask(&mask, &mask_path)?;
    let out = dir.join("inpainted.png");
    let psnr = cmd_inpaint(&ckpt, &img_path, &mask_path, &out, Some(&img_path))?;
    println!(
        "{steps} steps; {:.1}% of pixels filled; composite PSNR {:.2} dB; wrote {}",
        100.0 * mask.hole_fraction(),
        psnr.unwrap_or(f64::NAN),
        out.display()
    );
    Ok(())
}
