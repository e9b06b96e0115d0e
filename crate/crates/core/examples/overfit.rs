//! Trains on a single synthetic 64×64 image and reports how far the L1
//! reconstruction loss falls and the hole PSNR reached on that image.
//! Arguments are configuration lines applied over the desk defaults.
//!
//! ```text
//! cargo run --release --example overfit -- train.steps=500 train.lr_g=2e-4
//! ```

use std::time::Instant;

use stripepaint::train::{eval_masks, Corpus, RunConfig, Trainer};

fn main() -> stripepaint::Result<()> {
    let overrides: Vec<String> = std::env::args().skip(1).collect();
    let defaults = "train.batch_size = 1\ndata.synthetic_images = 1\ntrain.steps = 500\n";
    let cfg = RunConfig::parse_with_overrides(defaults, &overrides)?;
    let corpus = Corpus::synthetic(1, cfg.image_size(), cfg.seed)?;
    let steps = cfg.steps;
    let mut t = Trainer::new(cfg, corpus)?;
    let start = Instant::now();
    let mut first = None;
    let mut last = 0.0;
    for i in 1..=steps {
        let r = t.step()?;
        let l1 = r.get("l1").unwrap_or(f32::NAN);
        first.get_or_insert(l1);
        last = l1;
        if i == 1 || i % 50 == 0 {
            println!("step={i},{}", r.to_log_line());
        }
    }
    let first = first.unwrap_or(f32::NAN);
    let masks = eval_masks(6, t.config().image_size(), t.config().seed)?;
    let images = vec![t.corpus().images[0].clone(); masks.len()];
    let eval = t.evaluate(&images, &masks)?;
    println!(
        "l1 {first:.4} -> {last:.4} ({:.2}x), hole psnr {:.2} dB, {:?}",
        last / first,
        eval.psnr_holes,
        start.elapsed()
    );
    Ok(())
}
