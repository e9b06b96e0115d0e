//! Compares hole-region hue error after a short training run with and
//! without the HSV loss, over several seeds, on a synthetic desk corpus.
//!
//! ```text
//! cargo run --release --example early_color -- [seeds] [key=value ...]
//! ```
//! Configuration overrides apply to both arms; `train.steps` defaults to 50.

use stripepaint::train::{eval_masks, AblationFlags, Corpus, RunConfig, Trainer};

fn hue_error(cfg: &RunConfig, corpus: &Corpus) -> stripepaint::Result<f64> {
    let mut t = Trainer::new(cfg.clone(), corpus.clone())?;
    for _ in 0..cfg.steps {
        t.step()?;
    }
    let masks = eval_masks(corpus.len(), cfg.image_size(), cfg.seed)?;
    Ok(t.evaluate(&corpus.images, &masks)?.hue_mae)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn main() -> stripepaint::Result<()> {
    let (counts, overrides): (Vec<String>, Vec<String>) =
        std::env::args().skip(1).partition(|a| !a.contains('='));
    let seeds: u64 = counts.first().and_then(|s| s.parse().ok()).unwrap_or(3);
    let base = RunConfig::parse_with_overrides("train.steps = 50\n", &overrides)?;

    let (mut with, mut without) = (Vec::new(), Vec::new());
    for seed in 0..seeds {
        let cfg = RunConfig {
            seed,
            ..base.clone()
        };
        let corpus = Corpus::synthetic(cfg.synthetic_images, cfg.image_size(), seed)?;
        let off = cfg.with_flags(AblationFlags {
            use_hsv_loss: false,
            ..cfg.flags
        });
        let a = hue_error(&cfg, &corpus)?;
        let b = hue_error(&off, &corpus)?;
        println!("seed {seed}: hue MAE with HSV loss {a:.5}, without {b:.5}");
        with.push(a);
        without.push(b);
    }
    println!(
        "median: with {:.5}, without {:.5}",
        median(with),
        median(without)
    );
    Ok(())
}
