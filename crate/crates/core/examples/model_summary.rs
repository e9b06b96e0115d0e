//! Prints parameter counts and times one forward/backward pass of the
//! generator at the desk-scale configuration.

use std::time::Instant;

use stripepaint::model::{count_parameters, prepare_input, Discriminator, Generator, ModelConfig};
use stripepaint_tensor::{Rng, Tensor};

fn main() -> stripepaint::Result<()> {
    let full = ModelConfig::default();
    let g = Generator::new(&full, Rng::new(0))?;
    let d = Discriminator::new(&full, Rng::new(0))?;
    println!("generator parameters:     {}", count_parameters(&g.vars));
    println!("discriminator parameters: {}", count_parameters(&d.vars));

    let cfg = ModelConfig::desk();
    let g = Generator::new(&cfg, Rng::new(1))?;
    let d = Discriminator::new(&cfg, Rng::new(2))?;
    let s = cfg.input_size;
    let mut rng = Rng::new(3);
    let img = Tensor::rand_uniform(&[1, 3, s, s], 0.0, 1.0, &mut rng)?;
    let mask = Tensor::zeros(&[1, 1, s, s])?;
    let input = prepare_input(&img, &mask)?;

    let t = Instant::now();
    let out = g.forward(&input)?;
    let fwd = t.elapsed();
    out.image.mean()?.backward()?;
    println!(
        "generator {s}x{s}: forward {fwd:?}, forward+backward {:?}",
        t.elapsed()
    );

    let t = Instant::now();
    d.forward(&img)?.mean()?.backward()?;
    println!("discriminator {s}x{s}: forward+backward {:?}", t.elapsed());
    Ok(())
}
