//! Rough single-thread throughput of the convolution and matmul kernels.
use std::time::Instant;
use stripepaint_tensor::{Rng, Tensor};

fn main() -> stripepaint_tensor::Result<()> {
    let mut rng = Rng::new(0);
    for &(c, o, side) in &[(128usize, 128usize, 8usize), (256, 128, 16), (64, 32, 32)] {
        let x = Tensor::randn(&[4, c, side, side], 1.0, &mut rng)?.requires_grad_();
        let w = Tensor::randn(&[o, c, 3, 3], 0.05, &mut rng)?.requires_grad_();
        let macs = 4 * o * c * 9 * side * side;
        let start = Instant::now();
        let reps = 5;
        for _ in 0..reps {
            let y = x.conv2d(&w, None, 1, 1, 1)?;
            y.sum()?.backward()?;
        }
        let secs = start.elapsed().as_secs_f64() / reps as f64;
        println!(
            "conv {c}->{o} @{side}x{side} batch 4: {:.1} ms fwd+bwd, {:.1} GMAC/s",
            secs * 1e3,
            3.0 * macs as f64 / secs / 1e9
        );
    }
    let a = Tensor::randn(&[512, 512], 1.0, &mut rng)?;
    let start = Instant::now();
    for _ in 0..10 {
        a.matmul(&a)?;
    }
    let secs = start.elapsed().as_secs_f64() / 10.0;
    println!("matmul 512^3: {:.1} GMAC/s", 512f64.powi(3) / secs / 1e9);
    Ok(())
}
