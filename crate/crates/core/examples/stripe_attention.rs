//! Stripe-window attention cost per block of the default schedule, and the
//! check that a stripe as wide as the map is plain full attention.

use stripepaint::attention::{flop_count, full_mhsa, sw_mhsa, Attention, BlockConfig};
use stripepaint::model::ModelConfig;
use stripepaint::nn::Builder;
use stripepaint_tensor::{Rng, Tensor};

fn main() -> stripepaint::Result<()> {
    let cfg = ModelConfig::default();
    let side = cfg.feature_side();
    println!("feature map {side}x{side}");
    println!(
        "{:>6} {:>5} {:>8} {:>6} {:>14} {:>14}",
        "block", "sw", "channels", "heads", "score MACs", "apply MACs"
    );
    for (i, b) in cfg.block_configs().iter().enumerate() {
        let f = flop_count(b, side, side);
        println!(
            "{:>6} {:>5} {:>8} {:>6} {:>14} {:>14}{}",
            i + 1,
            b.sw,
            b.channels,
            b.heads,
            f.score,
            f.apply,
            if b.is_full_attention { "  (full)" } else { "" }
        );
    }

    let (heads, channels, side) = (4, 16, 8);
    let attn = Attention::new(&mut Builder::new(Rng::new(1)), "attn", channels)?;
    let x = Tensor::randn(&[1, channels, side, side], 1.0, &mut Rng::new(2))?;
    let (a, record) = sw_mhsa(
        &x,
        &attn,
        &BlockConfig::new(heads, side, channels, 1, false),
    )?;
    let (b, _) = full_mhsa(&x, &attn, &BlockConfig::new(heads, side, channels, 1, true))?;
    let diff = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f32::max);
    println!(
        "stripe width {side} on a {side}x{side} map: max difference from full attention {diff:e}, \
         attention rows sum to 1 within {:e}",
        record.max_row_error()
    );
    Ok(())
}
