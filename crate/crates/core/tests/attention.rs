//! Stripe attention against full attention, and the cost model against the
//! attention maps actually computed.

use proptest::prelude::*;
use stripepaint::attention::{
    flop_count, full_mhsa, sw_mhsa, Attention, AttnRecord, BlockConfig, FlopCount,
};
use stripepaint::model::ModelConfig;
use stripepaint::nn::Builder;
use stripepaint_tensor::{Rng, Tensor};

fn attention(channels: usize, seed: u64) -> Attention {
    let mut b = Builder::new(Rng::new(seed));
    Attention::new(&mut b, "attn", channels).unwrap()
}

#[test]
fn stripe_as_wide_as_the_map_is_full_attention() {
    let mut rng = Rng::new(7);
    let mut worst = 0.0f32;
    for case in 0..20u64 {
        let side = [4, 6, 8][rng.below(3)];
        let heads = [2, 4][rng.below(2)];
        let channels = heads * [2, 4][rng.below(2)];
        let batch = 1 + rng.below(2);
        let attn = attention(channels, 100 + case);
        let x = Tensor::randn(&[batch, channels, side, side], 1.0, &mut rng).unwrap();
        let stripe = BlockConfig::new(heads, side, channels, 1, false);
        let full = BlockConfig::new(heads, side, channels, 1, true);
        let (a, _) = sw_mhsa(&x, &attn, &stripe).unwrap();
        let (b, _) = full_mhsa(&x, &attn, &full).unwrap();
        assert_eq!(a.dims(), b.dims());
        let diff = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f32::max);
        assert!(diff <= 1e-5, "case {case}: max difference {diff}");
        worst = worst.max(diff);
    }
    assert!(worst <= 1e-5);
}

/// Multiply-adds implied by the attention maps of a record: every row of
/// every map takes a dot product per key for the scores, and as many for
/// applying the weights, each over the head width.
fn counted(record: &AttnRecord, channels: usize) -> FlopCount {
    let mut score = 0u64;
    for g in &record.groups {
        let d = g.probs.dims();
        let head_width = channels
            / if record.groups.len() == 1 {
                g.heads
            } else {
                2 * g.heads
            };
        score += (d[0] * d[1] * d[2] * d[3] * head_width) as u64;
    }
    FlopCount {
        score,
        apply: score,
    }
}

#[test]
fn cost_model_matches_computed_maps() {
    let (channels, side) = (16, 32);
    let attn = attention(channels, 1);
    let x = Tensor::randn(&[1, channels, side, side], 1.0, &mut Rng::new(2)).unwrap();
    for sw in [4, 8, 16] {
        let cfg = BlockConfig::new(4, sw, channels, 1, false);
        let (_, record) = sw_mhsa(&x, &attn, &cfg).unwrap();
        assert_eq!(
            flop_count(&cfg, side, side),
            counted(&record, channels),
            "sw {sw}"
        );
    }
    let cfg = BlockConfig::new(4, side, channels, 1, true);
    let (_, record) = full_mhsa(&x, &attn, &cfg).unwrap();
    assert_eq!(flop_count(&cfg, side, side), counted(&record, channels));
}

#[test]
fn narrowest_stripes_cost_an_eighth() {
    let cfg = ModelConfig::default();
    let side = cfg.feature_side();
    assert_eq!(side, 32);
    let schedule = cfg.block_configs();
    let sws: Vec<usize> = schedule.iter().map(|b| b.sw).collect();
    assert_eq!(sws, vec![4, 8, 16, 32]);
    let full = flop_count(&schedule[3], side, side);
    let narrow = flop_count(&schedule[0], side, side);
    assert!(schedule[3].is_full_attention);
    assert_eq!(narrow.score * 8, full.score);
    // Each token sees 4 rows of 32 (or 4 columns of 32), against all 1024.
    assert_eq!(narrow.score, 1024 * 128 * schedule[0].channels as u64);
    assert_eq!(full.score, 1024 * 1024 * schedule[3].channels as u64);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn attention_rows_sum_to_one(seed in 0u64..10_000, scale in 0.1f32..20.0) {
        let attn = attention(8, seed);
        let x = Tensor::randn(&[1, 8, 8, 8], scale, &mut Rng::new(seed + 1)).unwrap();
        let (_, record) = sw_mhsa(&x, &attn, &BlockConfig::new(2, 2, 8, 1, false)).unwrap();
        prop_assert!(record.max_row_error() <= 1e-6);
    }
}
