//! Central-difference checks (eps 2^-10, f32) for the operations built on top
//! of the tensor primitives: stripe layout, LePE, stripe and full attention,
//! whole transformer blocks, joint mixing, the HSV conversion and the losses.
//!
//! Ops that stay exact on a binary grid are checked element by element at
//! 1e-3. Attention, whole blocks and the feature-space losses run through
//! softmax, layer norm or convolutions with non-grid weights; their f32
//! output rounding (~3e-4 per difference quotient) swamps single small
//! entries, so they are checked along whole directions instead, at the same
//! 1e-3 but measured against `‖∇‖`.

use stripepaint::attention::{
    full_mhsa, lepe, stripe_merge, stripe_partition, stripes_to_tokens, sw_mhsa, tokens_to_stripes,
    Attention, BlockConfig, CswinBlock, Orientation, StripeSpec,
};
use stripepaint::losses::FeatureExtractor;
use stripepaint::losses::{edge_loss, gram, perceptual_loss, rgb_to_hsv_tensor, style_loss};
use stripepaint::model::joint_attention_mix;
use stripepaint::nn::Builder;
use stripepaint_tensor::{Rng, Tensor};

mod support;

use support::{colors, directional, elementwise, grid_randn as randn, lift};

const TOL: f32 = 1e-3;

fn check(
    name: &str,
    inputs: &[Tensor],
    f: impl Fn(&[Tensor]) -> stripepaint_tensor::Result<Tensor>,
) {
    let err = elementwise(inputs, f);
    assert!(err < TOL, "{name}: max rel error {err}");
}

fn check_directions(name: &str, x: &Tensor, f: impl Fn(&Tensor) -> stripepaint::Result<Tensor>) {
    let err = directional(x, f);
    assert!(
        err < f64::from(TOL),
        "{name}: error {err} relative to the gradient norm"
    );
}

#[test]
fn stripe_layouts() {
    for o in [Orientation::Horizontal, Orientation::Vertical] {
        let spec = StripeSpec::new(2, o, 4, 6).unwrap();
        let map = randn(&[2, 3, 4, 6], 1, 1.0);
        check("stripe_partition", &[map], |x| {
            lift(stripe_partition(&x[0], &spec))
        });
        let blocks = randn(&[2 * spec.stripes(), spec.tokens(), 3], 2, 1.0);
        check("stripe_merge", std::slice::from_ref(&blocks), |x| {
            lift(stripe_merge(&x[0], &spec))
        });
        let tokens = randn(&[2, 24, 3], 3, 1.0);
        check("tokens_to_stripes", &[tokens], |x| {
            lift(tokens_to_stripes(&x[0], &spec))
        });
        check("stripes_to_tokens", &[blocks], |x| {
            lift(stripes_to_tokens(&x[0], &spec))
        });
    }
}

#[test]
fn lepe_gradients() {
    for o in [Orientation::Horizontal, Orientation::Vertical] {
        let spec = StripeSpec::new(2, o, 4, 4).unwrap();
        let v = randn(&[3, spec.tokens(), 2], 4, 1.0);
        let w = randn(&[2, 1, 3, 3], 5, 0.5);
        let b = randn(&[2], 6, 0.5);
        check("lepe", &[v, w, b], |x| {
            lift(lepe(&x[0], &spec, &x[1], Some(&x[2])))
        });
    }
}

fn attention(channels: usize, seed: u64) -> Attention {
    let mut b = Builder::new(Rng::new(seed));
    Attention::new(&mut b, "attn", channels).unwrap()
}

#[test]
fn attention_gradients() {
    let attn = attention(8, 7);
    let cfg = BlockConfig::new(2, 2, 8, 1, false);
    let x = randn(&[1, 8, 4, 4], 8, 0.5);
    check_directions("sw_mhsa", &x, |x| Ok(sw_mhsa(x, &attn, &cfg)?.0));
    let full = BlockConfig::new(2, 4, 8, 1, true);
    check_directions("full_mhsa", &x, |x| Ok(full_mhsa(x, &attn, &full)?.0));
}

#[test]
fn block_gradients() {
    for (redesigned, dual_attention) in [(true, false), (false, false), (true, true)] {
        let cfg = BlockConfig {
            redesigned,
            dual_attention,
            mlp_ratio: 2,
            ..BlockConfig::new(2, 2, 8, 2, false)
        };
        let mut b = Builder::new(Rng::new(9));
        let block = CswinBlock::new(&mut b, "block", cfg).unwrap();
        let x = randn(&[1, 8, 4, 4], 10, 0.5);
        check_directions(
            &format!("block redesigned={redesigned} dual={dual_attention}"),
            &x,
            |x| Ok(block.forward(x)?.0),
        );
    }
}

#[test]
fn joint_mix_gradients() {
    let attn = attention(8, 11);
    let cfg = BlockConfig::new(2, 2, 8, 1, false);
    let (_, record) = sw_mhsa(&randn(&[1, 8, 4, 4], 12, 0.5), &attn, &cfg).unwrap();
    // Any weights will do for the gradient; a 1/64 grid keeps the products exact.
    let p = &record.mix_group().probs;
    let grid = p.data().iter().map(|v| (v * 64.0).round() / 64.0).collect();
    let probs = Tensor::from_vec(grid, p.dims()).unwrap();
    let local = randn(&[1, 4, 4, 4], 13, 1.0);
    check("joint_attention_mix", &[local, probs], |x| {
        let mut r = record.clone();
        r.groups[0].probs = x[1].clone();
        lift(joint_attention_mix(&r, &x[0]))
    });
}

#[test]
fn hsv_conversion_gradient() {
    let x = colors(&[1, 3, 3, 3], 14);
    check("rgb_to_hsv", &[x], |x| lift(rgb_to_hsv_tensor(&x[0])));
}

#[test]
fn loss_gradients() {
    let out = randn(&[1, 3, 8, 8], 15, 0.5);
    let gt = randn(&[1, 3, 8, 8], 16, 0.5);
    let edge = Tensor::from_vec(
        (0..64)
            .map(|i| if i % 5 == 0 { 10.0 } else { 1.0 })
            .collect(),
        &[1, 1, 8, 8],
    )
    .unwrap();
    check("edge_loss", std::slice::from_ref(&out), |x| {
        lift(edge_loss(&x[0], &gt, &edge))
    });
    check("gram", &[randn(&[2, 2, 4, 4], 17, 1.0)], |x| {
        lift(gram(&x[0]))
    });

    let fx = FeatureExtractor::new(3).unwrap();
    let mask = Tensor::from_vec(
        (0..64).map(|i| f32::from(u8::from(i % 3 == 0))).collect(),
        &[1, 1, 8, 8],
    )
    .unwrap();
    check_directions("perceptual_loss", &out, |x| {
        perceptual_loss(x, &gt, &mask, &fx)
    });
    check_directions("style_loss", &out, |x| style_loss(x, &gt, &fx));
}
