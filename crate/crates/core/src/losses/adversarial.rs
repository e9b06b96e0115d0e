use stripepaint_tensor::Tensor;

use crate::error::{Error, Result};
use crate::model::Discriminator;

/// Floor of every `log` argument.
pub const LOG_FLOOR: f32 = 1e-7;

/// Target size of the largest input perturbation used by the gradient
/// penalty surrogate.
pub const GP_PROBE_STEP: f32 = 1e-2;

fn safe_log(p: &Tensor) -> Result<Tensor> {
    Ok(p.clamp(LOG_FLOOR, 1.0)?.log()?)
}

/// Hole mask on the discriminator's patch grid: area average over each
/// patch, then `≥ 0.5` counts as hole. Returns a constant `N×1×P×P` tensor.
pub fn patch_mask(mask: &Tensor, patch_side: usize) -> Result<Tensor> {
    let d = mask.dims();
    if d.len() != 4
        || d[1] != 1
        || patch_side == 0
        || !d[2].is_multiple_of(patch_side)
        || d[2] != d[3]
    {
        return Err(Error::Size(format!(
            "mask {d:?} does not tile a {patch_side}×{patch_side} patch grid"
        )));
    }
    let pooled = mask.detach().avg_pool(d[2] / patch_side)?;
    let data = pooled
        .data()
        .iter()
        .map(|&v| if v >= 0.5 { 1.0 } else { 0.0 })
        .collect();
    Ok(Tensor::from_vec(data, pooled.dims())?)
}

/// Discriminator objective
/// `−E[log D(gt)] − E[log D(out) ⊙ (1 − M)] − E[log(1 − D(out)) ⊙ M]`,
/// with `out` cut from the generator's graph. Expectations are means over
/// every patch of the batch.
pub fn discriminator_loss(
    d: &Discriminator,
    out: &Tensor,
    gt: &Tensor,
    mask: &Tensor,
) -> Result<Tensor> {
    let out = out.detach();
    let p_real = d.forward(gt)?;
    let p_fake = d.forward(&out)?;
    let m = patch_mask(mask, p_fake.dims()[2])?;
    let visible = m.neg()?.add_scalar(1.0)?;
    let real = safe_log(&p_real)?.mean()?;
    let fake_known = safe_log(&p_fake)?.mul(&visible)?.mean()?;
    let fake_hole = safe_log(&p_fake.neg()?.add_scalar(1.0)?)?.mul(&m)?.mean()?;
    Ok(real.add(&fake_known)?.add(&fake_hole)?.neg()?)
}

/// Generator objective `−E[log D(out)]`. The discriminator's parameters are
/// read as constants so only the generator receives gradient.
pub fn generator_adversarial_loss(d: &Discriminator, out: &Tensor) -> Result<Tensor> {
    Ok(safe_log(&d.forward_with(out, true)?)?.mean()?.neg()?)
}

/// Gradient of `S(x) = Σ D(x)` with respect to `x`, with the discriminator's
/// parameters held constant.
pub fn input_gradient(d: &Discriminator, x: &Tensor) -> Result<Tensor> {
    let leaf = x.detach().requires_grad_();
    d.forward_with(&leaf, true)?.sum()?.backward()?;
    let g = leaf.grad().unwrap_or_else(|| vec![0.0; leaf.numel()]);
    Ok(Tensor::from_vec(g, x.dims())?)
}

/// The penalty `E_n ‖∇_x D(gt_n)‖²` and a graph term whose parameter
/// gradient approximates the penalty's.
#[derive(Clone, Debug)]
pub struct GradientPenalty {
    pub value: f32,
    /// `(S(x + εg) − S(x − εg)) / (N·ε)` with `g` held constant. Its value is
    /// about `2·value`; its gradient with respect to the discriminator's
    /// parameters is a central difference of `∇_θ (g·∇_x S)`, which is the
    /// penalty's parameter gradient.
    pub surrogate: Tensor,
}

/// R1-style gradient penalty on real images.
///
/// The tensor engine has no second-order differentiation, so the parameter
/// gradient of `‖∇_x S‖²` is obtained from two extra forward passes along
/// the input gradient `g`: `∇_θ ‖g‖² = 2·∇_θ (g·∇_x S)`, and `g·∇_x S` is the
/// directional derivative of `S` along `g`. `ε` is chosen so that the
/// largest entry of `ε·g` is [`GP_PROBE_STEP`].
pub fn gradient_penalty(d: &Discriminator, gt: &Tensor) -> Result<GradientPenalty> {
    let g = input_gradient(d, gt)?;
    let n = gt.dims()[0];
    let per_sample = g.numel() / n;
    let value = g
        .data()
        .chunks(per_sample)
        .map(|c| c.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>())
        .sum::<f64>()
        / n as f64;
    let peak = g.data().iter().fold(0.0f32, |m, v| m.max(v.abs()));
    let surrogate = if peak > 0.0 {
        let eps = GP_PROBE_STEP / peak;
        let step = g.scale(eps)?;
        let base = gt.detach();
        let plus = d.forward(&base.add(&step)?)?.sum()?;
        let minus = d.forward(&base.sub(&step)?)?.sum()?;
        plus.sub(&minus)?.scale(1.0 / (n as f32 * eps))?
    } else {
        Tensor::scalar(0.0)
    };
    Ok(GradientPenalty {
        value: value as f32,
        surrogate,
    })
}

#[cfg(test)]
mod tests {
    use stripepaint_tensor::Rng;

    use super::*;
    use crate::model::ModelConfig;

    fn constant_disc() -> Discriminator {
        let d = Discriminator::new(&ModelConfig::tiny(), Rng::new(0)).unwrap();
        for (_, v) in d.vars.iter() {
            v.set(Tensor::zeros(&v.dims()).unwrap());
        }
        d
    }

    #[test]
    fn constant_discriminator_values() {
        let d = constant_disc();
        let x = Tensor::rand_uniform(&[2, 3, 16, 16], 0.0, 1.0, &mut Rng::new(1)).unwrap();
        let lg = generator_adversarial_loss(&d, &x).unwrap().item().unwrap();
        assert!((lg - std::f32::consts::LN_2).abs() < 1e-6);
        let gp = gradient_penalty(&d, &x).unwrap();
        assert_eq!(gp.value, 0.0);
        assert_eq!(gp.surrogate.item().unwrap(), 0.0);
        // even odds: every patch contributes log 2, hole or not
        let m = Tensor::full(&[2, 1, 16, 16], 1.0).unwrap();
        let ld = discriminator_loss(&d, &x, &x, &m).unwrap().item().unwrap();
        assert!((ld - 2.0 * std::f32::consts::LN_2).abs() < 1e-6);
    }

    #[test]
    fn patch_mask_thresholds_area_average() {
        // 4×4 mask on a 2×2 grid: cell fractions 1, 0.5, 0.25, 0
        let data = vec![
            1., 1., 1., 0., //
            1., 1., 1., 0., //
            1., 0., 0., 0., //
            0., 0., 0., 0.,
        ];
        let m = Tensor::from_vec(data, &[1, 1, 4, 4]).unwrap();
        assert_eq!(patch_mask(&m, 2).unwrap().data(), &[1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn all_hole_mask_treats_every_patch_as_fake() {
        let d = Discriminator::new(&ModelConfig::tiny(), Rng::new(2)).unwrap();
        let mut rng = Rng::new(3);
        let gt = Tensor::rand_uniform(&[1, 3, 16, 16], 0.0, 1.0, &mut rng).unwrap();
        let out = Tensor::rand_uniform(&[1, 3, 16, 16], 0.0, 1.0, &mut rng).unwrap();
        let m = Tensor::full(&[1, 1, 16, 16], 1.0).unwrap();
        let ld = discriminator_loss(&d, &out, &gt, &m)
            .unwrap()
            .item()
            .unwrap();
        let (pr, pf) = (d.forward(&gt).unwrap(), d.forward(&out).unwrap());
        let want = -(pr.data()[0].ln() + (1.0 - pf.data()[0]).ln());
        assert!((ld - want).abs() < 1e-5);
    }

    #[test]
    fn penalty_matches_explicit_squared_norm() {
        let d = Discriminator::new(&ModelConfig::tiny(), Rng::new(4)).unwrap();
        let x = Tensor::rand_uniform(&[2, 3, 16, 16], 0.0, 1.0, &mut Rng::new(5)).unwrap();
        let g = input_gradient(&d, &x).unwrap();
        let want: f32 = g.data().iter().map(|v| v * v).sum::<f32>() / 2.0;
        let gp = gradient_penalty(&d, &x).unwrap();
        assert!(
            (gp.value - want).abs() <= 1e-5 * want.max(1e-12),
            "{} vs {want}",
            gp.value
        );
        // surrogate ≈ 2·penalty
        let s = gp.surrogate.item().unwrap();
        assert!(
            (s - 2.0 * gp.value).abs() <= 0.05 * 2.0 * gp.value,
            "{s} vs {}",
            2.0 * gp.value
        );
    }
}
