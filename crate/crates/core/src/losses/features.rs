use stripepaint_tensor::{Rng, Tensor};

use crate::error::{Error, Result};

/// Output channels of the three stages; each stage halves the resolution.
pub const FEATURE_CHANNELS: [usize; 3] = [16, 32, 64];

/// Fixed feature basis for the perceptual and style losses: three 3×3
/// stride-2 convolutions with ReLU and seeded He-normal weights. The weights
/// are plain constants, never trained.
#[derive(Clone, Debug)]
pub struct FeatureExtractor {
    weights: Vec<Tensor>,
}

impl FeatureExtractor {
    pub fn new(seed: u64) -> Result<Self> {
        let mut rng = Rng::substream(seed, "features");
        let mut inputs = 3;
        let mut weights = Vec::new();
        for &c in &FEATURE_CHANNELS {
            let std = (2.0 / (inputs * 9) as f32).sqrt();
            weights.push(Tensor::randn(&[c, inputs, 3, 3], std, &mut rng)?);
            inputs = c;
        }
        Ok(FeatureExtractor { weights })
    }

    pub fn weights(&self) -> &[Tensor] {
        &self.weights
    }

    /// Downsampling factor of stage `i` relative to the input.
    pub fn stride(stage: usize) -> usize {
        2 << stage
    }

    /// One feature map per stage. The input side must be divisible by 8.
    pub fn features(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let d = x.dims();
        if d.len() != 4 || d[1] != 3 || !d[2].is_multiple_of(8) || !d[3].is_multiple_of(8) {
            return Err(Error::Size(format!(
                "feature extractor needs N×3×H×W with H, W divisible by 8, got {d:?}"
            )));
        }
        let mut feats = Vec::with_capacity(self.weights.len());
        let mut y = x.clone();
        for w in &self.weights {
            y = y.conv2d(w, None, 2, 1, 1)?.relu()?;
            feats.push(y.clone());
        }
        Ok(feats)
    }
}

/// Sum over stages of `mean(|φ(out) − φ(gt)| ⊙ v)`, where `v` is the visible
/// fraction `1 − M` area-averaged down to the stage resolution.
pub fn perceptual_loss(
    out: &Tensor,
    gt: &Tensor,
    mask: &Tensor,
    fx: &FeatureExtractor,
) -> Result<Tensor> {
    super::same_shape("perceptual_loss", out, gt)?;
    let visible = mask.neg()?.add_scalar(1.0)?;
    let (fo, fg) = (fx.features(out)?, fx.features(gt)?);
    let mut total = Tensor::scalar(0.0);
    for (s, (a, b)) in fo.iter().zip(&fg).enumerate() {
        let v = visible.avg_pool(FeatureExtractor::stride(s))?;
        total = total.add(&a.sub(b)?.abs()?.mul(&v)?.mean()?)?;
    }
    Ok(total)
}

/// Per-sample Gram matrices `F·Fᵀ / (C·H·W)` of an `N×C×H×W` map, `N×C×C`.
pub fn gram(f: &Tensor) -> Result<Tensor> {
    let d = f.dims();
    if d.len() != 4 {
        return Err(Error::Size(format!("gram needs N×C×H×W, got {d:?}")));
    }
    let flat = f.reshape(&[d[0], d[1], d[2] * d[3]])?;
    Ok(flat
        .matmul(&flat.transpose_last()?)?
        .scale(1.0 / (d[1] * d[2] * d[3]) as f32)?)
}

/// Sum over stages of the mean absolute difference of Gram matrices.
pub fn style_loss(out: &Tensor, gt: &Tensor, fx: &FeatureExtractor) -> Result<Tensor> {
    super::same_shape("style_loss", out, gt)?;
    let (fo, fg) = (fx.features(out)?, fx.features(gt)?);
    let mut total = Tensor::scalar(0.0);
    for (a, b) in fo.iter().zip(&fg) {
        total = total.add(&gram(a)?.sub(&gram(b)?)?.abs()?.mean()?)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_weights() {
        let (a, b) = (
            FeatureExtractor::new(3).unwrap(),
            FeatureExtractor::new(3).unwrap(),
        );
        for (x, y) in a.weights().iter().zip(b.weights()) {
            assert_eq!(x.data(), y.data());
            assert!(!x.requires_grad());
        }
        let c = FeatureExtractor::new(4).unwrap();
        assert_ne!(a.weights()[0].data(), c.weights()[0].data());
    }

    #[test]
    fn stage_shapes() {
        let fx = FeatureExtractor::new(0).unwrap();
        let x = Tensor::zeros(&[2, 3, 16, 16]).unwrap();
        let dims: Vec<_> = fx
            .features(&x)
            .unwrap()
            .iter()
            .map(|f| f.dims().to_vec())
            .collect();
        assert_eq!(
            dims,
            [vec![2, 16, 8, 8], vec![2, 32, 4, 4], vec![2, 64, 2, 2]]
        );
    }

    #[test]
    fn constant_single_channel_gram() {
        let f = Tensor::full(&[1, 1, 3, 5], 0.7).unwrap();
        assert!((gram(&f).unwrap().item().unwrap() - 0.49).abs() < 1e-6);
    }

    #[test]
    fn zero_on_identical_and_fully_masked() {
        let fx = FeatureExtractor::new(1).unwrap();
        let mut rng = Rng::new(2);
        let a = Tensor::rand_uniform(&[1, 3, 16, 16], 0.0, 1.0, &mut rng).unwrap();
        let b = Tensor::rand_uniform(&[1, 3, 16, 16], 0.0, 1.0, &mut rng).unwrap();
        let none = Tensor::zeros(&[1, 1, 16, 16]).unwrap();
        let all = Tensor::full(&[1, 1, 16, 16], 1.0).unwrap();
        assert_eq!(
            perceptual_loss(&a, &a, &none, &fx).unwrap().item().unwrap(),
            0.0
        );
        assert_eq!(style_loss(&a, &a, &fx).unwrap().item().unwrap(), 0.0);
        assert_eq!(
            perceptual_loss(&a, &b, &all, &fx).unwrap().item().unwrap(),
            0.0
        );
        assert!(perceptual_loss(&a, &b, &none, &fx).unwrap().item().unwrap() > 0.0);
        assert!(style_loss(&a, &b, &fx).unwrap().item().unwrap() > 0.0);
    }
}
