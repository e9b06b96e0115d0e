use stripepaint_tensor::{Rng, Tensor, VarMap};

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::nn::{Builder, Conv2d, ConvSpec};

/// Patch discriminator: four stride-2 4×4 convolutions with LeakyReLU(0.2)
/// and a 3×3 head, giving one real/fake probability per `16×16` patch.
#[derive(Clone, Debug)]
pub struct Discriminator {
    pub vars: VarMap,
    convs: Vec<Conv2d>,
    head: Conv2d,
    input_size: usize,
}

impl Discriminator {
    pub fn new(cfg: &ModelConfig, rng: Rng) -> Result<Self> {
        cfg.validate()?;
        let mut b = Builder::new(rng);
        let mut convs = Vec::new();
        let mut inputs = 3;
        for (i, &c) in cfg.disc_channels.iter().enumerate() {
            convs.push(Conv2d::new(
                &mut b,
                &format!("conv{i}"),
                ConvSpec::strided(inputs, c, 4, 2, 1),
            )?);
            inputs = c;
        }
        let head = Conv2d::new(&mut b, "head", ConvSpec::same(inputs, 1, 3))?;
        Ok(Discriminator {
            vars: b.finish(),
            convs,
            head,
            input_size: cfg.input_size,
        })
    }

    /// Patch logits, `N×1×P×P`. With `frozen`, gradients reach the input but
    /// not the discriminator's own parameters.
    pub fn logits_with(&self, x: &Tensor, frozen: bool) -> Result<Tensor> {
        let d = x.dims();
        let s = self.input_size;
        if d.len() != 4 || d[1] != 3 || d[2] != s || d[3] != s {
            return Err(Error::Size(format!(
                "discriminator expects N×3×{s}×{s}, got {d:?}"
            )));
        }
        let mut y = x.clone();
        for conv in &self.convs {
            y = conv.forward_with(&y, frozen)?.leaky_relu(0.2)?;
        }
        self.head.forward_with(&y, frozen)
    }

    /// Patch probabilities.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.forward_with(x, false)
    }

    pub fn forward_with(&self, x: &Tensor, frozen: bool) -> Result<Tensor> {
        Ok(self.logits_with(x, frozen)?.sigmoid()?)
    }
}
