use stripepaint_tensor::Tensor;

use crate::error::Result;
use crate::nn::{child, Builder, Conv2d, ConvSpec};

pub const RDB_LAYERS: usize = 4;

/// Residual dense block: four 3×3 Conv-ReLU layers, each fed the
/// concatenation of the block input and all earlier layer outputs, then a
/// 1×1 fusion back to the input width and a residual scaled by `β`.
#[derive(Clone, Debug)]
pub struct Rdb {
    pub layers: Vec<Conv2d>,
    pub fusion: Conv2d,
    scale: f32,
}

/// Activations of one RDB evaluation.
#[derive(Clone, Debug)]
pub struct RdbTrace {
    /// The (concatenated) input of each Conv-ReLU layer.
    pub layer_inputs: Vec<Tensor>,
    pub output: Tensor,
}

impl Rdb {
    pub fn new(
        b: &mut Builder,
        prefix: &str,
        channels: usize,
        growth: usize,
        scale: f32,
    ) -> Result<Self> {
        let layers = (0..RDB_LAYERS)
            .map(|i| {
                Conv2d::new(
                    b,
                    &child(prefix, &format!("conv{i}")),
                    ConvSpec::same(channels + i * growth, growth, 3),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let fusion = Conv2d::new(
            b,
            &child(prefix, "fusion"),
            ConvSpec::same(channels + RDB_LAYERS * growth, channels, 1),
        )?;
        Ok(Rdb {
            layers,
            fusion,
            scale,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.trace(x, None)?.output)
    }

    /// Forward pass that records every layer input. With `zero_layer = Some(k)`
    /// the output of layer `k` is replaced by zeros before it is passed on.
    pub fn trace(&self, x: &Tensor, zero_layer: Option<usize>) -> Result<RdbTrace> {
        let mut features = vec![x.clone()];
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        for (i, conv) in self.layers.iter().enumerate() {
            let input = Tensor::concat(&features, 1)?;
            let mut out = conv.forward(&input)?.relu()?;
            if zero_layer == Some(i) {
                out = out.scale(0.0)?;
            }
            layer_inputs.push(input);
            features.push(out);
        }
        let fused = self.fusion.forward(&Tensor::concat(&features, 1)?)?;
        Ok(RdbTrace {
            layer_inputs,
            output: x.add(&fused.scale(self.scale)?)?,
        })
    }
}

/// Residual-in-residual dense block: chained RDBs; the chain's own residual
/// `chain(x) − x` is added back scaled by `β`, so a block with all-zero
/// weights is the identity.
#[derive(Clone, Debug)]
pub struct Rrdb {
    pub blocks: Vec<Rdb>,
    scale: f32,
}

impl Rrdb {
    pub fn new(
        b: &mut Builder,
        prefix: &str,
        channels: usize,
        growth: usize,
        rdbs: usize,
        scale: f32,
    ) -> Result<Self> {
        let blocks = (0..rdbs)
            .map(|i| {
                Rdb::new(
                    b,
                    &child(prefix, &format!("rdb{i}")),
                    channels,
                    growth,
                    scale,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Rrdb { blocks, scale })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut y = x.clone();
        for rdb in &self.blocks {
            y = rdb.forward(&y)?;
        }
        Ok(x.add(&y.sub(x)?.scale(self.scale)?)?)
    }
}
