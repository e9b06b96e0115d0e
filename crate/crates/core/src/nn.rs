//! Parameterised layers. Every layer registers its tensors in a [`VarMap`]
//! under `prefix.leaf` names, which is what checkpoints store.

use stripepaint_tensor::{Rng, Tensor, Var, VarMap};

use crate::error::Result;

/// Collects named parameters and draws their initial values from one
/// seeded stream, in construction order.
pub struct Builder {
    vars: VarMap,
    rng: Rng,
}

impl Builder {
    pub fn new(rng: Rng) -> Self {
        Builder {
            vars: VarMap::new(),
            rng,
        }
    }

    pub fn normal(&mut self, name: &str, dims: &[usize], stddev: f32) -> Result<Var> {
        let t = Tensor::randn(dims, stddev, &mut self.rng)?;
        Ok(self.vars.insert(name, t)?)
    }

    pub fn constant(&mut self, name: &str, dims: &[usize], value: f32) -> Result<Var> {
        Ok(self.vars.insert(name, Tensor::full(dims, value)?)?)
    }

    pub fn finish(self) -> VarMap {
        self.vars
    }
}

fn join(prefix: &str, leaf: &str) -> String {
    if prefix.is_empty() {
        leaf.to_string()
    } else {
        format!("{prefix}.{leaf}")
    }
}

/// Reads a parameter either as a graph leaf or cut from the graph.
fn value(v: &Var, frozen: bool) -> Tensor {
    if frozen {
        v.frozen()
    } else {
        v.get()
    }
}

/// `y = x·W + b` over the last axis; `W` is stored `in × out`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: Var,
    pub bias: Var,
}

impl Linear {
    pub fn new(b: &mut Builder, prefix: &str, inputs: usize, outputs: usize) -> Result<Self> {
        Ok(Linear {
            weight: b.normal(&join(prefix, "weight"), &[inputs, outputs], 0.02)?,
            bias: b.constant(&join(prefix, "bias"), &[outputs], 0.0)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.matmul(&self.weight.get())?.add(&self.bias.get())?)
    }
}

#[derive(Clone, Debug)]
pub struct Conv2d {
    pub weight: Var,
    pub bias: Option<Var>,
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

pub struct ConvSpec {
    pub inputs: usize,
    pub outputs: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
    pub bias: bool,
}

impl ConvSpec {
    /// Stride-1 convolution that keeps the spatial size (odd kernel).
    pub fn same(inputs: usize, outputs: usize, kernel: usize) -> Self {
        ConvSpec {
            inputs,
            outputs,
            kernel,
            stride: 1,
            padding: kernel / 2,
            groups: 1,
            bias: true,
        }
    }

    pub fn strided(
        inputs: usize,
        outputs: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        ConvSpec {
            stride,
            padding,
            ..Self::same(inputs, outputs, kernel)
        }
    }
}

impl Conv2d {
    /// He-normal weights (`std = sqrt(2 / fan_in)`), zero bias.
    pub fn new(b: &mut Builder, prefix: &str, spec: ConvSpec) -> Result<Self> {
        let cg = spec.inputs / spec.groups;
        let fan_in = (cg * spec.kernel * spec.kernel) as f32;
        let weight = b.normal(
            &join(prefix, "weight"),
            &[spec.outputs, cg, spec.kernel, spec.kernel],
            (2.0 / fan_in).sqrt(),
        )?;
        let bias = if spec.bias {
            Some(b.constant(&join(prefix, "bias"), &[spec.outputs], 0.0)?)
        } else {
            None
        };
        Ok(Conv2d {
            weight,
            bias,
            stride: spec.stride,
            padding: spec.padding,
            groups: spec.groups,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.forward_with(x, false)
    }

    /// With `frozen`, parameters enter the graph as constants: gradients
    /// still reach `x` but nothing accumulates on the weights.
    pub fn forward_with(&self, x: &Tensor, frozen: bool) -> Result<Tensor> {
        let w = value(&self.weight, frozen);
        let b = self.bias.as_ref().map(|b| value(b, frozen));
        Ok(x.conv2d(&w, b.as_ref(), self.stride, self.padding, self.groups)?)
    }
}

#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gamma: Var,
    pub beta: Var,
}

impl LayerNorm {
    pub fn new(b: &mut Builder, prefix: &str, channels: usize) -> Result<Self> {
        Ok(LayerNorm {
            gamma: b.constant(&join(prefix, "gamma"), &[channels], 1.0)?,
            beta: b.constant(&join(prefix, "beta"), &[channels], 0.0)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.layer_norm(&self.gamma.get(), &self.beta.get(), 1e-5)?)
    }
}

/// Per-sample, per-channel normalisation of `N×C×H×W` with a learned affine.
#[derive(Clone, Debug)]
pub struct InstanceNorm {
    pub gamma: Var,
    pub beta: Var,
}

impl InstanceNorm {
    pub fn new(b: &mut Builder, prefix: &str, channels: usize) -> Result<Self> {
        Ok(InstanceNorm {
            gamma: b.constant(&join(prefix, "gamma"), &[channels], 1.0)?,
            beta: b.constant(&join(prefix, "beta"), &[channels], 0.0)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.instance_norm(&self.gamma.get(), &self.beta.get(), 1e-5)?)
    }
}

/// `N×C×H×W` to `N×(H·W)×C`.
pub fn map_to_tokens(x: &Tensor) -> Result<Tensor> {
    let d = x.dims().to_vec();
    Ok(x.permute(&[0, 2, 3, 1])?
        .reshape(&[d[0], d[2] * d[3], d[1]])?)
}

/// `N×(H·W)×C` back to `N×C×H×W`.
pub fn tokens_to_map(x: &Tensor, h: usize, w: usize) -> Result<Tensor> {
    let d = x.dims().to_vec();
    Ok(x.reshape(&[d[0], h, w, d[2]])?.permute(&[0, 3, 1, 2])?)
}

pub(crate) fn child(prefix: &str, leaf: &str) -> String {
    join(prefix, leaf)
}
