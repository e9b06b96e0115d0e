//! Reductions. Accumulation is done in f64 so results do not depend on
//! summation order at f32 precision.

use crate::error::{Result, TensorError};
use crate::shape;
use crate::tensor::Tensor;

impl Tensor {
    pub fn sum(&self) -> Result<Tensor> {
        let s: f64 = self.data().iter().map(|&v| f64::from(v)).sum();
        let n = self.numel();
        Tensor::from_op(
            "sum",
            vec![s as f32],
            vec![1],
            vec![self.clone()],
            Box::new(move |g, _, _| vec![Some(vec![g[0]; n])]),
        )
    }

    pub fn mean(&self) -> Result<Tensor> {
        let n = self.numel();
        let s: f64 = self.data().iter().map(|&v| f64::from(v)).sum();
        Tensor::from_op(
            "mean",
            vec![(s / n as f64) as f32],
            vec![1],
            vec![self.clone()],
            Box::new(move |g, _, _| vec![Some(vec![g[0] / n as f32; n])]),
        )
    }

    /// Sums over `axis`, keeping it with size 1.
    pub fn sum_axis(&self, axis: usize) -> Result<Tensor> {
        let dims = self.dims().to_vec();
        if axis >= dims.len() {
            return Err(TensorError::shape(
                "sum_axis",
                format!("axis {axis} out of range for {dims:?}"),
            ));
        }
        let outer = shape::numel(&dims[..axis]);
        let len = dims[axis];
        let inner = shape::numel(&dims[axis + 1..]);
        let x = self.data();
        let mut out = vec![0.0f32; outer * inner];
        for o in 0..outer {
            for i in 0..inner {
                let mut acc = 0.0f64;
                for k in 0..len {
                    acc += f64::from(x[(o * len + k) * inner + i]);
                }
                out[o * inner + i] = acc as f32;
            }
        }
        let mut out_dims = dims.clone();
        out_dims[axis] = 1;
        Tensor::from_op(
            "sum_axis",
            out,
            out_dims,
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let mut gx = vec![0.0f32; outer * len * inner];
                for o in 0..outer {
                    for k in 0..len {
                        let base = (o * len + k) * inner;
                        gx[base..base + inner].copy_from_slice(&g[o * inner..(o + 1) * inner]);
                    }
                }
                vec![Some(gx)]
            }),
        )
    }
}
