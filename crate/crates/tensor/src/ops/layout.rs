//! Pure data movement: reshape, permute, slicing and concatenation.
//! Every gradient is the inverse movement of the upstream gradient.

use std::sync::Arc;

use crate::error::{Result, TensorError};
use crate::shape;
use crate::tensor::Tensor;

impl Tensor {
    pub fn reshape(&self, dims: &[usize]) -> Result<Tensor> {
        shape::validate(dims)?;
        if shape::numel(dims) != self.numel() {
            return Err(TensorError::shape(
                "reshape",
                format!("{:?} -> {:?} changes the element count", self.dims(), dims),
            ));
        }
        Tensor::from_op(
            "reshape",
            self.to_vec(),
            dims.to_vec(),
            vec![self.clone()],
            Box::new(|g, _, _| vec![Some(g.to_vec())]),
        )
    }

    /// Reorders axes: output axis `i` is input axis `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Tensor> {
        let dims = self.dims();
        let rank = dims.len();
        let mut seen = vec![false; rank];
        if perm.len() != rank
            || perm
                .iter()
                .any(|&p| p >= rank || std::mem::replace(&mut seen[p], true))
        {
            return Err(TensorError::shape(
                "permute",
                format!("{perm:?} is not a permutation of {rank} axes"),
            ));
        }
        let out_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
        let in_strides = shape::strides(dims);
        let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
        let n = self.numel();
        let mut map = Vec::with_capacity(n);
        let mut idx = vec![0usize; rank];
        let mut flat = 0usize;
        for _ in 0..n {
            map.push(flat);
            for d in (0..rank).rev() {
                idx[d] += 1;
                flat += src_strides[d];
                if idx[d] < out_dims[d] {
                    break;
                }
                flat -= src_strides[d] * out_dims[d];
                idx[d] = 0;
            }
        }
        let x = self.data();
        let data = map.iter().map(|&i| x[i]).collect();
        let map = Arc::new(map);
        Tensor::from_op(
            "permute",
            data,
            out_dims,
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let mut gx = vec![0.0f32; g.len()];
                for (k, &i) in map.iter().enumerate() {
                    gx[i] = g[k];
                }
                vec![Some(gx)]
            }),
        )
    }

    /// Swaps the last two axes.
    pub fn transpose_last(&self) -> Result<Tensor> {
        let r = self.rank();
        if r < 2 {
            return Err(TensorError::shape("transpose_last", "needs rank >= 2"));
        }
        let mut perm: Vec<usize> = (0..r).collect();
        perm.swap(r - 2, r - 1);
        self.permute(&perm)
    }

    /// `len` entries of `axis` starting at `start`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        let dims = self.dims().to_vec();
        if axis >= dims.len() || len == 0 || start + len > dims[axis] {
            return Err(TensorError::shape(
                "narrow",
                format!(
                    "axis {axis} range {start}..{} invalid for {dims:?}",
                    start + len
                ),
            ));
        }
        let outer = shape::numel(&dims[..axis]);
        let inner = shape::numel(&dims[axis + 1..]);
        let full = dims[axis];
        let x = self.data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * full + start) * inner;
            data.extend_from_slice(&x[base..base + len * inner]);
        }
        let mut out_dims = dims;
        out_dims[axis] = len;
        Tensor::from_op(
            "narrow",
            data,
            out_dims,
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let mut gx = vec![0.0f32; outer * full * inner];
                for o in 0..outer {
                    let base = (o * full + start) * inner;
                    gx[base..base + len * inner]
                        .copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
                }
                vec![Some(gx)]
            }),
        )
    }

    /// Splits `axis` into consecutive parts of the given sizes.
    pub fn split(&self, axis: usize, parts: &[usize]) -> Result<Vec<Tensor>> {
        if axis >= self.rank() || parts.iter().sum::<usize>() != self.dims()[axis] {
            return Err(TensorError::shape(
                "split",
                format!(
                    "parts {parts:?} do not sum to axis {axis} of {:?}",
                    self.dims()
                ),
            ));
        }
        let mut start = 0;
        parts
            .iter()
            .map(|&p| {
                let t = self.narrow(axis, start, p);
                start += p;
                t
            })
            .collect()
    }

    /// Concatenates along `axis`; all other dimensions must agree.
    pub fn concat(tensors: &[Tensor], axis: usize) -> Result<Tensor> {
        let first = tensors
            .first()
            .ok_or_else(|| TensorError::shape("concat", "no tensors"))?;
        let rank = first.rank();
        if axis >= rank {
            return Err(TensorError::shape(
                "concat",
                format!("axis {axis} out of range"),
            ));
        }
        for t in tensors {
            let ok = t.rank() == rank
                && t.dims()
                    .iter()
                    .zip(first.dims())
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !ok {
                return Err(TensorError::shape(
                    "concat",
                    format!(
                        "{:?} incompatible with {:?} on axis {axis}",
                        t.dims(),
                        first.dims()
                    ),
                ));
            }
        }
        let outer = shape::numel(&first.dims()[..axis]);
        let inner = shape::numel(&first.dims()[axis + 1..]);
        let lens: Vec<usize> = tensors.iter().map(|t| t.dims()[axis]).collect();
        let total: usize = lens.iter().sum();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (t, &l) in tensors.iter().zip(&lens) {
                data.extend_from_slice(&t.data()[o * l * inner..(o + 1) * l * inner]);
            }
        }
        let mut out_dims = first.dims().to_vec();
        out_dims[axis] = total;
        Tensor::from_op(
            "concat",
            data,
            out_dims,
            tensors.to_vec(),
            Box::new(move |g, _, inputs| {
                let mut grads: Vec<Vec<f32>> = lens
                    .iter()
                    .map(|&l| Vec::with_capacity(outer * l * inner))
                    .collect();
                let mut off = 0;
                for _ in 0..outer {
                    for (gi, &l) in grads.iter_mut().zip(&lens) {
                        gi.extend_from_slice(&g[off..off + l * inner]);
                        off += l * inner;
                    }
                }
                grads
                    .into_iter()
                    .zip(inputs)
                    .map(|(gi, t)| t.requires_grad().then_some(gi))
                    .collect()
            }),
        )
    }
}
