use crate::error::{Result, TensorError};
use crate::shape;
use crate::tensor::Tensor;

/// Per-row statistics: mean and 1/sqrt(var + eps), biased variance.
fn row_stats(row: &[f32], eps: f32) -> (f32, f32) {
    let n = row.len() as f64;
    let mean = row.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let var = row
        .iter()
        .map(|&v| (f64::from(v) - mean).powi(2))
        .sum::<f64>()
        / n;
    (mean as f32, (1.0 / (var + f64::from(eps)).sqrt()) as f32)
}

/// Normalises `rows` contiguous rows of length `len` and applies a per-row
/// or per-column affine map (selected by `param_of`).
fn affine_norm(
    op: &'static str,
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    eps: f32,
    len: usize,
    param_of: fn(row: usize, col: usize, channels: usize) -> usize,
) -> Result<Tensor> {
    let channels = gamma.numel();
    let rows = x.numel() / len;
    let xd = x.data();
    let (g, b) = (gamma.data(), beta.data());
    let mut out = vec![0.0f32; xd.len()];
    for r in 0..rows {
        let row = &xd[r * len..(r + 1) * len];
        let (mean, rstd) = row_stats(row, eps);
        for (col, (&v, o)) in row.iter().zip(&mut out[r * len..(r + 1) * len]).enumerate() {
            let p = param_of(r, col, channels);
            *o = (v - mean) * rstd * g[p] + b[p];
        }
    }
    Tensor::from_op(
        op,
        out,
        x.dims().to_vec(),
        vec![x.clone(), gamma.clone(), beta.clone()],
        Box::new(move |gout, _, inputs| {
            let xd = inputs[0].data();
            let gam = inputs[1].data();
            let mut dx = inputs[0].requires_grad().then(|| vec![0.0f32; xd.len()]);
            let mut dg = inputs[1].requires_grad().then(|| vec![0.0f32; channels]);
            let mut db = inputs[2].requires_grad().then(|| vec![0.0f32; channels]);
            let mut xhat = vec![0.0f32; len];
            let mut dxhat = vec![0.0f32; len];
            for r in 0..rows {
                let row = &xd[r * len..(r + 1) * len];
                let go = &gout[r * len..(r + 1) * len];
                let (mean, rstd) = row_stats(row, eps);
                let (mut m1, mut m2) = (0.0f64, 0.0f64);
                for col in 0..len {
                    let p = param_of(r, col, channels);
                    xhat[col] = (row[col] - mean) * rstd;
                    dxhat[col] = go[col] * gam[p];
                    m1 += f64::from(dxhat[col]);
                    m2 += f64::from(dxhat[col] * xhat[col]);
                    if let Some(dg) = dg.as_mut() {
                        dg[p] += go[col] * xhat[col];
                    }
                    if let Some(db) = db.as_mut() {
                        db[p] += go[col];
                    }
                }
                if let Some(dx) = dx.as_mut() {
                    let (m1, m2) = ((m1 / len as f64) as f32, (m2 / len as f64) as f32);
                    for col in 0..len {
                        dx[r * len + col] = rstd * (dxhat[col] - m1 - xhat[col] * m2);
                    }
                }
            }
            vec![dx, dg, db]
        }),
    )
}

impl Tensor {
    /// Numerically stable softmax along `axis`.
    pub fn softmax(&self, axis: usize) -> Result<Tensor> {
        let dims = self.dims().to_vec();
        if axis >= dims.len() {
            return Err(TensorError::shape(
                "softmax",
                format!("axis {axis} out of range for {dims:?}"),
            ));
        }
        let outer = shape::numel(&dims[..axis]);
        let len = dims[axis];
        let inner = shape::numel(&dims[axis + 1..]);
        let x = self.data();
        let mut out = vec![0.0f32; x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |k: usize| (o * len + k) * inner + i;
                let max = (0..len).map(|k| x[at(k)]).fold(f32::NEG_INFINITY, f32::max);
                let mut sum = 0.0f64;
                for k in 0..len {
                    let e = (x[at(k)] - max).exp();
                    out[at(k)] = e;
                    sum += f64::from(e);
                }
                let inv = (1.0 / sum) as f32;
                for k in 0..len {
                    out[at(k)] *= inv;
                }
            }
        }
        Tensor::from_op(
            "softmax",
            out,
            dims,
            vec![self.clone()],
            Box::new(move |g, y, _| {
                let mut gx = vec![0.0f32; y.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |k: usize| (o * len + k) * inner + i;
                        let dot: f64 = (0..len).map(|k| f64::from(g[at(k)] * y[at(k)])).sum();
                        let dot = dot as f32;
                        for k in 0..len {
                            gx[at(k)] = y[at(k)] * (g[at(k)] - dot);
                        }
                    }
                }
                vec![Some(gx)]
            }),
        )
    }

    /// Layer normalisation over the last axis with affine `gamma`, `beta`.
    pub fn layer_norm(&self, gamma: &Tensor, beta: &Tensor, eps: f32) -> Result<Tensor> {
        let c = *self.dims().last().expect("rank >= 1");
        if gamma.dims() != [c] || beta.dims() != [c] {
            return Err(TensorError::shape(
                "layer_norm",
                format!(
                    "last dim {c} vs gamma {:?} beta {:?}",
                    gamma.dims(),
                    beta.dims()
                ),
            ));
        }
        affine_norm("layer_norm", self, gamma, beta, eps, c, |_, col, _| col)
    }

    /// Instance normalisation of `N×C×H×W`: each plane is normalised over its
    /// spatial extent, then scaled and shifted per channel.
    pub fn instance_norm(&self, gamma: &Tensor, beta: &Tensor, eps: f32) -> Result<Tensor> {
        let d = self.dims();
        if d.len() != 4 || gamma.dims() != [d[1]] || beta.dims() != [d[1]] {
            return Err(TensorError::shape(
                "instance_norm",
                format!(
                    "input {d:?} gamma {:?} beta {:?}",
                    gamma.dims(),
                    beta.dims()
                ),
            ));
        }
        affine_norm(
            "instance_norm",
            self,
            gamma,
            beta,
            eps,
            d[2] * d[3],
            |row, _, c| row % c,
        )
    }
}
