use std::sync::Arc;

use crate::error::{Result, TensorError};
use crate::shape;
use crate::tensor::Tensor;

/// `c = alpha * a·b + beta * c` for an `m×k` by `k×n` product with explicit
/// row/column strides, so transposes are free.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    a_strides: (usize, usize),
    b: &[f32],
    b_strides: (usize, usize),
    beta: f32,
    c: &mut [f32],
) {
    if m == 0 || n == 0 {
        return;
    }
    let span =
        |rows: usize, cols: usize, (rs, cs): (usize, usize)| (rows - 1) * rs + (cols - 1) * cs + 1;
    assert!(a.len() >= span(m, k, a_strides));
    assert!(b.len() >= span(k, n, b_strides));
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above guarantee every strided access of the
    // m×k, k×n and m×n operands lies within the borrowed slices.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Tensor {
    /// Matrix product over the last two axes; leading axes broadcast.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        let (ad, bd) = (self.dims(), rhs.dims());
        if ad.len() < 2 || bd.len() < 2 {
            return Err(TensorError::shape("matmul", "operands need rank >= 2"));
        }
        let (m, k) = (ad[ad.len() - 2], ad[ad.len() - 1]);
        let (k2, n) = (bd[bd.len() - 2], bd[bd.len() - 1]);
        if k != k2 {
            return Err(TensorError::shape(
                "matmul",
                format!("inner dimensions differ: {ad:?} x {bd:?}"),
            ));
        }
        let a_lead = &ad[..ad.len() - 2];
        let b_lead = &bd[..bd.len() - 2];

        if b_lead.is_empty() {
            // Shared right operand: one tall product.
            let rows = shape::numel(a_lead) * m;
            let mut out = vec![0.0f32; rows * n];
            gemm(
                rows,
                k,
                n,
                self.data(),
                (k, 1),
                rhs.data(),
                (n, 1),
                0.0,
                &mut out,
            );
            let mut dims = a_lead.to_vec();
            dims.extend([m, n]);
            return Tensor::from_op(
                "matmul",
                out,
                dims,
                vec![self.clone(), rhs.clone()],
                Box::new(move |g, _, inputs| {
                    let (a, b) = (inputs[0].data(), inputs[1].data());
                    let ga = inputs[0].requires_grad().then(|| {
                        let mut ga = vec![0.0f32; rows * k];
                        gemm(rows, n, k, g, (n, 1), b, (1, n), 0.0, &mut ga);
                        ga
                    });
                    let gb = inputs[1].requires_grad().then(|| {
                        let mut gb = vec![0.0f32; k * n];
                        gemm(k, rows, n, a, (1, k), g, (n, 1), 0.0, &mut gb);
                        gb
                    });
                    vec![ga, gb]
                }),
            );
        }

        let lead = if a_lead.is_empty() {
            b_lead.to_vec()
        } else {
            shape::broadcast_shape(a_lead, b_lead).ok_or_else(|| {
                TensorError::shape(
                    "matmul",
                    format!("batch dims {a_lead:?} and {b_lead:?} do not broadcast"),
                )
            })?
        };
        let batches = shape::numel(&lead);
        let a_map = Arc::new(if a_lead.is_empty() {
            vec![0; batches]
        } else {
            shape::broadcast_index_map(a_lead, &lead)
        });
        let b_map = Arc::new(shape::broadcast_index_map(b_lead, &lead));
        let mut out = vec![0.0f32; batches * m * n];
        let (a, b) = (self.data(), rhs.data());
        for bi in 0..batches {
            let ao = a_map[bi] * m * k;
            let bo = b_map[bi] * k * n;
            gemm(
                m,
                k,
                n,
                &a[ao..ao + m * k],
                (k, 1),
                &b[bo..bo + k * n],
                (n, 1),
                0.0,
                &mut out[bi * m * n..(bi + 1) * m * n],
            );
        }
        let mut dims = lead;
        dims.extend([m, n]);
        Tensor::from_op(
            "matmul",
            out,
            dims,
            vec![self.clone(), rhs.clone()],
            Box::new(move |g, _, inputs| {
                let (a, b) = (inputs[0].data(), inputs[1].data());
                let mut ga = inputs[0].requires_grad().then(|| vec![0.0f32; a.len()]);
                let mut gb = inputs[1].requires_grad().then(|| vec![0.0f32; b.len()]);
                for bi in 0..batches {
                    let gs = &g[bi * m * n..(bi + 1) * m * n];
                    let ao = a_map[bi] * m * k;
                    let bo = b_map[bi] * k * n;
                    if let Some(ga) = ga.as_mut() {
                        gemm(
                            m,
                            n,
                            k,
                            gs,
                            (n, 1),
                            &b[bo..bo + k * n],
                            (1, n),
                            1.0,
                            &mut ga[ao..ao + m * k],
                        );
                    }
                    if let Some(gb) = gb.as_mut() {
                        gemm(
                            k,
                            m,
                            n,
                            &a[ao..ao + m * k],
                            (1, k),
                            gs,
                            (n, 1),
                            1.0,
                            &mut gb[bo..bo + k * n],
                        );
                    }
                }
                vec![ga, gb]
            }),
        )
    }
}
