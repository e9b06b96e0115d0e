//! Pointwise operations. Binary operations broadcast numpy-style.

use std::sync::Arc;

use crate::error::{Result, TensorError};
use crate::shape;
use crate::tensor::Tensor;

#[derive(Clone, Copy)]
enum BinaryKind {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryKind {
    fn name(self) -> &'static str {
        match self {
            BinaryKind::Add => "add",
            BinaryKind::Sub => "sub",
            BinaryKind::Mul => "mul",
            BinaryKind::Div => "div",
        }
    }

    #[inline]
    fn apply(self, a: f32, b: f32) -> f32 {
        match self {
            BinaryKind::Add => a + b,
            BinaryKind::Sub => a - b,
            BinaryKind::Mul => a * b,
            BinaryKind::Div => a / b,
        }
    }

    /// Partial derivatives (d/da, d/db) at (a, b).
    #[inline]
    fn partials(self, a: f32, b: f32) -> (f32, f32) {
        match self {
            BinaryKind::Add => (1.0, 1.0),
            BinaryKind::Sub => (1.0, -1.0),
            BinaryKind::Mul => (b, a),
            BinaryKind::Div => (1.0 / b, -a / (b * b)),
        }
    }
}

fn binary(kind: BinaryKind, a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let op = kind.name();
    if a.dims() == b.dims() {
        let data: Vec<f32> = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| kind.apply(x, y))
            .collect();
        return Tensor::from_op(
            op,
            data,
            a.dims().to_vec(),
            vec![a.clone(), b.clone()],
            Box::new(move |g, _, inputs| {
                let (x, y) = (inputs[0].data(), inputs[1].data());
                let ga = inputs[0].requires_grad().then(|| {
                    g.iter()
                        .zip(x.iter().zip(y))
                        .map(|(g, (&x, &y))| g * kind.partials(x, y).0)
                        .collect()
                });
                let gb = inputs[1].requires_grad().then(|| {
                    g.iter()
                        .zip(x.iter().zip(y))
                        .map(|(g, (&x, &y))| g * kind.partials(x, y).1)
                        .collect()
                });
                vec![ga, gb]
            }),
        );
    }
    let out_dims = shape::broadcast_shape(a.dims(), b.dims()).ok_or_else(|| {
        TensorError::shape(
            op,
            format!("cannot broadcast {:?} with {:?}", a.dims(), b.dims()),
        )
    })?;
    let ia = Arc::new(shape::broadcast_index_map(a.dims(), &out_dims));
    let ib = Arc::new(shape::broadcast_index_map(b.dims(), &out_dims));
    let (x, y) = (a.data(), b.data());
    let data: Vec<f32> = ia
        .iter()
        .zip(ib.iter())
        .map(|(&i, &j)| kind.apply(x[i], y[j]))
        .collect();
    Tensor::from_op(
        op,
        data,
        out_dims,
        vec![a.clone(), b.clone()],
        Box::new(move |g, _, inputs| {
            let (x, y) = (inputs[0].data(), inputs[1].data());
            let mut ga = inputs[0].requires_grad().then(|| vec![0.0f32; x.len()]);
            let mut gb = inputs[1].requires_grad().then(|| vec![0.0f32; y.len()]);
            for (k, &gk) in g.iter().enumerate() {
                let (i, j) = (ia[k], ib[k]);
                let (pa, pb) = kind.partials(x[i], y[j]);
                if let Some(ga) = ga.as_mut() {
                    ga[i] += gk * pa;
                }
                if let Some(gb) = gb.as_mut() {
                    gb[j] += gk * pb;
                }
            }
            vec![ga, gb]
        }),
    )
}

/// Builds a pointwise unary op from its value and its derivative expressed
/// through `(input, output)`.
fn unary(
    op: &'static str,
    x: &Tensor,
    f: impl Fn(f32) -> f32,
    df: impl Fn(f32, f32) -> f32 + Send + Sync + 'static,
) -> Result<Tensor> {
    let data: Vec<f32> = x.data().iter().map(|&v| f(v)).collect();
    Tensor::from_op(
        op,
        data,
        x.dims().to_vec(),
        vec![x.clone()],
        Box::new(move |g, out, inputs| {
            let grad = g
                .iter()
                .zip(inputs[0].data().iter().zip(out))
                .map(|(g, (&x, &y))| g * df(x, y))
                .collect();
            vec![Some(grad)]
        }),
    )
}

const GELU_C: f32 = 0.797_884_6; // sqrt(2 / pi)
const GELU_A: f32 = 0.044_715;

impl Tensor {
    pub fn add(&self, rhs: &Tensor) -> Result<Tensor> {
        binary(BinaryKind::Add, self, rhs)
    }

    pub fn sub(&self, rhs: &Tensor) -> Result<Tensor> {
        binary(BinaryKind::Sub, self, rhs)
    }

    pub fn mul(&self, rhs: &Tensor) -> Result<Tensor> {
        binary(BinaryKind::Mul, self, rhs)
    }

    /// Division by zero yields inf/nan per element; enable
    /// [`set_debug_checks`](crate::set_debug_checks) to turn that into an error.
    pub fn div(&self, rhs: &Tensor) -> Result<Tensor> {
        binary(BinaryKind::Div, self, rhs)
    }

    /// Multiplies by a constant.
    pub fn scale(&self, c: f32) -> Result<Tensor> {
        unary("scale", self, |v| v * c, move |_, _| c)
    }

    pub fn add_scalar(&self, c: f32) -> Result<Tensor> {
        unary("add_scalar", self, |v| v + c, |_, _| 1.0)
    }

    pub fn neg(&self) -> Result<Tensor> {
        self.scale(-1.0)
    }

    /// ReLU; subgradient 0 at 0.
    pub fn relu(&self) -> Result<Tensor> {
        unary(
            "relu",
            self,
            |v| v.max(0.0),
            |x, _| if x > 0.0 { 1.0 } else { 0.0 },
        )
    }

    pub fn leaky_relu(&self, slope: f32) -> Result<Tensor> {
        unary(
            "leaky_relu",
            self,
            |v| if v > 0.0 { v } else { slope * v },
            move |x, _| if x > 0.0 { 1.0 } else { slope },
        )
    }

    /// GELU, tanh approximation.
    pub fn gelu(&self) -> Result<Tensor> {
        unary(
            "gelu",
            self,
            |x| 0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh()),
            |x, _| {
                let u = GELU_C * (x + GELU_A * x * x * x);
                let t = u.tanh();
                let du = GELU_C * (1.0 + 3.0 * GELU_A * x * x);
                0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
            },
        )
    }

    pub fn sigmoid(&self) -> Result<Tensor> {
        unary(
            "sigmoid",
            self,
            |x| {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            },
            |_, y| y * (1.0 - y),
        )
    }

    pub fn log(&self) -> Result<Tensor> {
        unary("log", self, f32::ln, |x, _| 1.0 / x)
    }

    pub fn exp(&self) -> Result<Tensor> {
        unary("exp", self, f32::exp, |_, y| y)
    }

    /// Absolute value; subgradient 0 at 0.
    pub fn abs(&self) -> Result<Tensor> {
        unary("abs", self, f32::abs, |x, _| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
    }

    pub fn square(&self) -> Result<Tensor> {
        unary("square", self, |x| x * x, |x, _| 2.0 * x)
    }

    pub fn sqrt(&self) -> Result<Tensor> {
        unary("sqrt", self, f32::sqrt, |_, y| 0.5 / y)
    }

    /// Clamps into `[lo, hi]`; the gradient is zero where clamping is active.
    pub fn clamp(&self, lo: f32, hi: f32) -> Result<Tensor> {
        unary(
            "clamp",
            self,
            move |x| x.clamp(lo, hi),
            move |x, _| if x >= lo && x <= hi { 1.0 } else { 0.0 },
        )
    }
}
