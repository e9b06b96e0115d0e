use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::error::{Result, TensorError};
use crate::rng::Rng;
use crate::shape;

static NEXT_ID: AtomicU64 = AtomicU64::new(0);
static DEBUG_CHECKS: AtomicBool = AtomicBool::new(false);

/// When enabled, every operation scans its output and returns
/// [`TensorError::NonFinite`] if it produced an inf or nan.
pub fn set_debug_checks(enabled: bool) {
    DEBUG_CHECKS.store(enabled, Ordering::Relaxed);
}

pub fn debug_checks() -> bool {
    DEBUG_CHECKS.load(Ordering::Relaxed)
}

/// Vector-Jacobian product of one recorded operation.
///
/// Called with the upstream gradient, the operation's output values and its
/// inputs; returns one gradient per input (`None` for inputs that do not
/// require one).
pub type BackwardFn = Box<dyn Fn(&[f32], &[f32], &[Tensor]) -> Vec<Option<Vec<f32>>> + Send + Sync>;

pub(crate) struct Node {
    pub(crate) op: &'static str,
    pub(crate) inputs: Vec<Tensor>,
    pub(crate) backward: BackwardFn,
}

pub(crate) struct Inner {
    pub(crate) id: u64,
    pub(crate) dims: Vec<usize>,
    pub(crate) data: Vec<f32>,
    pub(crate) requires_grad: bool,
    pub(crate) node: Option<Node>,
    pub(crate) grad: Mutex<Option<Vec<f32>>>,
}

/// Initialisation scheme for [`Tensor::construct`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    Constant(f32),
    /// Normal(0, stddev) drawn from [`Rng::new(seed)`](crate::rng::Rng).
    SeededNormal {
        seed: u64,
        stddev: f32,
    },
}

/// An immutable N-dimensional f32 array, optionally part of an autodiff graph.
///
/// Cloning is cheap (reference counted). Operations on tensors that require
/// gradients record a node so that [`Tensor::backward`] can propagate.
#[derive(Clone)]
pub struct Tensor(pub(crate) Arc<Inner>);

impl Tensor {
    fn from_inner(
        dims: Vec<usize>,
        data: Vec<f32>,
        requires_grad: bool,
        node: Option<Node>,
    ) -> Self {
        debug_assert_eq!(shape::numel(&dims), data.len());
        Tensor(Arc::new(Inner {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            dims,
            data,
            requires_grad,
            node,
            grad: Mutex::new(None),
        }))
    }

    pub fn from_vec(data: Vec<f32>, dims: &[usize]) -> Result<Self> {
        shape::validate(dims)?;
        if shape::numel(dims) != data.len() {
            return Err(TensorError::shape(
                "from_vec",
                format!("{} values cannot fill shape {:?}", data.len(), dims),
            ));
        }
        Ok(Self::from_inner(dims.to_vec(), data, false, None))
    }

    pub fn construct(dims: &[usize], init: Init) -> Result<Self> {
        shape::validate(dims)?;
        let n = shape::numel(dims);
        let data = match init {
            Init::Zeros => vec![0.0; n],
            Init::Constant(c) => vec![c; n],
            Init::SeededNormal { seed, stddev } => {
                let mut rng = Rng::new(seed);
                (0..n).map(|_| rng.normal() * stddev).collect()
            }
        };
        Ok(Self::from_inner(dims.to_vec(), data, false, None))
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::construct(dims, Init::Zeros)
    }

    pub fn full(dims: &[usize], value: f32) -> Result<Self> {
        Self::construct(dims, Init::Constant(value))
    }

    pub fn scalar(value: f32) -> Self {
        Self::from_inner(vec![1], vec![value], false, None)
    }

    /// Normal(0, stddev) values from an existing stream.
    pub fn randn(dims: &[usize], stddev: f32, rng: &mut Rng) -> Result<Self> {
        shape::validate(dims)?;
        let data = (0..shape::numel(dims))
            .map(|_| rng.normal() * stddev)
            .collect();
        Ok(Self::from_inner(dims.to_vec(), data, false, None))
    }

    /// Uniform `[lo, hi)` values from an existing stream.
    pub fn rand_uniform(dims: &[usize], lo: f32, hi: f32, rng: &mut Rng) -> Result<Self> {
        shape::validate(dims)?;
        let data = (0..shape::numel(dims))
            .map(|_| rng.uniform_range(lo, hi))
            .collect();
        Ok(Self::from_inner(dims.to_vec(), data, false, None))
    }

    /// A new leaf with the same values that accumulates gradients.
    pub fn requires_grad_(self) -> Self {
        if self.0.requires_grad && self.0.node.is_none() {
            return self;
        }
        Self::from_inner(self.0.dims.clone(), self.0.data.clone(), true, None)
    }

    /// A gradient-tracking leaf built from raw data (used for parameters).
    pub fn leaf(data: Vec<f32>, dims: &[usize]) -> Result<Self> {
        Ok(Self::from_vec(data, dims)?.requires_grad_())
    }

    /// Same values, cut from the graph.
    pub fn detach(&self) -> Self {
        if !self.0.requires_grad {
            return self.clone();
        }
        Self::from_inner(self.0.dims.clone(), self.0.data.clone(), false, None)
    }

    /// Records a custom differentiable operation.
    ///
    /// `backward` receives `(grad_output, output_values, inputs)` and must
    /// return one entry per input. A node is recorded only if some input
    /// requires a gradient.
    pub fn from_op(
        op: &'static str,
        data: Vec<f32>,
        dims: Vec<usize>,
        inputs: Vec<Tensor>,
        backward: BackwardFn,
    ) -> Result<Self> {
        shape::validate(&dims)?;
        if shape::numel(&dims) != data.len() {
            return Err(TensorError::shape(op, "output buffer does not match shape"));
        }
        if debug_checks() && data.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { op });
        }
        let tracked = inputs.iter().any(|t| t.requires_grad());
        let node = tracked.then(|| Node {
            op,
            inputs,
            backward,
        });
        Ok(Self::from_inner(dims, data, tracked, node))
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn dims(&self) -> &[usize] {
        &self.0.dims
    }

    pub fn rank(&self) -> usize {
        self.0.dims.len()
    }

    pub fn numel(&self) -> usize {
        self.0.data.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.0.data
    }

    pub fn to_vec(&self) -> Vec<f32> {
        self.0.data.clone()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.0.node.is_none()
    }

    /// Name of the operation that produced this tensor, if it was recorded.
    pub fn op_name(&self) -> Option<&'static str> {
        self.0.node.as_ref().map(|n| n.op)
    }

    pub(crate) fn inputs(&self) -> &[Tensor] {
        self.0
            .node
            .as_ref()
            .map(|n| n.inputs.as_slice())
            .unwrap_or(&[])
    }

    /// Gradient accumulated by the last [`backward`](Tensor::backward) call.
    pub fn grad(&self) -> Option<Vec<f32>> {
        self.0.grad.lock().expect("grad lock poisoned").clone()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.lock().expect("grad lock poisoned") = None;
    }

    pub(crate) fn accumulate_grad(&self, g: &[f32]) {
        let mut slot = self.0.grad.lock().expect("grad lock poisoned");
        match slot.as_mut() {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
            None => *slot = Some(g.to_vec()),
        }
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<f32> {
        if self.numel() != 1 {
            return Err(TensorError::Contract(format!(
                "item() on tensor of shape {:?}",
                self.dims()
            )));
        }
        Ok(self.0.data[0])
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let preview: Vec<f32> = self.0.data.iter().take(8).copied().collect();
        f.debug_struct("Tensor")
            .field("dims", &self.0.dims)
            .field("requires_grad", &self.0.requires_grad)
            .field("op", &self.op_name())
            .field("data", &preview)
            .finish()
    }
}
