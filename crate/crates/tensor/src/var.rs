//! Named, mutable parameter slots.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

/// A shared handle to a trainable tensor. Layers keep a `Var`; optimizers
/// swap in updated tensors through [`Var::set`].
#[derive(Clone, Debug)]
pub struct Var(Arc<RwLock<Tensor>>);

impl Var {
    pub fn new(t: Tensor) -> Self {
        Var(Arc::new(RwLock::new(t.requires_grad_())))
    }

    /// The current value, tracked for gradients.
    pub fn get(&self) -> Tensor {
        self.0.read().expect("var lock poisoned").clone()
    }

    /// The current value cut from the graph (no gradient bookkeeping).
    pub fn frozen(&self) -> Tensor {
        self.get().detach()
    }

    pub fn set(&self, t: Tensor) {
        *self.0.write().expect("var lock poisoned") = t.requires_grad_();
    }

    pub fn dims(&self) -> Vec<usize> {
        self.get().dims().to_vec()
    }
}

/// Ordered collection of named variables. Iteration order is the
/// lexicographic order of names, so it is stable across runs.
#[derive(Clone, Debug, Default)]
pub struct VarMap {
    vars: BTreeMap<String, Var>,
}

impl VarMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) -> Result<Var> {
        let name = name.into();
        if self.vars.contains_key(&name) {
            return Err(TensorError::Contract(format!(
                "duplicate variable name {name}"
            )));
        }
        let v = Var::new(t);
        self.vars.insert(name, v.clone());
        Ok(v)
    }

    pub fn get(&self, name: &str) -> Option<&Var> {
        self.vars.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.vars.iter()
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn num_elements(&self) -> usize {
        self.vars.values().map(|v| v.get().numel()).sum()
    }

    pub fn zero_grad(&self) {
        self.vars.values().for_each(|v| v.get().zero_grad());
    }

    /// Overwrites the value of an existing variable, checking its shape.
    pub fn assign(&self, name: &str, data: Vec<f32>, dims: &[usize]) -> Result<()> {
        let var = self
            .vars
            .get(name)
            .ok_or_else(|| TensorError::Contract(format!("unknown variable {name}")))?;
        if var.dims() != dims {
            return Err(TensorError::shape(
                "assign",
                format!("{name}: stored {:?}, given {dims:?}", var.dims()),
            ));
        }
        var.set(Tensor::from_vec(data, dims)?);
        Ok(())
    }
}
