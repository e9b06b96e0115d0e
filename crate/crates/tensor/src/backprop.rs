//! Reverse-mode traversal.

use std::collections::{HashMap, HashSet};

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

/// The recorded operations reachable from a root, in topological order
/// (every node appears after all of its inputs).
pub struct Tape {
    nodes: Vec<Tensor>,
}

impl Tape {
    /// Collects every gradient-tracking tensor that `root` depends on.
    pub fn build(root: &Tensor) -> Self {
        let mut order = Vec::new();
        let mut visited = HashSet::new();
        // Iterative post-order DFS; graphs can be deep.
        let mut stack: Vec<(Tensor, bool)> = vec![(root.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !t.requires_grad() || !visited.insert(t.id()) {
                continue;
            }
            stack.push((t.clone(), true));
            for input in t.inputs().iter().rev() {
                if input.requires_grad() && !visited.contains(&input.id()) {
                    stack.push((input.clone(), false));
                }
            }
        }
        Tape { nodes: order }
    }

    pub fn nodes(&self) -> &[Tensor] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

impl Tensor {
    /// Back-propagates from this scalar, accumulating `grad` on every
    /// gradient-tracking tensor it depends on.
    ///
    /// Gradients add onto whatever is already stored; call
    /// [`Tensor::zero_grad`] on leaves between independent passes.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(TensorError::Contract(format!(
                "backward requires a scalar, got shape {:?}",
                self.dims()
            )));
        }
        if !self.requires_grad() {
            return Err(TensorError::Contract(
                "backward on a tensor that is not connected to any gradient-tracking input".into(),
            ));
        }
        let tape = Tape::build(self);
        let mut pending: HashMap<u64, Vec<f32>> = HashMap::new();
        pending.insert(self.id(), vec![1.0]);
        for t in tape.nodes.iter().rev() {
            let Some(g) = pending.remove(&t.id()) else {
                continue;
            };
            if let Some(node) = t.0.node.as_ref() {
                let input_grads = (node.backward)(&g, t.data(), &node.inputs);
                debug_assert_eq!(input_grads.len(), node.inputs.len(), "op {}", node.op);
                for (input, ig) in node.inputs.iter().zip(input_grads) {
                    let Some(ig) = ig else { continue };
                    if !input.requires_grad() {
                        continue;
                    }
                    debug_assert_eq!(ig.len(), input.numel(), "op {}", node.op);
                    match pending.get_mut(&input.id()) {
                        Some(acc) => acc.iter_mut().zip(&ig).for_each(|(a, b)| *a += b),
                        None => {
                            pending.insert(input.id(), ig);
                        }
                    }
                }
            }
            t.accumulate_grad(&g);
        }
        Ok(())
    }
}
