use std::collections::BTreeMap;

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;
use crate::var::VarMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment buffers keyed by variable name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimState {
    pub step: u64,
    pub first: BTreeMap<String, Vec<f32>>,
    pub second: BTreeMap<String, Vec<f32>>,
}

/// One bias-corrected Adam update over every variable that holds a gradient.
/// Variables without a gradient are left untouched. The step counter
/// advances once per call.
pub fn adam_step(vars: &VarMap, state: &mut OptimState, cfg: &AdamConfig) -> Result<()> {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - f64::from(cfg.beta1).powi(t);
    let bc2 = 1.0 - f64::from(cfg.beta2).powi(t);
    for (name, var) in vars.iter() {
        let p = var.get();
        let Some(g) = p.grad() else { continue };
        let n = p.numel();
        let m = state
            .first
            .entry(name.clone())
            .or_insert_with(|| vec![0.0; n]);
        if m.len() != n {
            return Err(TensorError::Contract(format!(
                "moment buffer for {name} has wrong size"
            )));
        }
        let v = state
            .second
            .entry(name.clone())
            .or_insert_with(|| vec![0.0; n]);
        let mut data = p.to_vec();
        for i in 0..n {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let mhat = f64::from(m[i]) / bc1;
            let vhat = f64::from(v[i]) / bc2;
            data[i] -= (f64::from(cfg.lr) * mhat / (vhat.sqrt() + f64::from(cfg.eps))) as f32;
        }
        var.set(Tensor::from_vec(data, p.dims())?);
    }
    Ok(())
}
