//! Central-difference gradient checking.
//!
//! The numeric side only ever evaluates forward passes; it never touches
//! the backward closures it is checking. The scalar probed is
//! `L = Σ c_j · y_j` with fixed normal weights `c`, accumulated in f64.

use crate::error::Result;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Default step: 2⁻¹⁰ ≈ 1e-3. A power of two keeps `x ± eps` exact for
/// inputs on a coarse binary grid.
pub const EPS: f32 = 1.0 / 1024.0;

#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub eps: f32,
    /// Lower clamp of the relative-error denominator.
    pub denom_floor: f32,
    /// Elements probed per input (evenly strided); `usize::MAX` probes all.
    pub max_probes: usize,
    pub seed: u64,
}

impl Default for GradCheck {
    fn default() -> Self {
        GradCheck {
            eps: EPS,
            denom_floor: 1e-4,
            max_probes: usize::MAX,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub input: usize,
    pub index: usize,
    pub analytic: f32,
    pub numeric: f32,
    pub rel_error: f32,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub probes: usize,
    pub max_rel_error: f32,
    pub worst: Option<Mismatch>,
}

/// A forward pass written independently in f64, over flat input buffers.
pub type Reference<'a> = &'a dyn Fn(&[Vec<f64>]) -> Vec<f64>;

impl GradCheck {
    /// Compares backward-pass gradients of `f` at `inputs` against central
    /// differences, for every input.
    pub fn run<F>(&self, inputs: &[Tensor], f: F) -> Result<GradCheckReport>
    where
        F: Fn(&[Tensor]) -> Result<Tensor>,
    {
        let leaves: Vec<Tensor> = inputs.iter().map(|t| t.detach().requires_grad_()).collect();
        let y = f(&leaves)?;
        let mut rng = Rng::new(self.seed);
        // Probe weights on a 1/8 grid keep the weighted sum exact when `y` is.
        let weights: Vec<f32> = (0..y.numel())
            .map(|_| (rng.normal() * 8.0).round() / 8.0)
            .collect();
        let c = Tensor::from_vec(weights.clone(), y.dims())?;
        y.mul(&c)?.sum()?.backward()?;

        let probe = |args: &[Tensor]| -> Result<f64> {
            let out = f(args)?;
            Ok(out
                .data()
                .iter()
                .zip(&weights)
                .map(|(&v, &w)| f64::from(v) * f64::from(w))
                .sum())
        };

        let mut report = GradCheckReport::default();
        for (i, leaf) in leaves.iter().enumerate() {
            let analytic = leaf.grad().unwrap_or_else(|| vec![0.0; leaf.numel()]);
            let n = leaf.numel();
            let stride = n.div_ceil(self.max_probes.min(n)).max(1);
            for idx in (0..n).step_by(stride) {
                let mut args: Vec<Tensor> = inputs.iter().map(Tensor::detach).collect();
                let base = inputs[i].to_vec();
                let mut plus = base.clone();
                plus[idx] += self.eps;
                let mut minus = base;
                minus[idx] -= self.eps;
                let h = f64::from(plus[idx]) - f64::from(minus[idx]);
                args[i] = Tensor::from_vec(plus, inputs[i].dims())?;
                let lp = probe(&args)?;
                args[i] = Tensor::from_vec(minus, inputs[i].dims())?;
                let lm = probe(&args)?;
                let numeric = ((lp - lm) / h) as f32;
                let a = analytic[idx];
                let denom = a.abs().max(numeric.abs()).max(self.denom_floor);
                let rel = (a - numeric).abs() / denom;
                report.probes += 1;
                if report.worst.is_none() || rel > report.max_rel_error {
                    report.max_rel_error = rel;
                    report.worst = Some(Mismatch {
                        input: i,
                        index: idx,
                        analytic: a,
                        numeric,
                        rel_error: rel,
                    });
                }
            }
        }
        Ok(report)
    }

    /// Like [`run`](Self::run), but the central differences are taken on
    /// `reference`, an f64 re-implementation of `f`. Also reports the largest
    /// absolute difference between `f` and `reference` outputs.
    ///
    /// Use this where f32 output rounding dominates the difference quotient.
    pub fn run_against_reference<F>(
        &self,
        inputs: &[Tensor],
        f: F,
        reference: Reference<'_>,
    ) -> Result<(GradCheckReport, f64)>
    where
        F: Fn(&[Tensor]) -> Result<Tensor>,
    {
        let leaves: Vec<Tensor> = inputs.iter().map(|t| t.detach().requires_grad_()).collect();
        let y = f(&leaves)?;
        let mut rng = Rng::new(self.seed);
        let weights: Vec<f64> = (0..y.numel()).map(|_| f64::from(rng.normal())).collect();
        let c = Tensor::from_vec(weights.iter().map(|&w| w as f32).collect(), y.dims())?;
        y.mul(&c)?.sum()?.backward()?;

        let base: Vec<Vec<f64>> = inputs
            .iter()
            .map(|t| t.data().iter().map(|&v| f64::from(v)).collect())
            .collect();
        let ref_out = reference(&base);
        let forward_gap = ref_out
            .iter()
            .zip(y.data())
            .map(|(r, &v)| (r - f64::from(v)).abs())
            .fold(0.0, f64::max);
        let probe = |args: &[Vec<f64>]| -> f64 {
            reference(args)
                .iter()
                .zip(&weights)
                .map(|(v, w)| v * w)
                .sum()
        };
        let eps = f64::from(self.eps);
        let mut report = GradCheckReport::default();
        for (i, leaf) in leaves.iter().enumerate() {
            let analytic = leaf.grad().unwrap_or_else(|| vec![0.0; leaf.numel()]);
            let n = leaf.numel();
            let stride = n.div_ceil(self.max_probes.min(n)).max(1);
            for idx in (0..n).step_by(stride) {
                let mut args = base.clone();
                args[i][idx] = base[i][idx] + eps;
                let lp = probe(&args);
                args[i][idx] = base[i][idx] - eps;
                let lm = probe(&args);
                let numeric = ((lp - lm) / (2.0 * eps)) as f32;
                let a = analytic[idx];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(self.denom_floor);
                report.probes += 1;
                if report.worst.is_none() || rel > report.max_rel_error {
                    report.max_rel_error = rel;
                    report.worst = Some(Mismatch {
                        input: i,
                        index: idx,
                        analytic: a,
                        numeric,
                        rel_error: rel,
                    });
                }
            }
        }
        Ok((report, forward_gap))
    }
}
