//! Gradient-check helpers shared by the gradient tests and the acceptance
//! report. Each helper returns the measured error; callers decide the bound.
#![allow(dead_code)]

pub mod metrics;

use stripepaint::image_ops::{make_edge_mask, stack_edge_masks, stack_images, CannyParams};
use stripepaint::losses::{
    generator_objective, FeatureExtractor, HsvMode, HueDistance, LossInputs, LossWeights,
};
use stripepaint::model::{prepare_input, Discriminator, Generator, ModelConfig};
use stripepaint::synth::synth_corpus;
use stripepaint_tensor::gradcheck::GradCheck;
use stripepaint_tensor::{Rng, Tensor, Var};

/// Normal samples on a 1/16 grid, so the linear parts stay exact in f32.
pub fn grid_randn(dims: &[usize], seed: u64, std: f32) -> Tensor {
    let t = Tensor::randn(dims, std, &mut Rng::new(seed)).unwrap();
    let data = t.data().iter().map(|v| (v * 16.0).round() / 16.0).collect();
    Tensor::from_vec(data, dims).unwrap()
}

/// Lifts a core-crate result into the tensor-crate result the checker wants.
pub fn lift<T>(r: stripepaint::Result<T>) -> stripepaint_tensor::Result<T> {
    r.map_err(|e| stripepaint_tensor::TensorError::Contract(e.to_string()))
}

/// Largest element-wise relative error of the default central-difference
/// check.
pub fn elementwise(
    inputs: &[Tensor],
    f: impl Fn(&[Tensor]) -> stripepaint_tensor::Result<Tensor>,
) -> f32 {
    GradCheck::default().run(inputs, f).unwrap().max_rel_error
}

/// Colors kept inside the cube and away from ties between channels, where
/// max/min switch branches.
pub fn colors(dims: &[usize], seed: u64) -> Tensor {
    let mut rng = Rng::new(seed);
    let n: usize = dims.iter().product();
    let mut t: Vec<f32> = (0..n).map(|_| 0.1 + 0.8 * rng.uniform()).collect();
    // Separate the channels of each pixel by at least 0.05.
    let plane = dims[2] * dims[3];
    for nb in 0..dims[0] {
        for p in 0..plane {
            let idx = |c: usize| nb * 3 * plane + c * plane + p;
            let mut vals = [t[idx(0)], t[idx(1)], t[idx(2)]];
            vals.sort_by(f32::total_cmp);
            if vals[1] - vals[0] < 0.05 || vals[2] - vals[1] < 0.05 {
                t[idx(0)] = 0.2;
                t[idx(1)] = 0.5;
                t[idx(2)] = 0.8;
            }
        }
    }
    Tensor::from_vec(t, dims).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let norm = dot(&v, &v).sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

fn random_unit(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = Rng::new(seed);
    unit((0..n).map(|_| f64::from(rng.normal())).collect())
}

fn shifted(t: &Tensor, v: &[f64], step: f32) -> Tensor {
    let data = t
        .data()
        .iter()
        .zip(v)
        .map(|(&x, &d)| x + step * d as f32)
        .collect();
    Tensor::from_vec(data, t.dims()).unwrap()
}

/// Directional check of `Σ c·f(x)` for a fixed random `c`: along the
/// normalized gradient and along a random unit direction, steps of the
/// default eps. Returns the larger of the two errors relative to `‖∇‖`.
pub fn directional(x: &Tensor, f: impl Fn(&Tensor) -> stripepaint::Result<Tensor>) -> f64 {
    let eps = GradCheck::default().eps;
    let leaf = x.detach().requires_grad_();
    let y = f(&leaf).unwrap();
    let c = grid_randn(y.dims(), 99, 1.0);
    y.mul(&c).unwrap().sum().unwrap().backward().unwrap();
    let grad: Vec<f64> = leaf.grad().unwrap().iter().map(|&g| f64::from(g)).collect();
    let norm = dot(&grad, &grad).sqrt();
    assert!(norm > 0.0, "zero gradient");
    let probe = |d: &[f64], step: f32| -> f64 {
        let y = f(&shifted(x, d, step)).unwrap();
        y.data()
            .iter()
            .zip(c.data())
            .map(|(&a, &b)| f64::from(a) * f64::from(b))
            .sum()
    };
    [unit(grad.clone()), random_unit(grad.len(), 100)]
        .iter()
        .map(|dir| {
            let analytic = dot(&grad, dir);
            let numeric = (probe(dir, eps) - probe(dir, -eps)) / (2.0 * f64::from(eps));
            (analytic - numeric).abs() / norm
        })
        .fold(0.0, f64::max)
}

/// Step of the end-to-end differences.
pub const E2E_EPS: f32 = 1e-3;
/// End-to-end error bound.
pub const E2E_TOL: f64 = 1e-2;

/// The tiny generator and its full training objective on one 16×16 image.
///
/// Single-element differences drown in f32 rounding here: most parameter
/// gradients sit near 1e-5 while the objective is in the hundreds. Checks
/// instead move a whole parameter group a distance `E2E_EPS` along a unit
/// direction `v` and compare `(L(θ + εv) − L(θ − εv)) / 2ε` with `⟨∇L, v⟩`.
/// Two directions per group: the gradient itself, where the derivative is
/// `‖∇L‖` and is compared relatively, and a random one, whose error is
/// measured against `‖∇L‖` since its projection may be arbitrarily small.
///
/// Biases start at zero, so on the zeroed hole region some ReLUs sit exactly
/// on their kink where the one-sided slope differs from the backprop
/// convention. The setup jitters biases and shifts to move off them.
pub struct EndToEnd {
    g: Generator,
    d: Discriminator,
    fx: FeatureExtractor,
    gt: Tensor,
    mask: Tensor,
    edge: Tensor,
}

/// Measured error of one directional check.
#[derive(Debug)]
pub struct Measured {
    pub what: String,
    pub error: f64,
    /// Whether the check fell back to `E2E_EPS / 8` after straddling a kink.
    pub short_step: bool,
}

impl EndToEnd {
    pub const GROUPS: [&'static str; 5] = ["enc", "global", "local", "dec", "to_rgb"];

    pub fn new() -> Self {
        let cfg = ModelConfig::tiny();
        let g = Generator::new(&cfg, Rng::new(1)).unwrap();
        // Saturated starting colors (hue near 0.19): keeps every output pixel
        // away from the gray axis, where the hue gradient is deliberately
        // damped, and from the red hue seam.
        g.vars
            .get("to_rgb.bias")
            .unwrap()
            .set(Tensor::from_vec(vec![1.0, 1.5, -1.5], &[3]).unwrap());
        let mut rng = Rng::new(5);
        for (name, v) in g.vars.iter() {
            if name.ends_with("bias") || name.ends_with("beta") {
                let t = v.frozen();
                let data = t.data().iter().map(|&b| b + 0.2 * rng.normal()).collect();
                v.set(Tensor::from_vec(data, t.dims()).unwrap());
            }
        }
        let img = synth_corpus(1, 16, 4).unwrap().remove(0);
        let mask = Tensor::from_vec(
            (0..256)
                .map(|i| {
                    let (y, x) = (i / 16, i % 16);
                    f32::from(u8::from((5..11).contains(&y) && (4..12).contains(&x)))
                })
                .collect(),
            &[1, 1, 16, 16],
        )
        .unwrap();
        let edge = make_edge_mask(&CannyParams::default().detect(&img).unwrap());
        EndToEnd {
            g,
            d: Discriminator::new(&cfg, Rng::new(2)).unwrap(),
            fx: FeatureExtractor::new(3).unwrap(),
            gt: stack_images(&[img]).unwrap(),
            mask,
            edge: stack_edge_masks(&[edge]).unwrap(),
        }
    }

    fn objective(&self, gt: &Tensor) -> Tensor {
        let out = self
            .g
            .forward(&prepare_input(gt, &self.mask).unwrap())
            .unwrap()
            .image;
        let x = LossInputs {
            out: &out,
            gt,
            mask: &self.mask,
            edge_mask: &self.edge,
        };
        generator_objective(
            &x,
            &self.fx,
            &self.d,
            &LossWeights::default(),
            HsvMode::HueSaturation,
            HueDistance::Plain,
        )
        .unwrap()
        .objective
    }

    /// Both directional checks over every variable whose name starts with
    /// `prefix`.
    pub fn group(&self, prefix: &str, seed: u64) -> Vec<Measured> {
        let vars: Vec<(Var, Tensor)> = self
            .g
            .vars
            .iter()
            .filter(|(n, _)| n.starts_with(prefix))
            .map(|(_, v)| (v.clone(), v.frozen()))
            .collect();
        assert!(!vars.is_empty(), "no variables under {prefix}");
        let sizes: Vec<usize> = vars.iter().map(|(_, t)| t.numel()).collect();

        self.g.vars.zero_grad();
        self.objective(&self.gt).backward().unwrap();
        let grad: Vec<f64> = vars
            .iter()
            .zip(&sizes)
            .flat_map(|((v, _), &n)| v.get().grad().unwrap_or_else(|| vec![0.0; n]))
            .map(f64::from)
            .collect();
        let at = |v: &[f64], step: f32| {
            let mut offset = 0;
            for ((var, t), &n) in vars.iter().zip(&sizes) {
                var.set(shifted(t, &v[offset..offset + n], step));
                offset += n;
            }
            let l = f64::from(self.objective(&self.gt).item().unwrap());
            for (var, t) in &vars {
                var.set(t.clone());
            }
            l
        };
        both_directions(&grad, seed, prefix, at)
    }

    /// Both directional checks on the ground-truth image.
    pub fn input(&self) -> Vec<Measured> {
        let gt = self.gt.detach().requires_grad_();
        self.objective(&gt).backward().unwrap();
        let grad: Vec<f64> = gt.grad().unwrap().into_iter().map(f64::from).collect();
        let at = |v: &[f64], step: f32| {
            f64::from(self.objective(&shifted(&self.gt, v, step)).item().unwrap())
        };
        both_directions(&grad, 99, "input", at)
    }
}

fn both_directions(
    grad: &[f64],
    seed: u64,
    name: &str,
    at: impl Fn(&[f64], f32) -> f64,
) -> Vec<Measured> {
    let norm = dot(grad, grad).sqrt();
    assert!(norm > 0.0, "{name}: zero gradient");
    [
        ("gradient", unit(grad.to_vec())),
        ("random", random_unit(grad.len(), seed)),
    ]
    .into_iter()
    .map(|(kind, v)| {
        let analytic = dot(grad, &v);
        let scale = if kind == "gradient" { analytic } else { norm };
        let err = |e: f32| {
            let numeric = (at(&v, e) - at(&v, -e)) / (2.0 * f64::from(e));
            (analytic - numeric).abs() / scale.max(1e-4)
        };
        // A step that straddles a ReLU kink shows up as a miss at the full
        // step that vanishes at an eighth of it.
        let full = err(E2E_EPS);
        let (error, short_step) = if full < E2E_TOL {
            (full, false)
        } else {
            (err(E2E_EPS / 8.0), true)
        };
        Measured {
            what: format!("{name} along {kind}"),
            error,
            short_step,
        }
    })
    .collect()
}
