//! Training objectives and the per-step loss report.

mod adversarial;
mod features;
mod hsv;

pub use adversarial::{
    discriminator_loss, generator_adversarial_loss, gradient_penalty, input_gradient, patch_mask,
    GradientPenalty, GP_PROBE_STEP, LOG_FLOOR,
};
pub use features::{gram, perceptual_loss, style_loss, FeatureExtractor, FEATURE_CHANNELS};
pub use hsv::{hsv_losses, rgb_to_hsv_tensor, HsvLosses, HueDistance, HUE_GRAD_MIN_CHROMA};

use stripepaint_tensor::Tensor;

use crate::error::{Error, Result};
use crate::model::Discriminator;

/// Loss weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub l1: f32,
    pub edge: f32,
    pub perc: f32,
    pub style: f32,
    pub total_hsv: f32,
    pub adv: f32,
    pub hsv: f32,
    pub hsv_edge: f32,
    pub gp: f32,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            l1: 10.0,
            edge: 10.0,
            perc: 0.1,
            style: 250.0,
            total_hsv: 1.0,
            adv: 10.0,
            hsv: 10.0,
            hsv_edge: 100.0,
            gp: 1e-3,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("l1", self.l1),
            ("edge", self.edge),
            ("perc", self.perc),
            ("style", self.style),
            ("total_hsv", self.total_hsv),
            ("adv", self.adv),
            ("hsv", self.hsv),
            ("hsv_edge", self.hsv_edge),
            ("gp", self.gp),
        ];
        match all.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            Some((name, v)) => Err(Error::Config(format!(
                "loss weight {name} = {v} must be finite and nonnegative"
            ))),
            None => Ok(()),
        }
    }
}

/// Which HSV channels the color loss compares, if any.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HsvMode {
    Off,
    HueSaturation,
    HueSaturationValue,
}

impl HsvMode {
    pub fn from_flags(use_hsv_loss: bool, include_v: bool) -> Self {
        match (use_hsv_loss, include_v) {
            (false, _) => HsvMode::Off,
            (true, false) => HsvMode::HueSaturation,
            (true, true) => HsvMode::HueSaturationValue,
        }
    }
}

pub(crate) fn same_shape(op: &str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Size(format!(
            "{op}: {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// Mean absolute error over all pixels and channels.
pub fn l1_loss(out: &Tensor, gt: &Tensor) -> Result<Tensor> {
    same_shape("l1_loss", out, gt)?;
    Ok(out.sub(gt)?.abs()?.mean()?)
}

/// `(1/n) Σ_pixels ‖M_edge ⊙ (out − gt)‖²` with the norm over RGB and `n`
/// the pixel count `N·H·W`. `edge_mask` is `N×1×H×W`.
pub fn edge_loss(out: &Tensor, gt: &Tensor, edge_mask: &Tensor) -> Result<Tensor> {
    same_shape("edge_loss", out, gt)?;
    let d = out.dims();
    let pixels = (d[0] * d[2] * d[3]) as f32;
    Ok(out
        .sub(gt)?
        .mul(edge_mask)?
        .square()?
        .sum()?
        .scale(1.0 / pixels)?)
}

/// Scalar HSV terms of one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HsvTerms {
    pub hsv: f32,
    pub hsv_edge: f32,
    pub total: f32,
}

/// Scalar values of every term of one step. `hsv` is `None` when the color
/// loss is disabled.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossTerms {
    pub l1: f32,
    pub edge: f32,
    pub perc: f32,
    pub style: f32,
    pub hsv: Option<HsvTerms>,
    pub d: f32,
    pub g: f32,
    pub gp: f32,
}

/// Named term values and their weighted total.
#[derive(Clone, Debug, PartialEq)]
pub struct LossReport {
    pub entries: Vec<(&'static str, f32)>,
    pub total: f32,
}

impl LossReport {
    pub fn get(&self, name: &str) -> Option<f32> {
        if name == "total" {
            return Some(self.total);
        }
        self.entries
            .iter()
            .find(|(n, _)| *n == name)
            .map(|&(_, v)| v)
    }

    /// `name=value` pairs joined by commas, ending with the total.
    pub fn to_log_line(&self) -> String {
        let mut parts: Vec<String> = self
            .entries
            .iter()
            .map(|(n, v)| format!("{n}={v}"))
            .collect();
        parts.push(format!("total={}", self.total));
        parts.join(",")
    }
}

/// Combines the terms into
/// `λ_L1·L1 + λ_edge·L_edge + λ_perc·L_perc + λ_style·L_style + λ_TotalHSV·L_TotalHSV + λ_adv·L_adv`
/// with `L_adv = L_D + L_G + λ_GP·L_GP`. A disabled color loss contributes
/// nothing and is left out of the report. Any non-finite term is an error
/// naming that term.
pub fn total_loss(terms: &LossTerms, w: &LossWeights) -> Result<LossReport> {
    let adv = f64::from(terms.d) + f64::from(terms.g) + f64::from(w.gp) * f64::from(terms.gp);
    let mut entries = vec![
        ("l1", terms.l1),
        ("edge", terms.edge),
        ("perc", terms.perc),
        ("style", terms.style),
    ];
    if let Some(h) = terms.hsv {
        entries.extend([
            ("hsv", h.hsv),
            ("hsv_edge", h.hsv_edge),
            ("total_hsv", h.total),
        ]);
    }
    entries.extend([
        ("d", terms.d),
        ("g", terms.g),
        ("gp", terms.gp),
        ("adv", adv as f32),
    ]);
    if let Some((name, _)) = entries.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite {
            term: name.to_string(),
        });
    }
    let weighted = [
        (w.l1, terms.l1),
        (w.edge, terms.edge),
        (w.perc, terms.perc),
        (w.style, terms.style),
        (w.total_hsv, terms.hsv.map_or(0.0, |h| h.total)),
    ];
    let total = weighted
        .iter()
        .map(|&(l, v)| f64::from(l) * f64::from(v))
        .sum::<f64>()
        + f64::from(w.adv) * adv;
    Ok(LossReport {
        entries,
        total: total as f32,
    })
}

/// Graph terms of the generator update.
#[derive(Clone, Debug)]
pub struct GeneratorObjective {
    /// The weighted sum of every term that depends on the generator.
    pub objective: Tensor,
    pub l1: Tensor,
    pub edge: Tensor,
    pub perc: Tensor,
    pub style: Tensor,
    pub hsv: Option<HsvLosses>,
    pub g: Tensor,
}

/// Inputs shared by the generator-side losses: `out`/`gt` are `N×3×H×W`,
/// `mask` and `edge_mask` are `N×1×H×W`.
pub struct LossInputs<'a> {
    pub out: &'a Tensor,
    pub gt: &'a Tensor,
    pub mask: &'a Tensor,
    pub edge_mask: &'a Tensor,
}

pub fn generator_objective(
    x: &LossInputs<'_>,
    fx: &FeatureExtractor,
    d: &Discriminator,
    w: &LossWeights,
    mode: HsvMode,
    hue: HueDistance,
) -> Result<GeneratorObjective> {
    let l1 = l1_loss(x.out, x.gt)?;
    let edge = edge_loss(x.out, x.gt, x.edge_mask)?;
    let perc = perceptual_loss(x.out, x.gt, x.mask, fx)?;
    let style = style_loss(x.out, x.gt, fx)?;
    let g = generator_adversarial_loss(d, x.out)?;
    let hsv = match mode {
        HsvMode::Off => None,
        m => Some(hsv_losses(
            x.out,
            x.gt,
            x.edge_mask,
            w.hsv,
            w.hsv_edge,
            m == HsvMode::HueSaturationValue,
            hue,
        )?),
    };
    let mut objective = l1
        .scale(w.l1)?
        .add(&edge.scale(w.edge)?)?
        .add(&perc.scale(w.perc)?)?
        .add(&style.scale(w.style)?)?
        .add(&g.scale(w.adv)?)?;
    if let Some(h) = &hsv {
        objective = objective.add(&h.total.scale(w.total_hsv)?)?;
    }
    Ok(GeneratorObjective {
        objective,
        l1,
        edge,
        perc,
        style,
        hsv,
        g,
    })
}

impl GeneratorObjective {
    /// Scalar values, with the discriminator-side terms filled in later.
    pub fn terms(&self) -> Result<LossTerms> {
        Ok(LossTerms {
            l1: self.l1.item()?,
            edge: self.edge.item()?,
            perc: self.perc.item()?,
            style: self.style.item()?,
            hsv: match &self.hsv {
                Some(h) => Some(HsvTerms {
                    hsv: h.hsv.item()?,
                    hsv_edge: h.hsv_edge.item()?,
                    total: h.total.item()?,
                }),
                None => None,
            },
            g: self.g.item()?,
            ..LossTerms::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use stripepaint_tensor::Rng;

    use super::*;

    #[test]
    fn default_weights() {
        let w = LossWeights::default();
        assert_eq!(
            [
                w.l1,
                w.edge,
                w.perc,
                w.style,
                w.total_hsv,
                w.adv,
                w.hsv,
                w.hsv_edge,
                w.gp
            ],
            [10.0, 10.0, 0.1, 250.0, 1.0, 10.0, 10.0, 100.0, 1e-3]
        );
        w.validate().unwrap();
        assert!(LossWeights { style: -1.0, ..w }.validate().is_err());
    }

    #[test]
    fn l1_constant_offset() {
        let a = Tensor::full(&[1, 3, 4, 4], 0.5).unwrap();
        let b = Tensor::full(&[1, 3, 4, 4], 0.6).unwrap();
        assert!((l1_loss(&a, &b).unwrap().item().unwrap() - 0.1).abs() < 1e-6);
        assert_eq!(l1_loss(&a, &a).unwrap().item().unwrap(), 0.0);
        assert!(l1_loss(&a, &Tensor::zeros(&[1, 3, 4, 5]).unwrap()).is_err());
    }

    #[test]
    fn edge_pixels_weigh_a_hundred_times_more() {
        let gt = Tensor::zeros(&[1, 3, 2, 2]).unwrap();
        let mut d = vec![0.0; 12];
        d[0] = 0.1;
        let out = Tensor::from_vec(d, &[1, 3, 2, 2]).unwrap();
        let plain = Tensor::from_vec(vec![1.0, 10.0, 1.0, 1.0], &[1, 1, 2, 2]).unwrap();
        let edged = Tensor::from_vec(vec![10.0, 1.0, 1.0, 1.0], &[1, 1, 2, 2]).unwrap();
        let a = edge_loss(&out, &gt, &plain).unwrap().item().unwrap();
        let b = edge_loss(&out, &gt, &edged).unwrap().item().unwrap();
        assert!((b / a - 100.0).abs() < 1e-3);
    }

    #[test]
    fn total_is_weighted_sum() {
        let w = LossWeights::default();
        let only_l1 = LossTerms {
            l1: 1.0,
            ..LossTerms::default()
        };
        assert_eq!(total_loss(&only_l1, &w).unwrap().total, 10.0);
        assert_eq!(total_loss(&LossTerms::default(), &w).unwrap().total, 0.0);

        let t = LossTerms {
            l1: 0.3,
            edge: 0.2,
            perc: 1.5,
            style: 0.001,
            hsv: Some(HsvTerms {
                hsv: 0.01,
                hsv_edge: 0.002,
                total: 0.3,
            }),
            d: 1.3,
            g: 0.7,
            gp: 4.0,
        };
        let r = total_loss(&t, &w).unwrap();
        let want = 10.0 * 0.3
            + 10.0 * 0.2
            + 0.1 * 1.5
            + 250.0 * 0.001
            + 0.3
            + 10.0 * (1.3 + 0.7 + 1e-3 * 4.0);
        assert!((f64::from(r.total) - want).abs() <= 1e-6 * want);
        assert_eq!(r.get("adv").unwrap(), (1.3f64 + 0.7 + 0.004) as f32);
    }

    #[test]
    fn non_finite_term_is_named() {
        let t = LossTerms {
            style: f32::NAN,
            ..LossTerms::default()
        };
        match total_loss(&t, &LossWeights::default()) {
            Err(Error::NonFinite { term }) => assert_eq!(term, "style"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn disabled_color_loss_is_absent() {
        let r = total_loss(&LossTerms::default(), &LossWeights::default()).unwrap();
        assert!(r.get("total_hsv").is_none());
        assert!(!r.to_log_line().contains("hsv"));
        assert!(r.to_log_line().ends_with("total=0"));
    }

    #[test]
    fn objective_matches_report() {
        use crate::model::ModelConfig;
        let mut rng = Rng::new(0);
        let out = Tensor::rand_uniform(&[1, 3, 16, 16], 0.0, 1.0, &mut rng).unwrap();
        let gt = Tensor::rand_uniform(&[1, 3, 16, 16], 0.0, 1.0, &mut rng).unwrap();
        let mask = Tensor::zeros(&[1, 1, 16, 16]).unwrap();
        let em = Tensor::full(&[1, 1, 16, 16], 1.0).unwrap();
        let fx = FeatureExtractor::new(0).unwrap();
        let d = Discriminator::new(&ModelConfig::tiny(), Rng::new(1)).unwrap();
        let w = LossWeights::default();
        let inputs = LossInputs {
            out: &out,
            gt: &gt,
            mask: &mask,
            edge_mask: &em,
        };
        let obj = generator_objective(
            &inputs,
            &fx,
            &d,
            &w,
            HsvMode::HueSaturation,
            HueDistance::Plain,
        )
        .unwrap();
        let report = total_loss(&obj.terms().unwrap(), &w).unwrap();
        let o = obj.objective.item().unwrap();
        assert!((o - report.total).abs() <= 1e-5 * o.abs());
    }
}
