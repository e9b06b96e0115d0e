use stripepaint_tensor::Tensor;

use crate::error::{Error, Result};

/// Below this chroma the hue derivative (∝ 1/chroma) is computed with the
/// chroma held at this floor. Hue is ill-conditioned near the gray axis and
/// the exact derivative would let a handful of almost-gray pixels dominate
/// the update. Forward values are exact.
pub const HUE_GRAD_MIN_CHROMA: f32 = 1e-2;

/// Per-pixel HSV transform and its Jacobian rows for one RGB triple.
struct PixelHsv {
    hsv: [f32; 3],
    /// `jac[k][c] = ∂hsv[k] / ∂rgb[c]`.
    jac: [[f32; 3]; 3],
}

fn pixel(rgb: [f32; 3]) -> PixelHsv {
    let (mut hi, mut lo) = (0, 0);
    for c in 1..3 {
        if rgb[c] > rgb[hi] {
            hi = c;
        }
        if rgb[c] < rgb[lo] {
            lo = c;
        }
    }
    let (max, min) = (rgb[hi], rgb[lo]);
    let chroma = max - min;
    let mut jac = [[0.0f32; 3]; 3];

    jac[2][hi] = 1.0;

    let s = if max > 0.0 {
        if chroma > 0.0 {
            // s = 1 − min/max
            jac[1][hi] += min / (max * max);
            jac[1][lo] -= 1.0 / max;
        }
        chroma / max
    } else {
        0.0
    };

    let h = if chroma > 0.0 {
        // h6 = offset + (rgb[a] − rgb[b]) / chroma for the sector of `hi`.
        let (a, b, offset) = match hi {
            0 => (1, 2, 0.0),
            1 => (2, 0, 2.0),
            _ => (0, 1, 4.0),
        };
        let num = rgb[a] - rgb[b];
        let mut h6 = offset + num / chroma;
        if h6 < 0.0 {
            h6 += 6.0;
        }
        let c = chroma.max(HUE_GRAD_MIN_CHROMA);
        let mut dnum = [0.0f32; 3];
        dnum[a] += 1.0;
        dnum[b] -= 1.0;
        let mut dc = [0.0f32; 3];
        dc[hi] += 1.0;
        dc[lo] -= 1.0;
        for k in 0..3 {
            jac[0][k] = (dnum[k] * c - num * dc[k]) / (c * c) / 6.0;
        }
        let h = h6 / 6.0;
        if h >= 1.0 {
            0.0
        } else {
            h
        }
    } else {
        0.0
    };
    PixelHsv {
        hsv: [h, s, max],
        jac,
    }
}

/// Differentiable RGB→HSV on an `N×3×H×W` tensor (hexcone model, all
/// channels in `[0, 1)`/`[0, 1]`). Hue is 0 for grays.
pub fn rgb_to_hsv_tensor(x: &Tensor) -> Result<Tensor> {
    let d = x.dims().to_vec();
    if d.len() != 4 || d[1] != 3 {
        return Err(Error::Size(format!("expected N×3×H×W, got {d:?}")));
    }
    let plane = d[2] * d[3];
    let src = x.data();
    let mut out = vec![0.0f32; src.len()];
    for n in 0..d[0] {
        let base = n * 3 * plane;
        for p in 0..plane {
            let rgb = [
                src[base + p],
                src[base + plane + p],
                src[base + 2 * plane + p],
            ];
            let hsv = pixel(rgb).hsv;
            for k in 0..3 {
                out[base + k * plane + p] = hsv[k];
            }
        }
    }
    Ok(Tensor::from_op(
        "rgb_to_hsv",
        out,
        d.clone(),
        vec![x.clone()],
        Box::new(move |g, _, inputs| {
            let src = inputs[0].data();
            let mut gx = vec![0.0f32; src.len()];
            for n in 0..d[0] {
                let base = n * 3 * plane;
                for p in 0..plane {
                    let rgb = [
                        src[base + p],
                        src[base + plane + p],
                        src[base + 2 * plane + p],
                    ];
                    let jac = pixel(rgb).jac;
                    for c in 0..3 {
                        gx[base + c * plane + p] =
                            (0..3).map(|k| g[base + k * plane + p] * jac[k][c]).sum();
                    }
                }
            }
            vec![Some(gx)]
        }),
    )?)
}

/// The three HSV objectives, as graph scalars.
#[derive(Clone, Debug)]
pub struct HsvLosses {
    pub hsv: Tensor,
    pub hsv_edge: Tensor,
    /// `λ_HSV·hsv + λ_HSVedge·hsv_edge`.
    pub total: Tensor,
}

/// Squared HSV differences per pixel, plain and edge-weighted, each divided
/// by the pixel count `N·H·W`. Only hue and saturation enter unless
/// `include_v` is set. Hue differences are taken literally, without
/// wrapping around the color circle.
/// How the hue channel difference is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HueDistance {
    /// `h_out − h_gt` on normalized hue, as written in the loss definition.
    /// Hues on opposite sides of red are nearly 1 apart.
    #[default]
    Plain,
    /// The difference wrapped into `[−0.5, 0.5]`, the shorter way round the
    /// hue circle.
    Circular,
}

impl std::str::FromStr for HueDistance {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(HueDistance::Plain),
            "circular" => Ok(HueDistance::Circular),
            _ => Err(crate::error::Error::Param(format!(
                "hue distance `{s}` (plain, circular)"
            ))),
        }
    }
}

impl std::fmt::Display for HueDistance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HueDistance::Plain => "plain",
            HueDistance::Circular => "circular",
        })
    }
}

/// Subtracts the nearest integer from the hue channel of an HSV difference.
/// The offset is piecewise constant, so it carries no gradient.
fn wrap_hue(diff: &Tensor) -> Result<Tensor> {
    let d = diff.dims();
    let plane = d[2] * d[3];
    let offset: Vec<f32> = diff
        .data()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if (i / plane).is_multiple_of(d[1]) {
                v.round()
            } else {
                0.0
            }
        })
        .collect();
    Ok(diff.sub(&Tensor::from_vec(offset, d)?)?)
}

pub fn hsv_losses(
    out: &Tensor,
    gt: &Tensor,
    edge_mask: &Tensor,
    lambda_hsv: f32,
    lambda_hsv_edge: f32,
    include_v: bool,
    hue: HueDistance,
) -> Result<HsvLosses> {
    super::same_shape("hsv_losses", out, gt)?;
    let d = out.dims();
    let pixels = (d[0] * d[2] * d[3]) as f32;
    let channels = if include_v { 3 } else { 2 };
    let diff = rgb_to_hsv_tensor(out)?
        .sub(&rgb_to_hsv_tensor(gt)?)?
        .narrow(1, 0, channels)?;
    let diff = match hue {
        HueDistance::Plain => diff,
        HueDistance::Circular => wrap_hue(&diff)?,
    };
    let hsv = diff.square()?.sum()?.scale(1.0 / pixels)?;
    let hsv_edge = diff.mul(edge_mask)?.square()?.sum()?.scale(1.0 / pixels)?;
    let total = hsv
        .scale(lambda_hsv)?
        .add(&hsv_edge.scale(lambda_hsv_edge)?)?;
    Ok(HsvLosses {
        hsv,
        hsv_edge,
        total,
    })
}

#[cfg(test)]
mod tests {
    use stripepaint_tensor::gradcheck::GradCheck;
    use stripepaint_tensor::Rng;

    use super::*;
    use crate::image_ops::{hsv_pixel_to_rgb, rgb_pixel_to_hsv};

    #[test]
    fn matches_scalar_conversion() {
        let mut rng = Rng::new(0);
        let x = Tensor::rand_uniform(&[2, 3, 4, 5], 0.0, 1.0, &mut rng).unwrap();
        let y = rgb_to_hsv_tensor(&x).unwrap();
        let (xs, ys) = (x.data(), y.data());
        for n in 0..2 {
            for p in 0..20 {
                let at = |c: usize| n * 60 + c * 20 + p;
                let want = rgb_pixel_to_hsv([xs[at(0)], xs[at(1)], xs[at(2)]]);
                for k in 0..3 {
                    assert!(
                        (ys[at(k)] - want[k]).abs() < 1e-6,
                        "{k}: {} vs {}",
                        ys[at(k)],
                        want[k]
                    );
                }
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        // Colors with a clear maximum and minimum, away from sector borders.
        let mut rng = Rng::new(1);
        let mut data = Vec::new();
        for _ in 0..12 {
            let mut v = [
                rng.uniform_range(0.1, 0.3),
                rng.uniform_range(0.4, 0.6),
                rng.uniform_range(0.7, 0.9),
            ];
            rng.shuffle(&mut v);
            data.extend_from_slice(&v);
        }
        // data is pixel-interleaved; lay it out as channel planes
        let planes: Vec<f32> = (0..3)
            .flat_map(|c| (0..12).map(move |p| (c, p)))
            .map(|(c, p)| data[p * 3 + c])
            .collect();
        let x = Tensor::from_vec(planes, &[1, 3, 3, 4])
            .unwrap()
            .requires_grad_();
        let report = GradCheck::default()
            .run(&[x], |xs| Ok(rgb_to_hsv_tensor(&xs[0])?))
            .unwrap();
        assert!(report.max_rel_error < 1e-3, "{report:?}");
    }

    #[test]
    fn identical_images_give_zero() {
        let x = Tensor::rand_uniform(&[1, 3, 4, 4], 0.0, 1.0, &mut Rng::new(2)).unwrap();
        let m = Tensor::full(&[1, 1, 4, 4], 1.0).unwrap();
        let l = hsv_losses(&x, &x, &m, 10.0, 100.0, false, HueDistance::Plain).unwrap();
        assert_eq!(l.hsv.item().unwrap(), 0.0);
        assert_eq!(l.hsv_edge.item().unwrap(), 0.0);
        assert_eq!(l.total.item().unwrap(), 0.0);
    }

    #[test]
    fn brightness_change_is_ignored_without_v() {
        let a = Tensor::from_vec(vec![0.2, 0.4, 0.6], &[1, 3, 1, 1]).unwrap();
        let b = Tensor::from_vec(vec![0.1, 0.2, 0.3], &[1, 3, 1, 1]).unwrap();
        let m = Tensor::full(&[1, 1, 1, 1], 10.0).unwrap();
        let without = hsv_losses(&a, &b, &m, 10.0, 100.0, false, HueDistance::Plain).unwrap();
        assert!(without.hsv.item().unwrap().abs() < 1e-12);
        let with = hsv_losses(&a, &b, &m, 10.0, 100.0, true, HueDistance::Plain).unwrap();
        assert!((with.hsv.item().unwrap() - 0.09).abs() < 1e-6);
    }

    #[test]
    fn circular_hue_takes_the_short_way() {
        // hue 0.95 against 0.05: plain difference 0.9, circular 0.1
        let a =
            Tensor::from_vec(hsv_pixel_to_rgb([0.95, 1.0, 1.0]).to_vec(), &[1, 3, 1, 1]).unwrap();
        let b =
            Tensor::from_vec(hsv_pixel_to_rgb([0.05, 1.0, 1.0]).to_vec(), &[1, 3, 1, 1]).unwrap();
        let m = Tensor::full(&[1, 1, 1, 1], 1.0).unwrap();
        let plain = hsv_losses(&a, &b, &m, 1.0, 1.0, false, HueDistance::Plain).unwrap();
        let circ = hsv_losses(&a, &b, &m, 1.0, 1.0, false, HueDistance::Circular).unwrap();
        assert!((plain.hsv.item().unwrap() - 0.81).abs() < 1e-4);
        assert!((circ.hsv.item().unwrap() - 0.01).abs() < 1e-4);
        let x = a.detach().requires_grad_();
        hsv_losses(&x, &b, &m, 1.0, 0.0, false, HueDistance::Circular)
            .unwrap()
            .total
            .backward()
            .unwrap();
        // moving toward red from magenta means lowering blue
        let g = x.grad().unwrap();
        assert!(g[2] > 0.0, "{g:?}");
    }

    #[test]
    fn gray_pixels_have_no_hue_gradient() {
        let x = Tensor::full(&[1, 3, 2, 2], 0.5).unwrap().requires_grad_();
        rgb_to_hsv_tensor(&x)
            .unwrap()
            .narrow(1, 0, 1)
            .unwrap()
            .sum()
            .unwrap()
            .backward()
            .unwrap();
        assert!(x.grad().unwrap().iter().all(|&g| g == 0.0));
    }
}
