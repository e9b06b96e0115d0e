use stripepaint_tensor::{Tensor, Var};

use super::stripes::{stripes_to_tokens, tokens_to_stripes};
use super::{AttnGroup, AttnRecord, BlockConfig, Orientation, StripeSpec};
use crate::error::{Error, Result};
use crate::nn::{child, map_to_tokens, tokens_to_map, Builder, Linear};

/// Q/K/V projection and LePE parameters of one attention sub-layer.
///
/// The LePE kernel is depthwise 3×3 over all `C` channels; stripe attention
/// applies its first half to the horizontal group and its second half to the
/// vertical group, so the same parameters serve both attention modes.
#[derive(Clone, Debug)]
pub struct Attention {
    pub qkv: Linear,
    pub lepe_weight: Var,
    pub lepe_bias: Var,
    channels: usize,
}

/// Attention result split into its two additive parts, both `N×(H·W)×C`.
#[derive(Clone, Debug)]
pub struct AttentionOutput {
    /// `softmax(QKᵀ/√d)·V`, heads re-concatenated.
    pub attended: Tensor,
    /// LePE of `V`.
    pub lepe: Tensor,
    pub record: AttnRecord,
}

impl Attention {
    pub fn new(b: &mut Builder, prefix: &str, channels: usize) -> Result<Self> {
        Ok(Attention {
            qkv: Linear::new(b, &child(prefix, "qkv"), channels, 3 * channels)?,
            lepe_weight: b.normal(
                &child(prefix, "lepe.weight"),
                &[channels, 1, 3, 3],
                1.0 / 3.0,
            )?,
            lepe_bias: b.constant(&child(prefix, "lepe.bias"), &[channels], 0.0)?,
            channels,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Runs attention on `N×(H·W)×C` tokens of an `h×w` map: stripe
    /// attention on two channel halves, or full attention when `full`.
    pub fn forward_tokens(
        &self,
        x: &Tensor,
        h: usize,
        w: usize,
        cfg: &BlockConfig,
        full: bool,
    ) -> Result<AttentionOutput> {
        let c = self.channels;
        if cfg.channels != c || !c.is_multiple_of(cfg.heads) {
            return Err(Error::Config(format!(
                "attention over {c} channels cannot use {} channels / {} heads",
                cfg.channels, cfg.heads
            )));
        }
        let n = x.dims()[0];
        let qkv = self.qkv.forward(x)?;
        let parts = qkv.split(2, &[c, c, c])?;
        let groups: Vec<(StripeSpec, usize, usize, usize)> = if full {
            vec![(StripeSpec::whole(h, w), 0, c, cfg.heads)]
        } else {
            if !cfg.heads.is_multiple_of(2) {
                return Err(Error::Config(format!(
                    "{} heads cannot be halved",
                    cfg.heads
                )));
            }
            let half = c / 2;
            vec![
                (
                    StripeSpec::new(cfg.sw, Orientation::Horizontal, h, w)?,
                    0,
                    half,
                    cfg.heads / 2,
                ),
                (
                    StripeSpec::new(cfg.sw, Orientation::Vertical, h, w)?,
                    half,
                    c - half,
                    cfg.heads / 2,
                ),
            ]
        };
        let head_dim = cfg.head_dim();
        let (weight, bias) = (self.lepe_weight.get(), self.lepe_bias.get());
        let mut outs = Vec::with_capacity(groups.len());
        let mut lepes = Vec::with_capacity(groups.len());
        let mut record = AttnRecord {
            batch: n,
            groups: Vec::with_capacity(groups.len()),
        };
        for (spec, c0, cg, heads) in groups {
            let pick = |t: &Tensor| -> Result<Tensor> {
                let t = if cg == c {
                    t.clone()
                } else {
                    t.narrow(2, c0, cg)?
                };
                tokens_to_stripes(&t, &spec)
            };
            let (q, k, v) = (pick(&parts[0])?, pick(&parts[1])?, pick(&parts[2])?);
            let (out, probs) = attend(&q, &k, &v, heads, head_dim)?;
            outs.push(stripes_to_tokens(&out, &spec)?);
            let (wg, bg) = if cg == c {
                (weight.clone(), bias.clone())
            } else {
                (weight.narrow(0, c0, cg)?, bias.narrow(0, c0, cg)?)
            };
            lepes.push(stripes_to_tokens(&lepe(&v, &spec, &wg, Some(&bg))?, &spec)?);
            record.groups.push(AttnGroup { spec, heads, probs });
        }
        Ok(AttentionOutput {
            attended: concat_channels(outs)?,
            lepe: concat_channels(lepes)?,
            record,
        })
    }
}

fn concat_channels(mut parts: Vec<Tensor>) -> Result<Tensor> {
    if parts.len() == 1 {
        return Ok(parts.pop().expect("one part"));
    }
    Ok(Tensor::concat(&parts, 2)?)
}

/// Scaled dot-product attention on `B×T×(heads·d)` blocks. Returns the
/// output in the same layout and the probabilities as `B×heads×T×T`.
fn attend(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    heads: usize,
    head_dim: usize,
) -> Result<(Tensor, Tensor)> {
    let d = q.dims().to_vec();
    let (b, t, cg) = (d[0], d[1], d[2]);
    if heads * head_dim != cg {
        return Err(Error::Config(format!(
            "{cg} channels do not split into {heads} heads of {head_dim}"
        )));
    }
    let split = |x: &Tensor| -> Result<Tensor> {
        Ok(x.reshape(&[b, t, heads, head_dim])?
            .permute(&[0, 2, 1, 3])?)
    };
    let qh = split(q)?.scale(1.0 / (head_dim as f32).sqrt())?;
    let kh = split(k)?;
    let vh = split(v)?;
    let probs = qh.matmul(&kh.transpose_last()?)?.softmax(3)?;
    let out = probs
        .matmul(&vh)?
        .permute(&[0, 2, 1, 3])?
        .reshape(&[b, t, cg])?;
    Ok((out, probs))
}

/// Locally-enhanced positional encoding: a depthwise 3×3 convolution (zero
/// padding) over the 2-D layout of each stripe block of `v` (`B×T×C`).
/// Returns the encoding alone, to be added to the attention output.
pub fn lepe(
    v: &Tensor,
    spec: &StripeSpec,
    weight: &Tensor,
    bias: Option<&Tensor>,
) -> Result<Tensor> {
    let d = v.dims().to_vec();
    let (rows, cols) = spec.layout();
    if d.len() != 3 || d[1] != rows * cols {
        return Err(Error::Size(format!(
            "values {d:?} do not fit a {rows}x{cols} stripe layout"
        )));
    }
    let (b, c) = (d[0], d[2]);
    if weight.dims() != [c, 1, 3, 3] {
        return Err(Error::Size(format!(
            "LePE kernel {:?} for {c} channels",
            weight.dims()
        )));
    }
    let planes = v.reshape(&[b, rows, cols, c])?.permute(&[0, 3, 1, 2])?;
    let enc = planes.conv2d(weight, bias, 1, 1, c)?;
    Ok(enc.permute(&[0, 2, 3, 1])?.reshape(&[b, rows * cols, c])?)
}

/// Stripe-window attention on an `N×C×H×W` map; returns
/// `attention + LePE(V)` as a map, plus the attention maps.
pub fn sw_mhsa(x: &Tensor, attn: &Attention, cfg: &BlockConfig) -> Result<(Tensor, AttnRecord)> {
    let (h, w) = map_side(x)?;
    let out = attn.forward_tokens(&map_to_tokens(x)?, h, w, cfg, false)?;
    Ok((
        tokens_to_map(&out.attended.add(&out.lepe)?, h, w)?,
        out.record,
    ))
}

/// Full multi-head attention on an `N×C×H×W` map with all heads over all
/// tokens; requires `cfg.is_full_attention`.
pub fn full_mhsa(x: &Tensor, attn: &Attention, cfg: &BlockConfig) -> Result<(Tensor, AttnRecord)> {
    if !cfg.is_full_attention {
        return Err(Error::Config(
            "full_mhsa needs a full-attention block config".into(),
        ));
    }
    let (h, w) = map_side(x)?;
    let out = attn.forward_tokens(&map_to_tokens(x)?, h, w, cfg, true)?;
    Ok((
        tokens_to_map(&out.attended.add(&out.lepe)?, h, w)?,
        out.record,
    ))
}

fn map_side(x: &Tensor) -> Result<(usize, usize)> {
    let d = x.dims();
    if d.len() != 4 {
        return Err(Error::Size(format!("expected an N×C×H×W map, got {d:?}")));
    }
    Ok((d[2], d[3]))
}
