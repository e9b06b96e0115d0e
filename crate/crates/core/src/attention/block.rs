use stripepaint_tensor::Tensor;

use super::mhsa::Attention;
use super::{AttnRecord, BlockConfig};
use crate::error::{Error, Result};
use crate::nn::{child, map_to_tokens, tokens_to_map, Builder, LayerNorm, Linear};

/// Two linear maps with GELU in between.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub fc1: Linear,
    pub fc2: Linear,
}

impl Mlp {
    pub fn new(b: &mut Builder, prefix: &str, channels: usize, hidden: usize) -> Result<Self> {
        Ok(Mlp {
            fc1: Linear::new(b, &child(prefix, "fc1"), channels, hidden)?,
            fc2: Linear::new(b, &child(prefix, "fc2"), hidden, channels)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.fc2.forward(&self.fc1.forward(x)?.gelu()?)
    }
}

/// One attention sub-layer: pre-norm, attention, output projection, and
/// optionally a parallel full-attention branch.
#[derive(Clone, Debug)]
struct Repeat {
    norm: LayerNorm,
    attn: Attention,
    proj: Linear,
    full_branch: Option<(Attention, Linear)>,
}

/// Transformer block of the global branch.
///
/// With the redesigned wiring every attention sub-layer adds its projected
/// attention output to the residual stream; the feed-forward follows; the
/// LePE terms of all sub-layers are added last. With the original wiring each
/// sub-layer projects `attention + LePE` and there is no trailing term.
#[derive(Clone, Debug)]
pub struct CswinBlock {
    cfg: BlockConfig,
    repeats: Vec<Repeat>,
    norm: LayerNorm,
    pub mlp: Mlp,
}

impl CswinBlock {
    pub fn new(b: &mut Builder, prefix: &str, cfg: BlockConfig) -> Result<Self> {
        let c = cfg.channels;
        if cfg.repeats == 0 {
            return Err(Error::Config(
                "a block needs at least one attention repeat".into(),
            ));
        }
        let mut repeats = Vec::with_capacity(cfg.repeats);
        for r in 0..cfg.repeats {
            let p = child(prefix, &format!("attn{r}"));
            let full_branch = if cfg.dual_attention && !cfg.is_full_attention {
                Some((
                    Attention::new(b, &child(&p, "full"), c)?,
                    Linear::new(b, &child(&p, "full_proj"), c, c)?,
                ))
            } else {
                None
            };
            repeats.push(Repeat {
                norm: LayerNorm::new(b, &child(&p, "norm"), c)?,
                attn: Attention::new(b, &p, c)?,
                proj: Linear::new(b, &child(&p, "proj"), c, c)?,
                full_branch,
            });
        }
        Ok(CswinBlock {
            cfg,
            repeats,
            norm: LayerNorm::new(b, &child(prefix, "mlp_norm"), c)?,
            mlp: Mlp::new(b, &child(prefix, "mlp"), c, c * cfg.mlp_ratio)?,
        })
    }

    pub fn config(&self) -> &BlockConfig {
        &self.cfg
    }

    /// Forward on `N×(H·W)×C` tokens; returns the new tokens and the last
    /// repeat's attention maps.
    pub fn forward_tokens(&self, x: &Tensor, h: usize, w: usize) -> Result<(Tensor, AttnRecord)> {
        self.cfg.validate(h, w)?;
        let mut x = x.clone();
        let mut lepe_sum: Option<Tensor> = None;
        let mut record = None;
        let mut add_lepe = |t: Tensor| -> Result<()> {
            lepe_sum = Some(match lepe_sum.take() {
                Some(s) => s.add(&t)?,
                None => t,
            });
            Ok(())
        };
        for rep in &self.repeats {
            let y = rep.norm.forward(&x)?;
            let out = rep
                .attn
                .forward_tokens(&y, h, w, &self.cfg, self.cfg.is_full_attention)?;
            let mut delta = if self.cfg.redesigned {
                add_lepe(out.lepe)?;
                rep.proj.forward(&out.attended)?
            } else {
                rep.proj.forward(&out.attended.add(&out.lepe)?)?
            };
            if let Some((fa, fp)) = &rep.full_branch {
                let f = fa.forward_tokens(&y, h, w, &self.cfg, true)?;
                let branch = if self.cfg.redesigned {
                    add_lepe(f.lepe)?;
                    fp.forward(&f.attended)?
                } else {
                    fp.forward(&f.attended.add(&f.lepe)?)?
                };
                delta = delta.add(&branch)?;
            }
            x = x.add(&delta)?;
            record = Some(out.record);
        }
        x = x.add(&self.mlp.forward(&self.norm.forward(&x)?)?)?;
        if let Some(l) = lepe_sum {
            x = x.add(&l)?;
        }
        Ok((x, record.expect("at least one repeat")))
    }

    /// Forward on an `N×C×H×W` map.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, AttnRecord)> {
        let d = x.dims().to_vec();
        if d.len() != 4 {
            return Err(Error::Size(format!("expected an N×C×H×W map, got {d:?}")));
        }
        let (y, rec) = self.forward_tokens(&map_to_tokens(x)?, d[2], d[3])?;
        Ok((tokens_to_map(&y, d[2], d[3])?, rec))
    }
}
