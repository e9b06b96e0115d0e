//! Stripe-window multi-head self-attention, locally-enhanced positional
//! encoding and the transformer block of the global branch.
//!
//! Attention runs on channels-last tokens (`N×(H·W)×C`, row-major positions).
//! A horizontal stripe of width `sw` covers `sw` full rows; a vertical one
//! covers `sw` full columns. Inside a block the channels are halved: the
//! first half attends within horizontal stripes, the second within vertical
//! ones, each with `heads / 2` heads. A full-attention block uses all heads
//! over all tokens.

mod block;
mod mhsa;
mod stripes;

pub use block::{CswinBlock, Mlp};
pub use mhsa::{full_mhsa, lepe, sw_mhsa, Attention, AttentionOutput};
pub use stripes::{stripe_merge, stripe_partition, stripes_to_tokens, tokens_to_stripes};

use stripepaint_tensor::Tensor;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// Stripe geometry over an `H×W` feature map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StripeSpec {
    sw: usize,
    orientation: Orientation,
    height: usize,
    width: usize,
}

impl StripeSpec {
    pub fn new(sw: usize, orientation: Orientation, height: usize, width: usize) -> Result<Self> {
        let side = match orientation {
            Orientation::Horizontal => height,
            Orientation::Vertical => width,
        };
        if sw == 0 || height == 0 || width == 0 || side % sw != 0 {
            return Err(Error::Size(format!(
                "stripe width {sw} does not divide the {orientation:?} side {side} of a {height}x{width} map"
            )));
        }
        Ok(StripeSpec {
            sw,
            orientation,
            height,
            width,
        })
    }

    /// The whole map as one horizontal stripe, in row-major token order.
    pub fn whole(height: usize, width: usize) -> Self {
        StripeSpec {
            sw: height,
            orientation: Orientation::Horizontal,
            height,
            width,
        }
    }

    pub fn sw(&self) -> usize {
        self.sw
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of stripes per sample.
    pub fn stripes(&self) -> usize {
        match self.orientation {
            Orientation::Horizontal => self.height / self.sw,
            Orientation::Vertical => self.width / self.sw,
        }
    }

    /// Tokens per stripe.
    pub fn tokens(&self) -> usize {
        match self.orientation {
            Orientation::Horizontal => self.sw * self.width,
            Orientation::Vertical => self.sw * self.height,
        }
    }

    /// Rows and columns of one stripe's 2-D token layout.
    pub fn layout(&self) -> (usize, usize) {
        match self.orientation {
            Orientation::Horizontal => (self.sw, self.width),
            Orientation::Vertical => (self.height, self.sw),
        }
    }
}

/// Hyperparameters of one transformer block of the global branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockConfig {
    pub heads: usize,
    pub sw: usize,
    pub channels: usize,
    /// Number of stacked attention sub-layers (independent parameters).
    pub repeats: usize,
    pub is_full_attention: bool,
    /// Feed-forward hidden width as a multiple of `channels`.
    pub mlp_ratio: usize,
    /// LePE summed in after the feed-forward (true) or inside each
    /// attention sub-layer before its projection (false).
    pub redesigned: bool,
    /// Adds a parallel full-attention branch to every attention sub-layer.
    pub dual_attention: bool,
}

impl BlockConfig {
    pub fn new(
        heads: usize,
        sw: usize,
        channels: usize,
        repeats: usize,
        is_full_attention: bool,
    ) -> Self {
        BlockConfig {
            heads,
            sw,
            channels,
            repeats,
            is_full_attention,
            mlp_ratio: 4,
            redesigned: true,
            dual_attention: false,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.channels / self.heads
    }

    /// Checks the channel/head arithmetic and the stripe geometry for an
    /// `h×w` feature map.
    pub fn validate(&self, h: usize, w: usize) -> Result<()> {
        if self.heads == 0 || self.channels == 0 || !self.channels.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "{} channels cannot be split into {} heads",
                self.channels, self.heads
            )));
        }
        if self.repeats == 0 || self.mlp_ratio == 0 {
            return Err(Error::Config(
                "repeats and mlp_ratio must be at least 1".into(),
            ));
        }
        let full_side = self.sw == h && self.sw == w;
        if self.is_full_attention != full_side {
            return Err(Error::Config(format!(
                "is_full_attention = {} but sw = {} on a {h}x{w} map",
                self.is_full_attention, self.sw
            )));
        }
        if !self.is_full_attention {
            if !self.heads.is_multiple_of(2) {
                return Err(Error::Config(format!(
                    "{} heads cannot be split into horizontal and vertical halves",
                    self.heads
                )));
            }
            StripeSpec::new(self.sw, Orientation::Horizontal, h, w)?;
            StripeSpec::new(self.sw, Orientation::Vertical, h, w)?;
        }
        Ok(())
    }
}

/// Attention probabilities of one head group: `(N·S)×heads×T×T`, where
/// stripe `s` of sample `n` sits at batch index `n·S + s`.
#[derive(Clone, Debug)]
pub struct AttnGroup {
    pub spec: StripeSpec,
    pub heads: usize,
    pub probs: Tensor,
}

/// The attention maps of one attention sub-layer, in channel order
/// (horizontal half first).
#[derive(Clone, Debug)]
pub struct AttnRecord {
    pub batch: usize,
    pub groups: Vec<AttnGroup>,
}

impl AttnRecord {
    /// The group used for mixing into the convolutional branch: the only
    /// group of a full-attention block, or the horizontal half otherwise.
    pub fn mix_group(&self) -> &AttnGroup {
        &self.groups[0]
    }

    /// Largest `|row sum − 1|` over every attention row.
    pub fn max_row_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for g in &self.groups {
            let t = g.spec.tokens();
            for row in g.probs.data().chunks(t) {
                let s: f64 = row.iter().map(|&v| f64::from(v)).sum();
                worst = worst.max((s - 1.0).abs());
            }
        }
        worst
    }
}

/// Multiply-add counts of one attention evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlopCount {
    /// `Q·Kᵀ` products.
    pub score: u64,
    /// `P·V` products.
    pub apply: u64,
}

impl FlopCount {
    pub fn total(&self) -> u64 {
        self.score + self.apply
    }
}

/// Closed-form multiply-adds for the attention core of one sub-layer on an
/// `h×w` map. Every token of the horizontal half attends to `sw·w` tokens
/// over `C/2` channels, every token of the vertical half to `sw·h`; full
/// attention attends to all `h·w` tokens over `C` channels.
pub fn flop_count(cfg: &BlockConfig, h: usize, w: usize) -> FlopCount {
    let tokens = (h * w) as u64;
    let c = cfg.channels as u64;
    let per_token = if cfg.is_full_attention {
        tokens * c
    } else {
        let half = c / 2;
        (cfg.sw * w) as u64 * half + (cfg.sw * h) as u64 * (c - half)
    };
    let score = tokens * per_token;
    FlopCount {
        score,
        apply: score,
    }
}
