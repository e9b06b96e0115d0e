//! The inpainting generator and the patch discriminator.
//!
//! ```text
//! [I_m, M] ─ encoder (3 × stride-2) ─┬─ global: 4 transformer blocks ─┐
//!                                    └─ local:  RRDB units ───────────┴─ concat ─ decoder (3 × up) ─ sigmoid
//! ```
//! Joint attention: the attention of tap block `a` mixes the local features
//! entering the last RRDB and is added to the input of the last global block;
//! the attention of tap block `b` mixes the same local features and is added
//! to the input of the last RRDB.

mod checkpoint;
mod discriminator;
mod generator;
mod joint;
mod rrdb;

pub use checkpoint::{
    f32s_to_u64, u64_to_f32s, Checkpoint, Entry, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use discriminator::Discriminator;
pub use generator::{prepare_input, Generator, GeneratorOutput};
pub use joint::joint_attention_mix;
pub use rrdb::{Rdb, Rrdb};

use stripepaint_tensor::VarMap;

use crate::attention::BlockConfig;
use crate::error::{Error, Result};

/// Hyperparameters of the generator and discriminator.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub input_size: usize,
    /// Output channels of the three stride-2 encoder stages.
    pub encoder_channels: [usize; 3],
    /// Per global block: heads, stripe width and attention repeats.
    pub heads: Vec<usize>,
    pub stripe_widths: Vec<usize>,
    pub repeats: Vec<usize>,
    pub mlp_ratio: usize,
    pub rrdb_units: usize,
    pub rdbs_per_rrdb: usize,
    pub rdb_growth: usize,
    pub residual_scale: f32,
    /// Output channels of the three upsampling stages.
    pub decoder_channels: [usize; 3],
    /// 1-based global block indices whose attention feeds joint attention;
    /// empty disables it.
    pub joint_taps: Vec<usize>,
    /// Redesigned global blocks: a parallel full-attention path beside the
    /// stripe attention and LePE applied at the end of the block. When off,
    /// blocks use stripe attention alone with LePE inside each sub-layer.
    pub redesigned_block: bool,
    pub disc_channels: [usize; 4],
}

impl Default for ModelConfig {
    /// The full-size schedule for 256×256 inputs.
    fn default() -> Self {
        ModelConfig {
            input_size: 256,
            encoder_channels: [64, 128, 256],
            heads: vec![2, 4, 8, 16],
            stripe_widths: vec![4, 8, 16, 32],
            repeats: vec![2, 2, 2, 2],
            mlp_ratio: 4,
            rrdb_units: 2,
            rdbs_per_rrdb: 3,
            rdb_growth: 64,
            residual_scale: 0.2,
            decoder_channels: [128, 64, 32],
            joint_taps: vec![2, 4],
            redesigned_block: true,
            disc_channels: [64, 128, 256, 512],
        }
    }
}

impl ModelConfig {
    /// 64×64 inputs: features at 8×8, stripe widths keep the same ratio to
    /// the feature side as the full-size schedule.
    pub fn desk() -> Self {
        ModelConfig {
            input_size: 64,
            stripe_widths: vec![1, 2, 4, 8],
            ..Self::default()
        }
    }

    /// A very small network for gradient checks and fast tests: 16×16
    /// inputs, 2×2 features.
    pub fn tiny() -> Self {
        ModelConfig {
            input_size: 16,
            encoder_channels: [4, 6, 8],
            heads: vec![2, 2, 2, 2],
            stripe_widths: vec![1, 1, 1, 2],
            repeats: vec![1, 2, 1, 1],
            mlp_ratio: 2,
            rrdb_units: 2,
            rdbs_per_rrdb: 1,
            rdb_growth: 2,
            residual_scale: 0.2,
            decoder_channels: [6, 4, 4],
            joint_taps: vec![2, 4],
            redesigned_block: true,
            disc_channels: [4, 4, 8, 8],
        }
    }

    pub fn feature_side(&self) -> usize {
        self.input_size / 8
    }

    pub fn branch_channels(&self) -> (usize, usize) {
        let c = self.encoder_channels[2];
        (c / 2, c - c / 2)
    }

    pub fn block_configs(&self) -> Vec<BlockConfig> {
        let side = self.feature_side();
        let (global, _) = self.branch_channels();
        (0..self.heads.len())
            .map(|i| {
                let mut cfg = BlockConfig::new(
                    self.heads[i],
                    self.stripe_widths[i],
                    global,
                    self.repeats[i],
                    self.stripe_widths[i] == side,
                );
                cfg.mlp_ratio = self.mlp_ratio;
                cfg.redesigned = self.redesigned_block;
                cfg.dual_attention = self.redesigned_block;
                cfg
            })
            .collect()
    }

    /// Patch grid side of the discriminator output.
    pub fn patch_side(&self) -> usize {
        self.input_size / 16
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || !self.input_size.is_multiple_of(16) {
            return Err(Error::Config(format!(
                "input size {} must be a positive multiple of 16",
                self.input_size
            )));
        }
        let n = self.heads.len();
        if n == 0 || self.stripe_widths.len() != n || self.repeats.len() != n {
            return Err(Error::Config(
                "heads, stripe widths and repeats need one entry per global block".into(),
            ));
        }
        if self.encoder_channels.contains(&0)
            || self.decoder_channels.contains(&0)
            || self.disc_channels.contains(&0)
        {
            return Err(Error::Config("channel counts must be positive".into()));
        }
        if self.encoder_channels[2] < 2 {
            return Err(Error::Config(
                "encoder output must split into two branches".into(),
            ));
        }
        if self.rrdb_units == 0 || self.rdbs_per_rrdb == 0 || self.rdb_growth == 0 {
            return Err(Error::Config(
                "the local branch needs at least one RRDB with one RDB".into(),
            ));
        }
        if !(self.residual_scale.is_finite()) {
            return Err(Error::Config("residual scale must be finite".into()));
        }
        let side = self.feature_side();
        for (i, cfg) in self.block_configs().iter().enumerate() {
            cfg.validate(side, side)
                .map_err(|e| Error::Config(format!("global block {}: {e}", i + 1)))?;
        }
        match self.joint_taps.as_slice() {
            [] => {}
            &[a, b] => {
                if a == 0 || a >= n || b <= a || b > n {
                    return Err(Error::Config(format!(
                        "joint taps ({a}, {b}) must satisfy 1 <= a < b <= {n} with a before the last block"
                    )));
                }
                let (_, local) = self.branch_channels();
                for tap in [a, b] {
                    let cfg = &self.block_configs()[tap - 1];
                    let heads = if cfg.is_full_attention {
                        cfg.heads
                    } else {
                        cfg.heads / 2
                    };
                    if local % heads != 0 {
                        return Err(Error::Config(format!(
                            "{local} local channels cannot be split into the {heads} heads of tap block {tap}"
                        )));
                    }
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "joint taps need two blocks, got {other:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Total number of scalar parameters.
pub fn count_parameters(vars: &VarMap) -> usize {
    vars.num_elements()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        ModelConfig::default().validate().unwrap();
        ModelConfig::desk().validate().unwrap();
        ModelConfig::tiny().validate().unwrap();
    }

    #[test]
    fn schedule_marks_last_block_full() {
        let blocks = ModelConfig::default().block_configs();
        assert_eq!(
            blocks
                .iter()
                .map(|b| b.is_full_attention)
                .collect::<Vec<_>>(),
            [false, false, false, true]
        );
        assert_eq!(blocks[0].channels, 128);
        assert_eq!(ModelConfig::default().feature_side(), 32);
    }

    #[test]
    fn invalid_configs() {
        let bad_taps = ModelConfig {
            joint_taps: vec![4, 4],
            ..ModelConfig::desk()
        };
        assert!(bad_taps.validate().is_err());
        let bad_size = ModelConfig {
            input_size: 72,
            ..ModelConfig::desk()
        };
        assert!(bad_size.validate().is_err());
        let bad_sw = ModelConfig {
            stripe_widths: vec![3, 2, 4, 8],
            ..ModelConfig::desk()
        };
        assert!(bad_sw.validate().is_err());
        let no_taps = ModelConfig {
            joint_taps: vec![],
            ..ModelConfig::desk()
        };
        assert!(no_taps.validate().is_ok());
    }

    #[test]
    fn empty_parameter_set_counts_zero() {
        assert_eq!(count_parameters(&VarMap::new()), 0);
    }
}
