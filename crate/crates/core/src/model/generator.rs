use stripepaint_tensor::{Rng, Tensor, VarMap};

use super::joint::joint_attention_mix;
use super::rrdb::Rrdb;
use super::ModelConfig;
use crate::attention::{AttnRecord, CswinBlock};
use crate::error::{Error, Result};
use crate::image_ops::{stack_images, stack_masks, Image, Mask};
use crate::nn::{child, Builder, Conv2d, ConvSpec, InstanceNorm};

/// Convolution followed by instance norm and ReLU. The convolution has no
/// bias since the norm would remove it.
#[derive(Clone, Debug)]
struct ConvNormRelu {
    conv: Conv2d,
    norm: InstanceNorm,
}

impl ConvNormRelu {
    fn new(b: &mut Builder, prefix: &str, spec: ConvSpec) -> Result<Self> {
        let outputs = spec.outputs;
        Ok(ConvNormRelu {
            conv: Conv2d::new(
                b,
                &child(prefix, "conv"),
                ConvSpec {
                    bias: false,
                    ..spec
                },
            )?,
            norm: InstanceNorm::new(b, &child(prefix, "norm"), outputs)?,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.norm.forward(&self.conv.forward(x)?)?.relu()?)
    }
}

/// Everything one generator evaluation produces.
#[derive(Clone, Debug)]
pub struct GeneratorOutput {
    /// `N×3×H×W` in `[0, 1]`.
    pub image: Tensor,
    /// Attention maps of the last sub-layer of each global block.
    pub records: Vec<AttnRecord>,
    pub global: Tensor,
    pub local: Tensor,
}

#[derive(Clone, Debug)]
pub struct Generator {
    cfg: ModelConfig,
    pub vars: VarMap,
    encoder: Vec<ConvNormRelu>,
    global: Vec<CswinBlock>,
    local: Vec<Rrdb>,
    decoder: Vec<ConvNormRelu>,
    to_rgb: Conv2d,
}

/// Builds the `N×4×H×W` generator input `[I ⊙ (1 − M), M]` from ground
/// truth `N×3×H×W` and mask `N×1×H×W` (1 = hole).
pub fn prepare_input(image: &Tensor, mask: &Tensor) -> Result<Tensor> {
    let (i, m) = (image.dims(), mask.dims());
    if i.len() != 4 || m.len() != 4 || i[1] != 3 || m[1] != 1 || i[0] != m[0] || i[2..] != m[2..] {
        return Err(Error::Size(format!(
            "image {i:?} and mask {m:?} do not pair up"
        )));
    }
    let known = image.mul(&mask.neg()?.add_scalar(1.0)?)?;
    Ok(Tensor::concat(&[known, mask.clone()], 1)?)
}

impl Generator {
    /// Builds a generator with weights drawn from `rng`.
    pub fn new(cfg: &ModelConfig, rng: Rng) -> Result<Self> {
        cfg.validate()?;
        let mut b = Builder::new(rng);
        let mut encoder = Vec::new();
        let mut inputs = 4;
        for (i, &c) in cfg.encoder_channels.iter().enumerate() {
            encoder.push(ConvNormRelu::new(
                &mut b,
                &format!("enc{i}"),
                ConvSpec::strided(inputs, c, 4, 2, 1),
            )?);
            inputs = c;
        }
        let (gc, lc) = cfg.branch_channels();
        let global = cfg
            .block_configs()
            .into_iter()
            .enumerate()
            .map(|(i, bc)| CswinBlock::new(&mut b, &format!("global{i}"), bc))
            .collect::<Result<Vec<_>>>()?;
        let local = (0..cfg.rrdb_units)
            .map(|i| {
                Rrdb::new(
                    &mut b,
                    &format!("local{i}"),
                    lc,
                    cfg.rdb_growth,
                    cfg.rdbs_per_rrdb,
                    cfg.residual_scale,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let mut decoder = Vec::new();
        let mut inputs = gc + lc;
        for (i, &c) in cfg.decoder_channels.iter().enumerate() {
            decoder.push(ConvNormRelu::new(
                &mut b,
                &format!("dec{i}"),
                ConvSpec::same(inputs, c, 3),
            )?);
            inputs = c;
        }
        let to_rgb = Conv2d::new(&mut b, "to_rgb", ConvSpec::same(inputs, 3, 3))?;
        Ok(Generator {
            cfg: cfg.clone(),
            vars: b.finish(),
            encoder,
            global,
            local,
            decoder,
            to_rgb,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// Forward on a prepared `N×4×H×W` input.
    pub fn forward(&self, input: &Tensor) -> Result<GeneratorOutput> {
        let d = input.dims();
        let s = self.cfg.input_size;
        if d.len() != 4 || d[1] != 4 || d[2] != s || d[3] != s {
            return Err(Error::Size(format!(
                "generator expects N×4×{s}×{s}, got {d:?}"
            )));
        }
        let mut x = input.clone();
        for stage in &self.encoder {
            x = stage.forward(&x)?;
        }
        let (gc, lc) = self.cfg.branch_channels();
        let parts = x.split(1, &[gc, lc])?;
        let (mut g, mut l) = (parts[0].clone(), parts[1].clone());

        let last_local = self.local.len() - 1;
        for unit in &self.local[..last_local] {
            l = unit.forward(&l)?;
        }
        let taps = match self.cfg.joint_taps.as_slice() {
            &[a, b] => Some((a - 1, b - 1)),
            _ => None,
        };
        let last_global = self.global.len() - 1;
        let mut records: Vec<AttnRecord> = Vec::with_capacity(self.global.len());
        for (i, block) in self.global.iter().enumerate() {
            if let (Some((a, _)), true) = (taps, i == last_global) {
                g = g.add(&joint_attention_mix(&records[a], &l)?)?;
            }
            let (out, rec) = block.forward(&g)?;
            g = out;
            records.push(rec);
        }
        if let Some((_, b)) = taps {
            l = l.add(&joint_attention_mix(&records[b], &l)?)?;
        }
        l = self.local[last_local].forward(&l)?;

        let mut y = Tensor::concat(&[g.clone(), l.clone()], 1)?;
        for stage in &self.decoder {
            y = stage.forward(&y.upsample_nearest(2)?)?;
        }
        let image = self.to_rgb.forward(&y)?.sigmoid()?;
        Ok(GeneratorOutput {
            image,
            records,
            global: g,
            local: l,
        })
    }

    /// Runs the generator on image/mask pairs; the returned images are the
    /// raw outputs, not composited with the known pixels.
    pub fn inpaint(
        &self,
        images: &[Image],
        masks: &[Mask],
    ) -> Result<(Vec<Image>, Vec<AttnRecord>)> {
        let input = prepare_input(&stack_images(images)?, &stack_masks(masks)?)?;
        let out = self.forward(&input)?;
        let images = (0..images.len())
            .map(|i| Image::from_tensor(&out.image, i))
            .collect::<Result<Vec<_>>>()?;
        Ok((images, out.records))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::count_parameters;

    #[test]
    fn output_shape_and_range() {
        let cfg = ModelConfig::tiny();
        let g = Generator::new(&cfg, Rng::new(0)).unwrap();
        let mut rng = Rng::new(1);
        let img = Tensor::rand_uniform(&[2, 3, 16, 16], 0.0, 1.0, &mut rng).unwrap();
        let mask = Tensor::zeros(&[2, 1, 16, 16]).unwrap();
        let out = g.forward(&prepare_input(&img, &mask).unwrap()).unwrap();
        assert_eq!(out.image.dims(), &[2, 3, 16, 16]);
        assert!(out.image.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(out.records.len(), 4);
    }

    #[test]
    fn input_zeroes_holes_and_appends_mask() {
        let img = Tensor::full(&[1, 3, 2, 2], 0.5).unwrap();
        let mask = Tensor::from_vec(vec![1.0, 0.0, 0.0, 1.0], &[1, 1, 2, 2]).unwrap();
        let x = prepare_input(&img, &mask).unwrap();
        assert_eq!(x.dims(), &[1, 4, 2, 2]);
        assert_eq!(&x.data()[..4], &[0.0, 0.5, 0.5, 0.0]);
        assert_eq!(&x.data()[12..], &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn full_size_parameter_count_is_in_range() {
        let g = Generator::new(&ModelConfig::default(), Rng::new(0)).unwrap();
        let n = count_parameters(&g.vars);
        assert!((4_000_000..=9_000_000).contains(&n), "{n} parameters");
    }

    #[test]
    fn same_seed_same_weights() {
        let a = Generator::new(&ModelConfig::tiny(), Rng::new(9)).unwrap();
        let b = Generator::new(&ModelConfig::tiny(), Rng::new(9)).unwrap();
        for ((na, va), (nb, vb)) in a.vars.iter().zip(b.vars.iter()) {
            assert_eq!(na, nb);
            assert_eq!(va.get().data(), vb.get().data());
        }
    }

    #[test]
    fn wrong_input_size_is_rejected() {
        let g = Generator::new(&ModelConfig::tiny(), Rng::new(0)).unwrap();
        assert!(g.forward(&Tensor::zeros(&[1, 4, 32, 32]).unwrap()).is_err());
    }
}
