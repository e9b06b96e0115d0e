use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use stripepaint_tensor::{adam_step, AdamConfig, OptimState, Rng};

use super::config::RunConfig;
use super::corpus::Corpus;
use crate::error::{Error, Result};
use crate::image_ops::{
    gen_irregular_mask, stack_edge_masks, stack_images, stack_masks, Bucket, Image, Mask,
};
use crate::losses::{
    discriminator_loss, generator_objective, gradient_penalty, total_loss, FeatureExtractor,
    LossInputs, LossReport,
};
use crate::metrics::{hue_mae_in_holes, psnr, psnr_in_holes, ssim};
use crate::model::{prepare_input, Checkpoint, Discriminator, Generator};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const LOG_FILE: &str = "train.log";

/// Corpus indices and masks of one training batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub masks: Vec<Mask>,
}

/// Mean quality over a set of image/mask pairs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalSummary {
    /// PSNR of the composited output over the whole image.
    pub psnr: f64,
    pub ssim: f64,
    /// PSNR of the raw output over hole pixels.
    pub psnr_holes: f64,
    /// Circular hue error of the raw output over hole pixels, in turns.
    pub hue_mae: f64,
}

/// Masks for evaluation: one per image, cycling through the six bands, drawn
/// from the `eval-masks` substream of `seed`.
pub fn eval_masks(n: usize, size: usize, seed: u64) -> Result<Vec<Mask>> {
    let mut rng = Rng::substream(seed, "eval-masks");
    (0..n)
        .map(|i| {
            gen_irregular_mask(
                size,
                size,
                Bucket::BANDS[i % Bucket::BANDS.len()],
                rng.next_u64(),
            )
        })
        .collect()
}

/// Alternating GAN training: per batch one discriminator update on
/// `L_D + λ_GP·L_GP`, then one generator update on the generator-side terms
/// of the total loss.
pub struct Trainer {
    cfg: RunConfig,
    pub generator: Generator,
    pub discriminator: Discriminator,
    fx: FeatureExtractor,
    corpus: Corpus,
    opt_g: OptimState,
    opt_d: OptimState,
    step: u64,
    mask_rng: Rng,
    batch_rng: Rng,
    order: Vec<usize>,
    cursor: usize,
    last_batch: Option<Batch>,
}

impl Trainer {
    /// Fresh weights and sampling streams, all derived from `cfg.seed`.
    pub fn new(cfg: RunConfig, corpus: Corpus) -> Result<Self> {
        cfg.validate()?;
        let seed = cfg.seed;
        let generator = Generator::new(&cfg.model, Rng::substream(seed, "weights.generator"))?;
        let discriminator =
            Discriminator::new(&cfg.model, Rng::substream(seed, "weights.discriminator"))?;
        Ok(Trainer {
            fx: FeatureExtractor::new(seed)?,
            generator,
            discriminator,
            corpus,
            opt_g: OptimState::default(),
            opt_d: OptimState::default(),
            step: 0,
            mask_rng: Rng::substream(seed, "masks"),
            batch_rng: Rng::substream(seed, "batches"),
            order: Vec::new(),
            cursor: 0,
            last_batch: None,
            cfg,
        })
    }

    /// Loads the corpus named by the configuration.
    pub fn from_config(cfg: RunConfig) -> Result<Self> {
        cfg.check_paths()?;
        let corpus = load_corpus(&cfg)?;
        Self::new(cfg, corpus)
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn last_batch(&self) -> Option<&Batch> {
        self.last_batch.as_ref()
    }

    /// Draws the next batch: corpus order reshuffled every epoch from the
    /// batch stream, one mask per sample from the mask stream with its band
    /// chosen uniformly.
    pub fn next_batch(&mut self) -> Result<Batch> {
        let s = self.cfg.image_size();
        let mut indices = Vec::with_capacity(self.cfg.batch_size);
        let mut masks = Vec::with_capacity(self.cfg.batch_size);
        for _ in 0..self.cfg.batch_size {
            if self.cursor >= self.order.len() {
                self.order = (0..self.corpus.len()).collect();
                self.batch_rng.shuffle(&mut self.order);
                self.cursor = 0;
            }
            indices.push(self.order[self.cursor]);
            self.cursor += 1;
            let band = Bucket::BANDS[self.mask_rng.below(Bucket::BANDS.len())];
            masks.push(gen_irregular_mask(s, s, band, self.mask_rng.next_u64())?);
        }
        Ok(Batch { indices, masks })
    }

    fn adam(&self, lr: f32) -> AdamConfig {
        AdamConfig {
            lr,
            beta1: self.cfg.beta1,
            beta2: self.cfg.beta2,
            ..AdamConfig::default()
        }
    }

    /// One discriminator update and one generator update.
    pub fn step(&mut self) -> Result<LossReport> {
        let batch = self.next_batch()?;
        let images: Vec<Image> = batch
            .indices
            .iter()
            .map(|&i| self.corpus.images[i].clone())
            .collect();
        let edges: Vec<_> = batch
            .indices
            .iter()
            .map(|&i| self.corpus.edge_masks[i].clone())
            .collect();
        let gt = stack_images(&images)?;
        let mask = stack_masks(&batch.masks)?;
        let edge_mask = stack_edge_masks(&edges)?;
        let w = self.cfg.weights;

        let out = self.generator.forward(&prepare_input(&gt, &mask)?)?.image;

        self.discriminator.vars.zero_grad();
        let l_d = discriminator_loss(&self.discriminator, &out, &gt, &mask)?;
        let gp = gradient_penalty(&self.discriminator, &gt)?;
        let d_value = l_d.item()?;
        for (term, v) in [("d", d_value), ("gp", gp.value)] {
            if !v.is_finite() {
                return Err(Error::NonFinite { term: term.into() });
            }
        }
        l_d.add(&gp.surrogate.scale(w.gp)?)?.backward()?;
        let adam_d = self.adam(self.cfg.lr_d);
        adam_step(&self.discriminator.vars, &mut self.opt_d, &adam_d)?;

        self.generator.vars.zero_grad();
        let inputs = LossInputs {
            out: &out,
            gt: &gt,
            mask: &mask,
            edge_mask: &edge_mask,
        };
        let obj = generator_objective(
            &inputs,
            &self.fx,
            &self.discriminator,
            &w,
            self.cfg.flags.hsv_mode(),
            self.cfg.hue_distance,
        )?;
        let mut terms = obj.terms()?;
        terms.d = d_value;
        terms.gp = gp.value;
        let report = total_loss(&terms, &w)?;
        obj.objective.backward()?;
        let adam_g = self.adam(self.cfg.lr_g);
        adam_step(&self.generator.vars, &mut self.opt_g, &adam_g)?;

        self.step += 1;
        self.last_batch = Some(batch);
        Ok(report)
    }

    /// Runs `steps` steps, writing `step=N,<report>` lines to `log` and
    /// saving a checkpoint into the output directory every
    /// `checkpoint_every` steps. Returns the log lines.
    pub fn run(&mut self, steps: usize, log: &mut dyn Write) -> Result<Vec<String>> {
        let mut lines = Vec::with_capacity(steps);
        for _ in 0..steps {
            let report = self.step()?;
            let line = format!("step={},{}", self.step, report.to_log_line());
            writeln!(log, "{line}")
                .and_then(|_| log.flush())
                .map_err(|e| Error::io(&self.cfg.output_dir, e))?;
            lines.push(line);
            let every = self.cfg.checkpoint_every as u64;
            if every > 0 && self.step.is_multiple_of(every) {
                self.save(self.cfg.output_dir.join(CHECKPOINT_FILE))?;
            }
        }
        Ok(lines)
    }

    /// Trains for the configured number of steps inside the output
    /// directory; returns the final checkpoint path.
    pub fn train(&mut self) -> Result<PathBuf> {
        let dir = self.cfg.output_dir.clone();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let log_path = dir.join(LOG_FILE);
        let mut log = File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
        let remaining = (self.cfg.steps as u64).saturating_sub(self.step) as usize;
        self.run(remaining, &mut log)?;
        let ckpt = dir.join(CHECKPOINT_FILE);
        self.save(&ckpt)?;
        Ok(ckpt)
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new();
        ck.insert_bytes("meta.config", self.cfg.to_text().as_bytes())?;
        ck.insert_vars("g", &self.generator.vars)?;
        ck.insert_vars("d", &self.discriminator.vars)?;
        ck.insert_optim("opt_g", &self.opt_g)?;
        ck.insert_optim("opt_d", &self.opt_d)?;
        ck.insert_u64("state.step", self.step)?;
        ck.insert_u64("state.cursor", self.cursor as u64)?;
        for (name, rng) in [("masks", &self.mask_rng), ("batches", &self.batch_rng)] {
            for (i, word) in rng.state().iter().enumerate() {
                ck.insert_u64(format!("state.rng.{name}.{i}"), *word)?;
            }
        }
        ck.insert_u64("state.order_len", self.order.len() as u64)?;
        for (i, &v) in self.order.iter().enumerate() {
            ck.insert_u64(format!("state.order.{i}"), v as u64)?;
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.checkpoint()?.save(path)
    }

    /// Rebuilds a trainer from a checkpoint over the given corpus.
    pub fn restore(ck: &Checkpoint, corpus: Corpus) -> Result<Self> {
        let cfg = config_of(ck)?;
        let mut t = Self::new(cfg, corpus)?;
        ck.restore_vars("g", &t.generator.vars)?;
        ck.restore_vars("d", &t.discriminator.vars)?;
        t.opt_g = ck.restore_optim("opt_g")?;
        t.opt_d = ck.restore_optim("opt_d")?;
        t.step = ck.get_u64("state.step")?;
        t.cursor = ck.get_u64("state.cursor")? as usize;
        let rng = |name: &str| -> Result<Rng> {
            let mut s = [0u64; 4];
            for (i, w) in s.iter_mut().enumerate() {
                *w = ck.get_u64(&format!("state.rng.{name}.{i}"))?;
            }
            Ok(Rng::from_state(s))
        };
        t.mask_rng = rng("masks")?;
        t.batch_rng = rng("batches")?;
        let n = ck.get_u64("state.order_len")? as usize;
        t.order = (0..n)
            .map(|i| ck.get_u64(&format!("state.order.{i}")).map(|v| v as usize))
            .collect::<Result<_>>()?;
        if t.order.iter().any(|&i| i >= t.corpus.len()) || t.cursor > t.order.len() {
            return Err(Error::Checkpoint(
                "sampling state does not match the corpus".into(),
            ));
        }
        Ok(t)
    }

    /// Reloads a checkpoint together with the corpus its configuration names.
    pub fn resume(path: impl AsRef<Path>) -> Result<Self> {
        let ck = Checkpoint::load(path)?;
        let cfg = config_of(&ck)?;
        cfg.check_paths()?;
        let corpus = load_corpus(&cfg)?;
        Self::restore(&ck, corpus)
    }

    /// Scores the generator on `images` with `masks`, in batches.
    pub fn evaluate(&self, images: &[Image], masks: &[Mask]) -> Result<EvalSummary> {
        evaluate_generator(&self.generator, images, masks, self.cfg.batch_size)
    }
}

/// The run configuration stored in a checkpoint.
pub fn config_of(ck: &Checkpoint) -> Result<RunConfig> {
    let text = String::from_utf8(ck.get_bytes("meta.config")?)
        .map_err(|_| Error::Checkpoint("stored configuration is not UTF-8".into()))?;
    RunConfig::parse(&text)
}

/// Rebuilds just the generator of a checkpoint.
pub fn load_generator(ck: &Checkpoint) -> Result<Generator> {
    let cfg = config_of(ck)?;
    let g = Generator::new(&cfg.model, Rng::substream(cfg.seed, "weights.generator"))?;
    ck.restore_vars("g", &g.vars)?;
    Ok(g)
}

pub fn load_corpus(cfg: &RunConfig) -> Result<Corpus> {
    match &cfg.train_dir {
        Some(dir) => Corpus::load_dir(dir, cfg.image_size()),
        None => Corpus::synthetic(cfg.synthetic_images, cfg.image_size(), cfg.seed),
    }
}

pub fn evaluate_generator(
    g: &Generator,
    images: &[Image],
    masks: &[Mask],
    batch: usize,
) -> Result<EvalSummary> {
    if images.is_empty() || images.len() != masks.len() {
        return Err(Error::Param("evaluation needs one mask per image".into()));
    }
    let mut sums = [0.0f64; 4];
    for (imgs, ms) in images.chunks(batch.max(1)).zip(masks.chunks(batch.max(1))) {
        let (outs, _) = g.inpaint(imgs, ms)?;
        for ((out, gt), m) in outs.iter().zip(imgs).zip(ms) {
            let comp = crate::image_ops::composite(out, gt, m)?;
            sums[0] += psnr(&comp, gt)?.min(100.0);
            sums[1] += ssim(&comp, gt)?;
            sums[2] += psnr_in_holes(out, gt, m)?.min(100.0);
            sums[3] += hue_mae_in_holes(out, gt, m)?;
        }
    }
    let n = images.len() as f64;
    Ok(EvalSummary {
        psnr: sums[0] / n,
        ssim: sums[1] / n,
        psnr_holes: sums[2] / n,
        hue_mae: sums[3] / n,
    })
}
