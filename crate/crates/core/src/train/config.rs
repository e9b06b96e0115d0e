//! Run configuration: flat `key = value` text with dotted keys.
//!
//! ```text
//! # comments and blank lines are ignored
//! model.preset = desk
//! model.heads = 2,4,8,16
//! train.steps = 500
//! ablation.use_hsv_loss = true
//! ```
//! Unknown or repeated keys are errors. `model.preset` is applied before
//! any other `model.*` key regardless of its position.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::losses::{HsvMode, HueDistance, LossWeights};
use crate::model::ModelConfig;

/// The four switches that distinguish the ablation variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AblationFlags {
    pub use_hsv_loss: bool,
    pub hsv_include_v: bool,
    pub redesigned_block: bool,
    pub joint_attention_on: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        AblationFlags {
            use_hsv_loss: true,
            hsv_include_v: false,
            redesigned_block: true,
            joint_attention_on: true,
        }
    }
}

impl AblationFlags {
    pub fn hsv_mode(&self) -> HsvMode {
        HsvMode::from_flags(self.use_hsv_loss, self.hsv_include_v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Directory of training PNGs; `None` trains on a synthetic corpus.
    pub train_dir: Option<PathBuf>,
    pub val_dir: Option<PathBuf>,
    /// Size of the synthetic corpus when `train_dir` is unset.
    pub synthetic_images: usize,
    pub output_dir: PathBuf,
    pub model_preset: String,
    pub model: ModelConfig,
    /// Taps used when joint attention is on.
    pub joint_taps: Vec<usize>,
    pub weights: LossWeights,
    pub hue_distance: HueDistance,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    /// Save a checkpoint every this many steps; 0 saves only at the end.
    pub checkpoint_every: usize,
    pub lr_g: f32,
    pub lr_d: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub flags: AblationFlags,
}

impl Default for RunConfig {
    /// Desk-scale defaults: 64×64 images, batch 4.
    fn default() -> Self {
        let model = ModelConfig::desk();
        RunConfig {
            train_dir: None,
            val_dir: None,
            synthetic_images: 10,
            output_dir: PathBuf::from("runs/default"),
            model_preset: "desk".into(),
            joint_taps: model.joint_taps.clone(),
            model,
            weights: LossWeights::default(),
            hue_distance: HueDistance::Plain,
            batch_size: 4,
            steps: 1000,
            seed: 0,
            checkpoint_every: 0,
            lr_g: 1e-3,
            lr_d: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            flags: AblationFlags::default(),
        }
    }
}

fn preset(name: &str) -> Result<ModelConfig> {
    match name {
        "full" => Ok(ModelConfig::default()),
        "desk" => Ok(ModelConfig::desk()),
        "tiny" => Ok(ModelConfig::tiny()),
        other => Err(Error::Config(format!(
            "unknown model preset `{other}` (full, desk, tiny)"
        ))),
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected a boolean, got `{v}`"
        ))),
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<usize>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|p| parse(key, p.trim())).collect()
}

fn parse_array<const N: usize>(key: &str, v: &str) -> Result<[usize; N]> {
    parse_list(key, v)?
        .try_into()
        .map_err(|_| Error::Config(format!("{key}: expected {N} comma-separated values")))
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Splits the text into `key → value`, rejecting malformed and repeated keys.
fn entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", n + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: `{k}` given twice", n + 1)));
        }
    }
    Ok(out)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_entries(entries(text)?)
    }

    /// Parses `text`, then applies `key=value` overrides that replace any
    /// value the text sets for the same key.
    pub fn parse_with_overrides<S: AsRef<str>>(text: &str, overrides: &[S]) -> Result<Self> {
        let mut map = entries(text)?;
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not `key=value`")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Self::from_entries(map)
    }

    fn from_entries(mut map: BTreeMap<String, String>) -> Result<Self> {
        let mut c = RunConfig::default();
        if let Some(p) = map.remove("model.preset") {
            c.model = preset(&p)?;
            c.joint_taps = c.model.joint_taps.clone();
            c.model_preset = p;
        }
        for (k, v) in &map {
            let (k, v) = (k.as_str(), v.as_str());
            let m = &mut c.model;
            let w = &mut c.weights;
            match k {
                "data.train_dir" => c.train_dir = Some(PathBuf::from(v)),
                "data.val_dir" => c.val_dir = Some(PathBuf::from(v)),
                "data.synthetic_images" => c.synthetic_images = parse(k, v)?,
                "output.dir" => c.output_dir = PathBuf::from(v),
                "train.image_size" => m.input_size = parse(k, v)?,
                "train.batch_size" => c.batch_size = parse(k, v)?,
                "train.steps" => c.steps = parse(k, v)?,
                "train.seed" => c.seed = parse(k, v)?,
                "train.checkpoint_every" => c.checkpoint_every = parse(k, v)?,
                "train.lr_g" => c.lr_g = parse(k, v)?,
                "train.lr_d" => c.lr_d = parse(k, v)?,
                "train.beta1" => c.beta1 = parse(k, v)?,
                "train.beta2" => c.beta2 = parse(k, v)?,
                "model.encoder_channels" => m.encoder_channels = parse_array(k, v)?,
                "model.heads" => m.heads = parse_list(k, v)?,
                "model.stripe_widths" => m.stripe_widths = parse_list(k, v)?,
                "model.repeats" => m.repeats = parse_list(k, v)?,
                "model.mlp_ratio" => m.mlp_ratio = parse(k, v)?,
                "model.rrdb_units" => m.rrdb_units = parse(k, v)?,
                "model.rdbs_per_rrdb" => m.rdbs_per_rrdb = parse(k, v)?,
                "model.rdb_growth" => m.rdb_growth = parse(k, v)?,
                "model.residual_scale" => m.residual_scale = parse(k, v)?,
                "model.decoder_channels" => m.decoder_channels = parse_array(k, v)?,
                "model.disc_channels" => m.disc_channels = parse_array(k, v)?,
                "model.joint_taps" => c.joint_taps = parse_list(k, v)?,
                "loss.l1" => w.l1 = parse(k, v)?,
                "loss.edge" => w.edge = parse(k, v)?,
                "loss.perc" => w.perc = parse(k, v)?,
                "loss.style" => w.style = parse(k, v)?,
                "loss.total_hsv" => w.total_hsv = parse(k, v)?,
                "loss.adv" => w.adv = parse(k, v)?,
                "loss.hsv" => w.hsv = parse(k, v)?,
                "loss.hsv_edge" => w.hsv_edge = parse(k, v)?,
                "loss.gp" => w.gp = parse(k, v)?,
                "loss.hue_distance" => {
                    c.hue_distance = v.parse().map_err(|_| {
                        Error::Config(format!("{k}: expected plain or circular, got `{v}`"))
                    })?
                }
                "ablation.use_hsv_loss" => c.flags.use_hsv_loss = parse_bool(k, v)?,
                "ablation.hsv_include_v" => c.flags.hsv_include_v = parse_bool(k, v)?,
                "ablation.redesigned_block" => c.flags.redesigned_block = parse_bool(k, v)?,
                "ablation.joint_attention_on" => c.flags.joint_attention_on = parse_bool(k, v)?,
                _ => return Err(Error::Config(format!("unknown key `{k}`"))),
            }
        }
        c.apply_flags();
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Copies the ablation flags into the model configuration.
    pub fn apply_flags(&mut self) {
        self.model.redesigned_block = self.flags.redesigned_block;
        self.model.joint_taps = if self.flags.joint_attention_on {
            self.joint_taps.clone()
        } else {
            Vec::new()
        };
    }

    pub fn with_flags(&self, flags: AblationFlags) -> Self {
        let mut c = self.clone();
        c.flags = flags;
        c.apply_flags();
        c
    }

    pub fn image_size(&self) -> usize {
        self.model.input_size
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.weights.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be positive".into()));
        }
        if self.train_dir.is_none() && self.synthetic_images == 0 {
            return Err(Error::Config(
                "no training data: set data.train_dir or data.synthetic_images".into(),
            ));
        }
        for (name, v) in [("train.lr_g", self.lr_g), ("train.lr_d", self.lr_d)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        for (name, v) in [("train.beta1", self.beta1), ("train.beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1)")));
            }
        }
        Ok(())
    }

    /// Checks that every configured input directory exists.
    pub fn check_paths(&self) -> Result<()> {
        for dir in [&self.train_dir, &self.val_dir].into_iter().flatten() {
            if !dir.is_dir() {
                return Err(Error::Config(format!(
                    "directory {} does not exist",
                    dir.display()
                )));
            }
        }
        Ok(())
    }

    /// Canonical text form; `parse(to_text())` reproduces the configuration.
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let w = &self.weights;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        if let Some(d) = &self.train_dir {
            kv("data.train_dir", d.display().to_string());
        }
        if let Some(d) = &self.val_dir {
            kv("data.val_dir", d.display().to_string());
        }
        kv("data.synthetic_images", self.synthetic_images.to_string());
        kv("output.dir", self.output_dir.display().to_string());
        kv("model.preset", self.model_preset.clone());
        kv("model.encoder_channels", join(&m.encoder_channels));
        kv("model.heads", join(&m.heads));
        kv("model.stripe_widths", join(&m.stripe_widths));
        kv("model.repeats", join(&m.repeats));
        kv("model.mlp_ratio", m.mlp_ratio.to_string());
        kv("model.rrdb_units", m.rrdb_units.to_string());
        kv("model.rdbs_per_rrdb", m.rdbs_per_rrdb.to_string());
        kv("model.rdb_growth", m.rdb_growth.to_string());
        kv("model.residual_scale", m.residual_scale.to_string());
        kv("model.decoder_channels", join(&m.decoder_channels));
        kv("model.disc_channels", join(&m.disc_channels));
        kv("model.joint_taps", join(&self.joint_taps));
        kv("train.image_size", m.input_size.to_string());
        kv("train.batch_size", self.batch_size.to_string());
        kv("train.steps", self.steps.to_string());
        kv("train.seed", self.seed.to_string());
        kv("train.checkpoint_every", self.checkpoint_every.to_string());
        kv("train.lr_g", self.lr_g.to_string());
        kv("train.lr_d", self.lr_d.to_string());
        kv("train.beta1", self.beta1.to_string());
        kv("train.beta2", self.beta2.to_string());
        kv("loss.l1", w.l1.to_string());
        kv("loss.edge", w.edge.to_string());
        kv("loss.perc", w.perc.to_string());
        kv("loss.style", w.style.to_string());
        kv("loss.total_hsv", w.total_hsv.to_string());
        kv("loss.adv", w.adv.to_string());
        kv("loss.hsv", w.hsv.to_string());
        kv("loss.hsv_edge", w.hsv_edge.to_string());
        kv("loss.gp", w.gp.to_string());
        kv("loss.hue_distance", self.hue_distance.to_string());
        let f = &self.flags;
        kv("ablation.use_hsv_loss", f.use_hsv_loss.to_string());
        kv("ablation.hsv_include_v", f.hsv_include_v.to_string());
        kv("ablation.redesigned_block", f.redesigned_block.to_string());
        kv(
            "ablation.joint_attention_on",
            f.joint_attention_on.to_string(),
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_replace_file_values() {
        let c = RunConfig::parse_with_overrides(
            "train.steps = 5\n",
            &["train.steps=7", "train.seed = 3"],
        )
        .unwrap();
        assert_eq!((c.steps, c.seed), (7, 3));
        assert!(RunConfig::parse_with_overrides("", &["train.steps"]).is_err());
        assert!(RunConfig::parse_with_overrides("", &["bogus=1"]).is_err());
    }

    #[test]
    fn defaults_are_desk_scale() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c.image_size(), 64);
        assert_eq!(c.batch_size, 4);
        assert_eq!(c.model.stripe_widths, [1, 2, 4, 8]);
        assert_eq!(c.model.joint_taps, [2, 4]);
    }

    #[test]
    fn keys_are_applied() {
        let c = RunConfig::parse(
            "# comment\n train.steps = 12 \nmodel.preset = tiny\nablation.joint_attention_on = false\nloss.style = 5 # trailing\n",
        )
        .unwrap();
        assert_eq!(c.steps, 12);
        assert_eq!(c.image_size(), 16);
        assert!(c.model.joint_taps.is_empty());
        assert_eq!(c.joint_taps, [2, 4]);
        assert_eq!(c.weights.style, 5.0);
    }

    #[test]
    fn errors() {
        assert!(RunConfig::parse("train.stepz = 3").is_err());
        assert!(RunConfig::parse("train.steps = 3\ntrain.steps = 4").is_err());
        assert!(RunConfig::parse("train.steps").is_err());
        assert!(RunConfig::parse("train.steps = many").is_err());
        assert!(RunConfig::parse("ablation.use_hsv_loss = maybe").is_err());
        assert!(RunConfig::parse("model.preset = huge").is_err());
        assert!(RunConfig::parse("model.heads = 2,4,8").is_err());
        assert!(RunConfig::parse("loss.l1 = -1").is_err());
    }

    #[test]
    fn text_round_trip() {
        let c = RunConfig::parse(
            "model.preset = tiny\ntrain.seed = 99\ndata.train_dir = /tmp/x\nablation.hsv_include_v = true\ntrain.lr_g = 0.0003",
        )
        .unwrap();
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
        let d = RunConfig::default();
        assert_eq!(RunConfig::parse(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn missing_directory_is_reported() {
        let c = RunConfig::parse("data.train_dir = /definitely/not/here").unwrap();
        assert!(c.check_paths().is_err());
    }
}
