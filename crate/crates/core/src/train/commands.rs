use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use stripepaint_tensor::Rng;

use super::config::{AblationFlags, RunConfig};
use super::corpus::Corpus;
use super::trainer::{
    eval_masks, evaluate_generator, load_corpus, load_generator, EvalSummary, Trainer,
};
use crate::error::{Error, Result};
use crate::image_ops::{
    composite, gen_irregular_mask, load_image, load_mask, save_image, save_mask, Bucket,
};
use crate::metrics::{evaluate_pairs, psnr, EvalOptions, MetricReport};
use crate::model::Checkpoint;

/// Trains from scratch and returns the final checkpoint path.
pub fn cmd_train(cfg: &RunConfig) -> Result<PathBuf> {
    let mut t = Trainer::from_config(cfg.clone())?;
    let ckpt = t.train()?;
    log::info!(
        "trained {} steps, checkpoint at {}",
        t.step_count(),
        ckpt.display()
    );
    Ok(ckpt)
}

/// Inpaints one image and writes the composite. With a ground truth, returns
/// the PSNR of the composite against it.
pub fn cmd_inpaint(
    ckpt: &Path,
    image: &Path,
    mask: &Path,
    out: &Path,
    gt: Option<&Path>,
) -> Result<Option<f64>> {
    let g = load_generator(&Checkpoint::load(ckpt)?)?;
    let size = g.config().input_size;
    let img = load_image(image)?;
    let m = load_mask(mask)?;
    for (what, h, w) in [
        ("image", img.height(), img.width()),
        ("mask", m.height(), m.width()),
    ] {
        if h != size || w != size {
            return Err(Error::Size(format!(
                "{what} is {h}x{w}, the model expects {size}x{size}"
            )));
        }
    }
    let (raw, _) = g.inpaint(std::slice::from_ref(&img), std::slice::from_ref(&m))?;
    let result = composite(&raw[0], &img, &m)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    save_image(&result, out)?;
    gt.map(|p| psnr(&result, &load_image(p)?)).transpose()
}

/// `mask_s{seed}_{index}_f{fraction}.png`, the fraction written so that
/// parsing it back gives the exact `f64`.
pub fn mask_file_name(seed: u64, index: usize, fraction: f64) -> String {
    format!("mask_s{seed}_{index:04}_f{fraction}.png")
}

/// Inverse of [`mask_file_name`]: `(seed, index, fraction)`.
pub fn parse_mask_file_name(name: &str) -> Option<(u64, usize, f64)> {
    let rest = name.strip_prefix("mask_s")?.strip_suffix(".png")?;
    let (seed, rest) = rest.split_once('_')?;
    let (index, frac) = rest.split_once("_f")?;
    Some((seed.parse().ok()?, index.parse().ok()?, frac.parse().ok()?))
}

/// Writes `n` square masks in `bucket`; mask `i` is seeded by the `i`-th
/// draw of the `genmasks` substream of `seed`.
pub fn cmd_genmasks(
    n: usize,
    size: usize,
    bucket: Bucket,
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rng = Rng::substream(seed, "genmasks");
    let mut paths = Vec::with_capacity(n);
    for i in 0..n {
        let m = gen_irregular_mask(size, size, bucket, rng.next_u64())?;
        let path = out_dir.join(mask_file_name(seed, i, m.hole_fraction()));
        save_mask(&m, &path)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Scores a directory of outputs and writes the report files into `out_dir`.
pub fn cmd_eval(out_dir: &Path, gt_dir: &Path, mask_dir: &Path) -> Result<MetricReport> {
    let report = evaluate_pairs(out_dir, gt_dir, mask_dir, EvalOptions::default())?;
    report.write(out_dir)?;
    Ok(report)
}

/// The ablation table rows, in table order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Plain stripe-window blocks, no joint attention, no HSV loss.
    Original,
    /// Joint attention and the HSV loss, plain blocks.
    NoRedesign,
    /// Redesigned blocks and joint attention, no HSV loss.
    NoHsv,
    /// Redesigned blocks, HSV loss including the value channel.
    FullHsv,
    /// Redesigned blocks, HSV loss on hue and saturation only.
    Ours,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Original,
        Variant::NoRedesign,
        Variant::NoHsv,
        Variant::FullHsv,
        Variant::Ours,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::NoRedesign => "no-redesign",
            Variant::NoHsv => "no-hsv",
            Variant::FullHsv => "full-hsv",
            Variant::Ours => "ours",
        }
    }

    pub fn flags(self) -> AblationFlags {
        let on = AblationFlags::default();
        match self {
            Variant::Original => AblationFlags {
                use_hsv_loss: false,
                hsv_include_v: false,
                redesigned_block: false,
                joint_attention_on: false,
            },
            Variant::NoRedesign => AblationFlags {
                redesigned_block: false,
                ..on
            },
            Variant::NoHsv => AblationFlags {
                use_hsv_loss: false,
                ..on
            },
            Variant::FullHsv => AblationFlags {
                hsv_include_v: true,
                ..on
            },
            Variant::Ours => on,
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s.trim())
            .ok_or_else(|| {
                let names: Vec<_> = Variant::ALL.iter().map(|v| v.name()).collect();
                Error::Param(format!(
                    "unknown variant `{s}` (one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// Parses `all` or a comma-separated list of variant names. The result is in
/// table order without duplicates.
pub fn ablation_variants(list: &str) -> Result<Vec<Variant>> {
    if list.trim() == "all" {
        return Ok(Variant::ALL.to_vec());
    }
    let chosen = list
        .split(',')
        .map(Variant::from_str)
        .collect::<Result<Vec<_>>>()?;
    if chosen.is_empty() {
        return Err(Error::Param("no variants given".into()));
    }
    Ok(Variant::ALL
        .into_iter()
        .filter(|v| chosen.contains(v))
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub variant: Variant,
    pub summary: EvalSummary,
    /// `step=N,...` lines of the variant's run.
    pub log: Vec<String>,
}

/// Writes the ablation rows as an aligned text table.
pub fn ablation_table(rows: &[AblationRow]) -> String {
    let mut s = format!(
        "{:<12} {:>9} {:>7} {:>9}\n",
        "variant", "psnr", "ssim", "hue_mae"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<12} {:>9.4} {:>7.4} {:>9.5}",
            r.variant.name(),
            r.summary.psnr,
            r.summary.ssim,
            r.summary.hue_mae
        );
    }
    s
}

/// Trains every variant with the same seed and data, each into its own
/// subdirectory of the output directory, and scores it on the validation
/// directory, or on the training corpus when none is set. Writes
/// `ablation.txt` next to the variant directories.
pub fn cmd_ablate(cfg: &RunConfig, variants: &[Variant]) -> Result<Vec<AblationRow>> {
    cfg.validate()?;
    cfg.check_paths()?;
    let corpus = load_corpus(cfg)?;
    let eval = match &cfg.val_dir {
        Some(dir) => Corpus::load_dir(dir, cfg.image_size())?,
        None => corpus.clone(),
    };
    let masks = eval_masks(eval.len(), cfg.image_size(), cfg.seed)?;
    let mut rows = Vec::with_capacity(variants.len());
    for &v in variants {
        let mut vc = cfg.with_flags(v.flags());
        vc.output_dir = cfg.output_dir.join(v.name());
        fs::create_dir_all(&vc.output_dir).map_err(|e| Error::io(&vc.output_dir, e))?;
        let log_path = vc.output_dir.join(super::trainer::LOG_FILE);
        let mut log_file = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
        let mut t = Trainer::new(vc.clone(), corpus.clone())?;
        let log = t.run(vc.steps, &mut log_file)?;
        t.save(vc.output_dir.join(super::trainer::CHECKPOINT_FILE))?;
        let summary = evaluate_generator(&t.generator, &eval.images, &masks, vc.batch_size)?;
        log::info!(
            "{}: psnr {:.3} ssim {:.4}",
            v.name(),
            summary.psnr,
            summary.ssim
        );
        rows.push(AblationRow {
            variant: v,
            summary,
            log,
        });
    }
    let table = ablation_table(&rows);
    let path = cfg.output_dir.join("ablation.txt");
    fs::write(&path, &table).map_err(|e| Error::io(&path, e))?;
    Ok(rows)
}
