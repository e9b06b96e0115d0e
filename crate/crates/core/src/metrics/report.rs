use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{psnr, ssim};
use crate::error::{Error, Result};
use crate::image_ops::{composite, load_image, load_mask, Bucket};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalOptions {
    /// Score `out ⊙ M + gt ⊙ (1 − M)` instead of the raw output.
    pub composite: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { composite: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairMetrics {
    pub name: String,
    pub hole_fraction: f64,
    /// Index into [`Bucket::BANDS`]; `None` outside every band.
    pub band: Option<usize>,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandSummary {
    pub label: String,
    pub count: usize,
    /// Mean over finite PSNR values only.
    pub psnr_mean: Option<f64>,
    /// Pairs whose PSNR is infinite (identical images), left out of the mean.
    pub infinite_psnr: usize,
    pub ssim_mean: Option<f64>,
}

impl BandSummary {
    fn from_pairs<'a>(label: String, pairs: impl Iterator<Item = &'a PairMetrics>) -> Self {
        let (mut count, mut inf, mut finite) = (0, 0, Vec::new());
        let mut ssim_sum = 0.0;
        for p in pairs {
            count += 1;
            ssim_sum += p.ssim;
            if p.psnr.is_finite() {
                finite.push(p.psnr);
            } else {
                inf += 1;
            }
        }
        BandSummary {
            label,
            count,
            psnr_mean: (!finite.is_empty())
                .then(|| finite.iter().sum::<f64>() / finite.len() as f64),
            infinite_psnr: inf,
            ssim_mean: (count > 0).then(|| ssim_sum / count as f64),
        }
    }
}

/// Per-pair metrics and their means per hole-fraction band.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub pairs: Vec<PairMetrics>,
    /// One entry per evaluation band, then one over every pair.
    pub bands: Vec<BandSummary>,
    /// Files without a counterpart in one of the other directories.
    pub missing: Vec<String>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

impl MetricReport {
    pub fn from_pairs(pairs: Vec<PairMetrics>, missing: Vec<String>) -> Self {
        let mut bands: Vec<BandSummary> = Bucket::BANDS
            .iter()
            .enumerate()
            .map(|(i, b)| {
                BandSummary::from_pairs(b.label(), pairs.iter().filter(|p| p.band == Some(i)))
            })
            .collect();
        bands.push(BandSummary::from_pairs("all".into(), pairs.iter()));
        MetricReport {
            pairs,
            bands,
            missing,
        }
    }

    /// Aligned plain-text table of the band means.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<10} {:>6} {:>10} {:>8} {:>8}\n",
            "band", "pairs", "psnr", "psnr_inf", "ssim"
        );
        for b in &self.bands {
            let _ = writeln!(
                s,
                "{:<10} {:>6} {:>10} {:>8} {:>8}",
                b.label,
                b.count,
                fmt_opt(b.psnr_mean),
                b.infinite_psnr,
                fmt_opt(b.ssim_mean)
            );
        }
        if !self.missing.is_empty() {
            let _ = writeln!(s, "skipped (no counterpart): {}", self.missing.join(", "));
        }
        s
    }

    /// Band means as comma-separated values.
    pub fn bands_csv(&self) -> String {
        let mut s = String::from("band,pairs,psnr_mean,psnr_infinite,ssim_mean\n");
        for b in &self.bands {
            let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                b.label,
                b.count,
                opt(b.psnr_mean),
                b.infinite_psnr,
                opt(b.ssim_mean)
            );
        }
        s
    }

    /// Per-pair values as comma-separated values.
    pub fn pairs_csv(&self) -> String {
        let mut s = String::from("name,hole_fraction,band,psnr,ssim\n");
        for p in &self.pairs {
            let band = p.band.map_or(String::new(), |i| Bucket::BANDS[i].label());
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                p.name, p.hole_fraction, band, p.psnr, p.ssim
            );
        }
        s
    }

    /// Writes `metrics.txt`, `metrics.csv` and `pairs.csv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("metrics.txt", self.to_table()),
            ("metrics.csv", self.bands_csv()),
            ("pairs.csv", self.pairs_csv()),
        ];
        let mut paths = Vec::new();
        for (name, body) in files {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
            paths.push(p);
        }
        Ok(paths)
    }
}

fn png_names(dir: &Path) -> Result<BTreeSet<String>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = BTreeSet::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                names.insert(name.to_string());
            }
        }
    }
    Ok(names)
}

/// Scores every file name present in all three directories. Names missing
/// from any directory are logged, listed in the report and skipped.
pub fn evaluate_pairs(
    out_dir: impl AsRef<Path>,
    gt_dir: impl AsRef<Path>,
    mask_dir: impl AsRef<Path>,
    opts: EvalOptions,
) -> Result<MetricReport> {
    let (out_dir, gt_dir, mask_dir) = (out_dir.as_ref(), gt_dir.as_ref(), mask_dir.as_ref());
    let outs = png_names(out_dir)?;
    let gts = png_names(gt_dir)?;
    let masks = png_names(mask_dir)?;
    let all: BTreeSet<&String> = outs.iter().chain(&gts).chain(&masks).collect();
    if all.is_empty() {
        return Err(Error::EmptyCorpus(format!(
            "no PNG files in {}, {} or {}",
            out_dir.display(),
            gt_dir.display(),
            mask_dir.display()
        )));
    }
    let mut pairs = Vec::new();
    let mut missing = Vec::new();
    for name in all {
        if !(outs.contains(name) && gts.contains(name) && masks.contains(name)) {
            log::warn!("{name}: missing from at least one directory, skipped");
            missing.push(name.clone());
            continue;
        }
        let out = load_image(out_dir.join(name))?;
        let gt = load_image(gt_dir.join(name))?;
        let mask = load_mask(mask_dir.join(name))?;
        let scored = if opts.composite {
            composite(&out, &gt, &mask)?
        } else {
            out
        };
        let hole_fraction = mask.hole_fraction();
        pairs.push(PairMetrics {
            name: name.clone(),
            hole_fraction,
            band: Bucket::band_of(hole_fraction),
            psnr: psnr(&scored, &gt)?,
            ssim: ssim(&scored, &gt)?,
        });
    }
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus(
            "no complete output/ground-truth/mask triples".into(),
        ));
    }
    Ok(MetricReport::from_pairs(pairs, missing))
}
