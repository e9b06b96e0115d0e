use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image_ops::{load_image, make_edge_mask, CannyParams, EdgeMask, Image};
use crate::synth::synth_corpus;

/// Environment variable capping the threads used to decode images.
pub const THREADS_ENV: &str = "STRIPEPAINT_THREADS";

/// Worker count for image decoding: `STRIPEPAINT_THREADS` if set to a
/// positive integer, otherwise the available parallelism.
pub fn worker_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Sorted PNG files of a directory.
pub fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if png && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Decodes `paths` on up to [`worker_threads`] threads; the result keeps the
/// order of `paths`.
pub fn load_images(paths: &[PathBuf]) -> Result<Vec<Image>> {
    let workers = worker_threads().min(paths.len()).max(1);
    let chunk = paths.len().div_ceil(workers).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = paths
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(load_image).collect::<Result<Vec<_>>>()))
            .collect();
        let mut out = Vec::with_capacity(paths.len());
        for h in handles {
            out.extend(h.join().expect("image decoding thread panicked")?);
        }
        Ok(out)
    })
}

/// Training images with their edge weight maps, computed once up front.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub names: Vec<String>,
    pub images: Vec<Image>,
    pub edge_masks: Vec<EdgeMask>,
}

impl Corpus {
    pub fn new(names: Vec<String>, images: Vec<Image>, size: usize) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::EmptyCorpus("no training images".into()));
        }
        for (name, im) in names.iter().zip(&images) {
            if im.height() != size || im.width() != size {
                return Err(Error::Size(format!(
                    "{name} is {}x{}, the model expects {size}x{size}",
                    im.height(),
                    im.width()
                )));
            }
        }
        let params = CannyParams::default();
        let edge_masks = images
            .iter()
            .map(|im| params.detect(im).map(|e| make_edge_mask(&e)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Corpus {
            names,
            images,
            edge_masks,
        })
    }

    pub fn load_dir(dir: &Path, size: usize) -> Result<Self> {
        let files = png_files(dir)?;
        if files.is_empty() {
            return Err(Error::EmptyCorpus(format!(
                "no PNG files in {}",
                dir.display()
            )));
        }
        let names = files
            .iter()
            .map(|p| {
                p.file_name()
                    .map_or_else(String::new, |n| n.to_string_lossy().into_owned())
            })
            .collect();
        Self::new(names, load_images(&files)?, size)
    }

    pub fn synthetic(n: usize, size: usize, seed: u64) -> Result<Self> {
        let names = (0..n).map(|i| format!("synth_{i:04}")).collect();
        Self::new(names, synth_corpus(n, size, seed)?, size)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}
