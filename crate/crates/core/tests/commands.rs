//! The command entry points on small files: training, inpainting, scoring
//! and the ablation table.

use std::path::{Path, PathBuf};

use stripepaint::error::Error;
use stripepaint::image_ops::{load_image, save_image, save_mask, Image, Mask};
use stripepaint::synth::synth_image;
use stripepaint::train::{cmd_ablate, cmd_eval, cmd_inpaint, cmd_train, RunConfig, Variant};
use stripepaint_tensor::Rng;

fn tiny_run(dir: &Path, steps: usize) -> RunConfig {
    let text = format!(
        "model.preset = tiny\ndata.synthetic_images = 2\ntrain.batch_size = 1\ntrain.steps = {steps}\ntrain.seed = 3\noutput.dir = {}\n",
        dir.display()
    );
    RunConfig::parse(&text).unwrap()
}

fn trained(dir: &Path) -> PathBuf {
    cmd_train(&tiny_run(dir, 2)).unwrap()
}

fn write_image(dir: &Path, name: &str, img: &Image) -> PathBuf {
    let p = dir.join(name);
    save_image(img, &p).unwrap();
    p
}

fn write_mask(dir: &Path, name: &str, m: &Mask) -> PathBuf {
    let p = dir.join(name);
    save_mask(m, &p).unwrap();
    p
}

#[test]
fn inpaint_leaves_known_pixels_alone() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = trained(dir.path());
    let img = synth_image(16, &mut Rng::new(9)).unwrap();
    let img_path = write_image(dir.path(), "img.png", &img);
    let original = load_image(&img_path).unwrap();

    // No hole: the composite is the input, bit for bit.
    let none = write_mask(dir.path(), "none.png", &Mask::zeros(16, 16).unwrap());
    let out = dir.path().join("out/none.png");
    let psnr = cmd_inpaint(&ckpt, &img_path, &none, &out, Some(&img_path)).unwrap();
    assert_eq!(load_image(&out).unwrap(), original);
    assert_eq!(psnr, Some(f64::INFINITY));

    // With a hole, only hole pixels may change, and a rerun agrees.
    let hole = Mask::from_fn(16, 16, |y, x| (4..10).contains(&y) && (5..12).contains(&x)).unwrap();
    let hole_path = write_mask(dir.path(), "hole.png", &hole);
    let a = dir.path().join("a.png");
    let b = dir.path().join("b.png");
    cmd_inpaint(&ckpt, &img_path, &hole_path, &a, None).unwrap();
    cmd_inpaint(&ckpt, &img_path, &hole_path, &b, None).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let filled = load_image(&a).unwrap();
    for y in 0..16 {
        for x in 0..16 {
            if !hole.is_hole(y, x) {
                assert_eq!(filled.pixel(y, x), original.pixel(y, x), "({y}, {x})");
            }
        }
    }
}

#[test]
fn inpaint_rejects_the_wrong_size() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = trained(dir.path());
    let img = write_image(
        dir.path(),
        "big.png",
        &Image::filled(24, 24, [0.5; 3]).unwrap(),
    );
    let mask = write_mask(dir.path(), "m.png", &Mask::zeros(24, 24).unwrap());
    let err = cmd_inpaint(&ckpt, &img, &mask, &dir.path().join("o.png"), None).unwrap_err();
    assert!(matches!(err, Error::Size(_)), "{err}");
}

#[test]
fn eval_of_ground_truth_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, masks) = (dir.path().join("gt"), dir.path().join("masks"));
    std::fs::create_dir_all(&gt).unwrap();
    std::fs::create_dir_all(&masks).unwrap();
    let mut rng = Rng::new(4);
    for (i, rows) in [2usize, 7].into_iter().enumerate() {
        let name = format!("{i}.png");
        write_image(&gt, &name, &synth_image(16, &mut rng).unwrap());
        // 32 or 112 of 256 pixels: bands 0.1-0.2 and 0.4-0.5.
        write_mask(
            &masks,
            &name,
            &Mask::from_fn(16, 16, |y, _| y < rows).unwrap(),
        );
    }
    let out = dir.path().join("report");
    std::fs::create_dir_all(&out).unwrap();
    for i in 0..2 {
        let name = format!("{i}.png");
        std::fs::copy(gt.join(&name), out.join(&name)).unwrap();
    }
    let report = cmd_eval(&out, &gt, &masks).unwrap();
    assert_eq!(report.pairs.len(), 2);
    assert!(report
        .pairs
        .iter()
        .all(|p| p.ssim == 1.0 && p.psnr.is_infinite()));
    let counts: Vec<usize> = report.bands.iter().map(|b| b.count).collect();
    assert_eq!(counts, vec![0, 1, 0, 0, 1, 0, 2]);
    for f in ["metrics.txt", "metrics.csv", "pairs.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn eval_of_empty_directories_fails() {
    let dir = tempfile::tempdir().unwrap();
    let err = cmd_eval(dir.path(), dir.path(), dir.path()).unwrap_err();
    assert!(matches!(err, Error::EmptyCorpus(_)), "{err}");
}

#[test]
fn ablation_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let rows = cmd_ablate(&tiny_run(dir.path(), 1), &Variant::ALL).unwrap();
    assert_eq!(rows.len(), Variant::ALL.len());
    let table = std::fs::read_to_string(dir.path().join("ablation.txt")).unwrap();
    for v in Variant::ALL {
        assert!(table.contains(v.name()), "{table}");
        assert!(dir.path().join(v.name()).join("checkpoint.bin").is_file());
    }
}
