//! Mask generation across sizes, bands and seeds, and the mask files written
//! by `genmasks`.

use proptest::prelude::*;
use stripepaint::image_ops::{gen_irregular_mask, load_mask, Bucket};
use stripepaint::train::{cmd_genmasks, parse_mask_file_name};

#[test]
fn every_band_every_seed() {
    for size in [64, 96] {
        for bucket in Bucket::BANDS {
            for seed in 0..25 {
                let m = gen_irregular_mask(size, size, bucket, seed).unwrap();
                let f = m.hole_fraction();
                assert!(bucket.contains(f), "{size} {bucket} seed {seed}: {f}");
                assert_eq!(Bucket::band_of(f).map(|i| Bucket::BANDS[i]), Some(bucket));
            }
        }
    }
}

#[test]
fn non_square_masks() {
    let bucket: Bucket = "0.2-0.3".parse().unwrap();
    let m = gen_irregular_mask(48, 80, bucket, 3).unwrap();
    assert_eq!((m.height(), m.width()), (48, 80));
    assert!(bucket.contains(m.hole_fraction()));
}

#[test]
fn seeds_give_different_masks() {
    let bucket = Bucket::BANDS[2];
    let a = gen_irregular_mask(64, 64, bucket, 1).unwrap();
    let b = gen_irregular_mask(64, 64, bucket, 2).unwrap();
    assert_ne!(a, b);
    assert_eq!(a, gen_irregular_mask(64, 64, bucket, 1).unwrap());
}

#[test]
fn genmasks_files() {
    let dir = tempfile::tempdir().unwrap();
    let bucket: Bucket = "0.3-0.4".parse().unwrap();
    let paths = cmd_genmasks(5, 64, bucket, 11, dir.path()).unwrap();
    assert_eq!(paths.len(), 5);
    let mut names = Vec::new();
    for (i, p) in paths.iter().enumerate() {
        let name = p.file_name().unwrap().to_str().unwrap().to_string();
        let (seed, index, fraction) = parse_mask_file_name(&name).unwrap();
        assert_eq!((seed, index), (11, i));
        let m = load_mask(p).unwrap();
        assert_eq!((m.height(), m.width()), (64, 64));
        assert_eq!(fraction, m.hole_fraction(), "{name}");
        assert!(bucket.contains(fraction));
        names.push(name);
    }

    // A rerun writes the same files.
    let again = tempfile::tempdir().unwrap();
    let paths2 = cmd_genmasks(5, 64, bucket, 11, again.path()).unwrap();
    for (p, q) in paths.iter().zip(&paths2) {
        assert_eq!(p.file_name(), q.file_name());
        assert_eq!(std::fs::read(p).unwrap(), std::fs::read(q).unwrap());
    }
}

#[test]
fn bad_buckets_are_rejected() {
    for s in ["0.3", "0.4-0.3", "0-0.5", "0.5-1", "a-b"] {
        assert!(s.parse::<Bucket>().is_err(), "{s}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn masks_land_in_their_band(band in 0usize..6, seed in any::<u64>(), side in 48usize..80) {
        let bucket = Bucket::BANDS[band];
        let m = gen_irregular_mask(side, side, bucket, seed).unwrap();
        prop_assert!(bucket.contains(m.hole_fraction()));
        prop_assert!(m.data().iter().all(|&v| v <= 1));
    }
}
