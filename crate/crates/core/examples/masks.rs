//! Draws one irregular mask per evaluation band and writes them as PNGs.
//!
//! ```text
//! cargo run --example masks -- [out_dir] [size]
//! ```

use std::path::PathBuf;

use stripepaint::image_ops::{gen_irregular_mask, save_mask, Bucket};

fn main() -> stripepaint::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().map_or_else(
        || std::env::temp_dir().join("stripepaint-masks"),
        PathBuf::from,
    );
    let size = args.next().and_then(|s| s.parse().ok()).unwrap_or(128);
    std::fs::create_dir_all(&dir).map_err(|e| stripepaint::Error::io(&dir, e))?;
    for (i, bucket) in Bucket::BANDS.into_iter().enumerate() {
        let m = gen_irregular_mask(size, size, bucket, i as u64)?;
        let path = dir.join(format!("band_{}.png", bucket.label()));
        save_mask(&m, &path)?;
        println!(
            "{:>9}: {:5} holes of {} ({:.4}) -> {}",
            bucket.label(),
            m.hole_count(),
            size * size,
            m.hole_fraction(),
            path.display()
        );
    }
    Ok(())
}
