//! Canny edges of a synthetic image and the edge weight map built from them.
//!
//! ```text
//! cargo run --example edges -- [out_dir]
//! ```

use std::path::PathBuf;

use stripepaint::image_ops::{make_edge_mask, save_edge_map, save_image, CannyParams, EDGE_WEIGHT};
use stripepaint::synth::synth_image;
use stripepaint_tensor::Rng;

fn main() -> stripepaint::Result<()> {
    let dir = std::env::args().nth(1).map_or_else(
        || std::env::temp_dir().join("stripepaint-edges"),
        PathBuf::from,
    );
    std::fs::create_dir_all(&dir).map_err(|e| stripepaint::Error::io(&dir, e))?;
    let img = synth_image(128, &mut Rng::new(3))?;
    let params = CannyParams::default();
    let edges = params.detect(&img)?;
    let weights = make_edge_mask(&edges);
    let heavy = weights.data().iter().filter(|&&w| w == EDGE_WEIGHT).count();
    println!("{params:?}");
    println!(
        "{} edge pixels of {}; weight map: {heavy} at {EDGE_WEIGHT}, the rest at 1",
        edges.count(),
        edges.height() * edges.width()
    );
    save_image(&img, dir.join("image.png"))?;
    save_edge_map(&edges, dir.join("edges.png"))?;
    println!("wrote image.png and edges.png to {}", dir.display());
    Ok(())
}
