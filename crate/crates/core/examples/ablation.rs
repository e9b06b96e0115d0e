//! Trains the five ablation variants briefly on the same data and prints the
//! resulting table.
//!
//! ```text
//! cargo run --release --example ablation -- [steps] [key=value ...]
//! ```

use stripepaint::train::{ablation_table, cmd_ablate, RunConfig, Variant};

fn main() -> stripepaint::Result<()> {
    let (counts, overrides): (Vec<String>, Vec<String>) =
        std::env::args().skip(1).partition(|a| !a.contains('='));
    let steps: usize = counts.first().and_then(|s| s.parse().ok()).unwrap_or(20);
    let dir = std::env::temp_dir().join("stripepaint-ablation");
    let base = format!(
        "model.preset = tiny\ndata.synthetic_images = 8\ntrain.steps = {steps}\noutput.dir = {}\n",
        dir.display()
    );
    let cfg = RunConfig::parse_with_overrides(&base, &overrides)?;
    let rows = cmd_ablate(&cfg, &Variant::ALL)?;
    print!("{}", ablation_table(&rows));
    println!("runs and ablation.txt in {}", dir.display());
    Ok(())
}
