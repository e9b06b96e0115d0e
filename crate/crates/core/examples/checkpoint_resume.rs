//! A run interrupted by a checkpoint continues exactly as if it had never
//! stopped: same loss log, same weights.

use stripepaint::train::{RunConfig, Trainer};

fn main() -> stripepaint::Result<()> {
    let cfg =
        RunConfig::parse("model.preset = tiny\ndata.synthetic_images = 4\ntrain.batch_size = 2\n")?;
    let mut sink = std::io::sink();

    let straight = Trainer::from_config(cfg.clone())?.run(8, &mut sink)?;

    let path = std::env::temp_dir().join("stripepaint-resume.bin");
    let mut first = Trainer::from_config(cfg)?;
    let mut log = first.run(4, &mut sink)?;
    first.save(&path)?;
    let bytes = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
    drop(first);
    let mut resumed = Trainer::resume(&path)?;
    log.extend(resumed.run(4, &mut sink)?);

    for line in &log {
        println!("{line}");
    }
    println!(
        "checkpoint {bytes} bytes at {}; resumed log identical to an uninterrupted run: {}",
        path.display(),
        log == straight
    );
    Ok(())
}
