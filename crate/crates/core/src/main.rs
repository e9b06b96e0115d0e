use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stripepaint::image_ops::Bucket;
use stripepaint::train::{
    ablation_table, ablation_variants, cmd_ablate, cmd_eval, cmd_genmasks, cmd_inpaint, cmd_train,
    RunConfig,
};

#[derive(Parser)]
#[command(
    name = "stripepaint",
    version,
    about = "Image inpainting: training, inference and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a configuration file.
    Train {
        /// Run configuration (`key = value` lines).
        #[arg(long)]
        config: PathBuf,
        /// Extra `key=value` settings applied over the file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Fill the holes of one image with a trained checkpoint.
    Inpaint {
        /// Checkpoint written by `train`.
        #[arg(long)]
        ckpt: PathBuf,
        /// RGB PNG at the model's input size.
        #[arg(long)]
        image: PathBuf,
        /// Grayscale PNG, white where pixels are missing.
        #[arg(long)]
        mask: PathBuf,
        /// Where to write the composited PNG.
        #[arg(long)]
        out: PathBuf,
        /// Ground truth to report PSNR against.
        #[arg(long)]
        gt: Option<PathBuf>,
    },
    /// Write random hole masks whose fraction falls in a band.
    Genmasks {
        /// Number of masks.
        #[arg(long)]
        n: usize,
        /// Side length in pixels.
        #[arg(long)]
        size: usize,
        /// Hole-fraction band such as `0.3-0.4`.
        #[arg(long)]
        bucket: Bucket,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score inpainted outputs against ground truth, per mask band.
    Eval {
        /// Directory of outputs; the report files are written here too.
        #[arg(long)]
        out: PathBuf,
        /// Directory of ground-truth images with the same file names.
        #[arg(long)]
        gt: PathBuf,
        /// Directory of masks with the same file names.
        #[arg(long)]
        masks: PathBuf,
    },
    /// Train and score ablation variants under one configuration.
    Ablate {
        /// Run configuration shared by every variant.
        #[arg(long)]
        config: PathBuf,
        /// `all` or a comma-separated subset of
        /// original,no-redesign,no-hsv,full-hsv,ours.
        #[arg(long, default_value = "all")]
        variants: String,
        /// Extra `key=value` settings applied over the file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn load_config(path: &PathBuf, overrides: &[String]) -> stripepaint::Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| stripepaint::Error::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::parse_with_overrides(&text, overrides)
}

fn run(cli: Cli) -> stripepaint::Result<()> {
    match cli.command {
        Command::Train { config, overrides } => {
            let ckpt = cmd_train(&load_config(&config, &overrides)?)?;
            println!("{}", ckpt.display());
        }
        Command::Inpaint {
            ckpt,
            image,
            mask,
            out,
            gt,
        } => {
            if let Some(p) = cmd_inpaint(&ckpt, &image, &mask, &out, gt.as_deref())? {
                println!("psnr={p}");
            }
        }
        Command::Genmasks {
            n,
            size,
            bucket,
            seed,
            out,
        } => {
            for p in cmd_genmasks(n, size, bucket, seed, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Eval { out, gt, masks } => {
            print!("{}", cmd_eval(&out, &gt, &masks)?.to_table());
        }
        Command::Ablate {
            config,
            variants,
            overrides,
        } => {
            let cfg = load_config(&config, &overrides)?;
            let rows = cmd_ablate(&cfg, &ablation_variants(&variants)?)?;
            print!("{}", ablation_table(&rows));
        }
    }
    Ok(())
}

fn fail(kind: &str, msg: &str) -> ExitCode {
    eprintln!("error kind={kind} msg={:?}", msg.trim().replace('\n', " "));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default();
            return fail("usage", first.strip_prefix("error: ").unwrap_or(first));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}
