//! Configuration, the training loop and the command implementations.

mod commands;
mod config;
mod corpus;
mod trainer;

pub use commands::{
    ablation_table, ablation_variants, cmd_ablate, cmd_eval, cmd_genmasks, cmd_inpaint, cmd_train,
    mask_file_name, parse_mask_file_name, AblationRow, Variant,
};
pub use config::{AblationFlags, RunConfig};
pub use corpus::{load_images, png_files, worker_threads, Corpus, THREADS_ENV};
pub use trainer::{
    config_of, eval_masks, evaluate_generator, load_corpus, load_generator, Batch, EvalSummary,
    Trainer, CHECKPOINT_FILE, LOG_FILE,
};
