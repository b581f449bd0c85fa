//! The adversarial training loop and its supporting pieces.

mod adam;
mod checkpoint;
mod config;
mod loss;
mod state;
mod toy;

pub use adam::{adam_update, AdamConfig, AdamState};
pub use checkpoint::{
    load_checkpoint, read_checkpoint_header, save_checkpoint, CheckpointHeader, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::TrainConfig;
pub use loss::{d_loss, g_loss, optimal_discriminator, PROB_CLAMP};
pub use state::{
    epoch_batches, gather_batch, inject_noise, read_loss_csv, train_step, write_loss_csv,
    LossRecord, StepLosses, TrainState,
};
pub use toy::{train_toy_discriminator, ToyConfig, ToyDistribution, ToyOutcome};
