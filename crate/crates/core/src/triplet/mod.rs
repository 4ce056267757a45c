//! Batch construction, triplet mining, the triplet loss and the training loop.

mod batch;
mod collapse;
mod loss;
mod mining;
mod train;

pub use batch::{sample_batch, Batch};
pub use collapse::{detect_collapse, CollapseReport};
pub use loss::{triplet_loss, triplet_loss_grads};
pub use mining::{apply_tag_biased_negatives, classify_hardness, enumerate_triplets, filter_trainable, Hardness, Triplet};
pub use train::{history_csv, train, IterationRecord, TrainConfig, TrainOutcome, TrainSample, TrainingSet};
