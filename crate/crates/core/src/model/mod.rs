//! A small trainable encoder-decoder segmentation network with manual
//! backpropagation, plus its trainer and checkpoint format.

mod checkpoint;
pub mod layers;
mod net;
mod train;

pub use checkpoint::{Checkpoint, LayerRecord, Predictor, ORACLE_TOPOLOGY};
pub use net::{ForwardCache, Gradients, SegNetSmall, LAYER_NAMES, TOPOLOGY};
pub use train::{mean_jaccard, train, write_log_csv, EpochLog, TrainConfig, TrainOutcome};
