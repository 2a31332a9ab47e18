//! A small reverse-mode engine specialised to shallow forecasting networks.

mod adam;
mod checkpoint;
mod network;
mod param;
mod tape;
mod train;

pub use adam::AdamState;
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use network::{clamp_kernel, Architecture, Network, DEFAULT_KERNEL, FNN_HIDDEN};
pub use param::{LayerSlot, ParamTensor};
pub use tape::{moving_average, moving_average_decompose, NodeId, Tape};
pub use train::{context_window, train, validation_nll, write_log, EarlyStopping, EpochRecord, TrainConfig, TrainOutcome};
