//! The convolutional embedding network with hand-written forward and
//! backward passes, RMSProp updates and checkpoint persistence.

mod checkpoint;
pub mod layers;
mod model;
mod rmsprop;
mod scalar;

pub use checkpoint::{
    load_checkpoint, load_checkpoint_for, save_checkpoint, Checkpoint, CheckpointMeta, FORMAT_VERSION, MAGIC,
};
pub use layers::{Padding, PoolSpec, Tensor3};
pub use model::{init_params, Cache, ConvParams, DenseParams, Mode, Network, NetworkConfig, Parameters};
pub use rmsprop::{rmsprop_step, rmsprop_update, OptimizerState, RmsPropConfig};
pub use scalar::Scalar;
