pub mod audio;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod net;
pub mod pipeline;
pub mod triplet;

pub use error::{Error, ErrorKind, Result};
