//! Frequency-aware implicit neural video representation and compression.
//!
//! The crate is organised bottom-up: [`nn`] holds the differentiable
//! kernels, [`model`] assembles them into the coordinate network,
//! [`objectives`] defines targets and losses, [`training`] fits a model to a
//! video, [`codec`] turns a model into a bitstream and back, and
//! [`evaluation`] does rate–distortion bookkeeping.

pub mod codec;
pub mod error;
pub mod evaluation;
pub mod fsutil;
pub mod model;
pub mod nn;
pub mod objectives;
pub mod pipeline;
pub mod render;
pub mod scalar;
pub mod synthetic;
pub mod tensor;
pub mod training;
pub mod video_io;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::Tensor;
