//! Split-merge and shrink-expand pooling inside a minimal CNN engine.
//!
//! Split pooling rearranges a feature map by within-window offset into
//! subsampled batches so a network can reduce spatial extent without
//! discarding values; merge pooling is its exact inverse. Shrink and
//! expand are the one-batch training-time counterparts. This crate
//! implements the operators, a sequential network executor with reverse
//! mode gradients and an Adam optimizer, FLOP and receptive-field
//! analysis, architecture builders, a synthetic segmentation dataset,
//! and PPM/PGM image I/O.

pub mod analysis;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod imgio;
pub mod metrics;
pub mod net;
pub mod nn;
pub mod smp;
pub mod tensor;
pub mod train;
pub mod verify;
pub mod zoo;

pub use error::{Result, SmpError};
pub use tensor::{Shape4, Tensor};
