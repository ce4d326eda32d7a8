//! Direction-aware wavelet plane representations for dynamic radiance
//! fields.

pub mod error;
pub mod field;
pub mod grid;
pub mod render;
pub mod rep;
pub mod sparsity;
pub mod train;
pub mod wavelet;

pub use error::{ArchiveError, Error, Result};
