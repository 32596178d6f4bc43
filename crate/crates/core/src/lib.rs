pub mod bench;
pub mod cache;
pub mod dataset;
pub mod error;
pub mod geo;
pub mod index;
pub mod loader;
pub mod patch;
pub mod proj;
pub mod sampler;
pub mod tiff;
pub mod vector;
pub mod warp;

pub use error::{Error, Result};
