//! Saliency-guided patch extraction and weighted multiple-instance evaluation
//! for tiny-object image classification.
//!
//! The pipeline classifies images whose discriminative content occupies a tiny
//! fraction of the frame. Whole images ("bags") carry the only ground-truth
//! labels; the library trains a small bag-level model, reads its class
//! activation maps to rank candidate regions, extracts fixed-size patches at
//! the top-ranked locations, fine-tunes an instance-level model on those
//! patches under inherited pseudo-labels, and finally scores each bag as a
//! rank-weighted average of its patch probabilities.
//!
//! The numeric core is generic over the floating-point scalar: the pipeline
//! runs in `f32`, while tests exercise the identical code in `f64` where
//! finite-difference oracles need the precision. Concrete aliases for both
//! precisions live at the crate root.

pub mod error;
pub mod evaluator;
pub mod mildata;
pub mod minimodel;
pub mod patcher;
pub mod pipeline;
pub mod raster;
pub mod saliency;
pub mod scalar;
pub mod seeds;
pub mod synthgen;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Single-precision raster, as used by the pipeline.
pub type Raster32 = raster::Raster<f32>;
/// Double-precision raster, as used by numeric test oracles.
pub type Raster64 = raster::Raster<f64>;

/// Single-precision multi-channel image.
pub type ImageTensor32 = raster::ImageTensor<f32>;
/// Double-precision multi-channel image.
pub type ImageTensor64 = raster::ImageTensor<f64>;

/// Single-precision saliency map.
pub type SaliencyMap32 = saliency::SaliencyMap<f32>;
/// Double-precision saliency map.
pub type SaliencyMap64 = saliency::SaliencyMap<f64>;

/// Single-precision feature stack (conv activations before pooling).
pub type FeatureStack32 = saliency::FeatureStack<f32>;
/// Double-precision feature stack.
pub type FeatureStack64 = saliency::FeatureStack<f64>;

/// Single-precision model, as trained by the pipeline.
pub type MiniModel32 = minimodel::MiniModel<f32>;
/// Double-precision model, as used by gradient-check tests.
pub type MiniModel64 = minimodel::MiniModel<f64>;
