//! Boundary-contrast segmentation loss built from piecewise Welch t statistics,
//! classical segmentation losses and metrics, synthetic offset experiments and a
//! local-search mask refiner.

pub mod error;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod refine;
pub mod stats;
pub mod synthetic;

pub use error::{PtaError, Result};
pub use geometry::{BinaryMask, GrayImage, LabelMask, Pixel, Point, ProbabilityMap};
pub use losses::{BaseLoss, PtaConfig, WceWeights};
pub use stats::LossMode;
