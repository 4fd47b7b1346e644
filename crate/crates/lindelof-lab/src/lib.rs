//! Numerical laboratory for exponential sums over real point sequences,
//! generalized integer systems and their zeta functions.

pub mod beurling;
pub mod constructions;
pub mod deviation;
pub mod error;
pub mod mean;
pub mod numerics;
pub mod random_models;
pub mod sequence;
pub mod zeta_lab;

pub use deviation::{deviation, scan, DeviationEntry, DeviationGrid, Normalization, TRule};
pub use error::{LabError, Result};
pub use mean::{MeanKind, MeanModel, MollifiedComb};
pub use sequence::{ExpSumResult, PointSequence};
