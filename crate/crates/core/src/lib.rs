//! Neutralized Bowen entropy of subsets of shift spaces.

pub mod cli;
pub mod cover;
pub mod error;
pub mod estimators;
pub mod measures;
pub mod scalar;
pub mod subset;
pub mod symbolic;

pub use error::{Error, Result};
pub use measures::{CylinderMeasure, MeasureSpec};
pub use scalar::{CostScalar, HighPrecision, LogF64, Precision};
pub use subset::{SubsetSpec, Target};
pub use symbolic::{BallKind, NeutralizedBall, ShiftSpec, Word};
