//! Stein's method toolkit for non-normal limits of mean-field spin models.

pub mod cw;
pub mod error;
pub mod limit_laws;
pub mod md;
pub mod numeric;
pub mod quadrature;
pub mod stein;
pub mod verify;

pub use error::{Error, Result, Side};
pub use limit_laws::{DriftFunction, DriftKind, LimitLaw};
pub use md::{MDParams, MDStationary, Phase};
pub use verify::{RangeSpec, RatioCurve, ScalingFit};
