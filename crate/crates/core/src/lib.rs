//! Følner-type defects of structured operators on countable bases.
//!
//! The numerical core is generic over the real scalar `T`; the aliases at the
//! bottom of this file fix `T = f64` (and `f32`) for everyday use.

pub mod basis;
pub mod defect;
pub mod error;
pub mod linalg;
pub mod opmodel;
pub mod parallel;
pub mod probe;
pub mod projlib;
pub mod scalar;
pub mod verify;
pub mod schemes;

pub use basis::{BasisIndex, IndexSort};
pub use defect::{CommutatorNorms, DefectReport, NormKind};
pub use error::{Error, Result};
pub use opmodel::{Operator, OperatorSpecDoc};
pub use projlib::{Frame, JoinResult, Projection, ProjectionDoc};
pub use scalar::{Real, C};

pub type Operator64 = Operator<f64>;
pub type Projection64 = Projection<f64>;
pub type Operator32 = Operator<f32>;
pub type Projection32 = Projection<f32>;
pub type DefectReport64 = DefectReport<f64>;
pub type DefectReport32 = DefectReport<f32>;
