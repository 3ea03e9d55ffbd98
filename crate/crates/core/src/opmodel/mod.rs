//! Structured operators on countable bases: validated specifications, exact
//! entry access, dense truncations, norm bounds and band accounting.

mod operator;
pub mod spec;
mod window;

pub use operator::{BandProfile, BandTable, Entries, Operator, ToeplitzSymbol, Wedge, WedgeProfile};
pub use spec::{CoeffDoc, ComplexDoc, EntryDoc, OperatorSpecDoc, ProfileDoc, ScalarDoc};
pub use window::{truncate, truncate_with_limit, DenseWindow, DEFAULT_WINDOW_LIMIT};
pub(crate) use window::position_map;
