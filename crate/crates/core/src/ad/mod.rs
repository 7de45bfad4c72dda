//! Reverse-mode automatic differentiation over small dense arrays, with the
//! operator set used by the periphery surrogate, the compensation network and
//! the loss family, plus an Adam optimiser.

mod adam;
mod array;
mod conv;
mod filter;
mod ops;
mod spectral;
mod tape;

pub use adam::AdamState;
pub use array::Array;
pub use conv::ConvGeometry;
pub use filter::{filter_cascade, Biquad};
pub use ops::ReduceKind;
pub use spectral::{frame_count, hann, SpectrumMode};
pub use tape::{Tape, Var};

pub(crate) use ops::softplus;

#[derive(Debug, thiserror::Error)]
pub enum AdError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("axis {axis} is invalid for a rank-{rank} array")]
    Axis { axis: usize, rank: usize },
    #[error("backward needs a scalar output, got shape {0:?}")]
    NonScalar(Vec<usize>),
    #[error("signal of {got} samples is shorter than the {needed}-sample window")]
    TooShort { needed: usize, got: usize },
    #[error("non-finite gradient for parameter {0}")]
    NonFinite(String),
    #[error("{0}")]
    Invalid(String),
}
