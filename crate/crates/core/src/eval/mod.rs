//! Sequence loading, synthetic data, metrics and experiment drivers.

mod experiment;
mod metrics;
mod rank;
mod sequence;
mod synthetic;

pub use experiment::*;
pub use metrics::*;
pub use rank::*;
pub use sequence::*;
pub use synthetic::*;
