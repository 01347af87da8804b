//! Bounded-memory streaming evidence engine with answer-readiness timing.

pub mod ars;
pub mod error;
pub mod harness;
pub mod memory;
pub mod readiness;
pub mod reasoner;
pub mod scalar;
pub mod vecmath;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision instantiations used by the harness and the CLI.
pub type Vector = vecmath::EmbeddingVector<f64>;
pub type Tree = memory::MemoryTree<f64>;
pub type Snapshot = memory::MemoryTreeSnapshot<f64>;
pub type Projections = reasoner::ProjectionPair<f64>;
pub type State = reasoner::ReasoningState<f64>;
pub type Model = readiness::ReadinessModel<f64>;
pub type Answer = ars::TimedAnswer<f64>;

/// Single-precision variants for memory-constrained embedding.
pub type VectorF32 = vecmath::EmbeddingVector<f32>;
pub type TreeF32 = memory::MemoryTree<f32>;
pub type ModelF32 = readiness::ReadinessModel<f32>;
