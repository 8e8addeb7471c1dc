//! Distributed averaging on random geometric graphs.
//!
//! Geographic gossip pairs each activated node with the node nearest a uniformly
//! random point, reached by greedy geographic routing; rejection sampling over
//! Voronoi cell areas makes that partner close to uniform. Standard gossip pairs
//! with a random one-hop neighbor instead. The crate simulates both, counts the
//! radio transmissions each spends, and predicts the averaging time from the
//! spectrum of the expected update matrix.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the tolerances elsewhere assume.

pub mod analysis;
pub mod eigen;
pub mod engine;
mod error;
pub mod experiments;
pub mod geometry;
pub mod rng;
pub mod routing;
pub mod sampling;
mod scalar;

pub use engine::{ProtocolKind, TrialRecord};
pub use error::{Error, Result};
pub use experiments::{ExperimentConfig, FieldSpec};
pub use routing::RoutePath;
pub use scalar::Scalar;

pub type Point = geometry::Point<f64>;
pub type Network = geometry::Network<f64>;
pub type SamplingPolicy = sampling::SamplingPolicy<f64>;
pub type GossipState = engine::GossipState<f64>;
pub type ExpectedUpdateMatrix = analysis::ExpectedUpdateMatrix<f64>;

pub type Point32 = geometry::Point<f32>;
pub type Network32 = geometry::Network<f32>;
pub type SamplingPolicy32 = sampling::SamplingPolicy<f32>;
pub type GossipState32 = engine::GossipState<f32>;
pub type ExpectedUpdateMatrix32 = analysis::ExpectedUpdateMatrix<f32>;
