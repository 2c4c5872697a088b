//! Over-the-air federated edge learning with temporal-structure-assisted
//! gradient aggregation.
//!
//! Devices sparsify and compress their model updates, the channel sums them,
//! and the server recovers the aggregate with a turbo message-passing
//! estimator that carries support and amplitude beliefs across rounds.

pub mod channel;
pub mod dct;
pub mod edge;
pub mod em;
pub mod error;
pub mod gauss;
pub mod harness;
pub mod params;
pub mod quad;
pub mod rng;
pub mod sensing;
pub mod se;
pub mod tsaga;
pub mod vector;

pub use error::{Error, Result};
pub use params::{ChainParams, RoundConfig};
pub use rng::SeededRng;
pub use sensing::{LinearOperator, SensingOperator};
pub use vector::DenseVector;
