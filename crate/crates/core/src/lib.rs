//! Quantum circuit simulation with a state-vector engine and a tensor-network
//! engine.

pub mod error;
pub mod numeric;
pub mod distsim;
pub mod statevec;
pub mod fusion;
pub mod tn;
pub mod pathfinder;
pub mod exec;
pub mod approx;
pub mod frontend;

pub use error::{Error, Result};
pub use numeric::{C32, C64};

