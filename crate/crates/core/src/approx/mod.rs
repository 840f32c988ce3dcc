//! Tensor decompositions and the matrix product state simulator.

mod decomp;
pub(crate) mod linalg;
mod mps;

pub use decomp::{gate_split, tensor_qr, tensor_svd, Partition, SplitAlgorithm, SvdInfo, SvdPolicy};
pub use mps::MpsState;
