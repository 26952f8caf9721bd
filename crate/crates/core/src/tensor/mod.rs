//! Dense row-major matrices and CSR sparse matrices.
//!
//! Every other module builds on these two types. Both are plain values:
//! once constructed they are never mutated in place by the public API, so
//! they can be shared read-only across threads.

mod dense;
mod sparse;

pub use dense::Tensor;
pub use sparse::{SparseBuilder, SparseMatrix};
