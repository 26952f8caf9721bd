//! Hierarchical graph pooling with structure learning for graph
//! classification.
//!
//! The crate is layered bottom-up: [`tensor`] (dense and CSR matrices),
//! [`autodiff`] (tape-based reverse mode), [`ops`] (convolution, scoring,
//! top-rank pooling, sparsemax structure learning, readout), [`model`]
//! (the K-level pipeline and classifier head), and [`train`] (Adam, early
//! stopping and the repeated-split protocol). [`data`] reads TU-format
//! benchmarks and generates synthetic corpora.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod model;
pub mod ops;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
