//! Graph operators of the hierarchical pooling pipeline.
//!
//! Numeric-only helpers (scores, selection, hop masks, simplex projections,
//! KKT residuals) work on plain tensors; operators that carry gradients
//! (convolutions, attention, structure learning, readout) record onto a
//! [`Tape`](crate::autodiff::Tape).

mod activation;
mod conv;
mod hop;
mod kkt;
mod pool;
mod readout;
mod score;
pub mod simplex;
mod structure;

pub use activation::Activation;
pub use conv::{learned_struct_conv, sym_norm_conv};
pub use hop::{hop_neighborhood, HopLimit};
pub use kkt::{kkt_check, KktReport};
pub use pool::{pooled_size, top_rank_indices, top_rank_pool, PoolResult};
pub use readout::readout;
pub use score::{node_info_score, ScoreMode};
pub use simplex::{softmax, sparsemax, tau_threshold, ThresholdResult};
pub use structure::{
    attention_scores, structure_learn, LearnedStructure, Normalization, StructureLearnParams,
};
