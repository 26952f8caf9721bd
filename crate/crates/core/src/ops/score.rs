use crate::error::{Error, Result};
use crate::tensor::{SparseMatrix, Tensor};

/// Which neighbourhood reconstruction the information score uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMode {
    /// `‖(I − D⁻¹A)H‖₁` on an adjacency `A` with degree diagonal `D`. A node
    /// without neighbours has an empty reconstruction and scores `‖h‖₁`.
    Layer1Degree,
    /// `‖(I − S)H‖₁` on a row-stochastic structure `S`.
    LearnedRowSum,
}

/// Node information score: row-wise ℓ1 distance between each node's
/// representation and its reconstruction from neighbours. Not
/// differentiated; selection is treated as a constant of the forward pass.
pub fn node_info_score(structure: &SparseMatrix, h: &Tensor, mode: ScoreMode) -> Result<Vec<f64>> {
    if !structure.is_square() || structure.rows() != h.rows() {
        return Err(Error::shape(
            "node_info_score",
            format!(
                "structure {}x{}, h {:?}",
                structure.rows(),
                structure.cols(),
                h.shape()
            ),
        ));
    }
    let reconstruction = match mode {
        ScoreMode::Layer1Degree => structure.row_normalized().spmm(h)?,
        ScoreMode::LearnedRowSum => structure.spmm(h)?,
    };
    Ok(h.sub(&reconstruction)?.row_l1_norm().into_vec())
}
