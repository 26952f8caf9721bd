use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::{hop_neighborhood, HopLimit};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{SparseMatrix, Tensor};

/// How attention scores are turned into a row-stochastic structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    #[default]
    Sparsemax,
    Softmax,
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sparsemax" => Ok(Normalization::Sparsemax),
            "softmax" => Ok(Normalization::Softmax),
            other => Err(Error::Config(format!("unknown normalization `{other}`"))),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Sparsemax => "sparsemax",
            Normalization::Softmax => "softmax",
        })
    }
}

/// Parameters of one structure-learning layer.
#[derive(Debug, Clone, Copy)]
pub struct StructureLearnParams {
    /// `1 x 2d` attention vector on the tape.
    pub attention: Var,
    /// Weight of the existing structure in the similarity score, `≥ 0`.
    pub lambda: f64,
    pub hop_limit: HopLimit,
    pub normalization: Normalization,
}

/// A sparse structure whose stored values are a tape variable.
///
/// `pattern` carries the numeric values as well, so it can be used
/// directly wherever a constant structure is needed (scoring, pooling,
/// export); `values` is the `nnz x 1` column those values came from.
#[derive(Debug, Clone)]
pub struct LearnedStructure {
    pub pattern: Arc<SparseMatrix>,
    pub values: Var,
}

impl LearnedStructure {
    /// Wraps a fixed structure as a constant on the tape.
    pub fn constant(tape: &mut Tape, s: SparseMatrix) -> Self {
        let values = tape.constant(Tensor::column(s.values().to_vec()));
        Self {
            pattern: Arc::new(s),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.pattern.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.pattern.rows() == 0
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.pattern
    }

    /// Induced sub-structure on the strictly increasing positions `idx`,
    /// keeping the values differentiable.
    pub fn extract(&self, tape: &mut Tape, idx: &[usize]) -> Result<Self> {
        let sub = self.pattern.extract_submatrix(idx)?;
        let mut inside = vec![false; self.pattern.cols()];
        for &i in idx {
            inside[i] = true;
        }
        let offsets = self.pattern.row_offsets();
        let cols = self.pattern.col_indices();
        let entries: Vec<usize> = idx
            .iter()
            .flat_map(|&r| offsets[r]..offsets[r + 1])
            .filter(|&e| inside[cols[e]])
            .collect();
        debug_assert_eq!(entries.len(), sub.nnz());
        let values = tape.row_select(self.values, &entries)?;
        Ok(Self {
            pattern: Arc::new(sub),
            values,
        })
    }
}

/// Similarity scores `E(p,q) = ReLU(a · [h_p ‖ h_q]ᵀ) + λ·A(p,q)` on the
/// stored pairs of `mask`, as an `nnz(mask) x 1` column in storage order.
/// `A(p,q)` is the stored value of `structure`, zero when absent; gradients
/// reach those values when they are themselves on the tape.
pub fn attention_scores(
    tape: &mut Tape,
    h: Var,
    params: &StructureLearnParams,
    learned: &LearnedStructure,
    mask: &Arc<SparseMatrix>,
) -> Result<Var> {
    let structure = learned.matrix();
    let n = tape.value(h).rows();
    if structure.rows() != n || !structure.is_square() || mask.rows() != n || !mask.is_square() {
        return Err(Error::shape(
            "attention_scores",
            format!(
                "h has {n} rows, structure {}x{}, mask {}x{}",
                structure.rows(),
                structure.cols(),
                mask.rows(),
                mask.cols()
            ),
        ));
    }
    let covers = (0..n).all(|p| mask.get(p, p) != 0.0)
        && structure.iter().all(|(p, q, _)| mask.get(p, q) != 0.0);
    if !covers {
        return Err(Error::Contract(
            "mask must contain the diagonal and every stored structure entry".into(),
        ));
    }
    let logits = tape.pair_scores(h, params.attention, mask.clone())?;
    let activated = tape.relu(logits);
    if params.lambda == 0.0 || structure.nnz() == 0 {
        return Ok(activated);
    }
    // 0/1 matrix that places each stored structure value at its mask slot
    let mut position = std::collections::HashMap::with_capacity(structure.nnz());
    for (e, (p, q, _)) in structure.iter().enumerate() {
        position.insert((p, q), e);
    }
    let triplets: Vec<(usize, usize, f64)> = mask
        .iter()
        .enumerate()
        .filter_map(|(k, (p, q, _))| position.get(&(p, q)).map(|&e| (k, e, 1.0)))
        .collect();
    let placement = SparseMatrix::from_triplets(mask.nnz(), structure.nnz(), triplets)?;
    let placed = tape.spmm(Arc::new(placement), learned.values)?;
    let bias = tape.scale(placed, params.lambda);
    tape.add(activated, bias)
}

/// Learns a row-stochastic structure over the `h`-hop candidates of every
/// node (always including the node itself). Entries outside the mask are
/// exactly zero, and zeros produced by sparsemax are pruned from storage.
pub fn structure_learn(
    tape: &mut Tape,
    h: Var,
    structure: &LearnedStructure,
    params: &StructureLearnParams,
) -> Result<LearnedStructure> {
    if params.lambda < 0.0 {
        return Err(Error::Config(format!(
            "lambda {} must be >= 0",
            params.lambda
        )));
    }
    let mask = Arc::new(hop_neighborhood(structure.matrix(), params.hop_limit));
    let scores = attention_scores(tape, h, params, structure, &mask)?;
    let segments = Arc::new(mask.row_offsets().to_vec());
    let normalized = match params.normalization {
        Normalization::Sparsemax => tape.segment_sparsemax(scores, segments)?,
        Normalization::Softmax => tape.segment_softmax(scores, segments)?,
    };
    let vals = tape.value(normalized).data();
    if vals.iter().all(|&v| v != 0.0) {
        let pattern = Arc::new(mask.with_values(vals.to_vec())?);
        return Ok(LearnedStructure {
            pattern,
            values: normalized,
        });
    }
    let keep: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] != 0.0).collect();
    let pruned = mask.with_values(vals.to_vec())?;
    debug_assert_eq!(pruned.nnz(), keep.len());
    let values = tape.row_select(normalized, &keep)?;
    Ok(LearnedStructure {
        pattern: Arc::new(pruned),
        values,
    })
}
