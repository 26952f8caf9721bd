use std::sync::Arc;

use super::{Activation, LearnedStructure};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::SparseMatrix;

fn check_conv_shapes(op: &'static str, n: usize, tape: &Tape, h: Var, w: Var) -> Result<()> {
    let (hv, wv) = (tape.value(h), tape.value(w));
    if hv.rows() != n || wv.rows() != hv.cols() {
        return Err(Error::shape(
            op,
            format!("structure {n}x{n}, h {:?}, w {:?}", hv.shape(), wv.shape()),
        ));
    }
    Ok(())
}

/// Symmetric-normalised graph convolution
/// `σ(D̃^{-1/2} (A + I) D̃^{-1/2} · h · w)`.
pub fn sym_norm_conv(
    tape: &mut Tape,
    adjacency: &SparseMatrix,
    h: Var,
    w: Var,
    activation: Activation,
) -> Result<Var> {
    if !adjacency.is_square() {
        return Err(Error::shape("sym_norm_conv", "adjacency is not square"));
    }
    check_conv_shapes("sym_norm_conv", adjacency.rows(), tape, h, w)?;
    let propagate = Arc::new(adjacency.sym_normalized_with_self_loops()?);
    let hw = tape.matmul(h, w)?;
    let mixed = tape.spmm(propagate, hw)?;
    Ok(activation.apply(tape, mixed))
}

/// Convolution on a row-stochastic learned structure, `σ(S · h · w)`. No
/// degree normalisation: the degree matrix of `S` is the identity.
pub fn learned_struct_conv(
    tape: &mut Tape,
    s: &LearnedStructure,
    h: Var,
    w: Var,
    activation: Activation,
) -> Result<Var> {
    check_conv_shapes("learned_struct_conv", s.len(), tape, h, w)?;
    let hw = tape.matmul(h, w)?;
    let mixed = tape.pattern_matmul(s.pattern.clone(), s.values, hw)?;
    Ok(activation.apply(tape, mixed))
}
