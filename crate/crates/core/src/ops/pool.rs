use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::SparseMatrix;

/// Slack absorbing floating-point error in `r · n` before rounding up, so
/// that e.g. `0.7 · 10` keeps 7 nodes rather than 8.
const CEIL_SLACK: f64 = 1e-9;

/// `⌈r · n⌉`, clamped to `[1, n]` for `n ≥ 1`.
pub fn pooled_size(ratio: f64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let k = (ratio * n as f64 - CEIL_SLACK).ceil();
    (k.max(1.0) as usize).min(n)
}

/// Indices of the `⌈r · n⌉` highest scores, ties broken towards the lower
/// index, returned in ascending order.
pub fn top_rank_indices(scores: &[f64], ratio: f64) -> Vec<usize> {
    let k = pooled_size(ratio, scores.len());
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut idx = order[..k].to_vec();
    idx.sort_unstable();
    idx
}

/// Selected nodes and the induced subgraph.
/// Gap between the kept and dropped score sets: the distance any score
/// must move before the selection can change. Scores exactly equal across
/// the boundary are treated as structural ties (for example several nodes
/// whose reconstruction is exact) and the next distinct value is used.
/// Infinite when nothing is dropped.
fn selection_margin(scores: &[f64], idx: &[usize]) -> f64 {
    let mut selected = vec![false; scores.len()];
    idx.iter().for_each(|&i| selected[i] = true);
    let mut kept = Vec::with_capacity(idx.len());
    let mut dropped = Vec::with_capacity(scores.len() - idx.len());
    for (i, &s) in scores.iter().enumerate() {
        if selected[i] {
            kept.push(s);
        } else {
            dropped.push(s);
        }
    }
    let kept_min = kept.iter().copied().fold(f64::INFINITY, f64::min);
    let dropped_max = dropped.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if kept_min != dropped_max {
        return kept_min - dropped_max;
    }
    let tie = kept_min;
    let above = kept
        .iter()
        .copied()
        .filter(|&s| s != tie)
        .fold(f64::INFINITY, f64::min);
    let below = dropped
        .iter()
        .copied()
        .filter(|&s| s != tie)
        .fold(f64::NEG_INFINITY, f64::max);
    (above - tie).min(tie - below)
}

#[derive(Debug, Clone)]
pub struct PoolResult {
    /// Strictly increasing indices into the input node set.
    pub idx: Vec<usize>,
    pub pooled_features: Var,
    pub pooled_structure: SparseMatrix,
    /// Lowest selected score minus highest unselected score (`+∞` when
    /// nothing is dropped). Zero means the selection depended on
    /// tie-breaking.
    pub selection_margin: f64,
}

/// Keeps the top-ranked nodes and extracts the induced features and
/// structure.
pub fn top_rank_pool(
    tape: &mut Tape,
    scores: &[f64],
    ratio: f64,
    h: Var,
    structure: &SparseMatrix,
) -> Result<PoolResult> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Config(format!(
            "pooling ratio {ratio} outside (0, 1]"
        )));
    }
    let n = tape.value(h).rows();
    if scores.len() != n || structure.rows() != n || n == 0 {
        return Err(Error::shape(
            "top_rank_pool",
            format!(
                "{} scores, {n} feature rows, {}x{} structure",
                scores.len(),
                structure.rows(),
                structure.cols()
            ),
        ));
    }
    let idx = top_rank_indices(scores, ratio);
    let selection_margin = selection_margin(scores, &idx);
    let pooled_features = tape.row_select(h, &idx)?;
    let pooled_structure = structure.extract_submatrix(&idx)?;
    Ok(PoolResult {
        idx,
        pooled_features,
        pooled_structure,
        selection_margin,
    })
}
