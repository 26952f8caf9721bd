//! Define-by-run reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every operation of one forward pass in execution
//! order, which is already a topological order of the computation DAG.
//! [`Tape::backward`] walks it once in reverse. Sparse operands (adjacency,
//! hop masks) and selection indices are constants of the recorded
//! operation: no gradient flows into graph structure except through
//! value vectors that are themselves tape variables.
//!
//! Subgradient conventions: `relu'(0) = 0`; column-max ties route the
//! gradient to the lowest row index.

mod gradcheck;

use std::sync::Arc;

pub use gradcheck::{grad_check, grad_check_sampled, GradCheckReport, DEFAULT_EPS};

use crate::error::{Error, Result};
use crate::ops::simplex;
use crate::tensor::{SparseMatrix, Tensor};

/// Handle to a node on a [`Tape`]. Only meaningful for the tape that
/// created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Row-segmentation of a value vector: segment `s` covers
/// `offsets[s]..offsets[s + 1]`. CSR row offsets are the typical source.
pub type Segments = Arc<Vec<usize>>;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    Mul(Var, Var),
    MatMul(Var, Var),
    /// `s · x` with a constant sparse operand.
    SpMM(Arc<SparseMatrix>, Var),
    /// `S · x` where S has a fixed pattern and values from a `nnz x 1`
    /// variable.
    PatternMatMul {
        pattern: Arc<SparseMatrix>,
        values: Var,
        x: Var,
    },
    /// `x + 1 · b` for a `1 x m` row `b`.
    AddRow(Var, Var),
    Relu(Var),
    Tanh(Var),
    Log(Var),
    ConcatCols(Var, Var),
    RowMean(Var),
    ColMax {
        x: Var,
        argmax: Vec<usize>,
    },
    RowSelect {
        x: Var,
        idx: Vec<usize>,
    },
    SoftmaxRow(Var),
    SparsemaxRow(Var),
    SegmentSoftmax {
        x: Var,
        segments: Segments,
    },
    SegmentSparsemax {
        x: Var,
        segments: Segments,
        taus: Vec<f64>,
    },
    /// `a[:, :d] · h_p + a[:, d:] · h_q` for every stored `(p, q)` of the
    /// pattern, as a `nnz x 1` column.
    PairScores {
        h: Var,
        a: Var,
        pattern: Arc<SparseMatrix>,
    },
    Sum(Var),
    /// `−log softmax(logits)[label]` for a `1 x c` row.
    CrossEntropy {
        logits: Var,
        label: usize,
        probs: Vec<f64>,
    },
}

impl Op {
    fn parents(&self) -> Vec<Var> {
        use Op::*;
        match self {
            Leaf => vec![],
            Add(a, b) | Sub(a, b) | Mul(a, b) | MatMul(a, b) | AddRow(a, b) | ConcatCols(a, b) => {
                vec![*a, *b]
            }
            Scale(x, _)
            | SpMM(_, x)
            | Relu(x)
            | Tanh(x)
            | Log(x)
            | RowMean(x)
            | SoftmaxRow(x)
            | SparsemaxRow(x)
            | Sum(x) => vec![*x],
            PatternMatMul { values, x, .. } => vec![*values, *x],
            ColMax { x, .. } | RowSelect { x, .. } => vec![*x],
            SegmentSoftmax { x, .. } | SegmentSparsemax { x, .. } => vec![*x],
            PairScores { h, a, .. } => vec![*h, *a],
            CrossEntropy { logits, .. } => vec![*logits],
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    /// Accumulated gradient for leaves that require it.
    grad: Option<Tensor>,
}

/// Recording of one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers an input. Leaves with `requires_grad` receive gradients.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        let grad = requires_grad.then(|| Tensor::zeros(value.rows(), value.cols()));
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
            grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient accumulated on a leaf by previous [`Tape::backward`] calls.
    /// `None` for non-leaves and leaves without `requires_grad`.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            if let Some(g) = node.grad.as_mut() {
                g.data_mut().fill(0.0);
            }
        }
    }

    fn record(&mut self, op: Op, value: Tensor) -> Var {
        debug_assert!(value.is_finite(), "non-finite forward value in {op:?}");
        let requires_grad = op.parents().iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.record(Op::Add(a, b), v))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).sub(self.value(b))?;
        Ok(self.record(Op::Sub(a, b), v))
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Var {
        let v = self.value(x).scale(k);
        self.record(Op::Scale(x, k), v)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).mul_elem(self.value(b))?;
        Ok(self.record(Op::Mul(a, b), v))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.record(Op::MatMul(a, b), v))
    }

    pub fn spmm(&mut self, s: Arc<SparseMatrix>, x: Var) -> Result<Var> {
        let v = s.spmm(self.value(x))?;
        Ok(self.record(Op::SpMM(s, x), v))
    }

    /// `S · x` where `S` has the stored pattern of `pattern` and its values
    /// come from the `nnz x 1` variable `values`.
    pub fn pattern_matmul(
        &mut self,
        pattern: Arc<SparseMatrix>,
        values: Var,
        x: Var,
    ) -> Result<Var> {
        let vals = self.value(values);
        if vals.shape() != (pattern.nnz(), 1) {
            return Err(Error::shape(
                "pattern_matmul",
                format!(
                    "{:?} values for {} stored entries",
                    vals.shape(),
                    pattern.nnz()
                ),
            ));
        }
        let xv = self.value(x);
        if pattern.cols() != xv.rows() {
            return Err(Error::shape(
                "pattern_matmul",
                format!("{}x{} x {:?}", pattern.rows(), pattern.cols(), xv.shape()),
            ));
        }
        let mut out = Tensor::zeros(pattern.rows(), xv.cols());
        let vals = vals.data();
        for r in 0..pattern.rows() {
            let lo = pattern.row_offsets()[r];
            let (cols, _) = pattern.row(r);
            let out_row = out.row_mut(r);
            for (k, &c) in cols.iter().enumerate() {
                let w = vals[lo + k];
                for (o, &xv) in out_row.iter_mut().zip(xv.row(c)) {
                    *o += w * xv;
                }
            }
        }
        Ok(self.record(Op::PatternMatMul { pattern, values, x }, out))
    }

    /// Adds the `1 x m` row `b` to every row of `x`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(b));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(Error::shape(
                "add_row",
                format!("{:?} + {:?}", xv.shape(), bv.shape()),
            ));
        }
        let mut out = xv.clone();
        for r in 0..out.rows() {
            for (o, &bb) in out.row_mut(r).iter_mut().zip(bv.data()) {
                *o += bb;
            }
        }
        Ok(self.record(Op::AddRow(x, b), out))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x).map(|v| v.max(0.0));
        self.record(Op::Relu(x), v)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let v = self.value(x).map(f64::tanh);
        self.record(Op::Tanh(x), v)
    }

    /// Elementwise natural log; inputs must be strictly positive.
    pub fn log(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.data().iter().any(|&v| v <= 0.0) {
            return Err(Error::Contract("log of a non-positive value".into()));
        }
        let v = xv.map(f64::ln);
        Ok(self.record(Op::Log(x), v))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).concat_cols(self.value(b))?;
        Ok(self.record(Op::ConcatCols(a, b), v))
    }

    /// Mean over rows: `n x d -> 1 x d`.
    pub fn row_mean(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.rows() == 0 {
            return Err(Error::Contract("row_mean of an empty matrix".into()));
        }
        let n = xv.rows() as f64;
        let mut out = vec![0.0; xv.cols()];
        for r in 0..xv.rows() {
            for (o, &v) in out.iter_mut().zip(xv.row(r)) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= n);
        Ok(self.record(Op::RowMean(x), Tensor::row_vector(out)))
    }

    /// Maximum of every column: `n x d -> 1 x d`.
    pub fn col_max(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.rows() == 0 {
            return Err(Error::Contract("col_max of an empty matrix".into()));
        }
        let mut argmax = vec![0usize; xv.cols()];
        let mut out = xv.row(0).to_vec();
        for r in 1..xv.rows() {
            for (c, &v) in xv.row(r).iter().enumerate() {
                if v > out[c] {
                    out[c] = v;
                    argmax[c] = r;
                }
            }
        }
        Ok(self.record(Op::ColMax { x, argmax }, Tensor::row_vector(out)))
    }

    /// Gathers rows of `x` in the given order.
    pub fn row_select(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let v = self.value(x).select_rows(idx)?;
        Ok(self.record(
            Op::RowSelect {
                x,
                idx: idx.to_vec(),
            },
            v,
        ))
    }

    pub fn softmax_row(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let mut out = Tensor::zeros(xv.rows(), xv.cols());
        for r in 0..xv.rows() {
            simplex::softmax_into(xv.row(r), out.row_mut(r));
        }
        self.record(Op::SoftmaxRow(x), out)
    }

    pub fn sparsemax_row(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let mut out = Tensor::zeros(xv.rows(), xv.cols());
        for r in 0..xv.rows() {
            if xv.cols() > 0 {
                simplex::sparsemax_into(xv.row(r), out.row_mut(r));
            }
        }
        self.record(Op::SparsemaxRow(x), out)
    }

    fn check_segments(&self, x: Var, segments: &Segments, op: &'static str) -> Result<()> {
        let xv = self.value(x);
        let ok = xv.cols() == 1
            && segments.first() == Some(&0)
            && segments.last() == Some(&xv.rows())
            && segments.windows(2).all(|w| w[0] < w[1]);
        if ok {
            Ok(())
        } else {
            Err(Error::shape(
                op,
                format!(
                    "segments do not tile a nonempty-row {:?} column",
                    xv.shape()
                ),
            ))
        }
    }

    /// Softmax applied independently to each nonempty segment of a column.
    pub fn segment_softmax(&mut self, x: Var, segments: Segments) -> Result<Var> {
        self.check_segments(x, &segments, "segment_softmax")?;
        let xv = self.value(x).data();
        let mut out = vec![0.0; xv.len()];
        for w in segments.windows(2) {
            simplex::softmax_into(&xv[w[0]..w[1]], &mut out[w[0]..w[1]]);
        }
        Ok(self.record(Op::SegmentSoftmax { x, segments }, Tensor::column(out)))
    }

    /// Sparsemax applied independently to each nonempty segment of a column.
    pub fn segment_sparsemax(&mut self, x: Var, segments: Segments) -> Result<Var> {
        self.check_segments(x, &segments, "segment_sparsemax")?;
        let xv = self.value(x).data();
        let mut out = vec![0.0; xv.len()];
        let taus = segments
            .windows(2)
            .map(|w| simplex::sparsemax_into(&xv[w[0]..w[1]], &mut out[w[0]..w[1]]))
            .collect();
        Ok(self.record(
            Op::SegmentSparsemax { x, segments, taus },
            Tensor::column(out),
        ))
    }

    /// Attention logits `a · [h_p ‖ h_q]ᵀ` for every stored `(p, q)` of
    /// `pattern`, returned as an `nnz x 1` column in storage order.
    pub fn pair_scores(&mut self, h: Var, a: Var, pattern: Arc<SparseMatrix>) -> Result<Var> {
        let (hv, av) = (self.value(h), self.value(a));
        let d = hv.cols();
        if av.shape() != (1, 2 * d) || pattern.rows() != hv.rows() || pattern.cols() != hv.rows() {
            return Err(Error::shape(
                "pair_scores",
                format!(
                    "h {:?}, a {:?}, pattern {}x{}",
                    hv.shape(),
                    av.shape(),
                    pattern.rows(),
                    pattern.cols()
                ),
            ));
        }
        let (a_src, a_dst) = av.data().split_at(d);
        let dot =
            |w: &[f64], r: usize| -> f64 { w.iter().zip(hv.row(r)).map(|(x, y)| x * y).sum() };
        let src: Vec<f64> = (0..hv.rows()).map(|r| dot(a_src, r)).collect();
        let dst: Vec<f64> = (0..hv.rows()).map(|r| dot(a_dst, r)).collect();
        let out: Vec<f64> = pattern.iter().map(|(p, q, _)| src[p] + dst[q]).collect();
        Ok(self.record(Op::PairScores { h, a, pattern }, Tensor::column(out)))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let v = Tensor::scalar(self.value(x).sum());
        self.record(Op::Sum(x), v)
    }

    /// Cross-entropy `−log softmax(logits)[label]` for a `1 x c` logit row.
    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var> {
        let lv = self.value(logits);
        if lv.rows() != 1 {
            return Err(Error::shape(
                "cross_entropy",
                format!("logits must be a row, got {:?}", lv.shape()),
            ));
        }
        if label >= lv.cols() {
            return Err(Error::Index(format!(
                "label {label} out of range for {} classes",
                lv.cols()
            )));
        }
        let max = lv.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + lv.data().iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let loss = log_z - lv.data()[label];
        let probs = simplex::softmax(lv.data());
        Ok(self.record(
            Op::CrossEntropy {
                logits,
                label,
                probs,
            },
            Tensor::scalar(loss),
        ))
    }

    /// Backpropagates from a `1 x 1` node. Gradients accumulate into every
    /// `requires_grad` leaf; call [`Tape::zero_grad`] to reset them.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                self.nodes[i]
                    .grad
                    .as_mut()
                    .expect("requires_grad leaf has a grad buffer")
                    .add_assign(&g)?;
                continue;
            }
            for (parent, pg) in self.local_backward(i, &g)? {
                if !self.nodes[parent.0].requires_grad {
                    continue;
                }
                match &mut grads[parent.0] {
                    Some(acc) => acc.add_assign(&pg)?,
                    slot @ None => *slot = Some(pg),
                }
            }
        }
        Ok(())
    }

    /// Vector-Jacobian products of node `i` for each parent.
    fn local_backward(&self, i: usize, g: &Tensor) -> Result<Vec<(Var, Tensor)>> {
        let node = &self.nodes[i];
        let out = &node.value;
        let val = |v: Var| &self.nodes[v.0].value;
        Ok(match &node.op {
            Op::Leaf => vec![],
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Sub(a, b) => vec![(*a, g.clone()), (*b, g.scale(-1.0))],
            Op::Scale(x, k) => vec![(*x, g.scale(*k))],
            Op::Mul(a, b) => vec![(*a, g.mul_elem(val(*b))?), (*b, g.mul_elem(val(*a))?)],
            Op::MatMul(a, b) => vec![(*a, g.matmul_t(val(*b))?), (*b, val(*a).t_matmul(g)?)],
            Op::SpMM(s, x) => vec![(*x, s.t_spmm(g)?)],
            Op::PatternMatMul { pattern, values, x } => {
                let xv = val(*x);
                let mut dvals = Vec::with_capacity(pattern.nnz());
                for (r, c, _) in pattern.iter() {
                    dvals.push(g.row(r).iter().zip(xv.row(c)).map(|(a, b)| a * b).sum());
                }
                let weighted = pattern.with_values_unpruned(val(*values).data());
                vec![(*values, Tensor::column(dvals)), (*x, weighted.t_spmm(g)?)]
            }
            Op::AddRow(x, b) => {
                let mut db = vec![0.0; g.cols()];
                for r in 0..g.rows() {
                    for (d, &gv) in db.iter_mut().zip(g.row(r)) {
                        *d += gv;
                    }
                }
                vec![(*x, g.clone()), (*b, Tensor::row_vector(db))]
            }
            Op::Relu(x) => {
                let dx = g.zip_with(
                    val(*x),
                    |gv, xv| if xv > 0.0 { relu_slope() * gv } else { 0.0 },
                );
                vec![(*x, dx)]
            }
            Op::Tanh(x) => vec![(*x, g.zip_with(out, |gv, y| gv * (1.0 - y * y)))],
            Op::Log(x) => vec![(*x, g.zip_with(val(*x), |gv, xv| gv / xv))],
            Op::ConcatCols(a, b) => {
                let ca = val(*a).cols();
                let mut ga = Tensor::zeros(g.rows(), ca);
                let mut gb = Tensor::zeros(g.rows(), g.cols() - ca);
                for r in 0..g.rows() {
                    let (left, right) = g.row(r).split_at(ca);
                    ga.row_mut(r).copy_from_slice(left);
                    gb.row_mut(r).copy_from_slice(right);
                }
                vec![(*a, ga), (*b, gb)]
            }
            Op::RowMean(x) => {
                let n = val(*x).rows();
                let mut dx = Tensor::zeros(n, g.cols());
                let share = g.scale(1.0 / n as f64);
                for r in 0..n {
                    dx.row_mut(r).copy_from_slice(share.data());
                }
                vec![(*x, dx)]
            }
            Op::ColMax { x, argmax } => {
                let xv = val(*x);
                let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                for (c, &r) in argmax.iter().enumerate() {
                    dx.set(r, c, g.data()[c]);
                }
                vec![(*x, dx)]
            }
            Op::RowSelect { x, idx } => {
                let xv = val(*x);
                let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                for (k, &r) in idx.iter().enumerate() {
                    for (d, &gv) in dx.row_mut(r).iter_mut().zip(g.row(k)) {
                        *d += gv;
                    }
                }
                vec![(*x, dx)]
            }
            Op::SoftmaxRow(x) => {
                let mut dx = Tensor::zeros(out.rows(), out.cols());
                for r in 0..out.rows() {
                    softmax_vjp(out.row(r), g.row(r), dx.row_mut(r));
                }
                vec![(*x, dx)]
            }
            Op::SparsemaxRow(x) => {
                let mut dx = Tensor::zeros(out.rows(), out.cols());
                for r in 0..out.rows() {
                    sparsemax_vjp(out.row(r), g.row(r), dx.row_mut(r));
                }
                vec![(*x, dx)]
            }
            Op::SegmentSoftmax { x, segments } => {
                let mut dx = vec![0.0; out.len()];
                for w in segments.windows(2) {
                    let s = w[0]..w[1];
                    softmax_vjp(&out.data()[s.clone()], &g.data()[s.clone()], &mut dx[s]);
                }
                vec![(*x, Tensor::column(dx))]
            }
            Op::SegmentSparsemax { x, segments, .. } => {
                let mut dx = vec![0.0; out.len()];
                for w in segments.windows(2) {
                    let s = w[0]..w[1];
                    sparsemax_vjp(&out.data()[s.clone()], &g.data()[s.clone()], &mut dx[s]);
                }
                vec![(*x, Tensor::column(dx))]
            }
            Op::PairScores { h, a, pattern } => {
                let (hv, av) = (val(*h), val(*a));
                let d = hv.cols();
                let (a_src, a_dst) = av.data().split_at(d);
                // Accumulate per-node weights first: gsrc[p] = Σ_q g(p,q), gdst[q] = Σ_p g(p,q).
                let mut gsrc = vec![0.0; hv.rows()];
                let mut gdst = vec![0.0; hv.rows()];
                for ((p, q, _), &gv) in pattern.iter().zip(g.data()) {
                    gsrc[p] += gv;
                    gdst[q] += gv;
                }
                let mut dh = Tensor::zeros(hv.rows(), d);
                let mut da = vec![0.0; 2 * d];
                for r in 0..hv.rows() {
                    let hr = hv.row(r);
                    for k in 0..d {
                        da[k] += gsrc[r] * hr[k];
                        da[d + k] += gdst[r] * hr[k];
                    }
                    for (k, dv) in dh.row_mut(r).iter_mut().enumerate() {
                        *dv = gsrc[r] * a_src[k] + gdst[r] * a_dst[k];
                    }
                }
                vec![(*h, dh), (*a, Tensor::row_vector(da))]
            }
            Op::Sum(x) => {
                let xv = val(*x);
                vec![(*x, Tensor::full(xv.rows(), xv.cols(), g.data()[0]))]
            }
            Op::CrossEntropy {
                logits,
                label,
                probs,
            } => {
                let scale = g.data()[0];
                let mut d = probs.clone();
                d[*label] -= 1.0;
                d.iter_mut().for_each(|v| *v *= scale);
                vec![(*logits, Tensor::row_vector(d))]
            }
        })
    }

    /// Smallest distance of any recorded input to a point where the
    /// recorded operation is not differentiable: ReLU inputs near zero,
    /// near-tied column maxima, sparsemax entries near the threshold.
    /// Exact zeros and exact ties are skipped: they arise structurally
    /// (e.g. ReLU of a ReLU output) and stay put under small perturbations.
    pub fn kink_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for node in &self.nodes {
            match &node.op {
                Op::Relu(x) => {
                    for &v in self.nodes[x.0].value.data() {
                        if v != 0.0 {
                            margin = margin.min(v.abs());
                        }
                    }
                }
                Op::ColMax { x, argmax } => {
                    let xv = &self.nodes[x.0].value;
                    for (c, &best) in argmax.iter().enumerate() {
                        let top = xv.get(best, c);
                        for r in 0..xv.rows() {
                            let gap = top - xv.get(r, c);
                            if r != best && gap != 0.0 {
                                margin = margin.min(gap);
                            }
                        }
                    }
                }
                Op::SegmentSparsemax { x, segments, taus } => {
                    let xv = self.nodes[x.0].value.data();
                    for (w, &tau) in segments.windows(2).zip(taus) {
                        for &v in &xv[w[0]..w[1]] {
                            if v != tau {
                                margin = margin.min((v - tau).abs());
                            }
                        }
                    }
                }
                Op::SparsemaxRow(x) => {
                    let xv = &self.nodes[x.0].value;
                    for r in 0..xv.rows() {
                        let tau = simplex::tau_threshold(xv.row(r)).tau;
                        for &v in xv.row(r) {
                            if v != tau {
                                margin = margin.min((v - tau).abs());
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        margin
    }
}

/// `dx = y ⊙ (g − ⟨g, y⟩)`.
fn softmax_vjp(y: &[f64], g: &[f64], dx: &mut [f64]) {
    let dot: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
    for ((d, &yi), &gi) in dx.iter_mut().zip(y).zip(g) {
        *d = yi * (gi - dot);
    }
}

/// Jacobian of sparsemax restricted to its support `S`:
/// `dx_i = g_i − mean_{j∈S} g_j` for `i ∈ S`, zero elsewhere.
fn sparsemax_vjp(y: &[f64], g: &[f64], dx: &mut [f64]) {
    let (mut total, mut count) = (0.0, 0usize);
    for (&yi, &gi) in y.iter().zip(g) {
        if yi > 0.0 {
            total += gi;
            count += 1;
        }
    }
    let mean = if count > 0 { total / count as f64 } else { 0.0 };
    for ((d, &yi), &gi) in dx.iter_mut().zip(y).zip(g) {
        *d = if yi > 0.0 { gi - mean } else { 0.0 };
    }
}

#[cfg(not(feature = "fault-injection"))]
#[inline(always)]
fn relu_slope() -> f64 {
    1.0
}

#[cfg(feature = "fault-injection")]
#[inline]
fn relu_slope() -> f64 {
    if fault::corrupted() {
        1.5
    } else {
        1.0
    }
}

/// Negative-control switch for the gradient checker: when enabled the ReLU
/// backward rule is scaled by 1.5.
#[cfg(feature = "fault-injection")]
pub mod fault {
    use std::sync::atomic::{AtomicBool, Ordering};

    static CORRUPT_RELU: AtomicBool = AtomicBool::new(false);

    pub fn corrupt_relu_backward(on: bool) {
        CORRUPT_RELU.store(on, Ordering::SeqCst);
    }

    pub(super) fn corrupted() -> bool {
        CORRUPT_RELU.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests;
