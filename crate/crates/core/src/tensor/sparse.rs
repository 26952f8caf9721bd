use std::collections::BTreeMap;

use super::Tensor;
use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted, unique column indices per row
/// and no stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Validates raw CSR arrays. Explicit zeros are rejected; use
    /// [`SparseMatrix::pruned`] to drop them first.
    pub fn new(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != rows + 1 {
            return Err(Error::shape(
                "csr",
                format!("{} offsets for {rows} rows", row_offsets.len()),
            ));
        }
        if row_offsets[0] != 0 || row_offsets[rows] != values.len() {
            return Err(Error::shape("csr", "offsets do not span the value array"));
        }
        if col_indices.len() != values.len() {
            return Err(Error::shape("csr", "column index / value length mismatch"));
        }
        for r in 0..rows {
            let (lo, hi) = (row_offsets[r], row_offsets[r + 1]);
            if lo > hi {
                return Err(Error::shape("csr", format!("offsets decrease at row {r}")));
            }
            let cols_r = &col_indices[lo..hi];
            if cols_r.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Index(format!(
                    "row {r}: column indices not strictly increasing"
                )));
            }
            if cols_r.last().is_some_and(|&c| c >= cols) {
                return Err(Error::Index(format!("row {r}: column index >= {cols}")));
            }
        }
        if values.iter().any(|&v| v == 0.0 || !v.is_finite()) {
            return Err(Error::Contract(
                "stored values must be finite and nonzero".into(),
            ));
        }
        Ok(Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_offsets: vec![0; rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds from `(row, col, value)` triplets. Duplicates are summed and
    /// resulting zeros dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut b = SparseBuilder::new(rows, cols);
        for (r, c, v) in triplets {
            b.add(r, c, v)?;
        }
        Ok(b.build())
    }

    pub fn from_dense(t: &Tensor) -> Self {
        let mut row_offsets = Vec::with_capacity(t.rows() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for r in 0..t.rows() {
            for (c, &v) in t.row(r).iter().enumerate() {
                if v != 0.0 {
                    col_indices.push(c);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        Self {
            rows: t.rows(),
            cols: t.cols(),
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Same pattern, new values; zeros in `values` are pruned.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::shape(
                "with_values",
                format!("{} values for {} stored entries", values.len(), self.nnz()),
            ));
        }
        Ok(Self {
            values,
            ..self.clone()
        }
        .pruned())
    }

    /// Same pattern with replacement values, zeros kept in storage. Only
    /// for transient use inside this crate.
    pub(crate) fn with_values_unpruned(&self, values: &[f64]) -> SparseMatrix {
        debug_assert_eq!(values.len(), self.nnz());
        SparseMatrix {
            values: values.to_vec(),
            ..self.clone()
        }
    }

    /// Drops stored zeros.
    pub fn pruned(self) -> Self {
        if self.values.iter().all(|&v| v != 0.0) {
            return self;
        }
        let mut row_offsets = Vec::with_capacity(self.rows + 1);
        let mut col_indices = Vec::with_capacity(self.values.len());
        let mut values = Vec::with_capacity(self.values.len());
        row_offsets.push(0);
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if v != 0.0 {
                    col_indices.push(c);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `r`.
    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[r], self.row_offsets[r + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    /// Iterates `(row, col, value)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (c, v) = self.row(r);
            c.iter().zip(v).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map_or(0.0, |k| vals[k])
    }

    pub fn to_dense(&self) -> Tensor {
        let mut t = Tensor::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            t.set(r, c, v);
        }
        t
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && self.iter().all(|(r, c, v)| self.get(c, r) == v)
    }

    pub fn has_diagonal_entries(&self) -> bool {
        self.iter().any(|(r, c, _)| r == c)
    }

    /// Row sums, i.e. the diagonal of the degree matrix.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.row(r).1.iter().sum()).collect()
    }

    /// Sparse-dense product `self · d`.
    pub fn spmm(&self, d: &Tensor) -> Result<Tensor> {
        if self.cols != d.rows() {
            return Err(Error::shape(
                "spmm",
                format!("{}x{} x {:?}", self.rows, self.cols, d.shape()),
            ));
        }
        let mut out = Tensor::zeros(self.rows, d.cols());
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            let out_row = out.row_mut(r);
            for (&c, &v) in cols.iter().zip(vals) {
                for (o, &x) in out_row.iter_mut().zip(d.row(c)) {
                    *o += v * x;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · d`.
    pub fn t_spmm(&self, d: &Tensor) -> Result<Tensor> {
        if self.rows != d.rows() {
            return Err(Error::shape(
                "t_spmm",
                format!("({}x{})ᵀ x {:?}", self.rows, self.cols, d.shape()),
            ));
        }
        let mut out = Tensor::zeros(self.cols, d.cols());
        for (r, c, v) in self.iter() {
            let src = d.row(r);
            for (o, &x) in out.row_mut(c).iter_mut().zip(src) {
                *o += v * x;
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut b = SparseBuilder::new(self.cols, self.rows);
        for (r, c, v) in self.iter() {
            b.push_unchecked(c, r, v);
        }
        b.build()
    }

    /// Induced submatrix on `idx` (rows and columns), `result(a, b) =
    /// self(idx[a], idx[b])`. `idx` must be strictly increasing.
    pub fn extract_submatrix(&self, idx: &[usize]) -> Result<SparseMatrix> {
        if !self.is_square() {
            return Err(Error::shape(
                "extract_submatrix",
                format!("{}x{} is not square", self.rows, self.cols),
            ));
        }
        if idx.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Index("selection must be strictly increasing".into()));
        }
        if idx.last().is_some_and(|&i| i >= self.rows) {
            return Err(Error::Index(format!(
                "selection exceeds {} rows",
                self.rows
            )));
        }
        // old index -> new index
        let mut remap = vec![usize::MAX; self.cols];
        for (new, &old) in idx.iter().enumerate() {
            remap[old] = new;
        }
        let mut row_offsets = Vec::with_capacity(idx.len() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for &old_r in idx {
            let (cols, vals) = self.row(old_r);
            for (&c, &v) in cols.iter().zip(vals) {
                let nc = remap[c];
                if nc != usize::MAX {
                    // remap is monotone on idx, so order is preserved
                    col_indices.push(nc);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        Ok(SparseMatrix {
            rows: idx.len(),
            cols: idx.len(),
            row_offsets,
            col_indices,
            values,
        })
    }

    /// `self + I` on a square matrix.
    pub fn with_self_loops(&self) -> Result<SparseMatrix> {
        if !self.is_square() {
            return Err(Error::shape("with_self_loops", "matrix is not square"));
        }
        let mut b = SparseBuilder::new(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            b.push_unchecked(r, c, v);
        }
        for i in 0..self.rows {
            b.push_unchecked(i, i, 1.0);
        }
        Ok(b.build())
    }

    /// `D̃^{-1/2} (A + I) D̃^{-1/2}` where `D̃` is the degree diagonal of
    /// `A + I`.
    pub fn sym_normalized_with_self_loops(&self) -> Result<SparseMatrix> {
        let a_tilde = self.with_self_loops()?;
        let inv_sqrt: Vec<f64> = a_tilde
            .row_sums()
            .into_iter()
            .map(|d| if d > 0.0 { d.sqrt().recip() } else { 0.0 })
            .collect();
        let values = a_tilde
            .iter()
            .map(|(r, c, v)| inv_sqrt[r] * v * inv_sqrt[c])
            .collect();
        a_tilde.with_values(values)
    }

    /// `D⁻¹ A`; rows with zero degree stay empty.
    pub fn row_normalized(&self) -> SparseMatrix {
        let sums = self.row_sums();
        let values = self
            .iter()
            .map(|(r, _, v)| if sums[r] != 0.0 { v / sums[r] } else { 0.0 })
            .collect();
        self.with_values(values).expect("same pattern")
    }

    /// Same pattern with every stored value set to one.
    pub fn pattern(&self) -> SparseMatrix {
        SparseMatrix {
            values: vec![1.0; self.values.len()],
            ..self.clone()
        }
    }
}

/// Accumulates triplets, then sorts and merges them into CSR.
#[derive(Debug)]
pub struct SparseBuilder {
    rows: usize,
    cols: usize,
    entries: Vec<BTreeMap<usize, f64>>,
}

impl SparseBuilder {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![BTreeMap::new(); rows],
        }
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) -> Result<()> {
        if r >= self.rows || c >= self.cols {
            return Err(Error::Index(format!(
                "({r}, {c}) outside {}x{}",
                self.rows, self.cols
            )));
        }
        self.push_unchecked(r, c, v);
        Ok(())
    }

    fn push_unchecked(&mut self, r: usize, c: usize, v: f64) {
        *self.entries[r].entry(c).or_insert(0.0) += v;
    }

    /// Sets the entry, replacing any accumulated value.
    pub fn set(&mut self, r: usize, c: usize, v: f64) -> Result<()> {
        if r >= self.rows || c >= self.cols {
            return Err(Error::Index(format!(
                "({r}, {c}) outside {}x{}",
                self.rows, self.cols
            )));
        }
        self.entries[r].insert(c, v);
        Ok(())
    }

    pub fn build(self) -> SparseMatrix {
        let mut row_offsets = Vec::with_capacity(self.rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for row in self.entries {
            for (c, v) in row {
                if v != 0.0 {
                    col_indices.push(c);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        SparseMatrix {
            rows: self.rows,
            cols: self.cols,
            row_offsets,
            col_indices,
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> SparseMatrix {
        SparseMatrix::from_triplets(3, 3, [(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)])
            .unwrap()
    }

    #[test]
    fn spmm_zero_and_identity() {
        let d = Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        assert_eq!(
            SparseMatrix::zeros(2, 3).spmm(&d).unwrap(),
            Tensor::zeros(2, 2)
        );
        assert_eq!(SparseMatrix::identity(3).spmm(&d).unwrap(), d);
    }

    #[test]
    fn spmm_swap() {
        let s = SparseMatrix::from_dense(&Tensor::from_rows(&[[0.0, 1.0], [1.0, 0.0]]));
        let d = Tensor::from_rows(&[[1.0], [3.0]]);
        assert_eq!(s.spmm(&d).unwrap().data(), &[3.0, 1.0]);
    }

    #[test]
    fn spmm_shape_error() {
        let s = SparseMatrix::identity(2);
        assert!(s.spmm(&Tensor::zeros(3, 1)).is_err());
    }

    #[test]
    fn extract_submatrix_cases() {
        let a = path3();
        assert_eq!(a.extract_submatrix(&[0, 1, 2]).unwrap(), a);
        let empty = a.extract_submatrix(&[]).unwrap();
        assert_eq!((empty.rows(), empty.cols(), empty.nnz()), (0, 0, 0));
        let ends = a.extract_submatrix(&[0, 2]).unwrap();
        assert_eq!(ends.to_dense(), Tensor::zeros(2, 2));
        let mid = a.extract_submatrix(&[1, 2]).unwrap();
        assert_eq!(mid.to_dense(), Tensor::from_rows(&[[0.0, 1.0], [1.0, 0.0]]));
    }

    #[test]
    fn extract_submatrix_rejects_bad_index() {
        let a = path3();
        assert!(matches!(a.extract_submatrix(&[2, 0]), Err(Error::Index(_))));
        assert!(matches!(a.extract_submatrix(&[0, 3]), Err(Error::Index(_))));
        assert!(matches!(a.extract_submatrix(&[1, 1]), Err(Error::Index(_))));
    }

    #[test]
    fn new_validates_structure() {
        assert!(SparseMatrix::new(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::new(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
        assert!(SparseMatrix::new(1, 2, vec![0, 1], vec![0], vec![0.0]).is_err());
        assert!(SparseMatrix::new(2, 2, vec![0, 1], vec![0], vec![1.0]).is_err());
        assert!(SparseMatrix::new(1, 2, vec![0, 2], vec![0, 1], vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn builder_merges_and_prunes() {
        let s = SparseMatrix::from_triplets(
            2,
            2,
            [(0, 1, 1.0), (0, 1, -1.0), (1, 0, 2.0), (1, 0, 1.0)],
        )
        .unwrap();
        assert_eq!(s.nnz(), 1);
        assert_eq!(s.get(1, 0), 3.0);
    }

    #[test]
    fn sym_normalization_of_single_edge() {
        let a = SparseMatrix::from_triplets(2, 2, [(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let n = a.sym_normalized_with_self_loops().unwrap();
        for (_, _, v) in n.iter() {
            assert!((v - 0.5).abs() < 1e-15);
        }
        assert_eq!(n.nnz(), 4);
    }

    #[test]
    fn transpose_roundtrip() {
        let s = SparseMatrix::from_triplets(2, 3, [(0, 2, 1.5), (1, 0, -2.0)]).unwrap();
        assert_eq!(s.transpose().transpose(), s);
        assert_eq!(s.transpose().to_dense(), s.to_dense().transpose());
    }
}
