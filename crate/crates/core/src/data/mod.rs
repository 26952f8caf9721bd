//! Graph datasets: TU-format ingestion, feature encoding, splits, synthetic
//! corpora and the archive fetcher.

mod features;
mod fetch;
mod split;
mod stats;
mod synth;
mod tu;

pub use features::{encode_features, FeatureScheme, NodeData};
pub use fetch::{fetch_dataset, FetchOutcome, DEFAULT_BASE_URL, KNOWN_DATASETS};
pub use split::{split, SplitSpec};
pub use stats::DatasetStats;
pub use synth::{synth_dataset, SynthKind};
pub use tu::{parse_tu_dataset, parse_tu_dataset_with, read_tu_raw, RawTuDataset};

use crate::error::{Error, Result};
use crate::tensor::{SparseMatrix, Tensor};

/// One graph: symmetric loop-free adjacency, node features and class.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInstance {
    adjacency: SparseMatrix,
    features: Tensor,
    label: usize,
}

impl GraphInstance {
    pub fn new(adjacency: SparseMatrix, features: Tensor, label: usize) -> Result<Self> {
        if !adjacency.is_square() || adjacency.rows() != features.rows() {
            return Err(Error::shape(
                "graph",
                format!(
                    "adjacency {}x{} with {} feature rows",
                    adjacency.rows(),
                    adjacency.cols(),
                    features.rows()
                ),
            ));
        }
        if adjacency.has_diagonal_entries() {
            return Err(Error::Contract(
                "adjacency must not store self-loops".into(),
            ));
        }
        if !adjacency.is_symmetric() {
            return Err(Error::Contract("adjacency must be symmetric".into()));
        }
        if !features.is_finite() {
            return Err(Error::Contract("node features must be finite".into()));
        }
        Ok(Self {
            adjacency,
            features,
            label,
        })
    }

    /// Builds an unweighted graph from an undirected edge list.
    pub fn from_edges(
        num_nodes: usize,
        edges: &[(usize, usize)],
        features: Tensor,
        label: usize,
    ) -> Result<Self> {
        let mut b = crate::tensor::SparseBuilder::new(num_nodes, num_nodes);
        for &(u, v) in edges {
            if u == v {
                continue;
            }
            b.set(u, v, 1.0)?;
            b.set(v, u, 1.0)?;
        }
        Self::new(b.build(), features, label)
    }

    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adjacency
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.rows()
    }

    /// Undirected edge count (each stored pair counted once).
    pub fn num_edges(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    /// Same graph with node `i` moved to position `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes();
        let mut seen = vec![false; n];
        if perm.len() != n
            || perm
                .iter()
                .any(|&p| p >= n || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::Index("not a permutation".into()));
        }
        let adjacency = SparseMatrix::from_triplets(
            n,
            n,
            self.adjacency.iter().map(|(r, c, v)| (perm[r], perm[c], v)),
        )?;
        let mut features = Tensor::zeros(n, self.features.cols());
        for (i, &p) in perm.iter().enumerate() {
            features.row_mut(p).copy_from_slice(self.features.row(i));
        }
        Self::new(adjacency, features, self.label)
    }

    pub fn with_features(&self, features: Tensor) -> Result<Self> {
        Self::new(self.adjacency.clone(), features, self.label)
    }
}

/// A labelled graph collection with uniform feature width.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub graphs: Vec<GraphInstance>,
    pub num_classes: usize,
    pub feature_dim: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        graphs: Vec<GraphInstance>,
        num_classes: usize,
    ) -> Result<Self> {
        let feature_dim = graphs.first().map_or(0, |g| g.features.cols());
        for (i, g) in graphs.iter().enumerate() {
            if g.features.cols() != feature_dim {
                return Err(Error::Contract(format!(
                    "graph {i} has {} feature columns, expected {feature_dim}",
                    g.features.cols()
                )));
            }
            if g.label >= num_classes {
                return Err(Error::Contract(format!(
                    "graph {i} label {} >= {num_classes} classes",
                    g.label
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            graphs,
            num_classes,
            feature_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn stats(&self) -> DatasetStats {
        DatasetStats::of(self)
    }
}
