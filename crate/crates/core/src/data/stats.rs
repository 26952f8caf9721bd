use std::fmt;

use super::Dataset;

/// Summary counts in the layout of the usual benchmark statistics table.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub num_graphs: usize,
    pub num_nodes: usize,
    pub num_classes: usize,
    pub avg_nodes: f64,
    /// Each undirected edge counted once. This is the convention of the
    /// published statistics for the TU benchmarks.
    pub avg_edges_undirected: f64,
    /// Stored adjacency entries, i.e. both directions of every edge.
    pub avg_edges_directed: f64,
}

impl DatasetStats {
    pub fn of(ds: &Dataset) -> Self {
        let num_graphs = ds.graphs.len();
        let num_nodes: usize = ds.graphs.iter().map(|g| g.num_nodes()).sum();
        let directed: usize = ds.graphs.iter().map(|g| g.adjacency().nnz()).sum();
        let denom = num_graphs.max(1) as f64;
        Self {
            num_graphs,
            num_nodes,
            num_classes: ds.num_classes,
            avg_nodes: num_nodes as f64 / denom,
            avg_edges_undirected: directed as f64 / 2.0 / denom,
            avg_edges_directed: directed as f64 / denom,
        }
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "graphs               {}", self.num_graphs)?;
        writeln!(f, "nodes                {}", self.num_nodes)?;
        writeln!(f, "avg nodes            {:.2}", self.avg_nodes)?;
        writeln!(f, "avg edges            {:.2}", self.avg_edges_undirected)?;
        writeln!(f, "avg edges (directed) {:.2}", self.avg_edges_directed)?;
        write!(f, "classes              {}", self.num_classes)
    }
}
