//! Reader for the TU graph-kernel benchmark layout.
//!
//! A dataset `DS` lives in a directory holding `DS_A.txt` (one `i, j` pair
//! of 1-based global node ids per line), `DS_graph_indicator.txt` (graph id
//! of each node), `DS_graph_labels.txt` (one class per graph) and optionally
//! `DS_node_labels.txt` / `DS_node_attributes.txt`.

use std::fs;
use std::path::{Path, PathBuf};

use super::{encode_features, Dataset, FeatureScheme, GraphInstance, NodeData};
use crate::error::{Error, Result};
use crate::tensor::{SparseBuilder, Tensor};

/// File contents before per-graph assembly.
#[derive(Debug, Clone)]
pub struct RawTuDataset {
    pub name: String,
    /// Zero-based graph of each global node.
    pub graph_of_node: Vec<usize>,
    /// Zero-based `(u, v)` global node pairs as listed (directed).
    pub edges: Vec<(usize, usize)>,
    /// Raw integer graph labels in file order.
    pub graph_labels: Vec<i64>,
    pub nodes: NodeData,
}

fn dataset_name(dir: &Path) -> Result<String> {
    if let Some(name) = dir.file_name().and_then(|s| s.to_str()) {
        if dir.join(format!("{name}_A.txt")).is_file() {
            return Ok(name.to_string());
        }
    }
    // Fall back to whatever `*_A.txt` the directory holds.
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries.flatten() {
        let file = entry.file_name();
        if let Some(stem) = file.to_str().and_then(|f| f.strip_suffix("_A.txt")) {
            return Ok(stem.to_string());
        }
    }
    Err(Error::Format {
        file: dir.join("<DS>_A.txt").display().to_string(),
        line: None,
        msg: "missing mandatory edge list".into(),
    })
}

fn read_required(path: &Path) -> Result<String> {
    if !path.is_file() {
        return Err(Error::Format {
            file: path.display().to_string(),
            line: None,
            msg: "missing mandatory file".into(),
        });
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_optional(path: &Path) -> Result<Option<String>> {
    if path.is_file() {
        fs::read_to_string(path)
            .map(Some)
            .map_err(|e| Error::io(path, e))
    } else {
        Ok(None)
    }
}

fn format_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        file: path.display().to_string(),
        line: Some(line),
        msg: msg.into(),
    }
}

/// Non-blank lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_ints(path: &Path, text: &str) -> Result<Vec<i64>> {
    lines(text)
        .map(|(no, l)| {
            l.parse::<i64>()
                .map_err(|_| format_err(path, no, format!("expected an integer, got `{l}`")))
        })
        .collect()
}

/// Reads the TU files under `dir` without building graphs.
pub fn read_tu_raw(dir: impl AsRef<Path>) -> Result<RawTuDataset> {
    let dir = dir.as_ref();
    let name = dataset_name(dir)?;
    let file = |suffix: &str| -> PathBuf { dir.join(format!("{name}_{suffix}.txt")) };

    let indicator_path = file("graph_indicator");
    let indicator = parse_ints(&indicator_path, &read_required(&indicator_path)?)?;
    let labels_path = file("graph_labels");
    let graph_labels = parse_ints(&labels_path, &read_required(&labels_path)?)?;
    let num_graphs = graph_labels.len();
    let num_nodes = indicator.len();

    let mut graph_of_node = Vec::with_capacity(num_nodes);
    for (i, &g) in indicator.iter().enumerate() {
        if g < 1 || g as usize > num_graphs {
            return Err(format_err(
                &indicator_path,
                i + 1,
                format!("graph id {g} outside 1..={num_graphs}"),
            ));
        }
        graph_of_node.push(g as usize - 1);
    }

    let edges_path = file("A");
    let edge_text = read_required(&edges_path)?;
    let mut edges = Vec::new();
    for (no, l) in lines(&edge_text) {
        let mut parts = l.split(',').map(str::trim);
        let parse = |s: Option<&str>| -> Result<usize> {
            let s = s.ok_or_else(|| format_err(&edges_path, no, "expected `i, j`"))?;
            let id: usize = s
                .parse()
                .map_err(|_| format_err(&edges_path, no, format!("bad node id `{s}`")))?;
            if id == 0 || id > num_nodes {
                return Err(format_err(
                    &edges_path,
                    no,
                    format!("dangling node reference {id} (dataset has {num_nodes} nodes)"),
                ));
            }
            Ok(id - 1)
        };
        let (u, v) = (parse(parts.next())?, parse(parts.next())?);
        if parts.next().is_some() {
            return Err(format_err(&edges_path, no, "expected exactly two node ids"));
        }
        if graph_of_node[u] != graph_of_node[v] {
            return Err(format_err(
                &edges_path,
                no,
                "edge joins nodes of different graphs",
            ));
        }
        edges.push((u, v));
    }

    let node_labels_path = file("node_labels");
    let labels = match read_optional(&node_labels_path)? {
        Some(text) => {
            let l = parse_ints(&node_labels_path, &text)?;
            if l.len() != num_nodes {
                return Err(format_err(
                    &node_labels_path,
                    l.len(),
                    format!("{} node labels for {num_nodes} nodes", l.len()),
                ));
            }
            Some(l)
        }
        None => None,
    };

    let attr_path = file("node_attributes");
    let attributes = match read_optional(&attr_path)? {
        Some(text) => {
            let mut data = Vec::with_capacity(num_nodes * 4);
            let mut width = None;
            let mut rows = 0;
            for (no, l) in lines(&text) {
                let row: Vec<f64> = l
                    .split(',')
                    .map(|s| {
                        let s = s.trim();
                        s.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| {
                                format_err(&attr_path, no, format!("bad attribute `{s}`"))
                            })
                    })
                    .collect::<Result<_>>()?;
                match width {
                    None => width = Some(row.len()),
                    Some(w) if w != row.len() => {
                        return Err(format_err(&attr_path, no, "ragged attribute row"))
                    }
                    _ => {}
                }
                data.extend(row);
                rows += 1;
            }
            if rows != num_nodes {
                return Err(format_err(
                    &attr_path,
                    rows,
                    format!("{rows} attribute rows for {num_nodes} nodes"),
                ));
            }
            Some(Tensor::from_vec(rows, width.unwrap_or(0), data)?)
        }
        None => None,
    };

    Ok(RawTuDataset {
        name,
        graph_of_node,
        edges,
        graph_labels,
        nodes: NodeData {
            num_nodes,
            labels,
            attributes,
        },
    })
}

impl RawTuDataset {
    /// Assembles graphs with the given feature scheme. Edges are
    /// symmetrised and deduplicated, self-loops dropped, and graph labels
    /// remapped to `0..c` in ascending order of the raw value.
    pub fn into_dataset(self, scheme: FeatureScheme) -> Result<Dataset> {
        let features = encode_features(&self.nodes, scheme)?;
        let num_graphs = self.graph_labels.len();

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_graphs];
        let mut local = vec![0usize; self.graph_of_node.len()];
        for (node, &g) in self.graph_of_node.iter().enumerate() {
            local[node] = members[g].len();
            members[g].push(node);
        }
        let mut builders: Vec<SparseBuilder> = members
            .iter()
            .map(|m| SparseBuilder::new(m.len(), m.len()))
            .collect();
        for &(u, v) in &self.edges {
            if u == v {
                continue;
            }
            let b = &mut builders[self.graph_of_node[u]];
            b.set(local[u], local[v], 1.0)?;
            b.set(local[v], local[u], 1.0)?;
        }

        let mut classes = self.graph_labels.clone();
        classes.sort_unstable();
        classes.dedup();

        let mut graphs = Vec::with_capacity(num_graphs);
        for ((nodes, builder), raw_label) in members.iter().zip(builders).zip(&self.graph_labels) {
            let label = classes.binary_search(raw_label).expect("label present");
            graphs.push(GraphInstance::new(
                builder.build(),
                features.select_rows(nodes)?,
                label,
            )?);
        }
        Dataset::new(self.name, graphs, classes.len())
    }
}

/// Parses a TU dataset directory with the default feature scheme for the
/// data it contains.
pub fn parse_tu_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let raw = read_tu_raw(dir)?;
    let scheme = FeatureScheme::default_for(&raw.nodes);
    raw.into_dataset(scheme)
}

pub fn parse_tu_dataset_with(dir: impl AsRef<Path>, scheme: FeatureScheme) -> Result<Dataset> {
    read_tu_raw(dir)?.into_dataset(scheme)
}
