//! Per-level pooled graph exports in DOT and JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use hgp_core::model::LevelOutput;
use hgp_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Dot,
    Json,
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "dot" => Ok(ExportFormat::Dot),
            "json" => Ok(ExportFormat::Json),
            other => Err(format!(
                "unknown export format `{other}` (expected dot or json)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportEdge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// One pooled level with node ids of the input graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelExport {
    pub level: usize,
    pub nodes: Vec<usize>,
    pub edges: Vec<ExportEdge>,
}

impl LevelExport {
    pub fn from_level(level: usize, out: &LevelOutput) -> Self {
        let ids = &out.kept_nodes;
        let edges = out
            .structure
            .iter()
            .map(|(p, q, w)| ExportEdge {
                source: ids[p],
                target: ids[q],
                weight: w,
            })
            .collect();
        Self {
            level,
            nodes: ids.clone(),
            edges,
        }
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "digraph level{} {{", self.level);
        let _ = writeln!(
            s,
            "  label=\"level {} ({} nodes)\";",
            self.level,
            self.nodes.len()
        );
        for n in &self.nodes {
            let _ = writeln!(s, "  {n};");
        }
        for e in &self.edges {
            let _ = writeln!(
                s,
                "  {} -> {} [weight=\"{}\", label=\"{:.3}\"];",
                e.source, e.target, e.weight, e.weight
            );
        }
        s.push_str("}\n");
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// Writes `level{k}.{dot,json}` for every level into `dir`.
pub fn write_exports(
    dir: &Path,
    levels: &[LevelOutput],
    format: ExportFormat,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (k, level) in levels.iter().enumerate() {
        let export = LevelExport::from_level(k + 1, level);
        let (ext, text) = match format {
            ExportFormat::Dot => ("dot", export.to_dot()),
            ExportFormat::Json => ("json", export.to_json()),
        };
        let path = dir.join(format!("level{}.{ext}", k + 1));
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
