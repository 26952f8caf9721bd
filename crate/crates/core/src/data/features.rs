use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// How node features are built from raw node labels and attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureScheme {
    OnehotLabel,
    Attributes,
    OnehotPlusAttributes,
    /// A single all-ones column.
    Constant,
}

impl FeatureScheme {
    /// Attributes plus one-hot labels where both exist, otherwise whatever
    /// is available, otherwise constant.
    pub fn default_for(data: &NodeData) -> Self {
        match (data.labels.is_some(), data.attributes.is_some()) {
            (true, true) => FeatureScheme::OnehotPlusAttributes,
            (true, false) => FeatureScheme::OnehotLabel,
            (false, true) => FeatureScheme::Attributes,
            (false, false) => FeatureScheme::Constant,
        }
    }
}

impl FromStr for FeatureScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "onehot-label" => Ok(FeatureScheme::OnehotLabel),
            "attributes" => Ok(FeatureScheme::Attributes),
            "onehot-plus-attributes" => Ok(FeatureScheme::OnehotPlusAttributes),
            "constant" => Ok(FeatureScheme::Constant),
            other => Err(Error::Config(format!("unknown feature scheme `{other}`"))),
        }
    }
}

impl fmt::Display for FeatureScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureScheme::OnehotLabel => "onehot-label",
            FeatureScheme::Attributes => "attributes",
            FeatureScheme::OnehotPlusAttributes => "onehot-plus-attributes",
            FeatureScheme::Constant => "constant",
        })
    }
}

/// Raw per-node data for a whole dataset, in global node order.
#[derive(Debug, Clone, Default)]
pub struct NodeData {
    pub num_nodes: usize,
    pub labels: Option<Vec<i64>>,
    pub attributes: Option<Tensor>,
}

/// Encodes every node of `data` into one feature row. The one-hot width is
/// the number of distinct labels across the whole dataset, ordered by label
/// value; attribute columns follow the one-hot block.
pub fn encode_features(data: &NodeData, scheme: FeatureScheme) -> Result<Tensor> {
    let n = data.num_nodes;
    let need_labels = matches!(
        scheme,
        FeatureScheme::OnehotLabel | FeatureScheme::OnehotPlusAttributes
    );
    let need_attrs = matches!(
        scheme,
        FeatureScheme::Attributes | FeatureScheme::OnehotPlusAttributes
    );
    if need_labels && data.labels.is_none() {
        return Err(Error::Config(format!(
            "scheme `{scheme}` needs node labels"
        )));
    }
    if need_attrs && data.attributes.is_none() {
        return Err(Error::Config(format!(
            "scheme `{scheme}` needs node attributes"
        )));
    }
    if scheme == FeatureScheme::Constant {
        return Ok(Tensor::full(n, 1, 1.0));
    }
    let onehot = match (&data.labels, need_labels) {
        (Some(labels), true) => {
            let mut vocab = labels.clone();
            vocab.sort_unstable();
            vocab.dedup();
            let mut t = Tensor::zeros(n, vocab.len());
            for (i, l) in labels.iter().enumerate() {
                let col = vocab.binary_search(l).expect("label in vocabulary");
                t.set(i, col, 1.0);
            }
            Some(t)
        }
        _ => None,
    };
    let attrs = if need_attrs {
        data.attributes.clone()
    } else {
        None
    };
    match (onehot, attrs) {
        (Some(o), Some(a)) => o.concat_cols(&a),
        (Some(o), None) => Ok(o),
        (None, Some(a)) => Ok(a),
        (None, None) => unreachable!("scheme requires some source"),
    }
}
