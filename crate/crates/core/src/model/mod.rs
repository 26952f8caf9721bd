//! The K-level convolution, pooling and structure-learning pipeline with
//! its MLP classifier head.

mod forward;
mod params;

pub use forward::{
    cross_entropy_loss, forward, graph_loss, model_grad_check, model_grad_check_sampled, predict,
    smoothness_margins, ForwardOutput, LevelOutput, Margins,
};
pub use params::{ModelParams, ParamVars};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ops::{Activation, HopLimit, Normalization};

/// Ablation switch for how each level's structure is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// Sparsemax-normalized learned structure.
    #[default]
    Full,
    /// No structure learning; every level convolves the extracted adjacency.
    Nsl,
    /// Uniform weights over the h-hop neighbourhood of the extracted
    /// adjacency.
    Hop,
    /// Softmax-normalized (dense within the candidate set) learned structure.
    Den,
}

impl Variant {
    pub fn normalization(self) -> Normalization {
        match self {
            Variant::Den => Normalization::Softmax,
            _ => Normalization::Sparsemax,
        }
    }

    pub fn learns_structure(self) -> bool {
        matches!(self, Variant::Full | Variant::Den)
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Variant::Full),
            "nsl" => Ok(Variant::Nsl),
            "hop" => Ok(Variant::Hop),
            "den" => Ok(Variant::Den),
            other => Err(Error::Config(format!("unknown variant `{other}`"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Full => "full",
            Variant::Nsl => "nsl",
            Variant::Hop => "hop",
            Variant::Den => "den",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub num_levels: usize,
    pub hidden_dim: usize,
    pub pooling_ratio: f64,
    pub lambda: f64,
    pub hop_limit: HopLimit,
    pub variant: Variant,
    pub mlp_dims: Vec<usize>,
    pub conv_activation: Activation,
    pub readout_activation: Activation,
    pub num_classes: usize,
    pub feature_dim: usize,
}

impl ModelConfig {
    /// Defaults for every hyper-parameter except the dataset-dependent
    /// input and output widths.
    pub fn new(feature_dim: usize, num_classes: usize) -> Self {
        Self {
            num_levels: 3,
            hidden_dim: 128,
            pooling_ratio: 0.8,
            lambda: 1.0,
            hop_limit: HopLimit::default(),
            variant: Variant::Full,
            mlp_dims: vec![256, 128, 64],
            conv_activation: Activation::Relu,
            readout_activation: Activation::Relu,
            num_classes,
            feature_dim,
        }
    }

    pub fn normalization(&self) -> Normalization {
        self.variant.normalization()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(1..=5).contains(&self.num_levels) {
            return fail(format!("num_levels {} outside 1..=5", self.num_levels));
        }
        if self.hidden_dim == 0 {
            return fail("hidden_dim must be >= 1".into());
        }
        if !(self.pooling_ratio > 0.0 && self.pooling_ratio <= 1.0) {
            return fail(format!(
                "pooling_ratio {} outside (0, 1]",
                self.pooling_ratio
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda {} must be finite and >= 0", self.lambda));
        }
        if self.hop_limit == HopLimit::Hops(0) {
            return fail("hop_limit must be >= 1".into());
        }
        if self.mlp_dims.contains(&0) {
            return fail(format!(
                "mlp_dims {:?} contains a zero width",
                self.mlp_dims
            ));
        }
        if self.num_classes == 0 || self.feature_dim == 0 {
            return fail(format!(
                "num_classes {} and feature_dim {} must be >= 1",
                self.num_classes, self.feature_dim
            ));
        }
        Ok(())
    }
}
