//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is
//! optional; unknown keys and ill-typed values are rejected when the file
//! is loaded, and `--set key=value` overrides apply on top of the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hgp_core::data::{FeatureScheme, SynthKind, DEFAULT_BASE_URL};
use hgp_core::model::{ModelConfig, Variant};
use hgp_core::ops::{Activation, HopLimit};
use hgp_core::train::TrainSettings;
use hgp_core::{Error, Result};

/// Environment variable overriding the dataset cache directory.
pub const CACHE_ENV: &str = "HGPSL_CACHE";

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    /// A TU benchmark by name, fetched into the cache when missing.
    Tu(String),
    Synthetic {
        kind: SynthKind,
        count: usize,
        min_nodes: usize,
        max_nodes: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    /// Explicit dataset directory, bypassing the cache and fetcher.
    pub data_dir: Option<PathBuf>,
    pub cache_dir: PathBuf,
    pub base_url: String,
    pub feature_scheme: Option<FeatureScheme>,

    pub num_levels: usize,
    pub hidden_dim: usize,
    pub pooling_ratio: f64,
    pub lambda: f64,
    pub hop_limit: HopLimit,
    pub variant: Variant,
    pub mlp_dims: Vec<usize>,
    pub conv_activation: Activation,
    pub readout_activation: Activation,

    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,

    pub gradcheck_nodes: usize,
    pub gradcheck_features: usize,
    pub gradcheck_seed: u64,
    pub gradcheck_eps: f64,
    pub gradcheck_tolerance: f64,
    /// Entries compared per parameter tensor; 0 compares every entry.
    pub gradcheck_max_entries: usize,
}

pub const KEYS: &[&str] = &[
    "dataset",
    "data_dir",
    "cache_dir",
    "base_url",
    "feature_scheme",
    "synth_kind",
    "synth_count",
    "synth_min_nodes",
    "synth_max_nodes",
    "synth_seed",
    "num_levels",
    "hidden_dim",
    "pooling_ratio",
    "lambda",
    "hop_limit",
    "variant",
    "mlp_dims",
    "conv_activation",
    "readout_activation",
    "learning_rate",
    "weight_decay",
    "batch_size",
    "patience",
    "max_epochs",
    "seeds",
    "repeats",
    "output_dir",
    "gradcheck_nodes",
    "gradcheck_features",
    "gradcheck_seed",
    "gradcheck_eps",
    "gradcheck_tolerance",
    "gradcheck_max_entries",
];

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::new(1, 2);
        let train = TrainSettings::default();
        Self {
            dataset: DatasetSource::Tu("PROTEINS".into()),
            data_dir: None,
            cache_dir: default_cache_dir(),
            base_url: DEFAULT_BASE_URL.into(),
            feature_scheme: None,
            num_levels: model.num_levels,
            hidden_dim: model.hidden_dim,
            pooling_ratio: model.pooling_ratio,
            lambda: model.lambda,
            hop_limit: model.hop_limit,
            variant: model.variant,
            mlp_dims: model.mlp_dims,
            conv_activation: model.conv_activation,
            readout_activation: model.readout_activation,
            learning_rate: train.learning_rate,
            weight_decay: train.weight_decay,
            batch_size: train.batch_size,
            patience: train.patience,
            max_epochs: train.max_epochs,
            seeds: (0..10).collect(),
            output_dir: PathBuf::from("runs"),
            gradcheck_nodes: 6,
            gradcheck_features: 3,
            gradcheck_seed: 0,
            gradcheck_eps: hgp_core::autodiff::DEFAULT_EPS,
            gradcheck_tolerance: 1e-4,
            gradcheck_max_entries: 64,
        }
    }
}

/// `$HGPSL_CACHE` when set, else `./data`.
pub fn default_cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

/// Splits `text` into `(line, key, value)` entries.
fn entries(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text, overrides)
    }

    pub fn from_text(text: &str, overrides: &[String]) -> Result<Self> {
        let mut values: BTreeMap<String, String> = BTreeMap::new();
        for (line, k, v) in entries(text)? {
            if !KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("line {line}: unknown key `{k}`")));
            }
            values.insert(k, v);
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                return Err(Error::Config(format!("override: unknown key `{k}`")));
            }
            values.insert(k.to_string(), v.trim().to_string());
        }
        Self::from_map(&values)
    }

    fn from_map(m: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = RunConfig::default();
        let get = |k: &str| m.get(k).map(String::as_str);

        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = get(stringify!($field)) {
                    c.$field = parse(stringify!($field), v)?;
                }
            };
        }
        set!(num_levels);
        set!(hidden_dim);
        set!(pooling_ratio);
        set!(lambda);
        set!(hop_limit);
        set!(variant);
        set!(conv_activation);
        set!(readout_activation);
        set!(learning_rate);
        set!(weight_decay);
        set!(batch_size);
        set!(patience);
        set!(max_epochs);
        set!(base_url);
        set!(cache_dir);
        set!(output_dir);
        set!(gradcheck_nodes);
        set!(gradcheck_features);
        set!(gradcheck_seed);
        set!(gradcheck_eps);
        set!(gradcheck_tolerance);
        set!(gradcheck_max_entries);
        if let Some(v) = get("data_dir") {
            c.data_dir = Some(PathBuf::from(v));
        }
        if let Some(v) = get("feature_scheme") {
            c.feature_scheme = Some(parse("feature_scheme", v)?);
        }
        if let Some(v) = get("mlp_dims") {
            c.mlp_dims = parse_list("mlp_dims", v)?;
        }

        match (get("seeds"), get("repeats")) {
            (Some(s), r) => {
                c.seeds = parse_list("seeds", s)?;
                if let Some(r) = r {
                    let r: usize = parse("repeats", r)?;
                    if r != c.seeds.len() {
                        return Err(Error::Config(format!(
                            "repeats = {r} but {} seeds listed",
                            c.seeds.len()
                        )));
                    }
                }
            }
            (None, Some(r)) => {
                let r: u64 = parse("repeats", r)?;
                c.seeds = (0..r).collect();
            }
            (None, None) => {}
        }
        if c.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }

        let name = get("dataset").unwrap_or("PROTEINS");
        c.dataset = if name.eq_ignore_ascii_case("synthetic") {
            DatasetSource::Synthetic {
                kind: get("synth_kind")
                    .map(|v| parse("synth_kind", v))
                    .transpose()?
                    .unwrap_or(SynthKind::CyclesVsCliquePairs),
                count: get("synth_count")
                    .map(|v| parse("synth_count", v))
                    .transpose()?
                    .unwrap_or(200),
                min_nodes: get("synth_min_nodes")
                    .map(|v| parse("synth_min_nodes", v))
                    .transpose()?
                    .unwrap_or(8),
                max_nodes: get("synth_max_nodes")
                    .map(|v| parse("synth_max_nodes", v))
                    .transpose()?
                    .unwrap_or(20),
                seed: get("synth_seed")
                    .map(|v| parse("synth_seed", v))
                    .transpose()?
                    .unwrap_or(0),
            }
        } else {
            if let Some(k) = [
                "synth_kind",
                "synth_count",
                "synth_min_nodes",
                "synth_max_nodes",
                "synth_seed",
            ]
            .iter()
            .find(|k| m.contains_key(**k))
            {
                return Err(Error::Config(format!(
                    "`{k}` only applies to dataset = synthetic"
                )));
            }
            DatasetSource::Tu(name.to_string())
        };

        // Validate everything that does not depend on the dataset now, so
        // bad values fail at load time.
        c.model_config(1, 2).validate()?;
        c.train_settings(0).validate()?;
        if c.gradcheck_eps.is_nan()
            || c.gradcheck_eps <= 0.0
            || c.gradcheck_nodes == 0
            || c.gradcheck_features == 0
        {
            return Err(Error::Config(
                "gradcheck_eps, gradcheck_nodes and gradcheck_features must be positive".into(),
            ));
        }
        Ok(c)
    }

    pub fn model_config(&self, feature_dim: usize, num_classes: usize) -> ModelConfig {
        ModelConfig {
            num_levels: self.num_levels,
            hidden_dim: self.hidden_dim,
            pooling_ratio: self.pooling_ratio,
            lambda: self.lambda,
            hop_limit: self.hop_limit,
            variant: self.variant,
            mlp_dims: self.mlp_dims.clone(),
            conv_activation: self.conv_activation,
            readout_activation: self.readout_activation,
            num_classes,
            feature_dim,
        }
    }

    pub fn train_settings(&self, seed: u64) -> TrainSettings {
        TrainSettings {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            patience: self.patience,
            max_epochs: self.max_epochs,
            seed,
        }
    }
}
