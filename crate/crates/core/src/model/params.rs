use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Named parameter tensors in a fixed order:
/// `conv.{k}.weight` for each level, `attn.{k}` for each level, then
/// `mlp.{i}.weight` / `mlp.{i}.bias` for each dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    num_levels: usize,
}

/// Tape handles for one registration of [`ModelParams`].
#[derive(Debug, Clone)]
pub struct ParamVars {
    pub conv: Vec<Var>,
    pub attention: Vec<Var>,
    /// `(weight, bias)` per dense layer.
    pub mlp: Vec<(Var, Var)>,
    all: Vec<Var>,
}

impl ParamVars {
    /// Every handle in parameter order.
    pub fn all(&self) -> &[Var] {
        &self.all
    }

    /// Rebuilds the structured view from handles in parameter order.
    pub fn from_ordered(vars: &[Var], num_levels: usize) -> Self {
        let conv = vars[..num_levels].to_vec();
        let attention = vars[num_levels..2 * num_levels].to_vec();
        let mlp = vars[2 * num_levels..]
            .chunks(2)
            .map(|wb| (wb[0], wb[1]))
            .collect();
        Self {
            conv,
            attention,
            mlp,
            all: vars.to_vec(),
        }
    }
}

fn shapes(config: &ModelConfig) -> Vec<(String, usize, usize)> {
    let d = config.hidden_dim;
    let mut out = Vec::new();
    for k in 0..config.num_levels {
        let fan_in = if k == 0 { config.feature_dim } else { d };
        out.push((format!("conv.{}.weight", k + 1), fan_in, d));
    }
    for k in 0..config.num_levels {
        out.push((format!("attn.{}", k + 1), 1, 2 * d));
    }
    let mut widths = vec![2 * d];
    widths.extend(&config.mlp_dims);
    widths.push(config.num_classes);
    for (i, w) in widths.windows(2).enumerate() {
        out.push((format!("mlp.{}.weight", i + 1), w[0], w[1]));
        out.push((format!("mlp.{}.bias", i + 1), 1, w[1]));
    }
    out
}

impl ModelParams {
    /// Glorot-uniform weights and zero biases from a seeded stream.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for (name, rows, cols) in shapes(config) {
            let t = if name.ends_with(".bias") {
                Tensor::zeros(rows, cols)
            } else {
                let bound = (6.0 / (rows + cols) as f64).sqrt();
                let data = (0..rows * cols)
                    .map(|_| rng.gen_range(-bound..=bound))
                    .collect();
                Tensor::from_vec(rows, cols, data)?
            };
            names.push(name);
            tensors.push(t);
        }
        Ok(Self {
            names,
            tensors,
            num_levels: config.num_levels,
        })
    }

    /// Replaces every tensor, keeping names. Shapes must match.
    pub fn with_tensors(&self, tensors: Vec<Tensor>) -> Result<Self> {
        if tensors.len() != self.tensors.len()
            || tensors
                .iter()
                .zip(&self.tensors)
                .any(|(a, b)| a.shape() != b.shape())
        {
            return Err(Error::shape(
                "ModelParams::with_tensors",
                "tensor list does not match layout",
            ));
        }
        Ok(Self {
            names: self.names.clone(),
            tensors,
            num_levels: self.num_levels,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Registers every tensor as a trainable leaf.
    pub fn register(&self, tape: &mut Tape) -> ParamVars {
        let vars: Vec<Var> = self.tensors.iter().map(|t| tape.param(t.clone())).collect();
        ParamVars::from_ordered(&vars, self.num_levels)
    }

    /// Checks names and shapes against what `config` expects.
    pub fn check_compatible(&self, config: &ModelConfig) -> Result<()> {
        let expected = shapes(config);
        let ok = expected.len() == self.names.len()
            && expected
                .iter()
                .zip(self.names.iter().zip(&self.tensors))
                .all(|((en, er, ec), (n, t))| en == n && t.shape() == (*er, *ec));
        if ok {
            Ok(())
        } else {
            Err(Error::Config(
                "parameters do not match the model configuration".into(),
            ))
        }
    }

    /// Writes the checkpoint: one `name rows cols` header line per tensor,
    /// a blank line, then every tensor's entries as little-endian `f64` in
    /// header order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        for (name, t) in self.names.iter().zip(&self.tensors) {
            writeln!(buf, "{name} {} {}", t.rows(), t.cols()).expect("write to Vec");
        }
        buf.push(b'\n');
        for t in &self.tensors {
            for v in t.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>, config: &ModelConfig) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let file = path.display().to_string();
        let bad = |line: Option<usize>, msg: String| Error::Format {
            file: file.clone(),
            line,
            msg,
        };
        let split = bytes
            .windows(2)
            .position(|w| w == b"\n\n")
            .ok_or_else(|| bad(None, "missing blank line after header".into()))?;
        let header = std::str::from_utf8(&bytes[..split])
            .map_err(|_| bad(None, "header is not UTF-8".into()))?;
        let mut body = &bytes[split + 2..];
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for (i, line) in header.lines().enumerate() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [name, rows, cols] = parts[..] else {
                return Err(bad(
                    Some(i + 1),
                    format!("expected `name rows cols`, got `{line}`"),
                ));
            };
            let dim = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| bad(Some(i + 1), format!("bad dimension `{s}`")))
            };
            let (rows, cols) = (dim(rows)?, dim(cols)?);
            let need = rows * cols * 8;
            if body.len() < need {
                return Err(bad(None, format!("data for `{name}` truncated")));
            }
            let data = body[..need]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            body = &body[need..];
            names.push(name.to_string());
            tensors.push(Tensor::from_vec(rows, cols, data)?);
        }
        if !body.is_empty() {
            return Err(bad(None, format!("{} trailing bytes", body.len())));
        }
        let params = Self {
            names,
            tensors,
            num_levels: config.num_levels,
        };
        params.check_compatible(config)?;
        Ok(params)
    }
}
