use super::{ModelConfig, ModelParams, ParamVars, Variant};
use crate::autodiff::{grad_check, grad_check_sampled, GradCheckReport, Tape, Var};
use crate::data::GraphInstance;
use crate::error::{Error, Result};
use crate::ops::{
    hop_neighborhood, learned_struct_conv, node_info_score, readout, structure_learn,
    sym_norm_conv, top_rank_pool, LearnedStructure, ScoreMode, StructureLearnParams,
};
use crate::tensor::{SparseMatrix, Tensor};

/// State recorded for one level of the pipeline.
#[derive(Debug, Clone)]
pub struct LevelOutput {
    /// Original ids of the nodes entering this level's convolution.
    pub input_nodes: Vec<usize>,
    /// Positions (within `input_nodes`) kept by pooling, ascending.
    pub local_idx: Vec<usize>,
    /// Original ids of the kept nodes.
    pub kept_nodes: Vec<usize>,
    /// Post-convolution, pre-pool node representations.
    pub features: Var,
    /// Information score of every input node, in `input_nodes` order.
    pub scores: Vec<f64>,
    pub readout: Var,
    /// Structure over the kept nodes that the next level consumes: the
    /// learned `S` for the full and DEN variants, the uniform hop weights
    /// for HOP, the extracted adjacency for NSL.
    pub structure: SparseMatrix,
    /// Smallest kept score minus largest dropped score.
    pub selection_margin: f64,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// `1 x c` unnormalized class scores.
    pub logits: Var,
    pub graph_embedding: Var,
    pub levels: Vec<LevelOutput>,
}

enum Carried {
    Adjacency,
    Learned(LearnedStructure),
}

/// Runs the pipeline on one graph with parameters already on `tape`.
pub fn forward(
    tape: &mut Tape,
    graph: &GraphInstance,
    vars: &ParamVars,
    config: &ModelConfig,
) -> Result<ForwardOutput> {
    if graph.num_nodes() == 0 {
        return Err(Error::Contract("forward on an empty graph".into()));
    }
    if graph.features().cols() != config.feature_dim {
        return Err(Error::shape(
            "forward",
            format!(
                "graph has {} feature columns, model expects {}",
                graph.features().cols(),
                config.feature_dim
            ),
        ));
    }
    let mut h = tape.constant(graph.features().clone());
    let mut adjacency = graph.adjacency().clone();
    let mut carried = Carried::Adjacency;
    let mut node_ids: Vec<usize> = (0..graph.num_nodes()).collect();
    let mut levels = Vec::with_capacity(config.num_levels);
    let mut embedding: Option<Var> = None;

    for k in 0..config.num_levels {
        let w = vars.conv[k];
        let conv = match &carried {
            Carried::Adjacency => sym_norm_conv(tape, &adjacency, h, w, config.conv_activation)?,
            Carried::Learned(s) => learned_struct_conv(tape, s, h, w, config.conv_activation)?,
        };
        let r = readout(tape, conv, config.readout_activation)?;
        embedding = Some(match embedding {
            None => r,
            Some(z) => tape.add(z, r)?,
        });

        let conv_value = tape.value(conv);
        let (scores, pool_source) = match &carried {
            Carried::Adjacency => (
                node_info_score(&adjacency, conv_value, ScoreMode::Layer1Degree)?,
                &adjacency,
            ),
            Carried::Learned(s) => (
                node_info_score(s.matrix(), conv_value, ScoreMode::LearnedRowSum)?,
                if config.variant == Variant::Hop {
                    &adjacency
                } else {
                    s.matrix()
                },
            ),
        };
        let pool = top_rank_pool(tape, &scores, config.pooling_ratio, conv, pool_source)?;
        let pooled_adjacency = adjacency.extract_submatrix(&pool.idx)?;

        let next = match config.variant {
            Variant::Nsl => Carried::Adjacency,
            Variant::Hop => {
                let mask = hop_neighborhood(&pooled_adjacency, config.hop_limit);
                Carried::Learned(LearnedStructure::constant(tape, mask.row_normalized()))
            }
            Variant::Full | Variant::Den => {
                let params = StructureLearnParams {
                    attention: vars.attention[k],
                    lambda: config.lambda,
                    hop_limit: config.hop_limit,
                    normalization: config.normalization(),
                };
                let pooled = match &carried {
                    Carried::Learned(s) => s.extract(tape, &pool.idx)?,
                    Carried::Adjacency => {
                        LearnedStructure::constant(tape, pool.pooled_structure.clone())
                    }
                };
                Carried::Learned(structure_learn(
                    tape,
                    pool.pooled_features,
                    &pooled,
                    &params,
                )?)
            }
        };
        let structure = match &next {
            Carried::Adjacency => pooled_adjacency.clone(),
            Carried::Learned(s) => s.matrix().clone(),
        };
        let kept_nodes: Vec<usize> = pool.idx.iter().map(|&i| node_ids[i]).collect();
        let input_nodes = std::mem::replace(&mut node_ids, kept_nodes.clone());
        levels.push(LevelOutput {
            input_nodes,
            local_idx: pool.idx,
            kept_nodes,
            features: conv,
            scores,
            readout: r,
            structure,
            selection_margin: pool.selection_margin,
        });
        h = pool.pooled_features;
        adjacency = pooled_adjacency;
        carried = next;
    }

    let z = embedding.expect("num_levels >= 1");
    let mut x = z;
    for (i, &(w, b)) in vars.mlp.iter().enumerate() {
        let lin = tape.matmul(x, w)?;
        x = tape.add_row(lin, b)?;
        if i + 1 < vars.mlp.len() {
            x = tape.relu(x);
        }
    }
    Ok(ForwardOutput {
        logits: x,
        graph_embedding: z,
        levels,
    })
}

/// Sum over the batch of `−log softmax(logits_i)[y_i]`.
pub fn cross_entropy_loss(tape: &mut Tape, logits: &[Var], labels: &[usize]) -> Result<Var> {
    if logits.len() != labels.len() || logits.is_empty() {
        return Err(Error::Contract(format!(
            "{} logits for {} labels",
            logits.len(),
            labels.len()
        )));
    }
    let mut total: Option<Var> = None;
    for (&l, &y) in logits.iter().zip(labels) {
        let ce = tape.cross_entropy(l, y)?;
        total = Some(match total {
            None => ce,
            Some(t) => tape.add(t, ce)?,
        });
    }
    Ok(total.expect("nonempty"))
}

/// Forward plus single-graph cross-entropy.
pub fn graph_loss(
    tape: &mut Tape,
    graph: &GraphInstance,
    vars: &ParamVars,
    config: &ModelConfig,
) -> Result<(Var, ForwardOutput)> {
    if graph.label() >= config.num_classes {
        return Err(Error::Index(format!(
            "label {} with {} classes",
            graph.label(),
            config.num_classes
        )));
    }
    let out = forward(tape, graph, vars, config)?;
    let loss = tape.cross_entropy(out.logits, graph.label())?;
    Ok((loss, out))
}

/// Index of the largest logit; the lowest index wins ties.
pub fn predict(logits: &Tensor) -> usize {
    logits.argmax().unwrap_or(0)
}

/// Distances of one forward pass from the nearest non-smooth points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margins {
    /// The tape's kink margin (ReLU inputs, max ties, sparsemax thresholds).
    pub kink: f64,
    /// Smallest gap between kept and dropped scores over all levels.
    pub selection: f64,
}

impl Margins {
    pub fn min(&self) -> f64 {
        self.kink.min(self.selection)
    }
}

pub fn smoothness_margins(
    graph: &GraphInstance,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<Margins> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let (_, out) = graph_loss(&mut tape, graph, &vars, config)?;
    Ok(Margins {
        kink: tape.kink_margin(),
        selection: out
            .levels
            .iter()
            .map(|l| l.selection_margin)
            .fold(f64::INFINITY, f64::min),
    })
}

/// Central-difference check of the single-graph loss gradient with respect
/// to every parameter.
pub fn model_grad_check(
    graph: &GraphInstance,
    params: &ModelParams,
    config: &ModelConfig,
    eps: f64,
) -> Result<GradCheckReport> {
    params.check_compatible(config)?;
    let levels = config.num_levels;
    grad_check(
        |tape, vars| {
            let vars = ParamVars::from_ordered(vars, levels);
            Ok(graph_loss(tape, graph, &vars, config)?.0)
        },
        params.tensors(),
        eps,
    )
}

/// [`model_grad_check`] restricted to at most `max_per_param` randomly
/// chosen entries of each parameter tensor.
pub fn model_grad_check_sampled(
    graph: &GraphInstance,
    params: &ModelParams,
    config: &ModelConfig,
    eps: f64,
    max_per_param: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    params.check_compatible(config)?;
    let levels = config.num_levels;
    grad_check_sampled(
        |tape, vars| {
            let vars = ParamVars::from_ordered(vars, levels);
            Ok(graph_loss(tape, graph, &vars, config)?.0)
        },
        params.tensors(),
        eps,
        max_per_param,
        seed,
    )
}
