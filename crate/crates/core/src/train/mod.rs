//! Adam optimization, early stopping and the repeated random-split
//! protocol.

mod adam;
mod metrics;

pub use adam::{adam_step, OptimState};
pub use metrics::{write_metrics_csv, write_summary_csv};

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::autodiff::Tape;
use crate::data::{split, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::model::{graph_loss, predict, ModelConfig, ModelParams};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    /// Seeds parameter initialization and per-epoch shuffling.
    pub seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            weight_decay: 1e-3,
            batch_size: 64,
            patience: 100,
            max_epochs: 1000,
            seed: 0,
        }
    }
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} invalid",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!(
                "weight decay {} invalid",
                self.weight_decay
            )));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "batch_size and max_epochs must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-graph loss over the epoch's mini-batches.
    pub train_loss: f64,
    pub valid_loss: f64,
    pub valid_accuracy: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch with the lowest validation loss.
    pub best_epoch: usize,
    pub best_valid_loss: f64,
    /// Accuracy of the best parameters on the split's test part, if any.
    pub test_accuracy: Option<f64>,
    pub wall_seconds: f64,
}

impl TrainReport {
    /// Equality of everything except timings.
    pub fn same_trajectory(&self, other: &TrainReport) -> bool {
        self.best_epoch == other.best_epoch
            && self.best_valid_loss.to_bits() == other.best_valid_loss.to_bits()
            && self.test_accuracy == other.test_accuracy
            && self.epochs.len() == other.epochs.len()
            && self.epochs.iter().zip(&other.epochs).all(|(a, b)| {
                a.epoch == b.epoch
                    && a.train_loss.to_bits() == b.train_loss.to_bits()
                    && a.valid_loss.to_bits() == b.valid_loss.to_bits()
                    && a.valid_accuracy == b.valid_accuracy
            })
    }
}

fn graph_gradients(
    dataset: &Dataset,
    i: usize,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let (loss, _) = graph_loss(&mut tape, &dataset.graphs[i], &vars, config)?;
    tape.backward(loss)?;
    let grads = vars
        .all()
        .iter()
        .zip(params.tensors())
        .map(|(&v, p)| {
            tape.grad(v)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(p.rows(), p.cols()))
        })
        .collect();
    Ok((tape.value(loss).data()[0], grads))
}

/// Summed loss and gradient over `batch`. Graphs run in parallel; the
/// reduction follows batch order so results do not depend on scheduling.
fn batch_gradients(
    dataset: &Dataset,
    batch: &[usize],
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<(f64, Vec<Tensor>)> {
    let per_graph: Vec<(f64, Vec<Tensor>)> = batch
        .par_iter()
        .map(|&i| graph_gradients(dataset, i, params, config))
        .collect::<Result<_>>()?;
    let mut iter = per_graph.into_iter();
    let (mut loss, mut grads) = iter
        .next()
        .ok_or_else(|| Error::Contract("empty batch".into()))?;
    for (l, g) in iter {
        loss += l;
        for (acc, gi) in grads.iter_mut().zip(&g) {
            acc.add_assign(gi)?;
        }
    }
    Ok((loss, grads))
}

/// Mean loss and accuracy of `params` over `idx`.
pub fn evaluate_loss(
    params: &ModelParams,
    config: &ModelConfig,
    dataset: &Dataset,
    idx: &[usize],
) -> Result<(f64, f64)> {
    if idx.is_empty() {
        return Err(Error::Contract(
            "evaluation over an empty index list".into(),
        ));
    }
    let results: Vec<(f64, bool)> = idx
        .par_iter()
        .map(|&i| {
            let graph = dataset
                .graphs
                .get(i)
                .ok_or_else(|| Error::Index(format!("graph {i} of {}", dataset.len())))?;
            let mut tape = Tape::new();
            let vars = params.register(&mut tape);
            let (loss, out) = graph_loss(&mut tape, graph, &vars, config)?;
            Ok((
                tape.value(loss).data()[0],
                predict(tape.value(out.logits)) == graph.label(),
            ))
        })
        .collect::<Result<_>>()?;
    let n = results.len() as f64;
    let loss = results.iter().map(|r| r.0).sum::<f64>() / n;
    let correct = results.iter().filter(|r| r.1).count() as f64;
    Ok((loss, correct / n))
}

/// Fraction of graphs in `idx` whose predicted class equals the label.
pub fn evaluate(
    params: &ModelParams,
    config: &ModelConfig,
    dataset: &Dataset,
    idx: &[usize],
) -> Result<f64> {
    Ok(evaluate_loss(params, config, dataset, idx)?.1)
}

/// Trains from a fresh initialization until the validation loss has not
/// improved for `patience` consecutive epochs or `max_epochs` is reached,
/// returning the parameters of the best validation epoch.
pub fn train(
    dataset: &Dataset,
    split: &SplitSpec,
    config: &ModelConfig,
    settings: &TrainSettings,
) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    settings.validate()?;
    if split.train_idx.is_empty() || split.valid_idx.is_empty() {
        return Err(Error::Contract(
            "training needs nonempty train and validation sets".into(),
        ));
    }
    if let Some(&bad) = split
        .train_idx
        .iter()
        .chain(&split.valid_idx)
        .chain(&split.test_idx)
        .find(|&&i| i >= dataset.len())
    {
        return Err(Error::Index(format!(
            "split references graph {bad} of {}",
            dataset.len()
        )));
    }
    let start = Instant::now();
    let mut params = ModelParams::init(config, settings.seed)?;
    let mut state = OptimState::new(
        params.tensors(),
        settings.learning_rate,
        settings.weight_decay,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x5eed_5eed_5eed_5eed);
    let mut order = split.train_idx.clone();

    let mut epochs = Vec::new();
    let mut best = (f64::INFINITY, 0usize, params.clone());
    let mut stale = 0usize;
    for epoch in 1..=settings.max_epochs {
        let epoch_start = Instant::now();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(settings.batch_size) {
            let (loss, grads) = batch_gradients(dataset, batch, &params, config)?;
            total += loss;
            adam_step(params.tensors_mut(), &grads, &mut state)?;
        }
        let (valid_loss, valid_accuracy) =
            evaluate_loss(&params, config, dataset, &split.valid_idx)?;
        epochs.push(EpochRecord {
            epoch,
            train_loss: total / order.len() as f64,
            valid_loss,
            valid_accuracy,
            seconds: epoch_start.elapsed().as_secs_f64(),
        });
        if valid_loss < best.0 {
            best = (valid_loss, epoch, params.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= settings.patience {
                break;
            }
        }
    }
    let (best_valid_loss, best_epoch, best_params) = best;
    let test_accuracy = if split.test_idx.is_empty() {
        None
    } else {
        Some(evaluate(&best_params, config, dataset, &split.test_idx)?)
    };
    Ok((
        best_params,
        TrainReport {
            epochs,
            best_epoch,
            best_valid_loss,
            test_accuracy,
            wall_seconds: start.elapsed().as_secs_f64(),
        },
    ))
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    pub test_accuracy: f64,
    pub best_epoch: usize,
    pub report: TrainReport,
    pub params: ModelParams,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub runs: Vec<RunResult>,
    pub mean: f64,
    /// Population standard deviation (divides by the number of runs).
    pub std: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// One fresh split, initialization and training run per seed; test
/// accuracies are summarized as mean ± population std.
pub fn run_experiment(
    dataset: &Dataset,
    config: &ModelConfig,
    settings: &TrainSettings,
    seeds: &[u64],
) -> Result<ExperimentSummary> {
    run_experiment_with(dataset, config, settings, seeds, |_| Ok(()))
}

/// [`run_experiment`] with a hook called after each run, e.g. to persist
/// per-seed results as they finish.
pub fn run_experiment_with(
    dataset: &Dataset,
    config: &ModelConfig,
    settings: &TrainSettings,
    seeds: &[u64],
    mut on_run: impl FnMut(&RunResult) -> Result<()>,
) -> Result<ExperimentSummary> {
    if seeds.is_empty() {
        return Err(Error::Config(
            "at least one seed (repeat) is required".into(),
        ));
    }
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let spec = split(dataset.len(), seed)?;
        let settings = TrainSettings {
            seed,
            ..settings.clone()
        };
        let (params, report) = train(dataset, &spec, config, &settings)?;
        let run = RunResult {
            seed,
            test_accuracy: report.test_accuracy.expect("split has a test part"),
            best_epoch: report.best_epoch,
            report,
            params,
        };
        on_run(&run)?;
        runs.push(run);
    }
    let accs: Vec<f64> = runs.iter().map(|r| r.test_accuracy).collect();
    let (mean, std) = mean_std(&accs);
    Ok(ExperimentSummary { runs, mean, std })
}
