use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hgp_core::autodiff::Tape;
use hgp_core::data::{
    fetch_dataset, parse_tu_dataset, parse_tu_dataset_with, synth_dataset, Dataset, GraphInstance,
};
use hgp_core::model::{
    forward, model_grad_check, model_grad_check_sampled, smoothness_margins, ModelParams,
};
use hgp_core::tensor::Tensor;
use hgp_core::train::{run_experiment_with, write_metrics_csv, write_summary_csv};
use hgp_core::{Error, Result};

use crate::config::{DatasetSource, RunConfig};
use crate::export::{write_exports, ExportFormat};
use crate::CliError;

/// Graph samples tried before giving up on finding a smooth point.
const GRADCHECK_ATTEMPTS: usize = 200;
/// Required distance from every kink and selection boundary.
const GRADCHECK_MARGIN: f64 = 1e-3;

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    match &cfg.dataset {
        DatasetSource::Synthetic {
            kind,
            count,
            min_nodes,
            max_nodes,
            seed,
        } => synth_dataset(*kind, *count, (*min_nodes, *max_nodes), *seed),
        DatasetSource::Tu(name) => {
            let dir = match &cfg.data_dir {
                Some(d) => d.clone(),
                None => fetch_dataset(name, &cfg.base_url, &cfg.cache_dir)?.path,
            };
            match cfg.feature_scheme {
                Some(s) => parse_tu_dataset_with(dir, s),
                None => parse_tu_dataset(dir),
            }
        }
    }
}

pub fn fetch(name: &str, base_url: &str, cache_dir: &Path) -> Result<(), CliError> {
    let out = fetch_dataset(name, base_url, cache_dir)?;
    let how = if out.cache_hit {
        "cache hit"
    } else {
        "downloaded"
    };
    println!("{how}: {}", out.path.display());
    Ok(())
}

pub fn stats(dataset: &str, base_url: &str, cache_dir: &Path) -> Result<(), CliError> {
    let as_path = Path::new(dataset);
    let (name, dir) = if as_path.is_dir() {
        (dataset.to_string(), as_path.to_path_buf())
    } else {
        (
            dataset.to_string(),
            fetch_dataset(dataset, base_url, cache_dir)?.path,
        )
    };
    let ds = parse_tu_dataset(&dir)?;
    println!("dataset              {name}");
    println!("{}", ds.stats());
    Ok(())
}

pub fn train(cfg: &RunConfig) -> Result<(), CliError> {
    let ds = load_dataset(cfg)?;
    let model = cfg.model_config(ds.feature_dim, ds.num_classes);
    model.validate()?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let settings = cfg.train_settings(0);
    let summary = run_experiment_with(&ds, &model, &settings, &cfg.seeds, |run| {
        write_metrics_csv(
            out.join(format!("metrics_seed{}.csv", run.seed)),
            &run.report,
        )?;
        run.params
            .save(out.join(format!("model_seed{}.ckpt", run.seed)))?;
        println!(
            "seed {}: test accuracy {:.4} (best epoch {}, {} epochs)",
            run.seed,
            run.test_accuracy,
            run.best_epoch,
            run.report.epochs.len()
        );
        Ok(())
    })?;
    write_summary_csv(out.join("summary.csv"), &summary)?;
    println!(
        "{}: {:.4} ± {:.4} over {} runs",
        ds.name,
        summary.mean,
        summary.std,
        summary.runs.len()
    );
    Ok(())
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, f: usize) -> Result<GraphInstance> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(0.4) {
                edges.push((u, v));
            }
        }
    }
    let feats = (0..n * f).map(|_| rng.gen_range(-1.0..1.0)).collect();
    GraphInstance::from_edges(
        n,
        &edges,
        Tensor::from_vec(n, f, feats)?,
        rng.gen_range(0..2),
    )
}

/// Random small graph and parameters, with biases drawn away from zero so
/// that dead upstream units do not park a pre-activation exactly on a kink.
fn gradcheck_sample(
    rng: &mut ChaCha8Rng,
    cfg: &RunConfig,
    model: &hgp_core::model::ModelConfig,
) -> Result<(GraphInstance, ModelParams)> {
    let graph = random_graph(rng, cfg.gradcheck_nodes, cfg.gradcheck_features)?;
    let params = ModelParams::init(model, rng.gen())?;
    let tensors = params
        .names()
        .iter()
        .zip(params.tensors())
        .map(|(name, t)| {
            if name.ends_with(".bias") {
                let data = (0..t.len()).map(|_| rng.gen_range(-0.1..0.1)).collect();
                Tensor::from_vec(t.rows(), t.cols(), data).expect("same length")
            } else {
                t.clone()
            }
        })
        .collect();
    Ok((graph, params.with_tensors(tensors)?))
}

/// Returns whether the check passed. Samples are redrawn while a selection
/// boundary is within `GRADCHECK_MARGIN` or a finite-difference step crosses
/// a ReLU, max or sparsemax kink.
pub fn gradcheck(cfg: &RunConfig) -> Result<bool, CliError> {
    let model = cfg.model_config(cfg.gradcheck_features, 2);
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.gradcheck_seed);
    let kink_limit = cfg.gradcheck_tolerance / 10.0;
    for attempt in 0..GRADCHECK_ATTEMPTS {
        let (graph, params) = gradcheck_sample(&mut rng, cfg, &model)?;
        if smoothness_margins(&graph, &params, &model)?.selection < GRADCHECK_MARGIN {
            continue;
        }
        let report = if cfg.gradcheck_max_entries == 0 {
            model_grad_check(&graph, &params, &model, cfg.gradcheck_eps)?
        } else {
            model_grad_check_sampled(
                &graph,
                &params,
                &model,
                cfg.gradcheck_eps,
                cfg.gradcheck_max_entries,
                rng.gen(),
            )?
        };
        if report.max_kink_error > kink_limit {
            continue;
        }
        let pass = report.max_rel_error < cfg.gradcheck_tolerance;
        println!(
            "max relative error {:.3e} (tolerance {:.0e}, kink bound {:.1e}, sample {}, {} parameters): {}",
            report.max_rel_error,
            cfg.gradcheck_tolerance,
            report.max_kink_error,
            attempt + 1,
            params.num_scalars(),
            if pass { "ok" } else { "FAILED" }
        );
        if let (false, Some((p, k))) = (pass, report.worst) {
            println!(
                "worst entry: {}[{k}] analytic {:.6e} numeric {:.6e}",
                params.names()[p],
                report.analytic[p].data()[k],
                report.numeric[p].data()[k]
            );
        }
        return Ok(pass);
    }
    Err(Error::Contract(format!(
        "no smooth sample found in {GRADCHECK_ATTEMPTS} attempts"
    ))
    .into())
}

pub fn pool_export(
    cfg: &RunConfig,
    checkpoint: &Path,
    graph_index: usize,
    format: ExportFormat,
    out_dir: Option<PathBuf>,
) -> Result<Vec<PathBuf>, CliError> {
    let ds = load_dataset(cfg)?;
    let graph = ds.graphs.get(graph_index).ok_or_else(|| {
        CliError::Usage(format!(
            "graph index {graph_index} out of range (dataset has {})",
            ds.len()
        ))
    })?;
    let model = cfg.model_config(ds.feature_dim, ds.num_classes);
    model.validate()?;
    let params = ModelParams::load(checkpoint, &model)?;
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let out = forward(&mut tape, graph, &vars, &model)?;
    let dir = out_dir.unwrap_or_else(|| cfg.output_dir.join(format!("export_graph{graph_index}")));
    let written = write_exports(&dir, &out.levels, format)?;
    for (path, level) in written.iter().zip(&out.levels) {
        println!("{} ({} nodes)", path.display(), level.kept_nodes.len());
    }
    Ok(written)
}
