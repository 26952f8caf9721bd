use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_EPS: f64 = 1e-5;

/// Outcome of comparing tape gradients against central differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// `max_i |g_analytic − g_central| / max(1, |g_central|)`.
    pub max_rel_error: f64,
    /// Same maximum restricted to each parameter.
    pub per_param: Vec<f64>,
    /// `(parameter, flat entry)` attaining the maximum.
    pub worst: Option<(usize, usize)>,
    pub analytic: Vec<Tensor>,
    pub numeric: Vec<Tensor>,
    /// `max_i |f(θ+ε) − 2f(θ) + f(θ−ε)| / (2ε) / max(1, |g_central|)`.
    /// At smooth points this is `O(ε)`; when a step of size `ε` crosses a
    /// kink it equals the error the kink injects into the central
    /// difference, so large values mean the sample point is not smooth at
    /// the step scale.
    pub max_kink_error: f64,
}

/// Checks the gradient of the scalar built by `f` with respect to every
/// entry of `params`. `f` receives a fresh tape and the parameters as
/// `requires_grad` leaves, in order.
pub fn grad_check<F>(f: F, params: &[Tensor], eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let all: Vec<Vec<usize>> = params.iter().map(|p| (0..p.len()).collect()).collect();
    check_entries(f, params, eps, &all)
}

/// Like [`grad_check`] but compares at most `max_per_param` entries of each
/// parameter, chosen uniformly without replacement from a seeded stream.
/// Entries not compared keep a numeric gradient of 0 in the report.
pub fn grad_check_sampled<F>(
    f: F,
    params: &[Tensor],
    eps: f64,
    max_per_param: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<Vec<usize>> = params
        .iter()
        .map(|p| {
            let mut idx =
                rand::seq::index::sample(&mut rng, p.len(), max_per_param.min(p.len())).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect();
    check_entries(f, params, eps, &picks)
}

fn check_entries<F>(
    f: F,
    params: &[Tensor],
    eps: f64,
    entries: &[Vec<usize>],
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if eps <= 0.0 {
        return Err(Error::Contract(format!(
            "finite-difference step {eps} must be > 0"
        )));
    }
    let eval = |ps: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.param(p.clone())).collect();
        let out = f(&mut tape, &vars)?;
        scalar(&tape, out)
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let base = scalar(&tape, out)?;
    tape.backward(out)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(params)
        .map(|(&v, p)| {
            tape.grad(v)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(p.rows(), p.cols()))
        })
        .collect();

    let mut work = params.to_vec();
    let mut numeric = Vec::with_capacity(params.len());
    let mut per_param = Vec::with_capacity(params.len());
    let mut max_rel_error = 0.0;
    let mut worst = None;
    let mut max_kink_error = 0.0f64;
    for (pi, p) in params.iter().enumerate() {
        let mut num = Tensor::zeros(p.rows(), p.cols());
        let mut param_max = 0.0f64;
        for &k in &entries[pi] {
            let orig = p.data()[k];
            work[pi].data_mut()[k] = orig + eps;
            let plus = eval(&work)?;
            work[pi].data_mut()[k] = orig - eps;
            let minus = eval(&work)?;
            work[pi].data_mut()[k] = orig;
            let central = (plus - minus) / (2.0 * eps);
            num.data_mut()[k] = central;
            let second = (plus - 2.0 * base + minus).abs() / (2.0 * eps);
            max_kink_error = max_kink_error.max(second / central.abs().max(1.0));
            let err = (analytic[pi].data()[k] - central).abs() / central.abs().max(1.0);
            param_max = param_max.max(err);
            if err > max_rel_error {
                max_rel_error = err;
                worst = Some((pi, k));
            }
        }
        numeric.push(num);
        per_param.push(param_max);
    }
    Ok(GradCheckReport {
        max_rel_error,
        per_param,
        worst,
        analytic,
        numeric,
        max_kink_error,
    })
}

fn scalar(tape: &Tape, v: Var) -> Result<f64> {
    let t = tape.value(v);
    if t.shape() != (1, 1) {
        return Err(Error::Contract(format!(
            "grad_check needs a scalar function, got {:?}",
            t.shape()
        )));
    }
    Ok(t.data()[0])
}
