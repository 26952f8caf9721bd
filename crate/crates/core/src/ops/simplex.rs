//! Projections of score vectors onto the probability simplex.
//!
//! `sparsemax` is the Euclidean projection `argmin_{p ∈ Δ} ‖p − z‖²`. It is
//! computed through the threshold `τ(z)`: sort `z` descending into `u`, take
//! the largest `ρ` with `u_ρ + (1 − Σ_{i≤ρ} u_i)/ρ > 0`, then
//! `τ = (Σ_{i≤ρ} u_i − 1)/ρ` and `p_i = max(z_i − τ, 0)`.

/// Threshold and support size of the sparsemax projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    pub tau: f64,
    pub rho: usize,
}

/// Computes `τ(z)` and `ρ`. Panics on empty input.
pub fn tau_threshold(z: &[f64]) -> ThresholdResult {
    assert!(!z.is_empty(), "tau_threshold of an empty vector");
    let mut u = z.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut rho = 1;
    let mut support_sum = u[0];
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let k = (j + 1) as f64;
        if uj + (1.0 - cumsum) / k > 0.0 {
            rho = j + 1;
            support_sum = cumsum;
        }
    }
    ThresholdResult {
        tau: (support_sum - 1.0) / rho as f64,
        rho,
    }
}

pub fn sparsemax(z: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; z.len()];
    sparsemax_into(z, &mut out);
    out
}

/// Writes `sparsemax(z)` into `out` and returns `τ(z)`.
pub fn sparsemax_into(z: &[f64], out: &mut [f64]) -> f64 {
    debug_assert_eq!(z.len(), out.len());
    let tau = tau_threshold(z).tau;
    for (o, &zi) in out.iter_mut().zip(z) {
        *o = (zi - tau).max(0.0);
    }
    tau
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; z.len()];
    softmax_into(z, &mut out);
    out
}

/// Max-shifted softmax written into `out`.
pub fn softmax_into(z: &[f64], out: &mut [f64]) {
    debug_assert_eq!(z.len(), out.len());
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &zi) in out.iter_mut().zip(z) {
        *o = (zi - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}
