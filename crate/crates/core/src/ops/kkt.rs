use super::simplex::tau_threshold;

/// Violations of the optimality conditions of `min ‖p − z‖²` over the
/// probability simplex, using the dual point `β* = τ(z)`,
/// `α* = p − z + β*·1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// `‖p − z − α* + β*·1‖∞`; zero by construction of `α*`.
    pub stationarity: f64,
    /// `|Σ p − 1|`.
    pub sum_to_one: f64,
    /// `max(0, −min p)`.
    pub primal_nonneg: f64,
    /// `max(0, −min α*)`.
    pub dual_feasibility: f64,
    /// `max |α*_i · p_i|`.
    pub complementary_slackness: f64,
    pub beta: f64,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.stationarity,
            self.sum_to_one,
            self.primal_nonneg,
            self.dual_feasibility,
            self.complementary_slackness,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Dual multipliers `α*` for the same `(z, p)`.
    pub fn alpha(z: &[f64], p: &[f64]) -> Vec<f64> {
        let beta = tau_threshold(z).tau;
        p.iter().zip(z).map(|(pi, zi)| pi - zi + beta).collect()
    }
}

/// Evaluates the KKT residuals of a candidate projection `p` of `z`.
/// Panics if the lengths differ or `z` is empty.
pub fn kkt_check(z: &[f64], p: &[f64]) -> KktReport {
    assert_eq!(z.len(), p.len(), "kkt_check length mismatch");
    let beta = tau_threshold(z).tau;
    let alpha = KktReport::alpha(z, p);
    let stationarity = p
        .iter()
        .zip(z)
        .zip(&alpha)
        .map(|((pi, zi), ai)| (pi - zi - ai + beta).abs())
        .fold(0.0, f64::max);
    let min_p = p.iter().copied().fold(f64::INFINITY, f64::min);
    let min_alpha = alpha.iter().copied().fold(f64::INFINITY, f64::min);
    KktReport {
        stationarity,
        sum_to_one: (p.iter().sum::<f64>() - 1.0).abs(),
        primal_nonneg: (-min_p).max(0.0),
        dual_feasibility: (-min_alpha).max(0.0),
        complementary_slackness: alpha
            .iter()
            .zip(p)
            .map(|(a, pi)| (a * pi).abs())
            .fold(0.0, f64::max),
        beta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_projection_has_zero_residuals() {
        let r = kkt_check(&[2.0, 0.0], &[1.0, 0.0]);
        assert_eq!(KktReport::alpha(&[2.0, 0.0], &[1.0, 0.0]), vec![0.0, 1.0]);
        assert_eq!(r.complementary_slackness, 0.0);
        assert_eq!(r.max_residual(), 0.0);
    }

    #[test]
    fn wrong_projection_is_flagged() {
        let r = kkt_check(&[2.0, 0.0], &[0.5, 0.5]);
        assert_eq!(KktReport::alpha(&[2.0, 0.0], &[0.5, 0.5]), vec![-0.5, 1.5]);
        assert_eq!(r.dual_feasibility, 0.5);
        assert_eq!(r.complementary_slackness, 0.75);
        assert_eq!(r.sum_to_one, 0.0);
    }
}
