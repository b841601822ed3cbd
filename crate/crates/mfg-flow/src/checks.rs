//! Runtime diagnostics: Lasry-Lions monotonicity and the selector/gradient
//! identity `gamma*(x, p) = D_p H(x, p)`.

use crate::model::MfgModel;
use crate::types::SimplexDist;

/// Tolerance below which a monotonicity sum counts as a violation.
pub const MONOTONICITY_TOL: f64 = -1e-10;

/// Outcome of a Lasry-Lions monotonicity check over a batch of simplex
/// pairs.
#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    /// Monotonicity sum per pair:
    /// `sum_x (phi(x, eta) - phi(x, eta_hat)) (eta_x - eta_hat_x)`.
    pub sums: Vec<f64>,
    /// Indices of pairs whose sum fell below the tolerance.
    pub violations: Vec<usize>,
}

impl MonotonicityReport {
    pub fn is_monotone(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn min_sum(&self) -> f64 {
        self.sums.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Check Lasry-Lions monotonicity of a cost `phi(x, eta)` over the given
/// pairs: the inner product of the cost difference with the distribution
/// difference must be nonnegative.
pub fn check_lasry_lions<F>(cost: F, pairs: &[(SimplexDist, SimplexDist)]) -> MonotonicityReport
where
    F: Fn(usize, &[f64]) -> f64,
{
    let mut sums = Vec::with_capacity(pairs.len());
    let mut violations = Vec::new();
    for (i, (eta, eta_hat)) in pairs.iter().enumerate() {
        debug_assert_eq!(eta.dim(), eta_hat.dim());
        let a = eta.as_slice();
        let b = eta_hat.as_slice();
        let mut sum = 0.0;
        for x in 0..a.len() {
            sum += (cost(x, a) - cost(x, b)) * (a[x] - b[x]);
        }
        if sum < MONOTONICITY_TOL {
            violations.push(i);
        }
        sums.push(sum);
    }
    MonotonicityReport { sums, violations }
}

/// Compare the rate selector against central finite differences of the
/// Hamiltonian in `p`, returning the maximum deviation over off-diagonal
/// coordinates:
///
/// ```text
/// max_{y != x} | gamma*_y(x, eta, p) - (H(p + h e_y) - H(p - h e_y)) / 2h |
/// ```
///
/// The deviation is only guaranteed small when every perturbed coordinate
/// stays at least `h` away from the selector's clamping breakpoints (the
/// Hamiltonian has kinks there).
pub fn selector_gradient_consistency<M: MfgModel + ?Sized>(
    model: &M,
    x: usize,
    eta: &[f64],
    p: &[f64],
    h: f64,
) -> f64 {
    let d = model.num_states();
    let rates = model.selector(x, eta, p);
    let mut p_plus = p.to_vec();
    let mut p_minus = p.to_vec();
    let mut max_dev: f64 = 0.0;
    for y in 0..d {
        if y == x {
            continue;
        }
        p_plus[y] = p[y] + h;
        p_minus[y] = p[y] - h;
        let fd = (model.hamiltonian(x, eta, &p_plus) - model.hamiltonian(x, eta, &p_minus))
            / (2.0 * h);
        max_dev = max_dev.max((rates[y] - fd).abs());
        p_plus[y] = p[y];
        p_minus[y] = p[y];
    }
    max_dev
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::SimplexDist;

    fn pair(a: Vec<f64>, b: Vec<f64>) -> (SimplexDist, SimplexDist) {
        (SimplexDist::new(a).unwrap(), SimplexDist::new(b).unwrap())
    }

    #[test]
    fn congestion_cost_is_monotone() {
        // phi(x, eta) = eta_x gives sum = ||eta - eta_hat||^2.
        let pairs = vec![pair(vec![1.0, 0.0], vec![0.0, 1.0])];
        let report = check_lasry_lions(|x, eta| eta[x], &pairs);
        assert!(report.is_monotone());
        assert!((report.sums[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn negated_cost_is_flagged() {
        let pairs = vec![pair(vec![1.0, 0.0], vec![0.0, 1.0])];
        let report = check_lasry_lions(|x, eta| -eta[x], &pairs);
        assert_eq!(report.violations, vec![0]);
        assert!((report.sums[0] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_cost_sums_to_zero() {
        let pairs = vec![
            pair(vec![1.0, 0.0], vec![0.0, 1.0]),
            pair(vec![0.25, 0.75], vec![0.5, 0.5]),
        ];
        let report = check_lasry_lions(|_, _| 3.25, &pairs);
        assert!(report.is_monotone());
        assert!(report.sums.iter().all(|s| s.abs() < 1e-15));
    }

    #[test]
    fn selector_gradient_agreement_interior_and_clamped() {
        use crate::models::{QuadraticModel, QuadraticModelConfig};
        let m = QuadraticModel::new(QuadraticModelConfig::new(3)).unwrap();
        let eta = [1.0 / 3.0; 3];
        // Interior: every 2 - p_y / 8 strictly inside (1, 3).
        let interior = [3.0, -4.0, 2.5];
        let dev = selector_gradient_consistency(&m, 0, &eta, &interior, 1e-5);
        assert!(dev <= 1e-6, "interior deviation {dev:.3e}");
        // Clamped at the upper rate everywhere: H is locally linear.
        let clamped = [-30.0, -40.0, -50.0];
        for x in 0..3 {
            let dev = selector_gradient_consistency(&m, x, &eta, &clamped, 1e-5);
            assert!(dev <= 1e-6, "clamped deviation {dev:.3e}");
        }
    }

    #[test]
    fn selector_gradient_symmetry_two_states() {
        use crate::models::{QuadraticModel, QuadraticModelConfig};
        let m = QuadraticModel::new(QuadraticModelConfig::new(2)).unwrap();
        let eta = [0.5, 0.5];
        let p = [1.75, 1.75];
        let dev0 = selector_gradient_consistency(&m, 0, &eta, &p, 1e-5);
        let dev1 = selector_gradient_consistency(&m, 1, &eta, &p, 1e-5);
        assert_eq!(dev0, dev1);
    }
}
