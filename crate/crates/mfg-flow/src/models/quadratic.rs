//! The d-state quadratic game: a standard benchmark with closed-form
//! optimal rates.
//!
//! Running cost `f(x, a) = b * sum_{y != x} (a_y - 2)^2` over the rate
//! interval A = [1, 3], mean-field cost `F(x, eta) = eta_x`, and terminal
//! family `g_kappa(x, eta) = kappa_x + eta_x` with kappa in [0, 1]^d.
//! Minimizing `b (a - 2)^2 + a p` over A gives the clamped closed form
//! `a*_y = clamp(2 - p_y / (2b), 1, 3)`, so the Hamiltonian evaluates
//! without any inner optimization.

use crate::error::{Error, Result};
use crate::model::MfgModel;
use crate::types::{ActionBounds, ParamBox, StateSpace};
use serde::{Deserialize, Serialize};

/// Rate value at which the running cost vanishes.
pub const RATE_CENTER: f64 = 2.0;

/// Configuration of the quadratic game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticModelConfig {
    /// Number of states.
    pub d: usize,
    /// Running-cost weight b.
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_action_lower")]
    pub action_lower: f64,
    #[serde(default = "default_action_upper")]
    pub action_upper: f64,
    /// Horizon T.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
}

fn default_b() -> f64 {
    4.0
}
fn default_action_lower() -> f64 {
    1.0
}
fn default_action_upper() -> f64 {
    3.0
}
fn default_horizon() -> f64 {
    1.0
}

impl QuadraticModelConfig {
    pub fn new(d: usize) -> Self {
        QuadraticModelConfig {
            d,
            b: default_b(),
            action_lower: default_action_lower(),
            action_upper: default_action_upper(),
            horizon: default_horizon(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::config(format!("quadratic model needs d >= 2, got {}", self.d)));
        }
        if !(self.b > 0.0) {
            return Err(Error::config(format!("cost weight b must be positive, got {}", self.b)));
        }
        if !(self.action_lower >= 0.0 && self.action_lower <= self.action_upper) {
            return Err(Error::config(format!(
                "action bounds [{}, {}] must satisfy 0 <= lower <= upper",
                self.action_lower, self.action_upper
            )));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::config("horizon must be positive".to_string()));
        }
        Ok(())
    }
}

/// The quadratic game as an [`MfgModel`].
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    cfg: QuadraticModelConfig,
    space: StateSpace,
    kappa_box: ParamBox,
}

impl QuadraticModel {
    pub fn new(cfg: QuadraticModelConfig) -> Result<Self> {
        cfg.validate()?;
        let space = StateSpace::new(cfg.d)?;
        let kappa_box = ParamBox::cube(cfg.d, 0.0, 1.0)?;
        Ok(QuadraticModel { cfg, space, kappa_box })
    }

    pub fn config(&self) -> &QuadraticModelConfig {
        &self.cfg
    }

    /// Closed-form optimal rate toward one state:
    /// `clamp(2 - p_y / (2b), lower, upper)`.
    pub fn optimal_rate(&self, p_y: f64) -> f64 {
        (RATE_CENTER - p_y / (2.0 * self.cfg.b)).clamp(self.cfg.action_lower, self.cfg.action_upper)
    }
}

impl MfgModel for QuadraticModel {
    fn state_space(&self) -> &StateSpace {
        &self.space
    }

    fn horizon(&self) -> f64 {
        self.cfg.horizon
    }

    fn param_box(&self) -> &ParamBox {
        &self.kappa_box
    }

    fn action_bounds(&self) -> ActionBounds {
        ActionBounds { lower: self.cfg.action_lower, upper: self.cfg.action_upper }
    }

    fn running_cost(&self, x: usize, rates: &[f64]) -> f64 {
        debug_assert_eq!(rates.len(), self.cfg.d);
        debug_assert!(
            rates
                .iter()
                .enumerate()
                .all(|(y, &a)| y == x || (a >= self.cfg.action_lower && a <= self.cfg.action_upper)),
            "inadmissible rate vector"
        );
        let mut cost = 0.0;
        for (y, &a) in rates.iter().enumerate() {
            if y != x {
                let z = a - RATE_CENTER;
                cost += z * z;
            }
        }
        self.cfg.b * cost
    }

    fn mean_field_cost(&self, x: usize, eta: &[f64]) -> f64 {
        eta[x]
    }

    fn terminal_cost(&self, kappa: &[f64], x: usize, eta: &[f64]) -> f64 {
        debug_assert_eq!(kappa.len(), self.cfg.d);
        kappa[x] + eta[x]
    }

    // eta enters only through F; H itself is separable.
    fn hamiltonian(&self, x: usize, _eta: &[f64], p: &[f64]) -> f64 {
        debug_assert_eq!(p.len(), self.cfg.d);
        let mut h = 0.0;
        for (y, &py) in p.iter().enumerate() {
            if y != x {
                let a = self.optimal_rate(py);
                let z = a - RATE_CENTER;
                h += self.cfg.b * z * z + a * py;
            }
        }
        h
    }

    fn selector_into(&self, x: usize, _eta: &[f64], p: &[f64], out: &mut [f64]) {
        debug_assert_eq!(p.len(), self.cfg.d);
        debug_assert_eq!(out.len(), self.cfg.d);
        let mut off_sum = 0.0;
        for (y, &py) in p.iter().enumerate() {
            if y != x {
                let a = self.optimal_rate(py);
                out[y] = a;
                off_sum += a;
            }
        }
        out[x] = -off_sum;
    }

    fn max_outflow_rate(&self) -> f64 {
        (self.cfg.d - 1) as f64 * self.cfg.action_upper
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::extended_hamiltonian;

    fn model(d: usize) -> QuadraticModel {
        QuadraticModel::new(QuadraticModelConfig::new(d)).unwrap()
    }

    /// Brute-force 1-d grid minimizer of b(a-2)^2 + a p over [lo, hi].
    fn grid_argmin(b: f64, p: f64, lo: f64, hi: f64, cells: usize) -> f64 {
        let mut best_a = lo;
        let mut best_v = f64::INFINITY;
        for i in 0..=cells {
            let a = lo + (hi - lo) * i as f64 / cells as f64;
            let v = b * (a - RATE_CENTER) * (a - RATE_CENTER) + a * p;
            if v < best_v {
                best_v = v;
                best_a = a;
            }
        }
        best_a
    }

    #[test]
    fn running_cost_examples() {
        let m = model(3);
        // Centered rates cost nothing.
        assert_eq!(m.running_cost(0, &[0.0, 2.0, 2.0]), 0.0);
        // d=3, from state 1 with rates (., 1, 3), b=4: 4 * (1 + 1) = 8.
        assert_eq!(m.running_cost(0, &[0.0, 1.0, 3.0]), 8.0);
        // Degenerate weight b = 0 zeroes the cost for any admissible rates.
        let degenerate = QuadraticModel {
            cfg: QuadraticModelConfig { b: 0.0, ..QuadraticModelConfig::new(3) },
            space: StateSpace::new(3).unwrap(),
            kappa_box: ParamBox::cube(3, 0.0, 1.0).unwrap(),
        };
        assert_eq!(degenerate.running_cost(0, &[0.0, 1.0, 3.0]), 0.0);
    }

    #[test]
    fn selector_matches_grid_oracle() {
        let m = model(2);
        // At p = 0 the unconstrained minimum a = 2 is admissible.
        assert_eq!(m.optimal_rate(0.0), 2.0);
        assert_eq!(m.optimal_rate(100.0), 1.0);
        assert_eq!(m.optimal_rate(-100.0), 3.0);
        for &p in &[0.0, 100.0, -100.0, 3.7, -0.2] {
            let oracle = grid_argmin(4.0, p, 1.0, 3.0, 100_000);
            assert!(
                (m.optimal_rate(p) - oracle).abs() <= 2e-5,
                "p = {p}: closed form {} vs grid {oracle}",
                m.optimal_rate(p)
            );
        }
    }

    #[test]
    fn selector_row_sums_to_zero() {
        let m = model(4);
        let p = [0.4, -3.0, 12.0, 0.0];
        let eta = [0.25; 4];
        for x in 0..4 {
            let row = m.selector(x, &eta, &p);
            let off: f64 = row.iter().enumerate().filter(|(y, _)| *y != x).map(|(_, v)| v).sum();
            // Diagonal is the negated off-diagonal sum, exactly as constructed.
            assert_eq!(row[x], -off);
            assert!(row.iter().enumerate().all(|(y, &v)| y == x || (1.0..=3.0).contains(&v)));
        }
    }

    #[test]
    fn extended_hamiltonian_examples() {
        // p = 0, eta uniform over d = 3: H = 0 and F = 1/3.
        let m = model(3);
        let eta = [1.0 / 3.0; 3];
        let h = extended_hamiltonian(&m, 0, &eta, &[0.0; 3]);
        assert!((h - 1.0 / 3.0).abs() < 1e-15);

        // d = 2, x = 1 (index 0), p = (0, -8): a*_2 = 3 and the value is
        // 4 * 1 + 3 * (-8) = -20, plus F = eta_1.
        let m2 = model(2);
        let eta2 = [0.7, 0.3];
        let h2 = extended_hamiltonian(&m2, 0, &eta2, &[0.0, -8.0]);
        assert!((h2 - (-20.0 + 0.7)).abs() < 1e-12);
        // Cross-check the -20 against a brute-force grid over the action.
        let a = grid_argmin(4.0, -8.0, 1.0, 3.0, 100_000);
        let v = 4.0 * (a - 2.0) * (a - 2.0) + a * (-8.0);
        assert!((v - (-20.0)).abs() < 1e-8);
    }

    #[test]
    fn hamiltonian_agrees_with_selector_plug_in() {
        let m = model(4);
        let eta = [0.25; 4];
        let p = [1.3, -5.0, 40.0, -41.0];
        for x in 0..4 {
            let rates = m.selector(x, &eta, &p);
            let plug = m.running_cost(x, &rates)
                + rates
                    .iter()
                    .zip(&p)
                    .enumerate()
                    .filter(|(y, _)| *y != x)
                    .map(|(_, (a, py))| a * py)
                    .sum::<f64>();
            assert!((m.hamiltonian(x, &eta, &p) - plug).abs() < 1e-12);
        }
    }

    #[test]
    fn terminal_cost_examples() {
        let m = model(4);
        let eta = [0.25; 4];
        assert_eq!(m.terminal_cost(&[0.0; 4], 1, &eta), 0.25);
        let mut eta0 = [0.0; 4];
        eta0[1] = 1.0;
        assert_eq!(m.terminal_cost(&[1.0, 1.0, 1.0, 1.0], 0, &eta0), 1.0);
    }

    #[test]
    fn hamiltonian_is_concave_in_p() {
        use rand::{Rng, SeedableRng};
        let m = model(3);
        let eta = [1.0 / 3.0; 3];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let p: Vec<f64> = (0..3).map(|_| rng.gen_range(-20.0..20.0)).collect();
            let q: Vec<f64> = (0..3).map(|_| rng.gen_range(-20.0..20.0)).collect();
            let lam: f64 = rng.gen_range(0.0..1.0);
            let mix: Vec<f64> = p.iter().zip(&q).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
            for x in 0..3 {
                let lhs = m.hamiltonian(x, &eta, &mix);
                let rhs = lam * m.hamiltonian(x, &eta, &p)
                    + (1.0 - lam) * m.hamiltonian(x, &eta, &q);
                assert!(lhs >= rhs - 1e-10, "concavity violated: {lhs} < {rhs}");
            }
        }
    }
}
