//! The behavioral contract of a finite-state mean-field game.
//!
//! A game over states [d] is specified by a running cost `f(x, a)` on
//! transition-rate vectors, a mean-field cost `F(x, eta)`, a parametrized
//! terminal cost `g_kappa(x, eta)`, the Hamiltonian
//!
//! ```text
//! H(x, eta, p) = min_a { f(x, a) + sum_{y != x} a_y p_y }
//! ```
//!
//! and its minimizer, the optimal rate selector `gamma*(x, eta, p)`. The
//! discrete gradient takes the place of the spatial gradient:
//!
//! ```text
//! (Delta_x u)_y = u(y) - u(x).
//! ```
//!
//! `eta` is threaded through `hamiltonian` and `selector_into` so that a
//! single interface serves both benchmark games: models with separable
//! costs ignore it there (all distribution dependence sits in `F`), while
//! games whose transition rates react to the population (infection
//! dynamics) need it.

use crate::types::{ActionBounds, ParamBox, StateSpace};

/// Behavioral contract bundling costs, Hamiltonian, and rate selector.
///
/// All methods are pure functions of their arguments; implementations hold
/// only immutable configuration and are safe to share across threads.
///
/// Selector rows are full length-d rate vectors: off-diagonal entries are
/// the optimal transition rates and the diagonal entry at `x` is the
/// negated sum of the others, so every row sums to zero as constructed.
pub trait MfgModel: Send + Sync {
    fn state_space(&self) -> &StateSpace;

    /// Default horizon T of the game.
    fn horizon(&self) -> f64;

    /// Parameter set K for the terminal-cost family.
    fn param_box(&self) -> &ParamBox;

    /// Admissible rate interval (hull of the action set).
    fn action_bounds(&self) -> ActionBounds;

    /// Running cost f(x, a). `rates` is a full length-d row whose
    /// off-diagonal entries must be admissible.
    fn running_cost(&self, x: usize, rates: &[f64]) -> f64;

    /// Mean-field running cost F(x, eta).
    fn mean_field_cost(&self, x: usize, eta: &[f64]) -> f64;

    /// Terminal cost g_kappa(x, eta) with kappa in the param box.
    fn terminal_cost(&self, kappa: &[f64], x: usize, eta: &[f64]) -> f64;

    /// Hamiltonian H(x, eta, p) = min_a { f(x, a) + sum_{y!=x} a_y p_y }.
    fn hamiltonian(&self, x: usize, eta: &[f64], p: &[f64]) -> f64;

    /// Optimal rate selector gamma*(x, eta, p), written into `out`
    /// (length d, diagonal = negated off-diagonal sum).
    fn selector_into(&self, x: usize, eta: &[f64], p: &[f64], out: &mut [f64]);

    /// Upper bound on the total off-diagonal rate mass of any selector
    /// row; used by the forward-Euler CFL check `dt * bound <= 1`.
    fn max_outflow_rate(&self) -> f64;

    fn num_states(&self) -> usize {
        self.state_space().dim()
    }

    /// Dimension k of the terminal-cost parameter.
    fn param_dim(&self) -> usize {
        self.param_box().dim()
    }

    /// Allocating convenience wrapper around [`MfgModel::selector_into`].
    fn selector(&self, x: usize, eta: &[f64], p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_states()];
        self.selector_into(x, eta, p, &mut out);
        out
    }
}

/// Discrete gradient (Delta_x u)_y = u(y) - u(x), with zero at x itself.
///
/// `x` is a 0-indexed state; panics if out of range.
pub fn discrete_gradient(u_row: &[f64], x: usize) -> Vec<f64> {
    let mut out = vec![0.0; u_row.len()];
    discrete_gradient_into(u_row, x, &mut out);
    out
}

/// In-place variant of [`discrete_gradient`].
pub fn discrete_gradient_into(u_row: &[f64], x: usize, out: &mut [f64]) {
    assert!(x < u_row.len(), "state index {x} out of range for d = {}", u_row.len());
    let ux = u_row[x];
    for (o, &uy) in out.iter_mut().zip(u_row) {
        *o = uy - ux;
    }
    out[x] = 0.0;
}

/// Extended Hamiltonian of the representative player,
/// `Hbar(x, eta, p) = H(x, eta, p) + F(x, eta)`.
pub fn extended_hamiltonian<M: MfgModel + ?Sized>(
    model: &M,
    x: usize,
    eta: &[f64],
    p: &[f64],
) -> f64 {
    debug_assert!(p.iter().all(|v| v.is_finite()), "non-finite gradient argument");
    model.hamiltonian(x, eta, p) + model.mean_field_cost(x, eta)
}
