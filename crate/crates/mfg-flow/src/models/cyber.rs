//! The 4-state cybersecurity game.
//!
//! Each computer is defended or undefended (D/U) and susceptible or
//! infected (S/I), giving the state space {DS, DI, US, UI}. The player's
//! only decision is the binary switch `a in {0, 1}`: whether to toggle
//! defended status, which takes effect at rate `rho * a`. On top of the
//! controlled switching, uncontrolled transitions fire:
//!
//! * infection S -> I at a rate affine in the infected mass
//!   `m_I = eta(DI) + eta(UI)`, with separate hacker and peer coefficients
//!   for defended and undefended machines;
//! * recovery I -> S at a constant rate per defended status.
//!
//! Running cost `f(x) = k_D 1_{DS,DI}(x) + k_I 1_{DI,UI}(x)` (independent
//! of the action), no mean-field running cost, and terminal cost
//! `g_kappa(x, eta) = kappa * 1_{DI,UI}(x)` penalizing infection at the
//! horizon, kappa in [0, kappa_max].
//!
//! The Hamiltonian is evaluated by exhaustive enumeration of the two
//! actions; ties are broken toward `a = 0` (do not switch) so the selector
//! stays deterministic.

use crate::error::{Error, Result};
use crate::model::MfgModel;
use crate::types::{ActionBounds, ParamBox, StateSpace};
use serde::{Deserialize, Serialize};

/// Defended susceptible.
pub const DS: usize = 0;
/// Defended infected.
pub const DI: usize = 1;
/// Undefended susceptible.
pub const US: usize = 2;
/// Undefended infected.
pub const UI: usize = 3;

pub const CYBER_STATES: usize = 4;

/// Uncontrolled transition intensities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyberRateParams {
    /// Hacker infection rate against defended machines (DS -> DI offset).
    pub hacker_defended: f64,
    /// Hacker infection rate against undefended machines (US -> UI offset).
    pub hacker_undefended: f64,
    /// Peer infection coefficient, defended: multiplies the infected mass.
    pub infect_defended: f64,
    /// Peer infection coefficient, undefended.
    pub infect_undefended: f64,
    /// Recovery rate DI -> DS.
    pub recover_defended: f64,
    /// Recovery rate UI -> US.
    pub recover_undefended: f64,
}

impl Default for CyberRateParams {
    // Baseline intensities; defended infection channels sit strictly below
    // the undefended ones. Overridable via the model config file.
    fn default() -> Self {
        CyberRateParams {
            hacker_defended: 0.3,
            hacker_undefended: 0.6,
            infect_defended: 0.4,
            infect_undefended: 0.8,
            recover_defended: 0.5,
            recover_undefended: 0.4,
        }
    }
}

impl CyberRateParams {
    fn validate(&self) -> Result<()> {
        let all = [
            ("hacker_defended", self.hacker_defended),
            ("hacker_undefended", self.hacker_undefended),
            ("infect_defended", self.infect_defended),
            ("infect_undefended", self.infect_undefended),
            ("recover_defended", self.recover_defended),
            ("recover_undefended", self.recover_undefended),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("rate {name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Configuration of the cybersecurity game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyberModelConfig {
    /// Cost rate paid while defended.
    #[serde(default = "default_k_d")]
    pub k_d: f64,
    /// Cost rate paid while infected.
    #[serde(default = "default_k_i")]
    pub k_i: f64,
    /// Switching intensity rho.
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Upper end of the terminal-cost parameter range K = [0, kappa_max].
    #[serde(default = "default_kappa_max")]
    pub kappa_max: f64,
    /// Horizon T.
    #[serde(default = "default_cyber_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub rates: CyberRateParams,
}

fn default_k_d() -> f64 {
    0.3
}
fn default_k_i() -> f64 {
    0.5
}
fn default_rho() -> f64 {
    0.8
}
fn default_kappa_max() -> f64 {
    10.0
}
fn default_cyber_horizon() -> f64 {
    10.0
}

impl Default for CyberModelConfig {
    fn default() -> Self {
        CyberModelConfig {
            k_d: default_k_d(),
            k_i: default_k_i(),
            rho: default_rho(),
            kappa_max: default_kappa_max(),
            horizon: default_cyber_horizon(),
            rates: CyberRateParams::default(),
        }
    }
}

impl CyberModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("k_d", self.k_d), ("k_i", self.k_i), ("rho", self.rho)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.kappa_max > 0.0) {
            return Err(Error::config("kappa_max must be positive".to_string()));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::config("horizon must be positive".to_string()));
        }
        self.rates.validate()
    }
}

/// The cybersecurity game as an [`MfgModel`].
#[derive(Debug, Clone)]
pub struct CyberModel {
    cfg: CyberModelConfig,
    space: StateSpace,
    kappa_box: ParamBox,
}

impl CyberModel {
    pub fn new(cfg: CyberModelConfig) -> Result<Self> {
        cfg.validate()?;
        let space = StateSpace::with_labels(
            ["DS", "DI", "US", "UI"].iter().map(|s| s.to_string()).collect(),
        )?;
        let kappa_box = ParamBox::new(vec![0.0], vec![cfg.kappa_max])?;
        Ok(CyberModel { cfg, space, kappa_box })
    }

    pub fn config(&self) -> &CyberModelConfig {
        &self.cfg
    }

    fn infected_mass(eta: &[f64]) -> f64 {
        eta[DI] + eta[UI]
    }

    /// Transition-rate row out of state `x` under switch decision
    /// `a in {0, 1}`. Off-diagonal entries are nonnegative, the diagonal is
    /// the negated off-diagonal sum, and only switching, infection, and
    /// recovery channels are populated.
    pub fn rate_row(&self, x: usize, a: u8, eta: &[f64]) -> [f64; CYBER_STATES] {
        debug_assert!(x < CYBER_STATES);
        debug_assert!(a <= 1);
        debug_assert_eq!(eta.len(), CYBER_STATES);
        let r = &self.cfg.rates;
        let m_i = Self::infected_mass(eta);
        let switch = self.cfg.rho * a as f64;
        let mut row = [0.0; CYBER_STATES];
        match x {
            DS => {
                row[DI] = r.hacker_defended + r.infect_defended * m_i;
                row[US] = switch;
            }
            DI => {
                row[DS] = r.recover_defended;
                row[UI] = switch;
            }
            US => {
                row[UI] = r.hacker_undefended + r.infect_undefended * m_i;
                row[DS] = switch;
            }
            UI => {
                row[US] = r.recover_undefended;
                row[DI] = switch;
            }
            _ => unreachable!(),
        }
        let off_sum: f64 = row.iter().enumerate().filter(|(y, _)| *y != x).map(|(_, v)| v).sum();
        row[x] = -off_sum;
        row
    }

    /// Running cost f(x): k_D while defended plus k_I while infected.
    pub fn stage_cost(&self, x: usize) -> f64 {
        let defended = x == DS || x == DI;
        let infected = x == DI || x == UI;
        (if defended { self.cfg.k_d } else { 0.0 }) + (if infected { self.cfg.k_i } else { 0.0 })
    }

    /// Hamiltonian value and minimizing action, by enumerating both
    /// actions. Ties go to `a = 0`.
    pub fn hamiltonian_with_action(&self, x: usize, eta: &[f64], p: &[f64]) -> (f64, u8) {
        let f = self.stage_cost(x);
        let mut best = (f64::INFINITY, 0u8);
        for a in [0u8, 1u8] {
            let row = self.rate_row(x, a, eta);
            let mut v = f;
            for y in 0..CYBER_STATES {
                if y != x {
                    v += row[y] * p[y];
                }
            }
            if v < best.0 {
                best = (v, a);
            }
        }
        best
    }
}

impl MfgModel for CyberModel {
    fn state_space(&self) -> &StateSpace {
        &self.space
    }

    fn horizon(&self) -> f64 {
        self.cfg.horizon
    }

    fn param_box(&self) -> &ParamBox {
        &self.kappa_box
    }

    /// Hull of the binary switch decision set {0, 1}.
    fn action_bounds(&self) -> ActionBounds {
        ActionBounds { lower: 0.0, upper: 1.0 }
    }

    fn running_cost(&self, x: usize, _rates: &[f64]) -> f64 {
        self.stage_cost(x)
    }

    fn mean_field_cost(&self, _x: usize, _eta: &[f64]) -> f64 {
        0.0
    }

    fn terminal_cost(&self, kappa: &[f64], x: usize, _eta: &[f64]) -> f64 {
        debug_assert_eq!(kappa.len(), 1);
        let infected = x == DI || x == UI;
        if infected {
            kappa[0]
        } else {
            0.0
        }
    }

    fn hamiltonian(&self, x: usize, eta: &[f64], p: &[f64]) -> f64 {
        self.hamiltonian_with_action(x, eta, p).0
    }

    fn selector_into(&self, x: usize, eta: &[f64], p: &[f64], out: &mut [f64]) {
        let (_, a) = self.hamiltonian_with_action(x, eta, p);
        let row = self.rate_row(x, a, eta);
        out.copy_from_slice(&row);
    }

    fn max_outflow_rate(&self) -> f64 {
        let r = &self.cfg.rates;
        let from_ds = self.cfg.rho + r.hacker_defended + r.infect_defended;
        let from_di = self.cfg.rho + r.recover_defended;
        let from_us = self.cfg.rho + r.hacker_undefended + r.infect_undefended;
        let from_ui = self.cfg.rho + r.recover_undefended;
        from_ds.max(from_di).max(from_us).max(from_ui)
    }
}
