//! Foundational domain types: probability simplex points, state spaces,
//! time grids, and parameter boxes.
//!
//! States are numbered 1..=d in documentation and error messages, but all
//! storage and public APIs are 0-indexed (`x` ranges over `0..d`). The
//! mapping is fixed: documented state `i` lives at index `i - 1`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A point on the probability simplex P([d]): nonnegative entries summing
/// to one.
///
/// Construction is two-tiered. Inputs already on the simplex (entries >= 0,
/// sum within [`SimplexDist::STRICT_TOL`] of 1) are stored as-is. Inputs
/// within [`SimplexDist::REPAIR_TOL`] of the simplex are projected by
/// clipping negative entries to zero and dividing by the sum; anything
/// further off is rejected. The repair path absorbs accumulated floating
/// error from forward-Euler stepping without masking real bugs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexDist {
    probs: Vec<f64>,
}

impl SimplexDist {
    /// Entries and sum accepted verbatim within this tolerance.
    pub const STRICT_TOL: f64 = 1e-12;
    /// Inputs within this distance of the simplex are renormalized.
    pub const REPAIR_TOL: f64 = 1e-9;

    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Simplex("empty probability vector".into()));
        }
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::Simplex("non-finite entry".into()));
        }
        let sum: f64 = probs.iter().sum();
        let exact = probs.iter().all(|&p| p >= 0.0) && (sum - 1.0).abs() <= Self::STRICT_TOL;
        if exact {
            return Ok(SimplexDist { probs });
        }
        let repairable =
            probs.iter().all(|&p| p >= -Self::REPAIR_TOL) && (sum - 1.0).abs() <= Self::REPAIR_TOL;
        if !repairable {
            let min = probs.iter().cloned().fold(f64::INFINITY, f64::min);
            return Err(Error::Simplex(format!(
                "vector too far from simplex (sum = {sum}, min entry = {min})"
            )));
        }
        let mut clipped: Vec<f64> = probs.iter().map(|&p| p.max(0.0)).collect();
        let clipped_sum: f64 = clipped.iter().sum();
        for p in &mut clipped {
            *p /= clipped_sum;
        }
        Ok(SimplexDist { probs: clipped })
    }

    /// Uniform distribution over `d` states.
    pub fn uniform(d: usize) -> Self {
        assert!(d >= 1);
        SimplexDist { probs: vec![1.0 / d as f64; d] }
    }

    /// Point mass on state index `i`.
    pub fn vertex(d: usize, i: usize) -> Self {
        assert!(i < d);
        let mut probs = vec![0.0; d];
        probs[i] = 1.0;
        SimplexDist { probs }
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }
}

impl TryFrom<Vec<f64>> for SimplexDist {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        SimplexDist::new(v)
    }
}

impl From<SimplexDist> for Vec<f64> {
    fn from(s: SimplexDist) -> Vec<f64> {
        s.probs
    }
}

/// The finite state space [d] = {1, ..., d}, optionally labeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    d: usize,
    labels: Option<Vec<String>>,
}

impl StateSpace {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::config(format!("state space needs d >= 2, got {d}")));
        }
        Ok(StateSpace { d, labels: None })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        let d = labels.len();
        if d < 2 {
            return Err(Error::config(format!("state space needs d >= 2, got {d}")));
        }
        for (i, a) in labels.iter().enumerate() {
            for b in labels.iter().skip(i + 1) {
                if a == b {
                    return Err(Error::config(format!("duplicate state label {a:?}")));
                }
            }
        }
        Ok(StateSpace { d, labels: Some(labels) })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Label for 0-indexed state `x`, falling back to its 1-indexed number.
    pub fn label(&self, x: usize) -> String {
        match &self.labels {
            Some(l) => l[x].clone(),
            None => format!("{}", x + 1),
        }
    }

    /// Index of a label, if this space is labeled.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.as_ref()?.iter().position(|l| l == label)
    }
}

/// Uniform time grid on [0, T] with M steps (M + 1 points).
///
/// The degenerate grid T = 0, M = 0 is allowed and has the single point
/// t = 0; otherwise M >= 1 and dt = T / M.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !horizon.is_finite() || horizon < 0.0 {
            return Err(Error::config(format!("invalid horizon {horizon}")));
        }
        if steps == 0 {
            if horizon != 0.0 {
                return Err(Error::config("M = 0 requires T = 0".to_string()));
            }
            return Ok(TimeGrid { horizon: 0.0, steps: 0, dt: 0.0 });
        }
        if horizon == 0.0 {
            return Err(Error::config("T = 0 requires M = 0".to_string()));
        }
        let dt = horizon / steps as f64;
        // dt * M must reproduce T to within one ulp.
        let back = dt * steps as f64;
        let ulp = horizon * f64::EPSILON;
        if (back - horizon).abs() > ulp {
            return Err(Error::config(format!(
                "grid T = {horizon}, M = {steps} does not divide evenly (dt*M off by {})",
                back - horizon
            )));
        }
        Ok(TimeGrid { horizon, steps, dt })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of steps M.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of grid points M + 1.
    pub fn num_points(&self) -> usize {
        self.steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Grid point t_j = j * T / M.
    pub fn t(&self, j: usize) -> f64 {
        debug_assert!(j <= self.steps);
        if self.steps == 0 {
            return 0.0;
        }
        self.horizon * j as f64 / self.steps as f64
    }
}

/// Axis-aligned box in R^k; the parameter set K for terminal costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::config("param box bounds have mismatched lengths".to_string()));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return Err(Error::config(format!("degenerate param box: [{l}, {u}]")));
            }
        }
        Ok(ParamBox { lower, upper })
    }

    /// The cube [lo, hi]^k.
    pub fn cube(k: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; k], vec![hi; k])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, kappa: &[f64]) -> bool {
        kappa.len() == self.dim()
            && kappa
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(k, (l, u))| *k >= *l && *k <= *u)
    }
}

/// Closed interval of admissible transition rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    pub lower: f64,
    pub upper: f64,
}

impl ActionBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower <= upper) {
            return Err(Error::config(format!("bad action bounds [{lower}, {upper}]")));
        }
        Ok(ActionBounds { lower, upper })
    }

    pub fn clamp(&self, a: f64) -> f64 {
        a.clamp(self.lower, self.upper)
    }

    pub fn contains(&self, a: f64) -> bool {
        a >= self.lower && a <= self.upper
    }
}

/// Max-norm distance between two equally shaped tables of rows.
pub fn table_max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut m: f64 = 0.0;
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            m = m.max((x - y).abs());
        }
    }
    m
}

/// Euclidean distance between two vectors.
pub fn euclidean_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_accepts_exact() {
        let s = SimplexDist::new(vec![0.25, 0.25, 0.5]).unwrap();
        assert_eq!(s.as_slice(), &[0.25, 0.25, 0.5]);
    }

    #[test]
    fn simplex_repairs_small_drift() {
        let s = SimplexDist::new(vec![0.5 + 3e-10, 0.5, -2e-10]).unwrap();
        let sum: f64 = s.as_slice().iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12);
        assert!(s.as_slice().iter().all(|&p| p >= 0.0));
        assert_eq!(s.as_slice()[2], 0.0);
    }

    #[test]
    fn simplex_rejects_far_off() {
        assert!(SimplexDist::new(vec![0.7, 0.7]).is_err());
        assert!(SimplexDist::new(vec![1.1, -0.1]).is_err());
        assert!(SimplexDist::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn state_space_labels() {
        let s = StateSpace::with_labels(
            ["DS", "DI", "US", "UI"].iter().map(|s| s.to_string()).collect(),
        )
        .unwrap();
        assert_eq!(s.dim(), 4);
        assert_eq!(s.index_of("US"), Some(2));
        assert!(StateSpace::with_labels(vec!["a".into(), "a".into()]).is_err());
        assert!(StateSpace::new(1).is_err());
    }

    #[test]
    fn grid_points() {
        let g = TimeGrid::new(1.0, 100).unwrap();
        assert_eq!(g.num_points(), 101);
        assert_eq!(g.t(0), 0.0);
        assert_eq!(g.t(100), 1.0);
        assert!((g.dt() - 0.01).abs() < 1e-18);
        // Degenerate single-point grid.
        let g0 = TimeGrid::new(0.0, 0).unwrap();
        assert_eq!(g0.num_points(), 1);
        assert_eq!(g0.t(0), 0.0);
        assert!(TimeGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn param_box_contains() {
        let b = ParamBox::cube(3, 0.0, 1.0).unwrap();
        assert!(b.contains(&[0.0, 0.5, 1.0]));
        assert!(!b.contains(&[0.0, 0.5, 1.5]));
        assert!(!b.contains(&[0.0, 0.5]));
        assert!(ParamBox::new(vec![1.0], vec![0.0]).is_err());
    }
}
