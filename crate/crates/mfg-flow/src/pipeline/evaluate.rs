//! Evaluation of a learned flow map against the solver.
//!
//! For each probe pair (eta, kappa) the game is solved to get the
//! reference (u, mu); the network's value prediction is compared
//! pointwise on the grid, and the distribution is re-derived by running
//! the forward equation on the predicted values and compared against the
//! solver's flow.

use crate::error::Result;
use crate::model::MfgModel;
use crate::nn::{MlpParams, Workspace};
use crate::pipeline::dataset::DatasetMode;
use crate::pipeline::sample::{sample_kappa, sample_simplex, seeded_stream, STREAM_EVAL};
use crate::solver::{kfp_reconstruct, picard_solve, PicardConfig};
use crate::types::{SimplexDist, TimeGrid};
use rayon::prelude::*;

/// Predicted value table on the grid: row j is the network's value vector
/// at t_j for the given instance.
pub fn predict_u_table(
    params: &MlpParams,
    mode: DatasetMode,
    grid: &TimeGrid,
    eta: &SimplexDist,
    kappa: &[f64],
) -> Vec<Vec<f64>> {
    let d = eta.dim();
    let rows = grid.num_points();
    let mut ws = Workspace::for_params(params);
    match mode {
        DatasetMode::Pointwise => {
            let mut x = Vec::with_capacity(1 + d + kappa.len());
            (0..rows)
                .map(|j| {
                    x.clear();
                    x.push(grid.t(j));
                    x.extend_from_slice(eta.as_slice());
                    x.extend_from_slice(kappa);
                    params.forward_into(&x, &mut ws);
                    ws.output().to_vec()
                })
                .collect()
        }
        DatasetMode::Augmented => {
            let mut x = Vec::with_capacity(d + kappa.len());
            x.extend_from_slice(eta.as_slice());
            x.extend_from_slice(kappa);
            params.forward_into(&x, &mut ws);
            let flat = ws.output();
            assert_eq!(flat.len(), rows * d, "augmented output dimension mismatch");
            flat.chunks(d).map(|c| c.to_vec()).collect()
        }
    }
}

/// Error metrics for one evaluated pair.
#[derive(Debug, Clone)]
pub struct PairEval {
    pub index: usize,
    pub eta: Vec<f64>,
    pub kappa: Vec<f64>,
    /// max over grid points and states of |u - u_hat|.
    pub u_sup_err: f64,
    /// mean over grid points and states of |u - u_hat|.
    pub u_mean_err: f64,
    /// Per grid point: max over states of |u - u_hat|.
    pub per_time_err: Vec<f64>,
    /// Per state: max over grid points of |u - u_hat|.
    pub per_state_err: Vec<f64>,
    /// Full |u - u_hat| table for curve export.
    pub abs_err: Vec<Vec<f64>>,
    pub u_true: Vec<Vec<f64>>,
    pub u_hat: Vec<Vec<f64>>,
    /// sup over time of the max-norm distribution error, when
    /// reconstruction ran.
    pub mu_sup_err: Option<f64>,
    pub mu_true: Vec<Vec<f64>>,
    pub mu_hat: Vec<Vec<f64>>,
}

/// Evaluation results over all pairs; non-converged solver pairs are
/// skipped and reported.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub pairs: Vec<PairEval>,
    pub skipped: Vec<(usize, String)>,
}

impl EvalReport {
    pub fn mean_u_sup_err(&self) -> f64 {
        mean(self.pairs.iter().map(|p| p.u_sup_err))
    }

    pub fn max_u_sup_err(&self) -> f64 {
        self.pairs.iter().map(|p| p.u_sup_err).fold(0.0, f64::max)
    }

    pub fn mean_mu_sup_err(&self) -> f64 {
        mean(self.pairs.iter().filter_map(|p| p.mu_sup_err))
    }

    pub fn max_mu_sup_err(&self) -> f64 {
        self.pairs.iter().filter_map(|p| p.mu_sup_err).fold(0.0, f64::max)
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for v in it {
        sum += v;
        count += 1;
    }
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Deterministic evaluation instances drawn from the dedicated stream.
pub fn sample_eval_pairs<M: MfgModel + ?Sized>(
    model: &M,
    count: usize,
    seed: u64,
) -> Vec<(SimplexDist, Vec<f64>)> {
    let mut rng = seeded_stream(seed, STREAM_EVAL);
    (0..count)
        .map(|_| {
            let eta = sample_simplex(&mut rng, model.num_states());
            let kappa = sample_kappa(&mut rng, model.param_box());
            (eta, kappa)
        })
        .collect()
}

/// Evaluate an arbitrary value-table predictor against the solver. The
/// predictor maps (pair index, eta, kappa) to a (M+1) x d value table;
/// pass a network wrapper or an oracle.
pub fn evaluate_with<M, P>(
    model: &M,
    grid: &TimeGrid,
    pairs: &[(SimplexDist, Vec<f64>)],
    solver_cfg: &PicardConfig,
    predictor: P,
    reconstruct: bool,
) -> Result<EvalReport>
where
    M: MfgModel + ?Sized,
    P: Fn(usize, &SimplexDist, &[f64]) -> Vec<Vec<f64>> + Sync,
{
    let results: Vec<std::result::Result<PairEval, (usize, String)>> = pairs
        .par_iter()
        .enumerate()
        .map(|(index, (eta, kappa))| {
            let outcome = match picard_solve(model, eta, kappa, grid, solver_cfg) {
                Ok(o) => o,
                Err(e) => return Err((index, e.to_string())),
            };
            if !outcome.converged {
                return Err((index, "solver did not converge".to_string()));
            }
            let truth = outcome.solution;
            let u_hat = predictor(index, eta, kappa);
            let d = model.num_states();
            let rows = grid.num_points();
            let mut abs_err = vec![vec![0.0; d]; rows];
            let mut per_time = vec![0.0f64; rows];
            let mut per_state = vec![0.0f64; d];
            let mut sup: f64 = 0.0;
            let mut total = 0.0;
            for j in 0..rows {
                for x in 0..d {
                    let e = (truth.u[j][x] - u_hat[j][x]).abs();
                    abs_err[j][x] = e;
                    per_time[j] = per_time[j].max(e);
                    per_state[x] = per_state[x].max(e);
                    sup = sup.max(e);
                    total += e;
                }
            }
            let (mu_sup_err, mu_hat) = if reconstruct {
                let mu_hat = match kfp_reconstruct(model, |j| u_hat[j].clone(), eta, grid) {
                    Ok(m) => m,
                    Err(e) => return Err((index, format!("reconstruction: {e}"))),
                };
                let err = crate::types::table_max_diff(&mu_hat, &truth.mu);
                (Some(err), mu_hat)
            } else {
                (None, Vec::new())
            };
            Ok(PairEval {
                index,
                eta: eta.as_slice().to_vec(),
                kappa: kappa.clone(),
                u_sup_err: sup,
                u_mean_err: total / (rows * d) as f64,
                per_time_err: per_time,
                per_state_err: per_state,
                abs_err,
                u_true: truth.u,
                u_hat,
                mu_sup_err,
                mu_true: truth.mu,
                mu_hat,
            })
        })
        .collect();
    let mut report = EvalReport { pairs: Vec::new(), skipped: Vec::new() };
    for r in results {
        match r {
            Ok(p) => report.pairs.push(p),
            Err(s) => report.skipped.push(s),
        }
    }
    Ok(report)
}

/// Compare a trained network's value predictions against the solver.
pub fn evaluate_flow_map<M: MfgModel + ?Sized>(
    model: &M,
    params: &MlpParams,
    mode: DatasetMode,
    grid: &TimeGrid,
    pairs: &[(SimplexDist, Vec<f64>)],
    solver_cfg: &PicardConfig,
) -> Result<EvalReport> {
    evaluate_with(
        model,
        grid,
        pairs,
        solver_cfg,
        |_, eta, kappa| predict_u_table(params, mode, grid, eta, kappa),
        false,
    )
}

/// Recover the distribution flow by stepping the forward equation on the
/// network's values, and compare it against the solver's flow.
pub fn evaluate_reconstruction<M: MfgModel + ?Sized>(
    model: &M,
    params: &MlpParams,
    mode: DatasetMode,
    grid: &TimeGrid,
    pairs: &[(SimplexDist, Vec<f64>)],
    solver_cfg: &PicardConfig,
) -> Result<EvalReport> {
    evaluate_with(
        model,
        grid,
        pairs,
        solver_cfg,
        |_, eta, kappa| predict_u_table(params, mode, grid, eta, kappa),
        true,
    )
}
