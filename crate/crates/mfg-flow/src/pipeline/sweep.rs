//! Width sweep: retrain the same dataset across hidden widths and seeds.

use crate::error::Result;
use crate::pipeline::dataset::Dataset;
use crate::pipeline::train::{train_flow_map, EpochStats, TrainConfig};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub width: usize,
    pub trial: usize,
    pub seed: u64,
    pub final_train_loss: f64,
    pub final_test_loss: f64,
    pub weight_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummaryRow {
    pub width: usize,
    pub mean_train_loss: f64,
    pub std_train_loss: f64,
    pub mean_test_loss: f64,
    pub std_test_loss: f64,
}

#[derive(Debug)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SweepSummaryRow>,
    /// Raw per-epoch curves, one entry per (width, trial).
    pub histories: Vec<(usize, usize, Vec<EpochStats>)>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Train per (width, trial) with trial seeds `base.seed + trial`, on the
/// same dataset. Trials run in parallel; every run is internally
/// sequential and seeded, so the table is reproducible.
pub fn width_sweep(
    dataset: &Dataset,
    base: &TrainConfig,
    widths: &[usize],
    trials: usize,
) -> Result<SweepOutput> {
    assert!(!widths.is_empty() && trials >= 1);
    let jobs: Vec<(usize, usize)> = widths
        .iter()
        .flat_map(|&w| (0..trials).map(move |t| (w, t)))
        .collect();
    let results: Vec<(SweepRow, Vec<EpochStats>)> = jobs
        .par_iter()
        .map(|&(width, trial)| {
            let seed = base.seed.wrapping_add(trial as u64);
            let cfg = TrainConfig { width, seed, ..base.clone() };
            let out = train_flow_map(dataset, &cfg, None, None)?;
            Ok((
                SweepRow {
                    width,
                    trial,
                    seed,
                    final_train_loss: out.final_train_loss,
                    final_test_loss: out.final_test_loss,
                    weight_bound: out.weight_bound,
                },
                out.history,
            ))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(results.len());
    let mut histories = Vec::with_capacity(results.len());
    for (row, history) in results {
        histories.push((row.width, row.trial, history));
        rows.push(row);
    }
    let summary = widths
        .iter()
        .map(|&w| {
            let train: Vec<f64> =
                rows.iter().filter(|r| r.width == w).map(|r| r.final_train_loss).collect();
            let test: Vec<f64> =
                rows.iter().filter(|r| r.width == w).map(|r| r.final_test_loss).collect();
            let (mean_train, std_train) = mean_std(&train);
            let (mean_test, std_test) = mean_std(&test);
            SweepSummaryRow {
                width: w,
                mean_train_loss: mean_train,
                std_train_loss: std_train,
                mean_test_loss: mean_test,
                std_test_loss: std_test,
            }
        })
        .collect();
    Ok(SweepOutput { rows, summary, histories })
}
