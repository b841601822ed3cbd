//! Mini-batch training of the flow-map network.

use crate::error::{Error, Result};
use crate::nn::{
    cosine_lr, loss_and_grad, loss_value, optimizer_step, Checkpoint, CheckpointExtra, Gradients,
    LossKind, MlpParams, OptimState, OptimizerKind, RngState, Workspace,
};
use crate::pipeline::dataset::Dataset;
use crate::pipeline::sample::{seeded_stream, STREAM_SPLIT, STREAM_TRAIN};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Hidden-layer width W (all hidden layers share it).
    pub width: usize,
    /// Number of hidden layers L.
    pub depth: usize,
    pub lr0: f64,
    pub optimizer: OptimizerKind,
    /// Decoupled weight decay; `None` keeps the optimizer default
    /// (0.01 for AdamW). Zero recovers plain Adam.
    pub weight_decay: Option<f64>,
    pub loss: LossKind,
    pub seed: u64,
    /// Held-out fraction, split off before training.
    pub test_fraction: f64,
    /// Early stopping patience in epochs; absent = off.
    pub early_stop_patience: Option<usize>,
    /// Test-loss evaluation period in epochs.
    pub test_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 2000,
            batch_size: 64,
            width: 64,
            depth: 4,
            lr0: 8e-4,
            optimizer: OptimizerKind::AdamW,
            weight_decay: None,
            loss: LossKind::SmoothL1,
            seed: 0,
            test_fraction: 0.2,
            early_stop_patience: None,
            test_every: 25,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.width == 0 || self.depth == 0 {
            return Err(Error::config("epochs, batch size, width, depth must be >= 1"));
        }
        if !(self.lr0 > 0.0) {
            return Err(Error::config("lr0 must be positive".to_string()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::config("test fraction must lie in (0, 1)".to_string()));
        }
        if self.test_every == 0 {
            return Err(Error::config("test_every must be >= 1".to_string()));
        }
        Ok(())
    }

    /// Layer sizes for a dataset with the given input/output dims.
    pub fn layer_sizes(&self, input_dim: usize, output_dim: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.depth + 2);
        sizes.push(input_dim);
        sizes.extend(std::iter::repeat(self.width).take(self.depth));
        sizes.push(output_dim);
        sizes
    }
}

/// Deterministic train/test split: a pure function of (seed, n,
/// fraction). The held-out indices are the head of a seeded permutation.
///
/// Training keys this to the *dataset* seed, not the training seed, so
/// every run on a dataset — across trial seeds and architectures — is
/// evaluated on the same held-out set and comparisons are paired.
pub fn split_indices(seed: u64, n: usize, test_fraction: f64) -> (Vec<usize>, Vec<usize>) {
    assert!(n >= 2, "need at least two samples to split");
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = seeded_stream(seed, STREAM_SPLIT);
    perm.shuffle(&mut rng);
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let test = perm[..n_test].to_vec();
    let train = perm[n_test..].to_vec();
    (train, test)
}

/// Per-epoch loss-history row.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochStats>,
    pub final_train_loss: f64,
    pub final_test_loss: f64,
    /// Norm-product diagnostic of the final parameters.
    pub weight_bound: f64,
    /// Epochs actually run (differs from the configured total under
    /// early stopping).
    pub epochs_run: usize,
}

fn mean_loss(
    params: &MlpParams,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    idx: &[usize],
    kind: LossKind,
    ws: &mut Workspace,
) -> f64 {
    let mut total = 0.0;
    for &i in idx {
        params.forward_into(&xs[i], ws);
        total += loss_value(kind, ws.output(), &ys[i]);
    }
    total / idx.len() as f64
}

/// Train the flow-map network on a dataset. `resume` continues an earlier
/// run: parameters, optimizer state, RNG position, and the epoch counter
/// pick up where the checkpoint left off.
pub fn train_flow_map(
    dataset: &Dataset,
    cfg: &TrainConfig,
    extra: Option<CheckpointExtra>,
    resume: Option<Checkpoint>,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::config("empty dataset".to_string()));
    }
    let (xs, ys) = dataset.to_xy();
    let input_dim = dataset.header.input_dim();
    let output_dim = dataset.header.label_dim();
    let (train_idx, test_idx) =
        split_indices(dataset.header.seed, dataset.len(), cfg.test_fraction);
    if cfg.batch_size > train_idx.len() {
        return Err(Error::config(format!(
            "batch size {} exceeds training-set size {}",
            cfg.batch_size,
            train_idx.len()
        )));
    }
    let sizes = cfg.layer_sizes(input_dim, output_dim);

    let (mut params, mut opt, mut rng, start_epoch) = match resume {
        Some(ckpt) => {
            if ckpt.params.sizes() != sizes.as_slice() {
                return Err(Error::config(format!(
                    "checkpoint layer sizes {:?} do not match configured {:?}",
                    ckpt.params.sizes(),
                    sizes
                )));
            }
            let rng = ckpt.rng.restore()?;
            (ckpt.params, ckpt.opt, rng, ckpt.epoch)
        }
        None => {
            let mut rng = seeded_stream(cfg.seed, STREAM_TRAIN);
            let params = MlpParams::he_init(&mut rng, &sizes);
            let mut opt = OptimState::new(cfg.optimizer, &params);
            if let Some(wd) = cfg.weight_decay {
                opt.weight_decay = wd;
            }
            (params, opt, rng, 0)
        }
    };
    if start_epoch >= cfg.epochs {
        return Err(Error::config(format!(
            "checkpoint already at epoch {start_epoch} >= configured total {}",
            cfg.epochs
        )));
    }

    let mut ws = Workspace::for_params(&params);
    let mut grads = Gradients::zeros_like(&params);
    let mut order = train_idx.clone();
    let mut history = Vec::with_capacity(cfg.epochs - start_epoch);
    let mut best: Option<(f64, usize, MlpParams)> = None;
    let mut final_train = f64::NAN;
    let mut final_test = f64::NAN;
    let mut epochs_run = start_epoch;

    for epoch in start_epoch..cfg.epochs {
        let lr = cosine_lr(epoch, cfg.epochs, cfg.lr0);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[f64], &[f64])> =
                chunk.iter().map(|&i| (xs[i].as_slice(), ys[i].as_slice())).collect();
            let batch_loss = loss_and_grad(&params, &batch, cfg.loss, &mut ws, &mut grads);
            optimizer_step(&mut opt, &mut params, &grads, lr);
            epoch_loss += batch_loss * chunk.len() as f64;
        }
        let train_loss = epoch_loss / order.len() as f64;
        let is_last = epoch + 1 == cfg.epochs;
        let eval_now = (epoch + 1) % cfg.test_every == 0 || is_last;
        let test_loss = if eval_now {
            Some(mean_loss(&params, &xs, &ys, &test_idx, cfg.loss, &mut ws))
        } else {
            None
        };
        history.push(EpochStats { epoch, lr, train_loss, test_loss });
        final_train = train_loss;
        epochs_run = epoch + 1;
        if let Some(t) = test_loss {
            final_test = t;
            if let Some(patience) = cfg.early_stop_patience {
                let improved = best.as_ref().map_or(true, |(b, _, _)| t < *b);
                if improved {
                    best = Some((t, epoch, params.clone()));
                } else if let Some((_, best_epoch, _)) = &best {
                    if epoch - best_epoch >= patience {
                        break;
                    }
                }
            }
        }
    }

    if cfg.early_stop_patience.is_some() {
        if let Some((best_loss, _, best_params)) = best {
            params = best_params;
            final_test = best_loss;
        }
    }
    if !params.all_finite() {
        return Err(Error::numerical("training diverged to non-finite parameters".to_string()));
    }

    let weight_bound = params.weight_bound();
    let checkpoint = Checkpoint {
        params,
        opt,
        epoch: epochs_run,
        loss: cfg.loss,
        lr0: cfg.lr0,
        total_epochs: cfg.epochs,
        rng: RngState::capture(&rng),
        extra,
    };
    Ok(TrainOutput {
        checkpoint,
        history,
        final_train_loss: final_train,
        final_test_loss: final_test,
        weight_bound,
        epochs_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::loss_value;
    use crate::pipeline::dataset::{DatasetHeader, DatasetMode, SampleRecord, DATASET_SCHEMA_VERSION};

    fn constant_label_dataset(n: usize, label: Vec<f64>) -> Dataset {
        let mut records = Vec::new();
        let d = 2;
        let m = 4;
        for i in 0..n {
            let a = (i as f64 + 1.0) / (n as f64 + 2.0);
            let j = 1 + i % m;
            records.push(SampleRecord {
                mode: DatasetMode::Pointwise,
                eta: vec![a, 1.0 - a],
                kappa: vec![0.5, 0.5],
                j: Some(j),
                t: Some(j as f64 / m as f64),
                y: label.clone(),
            });
        }
        Dataset {
            header: DatasetHeader {
                schema_version: DATASET_SCHEMA_VERSION,
                model_digest: "sha256:test".into(),
                d,
                k: 2,
                m,
                t: 1.0,
                n,
                seed: 3,
                mode: DatasetMode::Pointwise,
            },
            records,
        }
    }

    #[test]
    fn split_is_pure_in_seed_and_n() {
        let (tr1, te1) = split_indices(11, 100, 0.2);
        let (tr2, te2) = split_indices(11, 100, 0.2);
        assert_eq!(tr1, tr2);
        assert_eq!(te1, te2);
        assert_eq!(te1.len(), 20);
        assert_eq!(tr1.len(), 80);
        let (tr3, _) = split_indices(12, 100, 0.2);
        assert_ne!(tr1, tr3);
        // Disjoint cover.
        let mut all: Vec<usize> = tr1.iter().chain(&te1).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn constant_labels_train_to_tiny_loss() {
        let ds = constant_label_dataset(40, vec![0.7, -0.4]);
        // Plain Adam (no decay): decoupled weight decay alone floors the
        // loss near 1e-5 and hides the fit.
        let cfg = TrainConfig {
            epochs: 1000,
            batch_size: 4,
            width: 16,
            depth: 2,
            lr0: 2e-2,
            optimizer: OptimizerKind::AdamW,
            weight_decay: Some(0.0),
            loss: LossKind::SquaredL2,
            seed: 5,
            ..Default::default()
        };
        let out = train_flow_map(&ds, &cfg, None, None).unwrap();
        assert!(
            out.final_train_loss < 1e-6,
            "train loss stuck at {}",
            out.final_train_loss
        );
        assert!(out.checkpoint.params.weight_bound() > 0.0);
    }

    #[test]
    fn full_batch_single_step_matches_hand_update() {
        // One epoch with batch = n is one full-batch SGD step.
        let ds = constant_label_dataset(2, vec![0.3, 0.1]);
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 1,
            width: 4,
            depth: 1,
            lr0: 1e-2,
            optimizer: OptimizerKind::Sgd,
            loss: LossKind::SquaredL2,
            seed: 21,
            test_fraction: 0.5,
            ..Default::default()
        };
        let (train_idx, _) = split_indices(ds.header.seed, 2, 0.5);
        assert_eq!(train_idx.len(), 1);
        let out = train_flow_map(&ds, &cfg, None, None).unwrap();

        // Reproduce by hand: same init stream, one loss_and_grad, one step.
        let (xs, ys) = ds.to_xy();
        let sizes = cfg.layer_sizes(ds.header.input_dim(), ds.header.label_dim());
        let mut rng = seeded_stream(cfg.seed, STREAM_TRAIN);
        let mut params = MlpParams::he_init(&mut rng, &sizes);
        let mut opt = OptimState::new(OptimizerKind::Sgd, &params);
        let mut ws = Workspace::for_params(&params);
        let mut grads = Gradients::zeros_like(&params);
        let i = train_idx[0];
        let batch = [(xs[i].as_slice(), ys[i].as_slice())];
        let loss =
            loss_and_grad(&params, &batch, LossKind::SquaredL2, &mut ws, &mut grads);
        optimizer_step(&mut opt, &mut params, &grads, cosine_lr(0, 1, 1e-2));
        assert_eq!(out.history[0].train_loss, loss);
        assert_eq!(out.checkpoint.params, params);
    }

    #[test]
    fn training_is_seed_deterministic() {
        let ds = constant_label_dataset(30, vec![0.2, 0.9]);
        let cfg = TrainConfig {
            epochs: 20,
            batch_size: 4,
            width: 8,
            depth: 2,
            lr0: 1e-3,
            seed: 77,
            ..Default::default()
        };
        let a = train_flow_map(&ds, &cfg, None, None).unwrap();
        let b = train_flow_map(&ds, &cfg, None, None).unwrap();
        assert_eq!(a.checkpoint.params, b.checkpoint.params);
        assert_eq!(a.final_train_loss, b.final_train_loss);
    }

    #[test]
    fn resume_continues_the_epoch_counter() {
        let ds = constant_label_dataset(30, vec![0.2, 0.9]);
        let cfg15 = TrainConfig {
            epochs: 15,
            batch_size: 4,
            width: 8,
            depth: 2,
            lr0: 1e-3,
            seed: 13,
            test_every: 10,
            ..Default::default()
        };
        let half = train_flow_map(&ds, &cfg15, None, None).unwrap();
        assert_eq!(half.checkpoint.epoch, 15);

        // Round-trip through bytes, then continue to 30 epochs.
        let mut buf = Vec::new();
        half.checkpoint.write_to(&mut buf).unwrap();
        let loaded = Checkpoint::read_from(buf.as_slice()).unwrap();
        let cfg30 = TrainConfig { epochs: 30, ..cfg15.clone() };
        let resumed = train_flow_map(&ds, &cfg30, None, Some(loaded)).unwrap();
        assert_eq!(resumed.checkpoint.epoch, 30);
        assert_eq!(resumed.history.first().unwrap().epoch, 15);
        assert_eq!(resumed.history.len(), 15);

        // Resuming a finished run is rejected.
        let err = train_flow_map(&ds, &cfg15, None, Some(resumed.checkpoint));
        assert!(err.is_err());
    }

    #[test]
    fn early_stopping_restores_best_params() {
        let ds = constant_label_dataset(30, vec![0.2, -0.1]);
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 4,
            width: 8,
            depth: 2,
            lr0: 1e-2,
            seed: 3,
            test_every: 5,
            early_stop_patience: Some(20),
            ..Default::default()
        };
        let out = train_flow_map(&ds, &cfg, None, None).unwrap();
        // Final test loss equals the best observed held-out loss.
        let best_seen = out
            .history
            .iter()
            .filter_map(|h| h.test_loss)
            .fold(f64::INFINITY, f64::min);
        let (xs, ys) = ds.to_xy();
        let (_, test_idx) = split_indices(ds.header.seed, ds.len(), cfg.test_fraction);
        let mut ws = Workspace::for_params(&out.checkpoint.params);
        let mut total = 0.0;
        for &i in &test_idx {
            out.checkpoint.params.forward_into(&xs[i], &mut ws);
            total += loss_value(cfg.loss, ws.output(), &ys[i]);
        }
        let restored_loss = total / test_idx.len() as f64;
        assert!((restored_loss - best_seen).abs() < 1e-12);
    }
}
