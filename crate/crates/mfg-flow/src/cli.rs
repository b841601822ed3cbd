//! Command implementations behind the `mfg-flow` binary.
//!
//! Every command is a pure function of its config file, flag overrides,
//! and seeds: rerunning with identical inputs produces byte-identical
//! primary outputs (datasets, checkpoints, CSV tables). Log lines go to
//! stderr and carry no timestamps in the outputs themselves.
//!
//! Exit codes: 0 success, 2 configuration/usage error, 3 numerical
//! failure, 4 I/O failure.

use crate::checks::{check_lasry_lions, selector_gradient_consistency};
use crate::config::LoadedExperiment;
use crate::error::{Error, Result};
use crate::model::MfgModel;
use crate::nn::{Checkpoint, CheckpointExtra};
use crate::pipeline::{
    evaluate_with, generate_dataset, predict_u_table, sample_eval_pairs, sample_simplex,
    seeded_stream, train_flow_map, width_sweep, Dataset, DatasetMode, EpochStats, EvalReport,
    TrainConfig,
};
use crate::solver::cfl_check;
use crate::types::SimplexDist;
use rand::Rng;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Map an error to the documented process exit code.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::Numerical(_) | Error::Simplex(_) => EXIT_NUMERICAL,
        Error::Io(_) | Error::Format(_) => EXIT_IO,
    }
}

/// Flag overrides shared by the commands; `None` keeps the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub mode: Option<DatasetMode>,
    pub epochs: Option<usize>,
    pub pairs: Option<usize>,
    /// Also dump each evaluation pair's solver trajectory as JSONL.
    pub dump_trajectories: bool,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// SHA-256 digest of a file's bytes, for determinism checks.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("sha256:{:x}", hasher.finalize()))
}

fn write_csv(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    Ok(())
}

fn fmt_f64(v: f64) -> String {
    // Shortest round-trip form, matching the JSON encoder.
    let mut s = String::new();
    write!(s, "{v}").unwrap();
    s
}

/// Generate a dataset plus generation report.
pub fn cmd_sample(config_path: &Path, ov: &Overrides) -> Result<()> {
    let loaded = LoadedExperiment::load(config_path)?;
    let model = loaded.build_model()?;
    let grid = loaded.grid(model.as_ref())?;
    let seed = ov.seed.unwrap_or(loaded.experiment.sampling.seed);
    let mode = ov.mode.unwrap_or(loaded.experiment.sampling.mode);
    let out_dir = ov.out.clone().unwrap_or_else(|| loaded.output_dir());
    ensure_dir(&out_dir)?;
    let digest = loaded.model_digest();
    eprintln!(
        "sampling n = {} ({:?}) on M = {} grid, seed {seed}",
        loaded.experiment.sampling.n,
        mode,
        grid.steps()
    );
    let generated = generate_dataset(
        model.as_ref(),
        &digest,
        &grid,
        loaded.experiment.sampling.n,
        mode,
        seed,
        &loaded.experiment.solver,
    )?;
    let dataset_path = out_dir.join("dataset.jsonl");
    generated.dataset.save(&dataset_path)?;
    let report_path = out_dir.join("report.jsonl");
    {
        let file = std::fs::File::create(&report_path)?;
        let mut w = std::io::BufWriter::new(file);
        for row in &generated.report {
            let line = serde_json::to_string(row)
                .map_err(|e| Error::format(format!("report row: {e}")))?;
            writeln!(w, "{line}")?;
        }
        w.flush()?;
    }
    let retried = generated.report.iter().filter(|r| !r.converged).count();
    eprintln!(
        "wrote {} records to {} ({} resampled attempts)",
        generated.dataset.len(),
        dataset_path.display(),
        retried
    );
    println!("dataset digest: {}", file_digest(&dataset_path)?);
    Ok(())
}

fn checkpoint_extra(dataset: &Dataset) -> CheckpointExtra {
    CheckpointExtra {
        model_digest: dataset.header.model_digest.clone(),
        mode: dataset.header.mode.as_str().to_string(),
        d: dataset.header.d,
        k: dataset.header.k,
        m: dataset.header.m,
        t: dataset.header.t,
    }
}

fn history_csv(path: &Path, history: &[EpochStats]) -> Result<()> {
    write_csv(
        path,
        "epoch,lr,train_loss,test_loss",
        history.iter().map(|h| {
            format!(
                "{},{},{},{}",
                h.epoch,
                fmt_f64(h.lr),
                fmt_f64(h.train_loss),
                h.test_loss.map(fmt_f64).unwrap_or_default()
            )
        }),
    )
}

/// Train the flow-map network on an existing dataset.
pub fn cmd_train(
    config_path: &Path,
    dataset_path: Option<&Path>,
    resume: Option<&Path>,
    ov: &Overrides,
) -> Result<()> {
    let loaded = LoadedExperiment::load(config_path)?;
    let out_dir = ov.out.clone().unwrap_or_else(|| loaded.output_dir());
    ensure_dir(&out_dir)?;
    let dataset_path =
        dataset_path.map(Path::to_path_buf).unwrap_or_else(|| out_dir.join("dataset.jsonl"));
    let digest = loaded.model_digest();
    let dataset = Dataset::load(&dataset_path, Some(&digest))?;
    let mut cfg: TrainConfig = loaded.experiment.training.clone();
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    if let Some(epochs) = ov.epochs {
        cfg.epochs = epochs;
    }
    let resume_ckpt = match resume {
        Some(path) => Some(Checkpoint::load(path)?),
        None => None,
    };
    eprintln!(
        "training W = {}, L = {}, {} epochs, batch {} on {} samples",
        cfg.width,
        cfg.depth,
        cfg.epochs,
        cfg.batch_size,
        dataset.len()
    );
    let extra = checkpoint_extra(&dataset);
    let out = train_flow_map(&dataset, &cfg, Some(extra), resume_ckpt)?;
    let ckpt_path = out_dir.join("checkpoint.bin");
    out.checkpoint.save(&ckpt_path)?;
    history_csv(&out_dir.join("loss_history.csv"), &out.history)?;
    eprintln!(
        "done after {} epochs: train loss {:.6e}, test loss {:.6e}, weight bound {:.3e}",
        out.epochs_run, out.final_train_loss, out.final_test_loss, out.weight_bound
    );
    println!("checkpoint digest: {}", file_digest(&ckpt_path)?);
    Ok(())
}

fn state_labels(model: &dyn MfgModel) -> Vec<String> {
    (0..model.num_states()).map(|x| model.state_space().label(x)).collect()
}

fn eval_curves(
    out_dir: &Path,
    model: &dyn MfgModel,
    grid: &crate::types::TimeGrid,
    report: &EvalReport,
) -> Result<()> {
    let curves = out_dir.join("curves");
    ensure_dir(&curves)?;
    let labels = state_labels(model);
    for pair in &report.pairs {
        let err_header = std::iter::once("t".to_string())
            .chain(labels.iter().map(|l| format!("abs_err_{l}")))
            .chain(std::iter::once("max_err".to_string()))
            .collect::<Vec<_>>()
            .join(",");
        write_csv(
            &curves.join(format!("u_err_pair{}.csv", pair.index)),
            &err_header,
            (0..grid.num_points()).map(|j| {
                let mut row = vec![fmt_f64(grid.t(j))];
                row.extend(pair.abs_err[j].iter().map(|v| fmt_f64(*v)));
                row.push(fmt_f64(pair.per_time_err[j]));
                row.join(",")
            }),
        )?;
        let u_header = std::iter::once("t".to_string())
            .chain(labels.iter().map(|l| format!("u_{l}")))
            .chain(labels.iter().map(|l| format!("uhat_{l}")))
            .collect::<Vec<_>>()
            .join(",");
        write_csv(
            &curves.join(format!("u_pair{}.csv", pair.index)),
            &u_header,
            (0..grid.num_points()).map(|j| {
                let mut row = vec![fmt_f64(grid.t(j))];
                row.extend(pair.u_true[j].iter().map(|v| fmt_f64(*v)));
                row.extend(pair.u_hat[j].iter().map(|v| fmt_f64(*v)));
                row.join(",")
            }),
        )?;
        if !pair.mu_hat.is_empty() {
            let mu_header = std::iter::once("t".to_string())
                .chain(labels.iter().map(|l| format!("mu_{l}")))
                .chain(labels.iter().map(|l| format!("muhat_{l}")))
                .collect::<Vec<_>>()
                .join(",");
            write_csv(
                &curves.join(format!("mu_pair{}.csv", pair.index)),
                &mu_header,
                (0..grid.num_points()).map(|j| {
                    let mut row = vec![fmt_f64(grid.t(j))];
                    row.extend(pair.mu_true[j].iter().map(|v| fmt_f64(*v)));
                    row.extend(pair.mu_hat[j].iter().map(|v| fmt_f64(*v)));
                    row.join(",")
                }),
            )?;
        }
    }
    Ok(())
}

/// Evaluate a checkpoint: value-function errors and distribution
/// recovery against fresh solver runs.
pub fn cmd_eval(config_path: &Path, checkpoint_path: Option<&Path>, ov: &Overrides) -> Result<()> {
    let loaded = LoadedExperiment::load(config_path)?;
    let model = loaded.build_model()?;
    let grid = loaded.grid(model.as_ref())?;
    let out_dir = ov.out.clone().unwrap_or_else(|| loaded.output_dir());
    ensure_dir(&out_dir)?;
    let ckpt_path = checkpoint_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out_dir.join("checkpoint.bin"));
    let ckpt = Checkpoint::load(&ckpt_path)?;
    let extra = ckpt
        .extra
        .as_ref()
        .ok_or_else(|| Error::format("checkpoint carries no training context".to_string()))?;
    if extra.model_digest != loaded.model_digest() {
        return Err(Error::config(format!(
            "checkpoint was trained against model {} but config resolves to {}",
            extra.model_digest,
            loaded.model_digest()
        )));
    }
    if extra.d != model.num_states() || extra.m != grid.steps() {
        return Err(Error::config(
            "checkpoint grid/state dimensions do not match the config".to_string(),
        ));
    }
    let mode: DatasetMode = extra.mode.parse()?;
    let seed = ov.seed.unwrap_or(loaded.experiment.evaluation.seed);
    let count = ov.pairs.unwrap_or(loaded.experiment.evaluation.pairs);
    let pairs = sample_eval_pairs(model.as_ref(), count, seed);
    eprintln!("evaluating {} pairs, seed {seed}", pairs.len());
    let report = evaluate_with(
        model.as_ref(),
        &grid,
        &pairs,
        &loaded.experiment.solver,
        |_, eta, kappa| predict_u_table(&ckpt.params, mode, &grid, eta, kappa),
        true,
    )?;
    eval_curves(&out_dir, model.as_ref(), &grid, &report)?;
    if ov.dump_trajectories {
        let curves = out_dir.join("curves");
        ensure_dir(&curves)?;
        for pair in &report.pairs {
            let sol = crate::solver::DiscretizedSolution {
                grid,
                u: pair.u_true.clone(),
                mu: pair.mu_true.clone(),
            };
            let file =
                std::fs::File::create(curves.join(format!("trajectory_pair{}.jsonl", pair.index)))?;
            let mut w = std::io::BufWriter::new(file);
            sol.write_trajectory(&mut w)?;
            w.flush()?;
        }
    }
    let summary = out_dir.join("summary.csv");
    write_csv(
        &summary,
        "pair,u_sup_err,u_mean_err,mu_sup_err",
        report
            .pairs
            .iter()
            .map(|p| {
                format!(
                    "{},{},{},{}",
                    p.index,
                    fmt_f64(p.u_sup_err),
                    fmt_f64(p.u_mean_err),
                    p.mu_sup_err.map(fmt_f64).unwrap_or_default()
                )
            })
            .chain(std::iter::once(format!(
                "mean,{},{},{}",
                fmt_f64(report.mean_u_sup_err()),
                fmt_f64(mean_of(&report, |p| p.u_mean_err)),
                fmt_f64(report.mean_mu_sup_err())
            )))
            .chain(std::iter::once(format!(
                "max,{},{},{}",
                fmt_f64(report.max_u_sup_err()),
                fmt_f64(max_of(&report, |p| p.u_mean_err)),
                fmt_f64(report.max_mu_sup_err())
            ))),
    )?;
    for (index, reason) in &report.skipped {
        eprintln!("pair {index} skipped: {reason}");
    }
    println!(
        "u sup error: mean {:.6e}, max {:.6e}; mu sup error: mean {:.6e}, max {:.6e}",
        report.mean_u_sup_err(),
        report.max_u_sup_err(),
        report.mean_mu_sup_err(),
        report.max_mu_sup_err()
    );
    Ok(())
}

fn mean_of(report: &EvalReport, f: impl Fn(&crate::pipeline::PairEval) -> f64) -> f64 {
    let n = report.pairs.len() as f64;
    report.pairs.iter().map(&f).sum::<f64>() / n
}

fn max_of(report: &EvalReport, f: impl Fn(&crate::pipeline::PairEval) -> f64) -> f64 {
    report.pairs.iter().map(&f).fold(0.0, f64::max)
}

/// Width sweep over a shared dataset.
pub fn cmd_sweep(
    config_path: &Path,
    widths: &[usize],
    trials: usize,
    dataset_path: Option<&Path>,
    ov: &Overrides,
) -> Result<()> {
    if widths.is_empty() || trials == 0 {
        return Err(Error::config("sweep needs at least one width and one trial".to_string()));
    }
    let loaded = LoadedExperiment::load(config_path)?;
    let out_dir = ov.out.clone().unwrap_or_else(|| loaded.output_dir());
    ensure_dir(&out_dir)?;
    let dataset_path =
        dataset_path.map(Path::to_path_buf).unwrap_or_else(|| out_dir.join("dataset.jsonl"));
    let dataset = Dataset::load(&dataset_path, Some(&loaded.model_digest()))?;
    let mut base = loaded.experiment.training.clone();
    if let Some(seed) = ov.seed {
        base.seed = seed;
    }
    if let Some(epochs) = ov.epochs {
        base.epochs = epochs;
    }
    eprintln!("sweep widths {widths:?} x {trials} trials on {} samples", dataset.len());
    let sweep = width_sweep(&dataset, &base, widths, trials)?;
    let curves = out_dir.join("curves");
    ensure_dir(&curves)?;
    for (width, trial, history) in &sweep.histories {
        history_csv(&curves.join(format!("sweep_w{width}_t{trial}.csv")), history)?;
    }
    write_csv(
        &out_dir.join("sweep_rows.csv"),
        "width,trial,seed,final_train_loss,final_test_loss,weight_bound",
        sweep.rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{}",
                r.width,
                r.trial,
                r.seed,
                fmt_f64(r.final_train_loss),
                fmt_f64(r.final_test_loss),
                fmt_f64(r.weight_bound)
            )
        }),
    )?;
    write_csv(
        &out_dir.join("summary.csv"),
        "width,mean_train_loss,std_train_loss,mean_test_loss,std_test_loss",
        sweep.summary.iter().map(|s| {
            format!(
                "{},{},{},{},{}",
                s.width,
                fmt_f64(s.mean_train_loss),
                fmt_f64(s.std_train_loss),
                fmt_f64(s.mean_test_loss),
                fmt_f64(s.std_test_loss)
            )
        }),
    )?;
    for s in &sweep.summary {
        println!(
            "W = {:>4}: test loss {:.6e} +/- {:.6e}",
            s.width, s.mean_test_loss, s.std_test_loss
        );
    }
    Ok(())
}

/// Preflight diagnostics: cost monotonicity, the selector/gradient
/// identity, the CFL bound, and (optionally) a checkpoint's norm-product
/// diagnostic. Any failed check is a numerical error (exit code 3).
pub fn cmd_check(config_path: &Path, checkpoint_path: Option<&Path>) -> Result<()> {
    let loaded = LoadedExperiment::load(config_path)?;
    let model = loaded.build_model()?;
    let grid = loaded.grid(model.as_ref())?;
    let d = model.num_states();
    let mut failures = 0;

    // Lasry-Lions monotonicity of F and of g_kappa at random kappa.
    let mut rng = seeded_stream(loaded.experiment.evaluation.seed, 0);
    let pairs: Vec<(SimplexDist, SimplexDist)> = (0..1000)
        .map(|_| (sample_simplex(&mut rng, d), sample_simplex(&mut rng, d)))
        .collect();
    let f_report = check_lasry_lions(|x, eta| model.mean_field_cost(x, eta), &pairs);
    print_check(
        "mean-field cost monotone (1000 pairs)",
        f_report.is_monotone(),
        format!("min sum {:.3e}", f_report.min_sum()),
        &mut failures,
    );
    let mut g_ok = true;
    let mut g_min = f64::INFINITY;
    for _ in 0..10 {
        let kappa = crate::pipeline::sample_kappa(&mut rng, model.param_box());
        let g_report = check_lasry_lions(|x, eta| model.terminal_cost(&kappa, x, eta), &pairs);
        g_ok &= g_report.is_monotone();
        g_min = g_min.min(g_report.min_sum());
    }
    print_check(
        "terminal cost monotone (10 kappa x 1000 pairs)",
        g_ok,
        format!("min sum {g_min:.3e}"),
        &mut failures,
    );

    // Selector vs Hamiltonian gradient, away from kinks. Points where
    // two finite-difference scales disagree straddle a kink and are
    // skipped.
    let h = 1e-5;
    let mut max_dev: f64 = 0.0;
    let mut checked = 0;
    for _ in 0..200 {
        let eta = sample_simplex(&mut rng, d);
        let p: Vec<f64> = (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect();
        for x in 0..d {
            let dev_h = selector_gradient_consistency(model.as_ref(), x, eta.as_slice(), &p, h);
            let dev_h2 =
                selector_gradient_consistency(model.as_ref(), x, eta.as_slice(), &p, h / 2.0);
            if (dev_h - dev_h2).abs() > 1e-7 {
                continue; // kink within the stencil
            }
            max_dev = max_dev.max(dev_h);
            checked += 1;
        }
    }
    print_check(
        &format!("selector matches Hamiltonian gradient ({checked} points)"),
        max_dev <= 1e-6,
        format!("max deviation {max_dev:.3e}"),
        &mut failures,
    );

    // Forward-Euler step-size bound for the configured grid.
    let cfl = cfl_check(model.as_ref(), &grid);
    print_check(
        &format!("CFL bound dt * max_rate <= 1 (M = {})", grid.steps()),
        cfl.is_ok(),
        format!("dt * max_rate = {:.4}", grid.dt() * model.max_outflow_rate()),
        &mut failures,
    );

    if let Some(path) = checkpoint_path {
        let ckpt = Checkpoint::load(path)?;
        println!(
            "[info] checkpoint {}: weight bound p = {:.6e}, epoch {}",
            path.display(),
            ckpt.params.weight_bound(),
            ckpt.epoch
        );
    }

    if failures > 0 {
        return Err(Error::numerical(format!("{failures} diagnostic(s) failed")));
    }
    Ok(())
}

fn print_check(name: &str, ok: bool, detail: String, failures: &mut usize) {
    if ok {
        println!("[pass] {name}: {detail}");
    } else {
        println!("[FAIL] {name}: {detail}");
        *failures += 1;
    }
}
