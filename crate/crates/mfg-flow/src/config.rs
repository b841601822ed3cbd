//! Experiment configuration files.
//!
//! One TOML document pins everything a run needs: the model config it
//! references, the time grid, sampling, solver, training, and evaluation
//! settings, and the output directory. The referenced model config is
//! resolved relative to the experiment file and must exist at load time.
//!
//! ```toml
//! schema_version = 1
//! model_config = "models/quad_d3.toml"
//!
//! [grid]
//! m = 100            # steps; t defaults to the model's horizon
//!
//! [sampling]
//! n = 4000
//! seed = 7
//! mode = "pointwise" # or "augmented"
//!
//! [solver]
//! tol = 1e-9
//! max_iter = 500
//! damping = 0.0      # constant, or a per-iteration list
//!
//! [training]
//! epochs = 2000
//! batch_size = 64
//! width = 64
//! depth = 4
//! lr0 = 8e-4
//! optimizer = "adamw"
//! loss = "smooth-l1"
//! seed = 1234
//!
//! [evaluation]
//! pairs = 10
//! seed = 99
//!
//! [output]
//! dir = "runs/quad-d3"
//! ```

use crate::error::{Error, Result};
use crate::model::MfgModel;
use crate::models::ModelConfig;
use crate::pipeline::{DatasetMode, TrainConfig};
use crate::solver::PicardConfig;
use crate::types::TimeGrid;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const EXPERIMENT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Steps M.
    pub m: usize,
    /// Horizon override; defaults to the model's horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub n: usize,
    pub seed: u64,
    pub mode: DatasetMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub pairs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Path to the model config, relative to this file.
    pub model_config: PathBuf,
    pub grid: GridConfig,
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub solver: PicardConfig,
    pub training: TrainConfig,
    pub evaluation: EvalConfig,
    pub output: OutputConfig,
}

/// An experiment config together with its resolved model config.
#[derive(Debug, Clone)]
pub struct LoadedExperiment {
    pub experiment: ExperimentConfig,
    pub model_config: ModelConfig,
    /// Directory the experiment file lives in; relative paths resolve
    /// against it.
    pub base_dir: PathBuf,
}

impl LoadedExperiment {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let experiment: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        if experiment.schema_version != EXPERIMENT_SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported experiment schema version {}",
                experiment.schema_version
            )));
        }
        let base_dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        let model_path = base_dir.join(&experiment.model_config);
        if !model_path.exists() {
            return Err(Error::config(format!(
                "referenced model config {} does not exist",
                model_path.display()
            )));
        }
        let model_config = ModelConfig::load(&model_path)?;
        let loaded = LoadedExperiment { experiment, model_config, base_dir };
        loaded.validate()?;
        Ok(loaded)
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.grid.m == 0 {
            return Err(Error::config("grid.m must be >= 1".to_string()));
        }
        if let Some(t) = e.grid.t {
            if !(t > 0.0) {
                return Err(Error::config("grid.t must be positive".to_string()));
            }
        }
        if e.sampling.n < 2 {
            return Err(Error::config("sampling.n must be >= 2".to_string()));
        }
        if e.evaluation.pairs == 0 {
            return Err(Error::config("evaluation.pairs must be >= 1".to_string()));
        }
        e.solver.validate()?;
        e.training.validate()?;
        // Mini-batch cannot exceed the post-split training set.
        let train_size = e.sampling.n
            - ((e.sampling.n as f64 * e.training.test_fraction).round() as usize)
                .clamp(1, e.sampling.n - 1);
        if e.training.batch_size > train_size {
            return Err(Error::config(format!(
                "batch size {} exceeds training-set size {train_size}",
                e.training.batch_size
            )));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<Box<dyn MfgModel>> {
        self.model_config.build()
    }

    pub fn model_digest(&self) -> String {
        self.model_config.digest()
    }

    /// Effective grid: configured T override or the model's horizon.
    pub fn grid(&self, model: &dyn MfgModel) -> Result<TimeGrid> {
        let t = self.experiment.grid.t.unwrap_or_else(|| model.horizon());
        TimeGrid::new(t, self.experiment.grid.m)
    }

    /// Output directory. Unlike `model_config` (which resolves against
    /// the experiment file), output paths are taken as given, i.e.
    /// relative to the working directory.
    pub fn output_dir(&self) -> PathBuf {
        self.experiment.output.dir.clone()
    }
}
