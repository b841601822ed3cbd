//! Dataset file format.
//!
//! A dataset is a JSONL file: the first line is a self-describing header
//! (schema version, model-config digest, dimensions, grid, seed, mode),
//! every following line one sample record. Readers reject digest or
//! dimension mismatches. Numbers round-trip exactly: the JSON encoder
//! emits the shortest representation that parses back to the same f64.

use crate::error::{Error, Result};
use crate::types::SimplexDist;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

pub const DATASET_SCHEMA_VERSION: u32 = 1;

/// What one record's input/label pair encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetMode {
    /// Input (t, eta, kappa), label u(t) at one sampled grid time.
    Pointwise,
    /// Input (eta, kappa), label the whole value trajectory on the grid.
    Augmented,
}

impl DatasetMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetMode::Pointwise => "pointwise",
            DatasetMode::Augmented => "augmented",
        }
    }
}

impl std::str::FromStr for DatasetMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pointwise" => Ok(DatasetMode::Pointwise),
            "augmented" => Ok(DatasetMode::Augmented),
            other => Err(Error::config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema_version: u32,
    pub model_digest: String,
    pub d: usize,
    pub k: usize,
    /// Grid steps M.
    pub m: usize,
    /// Horizon T.
    pub t: f64,
    pub n: usize,
    pub seed: u64,
    pub mode: DatasetMode,
}

impl DatasetHeader {
    /// Network input dimension implied by the mode.
    pub fn input_dim(&self) -> usize {
        match self.mode {
            DatasetMode::Pointwise => 1 + self.d + self.k,
            DatasetMode::Augmented => self.d + self.k,
        }
    }

    /// Network output dimension implied by the mode.
    pub fn label_dim(&self) -> usize {
        match self.mode {
            DatasetMode::Pointwise => self.d,
            DatasetMode::Augmented => (self.m + 1) * self.d,
        }
    }
}

/// One training example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub mode: DatasetMode,
    pub eta: Vec<f64>,
    pub kappa: Vec<f64>,
    /// Sampled grid index (pointwise only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub j: Option<usize>,
    /// Sampled time t = j * T / M (pointwise only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t: Option<f64>,
    /// Label: value row at t, or the flattened trajectory.
    pub y: Vec<f64>,
}

impl SampleRecord {
    fn validate(&self, header: &DatasetHeader) -> Result<()> {
        if self.mode != header.mode {
            return Err(Error::format("record mode differs from header mode".to_string()));
        }
        if self.eta.len() != header.d || self.kappa.len() != header.k {
            return Err(Error::format("record dimensions differ from header".to_string()));
        }
        if !self.kappa.iter().all(|v| v.is_finite()) {
            return Err(Error::format("non-finite kappa".to_string()));
        }
        SimplexDist::new(self.eta.clone())
            .map_err(|e| Error::format(format!("record eta: {e}")))?;
        if self.y.len() != header.label_dim() {
            return Err(Error::format(format!(
                "label length {} != expected {}",
                self.y.len(),
                header.label_dim()
            )));
        }
        if !self.y.iter().all(|v| v.is_finite()) {
            return Err(Error::format("non-finite label".to_string()));
        }
        match header.mode {
            DatasetMode::Pointwise => {
                let j = self.j.ok_or_else(|| Error::format("pointwise record without j"))?;
                let t = self.t.ok_or_else(|| Error::format("pointwise record without t"))?;
                if j > header.m {
                    return Err(Error::format(format!("grid index {j} > M = {}", header.m)));
                }
                let expected = header.t * j as f64 / header.m as f64;
                if (t - expected).abs() > 1e-12 {
                    return Err(Error::format(format!("t = {t} != j T / M = {expected}")));
                }
            }
            DatasetMode::Augmented => {
                if self.j.is_some() || self.t.is_some() {
                    return Err(Error::format("augmented record carries j/t".to_string()));
                }
            }
        }
        Ok(())
    }

    /// Network input vector for this record.
    pub fn input(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(
            self.eta.len() + self.kappa.len() + usize::from(self.t.is_some()),
        );
        if let Some(t) = self.t {
            x.push(t);
        }
        x.extend_from_slice(&self.eta);
        x.extend_from_slice(&self.kappa);
        x
    }
}

/// An in-memory dataset: header plus records in sample order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<SampleRecord>,
}

impl Dataset {
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let header = serde_json::to_string(&self.header)
            .map_err(|e| Error::format(format!("dataset header: {e}")))?;
        writeln!(w, "{header}")?;
        for record in &self.records {
            let line = serde_json::to_string(record)
                .map_err(|e| Error::format(format!("dataset record: {e}")))?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Read and validate. When `expected_digest` is given, a mismatch
    /// against the header digest is rejected.
    pub fn read_from(r: impl BufRead, expected_digest: Option<&str>) -> Result<Self> {
        let mut lines = r.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::format("empty dataset file".to_string()))??;
        let header: DatasetHeader = serde_json::from_str(&header_line)
            .map_err(|e| Error::format(format!("dataset header: {e}")))?;
        if header.schema_version != DATASET_SCHEMA_VERSION {
            return Err(Error::format(format!(
                "unsupported dataset schema {}",
                header.schema_version
            )));
        }
        if let Some(expected) = expected_digest {
            if header.model_digest != expected {
                return Err(Error::format(format!(
                    "model digest mismatch: dataset was generated with {}, expected {expected}",
                    header.model_digest
                )));
            }
        }
        let mut records = Vec::with_capacity(header.n);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: SampleRecord = serde_json::from_str(&line)
                .map_err(|e| Error::format(format!("dataset record: {e}")))?;
            record.validate(&header)?;
            records.push(record);
        }
        if records.len() != header.n {
            return Err(Error::format(format!(
                "dataset has {} records, header says {}",
                records.len(),
                header.n
            )));
        }
        Ok(Dataset { header, records })
    }

    pub fn load(path: &Path, expected_digest: Option<&str>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file), expected_digest)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Materialized (inputs, labels) matrices in record order.
    pub fn to_xy(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let xs = self.records.iter().map(SampleRecord::input).collect();
        let ys = self.records.iter().map(|r| r.y.clone()).collect();
        (xs, ys)
    }
}
