//! Model configuration files.
//!
//! A model config is a small TOML document selecting one of the benchmark
//! games and its constants. The schema is versioned and round-trips
//! bit-exactly: parse -> serialize -> parse is the identity on every
//! field.
//!
//! ```toml
//! schema_version = 1
//! kind = "quadratic"
//! d = 3
//! b = 4.0
//! action_lower = 1.0
//! action_upper = 3.0
//! horizon = 1.0
//! ```
//!
//! ```toml
//! schema_version = 1
//! kind = "cybersecurity"
//! k_d = 0.3
//! k_i = 0.5
//! rho = 0.8
//! kappa_max = 10.0
//! horizon = 10.0
//!
//! [rates]
//! hacker_defended = 0.3
//! hacker_undefended = 0.6
//! infect_defended = 0.4
//! infect_undefended = 0.8
//! recover_defended = 0.5
//! recover_undefended = 0.4
//! ```

use crate::error::{Error, Result};
use crate::model::MfgModel;
use crate::models::cyber::{CyberModel, CyberModelConfig};
use crate::models::quadratic::{QuadraticModel, QuadraticModelConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelKindConfig {
    Quadratic(QuadraticModelConfig),
    Cybersecurity(CyberModelConfig),
}

/// A parsed model configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub schema_version: u32,
    #[serde(flatten)]
    pub kind: ModelKindConfig,
}

impl ModelConfig {
    pub fn quadratic(cfg: QuadraticModelConfig) -> Self {
        ModelConfig { schema_version: MODEL_SCHEMA_VERSION, kind: ModelKindConfig::Quadratic(cfg) }
    }

    pub fn cybersecurity(cfg: CyberModelConfig) -> Self {
        ModelConfig {
            schema_version: MODEL_SCHEMA_VERSION,
            kind: ModelKindConfig::Cybersecurity(cfg),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ModelConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("model config: {e}")))?;
        if cfg.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported model schema version {} (expected {MODEL_SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            ModelKindConfig::Quadratic(c) => c.validate(),
            ModelKindConfig::Cybersecurity(c) => c.validate(),
        }
    }

    /// Instantiate the configured game.
    pub fn build(&self) -> Result<Box<dyn MfgModel>> {
        Ok(match &self.kind {
            ModelKindConfig::Quadratic(c) => Box::new(QuadraticModel::new(c.clone())?),
            ModelKindConfig::Cybersecurity(c) => Box::new(CyberModel::new(c.clone())?),
        })
    }

    /// Content digest binding datasets and checkpoints to the model that
    /// produced them. Computed over the canonical JSON encoding of the
    /// parsed config, so formatting and key order in the TOML file do not
    /// matter.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("model config encodes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        format!("sha256:{:x}", hasher.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_round_trip_is_identity() {
        let cfg = ModelConfig::quadratic(QuadraticModelConfig::new(3));
        let text = cfg.to_toml();
        let parsed = ModelConfig::from_toml(&text).unwrap();
        assert_eq!(parsed, cfg);
        // Second round trip produces identical bytes.
        assert_eq!(parsed.to_toml(), text);
    }

    #[test]
    fn cyber_round_trip_is_identity() {
        let cfg = ModelConfig::cybersecurity(CyberModelConfig::default());
        let text = cfg.to_toml();
        let parsed = ModelConfig::from_toml(&text).unwrap();
        assert_eq!(parsed, cfg);
        assert_eq!(parsed.to_toml(), text);
    }

    #[test]
    fn digest_tracks_content_not_formatting() {
        let a = ModelConfig::from_toml("schema_version = 1\nkind = \"quadratic\"\nd = 3\n").unwrap();
        let b = ModelConfig::from_toml(
            "kind = \"quadratic\"\nd = 3\nb = 4.0\nschema_version = 1\n",
        )
        .unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = ModelConfig::from_toml("schema_version = 1\nkind = \"quadratic\"\nd = 4\n").unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn rejects_unknown_schema_and_bad_values() {
        assert!(ModelConfig::from_toml("schema_version = 9\nkind = \"quadratic\"\nd = 3\n").is_err());
        assert!(
            ModelConfig::from_toml("schema_version = 1\nkind = \"quadratic\"\nd = 3\nb = -1.0\n")
                .is_err()
        );
        assert!(ModelConfig::from_toml("schema_version = 1\nkind = \"nope\"\n").is_err());
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = ModelConfig::from_toml("schema_version = 1\nkind = \"quadratic\"\nd = 5\n").unwrap();
        match &cfg.kind {
            ModelKindConfig::Quadratic(q) => {
                assert_eq!(q.b, 4.0);
                assert_eq!((q.action_lower, q.action_upper), (1.0, 3.0));
                assert_eq!(q.horizon, 1.0);
            }
            _ => panic!("wrong kind"),
        }
    }
}
