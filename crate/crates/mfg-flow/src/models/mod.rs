//! Concrete benchmark games.

pub mod config;
pub mod cyber;
pub mod quadratic;

pub use config::{ModelConfig, ModelKindConfig, MODEL_SCHEMA_VERSION};
pub use cyber::{CyberModel, CyberModelConfig, CyberRateParams, CYBER_STATES, DI, DS, UI, US};
pub use quadratic::{QuadraticModel, QuadraticModelConfig, RATE_CENTER};
