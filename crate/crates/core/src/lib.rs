//! Specification tests for dynamic discrete choice models based on
//! continued outcomes and randomized PIT residuals.

pub mod boot;
pub mod error;
pub mod estimate;
pub mod model;
pub mod numeric;
pub mod stats;
pub mod transform;

pub use boot::{
    bootstrap_test, BootstrapConfig, RejectionTable, Scenario, StudyConfig, TestReport,
};
pub use error::{Error, Result};
pub use estimate::{fit_mle, FitOptions, FitResult};
pub use model::{CondLaw, LinkKind, ModelSpec, Series, Theta};
pub use stats::{StatKind, StatSettings, StatValue};
pub use transform::{NoiseCdf, NoiseStream, UniformResiduals};
