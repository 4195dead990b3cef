//! Two-time correlations and spectral densities of linearized, time-periodic
//! open systems, computed from data on a single period.

pub mod dpo;
pub mod error;
pub mod correlations;
pub mod exec;
pub mod floquet;
pub mod interp;
pub mod linalg;
pub mod ode;
pub mod oracle;
pub mod quadrature;
pub mod sampled;
pub mod spectra;

pub use error::{FloquetError, Result};
pub use exec::Execution;
pub use floquet::{FloquetDecomposition, PeriodicLinearSystem};
pub use linalg::{CMatrix, C64};
pub use ode::IntegrationTolerances;
