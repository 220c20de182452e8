//! Simulation and analysis of COGARCH(p,q) processes driven by semi-Lévy
//! compound Poisson noise.
//!
//! * [`semi_levy`] builds and simulates the periodic compound Poisson driver.
//! * [`matrix`] holds the companion-matrix eigenstructure and norms.
//! * [`cogarch`] evolves state, volatility and price exactly at jump times.
//! * [`conditions`] checks periodic stationarity and non-negativity.
//! * [`coherence`] detects periodically correlated structure in a series.
//! * [`io`] reads experiment configs and series, writes CSV reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cogarch;
pub mod coherence;
pub mod conditions;
pub mod dist;
pub mod error;
pub mod exec;
pub mod io;
pub mod matrix;
pub mod quadrature;
pub mod semi_levy;

pub use cogarch::{CogarchParams, CogarchPath, RecurrencePair};
pub use coherence::{Classification, CoherenceConfig, CoherenceReport};
pub use conditions::ConditionReport;
pub use dist::{JumpDist, JumpLaw};
pub use error::{Error, Result};
pub use exec::Execution;
pub use matrix::{CompanionMatrix, EigenStructure, NormKind};
pub use semi_levy::{JumpPath, PhaseLocation, SemiLevyConfig};
