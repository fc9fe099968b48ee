//! Spectral Galerkin simulation of the stochastic phase-field
//! α-Navier-Stokes vesicle system on the square `(0, π)²`, with the tools
//! to audit its energy balance and the estimates its analysis rests on.
//!
//! Layering, bottom up:
//!
//! - [`basis`]: eigenpairs, collocation grid, exact transforms
//! - [`field`]: field types, products, norms
//! - [`energy`], [`fluid`]: the two halves of the right-hand side
//! - [`noise`]: trace-class increments and trace diagnostics
//! - [`dynamics`]: drift assembly and time stepping
//! - [`ledger`]: per-step Itô balance and ensemble statistics
//! - [`veriflab`]: randomized identity and inequality sweeps

pub mod basis;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod field;
pub mod fluid;
pub mod ledger;
pub mod noise;
pub mod veriflab;

pub use basis::{Domain, DomainSpec, Grid};
pub use dynamics::{Model, Scheme, StepperConfig, SystemState};
pub use energy::EnergyParams;
pub use error::{Error, Result};
pub use field::{ScalarField, VelocityField};
pub use fluid::AlphaParams;
pub use ledger::BalanceRecord;
pub use noise::{NoisePath, NoiseSpec};
