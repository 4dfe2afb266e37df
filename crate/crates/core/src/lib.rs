//! Proper orthogonal decomposition reduced-order models for incompressible
//! Navier-Stokes flow, stabilized by a decoupled projection-based
//! variational multiscale post-processing step.
//!
//! The pipeline runs mesh → full-order Taylor-Hood solve → POD basis →
//! Galerkin reduced evolution (step 1) → VMS post-processing (step 2), with
//! diagnostics for norms, stability audits and convergence studies.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`.

pub mod config;
pub mod diagnostics;
pub mod dns;
pub mod error;
pub mod fem;
mod io;
pub mod linalg;
pub mod pipeline;
pub mod pod;
pub mod rom;
pub mod scalar;
pub mod time;
pub mod vms;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use time::TimeScheme;

/// `f64` instantiations of the generic types.
pub type Mesh = fem::Mesh<f64>;
pub type Space = fem::TaylorHoodSpace<f64>;
pub type Operators = fem::FemOperators<f64>;
pub type Problem = dns::NseProblem<f64>;
pub type DnsRun = dns::DnsRun<f64>;
pub type SnapshotSet = dns::SnapshotSet<f64>;
pub type PodBasis = pod::PodBasis<f64>;
pub type ReducedSystem = rom::ReducedSystem<f64>;
pub type RomTrajectory = rom::RomTrajectory<f64>;
pub type RomInitial = rom::RomInitial<f64>;
pub type FluctuationMatrix = vms::FluctuationMatrix<f64>;
pub type DMat = linalg::dense::DMat<f64>;
