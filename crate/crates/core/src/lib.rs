//! Two-species BGK relaxation with velocity-dependent collision frequencies.
//!
//! Each species lives on its own tensor-product velocity grid. The implicit
//! collision update solves three small convex problems per spatial cell whose
//! stationarity conditions are exactly the discrete conservation laws, so mass,
//! total momentum and total energy are conserved to solver tolerance while
//! positivity and (for the first-order scheme) entropy dissipation are kept.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`] velocity grids and trapezoidal quadrature
//! * [`moments`] species/mixture moments and Maxwellians
//! * [`frequency`] collision-frequency models
//! * [`dual`] the exponential-family dual problems and their Newton solver
//! * [`relaxation`] the implicit collision update
//! * [`transport`] 1D finite-volume advection
//! * [`stepper`] first-order splitting and ARS(2,2,2) IMEX time stepping
//! * [`diagnostics`] conserved totals, entropy, error norms, exact Riemann reference
//! * [`scenarios`] named experiment presets
//! * [`run`] driving a scenario to completion and writing CSV output

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments
)]

pub mod constants;
pub mod diagnostics;
pub mod dual;
pub mod error;
pub mod field;
pub mod frequency;
pub mod grid;
pub mod moments;
pub mod relaxation;
pub mod run;
pub mod scenarios;
pub mod stepper;
pub mod transport;

pub use error::{Error, Result};
pub use field::Field;
pub use grid::{SpeciesParams, VelocityGrid};
pub use moments::{MixtureState, SpeciesMoments};
