//! Two-species Vlasov-Maxwell-Boltzmann and incompressible
//! Navier-Stokes-Fourier-Maxwell solvers with hydrodynamic-limit diagnostics.

pub mod error;
pub mod quadrature;
pub mod velocity;
pub mod collision;
pub mod transport;
pub mod spectral;
pub mod seed;
pub mod kinetic;
pub mod fluid;
pub mod diagnostics;
pub mod harness;

pub use error::{Result, VmbError};
