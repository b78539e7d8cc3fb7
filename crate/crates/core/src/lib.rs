//! Both sides of the semiclassical trace formula on exactly solvable systems.
//!
//! The quantum side is the regularized spectral density
//! `G_E(h) = sum_j psi(lambda_j) f((E - lambda_j)/h)` evaluated on exact
//! spectra. The classical side assembles periodic-orbit contributions from
//! monodromy data ([`density`]) or resonant tori ([`berry_tabor`]).
//! [`harness`] runs both over a sweep of `h` and reports the agreement.

pub mod berry_tabor;
pub mod density;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod orbits;
pub mod quadrature;
pub mod symplectic;

pub use error::{Error, Result};
pub use num_complex::Complex64;
