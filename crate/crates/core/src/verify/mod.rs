//! Numerical and statistical verification of the density and the sampler.

pub mod grid;
pub mod pde;
pub mod report;
pub mod integral;
pub mod oracle;
pub mod semigroup;
pub mod sampling;
pub mod suite;
