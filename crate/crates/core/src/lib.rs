//! Energy-preserving integration of canonical Hamiltonian systems with
//! HBVM(k,s) methods.
//!
//! An HBVM(k,s) advances a Hamiltonian system through a degree-`s` polynomial
//! whose coefficients are fixed by a `k`-node quadrature; with Gauss abscissae
//! the method has order `2s`, is symmetric and perfectly A-stable, and
//! conserves polynomial Hamiltonians of degree `nu` whenever `k >= nu s / 2`.
//! The crate provides
//!
//! - the orthonormal shifted-Legendre basis and Gauss rules behind the
//!   tableau ([`legendre`], [`quadrature`]),
//! - tableau assembly and verification of the isospectral property
//!   ([`tableau`]),
//! - the reduced block-size-`s` nonlinear system obtained by splitting the
//!   stages into fundamental and silent ones ([`partition`]),
//! - the blended iteration for solving it, with the optimal blending
//!   parameter and its linear convergence analysis ([`blended`]),
//! - step drivers, energy/order experiment helpers and canonical test
//!   problems ([`integrator`]).

pub mod blended;
pub mod eig;
pub mod error;
pub mod integrator;
pub mod legendre;
pub mod partition;
pub mod quadrature;
pub mod tableau;

pub use blended::{BlendedConfig, IterationMode, LinearAnalysis, SolveStats};
pub use error::{Error, Result};
pub use integrator::{HamiltonianSystem, IntegrationResult};
pub use legendre::OrthonormalBasis;
pub use partition::StagePartition;
pub use quadrature::QuadratureRule;
pub use tableau::{HbvmTableau, SpectrumReport};
