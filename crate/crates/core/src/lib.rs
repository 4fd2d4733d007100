//! Numerical toolkit for oblique-derivative problems on small-Lipschitz graph domains.
//!
//! The crate builds the regularized distance of a graph domain, the regularized
//! mollification and Neumann extension operators built on it, norm and Hardy-type
//! inequality estimators, a finite-difference oblique solver working in flattened
//! coordinates, and certifiers for the cusp and wedge counterexamples.

pub mod counterexamples;
pub mod error;
pub mod experiment;
pub mod extension;
pub mod geometry;
pub mod mollification;
pub mod norms;
pub mod quadrature;
pub mod regdist;
pub mod solver;

pub use error::{Error, Result};
