//! Grid discretization of Schrödinger operators with polynomially growing,
//! time-dependent electromagnetic potentials, together with numerical probes
//! of their well-posedness and parameter-sensitivity properties.

pub mod error;
pub mod expr;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod potentials;
pub mod multiparticle;
pub mod propagator;
pub mod sensitivity;
pub mod symbolcalc;

pub use error::{Error, Result};
pub use grid::{l2_inner_product, make_grid, spectral_derivative, SpatialGrid, WaveFunction};
