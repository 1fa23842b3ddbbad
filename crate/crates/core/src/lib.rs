//! Compound Poisson and signed compound Poisson approximations of `n`-fold
//! convolutions of symmetric lattice distributions on `Z^d`.
//!
//! * [`measure`]: sparse signed measures with tracked truncation error.
//! * [`approx`]: measure exponentials and the approximants built from them.
//! * [`bounds`]: the `δ` functional, line decompositions and bound evaluators.
//! * [`experiments`]: example laws, sweeps, rate fits and randomized lemma scans.

pub mod approx;
pub mod bounds;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod measure;

pub use error::{Error, Result};
pub use measure::{
    convolution_power, convolve, linear_combine, symmetry_check, truncate, tv_distance, tv_norm,
    LatticePoint, SignedLatticeMeasure, SymmetricDistribution,
};
