//! Semi-classical time-frequency analysis on a periodic one-dimensional grid.
//!
//! The crate covers Weyl-Heisenberg shifts and Weyl quantization, Gabor
//! frames parametrized by the Planck constant, modulation-space norms,
//! Hamiltonian flows with their linearization, Gaussian-beam parametrices
//! for Schrodinger propagators, and the Gabor-matrix analysis of those
//! propagators.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod fio;
pub mod fit;
pub mod gabor;
pub mod modulation;
pub mod phasespace;
pub mod propagators;
pub mod quantization;

pub use error::{Error, Result};
pub use phasespace::{
    symplectic_form, Grid, Lattice, LatticeIndex, PhasePoint, PlanckPair, PolynomialWeight,
    SampledState, ScaledWeight, Weight,
};
