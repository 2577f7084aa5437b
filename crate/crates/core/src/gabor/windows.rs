//! Analytically sampled Gaussian windows.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::phasespace::{Grid, PlanckPair, SampledState};

/// The three Gaussians in use.
///
/// * `Psi0`: `2^{1/4} exp(-pi x^2)`, the standard window at `h = 1`;
/// * `Phi0`: `pi^{-1/4} exp(-x^2 / 2)`, the harmonic-oscillator ground state;
/// * `Phi0Hbar`: `(pi hbar)^{-1/4} exp(-x^2 / (2 hbar))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Psi0,
    Phi0,
    Phi0Hbar,
}

impl WindowKind {
    /// Variance parameter `w` in `exp(-x^2 / (2 w))`.
    pub fn width(&self, hp: PlanckPair) -> f64 {
        match self {
            WindowKind::Psi0 => 1.0 / (2.0 * PI),
            WindowKind::Phi0 => 1.0,
            WindowKind::Phi0Hbar => hp.hbar(),
        }
    }

    pub fn eval(&self, hp: PlanckPair, x: f64) -> f64 {
        gaussian_profile(self.width(hp), x)
    }
}

/// `(pi w)^{-1/4} exp(-x^2 / (2 w))`, the unit-norm Gaussian of variance `w`.
pub fn gaussian_profile(w: f64, x: f64) -> f64 {
    (PI * w).powf(-0.25) * (-x * x / (2.0 * w)).exp()
}

/// Samples one of the Gaussian windows on `grid`.
///
/// Fails with a sizing error when the window is not negligible at the grid
/// boundary or is under-resolved (its discrete norm differs from 1).
pub fn gaussian_window(kind: WindowKind, hp: PlanckPair, grid: &Grid) -> Result<SampledState> {
    let w = kind.width(hp);
    let edge = gaussian_profile(w, 0.5 * grid.length());
    if edge >= 1e-15 {
        return Err(Error::Sizing(format!(
            "window {kind:?} has boundary value {edge:.2e}; widen the grid"
        )));
    }
    let state = SampledState::from_fn(grid, |x| Complex64::new(gaussian_profile(w, x), 0.0));
    let norm = state.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Sizing(format!(
            "window {kind:?} is under-resolved: discrete norm {norm}"
        )));
    }
    Ok(state)
}
