//! Frame superpositions of Gaussian beams and time-residuals of state paths.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::HamiltonianSymbol;
use crate::error::{invalid, Result};
use crate::gabor::dual::dual_system;
use crate::gabor::system::GaborSystem;
use crate::phasespace::{PlanckPair, SampledState};
use crate::propagators::beam::GaussianBeam;
use crate::quantization::{weyl_apply_separable, SeparableSymbol};

/// Coefficients below this fraction of the largest one are skipped.
const COEFFICIENT_FLOOR: f64 = 1e-16;

/// `U(t) f = sum_lambda <f, T(lambda) gamma> phi_lambda(t)` with one beam per
/// lattice point of the frame.
#[derive(Debug, Clone)]
pub struct Parametrix {
    frame: GaborSystem,
    dual: GaborSystem,
    beams: Vec<GaussianBeam>,
    t_final: f64,
}

/// A parametrix evaluation with its diagnostics.
#[derive(Debug, Clone)]
pub struct ParametrixOutput {
    pub state: SampledState,
    /// `1 - ||S_{gamma,g} f - f||^2 / ||f||^2`: the part of `f` the truncated
    /// frame reproduces.
    pub captured_mass: f64,
}

impl Parametrix {
    /// Builds the canonical dual and one beam per lattice point.
    pub fn new(frame: GaborSystem, h: &HamiltonianSymbol, t_final: f64, dt: f64) -> Result<Self> {
        let dual = dual_system(&frame)?;
        Self::with_dual(frame, dual, h, t_final, dt)
    }

    pub fn with_dual(
        frame: GaborSystem,
        dual: GaborSystem,
        h: &HamiltonianSymbol,
        t_final: f64,
        dt: f64,
    ) -> Result<Self> {
        if frame.lattice() != dual.lattice() || frame.grid() != dual.grid() {
            return Err(invalid("dual", "lattice or grid differs from the frame"));
        }
        let hp = frame.hp();
        let beams = frame
            .lattice()
            .points()
            .into_par_iter()
            .map(|z| GaussianBeam::new(hp, h, z, t_final, dt))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            frame,
            dual,
            beams,
            t_final,
        })
    }

    pub fn frame(&self) -> &GaborSystem {
        &self.frame
    }

    pub fn dual(&self) -> &GaborSystem {
        &self.dual
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn hp(&self) -> PlanckPair {
        self.frame.hp()
    }

    pub fn beam(&self, flat: usize) -> &GaussianBeam {
        &self.beams[flat]
    }

    /// `U^{(0)}(t) f`.
    pub fn apply(&self, f: &SampledState, t: f64) -> Result<ParametrixOutput> {
        let coeffs = self.dual.analysis(f);
        self.apply_coefficients(&coeffs, f, t)
    }

    /// Superposes the beams with given coefficients; `f` only feeds the
    /// captured-mass diagnostic.
    pub fn apply_coefficients(&self, coeffs: &[Complex64], f: &SampledState, t: f64) -> Result<ParametrixOutput> {
        let grid = self.frame.grid();
        let max = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let active: Vec<usize> = (0..coeffs.len())
            .filter(|&i| coeffs[i].norm() > COEFFICIENT_FLOOR * max)
            .collect();
        let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
        for chunk in active.chunks(32) {
            let parts = chunk
                .par_iter()
                .map(|&i| self.beams[i].evaluate(t, grid))
                .collect::<Result<Vec<_>>>()?;
            for (&i, part) in chunk.iter().zip(parts) {
                let c = coeffs[i];
                acc.iter_mut().zip(part.values()).for_each(|(a, b)| *a += c * b);
            }
        }
        let state = SampledState::new(grid.clone(), acc)?;
        let captured_mass = if f.norm() > 0.0 {
            let rec = self.frame.synthesis(coeffs);
            1.0 - rec.sub(f).norm_sqr() / f.norm_sqr()
        } else {
            1.0
        };
        if captured_mass < 1.0 - 1e-6 {
            log::warn!("state is not captured by the lattice hull (captured mass {captured_mass:.8})");
        }
        Ok(ParametrixOutput {
            state,
            captured_mass,
        })
    }
}

/// Residual of a state path against `i hbar u_t = H u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub t: f64,
    pub dt_fd: f64,
    /// `||i hbar (u(t + d) - u(t - d)) / (2 d) - H u(t)||`.
    pub residual: f64,
    /// The same with the time derivative Richardson-extrapolated from the
    /// steps `d` and `2 d`.
    pub extrapolated: f64,
    /// Estimated central-difference error contained in `residual`.
    pub fd_error: f64,
}

/// Evaluates the residual of `path` at `t` with central differences.
pub fn residual(
    hp: PlanckPair,
    sym: &SeparableSymbol,
    path: &dyn Fn(f64) -> Result<SampledState>,
    t: f64,
    dt_fd: f64,
) -> Result<ResidualReport> {
    if !(dt_fd > 0.0) {
        return Err(invalid("dt_fd", format!("{dt_fd} must be positive")));
    }
    let hbar = hp.hbar();
    let u = path(t)?;
    let hu = weyl_apply_separable(hp, sym, &u);
    let ih = Complex64::new(0.0, hbar);
    let derivative = |d: f64| -> Result<SampledState> {
        let plus = path(t + d)?;
        let minus = path(t - d)?;
        Ok(plus.sub(&minus).scaled(ih / (2.0 * d)))
    };
    let d1 = derivative(dt_fd)?;
    let d2 = derivative(2.0 * dt_fd)?;
    let r1 = d1.sub(&hu);
    let extrap = d1.scaled(Complex64::new(4.0 / 3.0, 0.0)).sub(&d2.scaled(Complex64::new(1.0 / 3.0, 0.0)));
    let phase_rate = hu.norm() / (hbar * u.norm().max(f64::MIN_POSITIVE));
    if phase_rate * dt_fd > 0.05 {
        log::warn!(
            "dt_fd = {dt_fd} under-resolves the oscillation (rate {phase_rate:.3e}); reduce it"
        );
    }
    Ok(ResidualReport {
        t,
        dt_fd,
        residual: r1.norm(),
        extrapolated: extrap.sub(&hu).norm(),
        fd_error: d2.sub(&d1).norm() / 3.0,
    })
}
