//! Zeroth-order Gaussian beams.
//!
//! For a trajectory with linearized flow `S_t = [[A, B], [C, D]]` the beam is
//!
//! `exp(i delta / hbar) exp(i (xi_t x - x_t xi_t / 2) / hbar) (pi hbar)^{-1/4}
//!  m_t exp(i Gamma_t (x - x_t)^2 / (2 hbar))`
//!
//! with `Gamma_t = (C + i D) / (A + i B)` and `m_t = (A + i B)^{-1/2}`, the
//! square root continued along the time grid from `m_0 = 1`.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::dynamics::{integrate_flow, HamiltonianSymbol, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::phasespace::{Grid, PhasePoint, PlanckPair, SampledState};

/// Below this modulus `A + i B` counts as vanishing.
const CAUSTIC_FLOOR: f64 = 1e-12;

/// `Gamma = (C + i D) / (A + i B)`.
pub fn gamma_of(s: &Matrix2<f64>, t: f64) -> Result<Complex64> {
    let den = Complex64::new(s[(0, 0)], s[(0, 1)]);
    if den.norm() < CAUSTIC_FLOOR {
        return Err(Error::Caustic { t });
    }
    Ok(Complex64::new(s[(1, 0)], s[(1, 1)]) / den)
}

/// The branch of `(A + i B)^{-1/2}` nearest to `previous`.
pub fn amplitude_near(s: &Matrix2<f64>, previous: Complex64, t: f64) -> Result<Complex64> {
    let den = Complex64::new(s[(0, 0)], s[(0, 1)]);
    if den.norm() < CAUSTIC_FLOOR {
        return Err(Error::Caustic { t });
    }
    let r = den.sqrt().inv();
    let pick = if (r - previous).norm() <= (-r - previous).norm() {
        r
    } else {
        -r
    };
    // the two branches differ by a sign; a step that turns the argument by
    // more than pi/2 cannot be resolved
    let turn = (pick / previous).arg().abs();
    if turn > 0.5 * PI {
        return Err(invalid(
            "dt",
            format!("amplitude argument jumps by {turn:.3} at t = {t}; refine the time step"),
        ));
    }
    Ok(pick)
}

/// `(Gamma_t, m_t)` at every sample of the trajectory.
pub fn propagate_gaussian_params(traj: &Trajectory) -> Result<Vec<(Complex64, Complex64)>> {
    let mut out = Vec::with_capacity(traj.len());
    let mut amp = Complex64::new(1.0, 0.0);
    for (t, st) in traj.times().into_iter().zip(traj.states()) {
        let gamma = gamma_of(&st.s, t)?;
        amp = amplitude_near(&st.s, amp, t)?;
        out.push((gamma, amp));
    }
    Ok(out)
}

/// Parameters of the beam at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParameters {
    pub t: f64,
    pub z: PhasePoint,
    pub gamma: Complex64,
    pub amp: Complex64,
    pub delta: f64,
}

/// A beam launched from `z0` at `t = 0`.
#[derive(Debug, Clone)]
pub struct GaussianBeam {
    hp: PlanckPair,
    z0: PhasePoint,
    trajectory: Trajectory,
    params: Vec<(Complex64, Complex64)>,
}

impl GaussianBeam {
    pub fn new(hp: PlanckPair, h: &HamiltonianSymbol, z0: PhasePoint, t_final: f64, dt: f64) -> Result<Self> {
        let trajectory = integrate_flow(h, z0, t_final, dt)?;
        Self::from_trajectory(hp, trajectory)
    }

    pub fn from_trajectory(hp: PlanckPair, trajectory: Trajectory) -> Result<Self> {
        let params = propagate_gaussian_params(&trajectory)?;
        Ok(Self {
            hp,
            z0: trajectory.initial(),
            trajectory,
            params,
        })
    }

    pub fn hp(&self) -> PlanckPair {
        self.hp
    }

    pub fn z0(&self) -> PhasePoint {
        self.z0
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn sampled_params(&self) -> &[(Complex64, Complex64)] {
        &self.params
    }

    /// Parameters at an arbitrary time; the amplitude branch continues from
    /// the preceding sample.
    pub fn params_at(&self, t: f64) -> Result<BeamParameters> {
        let st = self.trajectory.state_at(t)?;
        let dt = self.trajectory.dt();
        let k = if dt == 0.0 {
            0
        } else {
            (((t - self.trajectory.t0()) / dt).floor().max(0.0) as usize).min(self.params.len() - 1)
        };
        let gamma = gamma_of(&st.s, t)?;
        let amp = amplitude_near(&st.s, self.params[k].1, t)?;
        Ok(BeamParameters {
            t,
            z: st.z,
            gamma,
            amp,
            delta: st.delta,
        })
    }

    /// Samples the beam at time `t` on `grid`.
    pub fn evaluate(&self, t: f64, grid: &Grid) -> Result<SampledState> {
        let p = self.params_at(t)?;
        let out = beam_state(self.hp, &p, grid);
        let edge = out.boundary_magnitude(2);
        if edge > 1e-10 {
            log::warn!(
                "beam from ({}, {}) reaches the grid boundary at t = {t} (|value| {edge:.2e})",
                self.z0.x,
                self.z0.xi
            );
        }
        Ok(out)
    }
}

/// Samples a beam with given parameters.
pub fn beam_state(hp: PlanckPair, p: &BeamParameters, grid: &Grid) -> SampledState {
    let hbar = hp.hbar();
    let (xt, pt) = (p.z.x, p.z.xi);
    let pre = p.amp
        * (PI * hbar).powf(-0.25)
        * Complex64::from_polar(1.0, (p.delta - 0.5 * xt * pt) / hbar);
    let ig = Complex64::new(0.0, 1.0) * p.gamma / (2.0 * hbar);
    SampledState::from_fn(grid, |x| {
        let d = x - xt;
        pre * (ig * d * d).exp() * Complex64::from_polar(1.0, pt * x / hbar)
    })
}

/// Convenience wrapper: the beam of `traj` evaluated at `t`.
pub fn beam_evaluate(beam: &GaussianBeam, t: f64, grid: &Grid) -> Result<SampledState> {
    beam.evaluate(t, grid)
}
