//! Reference solver for `i hbar u_t = (f(hbar D) + V(x)) u`, `D = -i d/dx`.
//!
//! The basic step is the Strang splitting `V(tau/2) K(tau) V(tau/2)`; three
//! of them with the weights of the fourth-order triple jump make one step.
//! Step sizes are validated by comparing a run with `dt` against a run with
//! `dt/2`.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::phasespace::{Grid, PlanckPair, SampledState};
use crate::quantization::SeparableSymbol;

/// Self-convergence target of [`exact_split_step`].
pub const SELF_CONVERGENCE: f64 = 1e-8;

const MAX_HALVINGS: usize = 8;

fn triple_jump() -> [f64; 3] {
    let c = 2f64.powf(1.0 / 3.0);
    let w1 = 1.0 / (2.0 - c);
    let w0 = -c / (2.0 - c);
    [w1, w0, w1]
}

/// Precomputed phase factors for a fixed step size.
#[derive(Debug, Clone)]
pub struct SplitStepPropagator {
    grid: Grid,
    dt: f64,
    /// Per sub-step: half potential phase and full kinetic phase.
    stages: Vec<(Vec<Complex64>, Vec<Complex64>)>,
}

impl SplitStepPropagator {
    pub fn new(hp: PlanckPair, sym: &SeparableSymbol, grid: &Grid, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid("dt", format!("{dt} must be positive")));
        }
        sym.check_finite(hp, grid)?;
        let hbar = hp.hbar();
        let stages = triple_jump()
            .iter()
            .map(|w| {
                let tau = w * dt;
                let pot = grid
                    .xs()
                    .map(|x| Complex64::from_polar(1.0, -0.5 * tau * sym.potential(x) / hbar))
                    .collect();
                let kin = grid
                    .omegas()
                    .map(|om| Complex64::from_polar(1.0, -tau * sym.kinetic(hbar * om) / hbar))
                    .collect();
                (pot, kin)
            })
            .collect();
        Ok(Self {
            grid: grid.clone(),
            dt,
            stages,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances by `steps` steps in place.
    pub fn advance(&self, v: &mut [Complex64], steps: usize) {
        for _ in 0..steps {
            for (pot, kin) in &self.stages {
                v.iter_mut().zip(pot).for_each(|(a, b)| *a *= b);
                self.grid.forward(v);
                v.iter_mut().zip(kin).for_each(|(a, b)| *a *= b);
                self.grid.inverse(v);
                v.iter_mut().zip(pot).for_each(|(a, b)| *a *= b);
            }
        }
    }

    /// The solution at each requested time (ascending, multiples of `dt` up
    /// to rounding).
    pub fn evolve_to(&self, f0: &SampledState, times: &[f64]) -> Result<Vec<SampledState>> {
        let mut v = f0.values().to_vec();
        let mut done = 0usize;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            let target = (t / self.dt).round();
            if (target * self.dt - t).abs() > 1e-9 * self.dt.max(t.abs()) || target < done as f64 {
                return Err(invalid("times", format!("{t} is not an ascending multiple of dt")));
            }
            let target = target as usize;
            self.advance(&mut v, target - done);
            done = target;
            out.push(SampledState::new(self.grid.clone(), v.clone())?);
        }
        Ok(out)
    }
}

/// Result of a self-converged split-step run.
#[derive(Debug, Clone)]
pub struct SplitStepResult {
    pub state: SampledState,
    /// The step size of the returned solution.
    pub dt: f64,
    /// `||u_dt - u_{dt/2}|| / ||u_0||` at the accepted step.
    pub self_convergence: f64,
}

/// Smallest step count `n` with `t / n <= dt`.
fn steps_for(t: f64, dt: f64) -> usize {
    ((t / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Solves to time `t_final`, halving the step until a run with step `dt`
/// agrees with one with `dt / 2` to [`SELF_CONVERGENCE`].
pub fn exact_split_step(
    hp: PlanckPair,
    sym: &SeparableSymbol,
    f0: &SampledState,
    t_final: f64,
    dt: f64,
) -> Result<SplitStepResult> {
    let (prop, conv) = validated_propagator(hp, sym, f0, t_final, dt)?;
    let n = (t_final / prop.dt()).round() as usize;
    let mut v = f0.values().to_vec();
    prop.advance(&mut v, n);
    Ok(SplitStepResult {
        state: SampledState::new(f0.grid().clone(), v)?,
        dt: prop.dt(),
        self_convergence: conv,
    })
}

/// A propagator whose step passed the self-convergence test on `f0` over
/// `[0, t_final]`. The returned step divides `t_final` exactly.
pub fn validated_propagator(
    hp: PlanckPair,
    sym: &SeparableSymbol,
    f0: &SampledState,
    t_final: f64,
    dt: f64,
) -> Result<(SplitStepPropagator, f64)> {
    if !(t_final > 0.0) {
        return Err(invalid("T", format!("{t_final} must be positive")));
    }
    let norm0 = f0.norm();
    let mut n = steps_for(t_final, dt);
    let mut last = f64::INFINITY;
    let coarse_prop = SplitStepPropagator::new(hp, sym, f0.grid(), t_final / n as f64)?;
    let mut coarse = f0.values().to_vec();
    coarse_prop.advance(&mut coarse, n);
    for _ in 0..MAX_HALVINGS {
        let fine_prop = SplitStepPropagator::new(hp, sym, f0.grid(), t_final / (2 * n) as f64)?;
        let mut fine = f0.values().to_vec();
        fine_prop.advance(&mut fine, 2 * n);
        let diff: f64 = coarse
            .iter()
            .zip(&fine)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
            * f0.grid().dx().sqrt();
        last = if norm0 > 0.0 { diff / norm0 } else { diff };
        if last <= SELF_CONVERGENCE {
            return Ok((fine_prop, last));
        }
        n *= 2;
        coarse = fine;
    }
    Err(Error::NoConvergence {
        what: "split-step self-convergence",
        iterations: MAX_HALVINGS,
        residual: last,
    })
}
