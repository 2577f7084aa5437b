//! Grid solver for `i u_t = Op^w_1[H_t] u` with quadratic `H_t`, used as an
//! independent reference for the Gaussian-parameter formulas.
//!
//! One step is the symmetric splitting
//! `V(dt/2) K(dt/2) X(dt) K(dt/2) V(dt/2)` where `V` carries the `x^2`, `x`
//! and constant terms, `K` the `xi^2` and `xi` terms, and `X` the cross term
//! `q x xi`. The cross flow `diag(a, 1/a)`, `a = exp(q dt)`, is realized
//! exactly through the shear factorization
//! `diag(a, 1/a) = U(a - 1) L(1) U(1/a - 1) L(-a)` with the free evolution
//! `U(b) = exp(-i b omega^2 / 2)` and the chirp `L(c) = exp(i c x^2 / 2)`.

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::phasespace::{Grid, SampledState};
use crate::quantization::QuadraticSymbol;

fn multiply_fourier(grid: &Grid, v: &mut [Complex64], m: impl Fn(f64) -> Complex64) {
    grid.forward(v);
    for (k, c) in v.iter_mut().enumerate() {
        *c *= m(grid.omega(k));
    }
    grid.inverse(v);
}

fn multiply_pointwise(grid: &Grid, v: &mut [Complex64], m: impl Fn(f64) -> Complex64) {
    for (c, x) in v.iter_mut().zip(grid.xs()) {
        *c *= m(x);
    }
}

fn free(grid: &Grid, v: &mut [Complex64], b: f64) {
    if b != 0.0 {
        multiply_fourier(grid, v, |w| Complex64::from_polar(1.0, -0.5 * b * w * w));
    }
}

fn chirp(grid: &Grid, v: &mut [Complex64], c: f64) {
    if c != 0.0 {
        multiply_pointwise(grid, v, |x| Complex64::from_polar(1.0, 0.5 * c * x * x));
    }
}

/// Applies the exact evolution of the cross term `q x xi` for time `dt`.
pub fn cross_flow(grid: &Grid, v: &mut [Complex64], q: f64, dt: f64) {
    if q == 0.0 {
        return;
    }
    let a = (q * dt).exp();
    chirp(grid, v, -a);
    free(grid, v, 1.0 / a - 1.0);
    chirp(grid, v, 1.0);
    free(grid, v, a - 1.0);
}

fn potential_half(grid: &Grid, v: &mut [Complex64], sym: &QuadraticSymbol, tau: f64) {
    let q = sym.q();
    let (qxx, bx, c) = (q[(0, 0)], sym.b()[0], sym.c());
    if qxx != 0.0 || bx != 0.0 || c != 0.0 {
        multiply_pointwise(grid, v, |x| {
            Complex64::from_polar(1.0, -tau * (0.5 * qxx * x * x + bx * x + c))
        });
    }
}

fn kinetic_half(grid: &Grid, v: &mut [Complex64], sym: &QuadraticSymbol, tau: f64) {
    let (qpp, bp) = (sym.q()[(1, 1)], sym.b()[1]);
    if qpp != 0.0 || bp != 0.0 {
        multiply_fourier(grid, v, |w| Complex64::from_polar(1.0, -tau * (0.5 * qpp * w * w + bp * w)));
    }
}

/// Propagates `f0` from `t = 0` to `t_final` under the path of quadratic
/// symbols, evaluating the path at step midpoints.
pub fn metaplectic_oracle(
    q_path: &dyn Fn(f64) -> QuadraticSymbol,
    f0: &SampledState,
    t_final: f64,
    dt: f64,
) -> Result<SampledState> {
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(invalid("dt", "time step and horizon must be positive"));
    }
    let grid = f0.grid().clone();
    let mut v = f0.values().to_vec();
    let n = (t_final / dt).ceil() as usize;
    if n == 0 {
        return Ok(f0.clone());
    }
    let h = t_final / n as f64;
    let norm0 = f0.norm();
    for k in 0..n {
        let sym = q_path((k as f64 + 0.5) * h);
        potential_half(&grid, &mut v, &sym, 0.5 * h);
        kinetic_half(&grid, &mut v, &sym, 0.5 * h);
        cross_flow(&grid, &mut v, sym.q()[(0, 1)], h);
        kinetic_half(&grid, &mut v, &sym, 0.5 * h);
        potential_half(&grid, &mut v, &sym, 0.5 * h);
        if !v.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(invalid("dt", format!("oracle became non-finite at step {k}; reduce dt")));
        }
    }
    let out = SampledState::new(grid, v)?;
    if (out.norm() - norm0).abs() > 1e-8 * norm0.max(1e-300) {
        return Err(invalid("dt", "oracle lost unitarity; reduce dt or widen the grid"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2, Vector2};
    use std::f64::consts::PI;

    fn phi0(grid: &Grid) -> SampledState {
        SampledState::from_fn(grid, |x| Complex64::new(PI.powf(-0.25) * (-0.5 * x * x).exp(), 0.0))
    }

    #[test]
    fn zero_path_is_identity() {
        let grid = Grid::new(20.0, 512).unwrap();
        let f = phi0(&grid);
        let zero = |_t: f64| QuadraticSymbol::zero();
        assert_eq!(metaplectic_oracle(&zero, &f, 1.0, 0.1).unwrap(), f);
    }

    #[test]
    fn harmonic_quarter_period_phase() {
        let grid = Grid::new(20.0, 1024).unwrap();
        let f = phi0(&grid);
        let ho = |_t: f64| QuadraticSymbol::homogeneous(Matrix2::identity()).unwrap();
        let u = metaplectic_oracle(&ho, &f, 0.5 * PI, 2e-4).unwrap();
        let expected = f.scaled(Complex64::from_polar(1.0, -0.25 * PI));
        assert!(u.relative_distance(&expected) < 1e-6);
    }

    #[test]
    fn cross_term_is_a_dilation() {
        let grid = Grid::new(30.0, 2048).unwrap();
        let f = SampledState::from_fn(&grid, |x| Complex64::new((-(x - 0.5) * (x - 0.5)).exp(), 0.3 * x * (-x * x).exp()));
        let q = 0.4;
        let t = 0.7;
        let mut v = f.values().to_vec();
        cross_flow(&grid, &mut v, q, t);
        let lam = (-q * t).exp();
        let fx = |x: f64| Complex64::new((-(x - 0.5) * (x - 0.5)).exp(), 0.3 * x * (-x * x).exp());
        let expected = crate::quantization::dilate_fn(lam, &grid, fx);
        let got = SampledState::new(grid, v).unwrap();
        assert!(got.relative_distance(&expected) < 1e-10);
    }

    #[test]
    fn linear_and_constant_terms() {
        let grid = Grid::new(40.0, 1024).unwrap();
        let f = phi0(&grid);
        // H = c: pure phase
        let c = |_t: f64| QuadraticSymbol::new(Matrix2::zeros(), Vector2::zeros(), 0.7).unwrap();
        let u = metaplectic_oracle(&c, &f, 1.0, 0.1).unwrap();
        assert!(u.relative_distance(&f.scaled(Complex64::from_polar(1.0, -0.7))).abs() < 1e-12);
        // H = xi: translation by t
        let p = |_t: f64| QuadraticSymbol::new(Matrix2::zeros(), Vector2::new(0.0, 1.0), 0.0).unwrap();
        let u = metaplectic_oracle(&p, &f, 1.5, 0.1).unwrap();
        let shifted = SampledState::from_fn(&grid, |x| {
            Complex64::new(PI.powf(-0.25) * (-0.5 * (x - 1.5) * (x - 1.5)).exp(), 0.0)
        });
        assert!(u.relative_distance(&shifted) < 1e-10);
    }
}
