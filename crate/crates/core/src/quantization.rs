//! Weyl-Heisenberg shifts, dilations and Weyl quantization of separable and
//! quadratic symbols acting on sampled states.
//!
//! Off-grid translations are realized spectrally (a phase ramp on the
//! discrete Fourier transform); this is the single interpolation convention
//! of the crate. Dilations evaluate the band-limited interpolant.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::phasespace::{Grid, PhasePoint, PlanckPair, SampledState};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Periodic translation `f(x - x0)` through the discrete Fourier transform.
pub fn translate(x0: f64, f: &SampledState) -> SampledState {
    if x0 == 0.0 {
        return f.clone();
    }
    let grid = f.grid();
    let steps = x0 / grid.dx();
    if (steps - steps.round()).abs() < 1e-12 * (1.0 + steps.abs()) {
        let m = grid.len() as i64;
        let shift = (steps.round() as i64).rem_euclid(m) as usize;
        let mut v = f.values().to_vec();
        v.rotate_right(shift);
        return SampledState::new(grid.clone(), v).expect("same grid");
    }
    let mut v = f.values().to_vec();
    grid.forward(&mut v);
    for (k, c) in v.iter_mut().enumerate() {
        *c *= Complex64::from_polar(1.0, -grid.omega(k) * x0);
    }
    grid.inverse(&mut v);
    SampledState::new(grid.clone(), v).expect("same grid")
}

/// Multiplies pointwise by `exp(i p x / hbar)`.
pub fn modulate(hbar: f64, p: f64, f: &SampledState) -> SampledState {
    if p == 0.0 {
        return f.clone();
    }
    let grid = f.grid().clone();
    let values = f
        .values()
        .iter()
        .zip(grid.xs())
        .map(|(v, x)| v * Complex64::from_polar(1.0, p * x / hbar))
        .collect();
    SampledState::new(grid, values).expect("same grid")
}

/// `T^hbar(z0) f(x) = exp(i (p0 x - x0 p0 / 2) / hbar) f(x - x0)`.
pub fn heisenberg_shift(hp: PlanckPair, z0: PhasePoint, f: &SampledState) -> SampledState {
    let hbar = hp.hbar();
    let shifted = translate(z0.x, f);
    let mut out = modulate(hbar, z0.xi, &shifted);
    if z0.x != 0.0 && z0.xi != 0.0 {
        let phase = Complex64::from_polar(1.0, -z0.x * z0.xi / (2.0 * hbar));
        out.values_mut().iter_mut().for_each(|v| *v *= phase);
    }
    out
}

/// The standard shift `T(z) = T^{1/(2 pi)}(z)`.
pub fn standard_shift(z: PhasePoint, f: &SampledState) -> SampledState {
    heisenberg_shift(PlanckPair::standard(), z, f)
}

/// `exp(-pi i xi x) M_xi T_x f` written with the time-frequency conventions
/// `T_x f(t) = f(t - x)`, `M_xi f(t) = exp(2 pi i xi t) f(t)`.
pub fn time_frequency_shift(z: PhasePoint, f: &SampledState) -> SampledState {
    let shifted = translate(z.x, f);
    let grid = f.grid().clone();
    let phase = Complex64::from_polar(1.0, -PI * z.xi * z.x);
    let values = shifted
        .values()
        .iter()
        .zip(grid.xs())
        .map(|(v, t)| phase * Complex64::from_polar(1.0, 2.0 * PI * z.xi * t) * v)
        .collect();
    SampledState::new(grid, values).expect("same grid")
}

/// Evaluates the trigonometric interpolant of `f` at arbitrary points.
///
/// The interpolant is periodic with period `L`.
pub fn band_limited_eval(f: &SampledState, ys: &[f64]) -> Vec<Complex64> {
    let grid = f.grid();
    let m = grid.len();
    let mut coeffs = f.values().to_vec();
    grid.forward(&mut coeffs);
    let half = (m / 2) as i64;
    let l = grid.length();
    let inv_m = 1.0 / m as f64;
    // reorder to signed frequencies -M/2 .. M/2-1
    let ordered: Vec<Complex64> = (-half..half)
        .map(|s| coeffs[s.rem_euclid(m as i64) as usize])
        .collect();
    ys.iter()
        .map(|&y| {
            let theta = 2.0 * PI * (y + 0.5 * l) / l;
            let step = Complex64::from_polar(1.0, theta);
            // restart the recurrence every 64 terms to bound rounding drift
            let mut acc = Complex64::new(0.0, 0.0);
            let mut phase = Complex64::new(0.0, 0.0);
            for (i, c) in ordered.iter().enumerate() {
                if i % 64 == 0 {
                    phase = Complex64::from_polar(1.0, theta * (i as i64 - half) as f64);
                } else {
                    phase *= step;
                }
                acc += c * phase;
            }
            acc * inv_m
        })
        .collect()
}

/// `D_lambda f(x) = lambda^{1/2} f(lambda x)` re-sampled by band-limited
/// interpolation. Emits a warning when the result is visibly aliased or
/// truncated; see [`dilation_leakage`].
pub fn dilate(lambda: f64, f: &SampledState) -> Result<SampledState> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda", format!("{lambda} must be positive")));
    }
    if lambda == 1.0 {
        return Ok(f.clone());
    }
    let leak = dilation_leakage(lambda, f);
    if leak > 1e-10 {
        log::warn!("dilation by {lambda} loses a fraction {leak:.2e} of the state's mass");
    }
    let grid = f.grid();
    // the state is read as a function on one period, extended by zero
    let half = 0.5 * grid.length();
    let ys: Vec<f64> = grid.xs().map(|x| lambda * x).collect();
    let s = lambda.sqrt();
    let values = band_limited_eval(f, &ys)
        .into_iter()
        .zip(&ys)
        .map(|(v, y)| if y.abs() < half { v * s } else { Complex64::new(0.0, 0.0) })
        .collect();
    SampledState::new(grid.clone(), values)
}

/// Exact dilation of an analytically known function.
pub fn dilate_fn(lambda: f64, grid: &Grid, f: impl Fn(f64) -> Complex64) -> SampledState {
    let s = lambda.sqrt();
    SampledState::from_fn(grid, |x| s * f(lambda * x))
}

/// Fraction of `||f||^2` that `D_lambda` cannot represent on the grid:
/// spectral mass above `nyquist / lambda` when compressing, spatial mass
/// outside `|x| < lambda L / 2` when stretching.
pub fn dilation_leakage(lambda: f64, f: &SampledState) -> f64 {
    let grid = f.grid();
    let total = f.norm_sqr();
    if total == 0.0 || lambda == 1.0 {
        return 0.0;
    }
    if lambda > 1.0 {
        let mut v = f.values().to_vec();
        grid.forward(&mut v);
        let cut = grid.nyquist() / lambda;
        let tot: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        let out: f64 = v
            .iter()
            .enumerate()
            .filter(|(k, _)| grid.omega(*k).abs() > cut)
            .map(|(_, c)| c.norm_sqr())
            .sum();
        out / tot
    } else {
        let half = 0.5 * lambda * grid.length();
        let out: f64 = f
            .values()
            .iter()
            .zip(grid.xs())
            .filter(|(_, x)| x.abs() >= half)
            .map(|(v, _)| v.norm_sqr())
            .sum::<f64>()
            * grid.dx();
        out / total
    }
}

/// Covariance residual `||T(z) D f - D T(D^{-1} z) f|| / ||f||` for the
/// dilation `D = D_lambda`, whose symplectic matrix is `diag(1/lambda, lambda)`.
pub fn covariance_check(
    hp: PlanckPair,
    lambda: f64,
    z: PhasePoint,
    f: &SampledState,
) -> Result<f64> {
    let lhs = heisenberg_shift(hp, z, &dilate(lambda, f)?);
    let pulled = PhasePoint::new(lambda * z.x, z.xi / lambda);
    let rhs = dilate(lambda, &heisenberg_shift(hp, pulled, f))?;
    Ok(lhs.sub(&rhs).norm() / f.norm())
}

/// `H(z) = 1/2 z.Qz + b.z + c` with `z = (x, xi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticSymbol {
    q: Matrix2<f64>,
    b: Vector2<f64>,
    c: f64,
}

impl QuadraticSymbol {
    pub fn new(q: Matrix2<f64>, b: Vector2<f64>, c: f64) -> Result<Self> {
        let asym = (q - q.transpose()).abs().max();
        if asym > 1e-12 * (1.0 + q.abs().max()) {
            return Err(invalid("Q", "matrix must be symmetric"));
        }
        Ok(Self { q, b, c })
    }

    /// Purely quadratic symbol `1/2 z.Qz`.
    pub fn homogeneous(q: Matrix2<f64>) -> Result<Self> {
        Self::new(q, Vector2::zeros(), 0.0)
    }

    pub fn zero() -> Self {
        Self {
            q: Matrix2::zeros(),
            b: Vector2::zeros(),
            c: 0.0,
        }
    }

    pub fn q(&self) -> &Matrix2<f64> {
        &self.q
    }

    pub fn b(&self) -> &Vector2<f64> {
        &self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn eval(&self, z: PhasePoint) -> f64 {
        let v = Vector2::new(z.x, z.xi);
        0.5 * v.dot(&(self.q * v)) + self.b.dot(&v) + self.c
    }
}

/// `H(x, xi) = kinetic(xi) + potential(x)`.
#[derive(Clone)]
pub struct SeparableSymbol {
    kinetic: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    potential: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for SeparableSymbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SeparableSymbol")
    }
}

impl SeparableSymbol {
    pub fn new(
        kinetic: impl Fn(f64) -> f64 + Send + Sync + 'static,
        potential: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            kinetic: Arc::new(kinetic),
            potential: Arc::new(potential),
        }
    }

    pub fn kinetic(&self, xi: f64) -> f64 {
        (self.kinetic)(xi)
    }

    pub fn potential(&self, x: f64) -> f64 {
        (self.potential)(x)
    }

    pub fn eval(&self, z: PhasePoint) -> f64 {
        self.kinetic(z.xi) + self.potential(z.x)
    }

    /// Checks that both parts are finite on the grid and on its dual grid at
    /// the given `hbar`.
    pub fn check_finite(&self, hp: PlanckPair, grid: &Grid) -> Result<()> {
        if grid.xs().any(|x| !self.potential(x).is_finite()) {
            return Err(invalid("potential", "non-finite on the grid"));
        }
        if grid.omegas().any(|w| !self.kinetic(hp.hbar() * w).is_finite()) {
            return Err(invalid("kinetic", "non-finite on the dual grid"));
        }
        Ok(())
    }
}

/// `Op^w_hbar[kinetic(xi) + potential(x)] f`, the kinetic part as the Fourier
/// multiplier `kinetic(hbar omega)`.
pub fn weyl_apply_separable(hp: PlanckPair, sym: &SeparableSymbol, f: &SampledState) -> SampledState {
    let grid = f.grid();
    let mut v = f.values().to_vec();
    grid.forward(&mut v);
    for (k, c) in v.iter_mut().enumerate() {
        *c *= sym.kinetic(hp.hbar() * grid.omega(k));
    }
    grid.inverse(&mut v);
    for ((o, fv), x) in v.iter_mut().zip(f.values()).zip(grid.xs()) {
        *o += sym.potential(x) * fv;
    }
    SampledState::new(grid.clone(), v).expect("same grid")
}

/// Spectral derivative `d/dx f`.
pub fn derivative(f: &SampledState) -> SampledState {
    let grid = f.grid();
    let mut v = f.values().to_vec();
    grid.forward(&mut v);
    for (k, c) in v.iter_mut().enumerate() {
        *c *= I * grid.omega(k);
    }
    grid.inverse(&mut v);
    SampledState::new(grid.clone(), v).expect("same grid")
}

/// `Op^w_hbar` of a quadratic symbol. The cross term `q x xi` becomes the
/// symmetrized `-i hbar q (x d/dx + 1/2)`.
pub fn weyl_apply_quadratic_hbar(
    hp: PlanckPair,
    sym: &QuadraticSymbol,
    f: &SampledState,
) -> SampledState {
    let hbar = hp.hbar();
    let grid = f.grid();
    let q = sym.q();
    let (qxx, qxp, qpp) = (q[(0, 0)], q[(0, 1)], q[(1, 1)]);
    let (bx, bp) = (sym.b()[0], sym.b()[1]);

    // momentum-side terms as a Fourier multiplier
    let mut v = f.values().to_vec();
    grid.forward(&mut v);
    for (k, c) in v.iter_mut().enumerate() {
        let p = hbar * grid.omega(k);
        *c *= 0.5 * qpp * p * p + bp * p;
    }
    grid.inverse(&mut v);

    let df = if qxp != 0.0 {
        Some(derivative(f))
    } else {
        None
    };
    for (j, (o, x)) in v.iter_mut().zip(grid.xs()).enumerate() {
        let fv = f.values()[j];
        *o += (0.5 * qxx * x * x + bx * x + sym.c()) * fv;
        if let Some(df) = &df {
            *o += -I * hbar * qxp * (x * df.values()[j] + 0.5 * fv);
        }
    }
    SampledState::new(grid.clone(), v).expect("same grid")
}

/// `Op^w_1` of a quadratic symbol (the `hbar = 1` quantization).
pub fn weyl_apply_quadratic(sym: &QuadraticSymbol, f: &SampledState) -> SampledState {
    weyl_apply_quadratic_hbar(unit_hbar(), sym, f)
}

fn unit_hbar() -> PlanckPair {
    PlanckPair::new(1.0).expect("1 is admissible")
}
