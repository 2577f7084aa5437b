//! Hamiltonian flows, their linearization and the symmetrized action.
//!
//! A trajectory integrates, with one classical RK4 stepper,
//!
//! * `z' = J grad H(t, z)`,
//! * `S' = J H''(t, z) S` with `S(0) = I`,
//! * `delta' = sigma(z, z') / 2 - H(t, z)` with `delta(0) = 0`,
//!
//! where `J = [[0, 1], [-1, 0]]` and `sigma(z, w) = xi_z x_w - x_z xi_w`.

use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::phasespace::{symplectic_form, PhasePoint, PlanckPair, PolynomialWeight, Weight};
use crate::quantization::{QuadraticSymbol, SeparableSymbol};

/// Relative step of the central differences used for missing derivatives.
pub const FD_STEP: f64 = 1e-4;

/// The symplectic matrix `J`.
pub fn j_matrix() -> Matrix2<f64> {
    Matrix2::new(0.0, 1.0, -1.0, 0.0)
}

/// `||S^T J S - J||` (Frobenius).
pub fn symplectic_defect(s: &Matrix2<f64>) -> f64 {
    let j = j_matrix();
    (s.transpose() * j * s - j).norm()
}

/// A (possibly time-dependent) classical Hamiltonian on `R^2`.
pub trait Hamiltonian: Send + Sync {
    fn eval(&self, t: f64, z: PhasePoint) -> f64;
    /// `(dH/dx, dH/dxi)`.
    fn grad(&self, t: f64, z: PhasePoint) -> Vector2<f64>;
    fn hess(&self, t: f64, z: PhasePoint) -> Matrix2<f64>;
    /// Third derivatives `(H_xxx, H_xxxi, H_xxixi, H_xixixi)` when known.
    fn third(&self, _t: f64, _z: PhasePoint) -> Option<[f64; 4]> {
        None
    }
    /// Known bounds `(order, C)` on `sup |d^alpha H|`, `|alpha| = order`.
    fn derivative_bounds(&self) -> Vec<(usize, f64)> {
        Vec::new()
    }
    /// The `f(xi) + V(x)` split, when the Hamiltonian has one.
    fn separable(&self) -> Option<SeparableSymbol> {
        None
    }
    fn name(&self) -> String;
}

/// The built-in autonomous catalog.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Catalog {
    /// `H = 0`.
    Zero,
    /// `H = xi^2 / 2`.
    Free,
    /// `H = (x^2 + xi^2) / 2`.
    Harmonic,
    /// `H = xi^2 / 2 + cos x`.
    Pendulum,
    /// `H = (x^2 + xi^2) / 2 + eps sin x`.
    PerturbedHarmonic { eps: f64 },
}

impl Catalog {
    pub fn from_name(name: &str, eps: Option<f64>) -> Result<Self> {
        match name {
            "zero" => Ok(Catalog::Zero),
            "free" => Ok(Catalog::Free),
            "harmonic" => Ok(Catalog::Harmonic),
            "pendulum" => Ok(Catalog::Pendulum),
            "perturbed_harmonic" => match eps {
                Some(eps) if eps.is_finite() => Ok(Catalog::PerturbedHarmonic { eps }),
                _ => Err(invalid("epsilon", "perturbed_harmonic needs a finite epsilon")),
            },
            other => Err(invalid("hamiltonian", format!("unknown catalog entry `{other}`"))),
        }
    }

    /// True when `H` is a polynomial of degree at most two.
    pub fn is_quadratic(&self) -> bool {
        matches!(self, Catalog::Zero | Catalog::Free | Catalog::Harmonic)
    }

    fn potential_derivs(&self, x: f64) -> [f64; 4] {
        match *self {
            Catalog::Zero | Catalog::Free => [0.0; 4],
            Catalog::Harmonic => [0.5 * x * x, x, 1.0, 0.0],
            Catalog::Pendulum => [x.cos(), -x.sin(), -x.cos(), x.sin()],
            Catalog::PerturbedHarmonic { eps } => [
                0.5 * x * x + eps * x.sin(),
                x + eps * x.cos(),
                1.0 - eps * x.sin(),
                -eps * x.cos(),
            ],
        }
    }

    fn kinetic_coefficient(&self) -> f64 {
        match self {
            Catalog::Zero => 0.0,
            _ => 1.0,
        }
    }
}

impl Hamiltonian for Catalog {
    fn eval(&self, _t: f64, z: PhasePoint) -> f64 {
        0.5 * self.kinetic_coefficient() * z.xi * z.xi + self.potential_derivs(z.x)[0]
    }

    fn grad(&self, _t: f64, z: PhasePoint) -> Vector2<f64> {
        Vector2::new(self.potential_derivs(z.x)[1], self.kinetic_coefficient() * z.xi)
    }

    fn hess(&self, _t: f64, z: PhasePoint) -> Matrix2<f64> {
        Matrix2::new(self.potential_derivs(z.x)[2], 0.0, 0.0, self.kinetic_coefficient())
    }

    fn third(&self, _t: f64, z: PhasePoint) -> Option<[f64; 4]> {
        Some([self.potential_derivs(z.x)[3], 0.0, 0.0, 0.0])
    }

    fn derivative_bounds(&self) -> Vec<(usize, f64)> {
        match *self {
            Catalog::Zero => vec![(2, 0.0), (3, 0.0)],
            Catalog::Free | Catalog::Harmonic => vec![(2, 1.0), (3, 0.0)],
            Catalog::Pendulum => vec![(2, 1.0), (3, 1.0)],
            Catalog::PerturbedHarmonic { eps } => vec![(2, 1.0 + eps.abs()), (3, eps.abs())],
        }
    }

    fn separable(&self) -> Option<SeparableSymbol> {
        let c = *self;
        let k = self.kinetic_coefficient();
        Some(SeparableSymbol::new(
            move |xi| 0.5 * k * xi * xi,
            move |x| c.potential_derivs(x)[0],
        ))
    }

    fn name(&self) -> String {
        match self {
            Catalog::Zero => "zero".into(),
            Catalog::Free => "free".into(),
            Catalog::Harmonic => "harmonic".into(),
            Catalog::Pendulum => "pendulum".into(),
            Catalog::PerturbedHarmonic { .. } => "perturbed_harmonic".into(),
        }
    }
}

/// A Hamiltonian whose gradient and Hessian were checked against finite
/// differences at construction.
#[derive(Clone)]
pub struct HamiltonianSymbol {
    inner: Arc<dyn Hamiltonian>,
}

impl std::fmt::Debug for HamiltonianSymbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "HamiltonianSymbol({})", self.inner.name())
    }
}

impl HamiltonianSymbol {
    /// Wraps `h` after probing it at seeded random points in `[-3, 3]^2`.
    pub fn new(h: impl Hamiltonian + 'static) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..16 {
            let t = rng.random_range(0.0..1.0);
            let z = PhasePoint::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let e = 1e-5;
            let fd = Vector2::new(
                (h.eval(t, PhasePoint::new(z.x + e, z.xi)) - h.eval(t, PhasePoint::new(z.x - e, z.xi)))
                    / (2.0 * e),
                (h.eval(t, PhasePoint::new(z.x, z.xi + e)) - h.eval(t, PhasePoint::new(z.x, z.xi - e)))
                    / (2.0 * e),
            );
            let g = h.grad(t, z);
            let defect = (fd - g).norm();
            if defect > 1e-5 * (1.0 + g.norm()) {
                return Err(Error::SelfCheck {
                    what: "gradient vs finite differences",
                    value: defect,
                    tolerance: 1e-5,
                });
            }
            let hs = h.hess(t, z);
            let asym = (hs - hs.transpose()).norm();
            if asym > 1e-12 * (1.0 + hs.norm()) {
                return Err(Error::SelfCheck {
                    what: "Hessian symmetry",
                    value: asym,
                    tolerance: 1e-12,
                });
            }
        }
        Ok(Self { inner: Arc::new(h) })
    }

    pub fn catalog(c: Catalog) -> Result<Self> {
        Self::new(c)
    }

    pub fn eval(&self, t: f64, z: PhasePoint) -> f64 {
        self.inner.eval(t, z)
    }

    pub fn grad(&self, t: f64, z: PhasePoint) -> Vector2<f64> {
        self.inner.grad(t, z)
    }

    pub fn hess(&self, t: f64, z: PhasePoint) -> Matrix2<f64> {
        self.inner.hess(t, z)
    }

    /// Third derivatives, from the analytic evaluator or by central
    /// differences of the Hessian with step `FD_STEP * max(1, |z|)`.
    pub fn third(&self, t: f64, z: PhasePoint) -> [f64; 4] {
        if let Some(d) = self.inner.third(t, z) {
            return d;
        }
        let e = FD_STEP * z.norm().max(1.0);
        let dx = (self.hess(t, PhasePoint::new(z.x + e, z.xi))
            - self.hess(t, PhasePoint::new(z.x - e, z.xi)))
            / (2.0 * e);
        let dp = (self.hess(t, PhasePoint::new(z.x, z.xi + e))
            - self.hess(t, PhasePoint::new(z.x, z.xi - e)))
            / (2.0 * e);
        [dx[(0, 0)], 0.5 * (dx[(0, 1)] + dp[(0, 0)]), 0.5 * (dx[(1, 1)] + dp[(0, 1)]), dp[(1, 1)]]
    }

    pub fn derivative_bounds(&self) -> Vec<(usize, f64)> {
        self.inner.derivative_bounds()
    }

    pub fn separable(&self) -> Option<SeparableSymbol> {
        self.inner.separable()
    }

    pub fn name(&self) -> String {
        self.inner.name()
    }
}

/// Integrated state `(z, S, delta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowState {
    pub z: PhasePoint,
    pub s: Matrix2<f64>,
    pub delta: f64,
}

impl FlowState {
    pub fn initial(z0: PhasePoint) -> Self {
        Self {
            z: z0,
            s: Matrix2::identity(),
            delta: 0.0,
        }
    }

    fn is_finite(&self) -> bool {
        self.z.is_finite() && self.s.iter().all(|v| v.is_finite()) && self.delta.is_finite()
    }
}

#[derive(Clone, Copy)]
struct Deriv {
    dz: Vector2<f64>,
    ds: Matrix2<f64>,
    dd: f64,
}

fn rhs(h: &HamiltonianSymbol, t: f64, y: &FlowState) -> Deriv {
    let j = j_matrix();
    let g = h.grad(t, y.z);
    let dz = j * g;
    let ds = j * h.hess(t, y.z) * y.s;
    let zdot = PhasePoint::new(dz[0], dz[1]);
    let dd = 0.5 * symplectic_form(y.z, zdot) - h.eval(t, y.z);
    Deriv { dz, ds, dd }
}

fn advance(y: &FlowState, d: &Deriv, a: f64) -> FlowState {
    FlowState {
        z: PhasePoint::new(y.z.x + a * d.dz[0], y.z.xi + a * d.dz[1]),
        s: y.s + d.ds * a,
        delta: y.delta + a * d.dd,
    }
}

/// One classical RK4 step of size `dt` (negative steps integrate backward).
pub fn rk4_step(h: &HamiltonianSymbol, t: f64, y: &FlowState, dt: f64) -> FlowState {
    let k1 = rhs(h, t, y);
    let k2 = rhs(h, t + 0.5 * dt, &advance(y, &k1, 0.5 * dt));
    let k3 = rhs(h, t + 0.5 * dt, &advance(y, &k2, 0.5 * dt));
    let k4 = rhs(h, t + dt, &advance(y, &k3, dt));
    FlowState {
        z: PhasePoint::new(
            y.z.x + dt / 6.0 * (k1.dz[0] + 2.0 * k2.dz[0] + 2.0 * k3.dz[0] + k4.dz[0]),
            y.z.xi + dt / 6.0 * (k1.dz[1] + 2.0 * k2.dz[1] + 2.0 * k3.dz[1] + k4.dz[1]),
        ),
        s: y.s + (k1.ds + k2.ds * 2.0 + k3.ds * 2.0 + k4.ds) * (dt / 6.0),
        delta: y.delta + dt / 6.0 * (k1.dd + 2.0 * k2.dd + 2.0 * k3.dd + k4.dd),
    }
}

/// Samples of a classical trajectory on a uniform time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    hamiltonian: HamiltonianSymbol,
    t0: f64,
    dt: f64,
    states: Vec<FlowState>,
}

impl Trajectory {
    pub fn hamiltonian(&self) -> &HamiltonianSymbol {
        &self.hamiltonian
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt * (self.states.len() - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.states.len())
            .map(|k| self.t0 + k as f64 * self.dt)
            .collect()
    }

    pub fn states(&self) -> &[FlowState] {
        &self.states
    }

    pub fn initial(&self) -> PhasePoint {
        self.states[0].z
    }

    /// Largest symplecticity defect over the samples.
    pub fn max_symplectic_defect(&self) -> f64 {
        self.states
            .iter()
            .map(|s| symplectic_defect(&s.s))
            .fold(0.0, f64::max)
    }

    /// State at an arbitrary time in range: the preceding sample advanced by
    /// one partial RK4 step, so intermediate values carry the same local
    /// error as the samples.
    pub fn state_at(&self, t: f64) -> Result<FlowState> {
        let (lo, hi) = if self.dt >= 0.0 {
            (self.t0, self.t_end())
        } else {
            (self.t_end(), self.t0)
        };
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if t < lo - slack || t > hi + slack {
            return Err(invalid("t", format!("{t} outside trajectory range [{lo}, {hi}]")));
        }
        if self.dt == 0.0 {
            return Ok(self.states[0]);
        }
        let u = (t - self.t0) / self.dt;
        let k = (u.floor().max(0.0) as usize).min(self.states.len() - 1);
        let tk = self.t0 + k as f64 * self.dt;
        let rem = t - tk;
        if rem.abs() <= 1e-14 * (1.0 + t.abs()) {
            return Ok(self.states[k]);
        }
        Ok(rk4_step(&self.hamiltonian, tk, &self.states[k], rem))
    }
}

/// Integrates from `(t0, z0)` to `t1` with steps no longer than `|dt|`.
pub fn integrate_between(
    h: &HamiltonianSymbol,
    t0: f64,
    z0: PhasePoint,
    t1: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid("dt", format!("{dt} must be positive")));
    }
    if !z0.is_finite() || !t0.is_finite() || !t1.is_finite() {
        return Err(invalid("z0", "initial data must be finite"));
    }
    let span = t1 - t0;
    let n = ((span.abs() / dt).ceil() as usize).max(1);
    let step = span / n as f64;
    let mut states = Vec::with_capacity(n + 1);
    states.push(FlowState::initial(z0));
    for k in 0..n {
        let t = t0 + k as f64 * step;
        let next = rk4_step(h, t, &states[k], step);
        if !next.is_finite() {
            return Err(Error::BlowUp {
                t: t + step,
                last_valid: t,
            });
        }
        states.push(next);
    }
    Ok(Trajectory {
        hamiltonian: h.clone(),
        t0,
        dt: step,
        states,
    })
}

/// Trajectory from `z0` over `[0, T]`.
pub fn integrate_flow(h: &HamiltonianSymbol, z0: PhasePoint, t_final: f64, dt: f64) -> Result<Trajectory> {
    if !(t_final >= 0.0) {
        return Err(invalid("T", format!("{t_final} must be nonnegative")));
    }
    integrate_between(h, 0.0, z0, t_final, dt)
}

/// `chi^{(t,s)}(z)`: the flow from time `s` to time `t`.
pub fn flow_map(h: &HamiltonianSymbol, s: f64, t: f64, z: PhasePoint, dt: f64) -> Result<PhasePoint> {
    if s == t {
        return Ok(z);
    }
    let traj = integrate_between(h, s, z, t, dt)?;
    Ok(traj.states.last().expect("nonempty").z)
}

/// `chi_hbar(z) = hbar^{-1/2} chi(hbar^{1/2} z)`.
pub fn rescaled_flow(chi: &dyn Fn(PhasePoint) -> PhasePoint, hp: PlanckPair, z: PhasePoint) -> PhasePoint {
    let r = hp.hbar().sqrt();
    chi(z.scale(r)).scale(1.0 / r)
}

/// Homogeneous polynomial `sum_i coeffs[i] x^{l-i} xi^i` of degree `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousPolynomial {
    pub degree: usize,
    pub coeffs: Vec<f64>,
}

impl HomogeneousPolynomial {
    pub fn eval(&self, z: PhasePoint) -> f64 {
        let l = self.degree as i32;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * z.x.powi(l - i as i32) * z.xi.powi(i as i32))
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    /// The degree-two polynomial as `1/2 z.Qz`.
    pub fn to_quadratic(&self) -> Option<QuadraticSymbol> {
        if self.degree != 2 {
            return None;
        }
        let q = Matrix2::new(
            2.0 * self.coeffs[0],
            self.coeffs[1],
            self.coeffs[1],
            2.0 * self.coeffs[2],
        );
        QuadraticSymbol::homogeneous(q).ok()
    }
}

/// Degree-`l` Taylor term `sum_{|g| = l} d^g H(t, z_t) z^g / g!` at the
/// trajectory point at time `t`, for `l` in `{2, 3}`.
pub fn taylor_coefficient(traj: &Trajectory, t: f64, l: usize) -> Result<HomogeneousPolynomial> {
    let h = traj.hamiltonian();
    let zt = traj.state_at(t)?.z;
    match l {
        2 => {
            let q = h.hess(t, zt);
            Ok(HomogeneousPolynomial {
                degree: 2,
                coeffs: vec![0.5 * q[(0, 0)], q[(0, 1)], 0.5 * q[(1, 1)]],
            })
        }
        3 => {
            let d = h.third(t, zt);
            Ok(HomogeneousPolynomial {
                degree: 3,
                coeffs: vec![d[0] / 6.0, d[1] / 2.0, d[2] / 2.0, d[3] / 6.0],
            })
        }
        _ => Err(invalid("l", format!("order {l} not in {{2, 3}}"))),
    }
}

/// The quadratic Taylor symbol `1/2 z.H''(t, z_t) z`.
pub fn quadratic_part(traj: &Trajectory, t: f64) -> Result<QuadraticSymbol> {
    let zt = traj.state_at(t)?.z;
    QuadraticSymbol::homogeneous(traj.hamiltonian().hess(t, zt))
}

/// Finite-difference bounds on the derivatives of a phase-space map.
#[derive(Debug, Clone, PartialEq)]
pub struct TamenessReport {
    /// `sup ||D chi||` (spectral norm) over the probes.
    pub first_order: f64,
    /// `sup |d^2 chi_i / dz_a dz_b|` over the probes.
    pub second_order: f64,
    /// `sup ||D chi^T J D chi - J||`.
    pub symplectic_defect: f64,
    pub probes: usize,
}

impl TamenessReport {
    /// True when the map is symplectic to `tolerance` and both bounds are
    /// finite.
    pub fn is_tame(&self, tolerance: f64) -> bool {
        self.first_order.is_finite() && self.second_order.is_finite() && self.symplectic_defect <= tolerance
    }
}

fn jacobian(chi: &dyn Fn(PhasePoint) -> PhasePoint, z: PhasePoint, e: f64) -> Matrix2<f64> {
    let cx = chi(PhasePoint::new(z.x + e, z.xi)) - chi(PhasePoint::new(z.x - e, z.xi));
    let cp = chi(PhasePoint::new(z.x, z.xi + e)) - chi(PhasePoint::new(z.x, z.xi - e));
    Matrix2::new(cx.x, cp.x, cx.xi, cp.xi) / (2.0 * e)
}

/// Probes `chi` on an `n x n` grid over `[-x_ext, x_ext] x [-xi_ext, xi_ext]`.
pub fn tameness_check(
    chi: &dyn Fn(PhasePoint) -> PhasePoint,
    x_ext: f64,
    xi_ext: f64,
    n: usize,
) -> TamenessReport {
    let j = j_matrix();
    let mut rep = TamenessReport {
        first_order: 0.0,
        second_order: 0.0,
        symplectic_defect: 0.0,
        probes: 0,
    };
    let n = n.max(2);
    for a in 0..n {
        for b in 0..n {
            let z = PhasePoint::new(
                -x_ext + 2.0 * x_ext * a as f64 / (n - 1) as f64,
                -xi_ext + 2.0 * xi_ext * b as f64 / (n - 1) as f64,
            );
            let e1 = 1e-5 * z.norm().max(1.0);
            let d = jacobian(chi, z, e1);
            let sv = d.singular_values();
            rep.first_order = rep.first_order.max(sv[0].max(sv[1]));
            rep.symplectic_defect = rep.symplectic_defect.max((d.transpose() * j * d - j).norm());
            let e2 = 1e-3 * z.norm().max(1.0);
            let c = chi(z);
            let dirs = [(1.0, 0.0), (0.0, 1.0)];
            for (da, db) in dirs {
                let zp = PhasePoint::new(z.x + e2 * da, z.xi + e2 * db);
                let zm = PhasePoint::new(z.x - e2 * da, z.xi - e2 * db);
                let second = (chi(zp) + chi(zm) - c - c).scale(1.0 / (e2 * e2));
                rep.second_order = rep.second_order.max(second.x.abs()).max(second.xi.abs());
            }
            // mixed derivative
            let pp = chi(PhasePoint::new(z.x + e2, z.xi + e2));
            let pm = chi(PhasePoint::new(z.x + e2, z.xi - e2));
            let mp = chi(PhasePoint::new(z.x - e2, z.xi + e2));
            let mm = chi(PhasePoint::new(z.x - e2, z.xi - e2));
            let mixed = (pp - pm - mp + mm).scale(1.0 / (4.0 * e2 * e2));
            rep.second_order = rep.second_order.max(mixed.x.abs()).max(mixed.xi.abs());
            rep.probes += 1;
        }
    }
    rep
}

/// Range of `v_s(z_t) / v_s(z_0)` over a probe set.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzReport {
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl LipschitzReport {
    pub fn spread(&self) -> f64 {
        self.max_ratio / self.min_ratio
    }
}

/// Flows every probe to time `t` and records the weight ratios.
pub fn lipschitz_equivalence_check(
    h: &HamiltonianSymbol,
    t: f64,
    s: f64,
    probes: &[PhasePoint],
    dt: f64,
) -> Result<LipschitzReport> {
    let w = PolynomialWeight::new(s);
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    for &z in probes {
        let zt = flow_map(h, 0.0, t, z, dt)?;
        let r = w.eval(zt) / w.eval(z);
        min_ratio = min_ratio.min(r);
        max_ratio = max_ratio.max(r);
    }
    Ok(LipschitzReport { min_ratio, max_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(c: Catalog) -> HamiltonianSymbol {
        HamiltonianSymbol::catalog(c).unwrap()
    }

    #[test]
    fn zero_hamiltonian_is_static() {
        let z0 = PhasePoint::new(0.3, -1.2);
        let tr = integrate_flow(&sym(Catalog::Zero), z0, 1.0, 1e-2).unwrap();
        for s in tr.states() {
            assert_eq!(s.z, z0);
            assert_eq!(s.s, Matrix2::identity());
            assert_eq!(s.delta, 0.0);
        }
    }

    #[test]
    fn free_particle_closed_form() {
        let z0 = PhasePoint::new(0.5, 1.5);
        let tr = integrate_flow(&sym(Catalog::Free), z0, 2.0, 1e-3).unwrap();
        for (t, s) in tr.times().iter().zip(tr.states()) {
            assert!((s.z.x - (0.5 + 1.5 * t)).abs() < 1e-12);
            assert!((s.z.xi - 1.5).abs() < 1e-14);
            assert!((s.s - Matrix2::new(1.0, *t, 0.0, 1.0)).norm() < 1e-12);
            assert!(s.delta.abs() < 1e-10);
        }
    }

    #[test]
    fn harmonic_rotation_and_energy() {
        let z0 = PhasePoint::new(1.0, 0.5);
        let h = sym(Catalog::Harmonic);
        let tr = integrate_flow(&h, z0, 1.0, 1e-3).unwrap();
        for (t, s) in tr.times().iter().zip(tr.states()) {
            let x = z0.x * t.cos() + z0.xi * t.sin();
            let p = -z0.x * t.sin() + z0.xi * t.cos();
            assert!((s.z.x - x).abs() < 1e-10 && (s.z.xi - p).abs() < 1e-10);
            assert!((s.z.norm() - z0.norm()).abs() < 1e-8);
            assert!((h.eval(*t, s.z) - h.eval(0.0, z0)).abs() < 1e-8);
        }
        assert!(tr.max_symplectic_defect() < 1e-8);
    }

    #[test]
    fn intermediate_times_use_partial_steps() {
        let h = sym(Catalog::Harmonic);
        let z0 = PhasePoint::new(1.0, 0.0);
        let tr = integrate_flow(&h, z0, 1.0, 0.1).unwrap();
        let s = tr.state_at(0.537).unwrap();
        assert!((s.z.x - 0.537f64.cos()).abs() < 1e-6);
        assert!(tr.state_at(1.5).is_err());
        assert_eq!(tr.state_at(0.0).unwrap().z, z0);
    }

    #[test]
    fn blow_up_is_reported() {
        struct Cubic;
        impl Hamiltonian for Cubic {
            fn eval(&self, _t: f64, z: PhasePoint) -> f64 {
                0.5 * z.xi * z.xi - z.x.powi(4)
            }
            fn grad(&self, _t: f64, z: PhasePoint) -> Vector2<f64> {
                Vector2::new(-4.0 * z.x.powi(3), z.xi)
            }
            fn hess(&self, _t: f64, z: PhasePoint) -> Matrix2<f64> {
                Matrix2::new(-12.0 * z.x * z.x, 0.0, 0.0, 1.0)
            }
            fn name(&self) -> String {
                "quartic well".into()
            }
        }
        let h = HamiltonianSymbol::new(Cubic).unwrap();
        let r = integrate_flow(&h, PhasePoint::new(3.0, 10.0), 10.0, 0.01);
        assert!(matches!(r, Err(Error::BlowUp { .. })));
    }

    #[test]
    fn inconsistent_gradient_is_rejected() {
        struct Wrong;
        impl Hamiltonian for Wrong {
            fn eval(&self, _t: f64, z: PhasePoint) -> f64 {
                z.x * z.x
            }
            fn grad(&self, _t: f64, z: PhasePoint) -> Vector2<f64> {
                Vector2::new(z.x, 0.0)
            }
            fn hess(&self, _t: f64, _z: PhasePoint) -> Matrix2<f64> {
                Matrix2::new(2.0, 0.0, 0.0, 0.0)
            }
            fn name(&self) -> String {
                "wrong".into()
            }
        }
        assert!(matches!(
            HamiltonianSymbol::new(Wrong),
            Err(Error::SelfCheck { .. })
        ));
    }

    #[test]
    fn flow_group_properties() {
        let h = sym(Catalog::Pendulum);
        let z = PhasePoint::new(0.4, 0.9);
        assert_eq!(flow_map(&h, 0.3, 0.3, z, 1e-3).unwrap(), z);
        let one = flow_map(&h, 0.0, 1.0, z, 1e-3).unwrap();
        let two = flow_map(&h, 0.4, 1.0, flow_map(&h, 0.0, 0.4, z, 1e-3).unwrap(), 1e-3).unwrap();
        assert!((one - two).norm() < 1e-6);
        let back = flow_map(&h, 1.0, 0.0, one, 1e-3).unwrap();
        assert!((back - z).norm() < 1e-6);
    }

    #[test]
    fn rescaled_flow_examples() {
        let hp1 = PlanckPair::new(1.0).unwrap();
        let chi = |z: PhasePoint| PhasePoint::new(z.x + z.xi.sin(), z.xi);
        let z = PhasePoint::new(0.2, 0.7);
        assert_eq!(rescaled_flow(&chi, hp1, z), chi(z));
        let lin = |z: PhasePoint| PhasePoint::new(2.0 * z.x + z.xi, z.x + z.xi);
        for hbar in [0.5, 0.1, 0.01] {
            let hp = PlanckPair::new(hbar).unwrap();
            assert!((rescaled_flow(&lin, hp, z) - lin(z)).norm() < 1e-12);
        }
        let h = sym(Catalog::Harmonic);
        let rot = |z: PhasePoint| flow_map(&h, 0.0, std::f64::consts::FRAC_PI_2, z, 1e-3).unwrap();
        let hp = PlanckPair::new(0.1).unwrap();
        let r = rescaled_flow(&rot, hp, z);
        assert!((r - PhasePoint::new(z.xi, -z.x)).norm() < 1e-9);
    }

    #[test]
    fn taylor_examples() {
        let h = sym(Catalog::Harmonic);
        let tr = integrate_flow(&h, PhasePoint::new(1.0, 0.0), 1.0, 1e-2).unwrap();
        let q = taylor_coefficient(&tr, 0.5, 2).unwrap().to_quadratic().unwrap();
        assert_eq!(*q.q(), Matrix2::identity());
        assert!(taylor_coefficient(&tr, 0.5, 3).unwrap().is_zero());
        assert!(taylor_coefficient(&tr, 0.5, 4).is_err());

        let p = sym(Catalog::Pendulum);
        let tr = integrate_flow(&p, PhasePoint::new(0.0, 0.8), 0.0, 1e-2).unwrap();
        let q = quadratic_part(&tr, 0.0).unwrap();
        assert_eq!(*q.q(), Matrix2::new(-1.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn finite_difference_third_derivatives() {
        struct NoThird;
        impl Hamiltonian for NoThird {
            fn eval(&self, _t: f64, z: PhasePoint) -> f64 {
                0.5 * z.xi * z.xi + z.x.cos()
            }
            fn grad(&self, _t: f64, z: PhasePoint) -> Vector2<f64> {
                Vector2::new(-z.x.sin(), z.xi)
            }
            fn hess(&self, _t: f64, z: PhasePoint) -> Matrix2<f64> {
                Matrix2::new(-z.x.cos(), 0.0, 0.0, 1.0)
            }
            fn name(&self) -> String {
                "pendulum without third derivatives".into()
            }
        }
        let h = HamiltonianSymbol::new(NoThird).unwrap();
        let z = PhasePoint::new(0.7, 0.3);
        let d = h.third(0.0, z);
        assert!((d[0] - 0.7f64.sin()).abs() < 1e-7);
        assert!(d[1].abs() < 1e-9 && d[2].abs() < 1e-9 && d[3].abs() < 1e-9);
    }

    #[test]
    fn tameness_examples() {
        let id = |z: PhasePoint| z;
        let r = tameness_check(&id, 3.0, 3.0, 5);
        assert!((r.first_order - 1.0).abs() < 1e-9);
        assert!(r.second_order < 1e-6);
        assert!(r.symplectic_defect < 1e-9);
        let h = sym(Catalog::Harmonic);
        let rot = |z: PhasePoint| flow_map(&h, 0.0, 0.7, z, 1e-2).unwrap();
        let r = tameness_check(&rot, 3.0, 3.0, 5);
        assert!((r.first_order - 1.0).abs() < 1e-6);
        assert!(r.symplectic_defect <= 1e-6);
        let lin = |z: PhasePoint| PhasePoint::new(z.x + 0.5 * z.xi, z.xi);
        let a = tameness_check(&lin, 3.0, 3.0, 5);
        let hp = PlanckPair::new(0.05).unwrap();
        let scaled = |z: PhasePoint| rescaled_flow(&lin, hp, z);
        let b = tameness_check(&scaled, 3.0, 3.0, 5);
        assert!((a.first_order - b.first_order).abs() < 1e-8);
    }

    #[test]
    fn lipschitz_examples() {
        let probes: Vec<PhasePoint> = (0..21)
            .flat_map(|a| (0..21).map(move |b| PhasePoint::new(a as f64 - 10.0, b as f64 - 10.0)))
            .filter(|z| z.norm() <= 10.0)
            .collect();
        let r = lipschitz_equivalence_check(&sym(Catalog::Zero), 1.0, 2.0, &probes, 0.01).unwrap();
        assert_eq!((r.min_ratio, r.max_ratio), (1.0, 1.0));
        let r = lipschitz_equivalence_check(&sym(Catalog::Harmonic), 1.0, 2.0, &probes, 1e-3).unwrap();
        assert!((r.min_ratio - 1.0).abs() < 1e-8 && (r.max_ratio - 1.0).abs() < 1e-8);
        let r = lipschitz_equivalence_check(&sym(Catalog::Free), 1.0, 2.0, &probes, 1e-2).unwrap();
        assert!(r.min_ratio > 0.0 && r.spread() <= 9.0, "{r:?}");
    }
}
