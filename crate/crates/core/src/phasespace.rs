//! Grids, lattices, phase-space points, weights and the symplectic form.
//!
//! Everything here is one-dimensional in configuration space (phase space
//! is `R^2`). The discrete Fourier convention used across the crate is fixed
//! in this module:
//!
//! * grid points `x_j = -L/2 + j dx`, `j = 0..M`, with `dx = L / M`;
//! * angular frequencies `omega_k = 2 pi k / L` for `k < M/2` and
//!   `2 pi (k - M) / L` otherwise;
//! * forward transform `F_k = sum_j f_j exp(-i omega_k (x_j - x_0))`,
//!   inverse `f_j = (1/M) sum_k F_k exp(i omega_k (x_j - x_0))`.
//!
//! Fourier multipliers `m(omega)` and spectral translations are insensitive
//! to the `x_0` offset, so every module uses `Grid::forward` /
//! `Grid::inverse` and never a transform of its own.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};

/// Planck constant `hbar` together with `h = 2 pi hbar`.
///
/// Only `hbar` is stored; `h` is always derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanckPair {
    hbar: f64,
}

impl PlanckPair {
    pub fn new(hbar: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar <= 1.0) || !hbar.is_finite() {
            return Err(invalid("hbar", format!("{hbar} not in (0, 1]")));
        }
        Ok(Self { hbar })
    }

    /// The value `hbar = 1/(2 pi)`, i.e. `h = 1`, at which the semi-classical
    /// objects reduce to the standard time-frequency ones.
    pub fn standard() -> Self {
        Self {
            hbar: 1.0 / (2.0 * PI),
        }
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn h(&self) -> f64 {
        2.0 * PI * self.hbar
    }

    pub fn sqrt_h(&self) -> f64 {
        self.h().sqrt()
    }
}

struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid on `[-L/2, L/2)` with `M` points.
#[derive(Clone)]
pub struct Grid {
    length: f64,
    points: usize,
    plans: Arc<FftPair>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("length", &self.length)
            .field("points", &self.points)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.length == other.length && self.points == other.points
    }
}

impl Grid {
    pub fn new(length: f64, points: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(invalid("L", format!("{length} must be positive")));
        }
        if points < 2 || !points.is_power_of_two() {
            return Err(invalid("M", format!("{points} must be a power of two >= 2")));
        }
        let mut planner = FftPlanner::new();
        let plans = FftPair {
            forward: planner.plan_fft_forward(points),
            inverse: planner.plan_fft_inverse(points),
        };
        Ok(Self {
            length,
            points,
            plans: Arc::new(plans),
        })
    }

    /// Configuration-space dimension. Always 1.
    pub fn dim(&self) -> usize {
        1
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.length / self.points as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.dx()
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(move |j| self.x(j))
    }

    /// Angular frequency of FFT bin `k`.
    pub fn omega(&self, k: usize) -> f64 {
        let m = self.points as isize;
        let kk = k as isize;
        let signed = if kk < m / 2 { kk } else { kk - m };
        2.0 * PI * signed as f64 / self.length
    }

    pub fn omegas(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(move |k| self.omega(k))
    }

    /// Largest representable angular frequency `pi / dx`.
    pub fn nyquist(&self) -> f64 {
        PI / self.dx()
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.plans.forward.process(data);
    }

    /// Inverse transform including the `1/M` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.plans.inverse.process(data);
        let norm = 1.0 / self.points as f64;
        data.iter_mut().for_each(|v| *v *= norm);
    }
}

/// A complex function sampled on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledState {
    grid: Grid,
    values: Vec<Complex64>,
}

impl SampledState {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            grid: grid.clone(),
        }
    }

    /// Samples `f` at the grid points.
    pub fn from_fn(grid: &Grid, f: impl FnMut(f64) -> Complex64) -> Self {
        Self {
            values: grid.xs().map(f).collect(),
            grid: grid.clone(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Discrete `L^2` pairing `dx * sum f_j conj(g_j)`.
    pub fn inner(&self, other: &SampledState) -> Complex64 {
        debug_assert_eq!(self.grid, other.grid);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum::<Complex64>()
            * self.grid.dx()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scaled(&self, a: Complex64) -> SampledState {
        SampledState {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * a).collect(),
        }
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: Complex64, other: &SampledState) {
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
    }

    pub fn sub(&self, other: &SampledState) -> SampledState {
        SampledState {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn add(&self, other: &SampledState) -> SampledState {
        SampledState {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// `||self - other|| / ||other||` (absolute distance when `other` is zero).
    pub fn relative_distance(&self, other: &SampledState) -> f64 {
        let d = self.sub(other).norm();
        let n = other.norm();
        if n > 0.0 {
            d / n
        } else {
            d
        }
    }

    /// Largest modulus among the first and last `edge` samples.
    pub fn boundary_magnitude(&self, edge: usize) -> f64 {
        let m = self.values.len();
        let edge = edge.min(m / 2);
        self.values[..edge]
            .iter()
            .chain(&self.values[m - edge..])
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }
}

/// A point `z = (x, xi)` of phase space.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhasePoint {
    pub x: f64,
    pub xi: f64,
}

impl PhasePoint {
    pub const ORIGIN: PhasePoint = PhasePoint { x: 0.0, xi: 0.0 };

    pub fn new(x: f64, xi: f64) -> Self {
        Self { x, xi }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.xi)
    }

    pub fn scale(&self, a: f64) -> PhasePoint {
        PhasePoint::new(a * self.x, a * self.xi)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.xi.is_finite()
    }
}

impl std::ops::Add for PhasePoint {
    type Output = PhasePoint;
    fn add(self, o: PhasePoint) -> PhasePoint {
        PhasePoint::new(self.x + o.x, self.xi + o.xi)
    }
}

impl std::ops::Sub for PhasePoint {
    type Output = PhasePoint;
    fn sub(self, o: PhasePoint) -> PhasePoint {
        PhasePoint::new(self.x - o.x, self.xi - o.xi)
    }
}

impl std::ops::Neg for PhasePoint {
    type Output = PhasePoint;
    fn neg(self) -> PhasePoint {
        PhasePoint::new(-self.x, -self.xi)
    }
}

/// `sigma(z, w) = (Jz) . w = xi_z x_w - x_z xi_w` with `J = [[0, I], [-I, 0]]`.
pub fn symplectic_form(z: PhasePoint, w: PhasePoint) -> f64 {
    z.xi * w.x - z.x * w.xi
}

/// The same form on flat phase-space vectors `(x_1..x_n, xi_1..xi_n)`.
pub fn symplectic_form_flat(z: &[f64], w: &[f64]) -> Result<f64> {
    if z.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            got: w.len(),
        });
    }
    if !z.len().is_multiple_of(2) {
        return Err(invalid("z", "phase-space vectors have even length"));
    }
    let n = z.len() / 2;
    Ok((0..n).map(|i| z[n + i] * w[i] - z[i] * w[n + i]).sum())
}

/// Truncated separable lattice `scale * (alpha Z x beta Z)` with `|k|, |l| <= K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    alpha: f64,
    beta: f64,
    scale: f64,
    k_max: usize,
}

/// Index pair `(k, l)` of a lattice point `scale * (alpha k, beta l)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeIndex {
    pub k: i64,
    pub l: i64,
}

impl Lattice {
    /// Builds the lattice, rejecting it when its spatial extent exceeds the
    /// grid half-period.
    pub fn new(alpha: f64, beta: f64, scale: f64, k_max: usize, grid: &Grid) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("scale", scale)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("{v} must be positive")));
            }
        }
        let extent = scale * alpha * k_max as f64;
        if extent > 0.5 * grid.length() {
            return Err(Error::Sizing(format!(
                "lattice extent {extent:.4} exceeds grid half-period {:.4}",
                0.5 * grid.length()
            )));
        }
        Ok(Self {
            alpha,
            beta,
            scale,
            k_max,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Points per axis, `2K + 1`.
    pub fn side(&self) -> usize {
        2 * self.k_max + 1
    }

    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Same index set with a different scale.
    pub fn with_scale(&self, scale: f64) -> Lattice {
        Lattice {
            scale,
            ..self.clone()
        }
    }

    /// Spatial offsets `scale * alpha * k`, `k = -K..=K`.
    pub fn x_coords(&self) -> Vec<f64> {
        let k = self.k_max as i64;
        (-k..=k)
            .map(|i| self.scale * self.alpha * i as f64)
            .collect()
    }

    /// Momentum offsets `scale * beta * l`, `l = -K..=K`.
    pub fn xi_coords(&self) -> Vec<f64> {
        let k = self.k_max as i64;
        (-k..=k).map(|i| self.scale * self.beta * i as f64).collect()
    }

    /// Flat position of an index, spatial index major.
    pub fn flat(&self, idx: LatticeIndex) -> usize {
        let k = self.k_max as i64;
        ((idx.k + k) as usize) * self.side() + (idx.l + k) as usize
    }

    pub fn index(&self, flat: usize) -> LatticeIndex {
        let k = self.k_max as i64;
        LatticeIndex {
            k: (flat / self.side()) as i64 - k,
            l: (flat % self.side()) as i64 - k,
        }
    }

    pub fn contains(&self, idx: LatticeIndex) -> bool {
        let k = self.k_max as i64;
        idx.k.abs() <= k && idx.l.abs() <= k
    }

    pub fn point(&self, idx: LatticeIndex) -> PhasePoint {
        PhasePoint::new(
            self.scale * self.alpha * idx.k as f64,
            self.scale * self.beta * idx.l as f64,
        )
    }

    /// The unscaled point `(alpha k, beta l)`.
    pub fn unscaled_point(&self, idx: LatticeIndex) -> PhasePoint {
        PhasePoint::new(self.alpha * idx.k as f64, self.beta * idx.l as f64)
    }

    /// All points in flat order.
    pub fn points(&self) -> Vec<PhasePoint> {
        (0..self.len()).map(|i| self.point(self.index(i))).collect()
    }

    pub fn indices(&self) -> impl Iterator<Item = LatticeIndex> + '_ {
        (0..self.len()).map(move |i| self.index(i))
    }

    /// Half-widths `(X, Xi)` of the lattice hull.
    pub fn hull(&self) -> (f64, f64) {
        let k = self.k_max as f64;
        (self.scale * self.alpha * k, self.scale * self.beta * k)
    }
}

/// A positive weight on phase space.
pub trait Weight: Send + Sync {
    fn eval(&self, z: PhasePoint) -> f64;
}

/// `v_s(z) = (1 + |z|^2)^(s/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolynomialWeight {
    pub s: f64,
}

impl PolynomialWeight {
    pub fn new(s: f64) -> Self {
        Self { s }
    }
}

impl Weight for PolynomialWeight {
    fn eval(&self, z: PhasePoint) -> f64 {
        (1.0 + z.x * z.x + z.xi * z.xi).powf(0.5 * self.s)
    }
}

/// `m_hbar(z) = m(h^{-1/2} z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledWeight<W> {
    pub base: W,
    pub h: f64,
}

impl<W: Weight> ScaledWeight<W> {
    pub fn new(base: W, hp: PlanckPair) -> Self {
        Self { base, h: hp.h() }
    }
}

impl<W: Weight> Weight for ScaledWeight<W> {
    fn eval(&self, z: PhasePoint) -> f64 {
        self.base.eval(z.scale(self.h.sqrt().recip()))
    }
}

/// Radial weight `m(z) = profile(|z|)`, the plug-in for moderate weights
/// outside the `v_s` family.
pub struct RadialWeight<F> {
    pub profile: F,
}

impl<F: Fn(f64) -> f64 + Send + Sync> Weight for RadialWeight<F> {
    fn eval(&self, z: PhasePoint) -> f64 {
        (self.profile)(z.norm())
    }
}

/// Unit weight.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unweighted;

impl Weight for Unweighted {
    fn eval(&self, _z: PhasePoint) -> f64 {
        1.0
    }
}
