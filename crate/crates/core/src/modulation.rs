//! Short-time Fourier transforms, modulation-space norms and their
//! semi-classical versions.
//!
//! The STFT uses the `2 pi` convention
//! `V_g f(x, xi) = int f(t) conj(g(t - x)) exp(-2 pi i xi t) dt`, so that
//! `|V_g f(z)| = |<f, T(z) g>|`. Mixed norms integrate over `x` with
//! exponent `p` first and over `xi` with exponent `q` second.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::gabor::system::GaborSystem;
use crate::phasespace::{Lattice, PhasePoint, PlanckPair, SampledState, Weight};
use crate::quantization::{dilate, translate};

/// Tolerance of the two-route identity checked by [`scmod_norm`].
pub const ROUTE_TOLERANCE: f64 = 1e-6;

/// Rectangular sampling `x_i = x_min + i dx`, `xi_k = xi_min + k dxi`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceSampling {
    pub x_min: f64,
    pub dx: f64,
    pub nx: usize,
    pub xi_min: f64,
    pub dxi: f64,
    pub nxi: usize,
}

impl PhaseSpaceSampling {
    /// Symmetric sampling of `[-x_extent, x_extent] x [-xi_extent, xi_extent]`.
    pub fn symmetric(x_extent: f64, xi_extent: f64, dx: f64, dxi: f64) -> Result<Self> {
        for (name, v) in [
            ("x_extent", x_extent),
            ("xi_extent", xi_extent),
            ("dx", dx),
            ("dxi", dxi),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("{v} must be positive")));
            }
        }
        let nx = 2 * (x_extent / dx).round() as usize + 1;
        let nxi = 2 * (xi_extent / dxi).round() as usize + 1;
        Ok(Self {
            x_min: -dx * ((nx - 1) / 2) as f64,
            dx,
            nx,
            xi_min: -dxi * ((nxi - 1) / 2) as f64,
            dxi,
            nxi,
        })
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn xi(&self, k: usize) -> f64 {
        self.xi_min + k as f64 * self.dxi
    }

    pub fn len(&self) -> usize {
        self.nx * self.nxi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize, k: usize) -> PhasePoint {
        PhasePoint::new(self.x(i), self.xi(k))
    }
}

/// Samples of a phase-space function, `values[i * nxi + k]` at `(x_i, xi_k)`.
#[derive(Debug, Clone)]
pub struct PhaseSpaceField {
    pub sampling: PhaseSpaceSampling,
    pub values: Vec<Complex64>,
}

impl PhaseSpaceField {
    pub fn at(&self, i: usize, k: usize) -> Complex64 {
        self.values[i * self.sampling.nxi + k]
    }

    /// `int int |F|^2` by the Riemann sum of the sampling.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.sampling.dx * self.sampling.dxi
    }
}

/// `sum_j u_j exp(-i (w0 + k dw) t_j) dt` for `k = 0..n`, the phases being
/// advanced by recurrence.
fn frequency_sums(u: &[(f64, Complex64)], w0: f64, dw: f64, n: usize, dt: f64) -> Vec<Complex64> {
    let mut phase: Vec<Complex64> = u
        .iter()
        .map(|(t, v)| v * Complex64::from_polar(dt, -w0 * t))
        .collect();
    let step: Vec<Complex64> = u.iter().map(|(t, _)| Complex64::from_polar(1.0, -dw * t)).collect();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        if k > 0 && k % 32 == 0 {
            // refresh to keep the recurrence from drifting
            for ((ph, (t, v)), _) in phase.iter_mut().zip(u).zip(&step) {
                *ph = v * Complex64::from_polar(dt, -(w0 + k as f64 * dw) * t);
            }
        }
        out.push(phase.iter().sum());
        for (ph, s) in phase.iter_mut().zip(&step) {
            *ph *= s;
        }
    }
    out
}

/// `sum_j f_j conj(g(t_j - x)) exp(-i w t_j) dx` over the sampling, with
/// `x = x_scale * x_i` and `w = w_scale * xi_k`.
fn windowed_sums(
    window: &SampledState,
    f: &SampledState,
    sampling: &PhaseSpaceSampling,
    x_scale: f64,
    w_scale: f64,
) -> Vec<Vec<Complex64>> {
    let grid = f.grid();
    let dx = grid.dx();
    (0..sampling.nx)
        .into_par_iter()
        .map(|i| {
            let shifted = translate(x_scale * sampling.x(i), window);
            let prod: Vec<Complex64> = f
                .values()
                .iter()
                .zip(shifted.values())
                .map(|(a, b)| a * b.conj())
                .collect();
            let max = prod.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let kept: Vec<(f64, Complex64)> = prod
                .iter()
                .zip(grid.xs())
                .filter(|(v, _)| v.norm() > 1e-18 * max)
                .map(|(v, t)| (t, *v))
                .collect();
            if kept.is_empty() {
                return vec![Complex64::new(0.0, 0.0); sampling.nxi];
            }
            frequency_sums(
                &kept,
                w_scale * sampling.xi_min,
                w_scale * sampling.dxi,
                sampling.nxi,
                dx,
            )
        })
        .collect()
}

/// `V_g f` on the sampling.
pub fn stft(g: &SampledState, f: &SampledState, sampling: &PhaseSpaceSampling) -> Result<PhaseSpaceField> {
    check_pair(g, f)?;
    let rows = windowed_sums(g, f, sampling, 1.0, 2.0 * PI);
    Ok(PhaseSpaceField {
        sampling: sampling.clone(),
        values: rows.into_iter().flatten().collect(),
    })
}

/// `V^hbar_g f(z) = <f, T^hbar(h^{1/2} z) g^h>` with `g^h = D_{h^{-1/2}} g`.
pub fn hstft(
    hp: PlanckPair,
    g: &SampledState,
    f: &SampledState,
    sampling: &PhaseSpaceSampling,
) -> Result<PhaseSpaceField> {
    check_pair(g, f)?;
    let gh = dilate(1.0 / hp.sqrt_h(), g)?;
    hstft_with_dilated(hp, &gh, f, sampling)
}

/// As [`hstft`] with the dilated window `g^h` supplied by the caller.
pub fn hstft_with_dilated(
    hp: PlanckPair,
    gh: &SampledState,
    f: &SampledState,
    sampling: &PhaseSpaceSampling,
) -> Result<PhaseSpaceField> {
    check_pair(gh, f)?;
    let s = hp.sqrt_h();
    let hbar = hp.hbar();
    let rows = windowed_sums(gh, f, sampling, s, s / hbar);
    let mut values = Vec::with_capacity(sampling.len());
    for (i, row) in rows.into_iter().enumerate() {
        let x = s * sampling.x(i);
        for (k, v) in row.into_iter().enumerate() {
            let p = s * sampling.xi(k);
            values.push(v * Complex64::from_polar(1.0, x * p / (2.0 * hbar)));
        }
    }
    Ok(PhaseSpaceField {
        sampling: sampling.clone(),
        values,
    })
}

fn check_pair(g: &SampledState, f: &SampledState) -> Result<()> {
    if g.grid() != f.grid() {
        return Err(invalid("window", "grid differs from the state grid"));
    }
    if g.norm() == 0.0 {
        return Err(invalid("window", "must be nonzero"));
    }
    Ok(())
}

/// Mixed `L^{p,q}_m` norm of a sampled phase-space function. `p` or `q`
/// equal to infinity gives the sampled supremum.
pub fn mixed_norm(field: &PhaseSpaceField, p: f64, q: f64, m: &dyn Weight) -> Result<f64> {
    check_exponent("p", p)?;
    check_exponent("q", q)?;
    let s = &field.sampling;
    let inner: Vec<f64> = (0..s.nxi)
        .map(|k| {
            let terms = (0..s.nx).map(|i| field.at(i, k).norm() * m.eval(s.point(i, k)));
            lp_sum(terms, p, s.dx)
        })
        .collect();
    Ok(lp_sum(inner.into_iter(), q, s.dxi))
}

fn lp_sum(terms: impl Iterator<Item = f64>, p: f64, step: f64) -> f64 {
    if p.is_infinite() {
        terms.fold(0.0, f64::max)
    } else {
        (terms.map(|t| t.powf(p)).sum::<f64>() * step).powf(1.0 / p)
    }
}

fn check_exponent(name: &'static str, p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("{p} must lie in [1, inf]")))
    }
}

/// A modulation norm with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct NormReport {
    pub norm: f64,
    /// Relative disagreement of the two semi-classical routes (zero for the
    /// plain norm).
    pub route_discrepancy: f64,
    /// `int int |V_g f|^2 / (||f||^2 ||g||^2)` over the sampling.
    pub captured_mass: f64,
}

impl NormReport {
    pub const CSV_HEADER: [&'static str; 7] =
        ["p", "q", "s", "hbar", "norm", "route_discrepancy", "captured_mass"];
}

fn captured(field: &PhaseSpaceField, f: &SampledState, g: &SampledState) -> f64 {
    let denom = f.norm_sqr() * g.norm_sqr();
    if denom == 0.0 {
        return 1.0;
    }
    let c = field.energy() / denom;
    if c < 1.0 - 1e-6 {
        log::warn!("phase-space sampling captures only {c:.8} of the STFT energy");
    }
    c
}

/// `||f||_{M^{p,q}_m} = ||V_g f||_{L^{p,q}_m}` on the sampling.
pub fn mod_norm(
    p: f64,
    q: f64,
    m: &dyn Weight,
    g: &SampledState,
    f: &SampledState,
    sampling: &PhaseSpaceSampling,
) -> Result<NormReport> {
    let v = stft(g, f, sampling)?;
    Ok(NormReport {
        norm: mixed_norm(&v, p, q, m)?,
        route_discrepancy: 0.0,
        captured_mass: captured(&v, f, g),
    })
}

/// Semi-classical modulation norm `||D_{h^{1/2}} f||_{M^{p,q}_m}`, computed
/// both through the dilation and through the semi-classical STFT. Fails when
/// the routes disagree by more than [`ROUTE_TOLERANCE`].
pub fn scmod_norm(
    hp: PlanckPair,
    p: f64,
    q: f64,
    m: &dyn Weight,
    g: &SampledState,
    f: &SampledState,
    sampling: &PhaseSpaceSampling,
) -> Result<NormReport> {
    let standard = PlanckPair::standard();
    if hp == standard {
        return mod_norm(p, q, m, g, f, sampling);
    }
    let df = dilate(hp.sqrt_h(), f)?;
    let v1 = stft(g, &df, sampling)?;
    let n1 = mixed_norm(&v1, p, q, m)?;
    let v2 = hstft(hp, g, f, sampling)?;
    let n2 = mixed_norm(&v2, p, q, m)?;
    let scale = n1.abs().max(n2.abs());
    let discrepancy = if scale > 0.0 { (n1 - n2).abs() / scale } else { 0.0 };
    if discrepancy > ROUTE_TOLERANCE {
        return Err(Error::SelfCheck {
            what: "semi-classical norm routes",
            value: discrepancy,
            tolerance: ROUTE_TOLERANCE,
        });
    }
    Ok(NormReport {
        norm: n1,
        route_discrepancy: discrepancy,
        captured_mass: captured(&v1, &df, g),
    })
}

/// Mixed `l^{p,q}` norm of lattice coefficients with the weight evaluated at
/// the (scaled) lattice points; inner sum over the spatial index.
pub fn seq_norm(p: f64, q: f64, m: &dyn Weight, lattice: &Lattice, c: &[Complex64]) -> Result<f64> {
    check_exponent("p", p)?;
    check_exponent("q", q)?;
    if c.len() != lattice.len() {
        return Err(Error::DimensionMismatch {
            expected: lattice.len(),
            got: c.len(),
        });
    }
    let k = lattice.k_max() as i64;
    let inner: Vec<f64> = (-k..=k)
        .map(|l| {
            let terms = (-k..=k).map(|kk| {
                let idx = crate::phasespace::LatticeIndex { k: kk, l };
                c[lattice.flat(idx)].norm() * m.eval(lattice.point(idx))
            });
            lp_sum(terms, p, 1.0)
        })
        .collect();
    Ok(lp_sum(inner.into_iter(), q, 1.0))
}

/// Extreme ratios `seq_norm(analysis f) / scmod_norm(f)` over a test set.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub a_est: f64,
    pub b_est: f64,
    pub ratios: Vec<f64>,
}

/// Brackets the constants of the discrete/continuous norm equivalence.
/// `m` is the unscaled weight; the coefficient weight is `m(h^{-1/2} .)`.
#[allow(clippy::too_many_arguments)]
pub fn norm_equivalence_report<W: Weight + Clone>(
    sys: &GaborSystem,
    g: &SampledState,
    p: f64,
    q: f64,
    m: &W,
    tests: &[SampledState],
    sampling: &PhaseSpaceSampling,
) -> Result<EquivalenceReport> {
    let hp = sys.hp();
    let mh = crate::phasespace::ScaledWeight::new(m.clone(), hp);
    let mut ratios = Vec::with_capacity(tests.len());
    for f in tests {
        let c = sys.analysis(f);
        let num = seq_norm(p, q, &mh, sys.lattice(), &c)?;
        let den = scmod_norm(hp, p, q, m, g, f, sampling)?.norm;
        ratios.push(num / den);
    }
    let a_est = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let b_est = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(EquivalenceReport { a_est, b_est, ratios })
}
