//! Semi-classical Gabor matrices of operators: decay fits against a
//! canonical transformation, the continuous (off-lattice) envelope check,
//! thresholding, Schur bounds and consistency with the operator itself.
//!
//! The Gabor matrix of `A` on a system `{g_lambda}` has entries
//! `a_{mu lambda} = <A g_lambda, g_mu>`. Columns are indexed by the source
//! point `lambda`, rows by the target point `mu`, both in the flat order of
//! [`Lattice::flat`].

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fit::fit_line;
use crate::gabor::GaborSystem;
use crate::phasespace::{Lattice, PhasePoint, PlanckPair, PolynomialWeight, SampledState, Weight};
use crate::quantization::heisenberg_shift;

/// A linear operator on grid states.
pub type Operator<'a> = dyn Fn(&SampledState) -> Result<SampledState> + Sync + 'a;

/// A phase-space map.
pub type PhaseMap<'a> = dyn Fn(PhasePoint) -> PhasePoint + Sync + 'a;

/// Relative tolerance of the linearity spot-check.
pub const LINEARITY_TOLERANCE: f64 = 1e-10;

/// Gabor matrix stored by columns, entries below `floor * max` dropped.
#[derive(Debug, Clone)]
pub struct GaborMatrix {
    lattice: Lattice,
    hp: PlanckPair,
    floor: f64,
    max_entry: f64,
    /// Per source index `lambda`: `(mu, a_{mu lambda})` in increasing `mu`.
    columns: Vec<Vec<(usize, Complex64)>>,
}

impl GaborMatrix {
    /// Builds a matrix from dense columns, keeping entries above
    /// `floor * max`.
    pub fn from_dense_columns(lattice: Lattice, hp: PlanckPair, floor: f64, dense: Vec<Vec<Complex64>>) -> Result<Self> {
        if !(floor >= 0.0) {
            return Err(invalid("floor", format!("{floor} must be nonnegative")));
        }
        let n = lattice.len();
        if dense.len() != n || dense.iter().any(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: dense.len(),
            });
        }
        let max_entry = dense
            .iter()
            .flat_map(|c| c.iter().map(|v| v.norm()))
            .fold(0.0, f64::max);
        let cut = floor * max_entry;
        let columns = dense
            .into_iter()
            .map(|col| {
                col.into_iter()
                    .enumerate()
                    .filter(|(_, v)| v.norm() > cut || (floor == 0.0 && v.norm() > 0.0))
                    .collect()
            })
            .collect();
        Ok(Self {
            lattice,
            hp,
            floor,
            max_entry,
            columns,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn hp(&self) -> PlanckPair {
        self.hp
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn max_entry(&self) -> f64 {
        self.max_entry
    }

    /// Number of lattice points; the matrix is `dim x dim`.
    pub fn dim(&self) -> usize {
        self.lattice.len()
    }

    pub fn stored(&self) -> usize {
        self.columns.iter().map(|c| c.len()).sum()
    }

    /// Stored entries as `(mu, lambda, a_{mu lambda})`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        self.columns
            .iter()
            .enumerate()
            .flat_map(|(l, col)| col.iter().map(move |&(m, v)| (m, l, v)))
    }

    pub fn column(&self, lambda: usize) -> &[(usize, Complex64)] {
        &self.columns[lambda]
    }

    /// `a_{mu lambda}`, zero when not stored.
    pub fn get(&self, mu: usize, lambda: usize) -> Complex64 {
        self.columns[lambda]
            .binary_search_by_key(&mu, |e| e.0)
            .map(|i| self.columns[lambda][i].1)
            .unwrap_or_default()
    }

    /// `(a c)_mu = sum_lambda a_{mu lambda} c_lambda`.
    pub fn apply(&self, c: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(c.len(), self.dim(), "coefficient count");
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        for (col, &cl) in self.columns.iter().zip(c) {
            if cl.norm_sqr() == 0.0 {
                continue;
            }
            for &(m, v) in col {
                out[m] += v * cl;
            }
        }
        out
    }

    /// Squared l2 mass of column `lambda`.
    pub fn column_mass(&self, lambda: usize) -> f64 {
        self.columns[lambda].iter().map(|e| e.1.norm_sqr()).sum()
    }

    /// CSV header of [`GaborMatrix::csv_rows`].
    pub const CSV_HEADER: [&'static str; 5] = ["lambda_k", "lambda_l", "mu_k", "mu_l", "magnitude"];

    /// `(lambda, mu, |a_{mu lambda}|)` triples with lattice indices.
    pub fn csv_rows(&self) -> Vec<(i64, i64, i64, i64, f64)> {
        self.entries()
            .map(|(m, l, v)| {
                let li = self.lattice.index(l);
                let mi = self.lattice.index(m);
                (li.k, li.l, mi.k, mi.l, v.norm())
            })
            .collect()
    }
}

fn random_state(sys: &GaborSystem, rng: &mut ChaCha8Rng) -> SampledState {
    let c: Vec<Complex64> = (0..sys.lattice().len())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    sys.synthesis(&c)
}

/// Checks `A(f + g) = A f + A g` on two pseudo-random frame superpositions.
pub fn linearity_check(apply: &Operator<'_>, sys: &GaborSystem, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = random_state(sys, &mut rng);
    let g = random_state(sys, &mut rng);
    let lhs = apply(&f.add(&g))?;
    let rhs = apply(&f)?.add(&apply(&g)?);
    let scale = lhs.norm().max(rhs.norm());
    let defect = if scale > 0.0 { lhs.sub(&rhs).norm() / scale } else { 0.0 };
    if defect > LINEARITY_TOLERANCE {
        return Err(Error::NotLinear { defect });
    }
    Ok(defect)
}

/// Gabor matrix of `apply` on `sys`, one operator application per column.
pub fn gabor_matrix(apply: &Operator<'_>, sys: &GaborSystem, floor: f64) -> Result<GaborMatrix> {
    linearity_check(apply, sys, 0x5eed)?;
    let lattice = sys.lattice().clone();
    let dense = (0..lattice.len())
        .into_par_iter()
        .map(|l| {
            let image = apply(&sys.atom(lattice.index(l)))?;
            Ok(sys.analysis(&image))
        })
        .collect::<Result<Vec<_>>>()?;
    GaborMatrix::from_dense_columns(lattice, sys.hp(), floor, dense)
}

/// `h^{-1/2} (mu - chi(lambda))`.
fn scaled_offset(hp: PlanckPair, mu: PhasePoint, image: PhasePoint) -> PhasePoint {
    (mu - image).scale(1.0 / hp.sqrt_h())
}

/// Envelope fit `|a_{mu lambda}| <= C / v_1(h^{-1/2}(mu - chi(lambda)))^s`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// Least-squares slope of `-log|a|` against `log v_1`.
    pub s_fit: f64,
    /// Smallest `C` making `C v_1^{-s_fit}` an upper envelope of the fitted
    /// entries.
    pub c_fit: f64,
    /// Intercept of the least-squares line, `exp` applied.
    pub c_mean: f64,
    /// Root-mean-square residual of the fit in `log|a|`.
    pub residual: f64,
    pub points: usize,
    pub hbar: f64,
}

impl DecayFit {
    pub const CSV_HEADER: [&'static str; 6] = ["hbar", "s_fit", "C_fit", "C_mean", "residual", "points"];

    pub fn values(&self) -> [f64; 6] {
        [self.hbar, self.s_fit, self.c_fit, self.c_mean, self.residual, self.points as f64]
    }

    /// The envelope `C v_1(d)^{-s}` at the scaled offset `d`.
    pub fn envelope(&self, d: PhasePoint) -> f64 {
        self.c_fit / PolynomialWeight::new(self.s_fit).eval(d)
    }
}

/// Minimum number of stored entries a fit needs.
const MIN_FIT_POINTS: usize = 8;

/// Fits the decay of the stored entries of `mat` away from the graph of
/// `chi`.
pub fn decay_fit(mat: &GaborMatrix, chi: &PhaseMap<'_>) -> Result<DecayFit> {
    let lat = mat.lattice();
    let hp = mat.hp();
    let v1 = PolynomialWeight::new(1.0);
    let images: Vec<PhasePoint> = (0..mat.dim()).map(|l| chi(lat.point(lat.index(l)))).collect();
    let samples: Vec<(f64, f64)> = mat
        .entries()
        .filter(|(_, _, v)| v.norm() > 0.0)
        .map(|(m, l, v)| {
            let d = scaled_offset(hp, lat.point(lat.index(m)), images[l]);
            (v1.eval(d).ln(), v.norm().ln())
        })
        .collect();
    if samples.len() < MIN_FIT_POINTS {
        return Err(Error::FitRefused(format!(
            "{} entries above the floor, need {MIN_FIT_POINTS}",
            samples.len()
        )));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let line = fit_line(&xs, &ys)?;
    let s_fit = -line.slope;
    let c_fit = samples
        .iter()
        .map(|(lv, la)| (la + s_fit * lv).exp())
        .fold(0.0, f64::max);
    Ok(DecayFit {
        s_fit,
        c_fit,
        c_mean: line.intercept.exp(),
        residual: line.rms,
        points: samples.len(),
        hbar: hp.hbar(),
    })
}

/// Off-lattice samples against a lattice envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub samples: usize,
    /// Largest `|<A T(z) g, T(w) g>| / envelope(z, w)` over the samples.
    pub max_ratio: f64,
    pub factor: f64,
}

impl EnvelopeReport {
    pub fn holds(&self) -> bool {
        self.max_ratio <= self.factor
    }
}

/// Evaluates the matrix coefficients at off-lattice pairs `(z, w)` and
/// compares them with the lattice envelope `fit` around `chi`.
pub fn continuous_vs_discrete(
    apply: &Operator<'_>,
    sys: &GaborSystem,
    fit: &DecayFit,
    chi: &PhaseMap<'_>,
    pairs: &[(PhasePoint, PhasePoint)],
    factor: f64,
) -> Result<EnvelopeReport> {
    let hp = sys.hp();
    let g = sys.window();
    let ratios = pairs
        .par_iter()
        .map(|&(z, w)| {
            let a = apply(&heisenberg_shift(hp, z, g))?;
            let v = a.inner(&heisenberg_shift(hp, w, g)).norm();
            let env = fit.envelope(scaled_offset(hp, w, chi(z)));
            Ok(if v == 0.0 { 0.0 } else { v / env })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(EnvelopeReport {
        samples: pairs.len(),
        max_ratio: ratios.into_iter().fold(0.0, f64::max),
        factor,
    })
}

/// Pseudo-random pairs `(z, w)` with `z` in the inner part of the hull and
/// `w` within `spread` (scaled units) of `chi(z)`.
pub fn off_lattice_pairs(
    sys: &GaborSystem,
    chi: &PhaseMap<'_>,
    count: usize,
    inner_fraction: f64,
    spread: f64,
    seed: u64,
) -> Vec<(PhasePoint, PhasePoint)> {
    let (hx, hxi) = sys.lattice().hull();
    let s = sys.hp().sqrt_h();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let z = PhasePoint::new(
                inner_fraction * hx * rng.random_range(-1.0..1.0),
                inner_fraction * hxi * rng.random_range(-1.0..1.0),
            );
            let w = chi(z) + PhasePoint::new(rng.random_range(-spread..spread), rng.random_range(-spread..spread)).scale(s);
            (z, w)
        })
        .collect()
}

/// Thresholding outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressionReport {
    pub threshold: f64,
    /// Kept entries over `dim^2`.
    pub kept_fraction: f64,
    /// Largest `||(A - A_thr) c|| / ||A c||` over the test vectors.
    pub application_error: f64,
    pub vectors: usize,
}

/// Drops entries below `threshold * max` and measures the effect on
/// `vectors` pseudo-random coefficient vectors.
pub fn sparsify(mat: &GaborMatrix, threshold: f64, vectors: usize, seed: u64) -> Result<(GaborMatrix, CompressionReport)> {
    if !(threshold >= 0.0) {
        return Err(invalid("threshold", format!("{threshold} must be nonnegative")));
    }
    let cut = threshold * mat.max_entry;
    let columns: Vec<Vec<(usize, Complex64)>> = mat
        .columns
        .iter()
        .map(|col| col.iter().copied().filter(|e| e.1.norm() >= cut).collect())
        .collect();
    let sparse = GaborMatrix {
        lattice: mat.lattice.clone(),
        hp: mat.hp,
        floor: mat.floor.max(threshold),
        max_entry: mat.max_entry,
        columns,
    };
    let n = mat.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..vectors {
        let c: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let full = mat.apply(&c);
        let thin = sparse.apply(&c);
        let num: f64 = full.iter().zip(&thin).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = full.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if den > 0.0 {
            worst = worst.max(num / den);
        }
    }
    let report = CompressionReport {
        threshold,
        kept_fraction: sparse.stored() as f64 / (n * n) as f64,
        application_error: worst,
        vectors,
    };
    Ok((sparse, report))
}

/// Schur bound `max(sup_mu sum_lambda w, sup_lambda sum_mu w)` with
/// `w = |a_{mu lambda}| v_s(h^{-1/2} mu) / v_s(h^{-1/2} lambda)`: an upper
/// bound for the norm of the matrix on the `v_s`-weighted `l^2`.
pub fn schur_norm_bound(mat: &GaborMatrix, s: f64) -> f64 {
    let lat = mat.lattice();
    let inv = 1.0 / mat.hp().sqrt_h();
    let v = PolynomialWeight::new(s);
    let weights: Vec<f64> = (0..mat.dim())
        .map(|i| v.eval(lat.point(lat.index(i)).scale(inv)))
        .collect();
    let mut rows = vec![0.0; mat.dim()];
    let mut cols = vec![0.0; mat.dim()];
    for (m, l, a) in mat.entries() {
        let w = a.norm() * weights[m] / weights[l];
        rows[m] += w;
        cols[l] += w;
    }
    let r = rows.into_iter().fold(0.0, f64::max);
    let c = cols.into_iter().fold(0.0, f64::max);
    r.max(c)
}

/// `||analysis_g(A f) - M analysis_gamma(f)|| / ||analysis_g(A f)||`: the
/// matrix acting on dual coefficients reproduces the frame coefficients of
/// the image.
pub fn matrix_consistency(
    mat: &GaborMatrix,
    apply: &Operator<'_>,
    sys: &GaborSystem,
    dual: &GaborSystem,
    f: &SampledState,
) -> Result<f64> {
    let target = sys.analysis(&apply(f)?);
    let predicted = mat.apply(&dual.analysis(f));
    let num: f64 = target.iter().zip(&predicted).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = target.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    Ok(if den > 0.0 { num / den } else { num })
}

/// Largest entrywise difference of moduli, relative to the larger maximum
/// entry. The matrices must share the lattice shape.
pub fn modulus_discrepancy(a: &GaborMatrix, b: &GaborMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let scale = a.max_entry.max(b.max_entry);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mut worst: f64 = 0.0;
    for l in 0..a.dim() {
        for m in 0..a.dim() {
            worst = worst.max((a.get(m, l).norm() - b.get(m, l).norm()).abs());
        }
    }
    Ok(worst / scale)
}

/// Multiplication by `exp(i c x^2 / hbar)`, a chirp that shears phase space
/// by `xi -> xi + 2 c x`. Judged against `chi = id` it is the negative
/// control of the decay fits.
pub fn chirp_operator(hp: PlanckPair, c: f64) -> impl Fn(&SampledState) -> Result<SampledState> + Sync {
    move |f: &SampledState| {
        let values = f
            .values()
            .iter()
            .zip(f.grid().xs())
            .map(|(v, x)| v * Complex64::from_polar(1.0, c * x * x / hp.hbar()))
            .collect();
        SampledState::new(f.grid().clone(), values)
    }
}
