//! Frame-bound estimation.
//!
//! The frame operator of a truncated system is compressed onto states that
//! live well inside the lattice hull: orthonormalized, squeezed Hermite
//! functions filling an ellipse inscribed in the hull with a safety margin.
//! Extreme eigenvalues of the compression come from a Lanczos iteration
//! with full reorthogonalization and a seeded random start vector.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gabor::system::{frame_operator, GaborSystem};
use crate::phasespace::{Grid, SampledState};

/// Margin between the probe ellipse and the hull, in units of `hbar^{1/2}`.
pub const HULL_MARGIN: f64 = 7.0;

/// Relative Ritz-residual target.
pub const RITZ_TOLERANCE: f64 = 1e-8;

/// Estimated frame bounds with the metadata of the estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBounds {
    pub a: f64,
    pub b: f64,
    /// Lanczos steps taken.
    pub iterations: usize,
    /// Largest relative Ritz residual of the two extreme pairs.
    pub residual: f64,
    /// Dimension of the hull-localized probe space.
    pub subspace_dim: usize,
    pub alpha: f64,
    pub beta: f64,
    pub hbar: f64,
    pub k_max: usize,
    pub points: usize,
    pub length: f64,
}

impl FrameBounds {
    pub fn ratio(&self) -> f64 {
        self.a / self.b
    }

    pub const CSV_HEADER: [&'static str; 9] =
        ["alpha", "beta", "hbar", "K", "M", "L", "A", "B", "residual"];

    pub fn csv_row(&self) -> [String; 9] {
        [
            fmt17(self.alpha),
            fmt17(self.beta),
            fmt17(self.hbar),
            self.k_max.to_string(),
            self.points.to_string(),
            fmt17(self.length),
            fmt17(self.a),
            fmt17(self.b),
            fmt17(self.residual),
        ]
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Orthonormal basis of the probe space for a system.
pub fn hull_basis(sys: &GaborSystem) -> Vec<SampledState> {
    let (hx, hxi) = sys.lattice().hull();
    let sq = sys.hp().hbar().sqrt();
    let a = (hx / sq - HULL_MARGIN).max(1.0);
    let b = (hxi / sq - HULL_MARGIN).max(1.0);
    let r2 = a * b;
    let n_max = (((r2 - 1.0) / 2.0).floor().max(1.0)) as usize;
    let sigma = (a / b).sqrt();
    squeezed_hermite_basis(sys.grid(), sigma * sq, n_max + 1)
}

/// The first `count` Hermite functions `w^{-1/2} psi_n(x / w)`, sampled on the
/// grid and orthonormalized in the discrete pairing.
pub fn squeezed_hermite_basis(grid: &Grid, w: f64, count: usize) -> Vec<SampledState> {
    let m = grid.len();
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(m); count];
    for x in grid.xs() {
        let u = x / w;
        let mut prev = 0.0;
        let mut cur = PI.powf(-0.25) * (-0.5 * u * u).exp();
        for (n, col) in columns.iter_mut().enumerate() {
            col.push(cur / w.sqrt());
            let next = (2.0 / (n as f64 + 1.0)).sqrt() * u * cur
                - (n as f64 / (n as f64 + 1.0)).sqrt() * prev;
            prev = cur;
            cur = next;
        }
    }
    let dx = grid.dx();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    for mut v in columns {
        for _ in 0..2 {
            for q in &basis {
                let p: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() * dx;
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
            }
        }
        let n = (v.iter().map(|a| a * a).sum::<f64>() * dx).sqrt();
        if n < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|a| *a /= n);
        basis.push(v);
    }
    basis
        .into_iter()
        .map(|v| {
            SampledState::new(grid.clone(), v.into_iter().map(|a| Complex64::new(a, 0.0)).collect())
                .expect("grid length")
        })
        .collect()
}

/// Extreme eigenvalues of `S_{g,g}` compressed onto the hull-localized probe
/// space.
pub fn frame_bounds(sys: &GaborSystem, seed: u64) -> Result<FrameBounds> {
    let basis = hull_basis(sys);
    let (a, b, iterations, residual) = compressed_extremes(sys, &basis, seed)?;
    Ok(FrameBounds {
        a,
        b,
        iterations,
        residual,
        subspace_dim: basis.len(),
        alpha: sys.lattice().alpha(),
        beta: sys.lattice().beta(),
        hbar: sys.hp().hbar(),
        k_max: sys.lattice().k_max(),
        points: sys.grid().len(),
        length: sys.grid().length(),
    })
}

fn expand(basis: &[SampledState], y: &[Complex64]) -> SampledState {
    let grid = basis[0].grid();
    let mut out = SampledState::zeros(grid);
    for (q, c) in basis.iter().zip(y) {
        out.axpy(*c, q);
    }
    out
}

fn project(basis: &[SampledState], f: &SampledState) -> Vec<Complex64> {
    basis.iter().map(|q| f.inner(q)).collect()
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

fn cnorm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Lanczos on `P S P` in the coordinates of `basis`; returns
/// `(min, max, steps, relative residual)`.
fn compressed_extremes(
    sys: &GaborSystem,
    basis: &[SampledState],
    seed: u64,
) -> Result<(f64, f64, usize, f64)> {
    let d = basis.len();
    let apply = |y: &[Complex64]| project(basis, &frame_operator(sys, sys, &expand(basis, y)));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<Complex64> = (0..d)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let n0 = cnorm(&q);
    q.iter_mut().for_each(|v| *v /= n0);

    let mut qs: Vec<Vec<Complex64>> = vec![q];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut last = (0.0, 0.0, f64::INFINITY);

    for m in 1..=d {
        let mut w = apply(&qs[m - 1]);
        let a = cdot(&w, &qs[m - 1]).re;
        alphas.push(a);
        for _ in 0..2 {
            for qj in &qs {
                let p = cdot(&w, qj);
                w.iter_mut().zip(qj).for_each(|(x, y)| *x -= p * y);
            }
        }
        let beta = cnorm(&w);

        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alphas[i];
            if i + 1 < m {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (mut imin, mut imax) = (0, 0);
        for i in 0..m {
            if eig.eigenvalues[i] < eig.eigenvalues[imin] {
                imin = i;
            }
            if eig.eigenvalues[i] > eig.eigenvalues[imax] {
                imax = i;
            }
        }
        let lmin = eig.eigenvalues[imin];
        let lmax = eig.eigenvalues[imax];
        let scale = lmax.abs().max(f64::MIN_POSITIVE);
        let rmin = beta * eig.eigenvectors[(m - 1, imin)].abs() / scale;
        let rmax = beta * eig.eigenvectors[(m - 1, imax)].abs() / scale;
        let res = rmin.max(rmax);
        last = (lmin, lmax, res);
        if res <= RITZ_TOLERANCE || m == d || beta <= 1e-14 * scale {
            let res = if m == d || beta <= 1e-14 * scale { res.min(beta / scale) } else { res };
            return Ok((lmin.max(0.0), lmax, m, res));
        }
        betas.push(beta);
        w.iter_mut().for_each(|x| *x /= beta);
        qs.push(w);
    }
    Err(Error::NoConvergence {
        what: "Lanczos frame bounds",
        iterations: d,
        residual: last.2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gabor::windows::{gaussian_window, WindowKind};
    use crate::phasespace::{Lattice, PlanckPair};

    #[test]
    fn hermite_basis_is_orthonormal() {
        let grid = Grid::new(20.0, 1024).unwrap();
        let basis = squeezed_hermite_basis(&grid, 0.7, 30);
        assert_eq!(basis.len(), 30);
        for i in 0..30 {
            for j in 0..30 {
                let p = basis[i].inner(&basis[j]);
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p - Complex64::new(e, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn single_point_has_zero_lower_bound() {
        let grid = Grid::new(16.0, 512).unwrap();
        let hp = PlanckPair::standard();
        let g = gaussian_window(WindowKind::Psi0, hp, &grid).unwrap();
        let lat = Lattice::new(1.0, 1.0, 1.0, 0, &grid).unwrap();
        let sys = GaborSystem::new(g, lat, hp).unwrap();
        let fb = frame_bounds(&sys, 7).unwrap();
        assert!(fb.subspace_dim >= 2);
        assert!(fb.a.abs() < 1e-12, "A = {}", fb.a);
        assert!(fb.b > 0.0);
    }

    #[test]
    fn csv_row_has_full_precision() {
        let row = fmt17(0.1);
        assert_eq!(row, "1.0000000000000001e-1");
    }
}
