//! Semi-classical Gabor systems and their analysis, synthesis and frame
//! operators.
//!
//! Coefficient arrays are indexed by [`Lattice::flat`], spatial index major.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::phasespace::{Grid, Lattice, LatticeIndex, PhasePoint, PlanckPair, SampledState};
use crate::quantization::{dilate, heisenberg_shift, translate};

/// Relative magnitude below which samples of a translated window are
/// dropped from the sparse atom storage.
const SUPPORT_FLOOR: f64 = 1e-15;

/// A translated window stored over a circular index interval.
#[derive(Debug, Clone)]
struct Atom {
    start: usize,
    values: Vec<Complex64>,
}

/// The family `{T^hbar(lambda) g : lambda in lattice}`.
#[derive(Debug, Clone)]
pub struct GaborSystem {
    window: SampledState,
    lattice: Lattice,
    hp: PlanckPair,
    /// Spatial and momentum offsets; equal to the lattice coordinates except
    /// for covering systems.
    xs: Vec<f64>,
    ps: Vec<f64>,
    atoms: Vec<Atom>,
    /// `exp(i p_l x_j / hbar)` for every momentum offset `p_l`.
    modulations: Vec<Vec<Complex64>>,
}

impl GaborSystem {
    pub fn new(window: SampledState, lattice: Lattice, hp: PlanckPair) -> Result<Self> {
        if window.norm() == 0.0 {
            return Err(invalid("window", "must be nonzero"));
        }
        let grid = window.grid().clone();
        let (hx, _) = lattice.hull();
        if hx > 0.5 * grid.length() {
            return Err(Error::Sizing(format!(
                "lattice hull {hx} does not fit the grid half-period {}",
                0.5 * grid.length()
            )));
        }
        let xs = lattice.x_coords();
        let ps = lattice.xi_coords();
        Ok(Self::from_offsets(window, lattice, hp, xs, ps))
    }

    fn from_offsets(window: SampledState, lattice: Lattice, hp: PlanckPair, xs: Vec<f64>, ps: Vec<f64>) -> Self {
        let grid = window.grid().clone();
        let atoms = xs
            .par_iter()
            .map(|&x0| sparse_atom(&translate(x0, &window)))
            .collect();
        let modulations = ps
            .iter()
            .map(|&p| {
                grid.xs()
                    .map(|x| Complex64::from_polar(1.0, p * x / hp.hbar()))
                    .collect()
            })
            .collect();
        Self {
            window,
            lattice,
            hp,
            xs,
            ps,
            atoms,
            modulations,
        }
    }

    /// The untruncated lattice folded onto the periodic grid: spatial offsets
    /// covering the whole period and momentum offsets covering the whole
    /// frequency band. Its frame operator is the one whose inverse defines
    /// the canonical dual.
    pub fn covering(&self) -> GaborSystem {
        let grid = self.grid();
        let a = self.lattice.scale() * self.lattice.alpha();
        let b = self.lattice.scale() * self.lattice.beta();
        let kx = (0.5 * grid.length() / a).ceil() as i64;
        let kp = (grid.nyquist() * self.hp.hbar() / b).ceil() as i64;
        let xs = (-kx..=kx).map(|k| a * k as f64).collect();
        let ps = (-kp..=kp).map(|l| b * l as f64).collect();
        Self::from_offsets(self.window.clone(), self.lattice.clone(), self.hp, xs, ps)
    }

    /// Number of atoms, `|lattice|` except for covering systems.
    pub fn atom_count(&self) -> usize {
        self.xs.len() * self.ps.len()
    }

    /// The same lattice and Planck constant with another window, e.g. a dual.
    pub fn with_window(&self, window: SampledState) -> Result<Self> {
        if window.grid() != self.grid() {
            return Err(invalid("window", "grid differs from the system grid"));
        }
        Self::new(window, self.lattice.clone(), self.hp)
    }

    pub fn window(&self) -> &SampledState {
        &self.window
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn hp(&self) -> PlanckPair {
        self.hp
    }

    pub fn grid(&self) -> &Grid {
        self.window.grid()
    }

    /// Number of stored window samples per atom, summed over spatial offsets.
    pub fn stored_samples(&self) -> usize {
        self.atoms.iter().map(|a| a.values.len()).sum()
    }

    /// The atom `T^hbar(lambda) g` as a full state.
    pub fn atom(&self, idx: LatticeIndex) -> SampledState {
        heisenberg_shift(self.hp, self.lattice.point(idx), &self.window)
    }

    /// `c_lambda = <f, T^hbar(lambda) g>` for every lattice point.
    pub fn analysis(&self, f: &SampledState) -> Vec<Complex64> {
        assert_eq!(f.grid(), self.grid(), "state and system grids differ");
        let m = self.grid().len();
        let dx = self.grid().dx();
        let hbar = self.hp.hbar();
        let xs = &self.xs;
        let ps = &self.ps;
        let fv = f.values();
        let rows: Vec<Vec<Complex64>> = self
            .atoms
            .par_iter()
            .zip(xs.par_iter())
            .map(|(atom, &x0)| {
                let prod: Vec<Complex64> = atom
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, g)| fv[(atom.start + i) % m] * g.conj())
                    .collect();
                self.modulations
                    .iter()
                    .zip(ps)
                    .map(|(md, &p)| {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for (i, u) in prod.iter().enumerate() {
                            acc += u * md[(atom.start + i) % m].conj();
                        }
                        acc * Complex64::from_polar(dx, x0 * p / (2.0 * hbar))
                    })
                    .collect()
            })
            .collect();
        rows.into_iter().flatten().collect()
    }

    /// `sum_lambda c_lambda T^hbar(lambda) g`.
    pub fn synthesis(&self, c: &[Complex64]) -> SampledState {
        assert_eq!(c.len(), self.atom_count(), "coefficient count");
        let grid = self.grid();
        let m = grid.len();
        let hbar = self.hp.hbar();
        let side = self.ps.len();
        let xs = &self.xs;
        let ps = &self.ps;
        let partials: Vec<Vec<Complex64>> = self
            .atoms
            .par_iter()
            .enumerate()
            .map(|(k, atom)| {
                let row = &c[k * side..(k + 1) * side];
                let weights: Vec<Complex64> = row
                    .iter()
                    .zip(ps)
                    .map(|(ci, &p)| ci * Complex64::from_polar(1.0, -xs[k] * p / (2.0 * hbar)))
                    .collect();
                atom.values
                    .iter()
                    .enumerate()
                    .map(|(i, g)| {
                        let j = (atom.start + i) % m;
                        let mut acc = Complex64::new(0.0, 0.0);
                        for (w, md) in weights.iter().zip(&self.modulations) {
                            if w.re != 0.0 || w.im != 0.0 {
                                acc += w * md[j];
                            }
                        }
                        acc * g
                    })
                    .collect()
            })
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); m];
        for (atom, part) in self.atoms.iter().zip(partials) {
            for (i, v) in part.into_iter().enumerate() {
                out[(atom.start + i) % m] += v;
            }
        }
        SampledState::new(grid.clone(), out).expect("grid length")
    }
}

/// `S_{gamma,g} f = sum_lambda <f, T(lambda) g> T(lambda) gamma`, with `g`
/// the window of `analysis` and `gamma` the window of `synthesis`.
pub fn frame_operator(analysis: &GaborSystem, synthesis: &GaborSystem, f: &SampledState) -> SampledState {
    synthesis.synthesis(&analysis.analysis(f))
}

/// Rescales a system given at `hbar = 1/(2 pi)` to the target Planck
/// constant: window `D_{h^{-1/2}} g`, lattice `h^{1/2} Lambda`.
pub fn rescale_system(source: &GaborSystem, target: PlanckPair) -> Result<GaborSystem> {
    let standard = PlanckPair::standard();
    if (source.hp().hbar() - standard.hbar()).abs() > 1e-15 {
        return Err(invalid("source", "system must be given at hbar = 1/(2 pi)"));
    }
    if target == standard {
        return Ok(source.clone());
    }
    let s = target.sqrt_h();
    let window = dilate(1.0 / s, source.window())?;
    let lat = source.lattice();
    let lattice = Lattice::new(
        lat.alpha(),
        lat.beta(),
        lat.scale() * s,
        lat.k_max(),
        source.grid(),
    )?;
    GaborSystem::new(window, lattice, target)
}

/// Lattice parameters of the Gaussian family
/// `G^hbar(phi_0^hbar, h^{1/2} (alpha Z x beta Z))`, truncated to
/// `|k|, |l| <= k_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFrameSpec {
    pub alpha: f64,
    pub beta: f64,
    pub k_max: usize,
}

impl GaussianFrameSpec {
    pub fn new(alpha: f64, beta: f64, k_max: usize) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) || !(alpha * beta).is_finite() {
            return Err(invalid("alpha, beta", format!("({alpha}, {beta}) must be positive")));
        }
        if k_max == 0 {
            return Err(invalid("K", "must be at least 1"));
        }
        Ok(Self { alpha, beta, k_max })
    }

    /// The system at `hp` on `grid`.
    pub fn build(&self, hp: PlanckPair, grid: &Grid) -> Result<GaborSystem> {
        let window = crate::gabor::windows::gaussian_window(
            crate::gabor::windows::WindowKind::Phi0Hbar,
            hp,
            grid,
        )?;
        let lattice = Lattice::new(self.alpha, self.beta, hp.sqrt_h(), self.k_max, grid)?;
        GaborSystem::new(window, lattice, hp)
    }
}

/// Unit-norm pseudo-random superpositions of atoms at lattice points with
/// `|k|, |l| <= inner_fraction * K`: states supported well inside the
/// lattice hull.
pub fn random_hull_states(sys: &GaborSystem, count: usize, inner_fraction: f64, seed: u64) -> Result<Vec<SampledState>> {
    use rand::{Rng, SeedableRng};
    if !(inner_fraction > 0.0 && inner_fraction <= 1.0) {
        return Err(invalid("inner_fraction", format!("{inner_fraction} must lie in (0, 1]")));
    }
    let lat = sys.lattice();
    let reach = (inner_fraction * lat.k_max() as f64).floor() as i64;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let c: Vec<Complex64> = lat
            .indices()
            .map(|idx| {
                let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                if idx.k.abs() <= reach && idx.l.abs() <= reach {
                    z
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let f = sys.synthesis(&c);
        let n = f.norm();
        out.push(f.scaled(Complex64::new(1.0 / n, 0.0)));
    }
    Ok(out)
}

/// Stores the smallest circular interval outside which the state is below
/// `SUPPORT_FLOOR` times its maximum.
fn sparse_atom(s: &SampledState) -> Atom {
    let v = s.values();
    let m = v.len();
    let max = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let above: Vec<usize> = (0..m)
        .filter(|&j| v[j].norm() > SUPPORT_FLOOR * max)
        .collect();
    if above.is_empty() {
        return Atom {
            start: 0,
            values: Vec::new(),
        };
    }
    // largest circular run of dropped samples
    let mut best_gap = 0;
    let mut start = above[0];
    for w in 0..above.len() {
        let a = above[w];
        let b = if w + 1 < above.len() {
            above[w + 1]
        } else {
            above[0] + m
        };
        let gap = b - a - 1;
        if gap > best_gap {
            best_gap = gap;
            start = b % m;
        }
    }
    let len = m - best_gap;
    Atom {
        start,
        values: (0..len).map(|i| v[(start + i) % m]).collect(),
    }
}

/// Coefficients of a single lattice point.
pub fn indicator(lattice: &Lattice, idx: LatticeIndex) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(0.0, 0.0); lattice.len()];
    c[lattice.flat(idx)] = Complex64::new(1.0, 0.0);
    c
}

/// Euclidean inner product `sum a_i conj(b_i)` of coefficient arrays.
pub fn coefficient_inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

/// Lattice point nearest to `z` in the unscaled index sense.
pub fn nearest_index(lattice: &Lattice, z: PhasePoint) -> LatticeIndex {
    LatticeIndex {
        k: (z.x / (lattice.scale() * lattice.alpha())).round() as i64,
        l: (z.xi / (lattice.scale() * lattice.beta())).round() as i64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gabor::windows::{gaussian_window, WindowKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn system(hbar: f64, k: usize) -> GaborSystem {
        let grid = Grid::new(32.0, 2048).unwrap();
        let hp = PlanckPair::new(hbar).unwrap();
        let g = gaussian_window(WindowKind::Phi0Hbar, hp, &grid).unwrap();
        let lat = Lattice::new(0.5, 1.0, hp.sqrt_h(), k, &grid).unwrap();
        GaborSystem::new(g, lat, hp).unwrap()
    }

    fn random_coeffs(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn analysis_matches_direct_inner_products() {
        let sys = system(0.1, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = sys.synthesis(&random_coeffs(sys.lattice().len(), &mut rng));
        let c = sys.analysis(&f);
        for idx in sys.lattice().indices() {
            let direct = f.inner(&sys.atom(idx));
            assert!((c[sys.lattice().flat(idx)] - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn trivial_cases() {
        let sys = system(0.1, 3);
        let zero = SampledState::zeros(sys.grid());
        assert!(sys.analysis(&zero).iter().all(|c| c.norm() == 0.0));
        let c0 = vec![Complex64::new(0.0, 0.0); sys.lattice().len()];
        assert_eq!(sys.synthesis(&c0).norm(), 0.0);

        let c = sys.analysis(sys.window());
        let origin = sys.lattice().flat(LatticeIndex { k: 0, l: 0 });
        assert!((c[origin] - Complex64::new(sys.window().norm_sqr(), 0.0)).norm() < 1e-14);

        let s = sys.synthesis(&indicator(sys.lattice(), LatticeIndex { k: 0, l: 0 }));
        assert!(s.sub(sys.window()).norm() < 1e-14);
        let idx = LatticeIndex { k: 2, l: -1 };
        let s = sys.synthesis(&indicator(sys.lattice(), idx));
        assert!((s.norm() - 1.0).abs() < 1e-12);
        assert!(s.sub(&sys.atom(idx)).norm() < 1e-12);
    }

    #[test]
    fn on_lattice_atom_peaks_at_its_index() {
        let sys = system(0.1, 3);
        let idx0 = LatticeIndex { k: 1, l: 2 };
        let c = sys.analysis(&sys.atom(idx0));
        let at = sys.lattice().flat(idx0);
        assert!((c[at].norm() - sys.window().norm_sqr()).abs() < 1e-12);
        for (i, v) in c.iter().enumerate() {
            if i != at {
                assert!(v.norm() < c[at].norm());
            }
        }
    }

    #[test]
    fn analysis_synthesis_adjoint() {
        let sys = system(0.05, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..5 {
            let c = random_coeffs(sys.lattice().len(), &mut rng);
            let f = SampledState::from_fn(sys.grid(), |x| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    * (-x * x).exp()
            });
            let lhs = coefficient_inner(&sys.analysis(&f), &c);
            let rhs = f.inner(&sys.synthesis(&c));
            assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()));
        }
    }

    #[test]
    fn frame_operator_is_hermitian_psd() {
        let sys = system(0.1, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = sys.synthesis(&random_coeffs(sys.lattice().len(), &mut rng));
        let h = sys.synthesis(&random_coeffs(sys.lattice().len(), &mut rng));
        let sf = frame_operator(&sys, &sys, &f);
        let sh = frame_operator(&sys, &sys, &h);
        assert!((sf.inner(&h) - f.inner(&sh)).norm() < 1e-10);
        assert!(sf.inner(&f).re >= 0.0);
        assert!(frame_operator(&sys, &sys, &SampledState::zeros(sys.grid())).norm() == 0.0);
    }

    #[test]
    fn standard_target_is_identity() {
        let grid = Grid::new(32.0, 2048).unwrap();
        let hp = PlanckPair::standard();
        let g = gaussian_window(WindowKind::Psi0, hp, &grid).unwrap();
        let lat = Lattice::new(0.5, 1.0, 1.0, 4, &grid).unwrap();
        let sys = GaborSystem::new(g, lat, hp).unwrap();
        let same = rescale_system(&sys, hp).unwrap();
        assert_eq!(same.window(), sys.window());
        assert_eq!(same.lattice(), sys.lattice());

        let target = PlanckPair::new(0.1).unwrap();
        let r = rescale_system(&sys, target).unwrap();
        let phi = gaussian_window(WindowKind::Phi0Hbar, target, &grid).unwrap();
        assert!(r.window().sub(&phi).norm() < 1e-12);
        assert!((r.lattice().scale() - target.sqrt_h()).abs() < 1e-15);
    }

    #[test]
    fn sparse_atom_wraps() {
        let grid = Grid::new(10.0, 256).unwrap();
        let s = SampledState::from_fn(&grid, |x| {
            let d = (x - 4.9 + 5.0).rem_euclid(10.0) - 5.0;
            Complex64::new((-d * d * 20.0).exp(), 0.0)
        });
        let a = sparse_atom(&s);
        assert!(a.values.len() < 128);
        let mut back = vec![Complex64::new(0.0, 0.0); 256];
        for (i, v) in a.values.iter().enumerate() {
            back[(a.start + i) % 256] = *v;
        }
        let back = SampledState::new(grid, back).unwrap();
        assert!(back.sub(&s).norm() < 1e-14);
    }
}
