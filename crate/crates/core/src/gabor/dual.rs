//! Canonical dual windows by conjugate gradients on the frame operator.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gabor::system::{frame_operator, GaborSystem};
use crate::phasespace::SampledState;

/// Relative residual at which the dual solve stops.
pub const DUAL_TOLERANCE: f64 = 1e-10;

/// Iteration cap of the dual solve.
pub const MAX_DUAL_ITERATIONS: usize = 2000;

/// Result of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgReport {
    pub solution: SampledState,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `S x = b` for the Hermitian positive semi-definite frame operator
/// `S = S_{g,g}` of `sys`, starting from zero.
pub fn conjugate_gradient(
    sys: &GaborSystem,
    b: &SampledState,
    tolerance: f64,
    max_iterations: usize,
) -> Result<CgReport> {
    let bnorm = b.norm();
    let mut x = SampledState::zeros(b.grid());
    if bnorm == 0.0 {
        return Ok(CgReport {
            solution: x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.norm_sqr();
    let mut best = 1.0;
    let mut since_best = 0;
    for it in 1..=max_iterations {
        let sp = frame_operator(sys, sys, &p);
        let psp = p.inner(&sp).re;
        if !(psp > 0.0) {
            return Err(Error::NoConvergence {
                what: "canonical dual (frame operator lost definiteness)",
                iterations: it,
                residual: rr.sqrt() / bnorm,
            });
        }
        let a = rr / psp;
        x.axpy(Complex64::new(a, 0.0), &p);
        r.axpy(Complex64::new(-a, 0.0), &sp);
        let rr_new = r.norm_sqr();
        let rel = rr_new.sqrt() / bnorm;
        if rel <= tolerance {
            // confirm with a true residual
            let true_rel = b.sub(&frame_operator(sys, sys, &x)).norm() / bnorm;
            if true_rel <= tolerance {
                return Ok(CgReport {
                    solution: x,
                    iterations: it,
                    relative_residual: true_rel,
                });
            }
            r = b.sub(&frame_operator(sys, sys, &x));
            p = r.clone();
            rr = r.norm_sqr();
            continue;
        }
        if rel < 0.5 * best {
            best = rel;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 200 {
                return Err(Error::NoConvergence {
                    what: "canonical dual (stagnation)",
                    iterations: it,
                    residual: rel,
                });
            }
        }
        let beta = rr_new / rr;
        let mut next = r.clone();
        next.axpy(Complex64::new(beta, 0.0), &p);
        p = next;
        rr = rr_new;
    }
    Err(Error::NoConvergence {
        what: "canonical dual",
        iterations: max_iterations,
        residual: rr.sqrt() / bnorm,
    })
}

/// `gamma = S^{-1} g` with `S` the frame operator of the lattice of `sys`
/// before truncation, folded onto the periodic grid (see
/// [`GaborSystem::covering`]). The truncated operator is singular off the
/// lattice hull and is never inverted.
pub fn canonical_dual(sys: &GaborSystem) -> Result<SampledState> {
    Ok(canonical_dual_report(sys)?.solution)
}

/// [`canonical_dual`] with the iteration count and final residual.
pub fn canonical_dual_report(sys: &GaborSystem) -> Result<CgReport> {
    let rep = conjugate_gradient(&sys.covering(), sys.window(), DUAL_TOLERANCE, MAX_DUAL_ITERATIONS)?;
    log::debug!(
        "canonical dual: {} CG iterations, residual {:.2e}",
        rep.iterations,
        rep.relative_residual
    );
    Ok(rep)
}

/// The system carrying the canonical dual window.
pub fn dual_system(sys: &GaborSystem) -> Result<GaborSystem> {
    sys.with_window(canonical_dual(sys)?)
}

/// `||S_{gamma,g} f - f|| / ||f||`, analysis with `analysis`, synthesis with
/// `synthesis`.
pub fn reconstruction_error(
    analysis: &GaborSystem,
    synthesis: &GaborSystem,
    f: &SampledState,
) -> f64 {
    frame_operator(analysis, synthesis, f).relative_distance(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gabor::system::{random_hull_states, GaussianFrameSpec};
    use crate::phasespace::{Grid, PlanckPair};

    fn system(hbar: f64) -> GaborSystem {
        let grid = Grid::new(24.0, 2048).unwrap();
        let a = std::f64::consts::FRAC_1_SQRT_2;
        GaussianFrameSpec::new(a, a, 8)
            .unwrap()
            .build(PlanckPair::new(hbar).unwrap(), &grid)
            .unwrap()
    }

    #[test]
    fn zero_right_hand_side() {
        let sys = system(0.1);
        let rep = conjugate_gradient(&sys, &SampledState::zeros(sys.grid()), 1e-10, 10).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.solution.norm(), 0.0);
    }

    #[test]
    fn dual_solves_the_covering_system() {
        let sys = system(0.1);
        let rep = canonical_dual_report(&sys).unwrap();
        assert!(rep.relative_residual <= DUAL_TOLERANCE);
        let cover = sys.covering();
        let back = frame_operator(&cover, &cover, &rep.solution);
        assert!(back.relative_distance(sys.window()) <= 2.0 * DUAL_TOLERANCE);
    }

    #[test]
    fn dual_reconstructs_interior_states() {
        let sys = system(0.1);
        let dual = dual_system(&sys).unwrap();
        for f in random_hull_states(&sys, 3, 0.5, 5).unwrap() {
            assert!(reconstruction_error(&sys, &dual, &f) <= 1e-8);
        }
    }

    #[test]
    fn dual_is_even_and_real() {
        let sys = system(0.2);
        let gamma = canonical_dual(&sys).unwrap();
        let v = gamma.values();
        let m = v.len();
        let peak = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for j in 1..m / 2 {
            assert!((v[m / 2 + j] - v[m / 2 - j]).norm() <= 1e-9 * peak);
            assert!(v[j].im.abs() <= 1e-9 * peak);
        }
    }
}
