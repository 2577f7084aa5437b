//! Independent oracles for frame bounds, duals, the dilation correspondence
//! and the Gabor-matrix rescaling identity, plus frozen reference values.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};

use sctf_core::dynamics::{flow_map, Catalog, HamiltonianSymbol};
use sctf_core::fio::{chirp_operator, decay_fit, gabor_matrix, modulus_discrepancy, GaborMatrix};
use sctf_core::gabor::{
    canonical_dual, dual_system, frame_bounds, random_hull_states, reconstruction_error, GaborSystem,
    GaussianFrameSpec,
};
use sctf_core::propagators::split_step::validated_propagator;
use sctf_core::quantization::dilate;
use sctf_core::{Grid, PhasePoint, PlanckPair, SampledState};

const STANDARD_HBAR: f64 = 1.0 / (2.0 * PI);

/// Frame bounds of `{e^{2 pi i l beta x} g(x - k alpha)}` for
/// `g = 2^{1/4} e^{-pi x^2}`, `alpha = 1/2`, `beta = 1`. At this density a
/// shift by `1/beta` is a shift by two lattice steps, so at fixed `x` the
/// frame operator acts on `(f(x - j))_j` as a Laurent matrix. Its spectrum is
/// the range of the symbol `sum_n c_n(x) e^{i n theta}` with
/// `c_n(x) = sum_k g(x - k/2) g(x - n - k/2)`.
fn periodic_oracle() -> (f64, f64) {
    let g = |x: f64| 2f64.powf(0.25) * (-PI * x * x).exp();
    let (nx, nt) = (400, 800);
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for ix in 0..nx {
        let x = 0.5 * ix as f64 / nx as f64;
        let c: Vec<(f64, f64)> = (-10..=10)
            .map(|n| {
                let n = n as f64;
                let cn = (-40..=40).map(|k| g(x - 0.5 * k as f64) * g(x - n - 0.5 * k as f64)).sum();
                (n, cn)
            })
            .collect();
        for it in 0..nt {
            let theta = 2.0 * PI * it as f64 / nt as f64;
            let s: f64 = c.iter().map(|(n, cn)| cn * (n * theta).cos()).sum();
            lo = lo.min(s);
            hi = hi.max(s);
        }
    }
    (lo, hi)
}

fn half_density() -> GaussianFrameSpec {
    GaussianFrameSpec::new(0.5, 1.0, 12).unwrap()
}

#[test]
fn periodic_oracle_brackets_the_hull_estimate() {
    let (a, b) = periodic_oracle();
    assert!((a - 1.171556532608).abs() < 1e-10, "{a}");
    assert!((b - 2.849594282364).abs() < 1e-10, "{b}");
    let grid = Grid::new(32.0, 2048).unwrap();
    let sys = half_density().build(PlanckPair::standard(), &grid).unwrap();
    let fb = frame_bounds(&sys, 7).unwrap();
    assert!(a <= fb.a && fb.a <= fb.b && fb.b <= b * (1.0 + 1e-12), "{fb:?}");
}

#[test]
fn frozen_hull_bounds() {
    let grid = Grid::new(32.0, 2048).unwrap();
    let fb = frame_bounds(&half_density().build(PlanckPair::standard(), &grid).unwrap(), 7).unwrap();
    assert!((fb.a - 1.2398484051).abs() < 1e-9, "{}", fb.a);
    assert!((fb.b - 2.7809982905).abs() < 1e-9, "{}", fb.b);
}

#[test]
fn bounds_agree_across_planck_constants() {
    let grid = Grid::new(32.0, 4096).unwrap();
    let reference = frame_bounds(&half_density().build(PlanckPair::standard(), &grid).unwrap(), 7).unwrap();
    for hbar in [0.5, 0.1, 0.01] {
        let fb = frame_bounds(&half_density().build(PlanckPair::new(hbar).unwrap(), &grid).unwrap(), 7).unwrap();
        assert!((fb.a - reference.a).abs() / reference.a < 0.01, "hbar {hbar}: {fb:?}");
        assert!((fb.b - reference.b).abs() / reference.b < 0.01, "hbar {hbar}: {fb:?}");
    }
}

#[test]
fn critical_density_loses_the_lower_bound() {
    let grid = Grid::new(64.0, 8192).unwrap();
    let spec = GaussianFrameSpec::new(1.0, 1.0, 24).unwrap();
    let fb = frame_bounds(&spec.build(PlanckPair::standard(), &grid).unwrap(), 7).unwrap();
    assert!(fb.ratio() < 1e-3, "{fb:?}");
}

#[test]
fn reconstruction_holds_in_both_orders() {
    let grid = Grid::new(64.0, 8192).unwrap();
    let hp = PlanckPair::new(0.1).unwrap();
    let sys = GaussianFrameSpec::new(0.5, 1.0, 28).unwrap().build(hp, &grid).unwrap();
    let dual = dual_system(&sys).unwrap();
    let probe = half_density().build(hp, &grid).unwrap();
    for f in random_hull_states(&probe, 5, 0.5, 11).unwrap() {
        assert!(reconstruction_error(&sys, &dual, &f) <= 1e-8);
        assert!(reconstruction_error(&dual, &sys, &f) <= 1e-8);
    }
}

#[test]
fn supercritical_density_breaks_reconstruction() {
    let grid = Grid::new(32.0, 2048).unwrap();
    let side = 1.05f64.sqrt();
    let sys = GaussianFrameSpec::new(side, side, 12)
        .unwrap()
        .build(PlanckPair::standard(), &grid)
        .unwrap();
    let probe = half_density().build(PlanckPair::standard(), &grid).unwrap();
    let f = &random_hull_states(&probe, 1, 0.5, 3).unwrap()[0];
    match dual_system(&sys) {
        Err(_) => {}
        Ok(dual) => assert!(reconstruction_error(&sys, &dual, f) > 1e-2),
    }
}

#[test]
fn rescaled_dual_is_the_dual_of_the_rescaled_system() {
    let grid = Grid::new(32.0, 4096).unwrap();
    let standard = half_density().build(PlanckPair::standard(), &grid).unwrap();
    let gamma = canonical_dual(&standard).unwrap();
    for hbar in [0.1, 0.01] {
        let hp = PlanckPair::new(hbar).unwrap();
        let direct = canonical_dual(&half_density().build(hp, &grid).unwrap()).unwrap();
        let mapped = dilate(1.0 / hp.sqrt_h(), &gamma).unwrap();
        assert!(direct.relative_distance(&mapped) <= 1e-6, "hbar {hbar}");
    }
}

fn harmonic_matrix(sys: &GaborSystem) -> GaborMatrix {
    let h = HamiltonianSymbol::catalog(Catalog::Harmonic).unwrap();
    let sym = h.separable().unwrap();
    let (prop, _) = validated_propagator(sys.hp(), &sym, sys.window(), FRAC_PI_4, 1e-2).unwrap();
    let n = (FRAC_PI_4 / prop.dt()).round() as usize;
    let u = |f: &SampledState| {
        let mut v = f.values().to_vec();
        prop.advance(&mut v, n);
        SampledState::new(f.grid().clone(), v)
    };
    gabor_matrix(&u, sys, 1e-14).unwrap()
}

#[test]
fn harmonic_gabor_matrix_is_planck_invariant() {
    let grid = Grid::new(32.0, 2048).unwrap();
    let spec = GaussianFrameSpec::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2, 6).unwrap();
    let standard = harmonic_matrix(&spec.build(PlanckPair::standard(), &grid).unwrap());
    let scaled = harmonic_matrix(&spec.build(PlanckPair::new(0.1).unwrap(), &grid).unwrap());
    assert!(modulus_discrepancy(&standard, &scaled).unwrap() <= 1e-8);

    // the rotation is linear, so the rescaled classical image is the image itself
    let h = HamiltonianSymbol::catalog(Catalog::Harmonic).unwrap();
    let z = PhasePoint::new(0.7, -0.3);
    let chi = flow_map(&h, 0.0, FRAC_PI_4, z, 1e-3).unwrap();
    let r = (0.1f64 / STANDARD_HBAR).sqrt();
    let rescaled = flow_map(&h, 0.0, FRAC_PI_4, z.scale(r), 1e-3).unwrap().scale(1.0 / r);
    assert!((chi - rescaled).norm() < 1e-12);
}

#[test]
fn chirp_fails_the_decay_fit_against_the_identity() {
    let grid = Grid::new(32.0, 2048).unwrap();
    let hp = PlanckPair::new(0.1).unwrap();
    let sys = GaussianFrameSpec::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2, 6).unwrap().build(hp, &grid).unwrap();
    let h = HamiltonianSymbol::catalog(Catalog::Harmonic).unwrap();
    let rotation = |z: PhasePoint| flow_map(&h, 0.0, FRAC_PI_4, z, 1e-3).unwrap();
    let fio = decay_fit(&harmonic_matrix(&sys), &rotation).unwrap();
    let chirp = chirp_operator(hp, 1.0);
    let sheared = decay_fit(&gabor_matrix(&chirp, &sys, 1e-14).unwrap(), &|z| z).unwrap();
    assert!(sheared.s_fit < 0.5 * fio.s_fit, "chirp {} against {}", sheared.s_fit, fio.s_fit);
}
