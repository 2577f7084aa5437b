//! Scaling experiments for the beam parametrix: the propagation error and
//! residual exponents in `hbar`, and `hbar`-uniformity of semi-classical
//! modulation norms along the parametrix.

use crate::dynamics::HamiltonianSymbol;
use crate::error::{invalid, Result};
use crate::fit::{fit_loglog, LineFit};
use crate::gabor::windows::{gaussian_window, WindowKind};
use crate::gabor::GaussianFrameSpec;
use crate::modulation::{scmod_norm, PhaseSpaceSampling};
use crate::phasespace::{Grid, PhasePoint, PlanckPair, PolynomialWeight, SampledState};
use crate::propagators::beam::GaussianBeam;
use crate::propagators::parametrix::{residual, Parametrix, ResidualReport};
use crate::propagators::split_step::validated_propagator;

/// Grid, frame and step sizes shared by the parametrix experiments.
#[derive(Debug, Clone)]
pub struct ParametrixSetup {
    pub grid: Grid,
    pub frame: GaussianFrameSpec,
    /// Step of the classical trajectories behind the beams.
    pub beam_dt: f64,
    /// Initial step of the self-converged split-step reference.
    pub split_dt: f64,
}

/// Initial states as a function of the Planck constant.
pub type StateFamily<'a> = dyn Fn(PlanckPair) -> Result<SampledState> + Sync + 'a;

fn check_hbars(hbars: &[f64]) -> Result<Vec<PlanckPair>> {
    if hbars.len() < 2 {
        return Err(invalid("hbar", "at least two values are needed for a fit"));
    }
    hbars.iter().map(|&h| PlanckPair::new(h)).collect()
}

fn relative_error(a: &SampledState, b: &SampledState, scale: f64) -> f64 {
    a.sub(b).norm() / scale
}

/// One Planck constant of [`error_scaling`].
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorScalingRow {
    pub hbar: f64,
    /// `||U^(0)(T) f - U(T) f|| / ||f||`.
    pub error_t: f64,
    /// The same at `2 T`.
    pub error_2t: f64,
    pub ratio: f64,
    /// `||U^(0)(0) f - f|| / ||f||`.
    pub initial_error: f64,
    pub captured_mass: f64,
    pub split_step_dt: f64,
    pub self_convergence: f64,
}

impl ErrorScalingRow {
    pub const CSV_HEADER: [&'static str; 8] = [
        "hbar",
        "error_T",
        "error_2T",
        "ratio",
        "initial_error",
        "captured_mass",
        "split_step_dt",
        "self_convergence",
    ];

    pub fn values(&self) -> [f64; 8] {
        [
            self.hbar,
            self.error_t,
            self.error_2t,
            self.ratio,
            self.initial_error,
            self.captured_mass,
            self.split_step_dt,
            self.self_convergence,
        ]
    }
}

/// Parametrix error against the split-step reference over a list of Planck
/// constants, with the log-log fit of `error_T` against `hbar`.
#[derive(Debug, Clone)]
pub struct ErrorScalingReport {
    pub t: f64,
    pub rows: Vec<ErrorScalingRow>,
    pub fit: LineFit,
}

impl ErrorScalingReport {
    /// Whether `error_T` does not increase with `hbar` decreasing.
    pub fn monotone(&self) -> bool {
        let mut rows = self.rows.clone();
        rows.sort_by(|a, b| a.hbar.total_cmp(&b.hbar));
        rows.windows(2).all(|w| w[0].error_t <= w[1].error_t)
    }

    pub fn ratio_range(&self) -> (f64, f64) {
        let lo = self.rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        let hi = self.rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// Runs the parametrix of `h` on `f0(hp)` to `T` and `2 T` for each Planck
/// constant and compares with the self-converged split-step solution.
pub fn error_scaling(
    hbars: &[f64],
    h: &HamiltonianSymbol,
    setup: &ParametrixSetup,
    f0: &StateFamily<'_>,
    t: f64,
) -> Result<ErrorScalingReport> {
    if !(t > 0.0) {
        return Err(invalid("T", format!("{t} must be positive")));
    }
    let sym = h.separable().ok_or_else(|| {
        invalid("hamiltonian", "the split-step reference needs H = f(xi) + V(x)")
    })?;
    let mut rows = Vec::with_capacity(hbars.len());
    for hp in check_hbars(hbars)? {
        let f = f0(hp)?;
        let scale = f.norm();
        if scale == 0.0 {
            return Err(invalid("f0", "initial state is zero"));
        }
        let sys = setup.frame.build(hp, &setup.grid)?;
        let par = Parametrix::new(sys, h, 2.0 * t, setup.beam_dt)?;
        let (prop, conv) = validated_propagator(hp, &sym, &f, 2.0 * t, setup.split_dt)?;
        let exact = prop.evolve_to(&f, &[t, 2.0 * t])?;
        let start = par.apply(&f, 0.0)?;
        let p1 = par.apply(&f, t)?;
        let p2 = par.apply(&f, 2.0 * t)?;
        let error_t = relative_error(&p1.state, &exact[0], scale);
        let error_2t = relative_error(&p2.state, &exact[1], scale);
        log::info!("error scaling: hbar {} e(T) {error_t:.4e} e(2T) {error_2t:.4e}", hp.hbar());
        rows.push(ErrorScalingRow {
            hbar: hp.hbar(),
            error_t,
            error_2t,
            ratio: error_2t / error_t,
            initial_error: relative_error(&start.state, &f, scale),
            captured_mass: start.captured_mass,
            split_step_dt: prop.dt(),
            self_convergence: conv,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.hbar).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.error_t).collect();
    let fit = fit_loglog(&xs, &ys)?;
    Ok(ErrorScalingReport { t, rows, fit })
}

/// Single-beam residuals over a list of Planck constants.
#[derive(Debug, Clone)]
pub struct ResidualScalingReport {
    pub z0: PhasePoint,
    pub rows: Vec<(f64, ResidualReport)>,
    pub fit: LineFit,
}

impl ResidualScalingReport {
    pub const CSV_HEADER: [&'static str; 6] = ["hbar", "t", "dt_fd", "residual", "extrapolated", "fd_error"];

    pub fn csv_values(&self) -> Vec<[f64; 6]> {
        self.rows
            .iter()
            .map(|(hbar, r)| [*hbar, r.t, r.dt_fd, r.residual, r.extrapolated, r.fd_error])
            .collect()
    }
}

/// Residual of the beam launched at `z0`, evaluated at time `t`, for each
/// Planck constant, with the log-log fit of the residual against `hbar`.
pub fn residual_scaling(
    hbars: &[f64],
    h: &HamiltonianSymbol,
    grid: &Grid,
    z0: PhasePoint,
    t: f64,
    beam_dt: f64,
    dt_fd: f64,
) -> Result<ResidualScalingReport> {
    let sym = h.separable().ok_or_else(|| {
        invalid("hamiltonian", "the residual needs H = f(xi) + V(x)")
    })?;
    if !(t > 2.0 * dt_fd) {
        return Err(invalid("t", format!("{t} must exceed 2 dt_fd")));
    }
    let mut rows = Vec::with_capacity(hbars.len());
    for hp in check_hbars(hbars)? {
        let beam = GaussianBeam::new(hp, h, z0, t + 2.0 * dt_fd + beam_dt, beam_dt)?;
        let path = |s: f64| beam.evaluate(s, grid);
        let r = residual(hp, &sym, &path, t, dt_fd)?;
        log::info!("residual scaling: hbar {} residual {:.4e}", hp.hbar(), r.residual);
        rows.push((hp.hbar(), r));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.residual).collect();
    let fit = fit_loglog(&xs, &ys)?;
    Ok(ResidualScalingReport { z0, rows, fit })
}

/// One cell of [`uniform_bound_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct UniformBoundRow {
    pub hbar: f64,
    pub s: f64,
    pub t: f64,
    pub state: usize,
    /// `||U^(0)(t) f||_{M^{p,hbar}_{v_s}} / ||f||_{M^{p,hbar}_{v_s}}`.
    pub ratio: f64,
    pub route_discrepancy: f64,
}

impl UniformBoundRow {
    pub const CSV_HEADER: [&'static str; 6] = ["hbar", "s", "t", "state", "ratio", "route_discrepancy"];

    pub fn values(&self) -> [f64; 6] {
        [self.hbar, self.s, self.t, self.state as f64, self.ratio, self.route_discrepancy]
    }
}

/// Norm ratios of the parametrix and the growth indicator per weight.
#[derive(Debug, Clone)]
pub struct UniformBoundReport {
    pub rows: Vec<UniformBoundRow>,
    /// Per weight exponent `s`: the largest ratio at the smallest `hbar`
    /// divided by the largest ratio at the largest `hbar`.
    pub growth: Vec<(f64, f64)>,
}

impl UniformBoundReport {
    pub fn max_growth(&self) -> f64 {
        self.growth.iter().map(|g| g.1).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Tabulates `||U^(0)(t) f|| / ||f||` in `M^{p,hbar}_{v_s}` over Planck
/// constants, weights, times and states. Norms are taken through the
/// dilation route on `sampling` (unscaled phase-space coordinates) with the
/// standard window `psi_0`.
#[allow(clippy::too_many_arguments)]
pub fn uniform_bound_experiment(
    hbars: &[f64],
    h: &HamiltonianSymbol,
    setup: &ParametrixSetup,
    s_list: &[f64],
    p: f64,
    states: &[&StateFamily<'_>],
    times: &[f64],
    sampling: &PhaseSpaceSampling,
) -> Result<UniformBoundReport> {
    if s_list.is_empty() || states.is_empty() || times.is_empty() {
        return Err(invalid("uniform bounds", "weights, states and times must be nonempty"));
    }
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    if times.iter().any(|t| !(*t >= 0.0)) {
        return Err(invalid("times", "must be nonnegative"));
    }
    let pairs = check_hbars(hbars)?;
    let g = gaussian_window(WindowKind::Psi0, PlanckPair::standard(), &setup.grid)?;
    let mut rows = Vec::new();
    for &hp in &pairs {
        let sys = setup.frame.build(hp, &setup.grid)?;
        let par = Parametrix::new(sys, h, t_max.max(setup.beam_dt), setup.beam_dt)?;
        for (k, family) in states.iter().enumerate() {
            let f = family(hp)?;
            for &s in s_list {
                let weight = PolynomialWeight::new(s);
                let base = scmod_norm(hp, p, p, &weight, &g, &f, sampling)?;
                if base.norm == 0.0 {
                    return Err(invalid("states", "a test state has zero norm"));
                }
                for &t in times {
                    let u = par.apply(&f, t)?.state;
                    let r = scmod_norm(hp, p, p, &weight, &g, &u, sampling)?;
                    rows.push(UniformBoundRow {
                        hbar: hp.hbar(),
                        s,
                        t,
                        state: k,
                        ratio: r.norm / base.norm,
                        route_discrepancy: r.route_discrepancy.max(base.route_discrepancy),
                    });
                }
            }
        }
    }
    let smallest = pairs.iter().map(|p| p.hbar()).fold(f64::INFINITY, f64::min);
    let largest = pairs.iter().map(|p| p.hbar()).fold(f64::NEG_INFINITY, f64::max);
    let max_at = |hbar: f64, s: f64| {
        rows.iter()
            .filter(|r| r.hbar == hbar && r.s == s)
            .map(|r| r.ratio)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let growth = s_list
        .iter()
        .map(|&s| (s, max_at(smallest, s) / max_at(largest, s)))
        .collect::<Vec<_>>();
    if growth.iter().any(|g| !g.1.is_finite()) {
        return Err(invalid("uniform bounds", "a norm ratio is not finite"));
    }
    Ok(UniformBoundReport { rows, growth })
}
