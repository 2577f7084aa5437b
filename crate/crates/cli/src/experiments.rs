//! The experiments: each turns a validated configuration into tables,
//! threshold checks and plot specifications.

use num_complex::Complex64;
use sctf_core::dynamics::{flow_map, integrate_flow, symplectic_defect, Catalog, HamiltonianSymbol};
use sctf_core::fio::{continuous_vs_discrete, decay_fit, gabor_matrix, off_lattice_pairs, sparsify, GaborMatrix};
use sctf_core::gabor::system::nearest_index;
use sctf_core::gabor::{
    canonical_dual_report, frame_bounds, gaussian_window, random_hull_states, reconstruction_error, FrameBounds,
    GaborSystem, GaussianFrameSpec, WindowKind,
};
use sctf_core::modulation::{hstft, mixed_norm, stft, PhaseSpaceField, PhaseSpaceSampling};
use sctf_core::propagators::experiments::{
    ErrorScalingRow, ResidualScalingReport, StateFamily, UniformBoundRow,
};
use sctf_core::propagators::split_step::{exact_split_step, validated_propagator};
use sctf_core::propagators::{error_scaling, residual_scaling, uniform_bound_experiment, GaussianBeam, Parametrix, ParametrixSetup};
use sctf_core::quantization::{dilate, heisenberg_shift};
use sctf_core::{Grid, PhasePoint, PlanckPair, PolynomialWeight, SampledState};

use crate::config::{ExperimentConfig, ExperimentKind, StateConfig};
use crate::error::CliError;
use crate::output::{Cell, Check, Outcome, PlotSpec, Table};

/// Runs the experiment of a validated configuration.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let ctx = Context::new(cfg)?;
    use ExperimentKind::*;
    match cfg.experiment {
        FrameBounds => ctx.frame_bounds(),
        DualWindow => ctx.dual_window(),
        Stft => ctx.stft(),
        ModNorm => ctx.mod_norm(),
        Flow => ctx.flow(),
        Beam => ctx.beam(),
        Parametrix => ctx.parametrix(),
        ErrorScaling => ctx.error_scaling(),
        ResidualScaling => ctx.residual_scaling(),
        GaborMatrix => ctx.gabor_matrix(),
        UniformBounds => ctx.uniform_bounds(),
    }
}

/// Initial errors with captured masses, and `(state, t, error)` rows.
type ParametrixCell = (Vec<(f64, f64)>, Vec<(usize, f64, f64)>);

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    grid: Grid,
    pairs: Vec<PlanckPair>,
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    let mut it = v.into_iter().peekable();
    if it.peek().is_none() {
        return f64::NAN;
    }
    it.fold(f64::NEG_INFINITY, |a, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) })
}

fn min_of(v: impl IntoIterator<Item = f64>) -> f64 {
    -max_of(v.into_iter().map(|x| -x))
}

/// `(max - min) / min` of positive values.
fn spread(v: &[f64]) -> f64 {
    let (lo, hi) = (min_of(v.iter().copied()), max_of(v.iter().copied()));
    (hi - lo) / lo
}

fn record_failure(out: &mut Outcome, hp: PlanckPair, e: impl std::fmt::Display) {
    let msg = format!("hbar = {}: {e}", hp.hbar());
    log::error!("{msg}");
    out.failures.push(msg);
}

fn coherent_state(hp: PlanckPair, grid: &Grid, z: PhasePoint) -> sctf_core::Result<SampledState> {
    let phi = gaussian_window(WindowKind::Phi0Hbar, hp, grid)?;
    Ok(heisenberg_shift(hp, z, &phi))
}

fn gaussian_state(hp: PlanckPair, grid: &Grid, center: f64, width: f64, momentum: f64) -> SampledState {
    let hbar = hp.hbar();
    let f = SampledState::from_fn(grid, |x| {
        let d = x - center;
        Complex64::from_polar((-d * d / (2.0 * width * width)).exp(), momentum * x / hbar)
    });
    let n = f.norm();
    f.scaled(Complex64::new(1.0 / n, 0.0))
}

impl<'a> Context<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self, CliError> {
        let grid = Grid::new(cfg.grid.length, cfg.grid.points)?;
        let pairs = cfg.hbar.iter().map(|&h| PlanckPair::new(h)).collect::<sctf_core::Result<_>>()?;
        Ok(Self { cfg, grid, pairs })
    }

    fn frame_spec(&self) -> Result<GaussianFrameSpec, CliError> {
        let lat = self.cfg.lattice.as_ref().expect("validated lattice");
        Ok(GaussianFrameSpec::new(lat.alpha, lat.beta, lat.k_max)?)
    }

    fn system(&self, hp: PlanckPair) -> sctf_core::Result<GaborSystem> {
        let lat = self.cfg.lattice.as_ref().expect("validated lattice");
        GaussianFrameSpec::new(lat.alpha, lat.beta, lat.k_max)?.build(hp, &self.grid)
    }

    fn hamiltonian(&self) -> Result<HamiltonianSymbol, CliError> {
        let h = self.cfg.hamiltonian.as_ref().expect("validated hamiltonian");
        Ok(HamiltonianSymbol::catalog(Catalog::from_name(&h.name, h.epsilon)?)?)
    }

    fn state_config(&self) -> &StateConfig {
        self.cfg.state.as_ref().expect("validated state")
    }

    fn launch_point(&self) -> PhasePoint {
        match self.state_config() {
            StateConfig::Coherent { x, xi } => PhasePoint::new(*x, *xi),
            _ => unreachable!("validated coherent state"),
        }
    }

    /// The configured test states at `hp`.
    fn states(&self, hp: PlanckPair) -> sctf_core::Result<Vec<SampledState>> {
        match self.state_config() {
            StateConfig::Coherent { x, xi } => Ok(vec![coherent_state(hp, &self.grid, PhasePoint::new(*x, *xi))?]),
            StateConfig::Gaussian {
                center,
                width,
                momentum,
            } => Ok(vec![gaussian_state(hp, &self.grid, *center, *width, *momentum)]),
            StateConfig::RandomHull {
                count,
                inner_fraction,
                seed,
            } => random_hull_states(&self.system(hp)?, *count, *inner_fraction, *seed),
        }
    }

    fn state_count(&self) -> usize {
        match self.state_config() {
            StateConfig::RandomHull { count, .. } => *count,
            _ => 1,
        }
    }

    fn sampling(&self) -> Result<PhaseSpaceSampling, CliError> {
        let s = self.cfg.sampling.as_ref().expect("validated sampling");
        Ok(PhaseSpaceSampling::symmetric(s.x_extent, s.xi_extent, s.dx, s.dxi)?)
    }

    fn time(&self) -> &crate::config::TimeConfig {
        self.cfg.time.as_ref().expect("validated time")
    }

    fn check(&self, name: &str) -> f64 {
        self.cfg.checks.require(name)
    }

    fn split_reference(&self, hp: PlanckPair, h: &HamiltonianSymbol, f: &SampledState, t: f64) -> sctf_core::Result<SampledState> {
        if t == 0.0 {
            return Ok(f.clone());
        }
        let sym = h
            .separable()
            .ok_or_else(|| sctf_core::Error::InvalidParameter {
                name: "hamiltonian",
                reason: "the split-step reference needs H = f(xi) + V(x)".into(),
            })?;
        Ok(exact_split_step(hp, &sym, f, t, self.time().split_dt.expect("validated split_dt"))?.state)
    }

    fn frame_bounds(&self) -> Result<Outcome, CliError> {
        let seed = self.cfg.seed.expect("validated seed");
        let mut out = Outcome::default();
        let mut header: Vec<&str> = FrameBounds::CSV_HEADER.to_vec();
        header.extend(["ratio", "iterations", "subspace_dim"]);
        let mut table = Table::new("frame_bounds", &header);
        let mut bounds = Vec::new();
        for &hp in &self.pairs {
            match self.system(hp).and_then(|sys| frame_bounds(&sys, seed)) {
                Ok(b) => {
                    log::info!("frame bounds at hbar {}: A {:.10} B {:.10}", hp.hbar(), b.a, b.b);
                    let mut row: Vec<Cell> = b.csv_row().into_iter().map(Cell::Text).collect();
                    row.extend([b.ratio().into(), b.iterations.into(), b.subspace_dim.into()]);
                    table.push(row);
                    bounds.push(b);
                }
                Err(e) => record_failure(&mut out, hp, e),
            }
        }
        let a: Vec<f64> = bounds.iter().map(|b| b.a).collect();
        let b: Vec<f64> = bounds.iter().map(|b| b.b).collect();
        out.checks.push(Check::at_most(
            "bound_spread",
            spread(&a).max(spread(&b)),
            self.check("max_bound_spread"),
            "frame_bounds.csv:A,B",
        ));
        out.checks.push(Check::at_least(
            "lower_bound",
            min_of(a.iter().copied()),
            self.check("min_lower_bound"),
            "frame_bounds.csv:A",
        ));
        out.plots.push(PlotSpec::profile("frame_bounds", "hbar", &["A", "B"], None, "Frame bounds against hbar"));
        out.tables.push(table);
        Ok(out)
    }

    fn dual_window(&self) -> Result<Outcome, CliError> {
        let mut out = Outcome::default();
        let mut rec = Table::new(
            "reconstruction",
            &["hbar", "state", "error", "cg_iterations", "cg_residual"],
        );
        let mut windows = Table::new("dual_window", &["hbar", "x", "x_scaled", "window", "dual_re", "dual_im"]);
        let mut errors = Vec::new();
        for &hp in &self.pairs {
            let cell = || -> sctf_core::Result<(Vec<f64>, sctf_core::gabor::CgReport, GaborSystem)> {
                let sys = self.system(hp)?;
                let report = canonical_dual_report(&sys)?;
                let dual = sys.with_window(report.solution.clone())?;
                let errs = self.states(hp)?.iter().map(|f| reconstruction_error(&sys, &dual, f)).collect();
                Ok((errs, report, sys))
            };
            match cell() {
                Ok((errs, report, sys)) => {
                    for (k, e) in errs.iter().enumerate() {
                        rec.push(vec![
                            hp.hbar().into(),
                            k.into(),
                            (*e).into(),
                            report.iterations.into(),
                            report.relative_residual.into(),
                        ]);
                    }
                    errors.extend(errs);
                    let s = hp.sqrt_h();
                    for (j, (g, d)) in sys.window().values().iter().zip(report.solution.values()).enumerate() {
                        let x = self.grid.x(j);
                        if (x / s).abs() <= 4.0 {
                            windows.push(vec![hp.hbar().into(), x.into(), (x / s).into(), g.re.into(), d.re.into(), d.im.into()]);
                        }
                    }
                }
                Err(e) => record_failure(&mut out, hp, e),
            }
        }
        out.checks.push(Check::at_most(
            "reconstruction_error",
            max_of(errors),
            self.check("max_reconstruction_error"),
            "reconstruction.csv:error",
        ));
        out.plots.push(PlotSpec::profile(
            "dual_window",
            "x_scaled",
            &["dual_re"],
            Some("hbar"),
            "Canonical dual window in scaled position",
        ));
        out.tables.extend([rec, windows]);
        Ok(out)
    }

    fn standard_window(&self) -> Result<SampledState, CliError> {
        Ok(gaussian_window(WindowKind::Psi0, PlanckPair::standard(), &self.grid)?)
    }

    fn stft(&self) -> Result<Outcome, CliError> {
        let mut out = Outcome::default();
        let sampling = self.sampling()?;
        let g = self.standard_window()?;
        let mut energy = Table::new("stft_energy", &["hbar", "state", "energy", "energy_defect"]);
        let mut defects = Vec::new();
        for (i, &hp) in self.pairs.iter().enumerate() {
            let cell = || -> sctf_core::Result<(Vec<SampledState>, Vec<PhaseSpaceField>)> {
                let states = self.states(hp)?;
                let fields = states.iter().map(|f| hstft(hp, &g, f, &sampling)).collect::<sctf_core::Result<_>>()?;
                Ok((states, fields))
            };
            match cell() {
                Ok((states, fields)) => {
                    for (k, (field, f)) in fields.iter().zip(&states).enumerate() {
                        let e = field.energy();
                        let defect = (e / (f.norm_sqr() * g.norm_sqr()) - 1.0).abs();
                        energy.push(vec![hp.hbar().into(), k.into(), e.into(), defect.into()]);
                        defects.push(defect);
                    }
                    let name = format!("stft_hbar{i}");
                    let mut t = Table::new(name.as_str(), &["x", "xi", "modulus", "re", "im"]);
                    let field = &fields[0];
                    for ix in 0..sampling.nx {
                        for k in 0..sampling.nxi {
                            let v = field.at(ix, k);
                            t.push(vec![sampling.x(ix).into(), sampling.xi(k).into(), v.norm().into(), v.re.into(), v.im.into()]);
                        }
                    }
                    out.plots.push(PlotSpec::heatmap(
                        &name,
                        "x",
                        "xi",
                        "modulus",
                        &format!("|semi-classical STFT| at hbar = {}", hp.hbar()),
                    ));
                    out.tables.push(t);
                }
                Err(e) => record_failure(&mut out, hp, e),
            }
        }
        out.checks.push(Check::at_most(
            "energy_defect",
            max_of(defects),
            self.check("max_energy_defect"),
            "stft_energy.csv:energy_defect",
        ));
        out.tables.insert(0, energy);
        Ok(out)
    }

    fn mod_norm(&self) -> Result<Outcome, CliError> {
        let mut out = Outcome::default();
        let sampling = self.sampling()?;
        let norm = self.cfg.norm.as_ref().expect("validated norm");
        let g = self.standard_window()?;
        let mut table = Table::new(
            "mod_norm",
            &["hbar", "s", "state", "norm_dilation", "norm_hstft", "route_discrepancy", "captured_mass", "series"],
        );
        let mut discrepancies = Vec::new();
        for &hp in &self.pairs {
            let cell = || -> sctf_core::Result<Vec<Vec<Cell>>> {
                let mut rows = Vec::new();
                for (k, f) in self.states(hp)?.iter().enumerate() {
                    let df = dilate(hp.sqrt_h(), f)?;
                    let v1 = stft(&g, &df, &sampling)?;
                    let v2 = hstft(hp, &g, f, &sampling)?;
                    let captured = v1.energy() / (df.norm_sqr() * g.norm_sqr());
                    for &s in &norm.s {
                        let m = PolynomialWeight::new(s);
                        let n1 = mixed_norm(&v1, norm.p, norm.q, &m)?;
                        let n2 = mixed_norm(&v2, norm.p, norm.q, &m)?;
                        let scale = n1.abs().max(n2.abs());
                        let d = if scale > 0.0 { (n1 - n2).abs() / scale } else { 0.0 };
                        rows.push(vec![
                            hp.hbar().into(),
                            s.into(),
                            k.into(),
                            n1.into(),
                            n2.into(),
                            d.into(),
                            captured.into(),
                            Cell::Text(format!("hbar={} s={s}", hp.hbar())),
                        ]);
                    }
                }
                Ok(rows)
            };
            match cell() {
                Ok(rows) => {
                    for row in rows {
                        if let Cell::Float(d) = row[5] {
                            discrepancies.push(d);
                        }
                        table.push(row);
                    }
                }
                Err(e) => record_failure(&mut out, hp, e),
            }
        }
        out.checks.push(Check::at_most(
            "route_discrepancy",
            max_of(discrepancies),
            self.check("max_route_discrepancy"),
            "mod_norm.csv:route_discrepancy",
        ));
        out.plots.push(PlotSpec::profile(
            "mod_norm",
            "state",
            &["norm_dilation"],
            Some("series"),
            "Semi-classical modulation norms",
        ));
        out.tables.push(table);
        Ok(out)
    }

    fn flow(&self) -> Result<Outcome, CliError> {
        let mut out = Outcome::default();
        let h = self.hamiltonian()?;
        let time = self.time();
        let z0 = self.launch_point();
        let traj = integrate_flow(&h, z0, time.t.expect("validated t"), time.beam_dt.expect("validated beam_dt"))?;
        let mut table = Table::new(
            "flow",
            &["t", "x", "xi", "s11", "s12", "s21", "s22", "delta", "energy", "symplectic_defect"],
        );
        let e0 = h.eval(0.0, z0);
        let mut drift: f64 = 0.0;
        let mut defect: f64 = 0.0;
        for (t, st) in traj.times().into_iter().zip(traj.states()) {
            let e = h.eval(t, st.z);
            let d = symplectic_defect(&st.s);
            drift = drift.max((e - e0).abs());
            defect = defect.max(d);
            table.push(vec![
                t.into(),
                st.z.x.into(),
                st.z.xi.into(),
                st.s[(0, 0)].into(),
                st.s[(0, 1)].into(),
                st.s[(1, 0)].into(),
                st.s[(1, 1)].into(),
                st.delta.into(),
                e.into(),
                d.into(),
            ]);
        }
        out.checks.push(Check::at_most(
            "symplectic_defect",
            defect,
            self.check("max_symplectic_defect"),
            "flow.csv:symplectic_defect",
        ));
        out.checks.push(Check::at_most(
            "energy_drift",
            drift,
            self.check("max_energy_drift"),
            "flow.csv:energy",
        ));
        out.plots.push(PlotSpec::profile("flow", "t", &["x", "xi"], None, "Classical trajectory"));
        out.tables.push(table);
        Ok(out)
    }

    fn beam(&self) -> Result<Outcome, CliError> {
        let mut out = Outcome::default();
        let h = self.hamiltonian()?;
        let time = self.time();
        let times = time.times.clone().expect("validated times");
        let beam_dt = time.beam_dt.expect("validated beam_dt");
        let t_max = max_of(times.iter().copied()).max(beam_dt);
        let z0 = self.launch_point();
        let mut table = Table::new("beam", &["hbar", "t", "error", "beam_norm"]);
        let mut errors = Vec::new();
        for &hp in &self.pairs {
            let cell = || -> sctf_core::Result<Vec<(f64, f64, f64)>> {
                let beam = GaussianBeam::new(hp, &h, z0, t_max, beam_dt)?;
                let f0 = coherent_state(hp, &self.grid, z0)?;
                let scale = f0.norm();
                times
                    .iter()
                    .map(|&t| {
                        let b = beam.evaluate(t, &self.grid)?;
                        let exact = self.split_reference(hp, &h, &f0, t)?;
                        Ok((t, b.sub(&exact).norm() / scale, b.norm()))
                    })
                    .collect()
            };
            match cell() {
                Ok(rows) => {
                    for (t, e, n) in rows {
                        table.push(vec![hp.hbar().into(), t.into(), e.into(), n.into()]);
                        errors.push(e);
                    }
                }
                Err(e) => record_failure(&mut out, hp, e),
            }
        }
        out.checks.push(Check::at_most(
            "beam_error",
            max_of(errors),
            self.check("max_beam_error"),
            "beam.csv:error",
        ));
        out.plots.push(PlotSpec::profile("beam", "t", &["error"], Some("hbar"), "Beam error against split-step"));
        out.tables.push(table);
        Ok(out)
    }

    fn parametrix(&self) -> Result<Outcome, CliError> {
        let mut out = Outcome::default();
        let h = self.hamiltonian()?;
        let time = self.time();
        let times = time.times.clone().expect("validated times");
        let beam_dt = time.beam_dt.expect("validated beam_dt");
        let t_max = max_of(times.iter().copied()).max(beam_dt);
        let mut initial = Table::new("parametrix_initial", &["hbar", "state", "initial_error", "captured_mass"]);
        let mut table = Table::new("parametrix", &["hbar", "state", "t", "error", "series"]);
        let (mut init_errors, mut errors) = (Vec::new(), Vec::new());
        for &hp in &self.pairs {
            let cell = || -> sctf_core::Result<ParametrixCell> {
                let par = Parametrix::new(self.system(hp)?, &h, t_max, beam_dt)?;
                let mut init = Vec::new();
                let mut rows = Vec::new();
                for (k, f) in self.states(hp)?.iter().enumerate() {
                    let scale = f.norm();
                    let p0 = par.apply(f, 0.0)?;
                    init.push((p0.state.sub(f).norm() / scale, p0.captured_mass));
                    for &t in &times {
                        let u = par.apply(f, t)?.state;
                        let exact = self.split_reference(hp, &h, f, t)?;
                        rows.push((k, t, u.sub(&exact).norm() / scale));
                    }
                }
                Ok((init, rows))
            };
            match cell() {
                Ok((init, rows)) => {
                    for (k, (e, m)) in init.into_iter().enumerate() {
                        initial.push(vec![hp.hbar().into(), k.into(), e.into(), m.into()]);
                        init_errors.push(e);
                    }
                    for (k, t, e) in rows {
                        let series = Cell::Text(format!("hbar={} state={k}", hp.hbar()));
                        table.push(vec![hp.hbar().into(), k.into(), t.into(), e.into(), series]);
                        errors.push(e);
                    }
                }
                Err(e) => record_failure(&mut out, hp, e),
            }
        }
        out.checks.push(Check::at_most(
            "initial_error",
            max_of(init_errors),
            self.check("max_initial_error"),
            "parametrix_initial.csv:initial_error",
        ));
        out.checks.push(Check::at_most(
            "parametrix_error",
            max_of(errors),
            self.check("max_parametrix_error"),
            "parametrix.csv:error",
        ));
        out.plots.push(PlotSpec::profile(
            "parametrix",
            "t",
            &["error"],
            Some("series"),
            "Parametrix error against split-step",
        ));
        out.tables.extend([initial, table]);
        Ok(out)
    }

    fn setup(&self) -> Result<ParametrixSetup, CliError> {
        let time = self.time();
        Ok(ParametrixSetup {
            grid: self.grid.clone(),
            frame: self.frame_spec()?,
            beam_dt: time.beam_dt.expect("validated beam_dt"),
            split_dt: time.split_dt.unwrap_or(f64::NAN),
        })
    }

    fn fit_table(name: &str, slope: f64, intercept: f64, rms: f64, points: usize) -> Table {
        let mut t = Table::new(name, &["slope", "intercept", "rms", "points"]);
        t.push(vec![slope.into(), intercept.into(), rms.into(), points.into()]);
        t
    }

    fn error_scaling(&self) -> Result<Outcome, CliError> {
        let mut out = Outcome::default();
        let h = self.hamiltonian()?;
        let setup = self.setup()?;
        let family = |hp: PlanckPair| -> sctf_core::Result<SampledState> { Ok(self.states(hp)?.remove(0)) };
        let t = self.time().t.expect("validated t");
        let report = match error_scaling(&self.cfg.hbar, &h, &setup, &family, t) {
            Ok(r) => r,
            Err(e) => {
                out.failures.push(format!("error scaling: {e}"));
                return Ok(self.failed_scaling(out, "error_scaling", &ErrorScalingRow::CSV_HEADER));
            }
        };
        let mut table = Table::new("error_scaling", &ErrorScalingRow::CSV_HEADER);
        for row in &report.rows {
            table.push(row.values().iter().map(|v| Cell::Float(*v)).collect());
        }
        let fit = report.fit;
        let (rlo, rhi) = report.ratio_range();
        out.checks.push(Check::at_least("slope_lower", fit.slope, self.check("slope_min"), "error_scaling_fit.csv:slope"));
        out.checks.push(Check::at_most("slope_upper", fit.slope, self.check("slope_max"), "error_scaling_fit.csv:slope"));
        out.checks.push(Check::at_least("ratio_lower", rlo, self.check("ratio_min"), "error_scaling.csv:ratio"));
        out.checks.push(Check::at_most("ratio_upper", rhi, self.check("ratio_max"), "error_scaling.csv:ratio"));
        out.plots.push(PlotSpec::loglog("error_scaling", "hbar", "error_T", "Parametrix error at T against hbar"));
        out.tables.push(table);
        out.tables.push(Self::fit_table("error_scaling_fit", fit.slope, fit.intercept, fit.rms, fit.points));
        Ok(out)
    }

    /// Empty tables and failing checks for a scaling experiment that could
    /// not produce its rows.
    fn failed_scaling(&self, mut out: Outcome, name: &str, header: &[&str]) -> Outcome {
        for c in crate::config::required_checks(self.cfg.experiment) {
            out.checks.push(Check::at_most(c, f64::NAN, self.check(c), &format!("{name}.csv")));
        }
        out.plots.push(PlotSpec::loglog(name, header[0], header[1], "no data"));
        out.tables.push(Table::new(name, header));
        out
    }

    fn residual_scaling(&self) -> Result<Outcome, CliError> {
        let mut out = Outcome::default();
        let h = self.hamiltonian()?;
        let time = self.time();
        let z0 = self.launch_point();
        let report = match residual_scaling(
            &self.cfg.hbar,
            &h,
            &self.grid,
            z0,
            time.t.expect("validated t"),
            time.beam_dt.expect("validated beam_dt"),
            time.dt_fd.expect("validated dt_fd"),
        ) {
            Ok(r) => r,
            Err(e) => {
                out.failures.push(format!("residual scaling: {e}"));
                return Ok(self.failed_scaling(out, "residual_scaling", &ResidualScalingReport::CSV_HEADER));
            }
        };
        let mut table = Table::new("residual_scaling", &ResidualScalingReport::CSV_HEADER);
        for row in report.csv_values() {
            table.push(row.iter().map(|v| Cell::Float(*v)).collect());
        }
        let fit = report.fit;
        out.checks.push(Check::at_least("slope_lower", fit.slope, self.check("slope_min"), "residual_scaling_fit.csv:slope"));
        out.checks.push(Check::at_most("slope_upper", fit.slope, self.check("slope_max"), "residual_scaling_fit.csv:slope"));
        out.plots.push(PlotSpec::loglog("residual_scaling", "hbar", "residual", "Single-beam residual against hbar"));
        out.tables.push(table);
        out.tables.push(Self::fit_table("residual_scaling_fit", fit.slope, fit.intercept, fit.rms, fit.points));
        Ok(out)
    }

    fn gabor_matrix(&self) -> Result<Outcome, CliError> {
        let mut out = Outcome::default();
        let h = self.hamiltonian()?;
        let sym = h.separable().ok_or_else(|| {
            CliError::Validation(vec!["hamiltonian: the propagator needs H = f(xi) + V(x)".into()])
        })?;
        let m = self.cfg.matrix.as_ref().expect("validated matrix");
        let time = self.time();
        let t = time.t.expect("validated t");
        let beam_dt = time.beam_dt.expect("validated beam_dt");
        let split_dt = time.split_dt.expect("validated split_dt");
        let factor = self.check("max_envelope_ratio");
        let chi = |z: PhasePoint| flow_map(&h, 0.0, t, z, beam_dt).unwrap_or(PhasePoint::new(f64::NAN, f64::NAN));
        let mut summary = Table::new(
            "gabor_matrix_summary",
            &[
                "hbar",
                "s_fit",
                "C_fit",
                "C_mean",
                "residual",
                "points",
                "stored",
                "kept_fraction",
                "application_error",
                "envelope_max_ratio",
            ],
        );
        let mut fits = Vec::new();
        for (i, &hp) in self.pairs.iter().enumerate() {
            let cell = || -> sctf_core::Result<(Vec<f64>, GaborMatrix)> {
                let sys = self.system(hp)?;
                let (prop, _) = validated_propagator(hp, &sym, sys.window(), t, split_dt)?;
                let n = (t / prop.dt()).round() as usize;
                let u = |f: &SampledState| {
                    let mut v = f.values().to_vec();
                    prop.advance(&mut v, n);
                    SampledState::new(f.grid().clone(), v)
                };
                let mat = gabor_matrix(&u, &sys, m.floor)?;
                let fit = decay_fit(&mat, &chi)?;
                let (sparse, comp) = sparsify(&mat, m.threshold, m.vectors, m.seed)?;
                let pairs = off_lattice_pairs(&sys, &chi, m.envelope_samples, m.inner_fraction, m.spread, m.seed);
                let env = continuous_vs_discrete(&u, &sys, &fit, &chi, &pairs, factor)?;
                log::info!(
                    "gabor matrix at hbar {}: s_fit {:.3} C_fit {:.4e} kept {:.4}",
                    hp.hbar(),
                    fit.s_fit,
                    fit.c_fit,
                    comp.kept_fraction
                );
                let row = vec![
                    hp.hbar(),
                    fit.s_fit,
                    fit.c_fit,
                    fit.c_mean,
                    fit.residual,
                    fit.points as f64,
                    mat.stored() as f64,
                    comp.kept_fraction,
                    comp.application_error,
                    env.max_ratio,
                ];
                Ok((row, sparse))
            };
            match cell() {
                Ok((row, sparse)) => {
                    fits.push(row.clone());
                    summary.push(row.into_iter().map(Cell::Float).collect());
                    let (entries, peaks) = self.matrix_tables(i, &sparse, &chi);
                    out.plots.push(PlotSpec::heatmap(
                        &entries.name,
                        "lambda",
                        "mu",
                        "magnitude",
                        &format!("|Gabor matrix| at hbar = {}", hp.hbar()),
                    ));
                    out.tables.extend([entries, peaks]);
                }
                Err(e) => record_failure(&mut out, hp, e),
            }
        }
        let col = |k: usize| fits.iter().map(|r| r[k]).collect::<Vec<f64>>();
        let c_fit = col(2);
        out.checks.extend([
            Check::at_least(
                "decay_exponent",
                min_of(col(1)),
                self.check("min_decay_exponent"),
                "gabor_matrix_summary.csv:s_fit",
            ),
            Check::at_most(
                "constant_spread",
                max_of(c_fit.iter().copied()) / min_of(c_fit.iter().copied()),
                self.check("max_constant_spread"),
                "gabor_matrix_summary.csv:C_fit",
            ),
            Check::at_most(
                "kept_fraction",
                max_of(col(7)),
                self.check("max_kept_fraction"),
                "gabor_matrix_summary.csv:kept_fraction",
            ),
            Check::at_most(
                "application_error",
                max_of(col(8)),
                self.check("max_application_error"),
                "gabor_matrix_summary.csv:application_error",
            ),
            Check::at_most(
                "envelope_ratio",
                max_of(col(9)),
                factor,
                "gabor_matrix_summary.csv:envelope_max_ratio",
            ),
        ]);
        out.tables.insert(0, summary);
        Ok(out)
    }

    /// Entries of the thresholded matrix with flat and lattice indices, and
    /// per column the largest entry next to the lattice point nearest to the
    /// image of the column under `chi`.
    fn matrix_tables(&self, i: usize, mat: &GaborMatrix, chi: &dyn Fn(PhasePoint) -> PhasePoint) -> (Table, Table) {
        let lat = mat.lattice();
        let mut entries = Table::new(
            format!("gabor_matrix_hbar{i}"),
            &["lambda", "mu", "lambda_k", "lambda_l", "mu_k", "mu_l", "magnitude"],
        );
        let mut peaks = Table::new(
            format!("gabor_matrix_peaks_hbar{i}"),
            &["lambda", "argmax_mu", "chi_mu", "peak_magnitude"],
        );
        for lambda in 0..mat.dim() {
            let li = lat.index(lambda);
            let mut best: Option<(usize, f64)> = None;
            for &(mu, v) in mat.column(lambda) {
                let mi = lat.index(mu);
                let a = v.norm();
                entries.push(vec![
                    lambda.into(),
                    mu.into(),
                    li.k.into(),
                    li.l.into(),
                    mi.k.into(),
                    mi.l.into(),
                    a.into(),
                ]);
                if best.is_none_or(|b| a > b.1) {
                    best = Some((mu, a));
                }
            }
            let image = nearest_index(lat, chi(lat.point(li)));
            let chi_mu = if lat.contains(image) { lat.flat(image) as i64 } else { -1 };
            if let Some((mu, a)) = best {
                peaks.push(vec![lambda.into(), mu.into(), chi_mu.into(), a.into()]);
            }
        }
        (entries, peaks)
    }

    fn uniform_bounds(&self) -> Result<Outcome, CliError> {
        let mut out = Outcome::default();
        let h = self.hamiltonian()?;
        let setup = self.setup()?;
        let norm = self.cfg.norm.as_ref().expect("validated norm");
        let sampling = self.sampling()?;
        let times = self.time().times.clone().expect("validated times");
        let families: Vec<Box<StateFamily<'_>>> = (0..self.state_count())
            .map(|k| {
                let f: Box<StateFamily<'_>> = Box::new(move |hp: PlanckPair| Ok(self.states(hp)?.swap_remove(k)));
                f
            })
            .collect();
        let refs: Vec<&StateFamily<'_>> = families.iter().map(|b| b.as_ref()).collect();
        let mut header: Vec<&str> = UniformBoundRow::CSV_HEADER.to_vec();
        header.push("series");
        let report = match uniform_bound_experiment(&self.cfg.hbar, &h, &setup, &norm.s, norm.p, &refs, &times, &sampling) {
            Ok(r) => r,
            Err(e) => {
                out.failures.push(format!("uniform bounds: {e}"));
                out.checks.push(Check::at_most("growth", f64::NAN, self.check("max_growth"), "uniform_bounds_growth.csv:growth"));
                out.tables.push(Table::new("uniform_bounds", &header));
                out.plots.push(PlotSpec::profile("uniform_bounds", "t", &["ratio"], Some("series"), "no data"));
                return Ok(out);
            }
        };
        let mut table = Table::new("uniform_bounds", &header);
        for row in &report.rows {
            let mut cells: Vec<Cell> = row.values().iter().map(|v| Cell::Float(*v)).collect();
            cells[3] = row.state.into();
            cells.push(Cell::Text(format!("hbar={} s={} state={}", row.hbar, row.s, row.state)));
            table.push(cells);
        }
        let mut growth = Table::new("uniform_bounds_growth", &["s", "growth"]);
        for (s, g) in &report.growth {
            growth.push(vec![(*s).into(), (*g).into()]);
        }
        out.checks.push(Check::at_most(
            "growth",
            report.max_growth(),
            self.check("max_growth"),
            "uniform_bounds_growth.csv:growth",
        ));
        out.plots.push(PlotSpec::profile(
            "uniform_bounds",
            "t",
            &["ratio"],
            Some("series"),
            "Modulation-norm ratios along the parametrix",
        ));
        out.tables.extend([table, growth]);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extremes_propagate_nan_and_empty() {
        assert!(max_of(Vec::<f64>::new()).is_nan());
        assert!(max_of([1.0, f64::NAN, 2.0]).is_nan());
        assert_eq!(max_of([1.0, 3.0, 2.0]), 3.0);
        assert_eq!(min_of([1.0, 3.0, 2.0]), 1.0);
        assert!((spread(&[2.0, 2.02]) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn gaussian_state_is_normalized() {
        let grid = Grid::new(16.0, 512).unwrap();
        let f = gaussian_state(PlanckPair::new(0.1).unwrap(), &grid, 0.5, 0.3, 0.2);
        assert!((f.norm() - 1.0).abs() < 1e-12);
    }
}
