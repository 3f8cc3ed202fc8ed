//! Config-driven experiments behind the command-line subcommands. Each one
//! writes its files into the configured output directory and returns a
//! key/value summary plus a terminal status.

use crate::config::{ConfigError, ConfigErrors, Experiment, GeometryKind, ProfileKind, SimConfig};
use crate::deturck::{deturck_step_with, DeTurckState};
use crate::error::{HmcfError, Result};
use crate::fit::{fit_exponent, halving_orders};
use crate::flow::{cfl_dt, Diagnostics, FlowState, Hmcf, RadialBandBoundary, Stepper};
use crate::geometry::{build_cache, compute_metric};
use crate::grid::{Immersion, Vec3};
use crate::identities::{
    convergence_reports, radial_family_triple, simulated_triple, ResidualContext, SnapshotTriple,
};
use crate::io::{format_number, trajectory_table, write_mesh_file, Cell, CsvTable};
use crate::minkowski::{det_drift, det_history, limit_comparison, rhs_scaling, Extremal};
use crate::radial::{
    apex_radius, classify_radial_phase, collapse_time_quadrature, integrate_radial, RadialEvent, RadialPhase,
    RadialState, RadialTrajectory,
};
use crate::shapes::Shape;
use crate::stability::{
    epsilon_scaling, graph_domain, graph_immersion, graph_metric, reduced_scaling, truncation_scaling, Profile,
    ScalingSetup,
};
use std::f64::consts::TAU;
use std::path::PathBuf;

/// Terminal status of an experiment, mapped to the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Finished,
    Collapse,
    BlowUp,
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Finished => 0,
            Status::Collapse => 2,
            Status::BlowUp => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Status::Finished => "finished",
            Status::Collapse => "collapse",
            Status::BlowUp => "blow_up",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub status: Status,
    /// Ordered `(key, value)` pairs, also written to `summary.csv`.
    pub summary: Vec<(String, String)>,
    pub files: Vec<PathBuf>,
}

/// Exit code for configuration problems.
pub const EXIT_CONFIG: i32 = 64;

fn config_error(key: &str, message: impl Into<String>) -> HmcfError {
    HmcfError::Config(ConfigErrors(vec![ConfigError::Validation {
        key: key.into(),
        message: message.into(),
    }]))
}

struct Output<'a> {
    cfg: &'a SimConfig,
    summary: Vec<(String, String)>,
    files: Vec<PathBuf>,
}

impl<'a> Output<'a> {
    fn new(cfg: &'a SimConfig, experiment: Experiment) -> Result<Self> {
        std::fs::create_dir_all(&cfg.output_dir)?;
        let mut out = Output {
            cfg,
            summary: Vec::new(),
            files: Vec::new(),
        };
        out.text("experiment", experiment.name());
        Ok(out)
    }

    fn text(&mut self, key: &str, value: impl Into<String>) {
        self.summary.push((key.into(), value.into()));
    }

    fn num(&mut self, key: &str, value: f64) {
        let v = format_number(value, self.cfg.precision);
        self.text(key, v);
    }

    fn opt(&mut self, key: &str, value: Option<f64>) {
        match value {
            Some(v) => self.num(key, v),
            None => self.text(key, "none"),
        }
    }

    fn table(&mut self, name: &str, table: &CsvTable) -> Result<()> {
        let path = self.cfg.output_dir.join(name);
        table.write_file(&path, self.cfg.precision)?;
        self.files.push(path);
        Ok(())
    }

    fn mesh(&mut self, name: &str, im: &Immersion) -> Result<()> {
        let path = self.cfg.output_dir.join(name);
        write_mesh_file(&path, im)?;
        self.files.push(path);
        Ok(())
    }

    fn finish(mut self, status: Status) -> Result<Outcome> {
        self.text("status", status.name());
        let mut table = CsvTable::new(&["key", "value"]);
        for (k, v) in &self.summary {
            table.push(vec![k.as_str().into(), v.as_str().into()]);
        }
        self.table("summary.csv", &table)?;
        Ok(Outcome {
            status,
            summary: self.summary,
            files: self.files,
        })
    }
}

/// Runs one experiment; the config's `experiment` key, when present, must agree.
pub fn run_experiment(experiment: Experiment, cfg: &SimConfig) -> Result<Outcome> {
    if let Some(e) = cfg.experiment {
        if e != experiment {
            return Err(config_error(
                "experiment",
                format!("= {} does not match the `{}` subcommand", e.name(), experiment.name()),
            ));
        }
    }
    match experiment {
        Experiment::Simulate => simulate(cfg),
        Experiment::Oracle => oracle(cfg),
        Experiment::Verify => verify(cfg),
        Experiment::Minkowski => minkowski(cfg),
        Experiment::Stability => stability(cfg),
    }
}

fn analytic_shape(cfg: &SimConfig) -> Result<Shape> {
    cfg.shape()
        .ok_or_else(|| config_error("geometry", "= graph is only available to the stability experiment"))
}

fn radial_oracle(cfg: &SimConfig, c: f64, t_end: f64) -> Result<RadialTrajectory> {
    integrate_radial(RadialState::new(cfg.r0, cfg.r1, c), t_end, cfg.ode_tol)
}

/// Snapshot bookkeeping for a flow run.
struct Recorder {
    every: usize,
    snapshots: Vec<Diagnostics>,
    last_step: Option<usize>,
    oracle: Option<RadialTrajectory>,
    /// Radius comparisons stop at this time.
    compare_until: f64,
    max_radius_error: f64,
    max_spread: f64,
    deturck_rows: CsvTable,
    deturck_max: f64,
}

impl Recorder {
    fn observe(&mut self, fs: &FlowState, ds: Option<&DeTurckState>, force: bool) {
        if let Some(tr) = &self.oracle {
            if fs.t <= self.compare_until {
                if let Some(s) = tr.sample(fs.t) {
                    let radii = fs.radii();
                    for r in &radii {
                        self.max_radius_error = self.max_radius_error.max((r - s.r).abs() / s.r);
                    }
                    let d = fs.diagnostics();
                    self.max_spread = self.max_spread.max(d.r_spread / d.r_mean);
                }
            }
        }
        if let Some(ds) = ds {
            self.deturck_max = self.deturck_max.max(ds.identity_deviation());
        }
        if (fs.step % self.every == 0 || force) && self.last_step != Some(fs.step) {
            self.snapshots.push(fs.diagnostics());
            self.last_step = Some(fs.step);
            if let Some(ds) = ds {
                self.deturck_rows.push(vec![fs.t.into(), ds.identity_deviation().into()]);
            }
        }
    }
}

/// Plain (or DeTurck-coupled) flow from the configured shape; writes the
/// trajectory, initial and final meshes, and compares radial families
/// against the radial oracle up to `0.9 t₀`.
pub fn simulate(cfg: &SimConfig) -> Result<Outcome> {
    let mut out = Output::new(cfg, Experiment::Simulate)?;
    let shape = analytic_shape(cfg)?;
    let im = shape.immersion(cfg.n)?;
    let velocity = shape.radial_velocity(cfg.n, cfg.r1)?;
    let oracle = match shape.radial_coefficient() {
        Some(c) => Some(radial_oracle(cfg, c, cfg.t_end)?),
        None => None,
    };
    let boundary = match (&shape, &oracle) {
        (Shape::SphereBand { .. }, Some(tr)) => Some(RadialBandBoundary {
            shape,
            trajectory: tr.clone(),
        }),
        _ => None,
    };
    let mut stepper = Stepper::new(Hmcf, cfg.flow_config());
    if let Some(b) = &boundary {
        stepper = stepper.with_boundary(b);
    }
    out.text("geometry", cfg.geometry.name());
    out.text("n", cfg.n.to_string());
    out.mesh("initial.mesh", &im)?;

    let oracle_t0 = oracle.as_ref().and_then(|tr| tr.collapse_time());
    let mut rec = Recorder {
        every: cfg.snapshot_every,
        snapshots: Vec::new(),
        last_step: None,
        compare_until: oracle_t0.map_or(f64::INFINITY, |t0| 0.9 * t0),
        oracle,
        max_radius_error: 0.0,
        max_spread: 0.0,
        deturck_rows: CsvTable::new(&["t", "deturck_deviation"]),
        deturck_max: 0.0,
    };
    let mut fs = stepper.init(im, velocity)?;
    let mut ds = if cfg.deturck {
        Some(DeTurckState::identity(fs.immersion.grid(), &fs.cache)?)
    } else {
        None
    };
    rec.observe(&fs, ds.as_ref(), true);
    let (status, t_event, bracket) = loop {
        if fs.t >= cfg.t_end * (1.0 - 1e-15) {
            break (Status::Finished, fs.t, None);
        }
        let dt = stepper.next_dt(&fs)?.min(cfg.t_end - fs.t);
        let next = match &ds {
            Some(d) => deturck_step_with(&stepper, &fs, d, dt).map(|(f, d)| (f, Some(d))),
            None => stepper.step_with(&fs, dt).map(|f| (f, None)),
        };
        match next {
            Ok((f, d)) => {
                fs = f;
                ds = d;
                rec.observe(&fs, ds.as_ref(), false);
            }
            Err(HmcfError::CollapseDetected { t, .. }) => break (Status::Collapse, t, Some((fs.t, t))),
            Err(HmcfError::BlowUpDetected { t, .. }) => break (Status::BlowUp, t, Some((fs.t, t))),
            Err(e) => return Err(e),
        }
    };
    rec.observe(&fs, ds.as_ref(), true);
    out.table("trajectory.csv", &trajectory_table(&rec.snapshots))?;
    out.mesh("final.mesh", &fs.immersion)?;
    out.text("event", status.name());
    out.num("t_event", t_event);
    if let Some((lo, hi)) = bracket {
        out.num("bracket_lo", lo);
        out.num("bracket_hi", hi);
    }
    out.text("steps", fs.step.to_string());
    if rec.oracle.is_some() {
        out.opt("oracle_t0", oracle_t0);
        out.num("max_rel_radius_error", rec.max_radius_error);
        out.num("max_rel_spread", rec.max_spread);
    }
    if cfg.deturck {
        out.table("deturck.csv", &rec.deturck_rows)?;
        out.num("deturck_max_deviation", rec.deturck_max);
    }
    out.finish(status)
}

/// Radial reduction `r_tt = -c / r` from `(r0, r1)` with the quadrature
/// cross-check of the collapse time.
pub fn oracle(cfg: &SimConfig) -> Result<Outcome> {
    let mut out = Output::new(cfg, Experiment::Oracle)?;
    let c = cfg.radial_coefficient();
    let tr = radial_oracle(cfg, c, cfg.t_end)?;
    let mut table = CsvTable::new(&["t", "r", "r_t"]);
    for (k, s) in tr.states.iter().enumerate() {
        if k % cfg.snapshot_every == 0 || k + 1 == tr.states.len() {
            table.push(vec![s.t.into(), s.r.into(), s.r_t.into()]);
        }
    }
    out.table("oracle.csv", &table)?;
    out.num("c", c);
    out.num("r0", cfg.r0);
    out.num("r1", cfg.r1);
    let status = match tr.event {
        RadialEvent::Finished { t } => {
            out.text("event", "finished");
            out.num("t_end", t);
            Status::Finished
        }
        RadialEvent::Collapse { t0, bracket } => {
            out.text("event", "collapse");
            out.num("t0", t0);
            out.num("bracket_lo", bracket.0);
            out.num("bracket_hi", bracket.1);
            Status::Collapse
        }
    };
    out.num("t0_quadrature", collapse_time_quadrature(cfg.r0, cfg.r1, c, 1e-13)?);
    match classify_radial_phase(cfg.r0, cfg.r1, c) {
        RadialPhase::MonotoneCollapse => out.text("phase", "monotone_collapse"),
        RadialPhase::ExpandThenCollapse { t_max, r_max } => {
            out.text("phase", "expand_then_collapse");
            out.num("t_max", t_max);
            out.num("r_max_bound", r_max);
        }
    }
    out.num("r_max", tr.max_radius());
    out.num("apex_radius", apex_radius(cfg.r0, cfg.r1, c));
    out.text("velocity_sign_changes", tr.velocity_sign_changes().to_string());
    out.num("max_first_integral_drift", tr.max_drift);
    out.finish(status)
}

/// Residuals of the curvature identities over the configured refinement levels.
pub fn verify(cfg: &SimConfig) -> Result<Outcome> {
    let mut out = Output::new(cfg, Experiment::Verify)?;
    let shape = analytic_shape(cfg)?;
    let (context, levels): (ResidualContext, Vec<(usize, SnapshotTriple)>) = match cfg.geometry {
        GeometryKind::SphereBand | GeometryKind::Cylinder => {
            let c = shape.radial_coefficient().unwrap_or(1.0);
            let t_end = 2.0 * cfg.verify_t;
            let tr = radial_oracle(cfg, c, t_end)?;
            let context = if cfg.geometry == GeometryKind::SphereBand {
                ResidualContext::AnalyticSphere
            } else {
                ResidualContext::AnalyticCylinder
            };
            let levels = cfg
                .levels
                .iter()
                .map(|&n| {
                    let dt = cfg.cfl_safety * TAU / n as f64;
                    Ok((n, radial_family_triple(shape, n, &tr, cfg.verify_t, dt)?))
                })
                .collect::<Result<_>>()?;
            (context, levels)
        }
        _ => {
            let levels = cfg
                .levels
                .iter()
                .map(|&n| {
                    let steps = (n / 4).max(2);
                    let dt = cfg.verify_t / steps as f64;
                    let im = shape.immersion(n)?;
                    let v = shape.radial_velocity(n, cfg.r1)?;
                    Ok((n, simulated_triple(im, v, steps, dt)?))
                })
                .collect::<Result<_>>()?;
            (ResidualContext::SimulatedFlow, levels)
        }
    };
    let reports = convergence_reports(context, &levels, 1.0)?;
    let mut table = CsvTable::new(&["identity", "context", "n", "dt", "residual", "order", "exact_to_roundoff"]);
    out.text("context", context.name());
    for rep in &reports {
        let orders = halving_orders(&rep.residual_norms);
        for k in 0..rep.grid_levels.len() {
            let order: Cell = match (k, rep.exact_to_roundoff) {
                (0, _) | (_, true) => "".into(),
                _ => orders[k - 1].into(),
            };
            table.push(vec![
                rep.identity.name().into(),
                context.name().into(),
                rep.grid_levels[k].into(),
                rep.dts[k].into(),
                rep.residual_norms[k].into(),
                order,
                if rep.exact_to_roundoff { "true" } else { "false" }.into(),
            ]);
        }
        let key = format!("{}_min_order", rep.identity.name());
        if rep.exact_to_roundoff {
            out.text(&key, "roundoff");
        } else {
            out.opt(&key, rep.min_order());
        }
    }
    out.table("residuals.csv", &table)?;
    out.finish(Status::Finished)
}

fn perturbation(cfg: &SimConfig, shape: &Shape, im: &Immersion) -> Result<Vec<Vec3>> {
    let profile = match cfg.profile {
        ProfileKind::Radial => shape.radial_velocity(cfg.n, 1.0)?,
        ProfileKind::SineHeight => Profile::SineHeight { mode: cfg.mode }.sample(im.grid()),
        ProfileKind::SineMixed => Profile::SineMixed { mode: cfg.mode }.sample(im.grid()),
        ProfileKind::Bump => Profile::Bump { width: cfg.width }.sample(im.grid()),
    };
    if profile.iter().all(|v| v.norm() == 0.0) {
        return Err(config_error(
            "profile",
            format!("= {} vanishes on geometry {}", cfg.profile.name(), cfg.geometry.name()),
        ));
    }
    Ok(profile)
}

/// Side-by-side extremal and mean-curvature runs over the velocity scales,
/// the right-hand-side discrepancy law, and the determinant drift of both.
pub fn minkowski(cfg: &SimConfig) -> Result<Outcome> {
    let mut out = Output::new(cfg, Experiment::Minkowski)?;
    let shape = analytic_shape(cfg)?;
    let im = shape.immersion(cfg.n)?;
    let cache = build_cache(&im)?;
    let profile = perturbation(cfg, &shape, &im)?;
    let dt = match cfg.fixed_dt {
        Some(dt) => dt,
        None => cfl_dt(im.grid(), &cache, cfg.cfl_safety)?,
    };
    let positive: Vec<f64> = cfg.eps_list.iter().cloned().filter(|e| *e > 0.0).collect();
    out.text("geometry", cfg.geometry.name());
    out.text("profile", cfg.profile.name());
    out.num("dt", dt);

    let rhs = rhs_scaling(&im, &cache, &profile, &positive)?;
    let mut rhs_table = CsvTable::new(&["eps", "rhs_discrepancy"]);
    for (e, d) in rhs.eps.iter().zip(&rhs.discrepancy) {
        rhs_table.push(vec![(*e).into(), (*d).into()]);
    }
    out.table("rhs_scaling.csv", &rhs_table)?;
    out.opt("rhs_exponent", rhs.exponent);

    let mut table = CsvTable::new(&["eps", "t", "discrepancy"]);
    let mut maxima = Vec::new();
    let mut max_gauge: f64 = 0.0;
    for &e in &cfg.eps_list {
        let curve = limit_comparison(&im, &profile, e, cfg.horizon, dt)?;
        for (k, (t, d)) in curve.times.iter().zip(&curve.discrepancy).enumerate() {
            if k % cfg.snapshot_every == 0 || k + 1 == curve.times.len() {
                table.push(vec![e.into(), (*t).into(), (*d).into()]);
            }
        }
        if e > 0.0 {
            maxima.push(curve.max_discrepancy());
        }
        max_gauge = max_gauge.max(curve.max_gauge_residual);
    }
    out.table("minkowski.csv", &table)?;
    out.opt("limit_exponent", fit_exponent(&positive, &maxima));
    out.num("max_gauge_residual", max_gauge);

    let mut drift_table = CsvTable::new(&["dynamics", "eps", "t", "drift"]);
    let zero = vec![Vec3::zeros(); im.len()];
    let control = det_drift(&det_history(Hmcf, &im, zero, cfg.horizon, dt)?);
    for (t, d) in &control {
        drift_table.push(vec!["hmcf".into(), 0.0.into(), (*t).into(), (*d).into()]);
    }
    out.num(
        "hmcf_max_det_drift",
        control.iter().map(|(_, d)| d.abs()).fold(0.0, f64::max),
    );
    for &e in &positive {
        let v: Vec<Vec3> = profile.iter().map(|p| p * e).collect();
        let drift = det_drift(&det_history(Extremal::default(), &im, v, cfg.horizon, dt)?);
        for (t, d) in &drift {
            drift_table.push(vec!["extremal".into(), e.into(), (*t).into(), (*d).into()]);
        }
    }
    out.table("det_drift.csv", &drift_table)?;
    out.finish(Status::Finished)
}

/// Graph perturbations of the flat plane over the configured ε values.
pub fn stability(cfg: &SimConfig) -> Result<Outcome> {
    let mut out = Output::new(cfg, Experiment::Stability)?;
    if !matches!(cfg.geometry, GeometryKind::Graph | GeometryKind::FlatBand) {
        return Err(config_error("geometry", "must be graph or flat_band for the stability experiment"));
    }
    let x1 = match cfg.profile {
        ProfileKind::Radial => return Err(config_error("profile", "= radial has no meaning for graphs")),
        ProfileKind::SineHeight => Profile::SineHeight { mode: cfg.mode },
        ProfileKind::SineMixed => Profile::SineMixed { mode: cfg.mode },
        ProfileKind::Bump => Profile::Bump { width: cfg.width },
    };
    let setup = ScalingSetup {
        dim: cfg.dim,
        n: cfg.n,
        length: cfg.length,
        x1,
        x2: Profile::Zero,
        horizon: cfg.horizon,
        dt: cfg.fixed_dt.unwrap_or(cfg.cfl_safety * cfg.length / cfg.n as f64),
        snapshot_every: cfg.snapshot_every,
    };
    let report = epsilon_scaling(&setup, &cfg.eps_list)?;
    let mut table = CsvTable::new(&["eps", "t", "sup_norm", "deviation", "verdict"]);
    for run in &report.runs {
        for s in &run.samples {
            table.push(vec![
                run.epsilon.into(),
                s.t.into(),
                s.sup_norm.into(),
                s.deviation.into(),
                run.verdict.name().into(),
            ]);
        }
    }
    out.table("stability.csv", &table)?;
    out.text("profile", cfg.profile.name());
    out.num("dt", setup.dt);
    out.opt("deviation_exponent", report.exponent);
    out.opt("eps0_empirical", report.eps0);

    let grid = graph_domain(cfg.dim, cfg.n, cfg.length)?;
    let shape = x1.sample(&grid);
    let scales = [0.04, 0.02, 0.01, 0.005];
    let fit = |pairs: Vec<(f64, f64)>| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        fit_exponent(&xs, &ys)
    };
    out.opt("truncation_exponent", fit(truncation_scaling(&grid, &shape, &scales)?));
    out.opt("reduced_equation_exponent", fit(reduced_scaling(&grid, &shape, &scales)?));
    let eps_max = cfg.eps_list.iter().cloned().fold(0.0, f64::max);
    let y: Vec<Vec3> = shape.iter().map(|v| v * eps_max).collect();
    let general = compute_metric(&graph_immersion(&grid, &y)?)?;
    let consistency = general
        .iter()
        .zip(graph_metric(&grid, &y))
        .map(|(a, b)| (a - b).amax() / b.amax())
        .fold(0.0, f64::max);
    out.num("metric_path_difference", consistency);
    out.text("scope", "short horizon only; global existence in time is not reproduced");
    out.finish(Status::Finished)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_with;

    fn cfg(dir: &std::path::Path, sets: &[&str]) -> SimConfig {
        let mut all: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
        all.push(format!("output_dir={}", dir.display()));
        parse_config_with("", &all).unwrap()
    }

    fn value<'a>(o: &'a Outcome, key: &str) -> &'a str {
        &o.summary.iter().find(|(k, _)| k == key).unwrap().1
    }

    #[test]
    fn oracle_reports_collapse() {
        let dir = tempfile::tempdir().unwrap();
        let o = oracle(&cfg(dir.path(), &[])).unwrap();
        assert_eq!(o.status, Status::Collapse);
        let t0: f64 = value(&o, "t0_quadrature").parse().unwrap();
        assert!((t0 - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-10);
        assert!(dir.path().join("oracle.csv").exists());
    }

    #[test]
    fn flat_band_simulation_finishes() {
        let dir = tempfile::tempdir().unwrap();
        let o = simulate(&cfg(dir.path(), &["geometry=flat_band", "n=16", "t_end=0.5", "deturck=true"])).unwrap();
        assert_eq!(o.status, Status::Finished);
        assert!(value(&o, "deturck_max_deviation").parse::<f64>().unwrap() < 1e-12);
        for f in ["trajectory.csv", "initial.mesh", "final.mesh", "summary.csv", "deturck.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }

    #[test]
    fn mismatched_experiment_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(dir.path(), &["experiment=oracle"]);
        assert!(matches!(run_experiment(Experiment::Simulate, &c), Err(HmcfError::Config(_))));
    }

    #[test]
    fn graph_geometry_needs_stability() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(dir.path(), &["geometry=graph"]);
        assert!(matches!(simulate(&c), Err(HmcfError::Config(_))));
    }

    #[test]
    fn vanishing_profile_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(dir.path(), &["geometry=ellipse", "n=32", "profile=radial"]);
        assert!(matches!(minkowski(&c), Err(HmcfError::Config(_))));
    }
}
