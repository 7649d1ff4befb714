//! The six commands. Each returns its checks and the artifacts to write;
//! files are written by the caller, in order, from one thread.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use hj_envelope_core::adjoint::{
    build_sigma_measure, cone_mass, first_moment_bound, lift_to_gamma, second_moment_bound,
    MeasureMeta, VelocityHistory, DENSITY_FLOOR, MASS_TOL,
};
use hj_envelope_core::envelope::{
    convergence_study, run_cell, Probe, StudyCell, StudyRow, StudySpec,
};
use hj_envelope_core::geometry::{cone_depth, lift, project, DyadicPoint};
use hj_envelope_core::linalg::SymMat;
use hj_envelope_core::model::{
    extend_psi_j, level_hamiltonian, AnyLevelH, LevelHamiltonian, MollifiedH, Profile,
};
use hj_envelope_core::solver::{
    characteristic_value, derivative_bound_check, derivative_probe, hopf_lax_value,
    solve_nonviscous, solve_viscous, FieldMeta, Grid, Window,
};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::formats::{path_record, write_checkpoint, write_measure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Solve,
    Adjoint,
    EnvelopeCheck,
    Convergence,
    Characteristics,
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Adjoint => "adjoint",
            Command::EnvelopeCheck => "envelope-check",
            Command::Convergence => "convergence",
            Command::Characteristics => "characteristics",
            Command::Selftest => "selftest",
        }
    }
}

/// One pass/fail check: `value <= tolerance` unless stated otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            pass: value <= tolerance,
            value,
            tolerance,
        }
    }

    pub fn flag(name: impl Into<String>, pass: bool) -> Self {
        Check {
            name: name.into(),
            pass,
            value: if pass { 1.0 } else { 0.0 },
            tolerance: 1.0,
        }
    }
}

/// A file to write under the output directory.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Default)]
pub struct Report {
    pub checks: Vec<Check>,
    pub artifacts: Vec<Artifact>,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn csv(&mut self, name: String, header: &[&str], rows: Vec<Vec<String>>) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Output(e.to_string()))?;
        self.artifacts.push(Artifact { name, bytes });
        Ok(())
    }
}

/// Everything a command needs besides the configuration.
#[derive(Debug, Clone)]
pub struct Context {
    pub commit: String,
}

impl Default for Context {
    fn default() -> Self {
        Context {
            commit: option_env!("HJ_ENVELOPE_COMMIT")
                .unwrap_or("unknown")
                .to_string(),
        }
    }
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn nums(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" ")
}

const PROVENANCE: [&str; 9] = [
    "level", "eta", "eps", "r", "h", "dt", "model", "profile", "commit",
];

fn provenance(
    cfg: &RunConfig,
    ctx: &Context,
    level: u32,
    cell: &StudyCell,
    grid: &Grid,
) -> Vec<String> {
    vec![
        level.to_string(),
        num(cell.eta),
        num(cell.eps),
        num(cell.r),
        num(grid.h()),
        num(grid.dt()),
        cfg.model.name().to_string(),
        cfg.ic.name(),
        ctx.commit.clone(),
    ]
}

fn header<'a>(cols: &[&'a str]) -> Vec<&'a str> {
    PROVENANCE.iter().chain(cols).copied().collect()
}

fn window(cfg: &RunConfig) -> Window {
    Window {
        cone_slack: cfg.checks.cone_slack,
        box_margin: cfg.checks.box_margin,
    }
}

fn hamiltonian(cfg: &RunConfig, level: u32) -> CliResult<AnyLevelH> {
    Ok(level_hamiltonian(&cfg.reg, level, &cfg.table)?)
}

fn probe_coords(cfg: &RunConfig, level: u32) -> Vec<Probe> {
    cfg.probes
        .iter()
        .map(|p| Probe {
            t: p.t,
            x: project(&p.q, level).coords(),
        })
        .collect()
}

fn study_spec(cfg: &RunConfig, ham: AnyLevelH, probes: Vec<Probe>) -> StudySpec {
    let n = ham.n_coords();
    StudySpec {
        model: cfg.model.clone(),
        ic: cfg.ic.clone(),
        ham,
        lo: vec![cfg.grid.low; n],
        hi: vec![cfg.grid.high; n],
        horizon: cfg.grid.horizon,
        cfl: cfg.grid.cfl,
        probes,
        s_nodes: cfg.checks.s_nodes,
        tau: cfg.checks.tau,
        second_moment_c: cfg.checks.second_moment_c,
        richardson: cfg.checks.richardson,
        window: window(cfg),
    }
}

fn meta(cfg: &RunConfig, cell: &StudyCell) -> FieldMeta {
    FieldMeta {
        model: cfg.model.name().to_string(),
        profile: cfg.ic.name(),
        eta: cell.eta,
        eps: cell.eps,
    }
}

fn cell_grid(
    cfg: &RunConfig,
    ham: &MollifiedH<&AnyLevelH>,
    points: usize,
    eps: f64,
) -> CliResult<Grid> {
    let n = ham.n_coords();
    Ok(Grid::with_cfl(
        ham.level(),
        ham.dim(),
        vec![cfg.grid.low; n],
        vec![cfg.grid.high; n],
        points,
        cfg.grid.horizon,
        ham.coord_speed(),
        eps,
        cfg.grid.cfl,
    )?)
}

/// Node nearest to `probe`, or an error naming the probe.
fn snap(grid: &Grid, k: usize, p: &Probe) -> CliResult<usize> {
    grid.nearest_node(&p.x).ok_or_else(|| {
        CliError::Numerical(hj_envelope_core::Error::Config(format!(
            "probe {k} lies outside the grid box"
        )))
    })
}

fn study_rows(
    cfg: &RunConfig,
    ctx: &Context,
    rows: &[StudyRow],
) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let cols = header(&[
        "probe",
        "t",
        "x",
        "f",
        "id_value",
        "id_time",
        "id_grad",
        "id_floor",
        "theorem_t",
        "t2_r1",
        "t2_r2",
        "t2_r3",
        "commutation",
        "m1",
        "m1_bound",
        "m2",
        "m2_bound",
        "cone_mass",
        "off_cone_mass",
        "max_mass_drift",
        "min_density",
        "derivative_checked",
        "derivative_violations",
        "error",
    ]);
    let out = rows
        .iter()
        .map(|r| {
            let mut v = vec![
                r.level.to_string(),
                num(r.cell.eta),
                num(r.cell.eps),
                num(r.cell.r),
                num(r.h),
                num(r.dt),
                cfg.model.name().to_string(),
                cfg.ic.name(),
                ctx.commit.clone(),
            ];
            v.extend([
                r.probe.to_string(),
                num(r.t),
                nums(&r.x),
                num(r.f_value),
                num(r.identity[0]),
                num(r.identity[1]),
                num(r.identity[2]),
                r.identity_floor
                    .map(|f| num(f.iter().sum()))
                    .unwrap_or_default(),
                num(r.theorem_t),
                num(r.theorem_t2[0]),
                num(r.theorem_t2[1]),
                num(r.theorem_t2[2]),
                num(r.commutation),
                num(r.m1),
                num(r.m1_bound),
                num(r.m2),
                num(r.m2_bound),
                num(r.cone_mass),
                num(r.off_cone_mass),
                num(r.max_mass_drift),
                num(r.min_density),
                r.derivative_checked.to_string(),
                r.derivative_violations.to_string(),
                r.error.clone().unwrap_or_default(),
            ]);
            v
        })
        .collect();
    (cols, out)
}

/// Maximum that propagates NaN, so a missing value fails its check.
fn worst(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a: f64, &b| {
        if a.is_nan() || b.is_nan() {
            f64::NAN
        } else {
            a.max(b)
        }
    })
}

fn max_of(rows: &[StudyRow], f: impl Fn(&StudyRow) -> f64) -> f64 {
    worst(&rows.iter().map(f).collect::<Vec<_>>())
}

/// Checks shared by every study: no failed rows, conservation, moments and
/// derivative bounds.
fn row_checks(prefix: &str, rows: &[StudyRow], checks: &mut Vec<Check>) {
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    checks.push(Check::at_most(
        format!("{prefix}.failed_rows"),
        failed as f64,
        0.0,
    ));
    let ok: Vec<StudyRow> = rows.iter().filter(|r| r.error.is_none()).cloned().collect();
    checks.push(Check::at_most(
        format!("{prefix}.mass_drift"),
        max_of(&ok, |r| r.max_mass_drift),
        MASS_TOL,
    ));
    checks.push(Check::at_most(
        format!("{prefix}.negative_density"),
        max_of(&ok, |r| -r.min_density),
        -DENSITY_FLOOR,
    ));
    checks.push(Check::at_most(
        format!("{prefix}.first_moment_violations"),
        ok.iter().filter(|r| !(r.m1 <= r.m1_bound)).count() as f64,
        0.0,
    ));
    checks.push(Check::at_most(
        format!("{prefix}.second_moment_violations"),
        ok.iter().filter(|r| !(r.m2 <= r.m2_bound)).count() as f64,
        0.0,
    ));
    checks.push(Check::at_most(
        format!("{prefix}.derivative_violations"),
        ok.iter()
            .map(|r| r.derivative_violations)
            .max()
            .unwrap_or(0) as f64,
        0.0,
    ));
}

/// Scheme-consistency tolerance `3 (h + dt) + eta Lip`.
fn scheme_tol(row: &StudyRow, lip: f64) -> f64 {
    3.0 * (row.h + row.dt) + row.cell.eta * lip
}

pub fn run(command: Command, cfg: &RunConfig, ctx: &Context) -> CliResult<Report> {
    match command {
        Command::Solve => solve(cfg, ctx),
        Command::Adjoint => adjoint(cfg, ctx),
        Command::EnvelopeCheck => envelope_check(cfg, ctx),
        Command::Convergence => convergence(cfg, ctx),
        Command::Characteristics => characteristics(cfg, ctx),
        Command::Selftest => selftest(cfg, ctx),
    }
}

fn solve(cfg: &RunConfig, ctx: &Context) -> CliResult<Report> {
    let mut report = Report::default();
    let finest = cfg.finest();
    let mut ladder: Vec<f64> = cfg.cells.iter().map(|c| c.eps).collect();
    ladder.sort_by(|a, b| b.total_cmp(a));
    ladder.dedup();
    for &level in &cfg.levels {
        let base = hamiltonian(cfg, level)?;
        let ham = MollifiedH::new(&base, finest.eta)?;
        let grid = cell_grid(cfg, &ham, finest.points, ladder[0])?;
        let ext = extend_psi_j(cfg.ic.clone(), level);
        let win = window(cfg);
        let vv = solve_nonviscous(&ham, &ext, &grid, &ladder, &win, meta(cfg, &finest))?;
        let field = &vv.field;
        let tol = cfg.checks.derivative_factor * grid.h();
        let dcheck = derivative_bound_check(field, &cfg.model, &win.nodes(&grid), tol);
        report.checks.push(Check::at_most(
            format!("solve.j{level}.derivative_violations"),
            dcheck.violations.len() as f64,
            0.0,
        ));
        let settled = vv.increments.last().map_or(true, |d| *d <= 1e-10);
        report.checks.push(Check::flag(
            format!("solve.j{level}.viscosity_cauchy"),
            vv.cauchy || settled,
        ));
        let cell = StudyCell {
            eps: *ladder.last().unwrap(),
            ..finest
        };
        let mut rows = Vec::new();
        for (k, p) in probe_coords(cfg, level).iter().enumerate() {
            let node = snap(&grid, k, p)?;
            let step = grid.step_of(p.t);
            let d = derivative_probe(field, step, node, tol);
            let mut row = provenance(cfg, ctx, level, &cell, &grid);
            row.extend([
                k.to_string(),
                num(grid.time(step)),
                nums(&grid.coords(node)),
                num(field.value(step, node)),
                d.as_ref().map(|(a, _)| num(*a)).unwrap_or_default(),
                d.as_ref()
                    .map(|(_, g)| nums(&g.coords()))
                    .unwrap_or_default(),
            ]);
            rows.push(row);
        }
        report.csv(
            format!("solve_j{level}.csv"),
            &header(&["probe", "t", "x", "f", "dt_f", "grad_f"]),
            rows,
        )?;
        let mut bytes = Vec::new();
        write_checkpoint(field, &mut bytes).map_err(|e| CliError::Output(e.to_string()))?;
        report.artifacts.push(Artifact {
            name: format!("field_j{level}.bin"),
            bytes,
        });
        let inc: Vec<Vec<String>> = vv
            .increments
            .iter()
            .enumerate()
            .map(|(i, d)| vec![num(vv.eps[i]), num(vv.eps[i + 1]), num(*d)])
            .collect();
        report.csv(
            format!("viscosity_j{level}.csv"),
            &["eps_from", "eps_to", "sup_increment"],
            inc,
        )?;
    }
    Ok(report)
}

fn adjoint(cfg: &RunConfig, ctx: &Context) -> CliResult<Report> {
    let mut report = Report::default();
    for &level in &cfg.levels {
        let base = hamiltonian(cfg, level)?;
        let probes = probe_coords(cfg, level);
        let mut rows = Vec::new();
        let (mut drift, mut floor, mut m1v, mut m2v) = (0.0f64, f64::INFINITY, 0usize, 0usize);
        for (c, cell) in cfg.cells.iter().enumerate() {
            let ham = MollifiedH::new(&base, cell.eta)?;
            let grid = cell_grid(cfg, &ham, cell.points, cell.eps)?;
            let ext = extend_psi_j(cfg.ic.clone(), level);
            let field = solve_viscous(&ham, &ext, &grid, cell.eps, meta(cfg, cell))?;
            let vel = VelocityHistory::compute(&field, &ham);
            for (k, p) in probes.iter().enumerate() {
                let node = snap(&grid, k, p)?;
                let x = grid.coords(node);
                let sigma = build_sigma_measure(&vel, p.t, &x, cell.r, cfg.checks.s_nodes)?;
                let x_norm = grid.point(node).norm();
                let (m1, m2) = (sigma.first_moment(), sigma.second_moment());
                let b1 = first_moment_bound(base.lipschitz(), cell.eps, x_norm, p.t, cell.r);
                let b2 =
                    second_moment_bound(cfg.checks.second_moment_c, cell.eps, x_norm, p.t, cell.r);
                drift = drift.max(sigma.max_mass_drift);
                floor = floor.min(sigma.min_density);
                m1v += usize::from(!(m1 <= b1));
                m2v += usize::from(!(m2 <= b2));
                let mut gamma = lift_to_gamma(&sigma, cfg.checks.tau)?;
                gamma.meta = MeasureMeta {
                    level,
                    eta: cell.eta,
                    eps: cell.eps,
                    r: cell.r,
                    t: p.t,
                    x: x.clone(),
                };
                let mut bytes = Vec::new();
                write_measure(&gamma, &mut bytes)?;
                report.artifacts.push(Artifact {
                    name: format!("measure_j{level}_c{c}_p{k}.csv"),
                    bytes,
                });
                let mut row = provenance(cfg, ctx, level, cell, &grid);
                row.extend([
                    c.to_string(),
                    k.to_string(),
                    num(p.t),
                    nums(&x),
                    num(sigma.total_mass()),
                    num(sigma.max_mass_drift),
                    num(sigma.min_density),
                    num(m1),
                    num(b1),
                    num(m2),
                    num(b2),
                    num(cone_mass(&sigma, cfg.checks.tau)),
                    gamma.atoms.len().to_string(),
                ]);
                rows.push(row);
            }
        }
        report.checks.push(Check::at_most(
            format!("adjoint.j{level}.mass_drift"),
            drift,
            MASS_TOL,
        ));
        report.checks.push(Check::at_most(
            format!("adjoint.j{level}.negative_density"),
            -floor,
            -DENSITY_FLOOR,
        ));
        report.checks.push(Check::at_most(
            format!("adjoint.j{level}.first_moment_violations"),
            m1v as f64,
            0.0,
        ));
        report.checks.push(Check::at_most(
            format!("adjoint.j{level}.second_moment_violations"),
            m2v as f64,
            0.0,
        ));
        report.csv(
            format!("adjoint_j{level}.csv"),
            &header(&[
                "cell",
                "probe",
                "t",
                "x",
                "mass",
                "max_mass_drift",
                "min_density",
                "m1",
                "m1_bound",
                "m2",
                "m2_bound",
                "cone_mass",
                "atoms",
            ]),
            rows,
        )?;
    }
    Ok(report)
}

fn envelope_check(cfg: &RunConfig, ctx: &Context) -> CliResult<Report> {
    let mut report = Report::default();
    let finest = cfg.finest();
    for &level in &cfg.levels {
        let ham = hamiltonian(cfg, level)?;
        let lip = ham.lipschitz();
        let spec = study_spec(cfg, ham, probe_coords(cfg, level));
        let rows = run_cell(&spec, finest);
        let prefix = format!("envelope.j{level}");
        row_checks(&prefix, &rows, &mut report.checks);
        for r in rows.iter().filter(|r| r.error.is_none()) {
            let tol = scheme_tol(r, lip);
            let p = r.probe;
            report.checks.push(Check::at_most(
                format!("{prefix}.p{p}.identity"),
                worst(&r.identity),
                tol,
            ));
            report.checks.push(Check::at_most(
                format!("{prefix}.p{p}.theorem_t"),
                r.theorem_t,
                tol,
            ));
            if r.derivative.is_some() {
                report.checks.push(Check::at_most(
                    format!("{prefix}.p{p}.theorem_t2"),
                    worst(&r.theorem_t2),
                    tol,
                ));
            }
        }
        let (cols, out) = study_rows(cfg, ctx, &rows);
        report.csv(format!("envelope_j{level}.csv"), &cols, out)?;
    }
    Ok(report)
}

fn convergence(cfg: &RunConfig, ctx: &Context) -> CliResult<Report> {
    let mut report = Report::default();
    let n_cells = cfg.cells.len();
    for &level in &cfg.levels {
        let ham = hamiltonian(cfg, level)?;
        let spec = study_spec(cfg, ham, probe_coords(cfg, level));
        let table = convergence_study(&spec, &cfg.cells);
        let prefix = format!("convergence.j{level}");
        row_checks(&prefix, &table.rows, &mut report.checks);
        let mut interior = Vec::new();
        let r_max = cfg.cells.iter().map(|c| c.r).fold(0.0, f64::max);
        if n_cells >= 2 {
            for p in 0..cfg.probes.len() {
                let col: Vec<&StudyRow> = table.rows.iter().filter(|r| r.probe == p).collect();
                let (first, last) = (col[0], col[col.len() - 1]);
                let c = &cfg.checks;
                report.checks.push(Check::at_most(
                    format!("{prefix}.p{p}.identity_ratio"),
                    last.identity_trend_value(),
                    c.identity_ratio * first.identity_trend_value(),
                ));
                // Cone support is only claimed for probes whose cylinders lie
                // inside the cone at every cell of the ladder.
                let inside = col.iter().all(|r| {
                    DyadicPoint::from_coords(level, cfg.model.dim(), &r.x)
                        .map_or(false, |x| cone_depth(&x) > r_max)
                });
                interior.push(vec![
                    "cone_interior".into(),
                    p.to_string(),
                    inside.to_string(),
                ]);
                if !inside {
                    continue;
                }
                report.checks.push(Check::at_most(
                    format!("{prefix}.p{p}.cone_ratio"),
                    last.cone_mass,
                    c.cone_ratio * first.cone_mass,
                ));
                report.checks.push(Check::at_most(
                    format!("{prefix}.p{p}.cone_mass"),
                    last.cone_mass,
                    c.cone_abs,
                ));
            }
        }
        let (cols, out) = study_rows(cfg, ctx, &table.rows);
        report.csv(format!("convergence_j{level}.csv"), &cols, out)?;
        let mut trends: Vec<Vec<String>> = table
            .trends
            .iter()
            .map(|(name, p, ok)| vec![name.clone(), p.to_string(), ok.to_string()])
            .collect();
        trends.append(&mut interior);
        report.csv(
            format!("trends_j{level}.csv"),
            &["column", "probe", "holds"],
            trends,
        )?;
    }
    Ok(report)
}

fn characteristics(cfg: &RunConfig, ctx: &Context) -> CliResult<Report> {
    if cfg.model.dim() != 1 {
        return Err(CliError::Config(cfg.error_at(
            "model.nonlinearity",
            "variational formulas are implemented for D = 1 only",
        )));
    }
    let mut report = Report::default();
    let finest = cfg.finest();
    // values[level][probe]
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut rows = Vec::new();
    for &level in &cfg.levels {
        let grid_field = if cfg.checks.grid_levels.contains(&level) {
            let base = hamiltonian(cfg, level)?;
            let ham = MollifiedH::new(&base, finest.eta)?;
            let grid = cell_grid(cfg, &ham, finest.points, finest.eps)?;
            let ext = extend_psi_j(cfg.ic.clone(), level);
            Some(solve_viscous(
                &ham,
                &ext,
                &grid,
                finest.eps,
                meta(cfg, &finest),
            )?)
        } else {
            None
        };
        let mut at_level = Vec::new();
        for (k, p) in cfg.probes.iter().enumerate() {
            let x = project(&p.q, level);
            let hl = hopf_lax_value(&cfg.model, &cfg.ic, p.t, &x, &cfg.hopf)?;
            let ch =
                characteristic_value(&cfg.ic, &cfg.model, p.t, &lift(&x), &lift(&hl.optimizer))?;
            at_level.push(hl.value);
            let (grid_value, h, dt) = match &grid_field {
                Some(f) => {
                    let g = f.grid();
                    let v = f.interpolate(g.step_of(p.t), &x.coords())?;
                    (v, g.h(), g.dt())
                }
                None => (f64::NAN, f64::NAN, f64::NAN),
            };
            let prefix = format!("characteristics.j{level}.p{k}");
            if grid_field.is_some() {
                let gap = (grid_value - hl.value).abs() / hl.value.abs().max(1e-12);
                report.checks.push(Check::at_most(
                    format!("{prefix}.relative_gap"),
                    gap,
                    (0.02f64).max(5.0 * h),
                ));
                report.checks.push(Check::at_most(
                    format!("{prefix}.foot_residual"),
                    ch.residual,
                    cfg.checks.characteristic_factor * h,
                ));
            }
            rows.push(vec![
                level.to_string(),
                num(finest.eta),
                num(finest.eps),
                num(finest.r),
                num(h),
                num(dt),
                cfg.model.name().to_string(),
                cfg.ic.name(),
                ctx.commit.clone(),
                k.to_string(),
                num(p.t),
                path_record(&lift(&x)),
                num(hl.value),
                num(grid_value),
                num(ch.value),
                num(ch.residual),
                hl.applicable.to_string(),
                num(hl.gap),
                path_record(&lift(&hl.optimizer)),
            ]);
        }
        values.push(at_level);
    }
    if values.len() >= 3 {
        for k in 0..cfg.probes.len() {
            let diffs: Vec<f64> = values
                .windows(2)
                .map(|w| (w[0][k] - w[1][k]).abs())
                .collect();
            let decreasing = diffs.windows(2).all(|w| w[1] <= w[0]);
            report.checks.push(Check::flag(
                format!("characteristics.p{k}.cross_level_decreasing"),
                decreasing,
            ));
        }
    }
    report.csv(
        "characteristics.csv".into(),
        &header(&[
            "probe",
            "t",
            "q",
            "hopf_lax",
            "grid",
            "characteristic",
            "foot_residual",
            "applicable",
            "gap",
            "optimizer",
        ]),
        rows,
    )?;
    Ok(report)
}

/// The built-in affine configuration of `selftest`.
pub const SELFTEST_CONFIG: &str = r#"version = 1

[model]
nonlinearity = "sk"

[initial]
profile = "affine"
slope = 1.0

[grid]
low = -1.0
high = 3.0
points = 65
horizon = 0.5

[ladder]
levels = [1]
eta = [0.05]
eps = [0.05]
r = [0.22]

[[probe]]
t = 0.2
breakpoints = [0.0, 0.5]
values = [0.3, 1.2]

[checks]
cone_slack = 0.1
box_margin = 0.8
"#;

pub fn selftest_config(seed: u64) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::parse(SELFTEST_CONFIG, std::path::Path::new("<selftest>"))?;
    cfg.seed = seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: f64 = rng.gen_range(0.2..0.6);
    let b: f64 = a + rng.gen_range(0.4..1.0);
    let t: f64 = rng.gen_range(0.1..0.25);
    let q = hj_envelope_core::geometry::StepPath::from_scalars(vec![0.0, 0.5], &[a, b])?;
    cfg.probes.push(crate::config::ProbeConfig { t, q });
    Ok(cfg)
}

/// Affine exactness, envelope identities, theorem residuals and an exactly
/// vanishing commutation residual on the built-in affine model.
fn selftest(cfg: &RunConfig, ctx: &Context) -> CliResult<Report> {
    let slope = match cfg.ic.profile() {
        Profile::Affine { slope } => slope,
        _ => {
            return Err(CliError::Output(
                "selftest needs an affine initial condition".into(),
            ))
        }
    };
    let mut report = Report::default();
    let cell = cfg.finest();
    let level = cfg.levels[0];
    let base = hamiltonian(cfg, level)?;
    let lip = base.lipschitz();
    let ham = MollifiedH::new(&base, cell.eta)?;
    let grid = cell_grid(cfg, &ham, cell.points, cell.eps)?;
    let ext = extend_psi_j(cfg.ic.clone(), level);
    let field = solve_viscous(&ham, &ext, &grid, cell.eps, meta(cfg, &cell))?;
    let xi = cfg.model.eval(&SymMat::scalar(slope));
    let nodes = window(cfg).nodes(&grid);
    let mut err = 0.0f64;
    for step in 0..=grid.steps() {
        let t = grid.time(step);
        for &n in &nodes {
            let exact = ext.eval(&grid.point(n))? + t * xi;
            err = err.max((field.value(step, n) - exact).abs());
        }
    }
    report.checks.push(Check::at_most(
        "selftest.affine_exactness",
        err,
        2.0 * grid.h() + cell.eta * lip,
    ));
    let spec = study_spec(cfg, base, probe_coords(cfg, level));
    let rows = run_cell(&spec, cell);
    row_checks("selftest", &rows, &mut report.checks);
    for r in rows.iter().filter(|r| r.error.is_none()) {
        let tol = scheme_tol(r, lip);
        let p = r.probe;
        report.checks.push(Check::at_most(
            format!("selftest.p{p}.identity"),
            worst(&r.identity),
            tol,
        ));
        report.checks.push(Check::at_most(
            format!("selftest.p{p}.theorem_t"),
            r.theorem_t,
            tol,
        ));
        report.checks.push(Check::at_most(
            format!("selftest.p{p}.theorem_t2"),
            worst(&r.theorem_t2),
            tol,
        ));
        report.checks.push(Check {
            name: format!("selftest.p{p}.commutation"),
            pass: r.commutation == 0.0,
            value: r.commutation,
            tolerance: 0.0,
        });
    }
    let (cols, out) = study_rows(cfg, ctx, &rows);
    report.csv("selftest.csv".into(), &cols, out)?;
    Ok(report)
}

/// Absolute artifact paths under `out`.
pub fn artifact_paths(out: &std::path::Path, report: &Report) -> Vec<PathBuf> {
    report.artifacts.iter().map(|a| out.join(&a.name)).collect()
}
