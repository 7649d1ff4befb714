use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::identities::{check_identities, richardson, IdentityReport};
use super::theorems::{
    commutation_residual, measure_summary, theorem_t2_residuals, theorem_t_residual,
};
use crate::adjoint::{
    cone_mass, first_moment_bound, lift_to_gamma, second_moment_bound, VelocityHistory,
};
use crate::error::{Error, Result};
use crate::geometry::{lift, StepPath};
use crate::model::{
    extend_psi_j, AnyLevelH, ExtendedInitial, InitialCondition, LevelHamiltonian, MollifiedH,
    Nonlinearity,
};
use crate::solver::{
    derivative_bound_check, derivative_probe, solve_viscous, FieldMeta, Grid, GridField, Window,
};

/// A probe `(t, x)`, with `x` in grid coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub t: f64,
    pub x: Vec<f64>,
}

/// Everything shared by the cells of a ladder.
#[derive(Debug, Clone)]
pub struct StudySpec {
    pub model: Nonlinearity,
    pub ic: InitialCondition,
    /// Unmollified `H^j`.
    pub ham: AnyLevelH,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub horizon: f64,
    pub cfl: f64,
    pub probes: Vec<Probe>,
    pub s_nodes: usize,
    pub tau: f64,
    /// Frozen constant of the second-moment bound.
    pub second_moment_c: f64,
    /// Also solve on the refined grid and report floor-subtracted residuals.
    pub richardson: bool,
    /// Nodes swept by the derivative-bound check.
    pub window: Window,
}

/// One ladder cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyCell {
    pub eta: f64,
    pub eps: f64,
    pub r: f64,
    pub points: usize,
}

/// One `(cell, probe)` outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub cell: StudyCell,
    pub probe: usize,
    pub t: f64,
    /// The probe snapped to the nearest node.
    pub x: Vec<f64>,
    pub level: u32,
    pub h: f64,
    pub dt: f64,
    pub f_value: f64,
    pub identity: [f64; 3],
    pub signed: Vec<f64>,
    /// Identity residuals after removing the grid floor.
    pub identity_floor: Option<[f64; 3]>,
    pub theorem_t: f64,
    pub theorem_t2: [f64; 3],
    pub commutation: f64,
    /// `d_t f` and `l_j grad f` at the probe node, when one-sided quotients agree.
    pub derivative: Option<(f64, StepPath)>,
    pub m1: f64,
    pub m2: f64,
    pub m1_bound: f64,
    pub m2_bound: f64,
    pub cone_mass: f64,
    pub off_cone_mass: f64,
    pub max_mass_drift: f64,
    pub min_density: f64,
    pub derivative_checked: usize,
    pub derivative_violations: usize,
    pub error: Option<String>,
}

impl StudyRow {
    fn failed(cell: StudyCell, probe: usize, p: &Probe, level: u32, err: &Error) -> Self {
        StudyRow {
            cell,
            probe,
            t: p.t,
            x: p.x.clone(),
            level,
            h: f64::NAN,
            dt: f64::NAN,
            f_value: f64::NAN,
            identity: [f64::NAN; 3],
            signed: Vec::new(),
            identity_floor: None,
            theorem_t: f64::NAN,
            theorem_t2: [f64::NAN; 3],
            commutation: f64::NAN,
            derivative: None,
            m1: f64::NAN,
            m2: f64::NAN,
            m1_bound: f64::NAN,
            m2_bound: f64::NAN,
            cone_mass: f64::NAN,
            off_cone_mass: f64::NAN,
            max_mass_drift: f64::NAN,
            min_density: f64::NAN,
            derivative_checked: 0,
            derivative_violations: 0,
            error: Some(err.to_string()),
        }
    }

    pub fn identity_total(&self) -> f64 {
        self.identity.iter().sum()
    }

    /// Floor-subtracted total when available, raw total otherwise.
    pub fn identity_trend_value(&self) -> f64 {
        self.identity_floor
            .map(|r| r.iter().sum())
            .unwrap_or_else(|| self.identity_total())
    }
}

/// Rows of a ladder study plus monotone-trend flags.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
    /// `(column, probe, decreasing)` across the cells in ladder order.
    pub trends: Vec<(String, usize, bool)>,
}

/// Whether each value is at most `(1 + slack)` times its predecessor.
pub fn decreasing(values: &[f64], slack: f64) -> bool {
    values
        .windows(2)
        .all(|w| w[1].is_finite() && w[0].is_finite() && w[1] <= w[0] * (1.0 + slack))
}

struct Solved {
    grid: Grid,
    ext: ExtendedInitial,
    field: GridField,
    velocity: VelocityHistory,
}

fn solve_cell(spec: &StudySpec, cell: &StudyCell, points: usize) -> Result<Solved> {
    if !(cell.eta > 0.0 && cell.eps > 0.0 && cell.r > 0.0) {
        return Err(Error::Config(format!(
            "ladder values must be positive (eta {}, eps {}, r {})",
            cell.eta, cell.eps, cell.r
        )));
    }
    let level = spec.ham.level();
    let ham = MollifiedH::new(&spec.ham, cell.eta)?;
    let grid = Grid::with_cfl(
        level,
        spec.ham.dim(),
        spec.lo.clone(),
        spec.hi.clone(),
        points,
        spec.horizon,
        ham.coord_speed(),
        cell.eps,
        spec.cfl,
    )?;
    let ext = extend_psi_j(spec.ic.clone(), level);
    let meta = FieldMeta {
        model: spec.model.name().to_string(),
        profile: spec.ic.name(),
        eta: cell.eta,
        eps: cell.eps,
    };
    let field = solve_viscous(&ham, &ext, &grid, cell.eps, meta)?;
    let velocity = VelocityHistory::compute(&field, &ham);
    Ok(Solved {
        grid,
        ext,
        field,
        velocity,
    })
}

fn identities_at(spec: &StudySpec, s: &Solved, p: &Probe, r: f64) -> Result<IdentityReport> {
    check_identities(
        &s.field,
        &s.velocity,
        &spec.ham,
        &s.ext,
        p.t,
        &p.x,
        r,
        spec.s_nodes,
    )
}

fn snap(grid: &Grid, p: &Probe) -> Result<(usize, Probe)> {
    let node = grid
        .nearest_node(&p.x)
        .ok_or_else(|| Error::Config(format!("probe {:?} lies outside the grid box", p.x)))?;
    Ok((
        node,
        Probe {
            t: p.t,
            x: grid.coords(node),
        },
    ))
}

fn probe_row(
    spec: &StudySpec,
    cell: StudyCell,
    index: usize,
    solved: &Solved,
    fine: Option<&Solved>,
    derivative_checked: usize,
    derivative_violations: usize,
) -> Result<StudyRow> {
    let g = &solved.grid;
    let (node, p) = snap(g, &spec.probes[index])?;
    let report = identities_at(spec, solved, &p, cell.r)?;
    let identity_floor = match fine {
        Some(f) => {
            let fine_report = identities_at(spec, f, &p, cell.r)?;
            Some(richardson(&report.signed, &fine_report.signed, g.level())?)
        }
        None => None,
    };
    let step = g.step_of(p.t);
    let f_value = solved.field.value(step, node);
    let measure = &report.measure;
    let gamma = lift_to_gamma(measure, spec.tau)?;
    let summary = measure_summary(&gamma, &spec.ic, &spec.model)?;
    let point = g.point(node);
    let q = lift(&point);
    let theorem_t = theorem_t_residual(&summary, p.t, &q, f_value)?;
    let derivative =
        derivative_probe(&solved.field, step, node, 3.0 * g.h()).map(|(a, grad)| (a, lift(&grad)));
    let theorem_t2 = match &derivative {
        Some((a, pl)) => theorem_t2_residuals(&summary, p.t, &q, *a, pl, f_value)?,
        None => [f64::NAN; 3],
    };
    let x_norm = point.norm();
    let eps = cell.eps;
    Ok(StudyRow {
        cell,
        probe: index,
        t: p.t,
        x: p.x.clone(),
        level: g.level(),
        h: g.h(),
        dt: g.dt(),
        f_value,
        identity: report.residuals,
        signed: report.signed.clone(),
        identity_floor,
        theorem_t,
        theorem_t2,
        commutation: commutation_residual(&summary, &spec.model),
        derivative,
        m1: measure.first_moment(),
        m2: measure.second_moment(),
        m1_bound: first_moment_bound(spec.ham.lipschitz(), eps, x_norm, p.t, cell.r),
        m2_bound: second_moment_bound(spec.second_moment_c, eps, x_norm, p.t, cell.r),
        cone_mass: cone_mass(measure, spec.tau),
        off_cone_mass: gamma.off_cone_mass,
        max_mass_drift: measure.max_mass_drift,
        min_density: measure.min_density,
        derivative_checked,
        derivative_violations,
        error: None,
    })
}

/// Solve one cell and evaluate every probe; failures are recorded per row.
pub fn run_cell(spec: &StudySpec, cell: StudyCell) -> Vec<StudyRow> {
    let level = spec.ham.level();
    let fail_all = |e: &Error| -> Vec<StudyRow> {
        spec.probes
            .iter()
            .enumerate()
            .map(|(i, p)| StudyRow::failed(cell, i, p, level, e))
            .collect()
    };
    let solved = match solve_cell(spec, &cell, cell.points) {
        Ok(s) => s,
        Err(e) => return fail_all(&e),
    };
    let fine = if spec.richardson {
        match solve_cell(spec, &cell, 2 * cell.points - 1) {
            Ok(s) => Some(s),
            Err(e) => return fail_all(&e),
        }
    } else {
        None
    };
    let nodes = spec.window.nodes(&solved.grid);
    let check = derivative_bound_check(&solved.field, &spec.model, &nodes, 3.0 * solved.grid.h());
    let rows = crate::par::map(spec.probes.len(), |i| {
        probe_row(
            spec,
            cell,
            i,
            &solved,
            fine.as_ref(),
            check.checked,
            check.violations.len(),
        )
    });
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| r.unwrap_or_else(|e| StudyRow::failed(cell, i, &spec.probes[i], level, &e)))
        .collect()
}

/// Run every cell (in parallel with `std`) and flag per-probe trends of the
/// identity, theorem and cone-mass columns across the ladder.
pub fn convergence_study(spec: &StudySpec, cells: &[StudyCell]) -> StudyTable {
    let per_cell: Vec<Vec<StudyRow>> = crate::par::map(cells.len(), |k| run_cell(spec, cells[k]));
    let mut trends = Vec::new();
    for probe in 0..spec.probes.len() {
        let col = |f: &dyn Fn(&StudyRow) -> f64| -> Vec<f64> {
            per_cell.iter().map(|rows| f(&rows[probe])).collect()
        };
        trends.push((
            "identity".to_string(),
            probe,
            decreasing(&col(&|r| r.identity_trend_value()), 0.0),
        ));
        trends.push((
            "theorem_t".to_string(),
            probe,
            decreasing(&col(&|r| r.theorem_t), 0.0),
        ));
        trends.push((
            "cone_mass".to_string(),
            probe,
            decreasing(&col(&|r| r.cone_mass), 0.0),
        ));
    }
    StudyTable {
        rows: per_cell.into_iter().flatten().collect(),
        trends,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trend_flags() {
        assert!(decreasing(&[3.0, 2.0, 2.0, 1.0], 0.0));
        assert!(!decreasing(&[3.0, 2.0, 2.5], 0.1));
        assert!(decreasing(&[3.0, 2.0, 2.1], 0.1));
        assert!(!decreasing(&[1.0, f64::NAN], 0.0));
        assert!(decreasing(&[], 0.0));
    }
}
