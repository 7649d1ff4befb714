//! Run configuration: a versioned TOML document, validated into core types.
//!
//! Every validation error names the offending key and, when the key is
//! present in the source, its line.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use hj_envelope_core::envelope::StudyCell;
use hj_envelope_core::geometry::StepPath;
use hj_envelope_core::linalg::SymMat;
use hj_envelope_core::model::{
    regularize, InitialCondition, Nonlinearity, PathOptions, Profile, RegularizedNonlinearity,
    TableSpec, MAX_SCALAR_LEVEL,
};
use hj_envelope_core::solver::HopfSearch;

use crate::error::ConfigError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    version: u32,
    seed: Option<u64>,
    jobs: Option<usize>,
    model: RawModel,
    initial: RawInitial,
    grid: RawGrid,
    table: Option<RawTable>,
    ladder: RawLadder,
    #[serde(default, rename = "probe")]
    probes: Vec<RawProbe>,
    #[serde(default)]
    checks: RawChecks,
    #[serde(default)]
    hopf: RawHopf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    nonlinearity: String,
    dim: Option<usize>,
    coefficients: Option<Vec<(u32, f64)>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    profile: String,
    slope: Option<f64>,
    scale: Option<f64>,
    amplitude: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    low: f64,
    high: f64,
    points: usize,
    horizon: f64,
    #[serde(default = "default_cfl")]
    cfl: f64,
}

fn default_cfl() -> f64 {
    0.9
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    low: f64,
    high: f64,
    points: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLadder {
    levels: Vec<u32>,
    eta: Vec<f64>,
    eps: Vec<f64>,
    r: Option<Vec<f64>>,
    points: Option<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawValue {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProbe {
    t: f64,
    breakpoints: Vec<f64>,
    values: Vec<RawValue>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawChecks {
    s_nodes: usize,
    tau: f64,
    second_moment_c: f64,
    richardson: bool,
    cone_slack: f64,
    box_margin: Option<f64>,
    identity_ratio: f64,
    cone_ratio: f64,
    cone_abs: f64,
    characteristic_factor: f64,
    derivative_factor: f64,
    grid_levels: Option<Vec<u32>>,
}

impl Default for RawChecks {
    fn default() -> Self {
        RawChecks {
            s_nodes: 5,
            tau: hj_envelope_core::TAU_CONE,
            second_moment_c: DEFAULT_SECOND_MOMENT_C,
            richardson: false,
            cone_slack: 0.05,
            box_margin: None,
            identity_ratio: 0.5,
            cone_ratio: 0.3,
            cone_abs: 0.05,
            characteristic_factor: 5.0,
            derivative_factor: 3.0,
            grid_levels: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawHopf {
    starts: usize,
    max_iter: usize,
    radius: f64,
    scan: usize,
}

impl Default for RawHopf {
    fn default() -> Self {
        let d = HopfSearch::default();
        RawHopf {
            starts: d.starts,
            max_iter: d.max_iter,
            radius: d.radius,
            scan: d.scan,
        }
    }
}

/// Second-moment constant calibrated on the one-dimensional affine run and
/// frozen.
pub const DEFAULT_SECOND_MOMENT_C: f64 = 2.0;

/// Grid box shared by every axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub low: f64,
    pub high: f64,
    pub points: usize,
    pub horizon: f64,
    pub cfl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub t: f64,
    pub q: StepPath,
}

/// Tolerances and switches of the enabled checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Checks {
    pub s_nodes: usize,
    pub tau: f64,
    pub second_moment_c: f64,
    pub richardson: bool,
    pub cone_slack: f64,
    pub box_margin: f64,
    pub identity_ratio: f64,
    pub cone_ratio: f64,
    pub cone_abs: f64,
    pub characteristic_factor: f64,
    pub derivative_factor: f64,
    /// Levels at which `characteristics` also solves on the grid.
    pub grid_levels: Vec<u32>,
}

/// A validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub file: PathBuf,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub model: Nonlinearity,
    pub reg: RegularizedNonlinearity,
    pub ic: InitialCondition,
    pub grid: GridConfig,
    pub table: TableSpec,
    pub levels: Vec<u32>,
    pub cells: Vec<StudyCell>,
    /// Whether `r = sqrt(eps)` was applied.
    pub r_coupled: bool,
    pub probes: Vec<ProbeConfig>,
    pub checks: Checks,
    pub hopf: HopfSearch,
    source: String,
}

#[derive(Debug, Clone, Copy)]
enum Seg<'a> {
    Key(&'a str),
    Index(usize),
}

fn line_of_offset(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

/// Line of the item at `path`, falling back to its closest present parent.
fn line_of(src: &str, path: &[Seg]) -> Option<usize> {
    let doc = toml_edit::ImDocument::parse(src.to_owned()).ok()?;
    let span = span_in_table(doc.as_table(), path, None)?;
    Some(line_of_offset(src, span.start))
}

type Span = Option<std::ops::Range<usize>>;

fn span_in_table(t: &toml_edit::Table, path: &[Seg], best: Span) -> Span {
    let Some((Seg::Key(k), rest)) = path.split_first() else {
        return best;
    };
    match t.get_key_value(k) {
        Some((key, item)) => span_in_item(item, rest, key.span().or(best)),
        None => best,
    }
}

fn span_in_item(item: &toml_edit::Item, path: &[Seg], best: Span) -> Span {
    use toml_edit::Item;
    match (path.first(), item) {
        (None, _) => best,
        (Some(_), Item::Table(t)) => span_in_table(t, path, best),
        (Some(Seg::Index(i)), Item::ArrayOfTables(a)) => match a.get(*i) {
            Some(t) => span_in_table(t, &path[1..], t.span().or(best)),
            None => best,
        },
        (Some(_), Item::Value(v)) => span_in_value(v, path, best),
        _ => best,
    }
}

fn span_in_value(v: &toml_edit::Value, path: &[Seg], best: Span) -> Span {
    use toml_edit::Value;
    match (path.split_first(), v) {
        (None, _) => best,
        (Some((Seg::Index(i), rest)), Value::Array(a)) => match a.get(*i) {
            Some(e) => span_in_value(e, rest, e.span().or(best)),
            None => best,
        },
        (Some((Seg::Key(k), rest)), Value::InlineTable(t)) => match t.get_key_value(k) {
            Some((key, e)) => match e.as_value() {
                Some(v) => span_in_value(v, rest, key.span().or(best)),
                None => key.span().or(best),
            },
            None => best,
        },
        _ => best,
    }
}

fn path_string(path: &[Seg]) -> String {
    let mut s = String::new();
    for seg in path {
        match seg {
            Seg::Key(k) => {
                if !s.is_empty() {
                    s.push('.');
                }
                s.push_str(k);
            }
            Seg::Index(i) => s.push_str(&format!("[{i}]")),
        }
    }
    s
}

struct Ctx<'s> {
    file: &'s Path,
    src: &'s str,
}

impl Ctx<'_> {
    fn err(&self, path: &[Seg], message: impl Into<String>) -> ConfigError {
        ConfigError {
            file: self.file.to_path_buf(),
            line: line_of(self.src, path),
            key: path_string(path),
            message: message.into(),
        }
    }
}

impl RunConfig {
    /// Read and validate a configuration file.
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|e| ConfigError {
            file: path.to_path_buf(),
            line: None,
            key: String::new(),
            message: format!("cannot read: {e}"),
        })?;
        RunConfig::parse(&src, path)
    }

    /// Validate `src`; `file` only labels diagnostics.
    pub fn parse(src: &str, file: &Path) -> Result<RunConfig, ConfigError> {
        let raw: Raw = toml::from_str(src).map_err(|e| ConfigError {
            file: file.to_path_buf(),
            line: e.span().map(|s| line_of_offset(src, s.start)),
            key: String::new(),
            message: e.message().trim().to_string(),
        })?;
        let ctx = Ctx { file, src };
        validate(raw, &ctx)
    }

    /// Error anchored at the key `path` (dot-separated, `[i]` for indices).
    pub fn error_at(&self, key: &str, message: impl Into<String>) -> ConfigError {
        let parts: Vec<String> = key.split('.').map(str::to_string).collect();
        let mut segs = Vec::new();
        for p in &parts {
            match p.split_once('[') {
                Some((k, idx)) => {
                    segs.push(Seg::Key(k));
                    if let Ok(i) = idx.trim_end_matches(']').parse() {
                        segs.push(Seg::Index(i));
                    }
                }
                None => segs.push(Seg::Key(p)),
            }
        }
        let ctx = Ctx {
            file: &self.file,
            src: &self.source,
        };
        ctx.err(&segs, message)
    }

    /// The finest (last) ladder cell.
    pub fn finest(&self) -> StudyCell {
        *self.cells.last().expect("validated ladder is non-empty")
    }
}

fn positive(ctx: &Ctx, path: &[Seg], v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ctx.err(path, format!("must be positive, got {v}")))
    }
}

fn matrix_value(ctx: &Ctx, path: &[Seg], v: &RawValue, dim: usize) -> Result<SymMat, ConfigError> {
    match v {
        RawValue::Scalar(x) if dim == 1 => Ok(SymMat::scalar(*x)),
        RawValue::Matrix(rows) if rows.len() == dim && rows.iter().all(|r| r.len() == dim) => {
            for i in 0..dim {
                for k in 0..i {
                    if rows[i][k] != rows[k][i] {
                        return Err(ctx.err(path, "matrix value must be symmetric"));
                    }
                }
            }
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            Ok(SymMat::from_rows(&refs))
        }
        _ => Err(ctx.err(
            path,
            format!("expected a {dim}x{dim} value (a number when the dimension is 1)"),
        )),
    }
}

fn validate(raw: Raw, ctx: &Ctx) -> Result<RunConfig, ConfigError> {
    use Seg::{Index, Key};
    if raw.version != CONFIG_VERSION {
        return Err(ctx.err(
            &[Key("version")],
            format!(
                "unsupported version {} (expected {CONFIG_VERSION})",
                raw.version
            ),
        ));
    }
    if raw.jobs == Some(0) {
        return Err(ctx.err(&[Key("jobs")], "must be at least 1"));
    }

    let m = &raw.model;
    let model = match m.nonlinearity.as_str() {
        "sk" => {
            let dim = m.dim.unwrap_or(1);
            if dim != 1 {
                return Err(ctx.err(
                    &[Key("model"), Key("dim")],
                    "the sk model is supported in dimension 1 only",
                ));
            }
            Nonlinearity::sk(dim)
        }
        "pspin" => {
            let coeffs = m.coefficients.clone().ok_or_else(|| {
                ctx.err(
                    &[Key("model"), Key("coefficients")],
                    "pspin needs [[p, c], ...] coefficients",
                )
            })?;
            Nonlinearity::pspin(coeffs)
                .map_err(|e| ctx.err(&[Key("model"), Key("coefficients")], e.to_string()))?
        }
        "bipartite" => Nonlinearity::bipartite(),
        "bipartite-offdiag" => Nonlinearity::bipartite_offdiagonal(),
        other => {
            return Err(ctx.err(
                &[Key("model"), Key("nonlinearity")],
                format!("unknown nonlinearity `{other}` (sk, pspin, bipartite, bipartite-offdiag)"),
            ))
        }
    };
    if m.nonlinearity != "sk" && m.dim.is_some() {
        return Err(ctx.err(
            &[Key("model"), Key("dim")],
            "only the sk model takes a dimension",
        ));
    }
    let reg = regularize(&model)
        .map_err(|e| ctx.err(&[Key("model"), Key("nonlinearity")], e.to_string()))?;

    let i = &raw.initial;
    let param = |name: &'static str, v: Option<f64>| -> Result<f64, ConfigError> {
        let v = v.ok_or_else(|| ctx.err(&[Key("initial")], format!("missing `{name}`")))?;
        positive(ctx, &[Key("initial"), Key(name)], v)?;
        Ok(v)
    };
    let profile = match i.profile.as_str() {
        "affine" => Profile::Affine {
            slope: param("slope", i.slope.or(Some(1.0)))?,
        },
        "logcosh" => Profile::LogCosh {
            scale: param("scale", i.scale.or(Some(1.0)))?,
        },
        "ratio" => Profile::Ratio {
            amplitude: param("amplitude", i.amplitude.or(Some(0.5)))?,
        },
        other => {
            return Err(ctx.err(
                &[Key("initial"), Key("profile")],
                format!("unknown profile `{other}` (affine, logcosh, ratio)"),
            ))
        }
    };
    let ic = InitialCondition::new(profile, model.dim())
        .map_err(|e| ctx.err(&[Key("initial"), Key("profile")], e.to_string()))?;

    let g = &raw.grid;
    if !(g.low < g.high) || !g.low.is_finite() || !g.high.is_finite() {
        return Err(ctx.err(&[Key("grid"), Key("high")], "need low < high"));
    }
    if g.points < 3 {
        return Err(ctx.err(
            &[Key("grid"), Key("points")],
            "need at least 3 points per axis",
        ));
    }
    positive(ctx, &[Key("grid"), Key("horizon")], g.horizon)?;
    if !(g.cfl > 0.0 && g.cfl <= 1.0) {
        return Err(ctx.err(&[Key("grid"), Key("cfl")], "must lie in (0, 1]"));
    }
    let grid = GridConfig {
        low: g.low,
        high: g.high,
        points: g.points,
        horizon: g.horizon,
        cfl: g.cfl,
    };

    let table = match &raw.table {
        Some(t) => {
            if !(t.low < t.high) {
                return Err(ctx.err(&[Key("table"), Key("high")], "need low < high"));
            }
            if t.points < 2 {
                return Err(ctx.err(&[Key("table"), Key("points")], "need at least 2 points"));
            }
            TableSpec {
                lo: t.low,
                hi: t.high,
                points: t.points,
                path: PathOptions::default(),
            }
        }
        None => TableSpec::default(),
    };

    let l = &raw.ladder;
    if l.levels.is_empty() {
        return Err(ctx.err(&[Key("ladder"), Key("levels")], "need at least one level"));
    }
    for (k, &j) in l.levels.iter().enumerate() {
        let path = [Key("ladder"), Key("levels"), Index(k)];
        if model.dim() == 1 && j > MAX_SCALAR_LEVEL {
            return Err(ctx.err(
                &path,
                format!("levels above {MAX_SCALAR_LEVEL} are not supported"),
            ));
        }
        if model.dim() > 1 && j > 0 {
            return Err(ctx.err(&path, "matrix-valued models are tabulated at level 0 only"));
        }
        if (1usize << j) * model.dim() * (model.dim() + 1) / 2
            > hj_envelope_core::solver::MAX_COORDS
        {
            return Err(ctx.err(&path, "state dimension exceeds the grid solver limit"));
        }
    }
    if l.eta.is_empty() {
        return Err(ctx.err(&[Key("ladder"), Key("eta")], "need at least one value"));
    }
    if l.eps.len() != l.eta.len() {
        return Err(ctx.err(
            &[Key("ladder"), Key("eps")],
            format!("needs {} values to pair with eta", l.eta.len()),
        ));
    }
    for (k, v) in l.eta.iter().enumerate() {
        positive(ctx, &[Key("ladder"), Key("eta"), Index(k)], *v)?;
    }
    for (k, v) in l.eps.iter().enumerate() {
        positive(ctx, &[Key("ladder"), Key("eps"), Index(k)], *v)?;
    }
    let r_coupled = l.r.is_none();
    let rs: Vec<f64> = match &l.r {
        Some(r) => {
            if r.len() != l.eta.len() {
                return Err(ctx.err(
                    &[Key("ladder"), Key("r")],
                    format!("needs {} values to pair with eta", l.eta.len()),
                ));
            }
            for (k, v) in r.iter().enumerate() {
                positive(ctx, &[Key("ladder"), Key("r"), Index(k)], *v)?;
            }
            r.clone()
        }
        None => l.eps.iter().map(|e| e.sqrt()).collect(),
    };
    let points: Vec<usize> = match &l.points {
        Some(p) => {
            if p.len() != l.eta.len() {
                return Err(ctx.err(
                    &[Key("ladder"), Key("points")],
                    format!("needs {} values to pair with eta", l.eta.len()),
                ));
            }
            for (k, v) in p.iter().enumerate() {
                if *v < 3 {
                    return Err(ctx.err(
                        &[Key("ladder"), Key("points"), Index(k)],
                        "need at least 3 points per axis",
                    ));
                }
            }
            p.clone()
        }
        None => vec![grid.points; l.eta.len()],
    };
    let cells: Vec<StudyCell> = (0..l.eta.len())
        .map(|k| StudyCell {
            eta: l.eta[k],
            eps: l.eps[k],
            r: rs[k],
            points: points[k],
        })
        .collect();
    let j_min = *l.levels.iter().min().expect("levels checked non-empty");
    for (k, c) in cells.iter().enumerate() {
        let h = (grid.high - grid.low) / (c.points - 1) as f64 / ((1u64 << j_min) as f64).sqrt();
        if c.r < 2.0 * h * (1.0 - 1e-12) {
            let key = if r_coupled { "eps" } else { "r" };
            return Err(ctx.err(
                &[Key("ladder"), Key(key), Index(k)],
                format!("ball radius {} is below twice the grid spacing {h}", c.r),
            ));
        }
    }
    let r_max = rs.iter().cloned().fold(0.0, f64::max);

    let mut probes = Vec::new();
    for (k, p) in raw.probes.iter().enumerate() {
        let base = [Key("probe"), Index(k)];
        let at = |key: &'static str| [base[0], base[1], Key(key)];
        if !(p.t >= 0.0) || p.t + r_max > grid.horizon + 1e-12 {
            return Err(ctx.err(
                &at("t"),
                format!(
                    "t + r = {} exceeds the horizon {}",
                    p.t + r_max,
                    grid.horizon
                ),
            ));
        }
        if p.values.len() != p.breakpoints.len() {
            return Err(ctx.err(&at("values"), "need one value per breakpoint"));
        }
        let values = p
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                matrix_value(
                    ctx,
                    &[base[0], base[1], Key("values"), Index(i)],
                    v,
                    model.dim(),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        let q = StepPath::new(p.breakpoints.clone(), values)
            .map_err(|e| ctx.err(&at("breakpoints"), e.to_string()))?;
        if !q.is_increasing_psd(0.0) {
            return Err(ctx.err(&at("values"), "probe path must be increasing and PSD"));
        }
        probes.push(ProbeConfig { t: p.t, q });
    }

    let c = &raw.checks;
    if c.s_nodes == 0 {
        return Err(ctx.err(&[Key("checks"), Key("s_nodes")], "need at least one node"));
    }
    positive(ctx, &[Key("checks"), Key("tau")], c.tau)?;
    positive(
        ctx,
        &[Key("checks"), Key("second_moment_c")],
        c.second_moment_c,
    )?;
    let half_width = 0.5 * (grid.high - grid.low);
    let box_margin = c.box_margin.unwrap_or(0.25 * (grid.high - grid.low));
    if !(box_margin >= 0.0 && box_margin < half_width) {
        return Err(ctx.err(
            &[Key("checks"), Key("box_margin")],
            "must lie in [0, half the box width)",
        ));
    }
    let grid_levels = match &c.grid_levels {
        Some(g) => {
            if let Some(k) = g.iter().position(|j| !l.levels.contains(j)) {
                return Err(ctx.err(
                    &[Key("checks"), Key("grid_levels"), Index(k)],
                    "must be one of the ladder levels",
                ));
            }
            g.clone()
        }
        None => l.levels.clone(),
    };
    let checks = Checks {
        s_nodes: c.s_nodes,
        tau: c.tau,
        second_moment_c: c.second_moment_c,
        richardson: c.richardson,
        cone_slack: c.cone_slack,
        box_margin,
        identity_ratio: c.identity_ratio,
        cone_ratio: c.cone_ratio,
        cone_abs: c.cone_abs,
        characteristic_factor: c.characteristic_factor,
        derivative_factor: c.derivative_factor,
        grid_levels,
    };

    let h = &raw.hopf;
    positive(ctx, &[Key("hopf"), Key("radius")], h.radius)?;
    let seed = raw.seed.unwrap_or(0);
    let hopf = HopfSearch {
        starts: h.starts,
        max_iter: h.max_iter,
        radius: h.radius,
        scan: h.scan,
        seed,
        ..HopfSearch::default()
    };

    Ok(RunConfig {
        file: ctx.file.to_path_buf(),
        seed,
        jobs: raw.jobs,
        model,
        reg,
        ic,
        grid,
        table,
        levels: l.levels.clone(),
        cells,
        r_coupled,
        probes,
        checks,
        hopf,
        source: ctx.src.to_string(),
    })
}
