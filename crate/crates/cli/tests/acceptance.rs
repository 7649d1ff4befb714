//! Acceptance criteria 1-12, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`) so the lines always print.

use std::path::Path;
use std::process::Command as Process;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hj_envelope::commands::{run, selftest_config, Check, Command, Context, Report};
use hj_envelope::RunConfig;
use hj_envelope_core::geometry::{
    in_cone, in_dual_cone, lift, local_average, project, DyadicPoint, StepPath,
};
use hj_envelope_core::linalg::SymMat;
use hj_envelope_core::model::{h_eval, regularize, Nonlinearity, RegularizedNonlinearity};
use hj_envelope_core::TAU_CONE;

const CASES: usize = 1000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_sym(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> SymMat {
    let mut m = SymMat::zeros(d);
    for i in 0..d {
        for k in i..d {
            m.set(i, k, rng.gen_range(-scale..scale));
        }
    }
    m
}

fn random_psd(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> SymMat {
    let a = random_sym(rng, d, scale);
    let mut m = SymMat::zeros(d);
    for i in 0..d {
        for k in i..d {
            let v: f64 = (0..d).map(|l| a.get(i, l) * a.get(k, l)).sum();
            m.set(i, k, v);
        }
    }
    m
}

fn random_breakpoints(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut b: Vec<f64> = (1..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    b.push(0.0);
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

fn random_path(rng: &mut ChaCha8Rng, d: usize) -> StepPath {
    let n = rng.gen_range(1..9);
    let b = random_breakpoints(rng, n);
    let v = b.iter().map(|_| random_sym(rng, d, 1.0)).collect();
    StepPath::new(b, v).unwrap()
}

fn random_increasing(rng: &mut ChaCha8Rng, d: usize) -> StepPath {
    let n = rng.gen_range(1..9);
    let b = random_breakpoints(rng, n);
    let mut acc = SymMat::zeros(d);
    let v = b
        .iter()
        .map(|_| {
            acc.axpy(1.0, &random_psd(rng, d, 0.7));
            acc.clone()
        })
        .collect();
    StepPath::new(b, v).unwrap()
}

/// A path with PSD tail integrals: the tails are piecewise linear, so PSD
/// values at the breakpoints suffice.
fn random_dual(rng: &mut ChaCha8Rng, d: usize) -> StepPath {
    let n = rng.gen_range(1..9);
    let b = random_breakpoints(rng, n);
    let n = b.len();
    let tails: Vec<SymMat> = (0..n).map(|_| random_psd(rng, d, 0.7)).collect();
    let v = (0..n)
        .map(|k| {
            let end = if k + 1 < n { b[k + 1] } else { 1.0 };
            let mut m = tails[k].clone();
            if k + 1 < n {
                m.axpy(-1.0, &tails[k + 1]);
            }
            m.scale(1.0 / (end - b[k]))
        })
        .collect();
    StepPath::new(b, v).unwrap()
}

fn random_point(rng: &mut ChaCha8Rng, level: u32, d: usize) -> DyadicPoint {
    let blocks = (0..1usize << level)
        .map(|_| random_sym(rng, d, 1.0))
        .collect();
    DyadicPoint::new(level, blocks).unwrap()
}

fn random_cone_point(rng: &mut ChaCha8Rng, level: u32, d: usize) -> DyadicPoint {
    let mut acc = SymMat::zeros(d);
    let blocks = (0..1usize << level)
        .map(|_| {
            acc.axpy(1.0, &random_psd(rng, d, 0.7));
            acc.clone()
        })
        .collect();
    DyadicPoint::new(level, blocks).unwrap()
}

fn random_dual_point(rng: &mut ChaCha8Rng, level: u32, d: usize) -> DyadicPoint {
    // Differences of a decreasing PSD sequence have PSD tails.
    let n = 1usize << level;
    let tails: Vec<SymMat> = {
        let mut acc = SymMat::zeros(d);
        let mut t: Vec<SymMat> = (0..n)
            .map(|_| {
                acc.axpy(1.0, &random_psd(rng, d, 0.7));
                acc.clone()
            })
            .collect();
        t.reverse();
        t
    };
    let blocks = (0..n)
        .map(|k| {
            let mut m = tails[k].clone();
            if k + 1 < n {
                m.axpy(-1.0, &tails[k + 1]);
            }
            m
        })
        .collect();
    DyadicPoint::new(level, blocks).unwrap()
}

fn max_abs_diff(a: &DyadicPoint, b: &DyadicPoint) -> f64 {
    a.blocks()
        .iter()
        .zip(b.blocks())
        .map(|(x, y)| (x - y).max_abs_entry())
        .fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut cone_failures = 0usize;
    for case in 0..CASES {
        let d = 1 + case % 2;
        let j = rng.gen_range(0..6u32);
        let x = random_point(&mut rng, j, d);
        let y = random_point(&mut rng, j, d);
        let iso = (lift(&x).inner_l2(&lift(&y)).unwrap() - x.inner(&y).unwrap()).abs();
        worst = worst.max(iso);
        worst = worst.max(max_abs_diff(&project(&lift(&x), j), &x));
        let kappa = random_path(&mut rng, d);
        let excess = project(&kappa, j).norm() - kappa.norm_l2();
        worst = worst.max(excess.max(0.0));
        let jp = j + rng.gen_range(0..4u32);
        let chained = project(&lift(&project(&kappa, jp)), j);
        worst = worst.max(max_abs_diff(&chained, &project(&kappa, j)));

        let xc = random_cone_point(&mut rng, j, d);
        let xd = random_dual_point(&mut rng, j, d);
        let q = random_increasing(&mut rng, d);
        let kd = random_dual(&mut rng, d);
        let ok = lift(&xc).is_increasing_psd(TAU_CONE)
            && lift(&xd).is_in_dual(TAU_CONE)
            && in_cone(&project(&q, j), TAU_CONE)
            && in_cone(&project(&lift(&xc), j), TAU_CONE)
            && kd.is_in_dual(TAU_CONE)
            && in_dual_cone(&project(&kd, j), TAU_CONE)
            && in_dual_cone(&project(&lift(&xd), j), TAU_CONE);
        cone_failures += usize::from(!ok);
    }
    outcome(
        worst <= 1e-12 && cone_failures == 0,
        format!(
            "{CASES} cases per law, worst deviation {worst:.2e}, cone failures {cone_failures}"
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0usize;
    let mut worst_ratio = 0.0f64;
    for case in 0..CASES {
        let d = 1 + case % 2;
        let q = random_increasing(&mut rng, d);
        for j in 1..=6u32 {
            let lhs = q.sub(&local_average(&q, j)).unwrap().norm_l1();
            let rhs = 2f64.powf((3.0 - j as f64) / 2.0) * d as f64 * q.norm_l2();
            worst_ratio = worst_ratio.max(lhs / rhs);
            violations += usize::from(lhs > rhs);
        }
    }
    outcome(
        violations == 0,
        format!(
            "{} checks, {violations} violations, max lhs/rhs {worst_ratio:.3}",
            CASES * 6
        ),
    )
}

/// Exhaustive search over monotone `q = m * delta` with tail-sum feasibility,
/// by dynamic programming over (value, clamped tail sum).
fn lattice_h(reg: &RegularizedNonlinearity, kappa: &[f64], delta: f64) -> f64 {
    let n = kappa.len();
    let top = kappa.iter().cloned().fold(0.0, f64::max);
    let m_max = (top / delta).ceil() as usize + 1;
    let need: Vec<i64> = (0..n)
        .map(|k| {
            let tail: f64 = kappa[k..].iter().sum();
            (tail / delta - 1e-9).ceil() as i64
        })
        .collect();
    let cap = need.iter().cloned().max().unwrap().max(0) as usize;
    let cost: Vec<f64> = (0..=m_max)
        .map(|m| reg.eval(&SymMat::scalar(m as f64 * delta)) / n as f64)
        .collect();
    let width = cap + 1;
    let mut f = vec![f64::INFINITY; (m_max + 1) * width];
    for m in 0..=m_max {
        let t = m.min(cap);
        if t as i64 >= need[n - 1] {
            f[m * width + t] = cost[m];
        }
    }
    for k in (0..n - 1).rev() {
        // g(m', t) = min over m >= m' of f(m, t)
        let mut g = f.clone();
        for m in (0..m_max).rev() {
            for t in 0..width {
                let above = g[(m + 1) * width + t];
                let cur = &mut g[m * width + t];
                if above < *cur {
                    *cur = above;
                }
            }
        }
        let mut next = vec![f64::INFINITY; (m_max + 1) * width];
        for m in 0..=m_max {
            for t in 0..width {
                let v = g[m * width + t];
                if !v.is_finite() {
                    continue;
                }
                let nt = (t + m).min(cap);
                if (nt as i64) < need[k] {
                    continue;
                }
                let slot = &mut next[m * width + nt];
                let c = v + cost[m];
                if c < *slot {
                    *slot = c;
                }
            }
        }
        f = next;
    }
    f.into_iter().fold(f64::INFINITY, f64::min)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let reg = regularize(&Nonlinearity::sk(1)).unwrap();
    let n = 16;
    let bps: Vec<f64> = (0..n).map(|k| k as f64 / n as f64).collect();
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 50 {
        let kappa: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if kappa.windows(2).all(|w| w[0] <= w[1]) {
            continue;
        }
        let path = StepPath::from_scalars(bps.clone(), &kappa).unwrap();
        let exact = h_eval(&reg, &path).unwrap();
        let brute = lattice_h(&reg, &kappa, 1.0 / 512.0);
        worst = worst.max((exact - brute).abs());
        done += 1;
    }
    outcome(
        worst <= 1e-3,
        format!("50 paths, max |LCM - lattice search| {worst:.2e} (tol 1e-3)"),
    )
}

fn parse(name: &str, src: &str) -> RunConfig {
    RunConfig::parse(src, Path::new(name)).unwrap_or_else(|e| panic!("{e}"))
}

fn checks<'a>(report: &'a Report, pattern: &'a str) -> impl Iterator<Item = &'a Check> {
    report
        .checks
        .iter()
        .filter(move |c| c.name.contains(pattern))
}

fn summarize(report: &Report, pattern: &str) -> (bool, usize, f64) {
    let mut pass = true;
    let mut n = 0;
    let mut worst = 0.0f64;
    for c in checks(report, pattern) {
        pass &= c.pass;
        n += 1;
        worst = worst.max(c.value);
    }
    (pass && n > 0, n, worst)
}

fn failed_names(report: &Report, pattern: &str) -> String {
    let bad: Vec<&str> = checks(report, pattern)
        .filter(|c| !c.pass)
        .map(|c| c.name.as_str())
        .collect();
    if bad.is_empty() {
        String::new()
    } else {
        format!("; failed: {}", bad.join(", "))
    }
}

const SK_PROBES: &str = r#"
[[probe]]
t = 0.2
breakpoints = [0.0, 0.5]
values = [0.8, 1.8]

[[probe]]
t = 0.3
breakpoints = [0.0, 0.5]
values = [1.0, 2.0]

[[probe]]
t = 0.15
breakpoints = [0.0, 0.3, 0.7]
values = [0.7, 1.2, 1.9]

[[probe]]
t = 0.25
breakpoints = [0.0, 0.6]
values = [1.1, 1.6]

[[probe]]
t = 0.1
breakpoints = [0.0, 0.2, 0.55]
values = [0.9, 1.3, 1.7]
"#;

fn sk_config(extra: &str) -> String {
    format!(
        r#"version = 1
seed = 11

[model]
nonlinearity = "sk"

[initial]
profile = "logcosh"

[grid]
low = -1.0
high = 3.0
points = 41
horizon = 0.8

{extra}
{SK_PROBES}
"#
    )
}

struct Runs {
    reports: Vec<(String, Report)>,
}

impl Runs {
    fn run(&mut self, label: &str, command: Command, cfg: &RunConfig) -> &Report {
        let start = Instant::now();
        let report =
            run(command, cfg, &Context::default()).unwrap_or_else(|e| panic!("{label}: {e}"));
        eprintln!("  [{label}: {:.1?}]", start.elapsed());
        self.reports.push((label.to_string(), report));
        &self.reports.last().unwrap().1
    }

    /// Whether every check matching `pattern` passed in every run that has one.
    fn all(&self, pattern: &str) -> (bool, usize, f64, String) {
        let mut pass = true;
        let mut n = 0;
        let mut worst = 0.0f64;
        let mut bad = String::new();
        for (label, r) in &self.reports {
            for c in checks(r, pattern) {
                pass &= c.pass;
                n += 1;
                worst = worst.max(c.value);
                if !c.pass {
                    bad.push_str(&format!(" {label}:{}", c.name));
                }
            }
        }
        (pass && n > 0, n, worst, bad)
    }
}

fn main() {
    let total = Instant::now();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut runs = Runs {
        reports: Vec::new(),
    };

    results.push((1, "projection/lift laws", criterion_1()));
    results.push((2, "path approximation", criterion_2()));
    results.push((3, "H oracle", criterion_3()));

    let selftest = selftest_config(0).unwrap();
    let r = runs.run("selftest", Command::Selftest, &selftest);
    let (pass, n, _) = summarize(r, "selftest.");
    let exact = checks(r, "affine_exactness")
        .next()
        .map_or(f64::NAN, |c| c.value);
    let comm = checks(r, "commutation")
        .map(|c| c.value)
        .fold(0.0, f64::max);
    results.push((
        4,
        "affine exactness",
        outcome(
            pass,
            format!(
                "{n} checks, field error {exact:.2e}, commutation {comm:e}{}",
                failed_names(r, "selftest.")
            ),
        ),
    ));

    let cfg = parse(
        "acceptance-hopf.toml",
        &sk_config(
            r#"[ladder]
levels = [0, 1]
eta = [0.05]
eps = [0.05]

[checks]
cone_slack = 0.1
box_margin = 0.8"#,
        ),
    );
    let r = runs.run("characteristics", Command::Characteristics, &cfg);
    let (gap_ok, n_gap, gap) = summarize(r, "relative_gap");
    let (foot_ok, n_foot, foot) = summarize(r, "foot_residual");
    results.push((
        5,
        "convex cross-validation",
        outcome(
            gap_ok && foot_ok && n_gap >= 10,
            format!(
                "{n_gap} probe values, max relative gap {gap:.2e}; {n_foot} foot residuals, max {foot:.2e}{}",
                failed_names(r, "characteristics.j")
            ),
        ),
    ));

    let ladder = sk_config(
        r#"[ladder]
levels = [0, 1]
eta = [0.2, 0.1, 0.05]
eps = [0.2, 0.1, 0.05]
points = [41, 61, 81]

[checks]
cone_slack = 0.1
box_margin = 0.8
richardson = true
identity_ratio = 0.7"#,
    );
    let cfg = parse("acceptance-sk.toml", &ladder);
    runs.run("sk-adjoint", Command::Adjoint, &cfg);
    runs.run("sk-solve", Command::Solve, &cfg);
    let r = runs.run("sk-convergence", Command::Convergence, &cfg);
    let (ratio_ok, n_ratio, _) = summarize(r, "cone_ratio");
    let (abs_ok, _, worst_abs) = summarize(r, ".cone_mass");
    // probes whose cylinders leave the cone at some cell are not checked
    let cone_pass = ratio_ok && abs_ok && n_ratio >= 5;
    let cone_detail = format!(
        "SK ladder (D = 1): {n_ratio} interior (probe, level) pairs, finest off-cone mass max {worst_abs:.2e}{}",
        failed_names(r, "cone_")
    );

    let bip = parse(
        "acceptance-bipartite.toml",
        r#"version = 1

[model]
nonlinearity = "bipartite"

[initial]
profile = "ratio"
amplitude = 0.5

[grid]
low = -1.0
high = 2.0
points = 21
horizon = 0.6

[ladder]
levels = [0]
eta = [0.2, 0.1, 0.05]
eps = [0.2, 0.1, 0.05]
r = [0.3, 0.3, 0.3]

[[probe]]
t = 0.2
breakpoints = [0.0]
values = [[[0.5, 0.0], [0.0, 0.5]]]

[checks]
cone_slack = 0.1
box_margin = 0.75
richardson = true
"#,
    );
    let r = runs.run("bipartite-convergence", Command::Convergence, &bip);
    let id = checks(r, "identity_ratio").next().cloned();
    let trend = match &id {
        Some(c) => outcome(
            c.pass,
            format!(
                "floor-subtracted identity residual {:.3e} at finest vs {:.3e} = 0.5 x coarsest",
                c.value, c.tolerance
            ),
        ),
        None => outcome(false, "no identity trend recorded"),
    };

    let (m_ok, m_n, _, m_bad) = runs.all("mass_drift");
    let (d_ok, _, _, d_bad) = runs.all("negative_density");
    results.push((
        6,
        "adjoint conservation",
        outcome(m_ok && d_ok, format!("{m_n} runs checked{m_bad}{d_bad}")),
    ));
    let (f_ok, f_n, _, f_bad) = runs.all("first_moment_violations");
    let (s_ok, _, _, s_bad) = runs.all("second_moment_violations");
    results.push((
        7,
        "moment bounds",
        outcome(f_ok && s_ok, format!("{f_n} runs checked{f_bad}{s_bad}")),
    ));
    results.push((8, "cone support", outcome(cone_pass, cone_detail)));
    let (v_ok, v_n, _, v_bad) = runs.all("derivative_violations");
    results.push((
        9,
        "derivative bounds",
        outcome(
            v_ok,
            format!("{v_n} field sweeps, zero violations required{v_bad}"),
        ),
    ));
    results.push((10, "envelope residual trend", trend));

    let cfg = parse(
        "acceptance-levels.toml",
        &sk_config(
            r#"[ladder]
levels = [0, 1, 2]
eta = [0.05]
eps = [0.05]

[checks]
grid_levels = []"#,
        ),
    );
    let r = runs.run("cross-level", Command::Characteristics, &cfg);
    let (ok, n, _) = summarize(r, "cross_level_decreasing");
    results.push((
        11,
        "cross-level stability",
        outcome(
            ok && n >= 5,
            format!("{n} probes{}", failed_names(r, "cross_level")),
        ),
    ));

    let exe = env!("CARGO_BIN_EXE_hj-envelope");
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let status = Process::new(exe)
            .args(["selftest", "--seed", "5", "--out"])
            .arg(&out)
            .status()
            .unwrap();
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    std::fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort();
        outputs.push((status.success(), files));
    }
    let same = outputs[0].1 == outputs[1].1;
    results.push((
        12,
        "determinism",
        outcome(
            same && outputs.iter().all(|o| o.0),
            format!("{} files compared byte for byte", outputs[0].1.len()),
        ),
    ));

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (k, name, o) in &results {
        println!(
            "criterion {k:>2} {}: {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} of {} passed in {:.1?}",
        results.len() - failed,
        results.len(),
        total.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
