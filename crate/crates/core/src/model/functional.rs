//! The functional `H(kappa) = inf { int xi_bar(q) : q in Q_2, q - kappa in Q_2^* }`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::regularized::RegularizedNonlinearity;
use crate::error::{Error, Result};
use crate::geometry::{project_increasing, ProjectionOptions, StepPath};
use crate::linalg::SymMat;
use crate::TAU_CONE;

/// Controls the projected-gradient path optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOptions {
    /// Equal sub-cells per interval of the input path.
    pub substeps: usize,
    pub max_iter: usize,
    /// Target norm of the projected-gradient step.
    pub tol: f64,
    pub projection: ProjectionOptions,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            substeps: 2,
            max_iter: 4000,
            tol: 1e-9,
            projection: ProjectionOptions {
                max_iter: 20_000,
                tol: 1e-12,
            },
        }
    }
}

/// Result of the constrained path minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct PathInfimum {
    pub value: f64,
    pub minimizer: StepPath,
    /// Largest constraint violation of the minimizer.
    pub violation: f64,
    /// Norm of the final projected-gradient step.
    pub gap: f64,
}

/// `H(kappa)`: exact for cone paths and scalar paths, optimized otherwise.
pub fn h_eval(reg: &RegularizedNonlinearity, kappa: &StepPath) -> Result<f64> {
    if kappa.dim() != reg.dim() {
        return Err(Error::Shape {
            what: "path dimension",
            expected: reg.dim(),
            found: kappa.dim(),
        });
    }
    if kappa.is_increasing_psd(0.0) {
        return Ok(kappa.integrate(|a| reg.eval(a)));
    }
    if kappa.dim() == 1 {
        let q = lcm_minimizer(kappa);
        return Ok(q.integrate(|a| reg.eval(a)));
    }
    if kappa.len() == 1 && kappa.dim() == 2 && reg.diagonal_only() {
        return h_constant_diagonal(reg, &kappa.values()[0]);
    }
    Ok(h_path_minimize(reg, kappa, PathOptions::default())?.value)
}

/// Scalar minimizer: minus the slope of the least concave majorant of the
/// tail integral `t -> int_t^1 kappa`, clamped at zero.
pub fn lcm_minimizer(kappa: &StepPath) -> StepPath {
    let n = kappa.len();
    let mut xs = Vec::with_capacity(n + 1);
    let mut cs = Vec::with_capacity(n + 1);
    let mut tail = vec![0.0; n + 1];
    for k in (0..n).rev() {
        tail[k] = tail[k + 1] + kappa.interval_len(k) * kappa.values()[k].get(0, 0);
    }
    for k in 0..=n {
        xs.push(if k < n { kappa.breakpoints()[k] } else { 1.0 });
        cs.push(tail[k]);
    }
    // upper hull by monotone chain
    let mut hull: Vec<usize> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (xs[b] - xs[a]) * (cs[i] - cs[a]) - (cs[b] - cs[a]) * (xs[i] - xs[a]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut bps = Vec::with_capacity(hull.len() - 1);
    let mut vals = Vec::with_capacity(hull.len() - 1);
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        let slope = (cs[b] - cs[a]) / (xs[b] - xs[a]);
        bps.push(xs[a]);
        vals.push(SymMat::scalar((-slope).max(0.0)));
    }
    StepPath::new(bps, vals).expect("hull vertices are increasing breakpoints")
}

const STAGNATION_WINDOW: usize = 200;

/// `H` of the constant path `x` when `xi_bar` depends only on the diagonal of
/// a `2 x 2` matrix and is increasing in it.
///
/// The average of a feasible increasing path is a feasible constant that
/// does not increase the objective, so constants suffice. The diagonals
/// `(u, v)` of constants `Q >= 0, Q >= x` are the points above
/// `(max(a, 0), max(b, 0))` with `sqrt(uv) + sqrt((u - a)(v - b)) >= |c|`,
/// `x = [[a, c], [c, b]]`; the infimum lies on the boundary curve, which is
/// scanned along rays from the corner.
pub fn h_constant_diagonal(reg: &RegularizedNonlinearity, x: &SymMat) -> Result<f64> {
    if !reg.diagonal_only() || x.dim() != 2 {
        return Err(Error::Config(format!(
            "constant-path reduction needs a diagonal-only 2x2 nonlinearity"
        )));
    }
    let (a, b, c) = (x.get(0, 0), x.get(1, 1), libm::fabs(x.get(0, 1)));
    let (u0, v0) = (a.max(0.0), b.max(0.0));
    let phi = |u: f64, v: f64| reg.eval(&SymMat::diag(&[u, v]));
    let g = |u: f64, v: f64| libm::sqrt(u * v) + libm::sqrt(((u - a) * (v - b)).max(0.0));
    if g(u0, v0) >= c {
        return Ok(phi(u0, v0));
    }
    // Boundary point on the ray at angle theta, if the ray reaches it.
    let boundary = |theta: f64| -> Option<f64> {
        let (dc, ds) = (libm::cos(theta), libm::sin(theta));
        let at = |rho: f64| g(u0 + rho * dc, v0 + rho * ds);
        let mut hi = 1.0;
        while at(hi) < c {
            hi *= 2.0;
            if hi > 1e8 {
                return None;
            }
        }
        let mut lo = 0.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if at(mid) >= c {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(phi(u0 + hi * dc, v0 + hi * ds))
    };
    let half_pi = core::f64::consts::FRAC_PI_2;
    const SCAN: usize = 256;
    let value = |k: usize| boundary(half_pi * k as f64 / SCAN as f64).unwrap_or(f64::INFINITY);
    let (mut best_k, mut best) = (0, value(0));
    for k in 1..=SCAN {
        let v = value(k);
        if v < best {
            best = v;
            best_k = k;
        }
    }
    if !best.is_finite() {
        return Err(Error::Domain("no feasible constant path"));
    }
    let step = half_pi / SCAN as f64;
    let (mut lo, mut hi) = (
        (best_k as f64 - 1.0).max(0.0) * step,
        (best_k as f64 + 1.0).min(SCAN as f64) * step,
    );
    let f = |t: f64| boundary(t).unwrap_or(f64::INFINITY);
    let r = 0.5 * (libm::sqrt(5.0) - 1.0);
    let (mut x1, mut x2) = (hi - r * (hi - lo), lo + r * (hi - lo));
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    Ok(best.min(f1).min(f2))
}

/// Projected-gradient minimization of `int xi_bar(q)` over the feasible set,
/// discretized on `substeps` equal cells per interval of `kappa`.
pub fn h_path_minimize(
    reg: &RegularizedNonlinearity,
    kappa: &StepPath,
    opts: PathOptions,
) -> Result<PathInfimum> {
    let m = opts.substeps.max(1);
    let mut bps = Vec::with_capacity(kappa.len() * m);
    for k in 0..kappa.len() {
        let (a, b) = kappa.interval(k);
        for s in 0..m {
            bps.push(a + (b - a) * s as f64 / m as f64);
        }
    }
    bps.dedup();
    let fine = kappa.refine(&bps)?;
    let w: Vec<f64> = (0..fine.len()).map(|k| fine.interval_len(k)).collect();
    let mut tails = vec![SymMat::zeros(kappa.dim()); fine.len()];
    let mut acc = SymMat::zeros(kappa.dim());
    for k in (0..fine.len()).rev() {
        acc.axpy(w[k], &fine.values()[k]);
        tails[k] = acc.clone();
    }
    let objective =
        |q: &[SymMat]| -> f64 { q.iter().zip(&w).map(|(a, wi)| wi * reg.eval(a)).sum() };
    let wdist = |a: &[SymMat], b: &[SymMat]| -> f64 {
        libm::sqrt(
            a.iter()
                .zip(b)
                .zip(&w)
                .map(|((x, y), wi)| wi * (x - y).dot(&(x - y)))
                .sum(),
        )
    };
    let project = |x: &[SymMat]| project_increasing(x, &w, Some(&tails), opts.projection);

    let (mut q, _) = project(fine.values())?;
    let mut fq = objective(&q);
    let mut y = q.clone();
    let mut theta = 1.0;
    let mut tau = 0.5;
    let mut gap = f64::INFINITY;
    // Iterations without objective progress; the objective may have kinks
    // where the gradient mapping never vanishes.
    let mut idle = 0usize;
    for _ in 0..opts.max_iter {
        if idle >= STAGNATION_WINDOW {
            break;
        }
        let fy = objective(&y);
        let g: Vec<SymMat> = y.iter().map(|a| reg.grad(a)).collect();
        let (q_new, f_new) = loop {
            let trial: Vec<SymMat> = y
                .iter()
                .zip(&g)
                .map(|(a, ga)| {
                    let mut t = a.clone();
                    t.axpy(-tau, ga);
                    t
                })
                .collect();
            let (p, _) = project(&trial)?;
            let fp = objective(&p);
            let lin: f64 = p
                .iter()
                .zip(&y)
                .zip(&g)
                .zip(&w)
                .map(|(((pi, yi), gi), wi)| wi * gi.dot(&(pi - yi)))
                .sum();
            let d = wdist(&p, &y);
            if fp <= fy + lin + d * d / (2.0 * tau) + 1e-14 || tau < 1e-8 {
                break (p, fp);
            }
            tau *= 0.5;
        };
        gap = wdist(&q_new, &y) / tau;
        if fq - f_new <= 1e-13 * (1.0 + libm::fabs(fq)) {
            idle += 1;
        } else {
            idle = 0;
        }
        if f_new > fq {
            // restart momentum
            theta = 1.0;
            y = q.clone();
            if gap <= opts.tol {
                break;
            }
            continue;
        }
        let theta_next = 0.5 * (1.0 + libm::sqrt(1.0 + 4.0 * theta * theta));
        let beta = (theta - 1.0) / theta_next;
        y = q_new
            .iter()
            .zip(&q)
            .map(|(a, b)| {
                let mut t = a.clone();
                t.axpy(beta, &(a - b));
                t
            })
            .collect();
        theta = theta_next;
        q = q_new;
        fq = f_new;
        if gap <= opts.tol {
            break;
        }
    }
    let (qs, violation) = {
        let (p, v) = project(&q)?;
        let fp = objective(&p);
        (if fp <= fq + 1e-12 { p } else { q.clone() }, v)
    };
    let value = objective(&qs);
    let settled = gap <= 1e-5 || idle >= STAGNATION_WINDOW;
    if !settled || violation > 1e3 * TAU_CONE {
        return Err(Error::OptimizerStall {
            what: "path infimum",
            best: value,
            gap: gap.max(violation),
        });
    }
    Ok(PathInfimum {
        value,
        minimizer: StepPath::new(bps, qs)?,
        violation,
        gap,
    })
}
