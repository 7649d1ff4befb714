//! Hopf–Lax and Hopf variational formulas for scalar paths (`D = 1`).
//!
//! `J(q', p) = psi^j(q') + <x - q', p> + t xi^j(p)` on the cone of
//! nondecreasing nonnegative sequences with the `L^j` inner product.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::isotonic::pava;
use crate::geometry::DyadicPoint;
use crate::linalg::SymMat;
use crate::model::{InitialCondition, Nonlinearity, NonlinearityKind, Profile};

/// Search parameters of the nested optimizations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfSearch {
    /// Random restarts besides the deterministic ones.
    pub starts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    /// Upper bound on the entries of the outer variable.
    pub radius: f64,
    /// Points of the initial scan used at level 0.
    pub scan: usize,
}

impl Default for HopfSearch {
    fn default() -> Self {
        HopfSearch {
            starts: 6,
            max_iter: 3000,
            tol: 1e-11,
            seed: 7,
            radius: 6.0,
            scan: 4001,
        }
    }
}

/// Value and optimizers of a variational formula.
#[derive(Debug, Clone, PartialEq)]
pub struct HopfResult {
    pub value: f64,
    /// Optimal `q'`.
    pub optimizer: DyadicPoint,
    /// Optimal `p`.
    pub dual: DyadicPoint,
    /// Whether the formula is known to hold for this model.
    pub applicable: bool,
    /// Norm of the final projected-gradient step of the outer problem.
    pub gap: f64,
}

fn mean(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    v.sum::<f64>() / n as f64
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    mean(a.iter().zip(b).map(|(x, y)| x * y), a.len())
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(mean(
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)),
        a.len(),
    ))
}

/// Projection onto `{0 <= y_1 <= ... <= y_n <= cap}`.
fn project_monotone(y: &[f64], cap: f64) -> Vec<f64> {
    pava(y, &vec![1.0; y.len()])
        .into_iter()
        .map(|v| v.clamp(0.0, cap))
        .collect()
}

struct Scalar<'a> {
    model: &'a Nonlinearity,
    phi: Profile,
}

impl Scalar<'_> {
    fn xi(&self, p: &[f64]) -> f64 {
        mean(
            p.iter().map(|v| self.model.eval(&SymMat::scalar(*v))),
            p.len(),
        )
    }
    fn dxi(&self, v: f64) -> f64 {
        self.model.grad(&SymMat::scalar(v)).get(0, 0)
    }
    fn psi(&self, q: &[f64]) -> f64 {
        mean(q.iter().map(|v| self.phi.phi(*v)), q.len())
    }
}

/// Projected-gradient descent with backtracking; `f` returns value and gradient.
fn descend(
    start: Vec<f64>,
    cap: f64,
    max_iter: usize,
    tol: f64,
    f: impl Fn(&[f64]) -> (f64, Vec<f64>),
) -> (Vec<f64>, f64, f64) {
    let mut x = project_monotone(&start, cap);
    let (mut fx, mut g) = f(&x);
    let mut tau = 1.0;
    let mut gap = f64::INFINITY;
    for _ in 0..max_iter {
        let (y, fy) = loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - tau * b).collect();
            let y = project_monotone(&trial, cap);
            let (fy, _) = f(&y);
            let d = dist(&y, &x);
            let lin = dot(
                &g,
                &y.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>(),
            );
            if fy <= fx + lin + d * d / (2.0 * tau) + 1e-15 || tau < 1e-12 {
                break (y, fy);
            }
            tau *= 0.5;
        };
        gap = dist(&y, &x) / tau;
        let stop = dist(&y, &x) <= tol;
        x = y;
        let (fv, gv) = f(&x);
        fx = fv.min(fy);
        g = gv;
        if stop {
            break;
        }
        tau = (tau * 2.0).min(1.0);
    }
    (x, fx, gap)
}

fn check_scalar(model: &Nonlinearity, ic: &InitialCondition, x: &DyadicPoint) -> Result<()> {
    if model.dim() != 1 || ic.dim() != 1 || x.dim() != 1 {
        return Err(Error::Config(String::from(
            "variational formulas are implemented for D = 1 only",
        )));
    }
    Ok(())
}

fn to_scalars(x: &DyadicPoint) -> Vec<f64> {
    x.blocks().iter().map(|b| b.get(0, 0)).collect()
}

/// Inner problem of Hopf–Lax: `min_p <x - q', p> + t xi^j(p)` over the cone.
fn hl_inner(s: &Scalar, t: f64, x: &[f64], qp: &[f64], search: &HopfSearch) -> (Vec<f64>, f64) {
    let n = x.len();
    let p = match s.model.kind() {
        NonlinearityKind::Sk => {
            let y: Vec<f64> = qp.iter().zip(x).map(|(a, b)| (a - b) / (2.0 * t)).collect();
            project_monotone(&y, f64::INFINITY)
        }
        _ => {
            let start: Vec<f64> = qp.iter().zip(x).map(|(a, b)| (a - b) / (2.0 * t)).collect();
            descend(start, f64::INFINITY, search.max_iter, search.tol, |p| {
                let v =
                    dot(&x.iter().zip(qp).map(|(a, b)| a - b).collect::<Vec<_>>(), p) + t * s.xi(p);
                let g = (0..n).map(|k| x[k] - qp[k] + t * s.dxi(p[k])).collect();
                (v, g)
            })
            .0
        }
    };
    let lin: Vec<f64> = x.iter().zip(qp).map(|(a, b)| a - b).collect();
    let v = dot(&lin, &p) + t * s.xi(&p);
    (p, v)
}

/// Characteristic foot `q' = x + t xi'(phi'(q'))` by fixed-point iteration.
fn foot(s: &Scalar, t: f64, x: &[f64]) -> Vec<f64> {
    let mut q = x.to_vec();
    for _ in 0..200 {
        q = x
            .iter()
            .zip(&q)
            .map(|(a, b)| a + t * s.dxi(s.phi.dphi(*b)))
            .collect();
    }
    q
}

/// `sup_{q'} inf_p J(q', p)`.
pub fn hopf_lax_value(
    model: &Nonlinearity,
    ic: &InitialCondition,
    t: f64,
    x: &DyadicPoint,
    search: &HopfSearch,
) -> Result<HopfResult> {
    check_scalar(model, ic, x)?;
    let s = Scalar {
        model,
        phi: ic.profile(),
    };
    let level = x.level();
    let xs = to_scalars(x);
    let applicable = model.is_convex();
    if t == 0.0 {
        return Ok(HopfResult {
            value: ic.eval_j(x)?,
            optimizer: x.clone(),
            dual: ic.grad_j(x)?,
            applicable,
            gap: 0.0,
        });
    }
    let n = xs.len();
    let objective = |qp: &[f64]| -> (f64, Vec<f64>) {
        let (p, inner) = hl_inner(&s, t, &xs, qp, search);
        let v = s.psi(qp) + inner;
        // Danskin: grad = phi'(q') - p*, negated for descent
        let g = (0..n).map(|k| -(s.phi.dphi(qp[k]) - p[k])).collect();
        (-v, g)
    };
    let mut starts: Vec<Vec<f64>> = vec![xs.clone(), foot(&s, t, &xs)];
    if n == 1 && search.scan > 1 {
        let best = (0..search.scan)
            .map(|i| search.radius * i as f64 / (search.scan - 1) as f64)
            .map(|q| (q, objective(&[q]).0))
            .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        starts.push(vec![best.0]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
    for _ in 0..search.starts {
        let y: Vec<f64> = xs.iter().map(|v| v + rng.gen_range(0.0..1.0)).collect();
        starts.push(y);
    }
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    for st in starts {
        let (q, v, gap) = descend(st, search.radius, search.max_iter, search.tol, &objective);
        if best.as_ref().map_or(true, |b| v < b.1) {
            best = Some((q, v, gap));
        }
    }
    let (q, v, gap) = best.expect("at least one start");
    if gap > 1e-4 {
        return Err(Error::OptimizerStall {
            what: "hopf-lax outer maximization",
            best: -v,
            gap,
        });
    }
    let (p, _) = hl_inner(&s, t, &xs, &q, search);
    Ok(HopfResult {
        value: -v,
        optimizer: DyadicPoint::from_scalars(level, &q)?,
        dual: DyadicPoint::from_scalars(level, &p)?,
        applicable,
        gap,
    })
}

/// `sup_p inf_{q'} J(q', p)` with `p` in the cone and entries at most 1.
pub fn hopf_value(
    model: &Nonlinearity,
    ic: &InitialCondition,
    t: f64,
    x: &DyadicPoint,
    search: &HopfSearch,
) -> Result<HopfResult> {
    check_scalar(model, ic, x)?;
    let s = Scalar {
        model,
        phi: ic.profile(),
    };
    let level = x.level();
    let xs = to_scalars(x);
    let n = xs.len();
    // every built-in profile is convex
    let applicable = true;
    let inner = |p: &[f64]| -> (Vec<f64>, f64) {
        let start = xs.clone();
        let (q, v, _) = descend(start, search.radius, search.max_iter, search.tol, |q| {
            let v = s.psi(q) - dot(q, p);
            let g = (0..n).map(|k| s.phi.dphi(q[k]) - p[k]).collect();
            (v, g)
        });
        (q, v)
    };
    let objective = |p: &[f64]| -> (f64, Vec<f64>) {
        let (q, v) = inner(p);
        let val = v + dot(&xs, p) + t * s.xi(p);
        let g = (0..n).map(|k| -(xs[k] - q[k] + t * s.dxi(p[k]))).collect();
        (-val, g)
    };
    let grad_psi: Vec<f64> = xs.iter().map(|v| s.phi.dphi(*v)).collect();
    let mut starts = vec![grad_psi];
    if n == 1 && search.scan > 1 {
        let m = (search.scan / 8).max(2);
        let best = (0..m)
            .map(|i| i as f64 / (m - 1) as f64)
            .map(|p| (p, objective(&[p]).0))
            .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        starts.push(vec![best.0]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(search.seed ^ 0x40);
    for _ in 0..search.starts {
        starts.push((0..n).map(|_| rng.gen_range(0.0..1.0)).collect());
    }
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    for st in starts {
        let (p, v, gap) = descend(st, 1.0, search.max_iter, search.tol, &objective);
        if best.as_ref().map_or(true, |b| v < b.1) {
            best = Some((p, v, gap));
        }
    }
    let (p, v, gap) = best.expect("at least one start");
    let (q, _) = inner(&p);
    Ok(HopfResult {
        value: -v,
        optimizer: DyadicPoint::from_scalars(level, &q)?,
        dual: DyadicPoint::from_scalars(level, &p)?,
        applicable,
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_data_is_exact() {
        let model = Nonlinearity::sk(1);
        let ic = InitialCondition::new(Profile::Affine { slope: 1.0 }, 1).unwrap();
        let x = DyadicPoint::from_scalars(1, &[0.3, 0.8]).unwrap();
        let hl = hopf_lax_value(&model, &ic, 0.4, &x, &HopfSearch::default()).unwrap();
        assert!((hl.value - (0.55 + 0.4)).abs() < 1e-8, "{}", hl.value);
        let h = hopf_value(&model, &ic, 0.4, &x, &HopfSearch::default()).unwrap();
        assert!(
            (h.value - hl.value).abs() < 1e-6,
            "{} vs {}",
            h.value,
            hl.value
        );
    }
}
