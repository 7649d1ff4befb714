use alloc::vec;
use alloc::vec::Vec;

use super::dyadic::DyadicPoint;
use super::isotonic::pava;
use crate::error::{Error, Result};
use crate::linalg::SymMat;

/// Stopping rule of the alternating projections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            max_iter: 10_000,
            tol: 1e-10,
        }
    }
}

/// Cone membership report for a dyadic point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeFlags {
    pub in_q2j: bool,
    pub in_dual_q2j: bool,
    pub distance_to_cone: f64,
}

/// `x_1 >= 0` and `x_k - x_{k-1} >= 0` for all `k`, up to `tol`.
pub fn in_cone(x: &DyadicPoint, tol: f64) -> bool {
    interior_slack(x) >= -tol
}

/// Smallest eigenvalue among `x_1` and the increments `x_k - x_{k-1}`.
pub fn interior_slack(x: &DyadicPoint) -> f64 {
    let b = x.blocks();
    b.windows(2)
        .map(|w| (&w[1] - &w[0]).min_eigenvalue())
        .fold(b[0].min_eigenvalue(), f64::min)
}

/// `L^j` distance from a cone point to the complement of the cone; negative
/// outside. Each constraint is violated by a single rank-one move, so the
/// distance is the smallest of the per-constraint distances.
pub fn cone_depth(x: &DyadicPoint) -> f64 {
    let b = x.blocks();
    let first = b[0].min_eigenvalue();
    let step = b
        .windows(2)
        .map(|w| (&w[1] - &w[0]).min_eigenvalue() / core::f64::consts::SQRT_2)
        .fold(f64::INFINITY, f64::min);
    first.min(step) / libm::sqrt(b.len() as f64)
}

/// Every tail sum `sum_{i >= k} x_i` is PSD, up to `tol`.
pub fn in_dual_cone(x: &DyadicPoint, tol: f64) -> bool {
    let mut tail = SymMat::zeros(x.dim());
    for b in x.blocks().iter().rev() {
        tail.axpy(1.0, b);
        if !tail.is_psd(tol) {
            return false;
        }
    }
    true
}

pub fn cone_flags(x: &DyadicPoint, tol: f64) -> Result<ConeFlags> {
    let in_q2j = in_cone(x, tol);
    let distance_to_cone = if in_q2j {
        0.0
    } else {
        x.sub(&metric_project_to_cone(x, ProjectionOptions::default())?)?
            .norm()
    };
    Ok(ConeFlags {
        in_q2j,
        in_dual_q2j: in_dual_cone(x, tol),
        distance_to_cone,
    })
}

/// Metric projection onto the cone of increasing PSD sequences in `L^j`.
///
/// Scalar blocks use isotonic regression clamped at zero; matrix blocks use
/// Dykstra's alternating projections over the elementary constraints.
pub fn metric_project_to_cone(x: &DyadicPoint, opts: ProjectionOptions) -> Result<DyadicPoint> {
    if in_cone(x, 0.0) {
        return Ok(x.clone());
    }
    let blocks = if x.dim() == 1 {
        let y: Vec<f64> = x.blocks().iter().map(|b| b.get(0, 0)).collect();
        pava(&y, &vec![1.0; y.len()])
            .into_iter()
            .map(|v| SymMat::scalar(v.max(0.0)))
            .collect()
    } else {
        let w = vec![1.0; x.blocks().len()];
        project_increasing(x.blocks(), &w, None, opts)?.0
    };
    DyadicPoint::new(x.level(), blocks)
}

/// Projection onto the dual cone via the Moreau decomposition.
pub fn dual_cone_project(x: &DyadicPoint, opts: ProjectionOptions) -> Result<DyadicPoint> {
    x.add(&metric_project_to_cone(&x.scale(-1.0), opts)?)
}

/// Weighted projection onto `{q_1 >= 0, q_{k+1} - q_k >= 0}` intersected,
/// when `tails` is given, with `{sum_{i >= k} w_i q_i >= tails[k]}`.
///
/// The metric is `sum_i w_i |q_i - x_i|^2`. Returns the projection and its
/// largest constraint violation.
pub fn project_increasing(
    x: &[SymMat],
    w: &[f64],
    tails: Option<&[SymMat]>,
    opts: ProjectionOptions,
) -> Result<(Vec<SymMat>, f64)> {
    let n = x.len();
    let d = x[0].dim();
    let mut q: Vec<SymMat> = x.to_vec();
    // Dykstra increments: pair sets store the increment of both blocks, tail
    // sets store the uniform shift they applied.
    let mut inc_first = SymMat::zeros(d);
    let mut inc_pair: Vec<(SymMat, SymMat)> = (1..n)
        .map(|_| (SymMat::zeros(d), SymMat::zeros(d)))
        .collect();
    let mut shift_tail: Vec<SymMat> = match tails {
        Some(_) => (0..n).map(|_| SymMat::zeros(d)).collect(),
        None => Vec::new(),
    };
    let tail_w: Vec<f64> = {
        let mut acc = 0.0;
        let mut v: Vec<f64> = w
            .iter()
            .rev()
            .map(|wi| {
                acc += wi;
                acc
            })
            .collect();
        v.reverse();
        v
    };
    let total_w: f64 = tail_w[0];
    let mut prev = q.clone();
    let mut change = f64::INFINITY;
    for _ in 0..opts.max_iter {
        // q_1 >= 0
        let y = &q[0] + &inc_first;
        let p = y.project_psd();
        inc_first = &y - &p;
        q[0] = p;
        // increments
        for k in 1..n {
            let (ref a, ref b) = inc_pair[k - 1];
            let u = &q[k - 1] + a;
            let v = &q[k] + b;
            let (wu, wv) = (w[k - 1], w[k]);
            let delta = &v - &u;
            let dp = delta.project_psd();
            let corr = &dp - &delta;
            let nu = {
                let mut m = u.clone();
                m.axpy(-wv / (wu + wv), &corr);
                m
            };
            let nv = {
                let mut m = v.clone();
                m.axpy(wu / (wu + wv), &corr);
                m
            };
            inc_pair[k - 1] = (&u - &nu, &v - &nv);
            q[k - 1] = nu;
            q[k] = nv;
        }
        if let Some(c) = tails {
            for k in 0..n {
                let old = &shift_tail[k];
                let mut l = SymMat::zeros(d);
                for i in k..n {
                    l.axpy(w[i], &q[i]);
                }
                l.axpy(-tail_w[k], old);
                let g = &l - &c[k];
                let gamma = &g.project_psd() - &g;
                let new = gamma.scale(1.0 / tail_w[k]);
                let diff = &new - old;
                for qi in q[k..].iter_mut() {
                    qi.axpy(1.0, &diff);
                }
                shift_tail[k] = new;
            }
        }
        change = libm::sqrt(
            q.iter()
                .zip(&prev)
                .zip(w)
                .map(|((a, b), wi)| wi * (a - b).dot(&(a - b)))
                .sum::<f64>()
                / total_w,
        );
        if change <= opts.tol {
            // Small steps alone do not certify feasibility.
            let v = violation(&q, w, tails);
            if v <= 1e3 * opts.tol {
                return Ok((q, v));
            }
        }
        prev.clone_from(&q);
    }
    let residual = change.max(violation(&q, w, tails));
    Err(Error::IterationLimit {
        what: "cone projection",
        iterations: opts.max_iter,
        residual,
    })
}

fn violation(q: &[SymMat], w: &[f64], tails: Option<&[SymMat]>) -> f64 {
    let mut v = (-q[0].min_eigenvalue()).max(0.0);
    for p in q.windows(2) {
        v = v.max(-(&p[1] - &p[0]).min_eigenvalue());
    }
    if let Some(c) = tails {
        let mut acc = SymMat::zeros(q[0].dim());
        for k in (0..q.len()).rev() {
            acc.axpy(w[k], &q[k]);
            v = v.max(-(&acc - &c[k]).min_eigenvalue());
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_projection_pools() {
        let x = DyadicPoint::from_scalars(1, &[2.0, 1.0]).unwrap();
        let p = metric_project_to_cone(&x, ProjectionOptions::default()).unwrap();
        assert_eq!(p, DyadicPoint::from_scalars(1, &[1.5, 1.5]).unwrap());
    }

    #[test]
    fn scalar_projection_clamps() {
        let x = DyadicPoint::from_scalars(2, &[-1.0, 3.0, -2.0, 5.0]).unwrap();
        let p = metric_project_to_cone(&x, ProjectionOptions::default()).unwrap();
        let v: Vec<f64> = p.blocks().iter().map(|b| b.get(0, 0)).collect();
        assert_eq!(v, vec![0.0, 0.5, 0.5, 5.0]);
    }

    #[test]
    fn matrix_dykstra_agrees_with_scalar_on_diagonal() {
        // diagonal inputs decouple into two scalar problems
        let x = DyadicPoint::new(
            1,
            vec![SymMat::diag(&[2.0, -1.0]), SymMat::diag(&[1.0, 3.0])],
        )
        .unwrap();
        let p = metric_project_to_cone(&x, ProjectionOptions::default()).unwrap();
        let e = DyadicPoint::new(
            1,
            vec![SymMat::diag(&[1.5, 0.0]), SymMat::diag(&[1.5, 3.0])],
        )
        .unwrap();
        assert!(p.sub(&e).unwrap().norm() < 1e-8);
    }

    #[test]
    fn level_zero_dual_cone() {
        let x = DyadicPoint::from_scalars(0, &[-0.5]).unwrap();
        let f = cone_flags(&x, 1e-10).unwrap();
        assert!(!f.in_q2j && !f.in_dual_q2j);
        assert!((f.distance_to_cone - 0.5).abs() < 1e-15);
    }
}
