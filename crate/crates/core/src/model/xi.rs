use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::StepPath;
use crate::linalg::SymMat;

/// The covariance functions shipped with the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum NonlinearityKind {
    /// `xi(a) = |a|^2` (Frobenius).
    Sk,
    /// `xi(a) = sum_p c_p a^p`, scalar only.
    PSpin(Vec<(u32, f64)>),
    /// `xi(a) = a_11 a_22`.
    Bipartite,
    /// `xi(a) = a_12 a_21`; fails the monotone-gradient assumption.
    BipartiteOffDiagonal,
}

/// A nonlinearity `xi: S^D -> R` with its Frobenius gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    kind: NonlinearityKind,
    dim: usize,
}

impl Nonlinearity {
    pub fn sk(dim: usize) -> Self {
        Nonlinearity {
            kind: NonlinearityKind::Sk,
            dim,
        }
    }

    /// Scalar mixed p-spin `sum_p c_p a^p`; needs `p >= 2` and `c_p >= 0`.
    pub fn pspin(coeffs: Vec<(u32, f64)>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|(p, c)| *p < 2 || !(*c >= 0.0)) {
            return Err(Error::Admissibility(String::from(
                "p-spin mixture needs powers >= 2 with nonnegative coefficients",
            )));
        }
        Ok(Nonlinearity {
            kind: NonlinearityKind::PSpin(coeffs),
            dim: 1,
        })
    }

    pub fn bipartite() -> Self {
        Nonlinearity {
            kind: NonlinearityKind::Bipartite,
            dim: 2,
        }
    }

    pub fn bipartite_offdiagonal() -> Self {
        Nonlinearity {
            kind: NonlinearityKind::BipartiteOffDiagonal,
            dim: 2,
        }
    }

    pub fn kind(&self) -> &NonlinearityKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            NonlinearityKind::Sk => "sk",
            NonlinearityKind::PSpin(_) => "pspin",
            NonlinearityKind::Bipartite => "bipartite",
            NonlinearityKind::BipartiteOffDiagonal => "bipartite-offdiag",
        }
    }

    pub fn eval(&self, a: &SymMat) -> f64 {
        match &self.kind {
            NonlinearityKind::Sk => a.dot(a),
            NonlinearityKind::PSpin(c) => {
                let x = a.get(0, 0);
                c.iter().map(|(p, cp)| cp * libm::pow(x, *p as f64)).sum()
            }
            NonlinearityKind::Bipartite => a.get(0, 0) * a.get(1, 1),
            NonlinearityKind::BipartiteOffDiagonal => a.get(0, 1) * a.get(1, 0),
        }
    }

    pub fn grad(&self, a: &SymMat) -> SymMat {
        match &self.kind {
            NonlinearityKind::Sk => a.scale(2.0),
            NonlinearityKind::PSpin(c) => {
                let x = a.get(0, 0);
                SymMat::scalar(
                    c.iter()
                        .map(|(p, cp)| cp * *p as f64 * libm::pow(x, (*p - 1) as f64))
                        .sum(),
                )
            }
            NonlinearityKind::Bipartite => SymMat::diag(&[a.get(1, 1), a.get(0, 0)]),
            NonlinearityKind::BipartiteOffDiagonal => {
                let mut g = SymMat::zeros(2);
                g.set(0, 1, a.get(0, 1));
                g
            }
        }
    }

    /// `sup |grad xi(a)|` over PSD `a` with `|a| <= 1`.
    pub fn lip_on_unit_ball(&self) -> f64 {
        match &self.kind {
            NonlinearityKind::Sk => 2.0,
            NonlinearityKind::PSpin(c) => c.iter().map(|(p, cp)| *p as f64 * cp).sum(),
            NonlinearityKind::Bipartite | NonlinearityKind::BipartiteOffDiagonal => 1.0,
        }
    }

    /// `sup |xi(a)|` over PSD `a` with `|a| <= 1`; bounds the time derivative.
    pub fn sup_on_unit_ball(&self) -> f64 {
        match &self.kind {
            NonlinearityKind::Sk => 1.0,
            NonlinearityKind::PSpin(c) => c.iter().map(|(_, cp)| cp).sum(),
            NonlinearityKind::Bipartite => 0.5,
            NonlinearityKind::BipartiteOffDiagonal => 0.25,
        }
    }

    /// Whether `xi` is convex on `S^D`.
    pub fn is_convex(&self) -> bool {
        match self.kind {
            NonlinearityKind::Sk | NonlinearityKind::PSpin(_) => true,
            // indefinite quadratic forms
            NonlinearityKind::Bipartite | NonlinearityKind::BipartiteOffDiagonal => false,
        }
    }

    /// `int_0^1 xi(p(s)) ds`.
    pub fn eval_path(&self, p: &StepPath) -> f64 {
        p.integrate(|a| self.eval(a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let sk = Nonlinearity::sk(1);
        assert_eq!(sk.eval(&SymMat::scalar(0.5)), 0.25);
        assert_eq!(sk.grad(&SymMat::scalar(0.5)).get(0, 0), 1.0);
        let mixed = Nonlinearity::pspin(alloc::vec![(2, 1.0), (3, 1.0)]).unwrap();
        assert_eq!(mixed.eval(&SymMat::scalar(1.0)), 2.0);
        assert_eq!(mixed.grad(&SymMat::scalar(1.0)).get(0, 0), 5.0);
        let off = Nonlinearity::bipartite_offdiagonal();
        assert_eq!(
            off.eval(&SymMat::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]])),
            1.0
        );
    }
}
