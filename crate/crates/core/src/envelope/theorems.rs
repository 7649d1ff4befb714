use alloc::vec::Vec;

use crate::adjoint::EnvelopeMeasure;
use crate::error::{Error, Result};
use crate::geometry::StepPath;
use crate::model::{InitialCondition, Nonlinearity};

/// Gamma-averages of the characteristic data of the atoms.
///
/// Sums are centered on the first atom, so a measure whose atoms share one
/// gradient yields that gradient exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSummary {
    /// `int psi(q') d gamma`.
    pub psi: f64,
    /// `int <q', grad psi(q')> d gamma`.
    pub inner: f64,
    /// `int grad psi(q') d gamma`.
    pub grad: StepPath,
    /// `int xi(grad psi(q')) d gamma`.
    pub xi: f64,
}

pub fn measure_summary(
    measure: &EnvelopeMeasure,
    ic: &InitialCondition,
    model: &Nonlinearity,
) -> Result<MeasureSummary> {
    let total: f64 = measure.atoms.iter().map(|a| a.weight).sum();
    if measure.atoms.is_empty() || !(total > 0.0) {
        return Err(Error::Degenerate {
            off_cone_mass: measure.off_cone_mass,
        });
    }
    let data: Vec<(f64, f64, StepPath, f64)> = measure
        .atoms
        .iter()
        .map(|a| {
            let g = ic.grad(&a.path)?;
            let inner = a.path.inner_l2(&g)?;
            let xi = model.eval_path(&g);
            Ok((ic.eval(&a.path)?, inner, g, xi))
        })
        .collect::<Result<_>>()?;
    let (psi0, inner0, g0, xi0) = &data[0];
    let (mut psi, mut inner, mut xi) = (0.0, 0.0, 0.0);
    let mut dg = g0.scale(0.0);
    for (a, (p, i, g, x)) in measure.atoms.iter().zip(&data) {
        let w = a.weight / total;
        psi += w * (p - psi0);
        inner += w * (i - inner0);
        xi += w * (x - xi0);
        dg = dg.add(&g.sub(g0)?.scale(w))?;
    }
    Ok(MeasureSummary {
        psi: psi0 + psi,
        inner: inner0 + inner,
        grad: g0.add(&dg)?,
        xi: xi0 + xi,
    })
}

/// `|f - int psi(q') + <q - q', grad psi(q')> + t xi(grad psi(q')) d gamma|`.
pub fn theorem_t_residual(
    summary: &MeasureSummary,
    t: f64,
    q: &StepPath,
    f_value: f64,
) -> Result<f64> {
    let cross = q.inner_l2(&summary.grad)? - summary.inner;
    Ok(libm::fabs(f_value - summary.psi - cross - t * summary.xi))
}

/// Residuals of the value, `a` and `p` equations at a differentiable point
/// with derivatives `(a, p)`.
pub fn theorem_t2_residuals(
    summary: &MeasureSummary,
    t: f64,
    q: &StepPath,
    a: f64,
    p: &StepPath,
    f_value: f64,
) -> Result<[f64; 3]> {
    let r1 = f_value - q.inner_l2(p)? - t * a - (summary.psi - summary.inner);
    let r3 = p.sub(&summary.grad)?.norm_l2();
    Ok([libm::fabs(r1), libm::fabs(a - summary.xi), r3])
}

/// `|int xi(grad psi) d gamma - xi(int grad psi d gamma)|`.
pub fn commutation_residual(summary: &MeasureSummary, model: &Nonlinearity) -> f64 {
    libm::fabs(summary.xi - model.eval_path(&summary.grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjoint::{Atom, MeasureMeta};
    use crate::model::Profile;
    use alloc::vec;

    fn meta() -> MeasureMeta {
        MeasureMeta {
            level: 0,
            eta: 0.0,
            eps: 0.0,
            r: 0.0,
            t: 0.0,
            x: vec![0.0],
        }
    }

    #[test]
    fn dirac_at_time_zero() {
        let ic = InitialCondition::new(Profile::LogCosh { scale: 1.0 }, 1).unwrap();
        let model = Nonlinearity::sk(1);
        let q = StepPath::from_scalars(vec![0.0, 0.5], &[0.3, 0.9]).unwrap();
        let m = EnvelopeMeasure::dirac(q.clone(), meta());
        let s = measure_summary(&m, &ic, &model).unwrap();
        let f = ic.eval(&q).unwrap();
        assert_eq!(theorem_t_residual(&s, 0.0, &q, f).unwrap(), 0.0);
        assert_eq!(commutation_residual(&s, &model), 0.0);
    }

    #[test]
    fn two_atom_jensen_gap() {
        let ic = InitialCondition::new(Profile::Affine { slope: 1.0 }, 1).unwrap();
        let ic2 = InitialCondition::new(Profile::LogCosh { scale: 1.0 }, 1).unwrap();
        let model = Nonlinearity::sk(1);
        let atoms = vec![
            Atom {
                weight: 0.5,
                path: StepPath::from_scalars(vec![0.0], &[0.2]).unwrap(),
            },
            Atom {
                weight: 0.5,
                path: StepPath::from_scalars(vec![0.0], &[1.4]).unwrap(),
            },
        ];
        let m = EnvelopeMeasure::from_atoms(atoms, meta()).unwrap();
        let s = measure_summary(&m, &ic, &model).unwrap();
        assert_eq!(commutation_residual(&s, &model), 0.0);
        let s2 = measure_summary(&m, &ic2, &model).unwrap();
        let (g1, g2) = (libm::tanh(0.2), libm::tanh(1.4));
        let gap = (g1 - g2) * (g1 - g2) / 4.0;
        assert!((commutation_residual(&s2, &model) - gap).abs() < 1e-14);
    }
}
