use crate::error::Result;
use crate::geometry::StepPath;
use crate::model::{InitialCondition, Nonlinearity};

/// Value carried by the characteristic through `q_prime`, and how far `q`
/// is from the foot relation `q = q' - t grad xi(grad psi(q'))`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicReport {
    pub q_prime: StepPath,
    pub residual: f64,
    pub value: f64,
}

pub fn characteristic_value(
    ic: &InitialCondition,
    model: &Nonlinearity,
    t: f64,
    q: &StepPath,
    q_prime: &StepPath,
) -> Result<CharacteristicReport> {
    let g = ic.grad(q_prime)?;
    let value = ic.eval(q_prime)? + q.sub(q_prime)?.inner_l2(&g)? + t * model.eval_path(&g);
    let flow = g.map(|a| model.grad(a)).scale(t);
    let residual = q.sub(&q_prime.sub(&flow)?)?.norm_l2();
    Ok(CharacteristicReport {
        q_prime: q_prime.clone(),
        residual,
        value,
    })
}

/// Foot `q'` of the characteristic through `q` by fixed-point iteration of
/// `q' = q + t grad xi(grad psi(q'))`; contracting for small `t`.
pub fn characteristic_foot(
    ic: &InitialCondition,
    model: &Nonlinearity,
    t: f64,
    q: &StepPath,
    iterations: usize,
) -> Result<StepPath> {
    let mut qp = q.clone();
    for _ in 0..iterations {
        let flow = ic.grad(&qp)?.map(|a| model.grad(a)).scale(t);
        qp = q.add(&flow)?;
    }
    Ok(qp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMat;
    use crate::model::Profile;

    #[test]
    fn zero_time_is_identity() {
        let ic = InitialCondition::new(Profile::LogCosh { scale: 1.0 }, 1).unwrap();
        let q = StepPath::from_scalars(alloc::vec![0.0, 0.5], &[0.2, 0.9]).unwrap();
        let r = characteristic_value(&ic, &Nonlinearity::sk(1), 0.0, &q, &q).unwrap();
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.value, ic.eval(&q).unwrap());
    }

    #[test]
    fn affine_foot_has_zero_residual() {
        let ic = InitialCondition::new(Profile::Affine { slope: 1.0 }, 1).unwrap();
        let q = StepPath::constant(SymMat::scalar(0.5));
        let qp = characteristic_foot(&ic, &Nonlinearity::sk(1), 0.3, &q, 3).unwrap();
        let r = characteristic_value(&ic, &Nonlinearity::sk(1), 0.3, &q, &qp).unwrap();
        assert!(r.residual < 1e-15);
        assert!((r.value - (0.5 + 0.3)).abs() < 1e-15);
    }
}
