use hj_envelope_core::geometry::{DyadicPoint, StepPath};
use hj_envelope_core::linalg::SymMat;
use hj_envelope_core::model::regularize;
use hj_envelope_core::model::{
    extend_psi_j, h_constant_diagonal, h_eval, h_path_minimize, level_hamiltonian,
    InitialCondition, LevelHamiltonian, MollifiedH, Nonlinearity, PathOptions, Profile,
    ScalarLevelH, TableSpec,
};
use proptest::prelude::*;

#[test]
fn offdiagonal_bipartite_value() {
    let a = SymMat::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
    assert_eq!(Nonlinearity::bipartite_offdiagonal().eval(&a), 1.0);
}

#[test]
fn sk_regularization_values() {
    let reg = regularize(&Nonlinearity::sk(1)).unwrap();
    assert_eq!(reg.eval(&SymMat::scalar(2.0)), 3.0);
    assert_eq!(reg.eval(&SymMat::scalar(0.5)), 0.25);
}

#[test]
fn h_of_step_down_path() {
    let reg = regularize(&Nonlinearity::sk(1)).unwrap();
    let kappa = StepPath::from_scalars(vec![0.0, 0.5], &[1.0, 0.0]).unwrap();
    assert!((h_eval(&reg, &kappa).unwrap() - 0.25).abs() < 1e-15);
}

#[test]
fn level_h_on_cone_is_averaged_xi() {
    let reg = regularize(&Nonlinearity::sk(1)).unwrap();
    let h = ScalarLevelH::new(reg.clone(), 2).unwrap();
    let x = [0.1, 0.3, 0.3, 0.9];
    let expected = x.iter().map(|v| v * v).sum::<f64>() / 4.0;
    assert!((h.value(&x) - expected).abs() < 1e-14);
}

#[test]
fn logcosh_constant_path() {
    let ic = InitialCondition::new(Profile::LogCosh { scale: 1.0 }, 1).unwrap();
    let q = StepPath::constant(SymMat::scalar(1.0));
    assert!((ic.eval(&q).unwrap() - 1f64.cosh().ln()).abs() < 1e-15);
    let g = ic.grad(&q).unwrap();
    assert!((g.values()[0].get(0, 0) - 1f64.tanh()).abs() < 1e-15);
}

#[test]
fn affine_extension_below_cone() {
    let ic = InitialCondition::new(Profile::Affine { slope: 1.0 }, 1).unwrap();
    let ext = extend_psi_j(ic, 0);
    let x = DyadicPoint::from_scalars(0, &[-2.0]).unwrap();
    assert!((ext.eval(&x).unwrap() + 2.0).abs() < 1e-12);
}

#[test]
fn mollification_is_close_and_lipschitz() {
    let reg = regularize(&Nonlinearity::sk(1)).unwrap();
    let h = ScalarLevelH::new(reg, 1).unwrap();
    let lip = h.lipschitz();
    for eta in [0.2, 0.05] {
        let m = MollifiedH::new(&h, eta).unwrap();
        let mut g = [0.0; 2];
        for a in 0..21 {
            for b in 0..21 {
                let z = [-1.0 + 0.15 * a as f64, -1.0 + 0.15 * b as f64];
                assert!((m.value(&z) - h.value(&z)).abs() <= lip * m.max_shift() + 1e-12);
                m.gradient(&z, &mut g);
                let norm = ((g[0] * g[0] + g[1] * g[1]) / 2.0).sqrt();
                assert!(norm <= lip + 1e-9, "{norm} > {lip}");
            }
        }
    }
}

/// The constant-path reduction is the global minimum; the path optimizer can
/// only stall above it.
#[test]
fn bipartite_constant_reduction_bounds_optimizer() {
    let reg = regularize(&Nonlinearity::bipartite()).unwrap();
    let f = |a: usize| -0.75 + 2.5 * a as f64 / 4.0;
    for i in 0..5 {
        for j in 0..5 {
            for k in 0..5 {
                let x = SymMat::from_coords(2, &[f(i), f(j), f(k)]);
                let exact = h_constant_diagonal(&reg, &x).unwrap();
                if let Ok(p) =
                    h_path_minimize(&reg, &StepPath::constant(x.clone()), PathOptions::default())
                {
                    assert!(p.value >= exact - 1e-9, "{x:?}: {} < {exact}", p.value);
                }
            }
        }
    }
}

#[test]
fn tabulated_bipartite_level_h_is_monotone_on_a_ray() {
    let reg = regularize(&Nonlinearity::bipartite()).unwrap();
    let h = level_hamiltonian(
        &reg,
        0,
        &TableSpec {
            points: 9,
            ..TableSpec::default()
        },
    )
    .unwrap();
    let mut prev = f64::NEG_INFINITY;
    for k in 0..20 {
        let s = -0.5 + 0.1 * k as f64;
        let z = SymMat::diag(&[s, s]).coords();
        let v = h.value(&z);
        assert!(v >= prev - 1e-12);
        prev = v;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn regularized_xi_is_increasing(a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let reg = regularize(&Nonlinearity::sk(1)).unwrap();
        prop_assert!(reg.eval(&SymMat::scalar(a + b)) >= reg.eval(&SymMat::scalar(a)));
    }

    #[test]
    fn h_is_dual_increasing(
        kappa in prop::collection::vec(-1.0f64..1.0, 8),
        tails in prop::collection::vec(0.0f64..0.5, 8),
    ) {
        let reg = regularize(&Nonlinearity::sk(1)).unwrap();
        let b: Vec<f64> = (0..8).map(|k| k as f64 / 8.0).collect();
        // y with nonnegative tail integrals
        let y: Vec<f64> = (0..8)
            .map(|k| 8.0 * (tails[k] - if k + 1 < 8 { tails[k + 1] } else { 0.0 }))
            .collect();
        let sum: Vec<f64> = kappa.iter().zip(&y).map(|(a, c)| a + c).collect();
        let h0 = h_eval(&reg, &StepPath::from_scalars(b.clone(), &kappa).unwrap()).unwrap();
        let h1 = h_eval(&reg, &StepPath::from_scalars(b, &sum).unwrap()).unwrap();
        prop_assert!(h1 >= h0 - 1e-12);
    }
}
