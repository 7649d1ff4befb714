use hj_envelope_core::adjoint::{
    build_sigma_measure, first_moment_bound, lift_to_gamma, second_moment_bound,
    solve_adjoint_with, VelocityHistory, DENSITY_FLOOR, MASS_TOL,
};
use hj_envelope_core::model::{
    extend_psi_j, regularize, InitialCondition, LevelHamiltonian, MollifiedH, Nonlinearity,
    Profile, ScalarLevelH,
};
use hj_envelope_core::solver::{solve_viscous, FieldMeta, Grid};
use hj_envelope_core::TAU_CONE;
use proptest::prelude::*;

fn line_grid(eps: f64) -> Grid {
    Grid::with_cfl(0, 1, vec![-1.0], vec![4.0], 201, 1.0, 2.0, eps, 0.9).unwrap()
}

#[test]
fn constant_velocity_translates_the_ball() {
    let eps = 0.01;
    let g = line_grid(eps);
    let vel = VelocityHistory::constant(&g, &[2.0], 2.0, eps);
    let s = 0.5;
    let adj = solve_adjoint_with(&vel, g.step_of(s), &[0.5], 0.2, false).unwrap();
    let vol = g.cell_volume();
    let mass: f64 = adj.initial.iter().sum::<f64>() * vol;
    let mean: f64 = adj
        .initial
        .iter()
        .enumerate()
        .map(|(i, d)| d * vol * g.coords(i)[0])
        .sum::<f64>()
        / mass;
    let expected = 0.5 + 2.0 * g.time(g.step_of(s));
    assert!((mass - 1.0).abs() <= MASS_TOL);
    assert!(
        (mean - expected).abs() <= g.h() + (2.0 * eps * s).sqrt(),
        "{mean} vs {expected}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn adjoint_conserves_mass_and_sign(c in 0.0f64..2.5, v in -2.0f64..2.0, s in 0.05f64..0.6) {
        let g = line_grid(0.05);
        let vel = VelocityHistory::constant(&g, &[v], 2.0, 0.05);
        let adj = solve_adjoint_with(&vel, g.step_of(s), &[c], 0.2, false).unwrap();
        prop_assert!(adj.max_mass_drift <= MASS_TOL);
        prop_assert!(adj.min_density >= DENSITY_FLOOR);
    }
}

#[test]
fn sigma_measure_respects_moment_bounds() {
    let (eta, eps, r, t) = (0.05, 0.05, 0.22, 0.2);
    let reg = regularize(&Nonlinearity::sk(1)).unwrap();
    let h = MollifiedH::new(ScalarLevelH::new(reg, 1).unwrap(), eta).unwrap();
    let g = Grid::with_cfl(
        1,
        1,
        vec![-1.0; 2],
        vec![3.0; 2],
        41,
        0.5,
        h.coord_speed(),
        eps,
        0.9,
    )
    .unwrap();
    let ic = InitialCondition::new(Profile::LogCosh { scale: 1.0 }, 1).unwrap();
    let meta = FieldMeta {
        model: "sk".into(),
        profile: "logcosh".into(),
        eta,
        eps,
    };
    let f = solve_viscous(&h, &extend_psi_j(ic, 1), &g, eps, meta).unwrap();
    let vel = VelocityHistory::compute(&f, &h);
    let x = g.coords(g.nearest_node(&[0.8, 1.8]).unwrap());
    let sigma = build_sigma_measure(&vel, t, &x, r, 5).unwrap();
    assert!((sigma.total_mass() - 1.0).abs() <= MASS_TOL);
    let xn = g.point(g.nearest_node(&x).unwrap()).norm();
    assert!(sigma.first_moment() <= first_moment_bound(h.lipschitz(), eps, xn, t, r));
    assert!(sigma.second_moment() <= second_moment_bound(2.0, eps, xn, t, r));
    let gamma = lift_to_gamma(&sigma, TAU_CONE).unwrap();
    let w: f64 = gamma.atoms.iter().map(|a| a.weight).sum();
    assert!((w - 1.0).abs() < 1e-12);
    assert!(gamma.off_cone_mass >= 0.0 && gamma.off_cone_mass < 0.5);
    assert!(gamma
        .atoms
        .iter()
        .all(|a| a.path.is_increasing_psd(TAU_CONE)));
}

#[test]
fn ball_must_resolve_the_grid() {
    let g = line_grid(0.05);
    let vel = VelocityHistory::constant(&g, &[1.0], 2.0, 0.05);
    assert!(solve_adjoint_with(&vel, 10, &[1.0], 0.01, false).is_err());
}
