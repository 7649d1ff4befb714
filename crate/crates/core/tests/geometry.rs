use hj_envelope_core::geometry::{
    cone_depth, in_cone, in_dual_cone, lift, local_average, metric_project_to_cone, project,
    DyadicPoint, ProjectionOptions, StepPath,
};
use hj_envelope_core::linalg::SymMat;
use hj_envelope_core::TAU_CONE;
use proptest::prelude::*;

fn staircase(n: usize) -> StepPath {
    let b: Vec<f64> = (0..n).map(|k| k as f64 / n as f64).collect();
    let v: Vec<f64> = b.clone();
    StepPath::from_scalars(b, &v).unwrap()
}

#[test]
fn staircase_projection_is_block_average() {
    // block means of k/64 over k = 0..31 and k = 32..63
    let x = project(&staircase(64), 1);
    let v: Vec<f64> = x.blocks().iter().map(|b| b.get(0, 0)).collect();
    assert_eq!(v, vec![0.2421875, 0.7421875]);
    assert!((v[0] - 0.25).abs() <= 1.0 / 128.0);
}

#[test]
fn staircase_approximation_error() {
    let q = staircase(64);
    let err = q.sub(&local_average(&q, 2)).unwrap().norm_l1();
    assert!((err - 0.0625).abs() < 1e-15, "{err}");
    let bound = 2f64.powf(0.5) * q.norm_l2();
    assert!(err <= bound);
}

#[test]
fn pooled_projection_example() {
    let x = DyadicPoint::from_scalars(1, &[2.0, 1.0]).unwrap();
    let p = metric_project_to_cone(&x, ProjectionOptions::default()).unwrap();
    assert_eq!(p, DyadicPoint::from_scalars(1, &[1.5, 1.5]).unwrap());
}

#[test]
fn depth_of_a_two_block_point() {
    let x = DyadicPoint::from_scalars(1, &[1.1, 1.5]).unwrap();
    assert!((cone_depth(&x) - 0.2).abs() < 1e-15);
    let y = DyadicPoint::from_scalars(1, &[0.1, 1.5]).unwrap();
    assert!((cone_depth(&y) - 0.1 / 2f64.sqrt()).abs() < 1e-15);
}

fn sym(d: usize) -> impl Strategy<Value = SymMat> {
    prop::collection::vec(-2.0f64..2.0, d * (d + 1) / 2)
        .prop_map(move |z| SymMat::from_coords(d, &z))
}

fn psd(d: usize) -> impl Strategy<Value = SymMat> {
    sym(d).prop_map(|a| {
        let mut m = a.clone();
        for i in 0..a.dim() {
            for k in i..a.dim() {
                m.set(i, k, (0..a.dim()).map(|l| a.get(i, l) * a.get(k, l)).sum());
            }
        }
        m
    })
}

fn point(level: u32, d: usize) -> impl Strategy<Value = DyadicPoint> {
    prop::collection::vec(sym(d), 1usize << level)
        .prop_map(move |b| DyadicPoint::new(level, b).unwrap())
}

fn cone_point(level: u32, d: usize) -> impl Strategy<Value = DyadicPoint> {
    prop::collection::vec(psd(d), 1usize << level).prop_map(move |inc| {
        let mut acc = SymMat::zeros(d);
        let b = inc
            .iter()
            .map(|m| {
                acc.axpy(1.0, m);
                acc.clone()
            })
            .collect();
        DyadicPoint::new(level, b).unwrap()
    })
}

fn breakpoints(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..0.999, 0..max).prop_map(|mut b| {
        b.push(0.0);
        b.sort_by(f64::total_cmp);
        b.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        b
    })
}

fn path(d: usize) -> impl Strategy<Value = StepPath> {
    breakpoints(8).prop_flat_map(move |b| {
        prop::collection::vec(sym(d), b.len())
            .prop_map(move |v| StepPath::new(b.clone(), v).unwrap())
    })
}

fn increasing(d: usize) -> impl Strategy<Value = StepPath> {
    breakpoints(8).prop_flat_map(move |b| {
        prop::collection::vec(psd(d), b.len()).prop_map(move |inc| {
            let mut acc = SymMat::zeros(d);
            let v = inc
                .iter()
                .map(|m| {
                    acc.axpy(1.0, m);
                    acc.clone()
                })
                .collect();
            StepPath::new(b.clone(), v).unwrap()
        })
    })
}

fn pair() -> impl Strategy<Value = (DyadicPoint, DyadicPoint)> {
    (1usize..3, 0u32..5).prop_flat_map(|(d, j)| (point(j, d), point(j, d)))
}

fn close(a: &DyadicPoint, b: &DyadicPoint) -> f64 {
    a.sub(b).unwrap().norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lift_is_isometric((x, y) in pair()) {
        let lhs = lift(&x).inner_l2(&lift(&y)).unwrap();
        prop_assert!((lhs - x.inner(&y).unwrap()).abs() <= 1e-12);
        prop_assert!(close(&project(&lift(&x), x.level()), &x) <= 1e-12);
    }

    #[test]
    fn projection_contracts(kappa in path(2), j in 0u32..6) {
        prop_assert!(project(&kappa, j).norm() <= kappa.norm_l2() + 1e-12);
    }

    #[test]
    fn projections_are_consistent(kappa in path(1), j in 0u32..4, extra in 0u32..3) {
        let fine = project(&kappa, j + extra);
        prop_assert!(close(&project(&lift(&fine), j), &project(&kappa, j)) <= 1e-12);
    }

    #[test]
    fn cones_map_to_cones(q in increasing(2), x in cone_point(2, 2), j in 0u32..5) {
        prop_assert!(in_cone(&project(&q, j), TAU_CONE));
        prop_assert!(lift(&x).is_increasing_psd(TAU_CONE));
    }

    #[test]
    fn approximation_bound(q in increasing(2), j in 1u32..7) {
        let lhs = q.sub(&local_average(&q, j)).unwrap().norm_l1();
        let rhs = 2f64.powf((3.0 - j as f64) / 2.0) * 2.0 * q.norm_l2();
        prop_assert!(lhs <= rhs, "{} > {}", lhs, rhs);
    }

    #[test]
    fn cone_and_dual_pair_nonnegatively(q in cone_point(2, 2), t in cone_point(2, 2)) {
        // tails of a reversed cone point are PSD
        let mut blocks: Vec<SymMat> = t.blocks().to_vec();
        blocks.reverse();
        let n = blocks.len();
        let y: Vec<SymMat> = (0..n)
            .map(|k| if k + 1 < n { &blocks[k] - &blocks[k + 1] } else { blocks[k].clone() })
            .collect();
        let y = DyadicPoint::new(2, y).unwrap();
        prop_assert!(in_dual_cone(&y, TAU_CONE));
        prop_assert!(q.inner(&y).unwrap() >= -TAU_CONE);
    }

    #[test]
    fn balls_within_depth_stay_in_cone(x in cone_point(2, 2), v in point(2, 2), s in 0.0f64..0.999) {
        let depth = cone_depth(&x);
        let n = v.norm();
        prop_assume!(n > 1e-9);
        let blocks: Vec<SymMat> = x
            .blocks()
            .iter()
            .zip(v.blocks())
            .map(|(a, b)| {
                let mut m = a.clone();
                m.axpy(s * depth / n, b);
                m
            })
            .collect();
        prop_assert!(in_cone(&DyadicPoint::new(2, blocks).unwrap(), 1e-12));
    }

    #[test]
    fn metric_projection_is_nearest(x in point(2, 1), q in cone_point(2, 1)) {
        let p = metric_project_to_cone(&x, ProjectionOptions::default()).unwrap();
        prop_assert!(in_cone(&p, 1e-12));
        prop_assert!(close(&x, &p) <= close(&x, &q) + 1e-12);
    }

    #[test]
    fn matrix_projection_is_nearest(x in point(1, 2), q in cone_point(1, 2)) {
        let p = metric_project_to_cone(&x, ProjectionOptions::default()).unwrap();
        prop_assert!(in_cone(&p, 1e-8));
        prop_assert!(close(&x, &p) <= close(&x, &q) + 1e-8);
    }
}
