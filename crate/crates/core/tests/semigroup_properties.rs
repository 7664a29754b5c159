use proptest::prelude::*;
use semigroup_lab::domain::{DomainSpec, SampleSet, SubsetShape, SubsetSpec};
use semigroup_lab::expr::Expr;
use semigroup_lab::semigroup::{
    compose_residual, cubic_family, example31_family, finite_difference_derivative, flow_family, iterate, linear_family, rotation_family,
    IntegratorConfig, SelfMap, SemigroupFamily, VectorField,
};
use semigroup_lab::{Norm, Operator};

fn closed_form_families() -> Vec<SemigroupFamily> {
    let d = DomainSpec::interval(-1.0, 1.0).unwrap();
    vec![
        example31_family(),
        cubic_family(),
        rotation_family(),
        linear_family(Operator::from_element(1, 1, -1.0), d).unwrap(),
        linear_family(
            Operator::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]),
            DomainSpec::unit_ball(Norm::SupNorm, 2).unwrap(),
        )
        .unwrap(),
    ]
}

fn point_in(fam: &SemigroupFamily, u: &[f64]) -> Vec<f64> {
    // scale into the half-radius ball so every orbit stays well inside
    let x = &u[..fam.dim()];
    let r = fam.domain().norm.norm_slice(x).max(1e-12);
    x.iter().map(|v| v * (0.5 * r.min(1.0) / r)).collect()
}

fn single_point(fam: &SemigroupFamily, x: Vec<f64>) -> SampleSet {
    let s = SubsetSpec::new(fam.domain().clone(), SubsetShape::point(x.clone())).unwrap();
    SampleSet::from_points(s, vec![x], 0.1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn time_zero_is_the_identity(idx in 0..5usize, u in prop::collection::vec(-1.0f64..1.0, 2)) {
        let fam = &closed_form_families()[idx];
        let x = point_in(fam, &u);
        prop_assert_eq!(fam.eval(0.0, &x).unwrap(), x);
    }

    #[test]
    fn orbits_stay_in_the_domain(idx in 0..5usize, u in prop::collection::vec(-1.0f64..1.0, 2), t in 0.0f64..3.0) {
        let fam = &closed_form_families()[idx];
        let x = point_in(fam, &u);
        prop_assert!(fam.domain().contains(&fam.eval(t, &x).unwrap()));
    }

    #[test]
    fn closed_form_law(idx in 0..5usize, u in prop::collection::vec(-1.0f64..1.0, 2), s in 0.0f64..2.0, t in 0.0f64..2.0) {
        let fam = &closed_form_families()[idx];
        let smp = single_point(fam, point_in(fam, &u));
        prop_assert!(compose_residual(fam, s, t, &smp).unwrap().max() <= 1e-10);
    }

    #[test]
    fn iterate_is_associative(lambda in 0.3f64..1.0, c in -0.2f64..0.2, j in 0usize..6, k in 0usize..6, x in -0.5f64..0.5) {
        let d = DomainSpec::interval(-2.0, 2.0).unwrap();
        let phi = SelfMap::from_exprs(d, vec![Expr::parse(&format!("{lambda}*x1 + {c}*sin(x1)")).unwrap()]).unwrap();
        let joint = iterate(&phi, j + k, &[x]).unwrap();
        let split = iterate(&phi, j, &iterate(&phi, k, &[x]).unwrap()).unwrap();
        prop_assert_eq!(joint, split);
    }

    #[test]
    fn example31_branches_meet_on_the_switch_surface(a in 0.5001f64..0.999, sign in any::<bool>()) {
        // e^{−t}x and 2e^{−2t}x|x| agree at t = ln 2|x|
        let x = if sign { a } else { -a };
        let t = (2.0 * a).ln();
        let early = (-t).exp() * x;
        let late = 2.0 * (-2.0 * t).exp() * x * a;
        prop_assert!((early - late).abs() <= 1e-15);
        let fam = example31_family();
        prop_assert!((fam.eval(t, &[x]).unwrap()[0] - early).abs() <= 1e-15);
        prop_assert!((fam.eval(t * (1.0 + 1e-12), &[x]).unwrap()[0] - late).abs() <= 1e-12);
    }
}

#[test]
fn flow_law_within_twice_the_tolerance() {
    let d = DomainSpec::interval(-1.0, 1.0).unwrap();
    let cfg = IntegratorConfig::default();
    let fam = flow_family(VectorField::neg_cube(d.clone()), cfg).unwrap();
    let s = SubsetSpec::new(d, SubsetShape::interval(-0.8, 0.8)).unwrap();
    let pts: Vec<Vec<f64>> = (0..=16).map(|i| vec![-0.8 + 0.1 * i as f64]).collect();
    let smp = SampleSet::from_points(s, pts, 0.1);
    for (s_, t) in [(0.1, 0.2), (0.5, 0.5), (1.0, 0.3)] {
        let r = compose_residual(&fam, s_, t, &smp).unwrap().max();
        assert!(r <= 2.0 * cfg.tolerance(), "s={s_} t={t}: {r:e}");
    }
    // against the closed form x / √(1 + 2tx²)
    let exact = cubic_family();
    for x in [-0.7, 0.2, 0.6] {
        let gap = (fam.eval(1.5, &[x]).unwrap()[0] - exact.eval(1.5, &[x]).unwrap()[0]).abs();
        assert!(gap <= 10.0 * cfg.tolerance());
    }
}

#[test]
fn rotation_matches_the_matrix_exponential() {
    let fam = rotation_family();
    for t in [0.0, 0.3, 1.0, 2.5] {
        let y = fam.eval(t, &[0.8, 0.0]).unwrap();
        assert!((y[0] - 0.8 * t.cos()).abs() < 1e-15 && (y[1] + 0.8 * t.sin()).abs() < 1e-15);
    }
}

/// Slope of the central-difference error against the analytic derivative.
fn fd_order(fam: &SemigroupFamily, t: f64, x: &[f64]) -> f64 {
    let exact = fam.analytic_derivative(t, x).unwrap().unwrap();
    let steps = [1e-1, 3e-2, 1e-2, 3e-3];
    let errs: Vec<f64> = steps
        .iter()
        .map(|&h| semigroup_lab::norm::spectral_norm(&(finite_difference_derivative(fam, t, x, h).unwrap().matrix - &exact)))
        .collect();
    let lx: Vec<f64> = steps.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = errs.iter().map(|v| v.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / 4.0, ly.iter().sum::<f64>() / 4.0);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[test]
fn finite_difference_derivative_is_second_order() {
    let slope = fd_order(&cubic_family(), 0.7, &[0.4]);
    assert!((slope - 2.0).abs() <= 0.2, "cubic slope {slope}");
    let exprs = vec![Expr::parse("x1 + t*sin(2*x2)").unwrap(), Expr::parse("x2*exp(-t*x1)").unwrap()];
    let fam = semigroup_lab::semigroup::expression_family(DomainSpec::unit_ball(Norm::SupNorm, 2).unwrap(), exprs).unwrap();
    let slope = fd_order(&fam, 0.5, &[0.3, -0.4]);
    assert!((slope - 2.0).abs() <= 0.2, "expression slope {slope}");
}
