use proptest::prelude::*;
use semigroup_lab::domain::{inflate, sample, DomainSpec, SampleSet, SampleStrategy, SubsetShape, SubsetSpec};
use semigroup_lab::expr::Expr;
use semigroup_lab::moduli::{
    derivative_modulus, lip_local, lip_seminorm, map_derivative_modulus, t_lipschitz_modulus, EstimatorKind, ModulusReport, Witness,
};
use semigroup_lab::semigroup::{cubic_family, linear_family, rotation_family, SelfMap, SemigroupFamily};
use semigroup_lab::{Norm, Operator};

fn setup(seed: u64, n_pairs: usize) -> (DomainSpec, SubsetSpec, SampleSet) {
    let d = DomainSpec::interval(-2.0, 2.0).unwrap();
    let s = SubsetSpec::new(d.clone(), SubsetShape::interval(-0.5, 0.5)).unwrap();
    let smp = sample(&s, 0.3, SampleStrategy::QuasiRandom, 8, n_pairs, seed).unwrap();
    (d, s, smp)
}

fn smooth_map(d: DomainSpec, a: f64, w: f64) -> SelfMap {
    SelfMap::from_exprs(d, vec![Expr::parse(&format!("0.9*x1 + {a}*sin({w}*x1)")).unwrap()]).unwrap()
}

/// Re-evaluates a pair witness of a modulus of `f`.
fn quotient(f: &SelfMap, w: &Witness) -> f64 {
    match w {
        Witness::Pair { x, x_tilde } => {
            let (fx, fy) = (f.apply(x).unwrap(), f.apply(x_tilde).unwrap());
            Norm::Euclidean.dist_slices(&fx, &fy) / Norm::Euclidean.dist_slices(x, x_tilde)
        }
        Witness::Point { .. } => panic!("pair witness expected"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn moduli_grow_with_the_sample(seed in 0u64..500, a in 0.0f64..0.2, w in 0.5f64..4.0) {
        let (d, s, smp) = setup(seed, 10);
        let (_, _, more) = setup(seed + 1, 30);
        let g = smooth_map(d, a, w).minus_identity();
        let small = lip_local(&g, &s, 0.3, &smp).unwrap().values[0];
        let big = lip_local(&g, &s, 0.3, &smp.merged(&more)).unwrap().values[0];
        prop_assert!(small >= 0.0 && big >= small);
    }

    #[test]
    fn derivative_bound_dominates_sampled_quotients(seed in 0u64..500, a in 0.0f64..0.2, w in 0.5f64..4.0) {
        let (d, s, smp) = setup(seed, 40);
        let phi = smooth_map(d, a, w);
        let sampled = lip_local(&phi.minus_identity(), &s, 0.3, &smp).unwrap().values[0];
        let d_mu = inflate(&s, 0.3).unwrap();
        let dense = sample(&d_mu, 0.05, SampleStrategy::Grid, 33, 0, 0).unwrap();
        let bound = map_derivative_modulus(&phi, &d_mu, &dense, 1e-6).unwrap();
        prop_assert_eq!(bound.estimator_kind, EstimatorKind::DerivativeCertifiedUpperBound);
        // oracle: sup |0.1 − a w cos(w x)| ≤ 0.1 + a w
        prop_assert!(bound.values[0] <= 0.1 + a * w + 1e-12);
        prop_assert!(sampled <= bound.values[0] + 1e-12, "sampled {sampled} above bound {}", bound.values[0]);
    }

    #[test]
    fn witnesses_reproduce_their_values(seed in 0u64..500, a in 0.0f64..0.2, w in 0.5f64..4.0) {
        let (d, s, smp) = setup(seed, 20);
        let g = smooth_map(d, a, w).minus_identity();
        let r = lip_local(&g, &s, 0.3, &smp).unwrap();
        prop_assert!((quotient(&g, &r.witnesses[0]) - r.values[0]).abs() <= 1e-12);
    }

    #[test]
    fn rotation_is_uniformly_one_lipschitz(seed in 0u64..500, t in 0.0f64..6.3) {
        let fam = rotation_family();
        let s = SubsetSpec::new(fam.domain().clone(), SubsetShape::Ball { center: vec![0.0, 0.0], radius: 0.6, open: false }).unwrap();
        let smp = sample(&s, 0.2, SampleStrategy::QuasiRandom, 10, 30, seed).unwrap();
        let r = lip_seminorm(&fam.at(t), &smp).unwrap();
        prop_assert!(r.values[0] <= 1.0 + 1e-12);
    }
}

fn t_lipschitz_on_half(fam: &SemigroupFamily, grid: &[f64]) -> ModulusReport {
    let s = SubsetSpec::new(fam.domain().clone(), SubsetShape::interval(-0.5, 0.5)).unwrap();
    let smp = sample(&s, 0.2, SampleStrategy::Grid, 11, 100, 3).unwrap();
    t_lipschitz_modulus(fam, &s, 0.2, grid, &smp).unwrap()
}

#[test]
fn sampled_lipschitz_stays_below_the_certified_derivative_bound() {
    let d = DomainSpec::interval(-1.0, 1.0).unwrap();
    let fam = linear_family(Operator::from_element(1, 1, -1.5), d).unwrap();
    let grid = [0.4, 0.2, 0.1, 0.05];
    let sampled = t_lipschitz_on_half(&fam, &grid);
    let s = SubsetSpec::new(fam.domain().clone(), SubsetShape::interval(-0.5, 0.5)).unwrap();
    let d_mu = inflate(&s, 0.2).unwrap();
    let dense = sample(&d_mu, 0.05, SampleStrategy::Grid, 15, 0, 0).unwrap();
    let certified = derivative_modulus(&fam, &d_mu, &grid, &dense).unwrap();
    assert_eq!(certified.estimator_kind, EstimatorKind::DerivativeCertifiedUpperBound);
    for (i, t) in grid.iter().enumerate() {
        let exact = 1.0 - (-1.5 * t).exp();
        assert!((certified.values[i] - exact).abs() < 1e-14);
        assert!(sampled.values[i] <= certified.values[i] + 1e-12);
    }
}

#[test]
fn cubic_flow_is_t_lipschitz_with_linear_decay() {
    let grid: Vec<f64> = (0..8).map(|k| 0.1 * 0.5f64.powi(k)).collect();
    let r = t_lipschitz_on_half(&cubic_family(), &grid);
    // oracle: sup over D_μ of 1 − (1 + 2tx²)^{-3/2} ≈ 3t·0.7², ratio to t → 1.47
    for (t, v) in grid.iter().zip(&r.values).skip(3) {
        let ratio = v / t;
        assert!(ratio > 0.6 && ratio < 1.5, "t={t}: ratio {ratio}");
    }
    assert!(r.values.windows(2).all(|w| w[1] <= w[0]));
}
