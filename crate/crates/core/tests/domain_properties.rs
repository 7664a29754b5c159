use proptest::prelude::*;
use semigroup_lab::domain::{
    ell_infinity_example_domain, ell_infinity_point, ell_infinity_refutation, inflate, path_length, sample, shortest_path_bound, AxisBox,
    DomainSpec, PathCurve, SampleStrategy, SubsetShape, SubsetSpec,
};
use semigroup_lab::{Error, Norm};

fn l_shape(norm: Norm) -> DomainSpec {
    DomainSpec::union_of_boxes(
        norm,
        vec![
            AxisBox::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap(),
            AxisBox::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap(),
        ],
    )
    .unwrap()
}

fn domains() -> Vec<DomainSpec> {
    vec![
        DomainSpec::interval(-1.0, 1.0).unwrap(),
        DomainSpec::unit_ball(Norm::Euclidean, 2).unwrap(),
        DomainSpec::boxed(Norm::SupNorm, vec![-1.0, 0.0], vec![1.0, 3.0]).unwrap(),
        l_shape(Norm::Euclidean),
        ell_infinity_example_domain(1.0 / 3.0, 3).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn boundary_distance_is_positive_exactly_inside(idx in 0..5usize, u in prop::collection::vec(-1.5f64..3.5, 3)) {
        let d = &domains()[idx];
        let x = &u[..d.ambient_dim];
        match d.dist_to_boundary(x) {
            Ok(dist) => {
                prop_assert_eq!(dist > 0.0, d.contains(x));
                prop_assert!(dist <= d.outer_radius().unwrap() + 1e-12);
            }
            Err(Error::OutsideDomain { .. }) => prop_assert!(!d.contains_closed(x)),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn boundary_distance_ball_fits_inside(idx in 0..5usize, u in prop::collection::vec(-1.5f64..3.5, 3), dir in prop::collection::vec(-1.0f64..1.0, 3)) {
        let d = &domains()[idx];
        let n = d.ambient_dim;
        let x = &u[..n];
        prop_assume!(d.contains(x));
        let r = d.dist_to_boundary(x).unwrap();
        let len = d.norm.norm_slice(&dir[..n]);
        prop_assume!(len > 1e-3);
        // every point strictly within the certified distance is a member
        let y: Vec<f64> = (0..n).map(|i| x[i] + 0.999 * r * dir[i] / len).collect();
        prop_assert!(d.contains(&y));
    }

    #[test]
    fn inflation_is_monotone(mu1 in 0.01f64..0.3, extra in 0.0f64..0.2, probe in prop::collection::vec(-1.0f64..1.0, 2)) {
        let d = DomainSpec::unit_ball(Norm::Euclidean, 2).unwrap();
        let s = SubsetSpec::new(d, SubsetShape::closed_box(vec![-0.3, -0.2], vec![0.2, 0.3])).unwrap();
        let mu2 = mu1 + extra;
        prop_assume!(mu2 < s.margin());
        let (a, b) = (inflate(&s, mu1).unwrap(), inflate(&s, mu2).unwrap());
        prop_assert!(!a.contains(&probe) || b.contains(&probe));
        prop_assert!(!s.contains(&probe) || a.contains(&probe));
    }

    #[test]
    fn sample_pairs_keep_their_contract(seed in 0u64..1000, mu in 0.01f64..0.2, quasi in any::<bool>()) {
        let d = l_shape(Norm::Euclidean);
        let s = SubsetSpec::new(d, SubsetShape::closed_box(vec![0.2, 0.2], vec![0.8, 1.6])).unwrap();
        prop_assume!(mu < s.margin());
        let strategy = if quasi { SampleStrategy::QuasiRandom } else { SampleStrategy::Grid };
        let smp = sample(&s, mu, strategy, 16, 40, seed).unwrap();
        prop_assert!(smp.check_pairs().is_ok());
        for p in &smp.pairs {
            let gap = Norm::Euclidean.dist_slices(&p.x, &p.x_tilde);
            prop_assert!(gap > 0.0 && gap <= mu);
        }
    }

    #[test]
    fn witness_is_never_shorter_than_the_bound(a in prop::collection::vec(0.05f64..1.95, 2), b in prop::collection::vec(0.05f64..1.95, 2), sup in any::<bool>()) {
        let d = l_shape(if sup { Norm::SupNorm } else { Norm::Euclidean });
        prop_assume!(d.contains(&a) && d.contains(&b));
        let (lower, witness) = shortest_path_bound(&d, &a, &b).unwrap();
        let len = path_length(&witness).unwrap();
        prop_assert!(len + 1e-9 >= lower, "witness {len} below bound {lower}");
        prop_assert!(lower + 1e-9 >= d.norm.dist_slices(&a, &b));
    }
}

#[test]
fn l_shape_detour_around_the_corner() {
    // (1.5, 0.5) → (0.5, 1.5) cannot cut through the missing square; the
    // Euclidean geodesic bends at (1, 1): two legs of length √0.5
    let d = l_shape(Norm::Euclidean);
    let (lower, witness) = shortest_path_bound(&d, &[1.5, 0.5], &[0.5, 1.5]).unwrap();
    let oracle = 2.0 * 0.5f64.sqrt();
    assert!((lower - oracle).abs() < 1e-6, "lower bound {lower}");
    assert!(path_length(&witness).unwrap() < oracle + 1e-3);
}

/// Stage path through `D_1^a, …, D_j^a` in the sup norm: each stage pushes the
/// current coordinate across the next interface while the following one
/// starts moving, so consecutive stages cost `1 − 2a` after the first.
fn staged_path(a: f64, j: usize, n: usize, slack: f64) -> Vec<Vec<f64>> {
    let mut nodes = vec![vec![0.0; n]];
    let mut x = vec![0.0; n];
    for k in 0..j {
        if k > 0 {
            x[k - 1] = 1.0;
        }
        x[k] = if k + 1 < j { 1.0 - a + slack } else { 1.0 };
        if k + 1 < j && k + 1 < n {
            x[k + 1] = a - slack;
        }
        nodes.push(x.clone());
    }
    if j >= 2 {
        x[j - 2] = 1.0;
    }
    x[j - 1] = 1.0;
    nodes.push(x);
    nodes
}

#[test]
fn explicit_paths_bracket_the_certified_bound() {
    let a = 1.0 / 3.0;
    for n in 2..=6 {
        let d = ell_infinity_example_domain(a, n).unwrap();
        for j in 1..=n {
            let curve = PathCurve::new(d.clone(), staged_path(a, j, n, 1e-6));
            let len = path_length(&curve).unwrap();
            let (lower, _) = shortest_path_bound(&d, &vec![0.0; n], &ell_infinity_point(j, n)).unwrap();
            assert!(lower <= len + 1e-9, "n={n} j={j}: bound {lower} above an explicit path {len}");
            if j >= 2 {
                // first stage 1 − a, middle stages 1 − 2a, last stage 1 − a
                let oracle = 2.0 * (1.0 - a) + (j as f64 - 2.0) * (1.0 - 2.0 * a);
                assert!(len >= oracle && len - oracle < 1e-4, "n={n} j={j}: {len} vs {oracle}");
                assert!((lower - oracle).abs() < 1e-5, "n={n} j={j}: bound {lower} vs {oracle}");
            }
        }
    }
}

#[test]
fn half_j_fails_for_a_third_from_j_five() {
    // an in-domain curve of length 7/3 < 5/2 joins 0 and x^(5)
    let d = ell_infinity_example_domain(1.0 / 3.0, 5).unwrap();
    let len = path_length(&PathCurve::new(d, staged_path(1.0 / 3.0, 5, 5, 1e-6))).unwrap();
    assert!(len < 2.5 && (len - 7.0 / 3.0).abs() < 1e-5);
}

#[test]
fn half_j_holds_for_a_quarter() {
    let rows = ell_infinity_refutation(0.25, 7).unwrap();
    assert!(rows.iter().all(|r| r.meets_half_j() && r.witness_length + 1e-9 >= r.lower_bound));
}

#[test]
fn lower_bounds_grow_without_bound() {
    let rows = ell_infinity_refutation(1.0 / 3.0, 8).unwrap();
    let last: Vec<f64> = (1..=8)
        .map(|j| rows.iter().find(|r| r.truncation == 8 && r.j == j).unwrap().lower_bound)
        .collect();
    assert!(last.windows(2).all(|w| w[1] > w[0]));
    assert!(last[7] > 3.0);
}
