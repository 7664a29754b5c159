//! Pointwise verifiers for the iterate, quotient, derivative and transfer
//! inequalities.

use rayon::prelude::*;
use serde_json::json;

use super::{InequalityReport, PointCheck, Statement};
use crate::domain::{inflate, sample as draw, Pair, PathLengthOutcome, SampleSet, SampleStrategy, SubsetSpec};
use crate::error::{Error, Hypothesis, Result};
use crate::moduli::{lip_local_with, local_sup, map_derivative_modulus, refined_pairs, EstimatorKind, Refinement, DEFAULT_FD_STEP};
use crate::semigroup::{frechet_derivative, SelfMap, SemigroupFamily};

const SAMPLED_ELL: &str = "inequality tested against sampled ℓ";

fn require_in(subset: &SubsetSpec, sample: &SampleSet) -> Result<()> {
    if sample.points.is_empty() {
        return Err(Error::EmptySample);
    }
    match sample.points.iter().find(|p| !subset.contains(p)) {
        Some(p) => Err(Error::ContractViolation(format!("sample point {p:?} is not in the base subset"))),
        None => Ok(()),
    }
}

/// The sample with the pairs `(x, y(x))` appended for every point whose
/// image differs from it. These are the pairs the telescoping argument uses.
fn with_image_pairs(sample: &SampleSet, images: &[Vec<f64>]) -> SampleSet {
    let mut s = sample.clone();
    s.pairs
        .extend(sample.points.iter().zip(images).filter(|(x, y)| x != y).map(|(x, y)| Pair {
            x: x.clone(),
            x_tilde: y.clone(),
        }));
    s
}

/// `max_k Lip_{D̂,μ}(g_k)` for `k = 1..=p` with its witness-free value; zero
/// when the sample holds no pairs.
fn max_local_modulus(maps: impl Iterator<Item = SelfMap>, d_hat: &SubsetSpec, mu: f64, pairs: &SampleSet) -> Result<f64> {
    if pairs.pairs.is_empty() {
        return Ok(0.0);
    }
    let mut ell: f64 = 0.0;
    for g in maps {
        ell = ell.max(lip_local_with(&g, d_hat, mu, pairs, &Refinement::default())?.values[0]);
    }
    Ok(ell)
}

fn hypothesis(hypothesis: Hypothesis, measured: f64, bound: f64, witness: &[f64]) -> Error {
    Error::HypothesisNotMet {
        hypothesis,
        measured,
        bound,
        witness: witness.to_vec(),
    }
}

/// Checks `‖x − φ^p(x) − p(x − φ(x))‖ ≤ (p − 1) ℓ ‖x − φ(x)‖` on the sample
/// points, with `ℓ = max_k Lip_{D̂,μ}(φ^k − Id)` measured on the sample pairs
/// together with the pairs `(x, φ(x))`.
pub fn verify_lemma_iterates(
    phi: &SelfMap,
    d_hat: &SubsetSpec,
    mu: f64,
    p: usize,
    sample: &SampleSet,
    tolerance: f64,
) -> Result<InequalityReport> {
    verify_lemma_iterates_with(phi, d_hat, mu, p, sample, tolerance, None)
}

/// As [`verify_lemma_iterates`]; a supplied `ell_bound` must dominate the
/// measured modulus up to `tolerance` (else `HypothesisNotMet`) and is then
/// used on the right-hand side.
pub fn verify_lemma_iterates_with(
    phi: &SelfMap,
    d_hat: &SubsetSpec,
    mu: f64,
    p: usize,
    sample: &SampleSet,
    tolerance: f64,
    ell_bound: Option<f64>,
) -> Result<InequalityReport> {
    if p == 0 {
        return Err(Error::BadParameter("p must be at least 1".into()));
    }
    if !(mu > 0.0) {
        return Err(Error::BadParameter(format!("μ = {mu} must be positive")));
    }
    require_in(d_hat, sample)?;
    let norm = d_hat.norm();
    let images: Vec<Vec<f64>> = sample.points.par_iter().map(|x| phi.apply(x)).collect::<Result<_>>()?;
    for (x, y) in sample.points.iter().zip(&images) {
        let d = norm.dist_slices(x, y);
        if d > mu {
            return Err(hypothesis(Hypothesis::Displacement, d, mu, x));
        }
    }
    let pairs = with_image_pairs(sample, &images);
    let measured = max_local_modulus((1..=p).map(|k| phi.power(k).minus_identity()), d_hat, mu, &pairs)?;
    let ell = match ell_bound {
        Some(b) if measured > b + tolerance => {
            return Err(hypothesis(Hypothesis::LipschitzBound, measured, b, &sample.points[0]));
        }
        Some(b) => b,
        None => measured,
    };
    let checks: Vec<PointCheck> = sample
        .points
        .par_iter()
        .zip(&images)
        .map(|(x, y)| {
            let yp = phi.iterate(p, x)?;
            let diff: Vec<f64> = (0..x.len()).map(|i| x[i] - yp[i] - p as f64 * (x[i] - y[i])).collect();
            let lhs = norm.norm_slice(&diff);
            let rhs = (p - 1) as f64 * ell * norm.dist_slices(x, y);
            Ok(PointCheck::new(x.clone(), lhs, rhs))
        })
        .collect::<Result<_>>()?;
    InequalityReport::assemble(
        Statement::LemmaIterates,
        format!("‖x − φ^p(x) − p(x − φ(x))‖ ≤ (p − 1) ℓ ‖x − φ(x)‖, {SAMPLED_ELL}"),
        checks,
        tolerance,
        Some((ell, EstimatorKind::SampledLowerBound)),
        json!({
            "map": phi.name(),
            "p": p,
            "mu": mu,
            "ell": ell,
            "ell_measured": measured,
            "ell_supplied": ell_bound,
            "d_hat": d_hat,
            "sample": sample.descriptor(),
        }),
    )
}

/// Checks `‖f_{p t0}(x) − f_{t0}(x)‖ ≤ (p − 1)/p · ℓ ‖f_{t0}(x)‖` with
/// `ℓ = max_k Lip_{D̂,μ}(F_{k t0} − Id)`.
pub fn verify_corollary_quotients(
    family: &SemigroupFamily,
    t0: f64,
    p: usize,
    d_hat: &SubsetSpec,
    mu: f64,
    sample: &SampleSet,
    tolerance: f64,
) -> Result<InequalityReport> {
    if !(t0 > 0.0) || !t0.is_finite() {
        return Err(Error::BadParameter(format!("t0 = {t0} must be positive")));
    }
    if p == 0 {
        return Err(Error::BadParameter("p must be at least 1".into()));
    }
    if !(mu > 0.0) {
        return Err(Error::BadParameter(format!("μ = {mu} must be positive")));
    }
    require_in(d_hat, sample)?;
    let norm = d_hat.norm();
    let images: Vec<Vec<f64>> = sample.points.par_iter().map(|x| family.eval(t0, x)).collect::<Result<_>>()?;
    let quotient = |x: &[f64], y: &[f64]| -> Vec<f64> { y.iter().zip(x).map(|(a, b)| (a - b) / t0).collect() };
    for (x, y) in sample.points.iter().zip(&images) {
        let q = norm.norm_slice(&quotient(x, y));
        if q > mu / t0 {
            return Err(hypothesis(Hypothesis::QuotientSize, q, mu / t0, x));
        }
    }
    let pairs = with_image_pairs(sample, &images);
    let ell = max_local_modulus((1..=p).map(|k| family.at(k as f64 * t0).minus_identity()), d_hat, mu, &pairs)?;
    let pt0 = p as f64 * t0;
    let checks: Vec<PointCheck> = sample
        .points
        .par_iter()
        .zip(&images)
        .map(|(x, y)| {
            let f0 = quotient(x, y);
            let fp: Vec<f64> = family.eval(pt0, x)?.iter().zip(x).map(|(a, b)| (a - b) / pt0).collect();
            let lhs = norm.dist_slices(&fp, &f0);
            let rhs = (p - 1) as f64 / p as f64 * ell * norm.norm_slice(&f0);
            let mut c = PointCheck::new(x.clone(), lhs, rhs);
            c.t = Some(t0);
            Ok(c)
        })
        .collect::<Result<_>>()?;
    InequalityReport::assemble(
        Statement::CorollaryQuotients,
        format!("‖f_(p t0)(x) − f_t0(x)‖ ≤ (p − 1)/p · ℓ ‖f_t0(x)‖, {SAMPLED_ELL}"),
        checks,
        tolerance,
        Some((ell, EstimatorKind::SampledLowerBound)),
        json!({
            "family": family.info(),
            "t0": t0,
            "p": p,
            "mu": mu,
            "ell": ell,
            "d_hat": d_hat,
            "sample": sample.descriptor(),
        }),
    )
}

/// Grid points of `D_μ` (same count and seed as `base`) together with the
/// base points.
pub(crate) fn inflated_sample(d_hat: &SubsetSpec, mu: f64, base: &SampleSet) -> Result<(SubsetSpec, SampleSet)> {
    let d_mu = inflate(d_hat, mu)?;
    let grid = draw(
        &d_mu,
        mu.min(d_mu.margin()),
        SampleStrategy::Grid,
        base.points.len().max(1),
        0,
        base.seed,
    )?;
    let mut points = grid.points.clone();
    points.extend(base.points.iter().cloned());
    Ok((d_mu.clone(), SampleSet { points, ..grid }))
}

/// Measures `ℓ = sup_{D_μ} ‖Id − φ'‖` and checks every refined pair quotient
/// of `φ − Id` against it.
pub fn verify_lemma_derivative(phi: &SelfMap, d_hat: &SubsetSpec, mu: f64, sample: &SampleSet, tolerance: f64) -> Result<InequalityReport> {
    if !(mu > 0.0) {
        return Err(Error::BadParameter(format!("μ = {mu} must be positive")));
    }
    if mu >= d_hat.margin() {
        return Err(Error::MarginViolation {
            required: mu,
            available: d_hat.margin(),
        });
    }
    crate::moduli::check_local_contract(d_hat, mu, sample)?;
    let (d_mu, dmu_sample) = inflated_sample(d_hat, mu, sample)?;
    let modulus = map_derivative_modulus(phi, &d_mu, &dmu_sample, DEFAULT_FD_STEP)?;
    let ell = modulus.values[0];
    let g = phi.minus_identity();
    let apply = |x: &[f64]| g.apply(x);
    let refined = refined_pairs(&apply, d_hat.norm(), sample, &|x| d_hat.contains(x), &Refinement::default())?;
    let checks = refined
        .into_iter()
        .map(|v| PointCheck {
            partner: Some(v.x_tilde),
            ..PointCheck::new(v.x, v.q, ell)
        })
        .collect();
    InequalityReport::assemble(
        Statement::LemmaDerivative,
        format!("Lip_(D,mu)(φ − Id) ≤ sup_(D_mu) ‖Id − φ'‖, {SAMPLED_ELL}"),
        checks,
        tolerance,
        Some((ell, modulus.estimator_kind)),
        json!({
            "map": phi.name(),
            "mu": mu,
            "ell": ell,
            "finite_difference_step": modulus.finite_difference_step,
            "d_hat": d_hat,
            "d_mu": d_mu,
            "sample": sample.descriptor(),
        }),
    )
}

/// Checks `sup_{D1} ‖f_t − f_{t0}‖ ≤ (L + 1) ε_t` per grid time, where
/// `ε_t = max(sup_{D2} ‖f_t' − f_{t0}'‖, ‖f_t(x1) − f_{t0}(x1)‖)` and `x1` is
/// the first sample point.
pub fn verify_transfer_estimate(
    f_family: &SemigroupFamily,
    d1: &SubsetSpec,
    certificate: &PathLengthOutcome,
    t0: f64,
    t_grid: &[f64],
    sample: &SampleSet,
    tolerance: f64,
) -> Result<InequalityReport> {
    let cert = match certificate {
        PathLengthOutcome::Certificate(c) => c,
        PathLengthOutcome::Refutation { .. } => {
            return Err(Error::Unsupported(
                "the domain has no finite path-length certificate for this subset".into(),
            ));
        }
    };
    if t_grid.is_empty() {
        return Err(Error::BadParameter("time grid is empty".into()));
    }
    require_in(d1, sample)?;
    if let Some(p) = sample.points.iter().find(|p| !cert.d2.contains(p)) {
        return Err(Error::ContractViolation(format!("sample point {p:?} of D1 is not in D2")));
    }
    let norm = d1.norm();
    let n = f_family.dim();
    let d2_grid = draw(
        &cert.d2,
        sample.mu.min(cert.d2.margin()),
        SampleStrategy::Grid,
        sample.points.len(),
        0,
        sample.seed,
    )?;
    let d2_sample = SampleSet {
        points: d2_grid.points.iter().chain(&sample.points).cloned().collect(),
        ..d2_grid
    };
    let step0 = 0.25 * d2_sample.mu;
    let x1 = &sample.points[0];
    let base: Vec<Vec<f64>> = sample.points.par_iter().map(|x| f_family.eval(t0, x)).collect::<Result<_>>()?;
    let derivative = |t: f64, x: &[f64]| frechet_derivative(f_family, t, x, DEFAULT_FD_STEP).map(|d| d.matrix);
    let mut checks = Vec::new();
    let mut eps_per_t = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let diff = |x: &[f64]| -> Result<f64> { Ok(norm.operator_norm(&(derivative(t, x)? - derivative(t0, x)?))) };
        let sup_d = d2_sample
            .points
            .par_iter()
            .map(|x| local_sup(&diff, x, &cert.d2, step0).map(|r| r.0))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let anchor = norm.dist_slices(&f_family.eval(t, x1)?, &base[0]);
        let eps = sup_d.max(anchor);
        eps_per_t.push(eps);
        let rhs = (cert.l_bound + 1.0) * eps;
        let at_t: Vec<PointCheck> = sample
            .points
            .par_iter()
            .zip(&base)
            .map(|(x, b)| {
                let lhs = norm.dist_slices(&f_family.eval(t, x)?, b);
                Ok(PointCheck {
                    t: Some(t),
                    ..PointCheck::new(x.clone(), lhs, rhs)
                })
            })
            .collect::<Result<_>>()?;
        checks.extend(at_t);
    }
    debug_assert!(checks.iter().all(|c| c.point.len() == n));
    InequalityReport::assemble(
        Statement::TransferEstimate,
        format!("sup_(D1) ‖f_t − f_t0‖ ≤ (L + 1) ε_t, {SAMPLED_ELL}"),
        checks,
        tolerance,
        None,
        json!({
            "family": f_family.info(),
            "t0": t0,
            "t_grid": t_grid,
            "epsilon": eps_per_t,
            "l_bound": cert.l_bound,
            "anchor": x1,
            "d1": d1,
            "d2": cert.d2,
            "sample": sample.descriptor(),
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{sample, DomainSpec, PathCertificate, SubsetShape};
    use crate::expr::Expr;
    use crate::semigroup::linear_family;
    use crate::{Norm, Operator};
    use std::sync::Arc;

    fn setup(lo: f64, hi: f64, d_lo: f64, d_hi: f64, mu: f64, pairs: usize) -> (DomainSpec, SubsetSpec, SampleSet) {
        let d = DomainSpec::interval(lo, hi).unwrap();
        let s = SubsetSpec::new(d.clone(), SubsetShape::interval(d_lo, d_hi)).unwrap();
        let smp = sample(&s, mu, SampleStrategy::Grid, 11, pairs, 3).unwrap();
        (d, s, smp)
    }

    #[test]
    fn iterates_scaling_example() {
        let (d, s, _) = setup(-2.0, 2.0, -1.0, 1.0, 0.5, 0);
        let only_one = SampleSet::from_points(s.clone(), vec![vec![1.0]], 0.5);
        let r = verify_lemma_iterates(&SelfMap::scaling(d, 0.9), &s, 0.5, 3, &only_one, 1e-9).unwrap();
        // ℓ = max_k |0.9^k − 1| = 0.271
        assert!((r.ell.unwrap() - 0.271).abs() < 1e-12);
        assert!((r.per_point[0].lhs - 0.029).abs() < 1e-12);
        assert!((r.per_point[0].rhs - 0.0542).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn iterates_trivial_cases() {
        let (d, s, smp) = setup(-2.0, 2.0, -1.0, 1.0, 0.5, 20);
        let r = verify_lemma_iterates(&SelfMap::translation(d.clone(), vec![0.2]), &s, 0.5, 4, &smp, 1e-9).unwrap();
        assert!(r.pass);
        assert!(r.per_point.iter().all(|c| c.lhs < 1e-15 && c.rhs < 1e-12));
        let phi = SelfMap::from_exprs(d, vec![Expr::parse("x - 0.1*sin(3*x)").unwrap()]).unwrap();
        let r = verify_lemma_iterates(&phi, &s, 0.5, 1, &smp, 1e-9).unwrap();
        assert!(r.per_point.iter().all(|c| c.lhs == 0.0 && c.rhs == 0.0));
    }

    #[test]
    fn displacement_violation_is_a_hypothesis_error() {
        let (d, s, smp) = setup(-2.0, 2.0, -1.0, 1.0, 0.5, 5);
        let err = verify_lemma_iterates(&SelfMap::translation(d, vec![0.6]), &s, 0.5, 2, &smp, 1e-9).unwrap_err();
        assert!(matches!(
            err,
            Error::HypothesisNotMet {
                hypothesis: Hypothesis::Displacement,
                ..
            }
        ));
    }

    #[test]
    fn supplied_bound_below_measurement_is_rejected() {
        let (d, s, smp) = setup(-2.0, 2.0, -1.0, 1.0, 0.5, 5);
        let err = verify_lemma_iterates_with(&SelfMap::scaling(d, 0.9), &s, 0.5, 3, &smp, 1e-9, Some(0.2)).unwrap_err();
        assert!(matches!(
            err,
            Error::HypothesisNotMet {
                hypothesis: Hypothesis::LipschitzBound,
                ..
            }
        ));
    }

    #[test]
    fn corollary_linear_example() {
        let (d, s, _) = setup(-2.0, 2.0, -1.0, 1.0, 0.5, 0);
        let fam = linear_family(Operator::from_element(1, 1, -1.0), d).unwrap();
        let one = SampleSet::from_points(s.clone(), vec![vec![1.0]], 0.5);
        let r = verify_corollary_quotients(&fam, 0.1, 3, &s, 0.5, &one, 1e-9).unwrap();
        let e = |t: f64| (-t).exp();
        let lhs = ((e(0.3) - 1.0) / 0.3 - (e(0.1) - 1.0) / 0.1).abs();
        let rhs = 2.0 / 3.0 * (1.0 - e(0.3)) * (1.0 - e(0.1)) / 0.1;
        assert!((r.per_point[0].lhs - lhs).abs() < 1e-12);
        assert!((r.per_point[0].rhs - rhs).abs() < 1e-12);
        assert!((lhs - 0.087687).abs() < 1e-6);
        assert!(r.pass);
        let r1 = verify_corollary_quotients(&fam, 0.1, 1, &s, 0.5, &one, 1e-9).unwrap();
        assert_eq!((r1.per_point[0].lhs, r1.per_point[0].rhs), (0.0, 0.0));
    }

    #[test]
    fn corollary_quotient_size_hypothesis() {
        let (d, s, smp) = setup(-2.0, 2.0, -1.0, 1.0, 0.05, 0);
        let fam = linear_family(Operator::from_element(1, 1, -1.0), d).unwrap();
        let err = verify_corollary_quotients(&fam, 0.1, 3, &s, 0.05, &smp, 1e-9).unwrap_err();
        assert!(matches!(
            err,
            Error::HypothesisNotMet {
                hypothesis: Hypothesis::QuotientSize,
                ..
            }
        ));
    }

    #[test]
    fn derivative_lemma_sine() {
        let (d, s, smp) = setup(-2.0, 2.0, -0.5, 0.5, 0.3, 200);
        let phi = SelfMap::from_exprs(d.clone(), vec![Expr::parse("x + 0.1*sin(x)").unwrap()]).unwrap();
        let r = verify_lemma_derivative(&phi, &s, 0.3, &smp, 1e-9).unwrap();
        assert!((r.ell.unwrap() - 0.1).abs() < 1e-12);
        assert!(r.pass);
        let worst = r.per_point.iter().map(|c| c.lhs).fold(0.0, f64::max);
        assert!(worst > 0.099 && worst <= 0.1 + 1e-12);
        let lin = SelfMap::scaling(d, 0.7);
        let r = verify_lemma_derivative(&lin, &s, 0.3, &smp, 1e-9).unwrap();
        assert!((r.ell.unwrap() - 0.3).abs() < 1e-15);
        assert!(r.per_point.iter().all(|c| (c.lhs - 0.3).abs() < 1e-12));
    }

    #[test]
    fn derivative_lemma_is_local() {
        // derivative blows up at ±1 but stays bounded on D_μ = (−0.8, 0.8)
        let (d, s, smp) = setup(-1.0, 1.0, -0.5, 0.5, 0.3, 100);
        let phi = SelfMap::from_exprs(d, vec![Expr::parse("x + 0.01*sqrt(1 - x^2)").unwrap()]).unwrap();
        let r = verify_lemma_derivative(&phi, &s, 0.3, &smp, 1e-9).unwrap();
        let oracle = 0.01 * 0.8 / (1.0f64 - 0.64).sqrt();
        assert!(r.ell.unwrap() <= oracle + 1e-12 && r.ell.unwrap() > 0.9 * oracle);
        assert!(r.pass);
    }

    #[test]
    fn transfer_on_smooth_perturbation() {
        let d = DomainSpec::ball(Norm::Euclidean, vec![0.0, 0.0], 1.0).unwrap();
        let d1 = SubsetSpec::new(
            d.clone(),
            SubsetShape::Ball {
                center: vec![0.0, 0.0],
                radius: 0.5,
                open: false,
            },
        )
        .unwrap();
        let d2 = SubsetSpec::new(
            d.clone(),
            SubsetShape::Ball {
                center: vec![0.0, 0.0],
                radius: 0.7,
                open: false,
            },
        )
        .unwrap();
        // f_t(x) = x + t g(x) with g = (sin x2, x1 x2)
        let fam = SemigroupFamily::new(
            "x + t g",
            crate::semigroup::FamilyKind::ClosedForm,
            d,
            Arc::new(|t, x: &[f64]| Ok(vec![x[0] + t * x[1].sin(), x[1] + t * x[0] * x[1]])),
        )
        .into_vector_valued();
        let smp = sample(&d1, 0.1, SampleStrategy::Grid, 49, 0, 1).unwrap();
        let cert = PathLengthOutcome::Certificate(PathCertificate { d2, l_bound: 1.4 });
        let r = verify_transfer_estimate(&fam, &d1, &cert, 0.1, &[0.1, 0.12, 0.2, 0.5], &smp, 1e-9).unwrap();
        assert!(r.pass, "min margin {}", r.min_margin);
        assert!(r
            .per_point
            .iter()
            .filter(|c| c.t == Some(0.1))
            .all(|c| c.lhs == 0.0 && c.rhs == 0.0));
        let refuted = PathLengthOutcome::Refutation { rows: vec![] };
        assert!(matches!(
            verify_transfer_estimate(&fam, &d1, &refuted, 0.1, &[0.2], &smp, 1e-9),
            Err(Error::Unsupported(_))
        ));
    }
}
