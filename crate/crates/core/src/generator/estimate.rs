//! Generator extraction as the limit of difference quotients, with the
//! constants `δ₁`, `L = 2μ/((1 − μ)δ₁)` and the gap bound `6εL`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lemmas::inflated_sample;
use crate::domain::{SampleDescriptor, SampleSet, SubsetSpec};
use crate::error::{Error, Result};
use crate::moduli::{refined_pairs, EstimatorKind, ModulusReport, Refinement, Witness};
use crate::semigroup::{FamilyInfo, SemigroupFamily, VectorField};

/// Default smallest time of a Cauchy-net schedule.
pub const SCHEDULE_FLOOR: f64 = 1e-7;

/// `t_k = t_max · 2^{-k}` for every `t_k ≥ floor`.
pub fn schedule(t_max: f64, floor: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = t_max;
    while t >= floor && t > 0.0 {
        out.push(t);
        t *= 0.5;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    /// The `ε` of the gap bound `6εL`; must satisfy `0 < ε < μ`.
    pub epsilon: f64,
    /// Optional absolute ceiling on the final gaps.
    pub gap_floor: Option<f64>,
    /// Number of trailing gaps that must meet the bound.
    pub consecutive: usize,
    pub refinement: Refinement,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            epsilon: 1e-3,
            gap_floor: None,
            consecutive: 3,
            refinement: Refinement::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub mu: f64,
    pub delta1: f64,
    pub epsilon: f64,
    pub l: f64,
    /// `6 ε L`.
    pub bound: f64,
}

impl Certificate {
    pub fn new(mu: f64, delta1: f64, epsilon: f64) -> Self {
        let l = 2.0 * mu / ((1.0 - mu) * delta1);
        Certificate {
            mu,
            delta1,
            epsilon,
            l,
            bound: 6.0 * epsilon * l,
        }
    }
}

/// Both `δ₁` conditions at one grid time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delta1Check {
    pub t: f64,
    /// `sup_{D_μ} ‖F_t(x) − x‖` (infinite when a trajectory escaped).
    pub displacement: f64,
    /// Sampled `Lip_{D̂,μ}(F_t − Id)`.
    pub lipschitz: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorEstimate {
    pub family: FamilyInfo,
    pub points: Vec<Vec<f64>>,
    /// `f` at each sample point: the quotient at the last schedule time.
    pub f_values: Vec<Vec<f64>>,
    /// Schedule times actually marched, all below `δ₁/2`.
    pub t_schedule: Vec<f64>,
    /// `max_x ‖f_{t_k}(x) − f_{t_{k+1}}(x)‖` for consecutive marched times.
    pub gaps: Vec<f64>,
    /// The last gap.
    pub cauchy_gap: f64,
    pub certificate: Certificate,
    pub converged: bool,
    /// `max_x ‖f(x)‖` over the sample.
    pub sup_f: f64,
    pub gap_floor: Option<f64>,
    pub delta1_checks: Vec<Delta1Check>,
    pub sample: SampleDescriptor,
}

impl GeneratorEstimate {
    /// Re-derives the certificate claims from the stored fields.
    pub fn certificate_holds(&self) -> bool {
        let c = &self.certificate;
        let l = 2.0 * c.mu / ((1.0 - c.mu) * c.delta1);
        let consistent = (l - c.l).abs() <= 1e-12 * l && (c.bound - 6.0 * c.epsilon * c.l).abs() <= 1e-12 * c.bound;
        consistent && (!self.converged || (self.cauchy_gap <= c.bound && self.sup_f <= c.l))
    }

    /// CSV with columns `x1.., f1..`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let n = self.points.first().map_or(0, Vec::len);
        let mut wtr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        header.extend((1..=n).map(|i| format!("f{i}")));
        wtr.write_record(&header)?;
        for (x, f) in self.points.iter().zip(&self.f_values) {
            wtr.write_record(x.iter().chain(f).map(|v| format!("{v:e}")))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn check_schedule(t_schedule: &[f64]) -> Result<()> {
    if t_schedule.len() < 2 {
        return Err(Error::BadParameter("schedule needs at least two times".into()));
    }
    if t_schedule.iter().any(|t| !(*t > 0.0) || !t.is_finite()) || t_schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::BadParameter("schedule must be positive and strictly decreasing".into()));
    }
    Ok(())
}

fn delta1_check(
    family: &SemigroupFamily,
    t: f64,
    d_hat: &SubsetSpec,
    mu: f64,
    d_mu: &SampleSet,
    pairs: &SampleSet,
    r: &Refinement,
) -> Result<Delta1Check> {
    let norm = d_hat.norm();
    let escaped = |e: &Error| matches!(e, Error::TrajectoryEscape(_));
    let mut displacement: f64 = 0.0;
    for x in &d_mu.points {
        match family.eval(t, x) {
            Ok(y) => displacement = displacement.max(norm.dist_slices(&y, x)),
            Err(e) if escaped(&e) => {
                return Ok(Delta1Check {
                    t,
                    displacement: f64::INFINITY,
                    lipschitz: f64::INFINITY,
                    ok: false,
                });
            }
            Err(e) => return Err(e),
        }
    }
    let g = |x: &[f64]| -> Result<Vec<f64>> { Ok(family.eval(t, x)?.iter().zip(x).map(|(a, b)| a - b).collect()) };
    let lipschitz = match refined_pairs(&g, norm, pairs, &|x| d_hat.contains(x), r) {
        Ok(v) => v.into_iter().map(|p| p.q).fold(0.0, f64::max),
        Err(e) if escaped(&e) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    Ok(Delta1Check {
        t,
        displacement,
        lipschitz,
        ok: displacement < mu && lipschitz < mu,
    })
}

/// [`estimate_generator_with`] using the default configuration and the
/// given `ε`.
pub fn estimate_generator(
    family: &SemigroupFamily,
    d_hat: &SubsetSpec,
    mu: f64,
    epsilon: f64,
    t_schedule: &[f64],
    sample: &SampleSet,
) -> Result<GeneratorEstimate> {
    estimate_generator_with(
        family,
        d_hat,
        mu,
        t_schedule,
        sample,
        &GeneratorConfig {
            epsilon,
            ..Default::default()
        },
    )
}

/// Measures `δ₁` as the largest schedule time below which both
/// `sup_{D_μ} ‖F_t − Id‖ < μ` and `Lip_{D̂,μ}(F_t − Id) < μ` hold at every
/// schedule time, sets `L = 2μ/((1 − μ)δ₁)`, then marches the difference
/// quotients over the schedule times below `δ₁/2`.
pub fn estimate_generator_with(
    family: &SemigroupFamily,
    d_hat: &SubsetSpec,
    mu: f64,
    t_schedule: &[f64],
    sample: &SampleSet,
    cfg: &GeneratorConfig,
) -> Result<GeneratorEstimate> {
    check_schedule(t_schedule)?;
    if !(mu > 0.0) || mu >= 1.0 || mu >= d_hat.margin() {
        return Err(Error::BadParameter(format!(
            "μ = {mu} must lie in (0, min(1, {:e}))",
            d_hat.margin()
        )));
    }
    if !(cfg.epsilon > 0.0) || cfg.epsilon >= mu {
        return Err(Error::BadParameter(format!("ε = {} must lie in (0, μ)", cfg.epsilon)));
    }
    if cfg.consecutive == 0 {
        return Err(Error::BadParameter("consecutive must be at least 1".into()));
    }
    if sample.points.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(p) = sample.points.iter().find(|p| !d_hat.contains(p)) {
        return Err(Error::ContractViolation(format!("sample point {p:?} is not in D̂")));
    }
    crate::moduli::check_local_contract(d_hat, mu, sample)?;
    let (_, d_mu) = inflated_sample(d_hat, mu, sample)?;

    let checks: Vec<Delta1Check> = t_schedule
        .par_iter()
        .map(|&t| delta1_check(family, t, d_hat, mu, &d_mu, sample, &cfg.refinement))
        .collect::<Result<_>>()?;
    // schedule is decreasing: walk up from the smallest time while both hold
    let delta1 = checks.iter().rev().take_while(|c| c.ok).last().map(|c| c.t).ok_or_else(|| {
        let c = checks.last().expect("schedule is nonempty");
        Error::NoDelta1(format!(
            "at t = {:e}: sup ‖F_t − Id‖ = {:e}, Lip(F_t − Id) = {:e}, μ = {mu:e}",
            c.t, c.displacement, c.lipschitz
        ))
    })?;
    let certificate = Certificate::new(mu, delta1, cfg.epsilon);

    let marched: Vec<f64> = t_schedule.iter().copied().filter(|&t| t < 0.5 * delta1).collect();
    if marched.len() < 2 {
        return Err(Error::NoDelta1(format!(
            "δ₁ = {delta1:e} leaves fewer than two schedule times below δ₁/2"
        )));
    }
    let quotients: Vec<Vec<Vec<f64>>> = marched
        .par_iter()
        .map(|&t| {
            sample
                .points
                .iter()
                .map(|x| Ok(family.eval(t, x)?.iter().zip(x).map(|(a, b)| (a - b) / t).collect()))
                .collect::<Result<Vec<Vec<f64>>>>()
        })
        .collect::<Result<_>>()?;
    let norm = d_hat.norm();
    let gaps: Vec<f64> = quotients
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| norm.dist_slices(a, b)).fold(0.0, f64::max))
        .collect();
    let f_values = quotients.last().expect("at least two marched times").clone();
    let sup_f = f_values.iter().map(|f| norm.norm_slice(f)).fold(0.0, f64::max);
    let threshold = cfg.gap_floor.map_or(certificate.bound, |f| f.min(certificate.bound));
    let cauchy_gap = *gaps.last().expect("at least one gap");
    let tail_ok = gaps.len() >= cfg.consecutive && gaps[gaps.len() - cfg.consecutive..].iter().all(|g| *g <= threshold);
    let converged = tail_ok && sup_f <= certificate.l;
    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    if !tail_ok && cauchy_gap > threshold && cauchy_gap > 2.0 * min_gap {
        return Err(Error::Diverging {
            t: *marched.last().expect("nonempty"),
            gap: cauchy_gap,
        });
    }
    Ok(GeneratorEstimate {
        family: family.info().clone(),
        points: sample.points.clone(),
        f_values,
        t_schedule: marched,
        gaps,
        cauchy_gap,
        certificate,
        converged,
        sup_f,
        gap_floor: cfg.gap_floor,
        delta1_checks: checks,
        sample: sample.descriptor(),
    })
}

/// Per `t`: `‖(F_{t+h}(x) − F_{t−h}(x))/(2h) − f(F_t(x))‖` with `h = step`,
/// after checking `F_0(x) = x`.
pub fn cauchy_problem_residual(family: &SemigroupFamily, f: &VectorField, x: &[f64], t_grid: &[f64], step: f64) -> Result<ModulusReport> {
    if !(step > 0.0) {
        return Err(Error::BadParameter(format!("step = {step} must be positive")));
    }
    if t_grid.is_empty() {
        return Err(Error::BadParameter("time grid is empty".into()));
    }
    if let Some(t) = t_grid.iter().find(|t| !(**t >= step) || !t.is_finite()) {
        return Err(Error::BadParameter(format!("grid time {t} must be at least the step {step}")));
    }
    let norm = family.domain().norm;
    let u0 = family.eval(0.0, x)?;
    let gap = norm.dist_slices(&u0, x);
    if gap > 1e-12 * norm.norm_slice(x).max(1.0) {
        return Err(Error::ContractViolation(format!("F_0(x) differs from x by {gap:e}")));
    }
    let per_t: Vec<(f64, Witness)> = t_grid
        .par_iter()
        .map(|&t| {
            let up = family.eval(t + step, x)?;
            let um = family.eval(t - step, x)?;
            let u = family.eval(t, x)?;
            let fu = f.eval(&u);
            let d: Vec<f64> = up.iter().zip(&um).zip(&fu).map(|((a, b), c)| (a - b) / (2.0 * step) - c).collect();
            Ok((norm.norm_slice(&d), Witness::Point { x: u }))
        })
        .collect::<Result<_>>()?;
    let (values, witnesses) = per_t.into_iter().unzip();
    Ok(ModulusReport {
        quantity: format!("Cauchy residual of {} against {}", family.name(), f.name),
        t_grid: t_grid.to_vec(),
        values,
        witnesses,
        estimator_kind: EstimatorKind::FiniteDifferenceEstimate,
        sample: None,
        finite_difference_step: Some(step),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{sample, DomainSpec, SampleStrategy, SubsetShape};
    use crate::semigroup::{cubic_family, example31_family, linear_family};
    use crate::Operator;

    fn neg_identity() -> (SemigroupFamily, SubsetSpec) {
        let d = DomainSpec::interval(-1.0, 1.0).unwrap();
        let s = SubsetSpec::new(d.clone(), SubsetShape::interval(-0.5, 0.5)).unwrap();
        (linear_family(Operator::from_element(1, 1, -1.0), d).unwrap(), s)
    }

    #[test]
    fn schedule_halves_to_floor() {
        let s = schedule(0.1, 1e-3);
        assert_eq!(s.len(), 7);
        assert_eq!(s[6], 0.1 / 64.0);
        assert!(schedule(0.1, 0.2).is_empty());
    }

    #[test]
    fn linear_generator_is_recovered() {
        let (fam, s) = neg_identity();
        let smp = sample(&s, 0.2, SampleStrategy::Grid, 11, 50, 0).unwrap();
        let est = estimate_generator(&fam, &s, 0.2, 1e-3, &schedule(0.5, SCHEDULE_FLOOR), &smp).unwrap();
        assert!(est.converged);
        assert!(est.certificate_holds());
        for (x, f) in est.points.iter().zip(&est.f_values) {
            assert!((f[0] + x[0]).abs() < 1e-6);
        }
        // F_t − Id = (e^{−t} − 1) Id has modulus 1 − e^{−t} < 0.2 iff t < −ln 0.8
        let c = est.certificate;
        assert!(c.delta1 < -(0.8f64).ln() && 2.0 * c.delta1 > -(0.8f64).ln());
        assert!((c.l - 0.4 / (0.8 * c.delta1)).abs() < 1e-12);
    }

    #[test]
    fn corner_family_has_no_delta1() {
        let d = example31_family().domain().clone();
        let s = SubsetSpec::new(d, SubsetShape::interval(0.4, 0.6)).unwrap();
        let smp = sample(&s, 0.1, SampleStrategy::Grid, 21, 100, 0).unwrap();
        let r = estimate_generator(&example31_family(), &s, 0.1, 0.01, &schedule(0.1, 1e-4), &smp);
        assert!(matches!(r, Err(Error::NoDelta1(_)) | Err(Error::Diverging { .. })), "{r:?}");
    }

    #[test]
    fn bad_parameters() {
        let (fam, s) = neg_identity();
        let smp = sample(&s, 0.2, SampleStrategy::Grid, 5, 5, 0).unwrap();
        let sch = schedule(0.5, 1e-3);
        assert!(estimate_generator(&fam, &s, 0.2, 0.3, &sch, &smp).is_err());
        assert!(estimate_generator(&fam, &s, 0.2, 0.01, &[0.1, 0.2], &smp).is_err());
    }

    #[test]
    fn cauchy_residuals() {
        let (fam, _) = neg_identity();
        let field = VectorField::linear(fam.domain().clone(), Operator::from_element(1, 1, -1.0)).unwrap();
        let r = cauchy_problem_residual(&fam, &field, &[0.5], &[0.1, 0.5, 1.0], 1e-3).unwrap();
        // central difference of e^{−t}x: relative error step²/6
        assert!(r.max() < 0.5 * 1e-6 / 6.0 * 1.01);
        let wrong = VectorField::linear(fam.domain().clone(), Operator::from_element(1, 1, -2.0)).unwrap();
        let r = cauchy_problem_residual(&fam, &wrong, &[0.5], &[0.1, 0.5], 1e-3).unwrap();
        for (t, v) in r.t_grid.iter().zip(&r.values) {
            assert!((v - 0.5 * (-t).exp()).abs() < 1e-6);
        }
        let cubic = cubic_family();
        let field = VectorField::neg_cube(cubic.domain().clone());
        let coarse = cauchy_problem_residual(&cubic, &field, &[0.8], &[0.2], 1e-2).unwrap().max();
        let fine = cauchy_problem_residual(&cubic, &field, &[0.8], &[0.2], 1e-3).unwrap().max();
        assert!(((coarse / fine).log10() - 2.0).abs() < 0.1);
        assert!(cauchy_problem_residual(&cubic, &field, &[0.8], &[1e-4], 1e-3).is_err());
    }
}
