//! Sampled estimators for Lipschitz seminorms, T-continuity and T-Lipschitz
//! moduli, and the derivative modulus `sup ‖Id − φ'(x)‖`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{SampleDescriptor, SampleSet, SubsetSpec};
use crate::error::{Error, Result};
use crate::norm::Norm;
use crate::semigroup::{SelfMap, SemigroupFamily};
use crate::Operator;

/// Number of points in the default geometric time grid.
pub const DEFAULT_GRID_POINTS: usize = 20;

/// Default central-difference step when no analytic derivative exists.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// A sup over a finite sample: never above the true supremum.
    SampledLowerBound,
    /// Built from analytic derivatives; by the mean-value bound an upper
    /// bound for the Lipschitz quantity it controls.
    DerivativeCertifiedUpperBound,
    /// Built from central differences; neither bound is guaranteed.
    FiniteDifferenceEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Point { x: Vec<f64> },
    Pair { x: Vec<f64>, x_tilde: Vec<f64> },
}

impl Witness {
    fn coords(&self, dim: usize) -> Vec<String> {
        let blank = || vec![String::new(); dim];
        let fmt = |v: &[f64]| v.iter().map(|c| format!("{c:e}")).collect::<Vec<_>>();
        match self {
            Witness::Point { x } => [fmt(x), blank()].concat(),
            Witness::Pair { x, x_tilde } => [fmt(x), fmt(x_tilde)].concat(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Witness::Point { x } | Witness::Pair { x, .. } => x.len(),
        }
    }
}

/// One value per time (or a single value with an empty grid for a fixed map),
/// each with the worst-case point or pair found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub quantity: String,
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub witnesses: Vec<Witness>,
    pub estimator_kind: EstimatorKind,
    pub sample: Option<SampleDescriptor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finite_difference_step: Option<f64>,
}

impl ModulusReport {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// CSV with columns `t, value, w_x1.., w_xt1..`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let dim = self.witnesses.first().map_or(0, Witness::dim);
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string(), "value".to_string()];
        header.extend((1..=dim).map(|i| format!("w_x{i}")));
        header.extend((1..=dim).map(|i| format!("w_xt{i}")));
        wtr.write_record(&header)?;
        for (i, (v, wit)) in self.values.iter().zip(&self.witnesses).enumerate() {
            let t = self.t_grid.get(i).map_or(String::new(), |t| format!("{t:e}"));
            let mut row = vec![t, format!("{v:e}")];
            row.extend(wit.coords(dim));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `t_k = t_max · 2^{−k}`, `k = 0, …, n − 1`.
pub fn geometric_grid(t_max: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| t_max * 0.5f64.powi(k as i32)).collect()
}

pub fn default_t_grid(t_max: f64) -> Vec<f64> {
    geometric_grid(t_max, DEFAULT_GRID_POINTS)
}

/// Pair refinement: each sampled pair is bisected greedily, keeping the half
/// with the larger quotient, which by the triangle inequality never lowers
/// the value. Stops after `patience` halvings without relative gain above
/// `rel_gain`, or below `min_separation · max(1, ‖x‖)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Refinement {
    pub patience: usize,
    pub min_separation: f64,
    pub rel_gain: f64,
    pub max_depth: usize,
}

impl Default for Refinement {
    fn default() -> Self {
        Refinement {
            patience: 3,
            min_separation: 1e-6,
            rel_gain: 1e-9,
            max_depth: 64,
        }
    }
}

impl Refinement {
    pub fn none() -> Self {
        Refinement {
            max_depth: 0,
            ..Default::default()
        }
    }
}

pub(crate) type VecMap<'a> = dyn Fn(&[f64]) -> Result<Vec<f64>> + Sync + 'a;

pub(crate) struct PairValue {
    pub q: f64,
    pub x: Vec<f64>,
    pub x_tilde: Vec<f64>,
}

fn quotient(norm: Norm, gx: &[f64], gy: &[f64], x: &[f64], y: &[f64]) -> f64 {
    norm.dist_slices(gx, gy) / norm.dist_slices(x, y)
}

fn refine_pair(
    g: &VecMap,
    norm: Norm,
    x: &[f64],
    xt: &[f64],
    base_ok: &(dyn Fn(&[f64]) -> bool + Sync),
    r: &Refinement,
) -> Result<PairValue> {
    let (mut a, mut b) = (x.to_vec(), xt.to_vec());
    let (mut ga, mut gb) = (g(&a)?, g(&b)?);
    let mut best = PairValue {
        q: quotient(norm, &ga, &gb, &a, &b),
        x: a.clone(),
        x_tilde: b.clone(),
    };
    let floor = r.min_separation * norm.norm_slice(x).max(1.0);
    let mut stall = 0;
    for _ in 0..r.max_depth {
        if norm.dist_slices(&a, &b) < 2.0 * floor || stall >= r.patience {
            break;
        }
        let m: Vec<f64> = a.iter().zip(&b).map(|(u, v)| 0.5 * (u + v)).collect();
        if m == a || m == b {
            break;
        }
        let gm = g(&m)?;
        let m_ok = base_ok(&m);
        // a half is admissible when one of its endpoints lies in the base set
        let q_left = if m_ok || base_ok(&a) {
            quotient(norm, &ga, &gm, &a, &m)
        } else {
            f64::NEG_INFINITY
        };
        let q_right = if m_ok || base_ok(&b) {
            quotient(norm, &gm, &gb, &m, &b)
        } else {
            f64::NEG_INFINITY
        };
        let q = q_left.max(q_right);
        if q == f64::NEG_INFINITY {
            break;
        }
        if q_left >= q_right {
            b = m;
            gb = gm;
        } else {
            a = m;
            ga = gm;
        }
        // gains below the rounding level of the quotient are not progress
        let sep = norm.dist_slices(&a, &b);
        let scale = norm.norm_slice(&a) + norm.norm_slice(&b) + norm.norm_slice(&ga) + norm.norm_slice(&gb);
        let noise = 4.0 * f64::EPSILON * scale / sep;
        if q > best.q * (1.0 + r.rel_gain) + noise {
            stall = 0;
        } else {
            stall += 1;
        }
        // rounding-level gains are not adopted either, so the reported value
        // never exceeds the true quotient by more than the noise of its pair
        if q > best.q + noise {
            best = PairValue {
                q,
                x: a.clone(),
                x_tilde: b.clone(),
            };
        }
    }
    if !base_ok(&best.x) {
        std::mem::swap(&mut best.x, &mut best.x_tilde);
    }
    Ok(best)
}

/// Refined quotient of every pair, in sample order.
pub(crate) fn refined_pairs(
    g: &VecMap,
    norm: Norm,
    pairs: &SampleSet,
    base_ok: &(dyn Fn(&[f64]) -> bool + Sync),
    r: &Refinement,
) -> Result<Vec<PairValue>> {
    pairs
        .pairs
        .par_iter()
        .map(|p| refine_pair(g, norm, &p.x, &p.x_tilde, base_ok, r))
        .collect()
}

fn sup_over_pairs(
    g: &VecMap,
    norm: Norm,
    pairs: &SampleSet,
    base_ok: &(dyn Fn(&[f64]) -> bool + Sync),
    r: &Refinement,
) -> Result<(f64, Witness)> {
    let best = refined_pairs(g, norm, pairs, base_ok, r)?
        .into_iter()
        .fold(None::<PairValue>, |acc, v| match acc {
            Some(a) if a.q >= v.q => Some(a),
            _ => Some(v),
        })
        .ok_or(Error::EmptySample)?;
    Ok((
        best.q,
        Witness::Pair {
            x: best.x,
            x_tilde: best.x_tilde,
        },
    ))
}

fn check_nondegenerate(pairs: &SampleSet) -> Result<()> {
    if pairs.pairs.is_empty() {
        return Err(Error::EmptySample);
    }
    let norm = pairs.norm();
    for (i, p) in pairs.pairs.iter().enumerate() {
        if norm.dist_slices(&p.x, &p.x_tilde) == 0.0 {
            return Err(Error::DegeneratePair { index: i });
        }
    }
    Ok(())
}

fn single(quantity: String, value: f64, witness: Witness, kind: EstimatorKind, sample: &SampleSet) -> ModulusReport {
    ModulusReport {
        quantity,
        t_grid: Vec::new(),
        values: vec![value],
        witnesses: vec![witness],
        estimator_kind: kind,
        sample: Some(sample.descriptor()),
        finite_difference_step: None,
    }
}

/// `max ‖F(x) − F(x̃)‖ / ‖x − x̃‖` over the (refined) pairs: a lower bound
/// for the Lipschitz seminorm of `F` on its domain.
pub fn lip_seminorm(f: &SelfMap, pairs: &SampleSet) -> Result<ModulusReport> {
    lip_seminorm_with(f, pairs, &Refinement::default())
}

pub fn lip_seminorm_with(f: &SelfMap, pairs: &SampleSet, r: &Refinement) -> Result<ModulusReport> {
    check_nondegenerate(pairs)?;
    let domain = f.domain().clone();
    let g = |x: &[f64]| f.apply(x);
    let (v, w) = sup_over_pairs(&g, domain.norm, pairs, &|x| domain.contains(x), r)?;
    Ok(single(format!("Lip({})", f.name()), v, w, EstimatorKind::SampledLowerBound, pairs))
}

pub(crate) fn check_local_contract(d_hat: &SubsetSpec, mu: f64, pairs: &SampleSet) -> Result<()> {
    if mu > d_hat.margin() {
        return Err(Error::MarginViolation {
            required: mu,
            available: d_hat.margin(),
        });
    }
    check_nondegenerate(pairs)?;
    let norm = d_hat.norm();
    for (i, p) in pairs.pairs.iter().enumerate() {
        let d = norm.dist_slices(&p.x, &p.x_tilde);
        if d > mu {
            return Err(Error::ContractViolation(format!("pair {i}: ‖x − x̃‖ = {d:e} exceeds μ = {mu:e}")));
        }
        if !d_hat.contains(&p.x) {
            return Err(Error::ContractViolation(format!("pair {i}: base point {:?} is not in D̂", p.x)));
        }
    }
    Ok(())
}

/// Sampled lower bound of `Lip_{D̂,μ}(F)`: pairs with base in `D̂` and
/// displacement at most `μ`.
pub fn lip_local(f: &SelfMap, d_hat: &SubsetSpec, mu: f64, pairs: &SampleSet) -> Result<ModulusReport> {
    lip_local_with(f, d_hat, mu, pairs, &Refinement::default())
}

pub fn lip_local_with(f: &SelfMap, d_hat: &SubsetSpec, mu: f64, pairs: &SampleSet, r: &Refinement) -> Result<ModulusReport> {
    check_local_contract(d_hat, mu, pairs)?;
    let g = |x: &[f64]| f.apply(x);
    let (v, w) = sup_over_pairs(&g, d_hat.norm(), pairs, &|x| d_hat.contains(x), r)?;
    Ok(single(
        format!("Lip_(D,mu={mu})({})", f.name()),
        v,
        w,
        EstimatorKind::SampledLowerBound,
        pairs,
    ))
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::BadParameter("time grid is empty".into()));
    }
    if let Some(t) = t_grid.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
        return Err(Error::BadParameter(format!("grid time {t} must be finite and nonnegative")));
    }
    Ok(())
}

/// Per `t`: `sup_x ‖f_t(x) − f_{t0}(x)‖` over the sample points of `D̂`.
pub fn t_continuity_modulus(
    family: &SemigroupFamily,
    d_hat: &SubsetSpec,
    t0: f64,
    t_grid: &[f64],
    sample: &SampleSet,
) -> Result<ModulusReport> {
    check_grid(t_grid)?;
    if sample.points.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(p) = sample.points.iter().find(|p| !d_hat.contains(p)) {
        return Err(Error::ContractViolation(format!("sample point {p:?} is not in D̂")));
    }
    let norm = family.domain().norm;
    let base: Vec<Vec<f64>> = sample.points.par_iter().map(|x| family.eval(t0, x)).collect::<Result<_>>()?;
    let per_t: Vec<(f64, Witness)> = t_grid
        .par_iter()
        .map(|&t| {
            let mut best = (0.0, 0usize);
            for (i, x) in sample.points.iter().enumerate() {
                let v = norm.dist_slices(&family.eval(t, x)?, &base[i]);
                if v > best.0 {
                    best = (v, i);
                }
            }
            Ok((
                best.0,
                Witness::Point {
                    x: sample.points[best.1].clone(),
                },
            ))
        })
        .collect::<Result<_>>()?;
    let (values, witnesses) = per_t.into_iter().unzip();
    Ok(ModulusReport {
        quantity: format!("sup ‖f_t − f_t0‖ at t0 = {t0} ({})", family.name()),
        t_grid: t_grid.to_vec(),
        values,
        witnesses,
        estimator_kind: EstimatorKind::SampledLowerBound,
        sample: Some(sample.descriptor()),
        finite_difference_step: None,
    })
}

/// Per `t`: sampled lower bound of `Lip_{D̂,μ}(F_t − Id)`.
pub fn t_lipschitz_modulus(
    family: &SemigroupFamily,
    d_hat: &SubsetSpec,
    mu: f64,
    t_grid: &[f64],
    pairs: &SampleSet,
) -> Result<ModulusReport> {
    t_lipschitz_modulus_with(family, d_hat, mu, t_grid, pairs, &Refinement::default())
}

pub fn t_lipschitz_modulus_with(
    family: &SemigroupFamily,
    d_hat: &SubsetSpec,
    mu: f64,
    t_grid: &[f64],
    pairs: &SampleSet,
    r: &Refinement,
) -> Result<ModulusReport> {
    check_grid(t_grid)?;
    check_local_contract(d_hat, mu, pairs)?;
    let per_t: Vec<(f64, Witness)> = t_grid
        .par_iter()
        .map(|&t| {
            let g = |x: &[f64]| -> Result<Vec<f64>> { Ok(family.eval(t, x)?.iter().zip(x).map(|(a, b)| a - b).collect()) };
            sup_over_pairs(&g, d_hat.norm(), pairs, &|x| d_hat.contains(x), r)
        })
        .collect::<Result<_>>()?;
    let (values, witnesses) = per_t.into_iter().unzip();
    Ok(ModulusReport {
        quantity: format!("Lip_(D,mu={mu})(F_t − Id) ({})", family.name()),
        t_grid: t_grid.to_vec(),
        values,
        witnesses,
        estimator_kind: EstimatorKind::SampledLowerBound,
        sample: Some(pairs.descriptor()),
        finite_difference_step: None,
    })
}

/// Compass-search refinement of `sup ‖Id − φ'(x)‖` from one sample point,
/// staying in the region. Depends only on the point, so the sup over a
/// larger sample is never smaller.
const COMPASS_ROUNDS: usize = 30;

pub(crate) fn local_sup(
    value: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
    x0: &[f64],
    region: &SubsetSpec,
    step0: f64,
) -> Result<(f64, Vec<f64>)> {
    let mut x = x0.to_vec();
    let mut v = value(&x)?;
    let mut step = step0;
    for _ in 0..COMPASS_ROUNDS {
        let mut moved = false;
        for j in 0..x.len() {
            for s in [-1.0, 1.0] {
                let mut y = x.clone();
                y[j] += s * step;
                if !region.contains(&y) {
                    continue;
                }
                let vy = value(&y)?;
                if vy > v {
                    v = vy;
                    x = y;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok((v, x))
}

/// `sup ‖Id − φ'(x)‖` over the sample of `D_μ`, refined locally. Analytic
/// derivatives yield a certified-upper-bound label, central differences are
/// labelled as estimates with their step.
pub fn map_derivative_modulus(phi: &SelfMap, d_mu: &SubsetSpec, sample: &SampleSet, step: f64) -> Result<ModulusReport> {
    let norm = phi.domain().norm;
    let n = phi.domain().ambient_dim;
    let analytic = phi.has_derivative();
    let value = |x: &[f64]| -> Result<f64> {
        let d = match phi.derivative(x) {
            Some(d) => d?,
            None => phi.finite_difference_jacobian(x, step)?,
        };
        Ok(norm.operator_norm(&(Operator::identity(n, n) - d)))
    };
    let (v, w) = sup_over_points(&value, d_mu, sample)?;
    Ok(ModulusReport {
        quantity: format!("sup ‖Id − φ'‖ ({})", phi.name()),
        t_grid: Vec::new(),
        values: vec![v],
        witnesses: vec![w],
        estimator_kind: if analytic {
            EstimatorKind::DerivativeCertifiedUpperBound
        } else {
            EstimatorKind::FiniteDifferenceEstimate
        },
        sample: Some(sample.descriptor()),
        finite_difference_step: (!analytic).then_some(step),
    })
}

pub(crate) fn sup_over_points(
    value: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
    region: &SubsetSpec,
    sample: &SampleSet,
) -> Result<(f64, Witness)> {
    if sample.points.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(p) = sample.points.iter().find(|p| !region.contains(p)) {
        return Err(Error::ContractViolation(format!("sample point {p:?} is outside the region")));
    }
    let step0 = 0.25 * sample.mu;
    let (v, x) = sample
        .points
        .par_iter()
        .map(|x| local_sup(value, x, region, step0))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((f64::NEG_INFINITY, Vec::new()), |acc, r| if r.0 > acc.0 { r } else { acc });
    Ok((v, Witness::Point { x }))
}

/// Per `t`: `sup ‖Id − F_t'(x)‖` over the sample of `D_μ`.
pub fn derivative_modulus(family: &SemigroupFamily, d_mu: &SubsetSpec, t_grid: &[f64], sample: &SampleSet) -> Result<ModulusReport> {
    derivative_modulus_with_step(family, d_mu, t_grid, sample, DEFAULT_FD_STEP)
}

pub fn derivative_modulus_with_step(
    family: &SemigroupFamily,
    d_mu: &SubsetSpec,
    t_grid: &[f64],
    sample: &SampleSet,
    step: f64,
) -> Result<ModulusReport> {
    check_grid(t_grid)?;
    let per_t: Vec<(f64, Witness)> = t_grid
        .par_iter()
        .map(|&t| {
            let phi = family.at(t);
            let r = map_derivative_modulus(&phi, d_mu, sample, step)?;
            Ok((r.values[0], r.witnesses[0].clone()))
        })
        .collect::<Result<_>>()?;
    let (values, witnesses) = per_t.into_iter().unzip();
    let analytic = family.has_derivative();
    Ok(ModulusReport {
        quantity: format!("sup ‖Id − F_t'‖ ({})", family.name()),
        t_grid: t_grid.to_vec(),
        values,
        witnesses,
        estimator_kind: if analytic {
            EstimatorKind::DerivativeCertifiedUpperBound
        } else {
            EstimatorKind::FiniteDifferenceEstimate
        },
        sample: Some(sample.descriptor()),
        finite_difference_step: (!analytic).then_some(step),
    })
}
