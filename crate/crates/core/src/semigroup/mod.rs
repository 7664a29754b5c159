//! One-parameter families `F_t`, self-maps, iterates and the semigroup law.

mod catalog;
mod field;
mod flow;
mod map;

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use catalog::{
    cubic_family, example31_family, expression_family, identity_family, iterate_extended_family, linear_family, rotation_family, FamilySpec,
};
pub use field::VectorField;
pub use flow::{flow_family, integrate, IntegratorConfig, Trajectory};
pub use map::{iterate, SelfMap};

use crate::domain::{DomainSpec, SampleSet};
use crate::error::{Error, Escape, Result};
use crate::moduli::{EstimatorKind, ModulusReport, Witness};
use crate::Operator;

pub type EvalFn = Arc<dyn Fn(f64, &[f64]) -> Result<Vec<f64>> + Send + Sync>;
pub type DerivativeFn = Arc<dyn Fn(f64, &[f64]) -> Result<Operator> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    ClosedForm,
    MatrixExponential,
    FlowGenerated,
    IterateExtended,
}

/// Serializable description of a family, echoed into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyInfo {
    pub name: String,
    pub kind: FamilyKind,
    pub params: BTreeMap<String, serde_json::Value>,
    /// Integrator tolerance for flow-generated families.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

/// A family of maps `t ↦ F_t` on a domain.
///
/// Nothing here enforces the semigroup law; [`compose_residual`] measures it.
/// Families whose values leave the domain (difference quotients, perturbed
/// maps used as test inputs) are built with [`SemigroupFamily::into_vector_valued`].
#[derive(Clone)]
pub struct SemigroupFamily {
    info: FamilyInfo,
    domain: DomainSpec,
    eval: EvalFn,
    derivative: Option<DerivativeFn>,
    self_map: bool,
}

impl std::fmt::Debug for SemigroupFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SemigroupFamily")
            .field("info", &self.info)
            .field("analytic_derivative", &self.derivative.is_some())
            .finish()
    }
}

impl SemigroupFamily {
    pub fn new(name: impl Into<String>, kind: FamilyKind, domain: DomainSpec, eval: EvalFn) -> Self {
        SemigroupFamily {
            info: FamilyInfo {
                name: name.into(),
                kind,
                params: BTreeMap::new(),
                tolerance: None,
            },
            domain,
            eval,
            derivative: None,
            self_map: true,
        }
    }

    pub fn with_derivative(mut self, derivative: DerivativeFn) -> Self {
        self.derivative = Some(derivative);
        self
    }

    pub fn with_param(mut self, key: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.info.params.insert(key.to_string(), v);
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.info.name = name.into();
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.info.tolerance = Some(tol);
        self
    }

    /// Drops the requirement that values lie in the domain.
    pub fn into_vector_valued(mut self) -> Self {
        self.self_map = false;
        self
    }

    pub fn name(&self) -> &str {
        &self.info.name
    }

    pub fn kind(&self) -> FamilyKind {
        self.info.kind
    }

    pub fn info(&self) -> &FamilyInfo {
        &self.info
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.ambient_dim
    }

    pub fn tolerance(&self) -> Option<f64> {
        self.info.tolerance
    }

    pub fn has_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    fn check_input(&self, t: f64, x: &[f64]) -> Result<()> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::BadParameter(format!("time t = {t} must be finite and nonnegative")));
        }
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if !self.domain.contains(x) {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
        Ok(())
    }

    /// `F_t(x)`.
    pub fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(t, x)?;
        let y = (self.eval)(t, x)?;
        if self.self_map && !self.domain.contains(&y) {
            return Err(Error::TrajectoryEscape(Escape::Time(t)));
        }
        Ok(y)
    }

    /// The analytic spatial derivative `F_t'(x)` when one was supplied.
    pub fn analytic_derivative(&self, t: f64, x: &[f64]) -> Option<Result<Operator>> {
        let d = self.derivative.as_ref()?;
        Some(self.check_input(t, x).and_then(|_| d(t, x)))
    }

    /// The map `x ↦ F_t(x)` at a fixed time.
    pub fn at(&self, t: f64) -> SelfMap {
        let fam = self.clone();
        let eval: map::MapFn = Arc::new(move |x: &[f64]| fam.eval(t, x));
        let mut m = SelfMap::new(format!("{}@t={t}", self.name()), self.domain.clone(), eval);
        if let Some(d) = self.derivative.clone() {
            m = m.with_derivative(Arc::new(move |x: &[f64]| d(t, x)));
        }
        if !self.self_map {
            m = m.into_vector_valued();
        }
        m
    }

    /// Writes `t, x1, …, xn` rows of the trajectory `t ↦ F_t(x)`.
    pub fn write_trajectory_csv<W: Write>(&self, x: &[f64], t_grid: &[f64], w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=x.len()).map(|i| format!("x{i}")));
        wtr.write_record(&header)?;
        for &t in t_grid {
            let y = self.eval(t, x)?;
            let mut row = vec![format!("{t:e}")];
            row.extend(y.iter().map(|v| format!("{v:e}")));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `F_t(x)`, see [`SemigroupFamily::eval`].
pub fn evaluate(family: &SemigroupFamily, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    family.eval(t, x)
}

/// `sup_x ‖F_{s+t}(x) − F_s(F_t(x))‖` over the sample points.
pub fn compose_residual(family: &SemigroupFamily, s: f64, t: f64, sample: &SampleSet) -> Result<ModulusReport> {
    if sample.points.is_empty() {
        return Err(Error::EmptySample);
    }
    let norm = family.domain().norm;
    let residuals: Vec<(f64, Vec<f64>)> = sample
        .points
        .par_iter()
        .map(|x| {
            let joint = family.eval(s + t, x)?;
            let composed = family.eval(s, &family.eval(t, x)?)?;
            Ok((norm.dist_slices(&joint, &composed), x.clone()))
        })
        .collect::<Result<_>>()?;
    let (value, point) = residuals
        .into_iter()
        .fold((f64::NEG_INFINITY, Vec::new()), |acc, r| if r.0 > acc.0 { r } else { acc });
    Ok(ModulusReport {
        quantity: format!("composition residual at s = {s}, t = {t}"),
        t_grid: vec![s + t],
        values: vec![value],
        witnesses: vec![Witness::Point { x: point }],
        estimator_kind: EstimatorKind::SampledLowerBound,
        sample: Some(sample.descriptor()),
        finite_difference_step: None,
    })
}

/// Result of [`frechet_derivative`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrechetDerivative {
    pub matrix: Operator,
    pub analytic: bool,
    /// Step used for central differences (absent when analytic).
    pub step: Option<f64>,
    /// Richardson estimate of the truncation error (zero when analytic).
    pub error_estimate: f64,
}

fn central_difference(family: &SemigroupFamily, t: f64, x: &[f64], h: f64) -> Result<Operator> {
    let n = x.len();
    let mut m = Operator::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + h;
        let fp = family.eval(t, &xp)?;
        xp[j] = x[j] - h;
        let fm = family.eval(t, &xp)?;
        xp[j] = x[j];
        for i in 0..n {
            m[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(m)
}

/// `F_t'(x)`: the analytic derivative when available, otherwise central
/// differences with the given step and a Richardson error estimate.
pub fn frechet_derivative(family: &SemigroupFamily, t: f64, x: &[f64], step: f64) -> Result<FrechetDerivative> {
    if let Some(d) = family.analytic_derivative(t, x) {
        return Ok(FrechetDerivative {
            matrix: d?,
            analytic: true,
            step: None,
            error_estimate: 0.0,
        });
    }
    difference_frechet(family, t, x, step)
}

/// Central-difference derivative, ignoring any analytic derivative.
pub fn finite_difference_derivative(family: &SemigroupFamily, t: f64, x: &[f64], step: f64) -> Result<FrechetDerivative> {
    difference_frechet(family, t, x, step)
}

fn difference_frechet(family: &SemigroupFamily, t: f64, x: &[f64], step: f64) -> Result<FrechetDerivative> {
    if !(step > 0.0) {
        return Err(Error::BadParameter(format!("step = {step} must be positive")));
    }
    family.check_input(t, x)?;
    let available = family.domain().dist_to_boundary(x)?;
    // The coarse Richardson companion uses 2·step.
    if available <= 2.0 * step {
        return Err(Error::MarginViolation {
            required: 2.0 * step,
            available,
        });
    }
    let fine = central_difference(family, t, x, step)?;
    let coarse = central_difference(family, t, x, 2.0 * step)?;
    let error_estimate = crate::norm::spectral_norm(&(&coarse - &fine)) / 3.0;
    Ok(FrechetDerivative {
        matrix: fine,
        analytic: false,
        step: Some(step),
        error_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{sample, SampleStrategy, SubsetShape, SubsetSpec};

    fn grid(lo: f64, hi: f64, n: usize) -> SampleSet {
        let d = DomainSpec::interval(-1.0, 1.0).unwrap();
        let s = SubsetSpec::new(d, SubsetShape::interval(lo, hi)).unwrap();
        sample(&s, 0.05, SampleStrategy::Grid, n, 0, 0).unwrap()
    }

    #[test]
    fn example_values() {
        let f = example31_family();
        assert!((f.eval(0.5, &[0.8]).unwrap()[0] - 2.0 * (-1.0f64).exp() * 0.64).abs() < 1e-15);
        assert!((f.eval(1.0, &[0.3]).unwrap()[0] - (-2.0f64).exp() * 0.3).abs() < 1e-15);
        assert_eq!(f.eval(0.0, &[-0.77]).unwrap(), vec![-0.77]);
    }

    #[test]
    fn example_composition_and_seam() {
        let f = example31_family();
        let x = [0.8];
        let direct = f.eval(0.7, &x).unwrap()[0];
        let composed = f.eval(0.2, &f.eval(0.5, &x).unwrap()).unwrap()[0];
        let oracle = 2.0 * (-1.4f64).exp() * 0.64;
        assert!((direct - oracle).abs() < 1e-15 && (composed - oracle).abs() < 1e-15);
        assert!((oracle - 0.315644).abs() < 1e-6);
        let seam = 1.6f64.ln();
        assert!((f.eval(seam, &x).unwrap()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn example_residual_is_rounding() {
        let f = example31_family();
        let s = grid(-0.9, 0.9, 101);
        let r = compose_residual(&f, 0.2, 0.5, &s).unwrap();
        assert!(r.values[0] <= 1e-12, "{}", r.values[0]);
    }

    #[test]
    fn broken_family_is_detected() {
        let d = DomainSpec::interval(-10.0, 10.0).unwrap();
        let f = SemigroupFamily::new(
            "shift_t_squared",
            FamilyKind::ClosedForm,
            d.clone(),
            Arc::new(|t, x: &[f64]| Ok(vec![x[0] + t * t])),
        );
        let sub = SubsetSpec::new(d, SubsetShape::interval(-1.0, 1.0)).unwrap();
        let smp = sample(&sub, 0.1, SampleStrategy::Grid, 5, 0, 0).unwrap();
        let r = compose_residual(&f, 0.3, 0.4, &smp).unwrap();
        assert!((r.values[0] - 2.0 * 0.3 * 0.4).abs() < 1e-14);
    }

    #[test]
    fn example_derivative() {
        let f = example31_family();
        let d = frechet_derivative(&f, 0.1, &[0.3], 1e-4).unwrap();
        assert!(d.analytic);
        assert!((d.matrix[(0, 0)] - (-0.2f64).exp()).abs() < 1e-15);
        let fd = finite_difference_derivative(&f, 0.1, &[0.3], 1e-4).unwrap();
        assert!((fd.matrix[(0, 0)] - 0.818731).abs() < 1e-6);
        assert!(matches!(
            finite_difference_derivative(&f, 0.1, &[0.99995], 1e-4),
            Err(Error::MarginViolation { .. })
        ));
    }

    #[test]
    fn negative_time_and_outside_points() {
        let f = example31_family();
        assert!(matches!(f.eval(-0.1, &[0.0]), Err(Error::BadParameter(_))));
        assert!(matches!(f.eval(0.1, &[1.0]), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn trajectory_csv() {
        let f = example31_family();
        let mut buf = Vec::new();
        f.write_trajectory_csv(&[0.8], &[0.0, 0.5], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x1\n0e0,8e-1\n"), "{text}");
    }
}
