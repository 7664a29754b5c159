use std::sync::Arc;

use crate::domain::{DomainSpec, SampleSet};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::Operator;

type FieldFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type FieldJacobian = Arc<dyn Fn(&[f64]) -> Operator + Send + Sync>;

/// An autonomous vector field `f: 𝔻 → X`, the candidate generator.
#[derive(Clone)]
pub struct VectorField {
    pub name: String,
    pub domain: DomainSpec,
    pub lipschitz_hint: Option<f64>,
    f: FieldFn,
    jacobian: Option<FieldJacobian>,
}

impl std::fmt::Debug for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorField")
            .field("name", &self.name)
            .field("lipschitz_hint", &self.lipschitz_hint)
            .finish()
    }
}

impl VectorField {
    pub fn new(name: impl Into<String>, domain: DomainSpec, f: FieldFn) -> Self {
        VectorField {
            name: name.into(),
            domain,
            lipschitz_hint: None,
            f,
            jacobian: None,
        }
    }

    pub fn with_jacobian(mut self, jacobian: FieldJacobian) -> Self {
        self.jacobian = Some(jacobian);
        self
    }

    pub fn with_lipschitz_hint(mut self, l: f64) -> Self {
        self.lipschitz_hint = Some(l);
        self
    }

    /// `f(x) = Ax`.
    pub fn linear(domain: DomainSpec, a: Operator) -> Result<Self> {
        let n = domain.ambient_dim;
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.nrows(),
            });
        }
        let l = crate::norm::spectral_norm(&a);
        let (a1, a2) = (a.clone(), a.clone());
        Ok(VectorField::new(
            "linear",
            domain,
            Arc::new(move |x: &[f64]| (&a1 * crate::Point::from_column_slice(x)).as_slice().to_vec()),
        )
        .with_jacobian(Arc::new(move |_| a2.clone()))
        .with_lipschitz_hint(l))
    }

    /// `f(x) = −x³` componentwise.
    pub fn neg_cube(domain: DomainSpec) -> Self {
        VectorField::new("-x^3", domain, Arc::new(|x: &[f64]| x.iter().map(|v| -v * v * v).collect())).with_jacobian(Arc::new(
            |x: &[f64]| Operator::from_diagonal(&crate::Point::from_iterator(x.len(), x.iter().map(|v| -3.0 * v * v))),
        ))
    }

    /// Componentwise expressions in `x1, …, xn` with a symbolic Jacobian.
    pub fn from_exprs(domain: DomainSpec, exprs: Vec<Expr>) -> Result<Self> {
        let n = domain.ambient_dim;
        if exprs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: exprs.len(),
            });
        }
        if let Some(bad) = exprs.iter().find(|e| e.arity() > n) {
            return Err(Error::Expression(format!("'{bad}' references a coordinate beyond dimension {n}")));
        }
        let jac: Vec<Vec<Expr>> = exprs.iter().map(|e| (0..n).map(|j| e.derivative(Some(j))).collect()).collect();
        let name = exprs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", ");
        let exprs = Arc::new(exprs);
        Ok(VectorField::new(
            name,
            domain,
            Arc::new(move |x: &[f64]| exprs.iter().map(|e| e.eval(x, 0.0)).collect()),
        )
        .with_jacobian(Arc::new(move |x: &[f64]| Operator::from_fn(n, n, |i, j| jac[i][j].eval(x, 0.0)))))
    }

    pub fn dim(&self) -> usize {
        self.domain.ambient_dim
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }

    pub fn has_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    /// `Df(x)`: analytic when supplied, otherwise central differences.
    pub fn jacobian(&self, x: &[f64]) -> Operator {
        if let Some(j) = &self.jacobian {
            return j(x);
        }
        let n = x.len();
        let mut m = Operator::zeros(n, n);
        let mut xp = x.to_vec();
        for j in 0..n {
            let h = f64::EPSILON.cbrt() * x[j].abs().max(1.0);
            xp[j] = x[j] + h;
            let fp = self.eval(&xp);
            xp[j] = x[j] - h;
            let fm = self.eval(&xp);
            xp[j] = x[j];
            for i in 0..n {
                m[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        m
    }

    /// `sup ‖f‖` over the sample points; errors on a non-finite value.
    pub fn sup_norm_on(&self, sample: &SampleSet) -> Result<f64> {
        let norm = self.domain.norm;
        let mut sup = 0.0f64;
        for x in &sample.points {
            let v = norm.norm_slice(&self.eval(x));
            if !v.is_finite() {
                return Err(Error::BadParameter(format!("field {} is not finite at {x:?}", self.name)));
            }
            sup = sup.max(v);
        }
        Ok(sup)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{sample, SampleStrategy, SubsetShape, SubsetSpec};

    #[test]
    fn expression_field_matches_builtin() {
        let d = DomainSpec::interval(-1.0, 1.0).unwrap();
        let a = VectorField::from_exprs(d.clone(), vec![Expr::parse("-x^3").unwrap()]).unwrap();
        let b = VectorField::neg_cube(d);
        for x in [-0.9, -0.1, 0.4] {
            assert_eq!(a.eval(&[x]), b.eval(&[x]));
            assert!((a.jacobian(&[x])[(0, 0)] - b.jacobian(&[x])[(0, 0)]).abs() < 1e-15);
        }
    }

    #[test]
    fn boundedness_on_sample() {
        let d = DomainSpec::interval(-1.0, 1.0).unwrap();
        let f = VectorField::neg_cube(d.clone());
        let s = SubsetSpec::new(d, SubsetShape::interval(-0.5, 0.5)).unwrap();
        let smp = sample(&s, 0.1, SampleStrategy::Grid, 11, 0, 0).unwrap();
        assert_eq!(f.sup_norm_on(&smp).unwrap(), 0.125);
    }
}
