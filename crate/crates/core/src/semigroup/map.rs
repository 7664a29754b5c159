use std::sync::Arc;

use crate::domain::DomainSpec;
use crate::error::{Error, Escape, Result};
use crate::expr::Expr;
use crate::Operator;

pub type MapFn = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> Result<Operator> + Send + Sync>;

/// A single map `φ: 𝔻 → 𝔻` (or `𝔻 → X` when vector-valued) with an
/// optional derivative.
#[derive(Clone)]
pub struct SelfMap {
    name: String,
    domain: DomainSpec,
    map: MapFn,
    derivative: Option<JacobianFn>,
    self_map: bool,
}

impl std::fmt::Debug for SelfMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SelfMap")
            .field("name", &self.name)
            .field("derivative", &self.derivative.is_some())
            .finish()
    }
}

impl SelfMap {
    pub fn new(name: impl Into<String>, domain: DomainSpec, map: MapFn) -> Self {
        SelfMap {
            name: name.into(),
            domain,
            map,
            derivative: None,
            self_map: true,
        }
    }

    pub fn with_derivative(mut self, derivative: JacobianFn) -> Self {
        self.derivative = Some(derivative);
        self
    }

    pub fn into_vector_valued(mut self) -> Self {
        self.self_map = false;
        self
    }

    /// `x ↦ λx`.
    pub fn scaling(domain: DomainSpec, lambda: f64) -> Self {
        let n = domain.ambient_dim;
        SelfMap::new(
            format!("{lambda}*x"),
            domain,
            Arc::new(move |x: &[f64]| Ok(x.iter().map(|v| lambda * v).collect())),
        )
        .with_derivative(Arc::new(move |_| Ok(Operator::identity(n, n) * lambda)))
    }

    /// `x ↦ x + c`.
    pub fn translation(domain: DomainSpec, c: Vec<f64>) -> Self {
        let n = domain.ambient_dim;
        let name = format!("x+{c:?}");
        SelfMap::new(
            name,
            domain,
            Arc::new(move |x: &[f64]| Ok(x.iter().zip(&c).map(|(a, b)| a + b).collect())),
        )
        .with_derivative(Arc::new(move |_| Ok(Operator::identity(n, n))))
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
        Ok(SelfMap::new(
            name,
            domain,
            Arc::new(move |x: &[f64]| Ok(exprs.iter().map(|e| e.eval(x, 0.0)).collect())),
        )
        .with_derivative(Arc::new(move |x: &[f64]| {
            Ok(Operator::from_fn(n, n, |i, j| jac[i][j].eval(x, 0.0)))
        })))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn has_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    /// `φ(x)`; errors when `x` is outside the domain or, for self-maps, when
    /// `φ(x)` is.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.domain.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.domain.ambient_dim,
                got: x.len(),
            });
        }
        if !self.domain.contains(x) {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
        let y = (self.map)(x)?;
        if self.self_map && !self.domain.contains(&y) {
            return Err(Error::TrajectoryEscape(Escape::Iterate(1)));
        }
        Ok(y)
    }

    /// `φ'(x)`, when an analytic derivative was supplied.
    pub fn derivative(&self, x: &[f64]) -> Option<Result<Operator>> {
        self.derivative.as_ref().map(|d| d(x))
    }

    /// Central-difference Jacobian; needs a boundary margin above `step`.
    pub fn finite_difference_jacobian(&self, x: &[f64], step: f64) -> Result<Operator> {
        if !(step > 0.0) {
            return Err(Error::BadParameter(format!("step = {step} must be positive")));
        }
        let available = self.domain.dist_to_boundary(x)?;
        if available <= step {
            return Err(Error::MarginViolation { required: step, available });
        }
        let n = x.len();
        let mut m = Operator::zeros(n, n);
        let mut xp = x.to_vec();
        for j in 0..n {
            xp[j] = x[j] + step;
            let fp = (self.map)(&xp)?;
            xp[j] = x[j] - step;
            let fm = (self.map)(&xp)?;
            xp[j] = x[j];
            for i in 0..n {
                m[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
            }
        }
        Ok(m)
    }

    /// `φ^k(x)`, see [`iterate`].
    pub fn iterate(&self, k: usize, x: &[f64]) -> Result<Vec<f64>> {
        iterate(self, k, x)
    }

    /// `φ^k` as a map of its own, with the chain-rule derivative when `φ'`
    /// is known.
    pub fn power(&self, k: usize) -> SelfMap {
        let base = self.clone();
        let mut m = SelfMap::new(
            format!("({})^{k}", self.name),
            self.domain.clone(),
            Arc::new(move |x: &[f64]| iterate(&base, k, x)),
        );
        m.self_map = self.self_map;
        if let Some(d) = self.derivative.clone() {
            let base = self.clone();
            let n = self.domain.ambient_dim;
            m = m.with_derivative(Arc::new(move |x: &[f64]| {
                let mut y = x.to_vec();
                let mut j = Operator::identity(n, n);
                for i in 0..k {
                    j = d(&y)? * j;
                    if i + 1 < k {
                        y = base.apply(&y)?;
                    }
                }
                Ok(j)
            }));
        }
        m
    }

    /// `φ − Id`, a vector-valued map.
    pub fn minus_identity(&self) -> SelfMap {
        let base = self.clone();
        let n = self.domain.ambient_dim;
        let mut m = SelfMap::new(
            format!("{} - Id", self.name),
            self.domain.clone(),
            Arc::new(move |x: &[f64]| Ok(base.apply(x)?.iter().zip(x).map(|(a, b)| a - b).collect())),
        )
        .into_vector_valued();
        if let Some(d) = self.derivative.clone() {
            m = m.with_derivative(Arc::new(move |x: &[f64]| Ok(d(x)? - Operator::identity(n, n))));
        }
        m
    }
}

/// `φ^k(x)` with `φ^0 = Id`. An intermediate image outside the domain is
/// reported as an escape at the failing iterate.
pub fn iterate(phi: &SelfMap, k: usize, x: &[f64]) -> Result<Vec<f64>> {
    let mut y = x.to_vec();
    for i in 1..=k {
        y = match phi.apply(&y) {
            Ok(v) => v,
            Err(Error::TrajectoryEscape(_)) => return Err(Error::TrajectoryEscape(Escape::Iterate(i))),
            Err(e) => return Err(e),
        };
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval() -> DomainSpec {
        DomainSpec::interval(-1.0, 1.0).unwrap()
    }

    #[test]
    fn iterate_examples() {
        let d = interval();
        let id = SelfMap::scaling(d.clone(), 1.0);
        assert_eq!(iterate(&id, 17, &[0.3]).unwrap(), vec![0.3]);
        let shrink = SelfMap::scaling(d.clone(), 0.9);
        assert!((iterate(&shrink, 3, &[0.99]).unwrap()[0] - 0.729 * 0.99).abs() < 1e-15);
        let phi = SelfMap::from_exprs(d, vec![Expr::parse("x + 0.1*(1 - x^2)").unwrap()]).unwrap();
        // 0 -> 0.1 -> 0.1 + 0.1*0.99
        assert!((iterate(&phi, 2, &[0.0]).unwrap()[0] - 0.199).abs() < 1e-15);
    }

    #[test]
    fn escape_reports_iterate() {
        let d = DomainSpec::interval(-2.0, 2.0).unwrap();
        let grow = SelfMap::scaling(d, 1.5);
        // 1 -> 1.5 -> 2.25
        assert!(matches!(
            iterate(&grow, 5, &[1.0]),
            Err(Error::TrajectoryEscape(Escape::Iterate(2)))
        ));
    }

    #[test]
    fn expression_jacobian() {
        let d = DomainSpec::unit_ball(crate::Norm::Euclidean, 2).unwrap();
        let phi = SelfMap::from_exprs(d, vec![Expr::parse("x1*x2").unwrap(), Expr::parse("sin(x1)").unwrap()]).unwrap();
        let j = phi.derivative(&[0.2, 0.5]).unwrap().unwrap();
        assert_eq!(j[(0, 0)], 0.5);
        assert_eq!(j[(0, 1)], 0.2);
        assert!((j[(1, 0)] - 0.2f64.cos()).abs() < 1e-15);
        assert_eq!(j[(1, 1)], 0.0);
    }

    #[test]
    fn power_derivative_follows_the_chain_rule() {
        let d = interval();
        let phi = SelfMap::from_exprs(d, vec![Expr::parse("0.8*x + 0.05*sin(2*x)").unwrap()]).unwrap();
        let p3 = phi.power(3);
        for x in [-0.7, 0.0, 0.4] {
            let h = 1e-5;
            let fd = (p3.apply(&[x + h]).unwrap()[0] - p3.apply(&[x - h]).unwrap()[0]) / (2.0 * h);
            assert!((p3.derivative(&[x]).unwrap().unwrap()[(0, 0)] - fd).abs() < 1e-9);
        }
        assert_eq!(phi.power(0).derivative(&[0.3]).unwrap().unwrap()[(0, 0)], 1.0);
    }
}
