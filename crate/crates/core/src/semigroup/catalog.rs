use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::field::VectorField;
use super::flow::{flow_family, IntegratorConfig};
use super::map::SelfMap;
use super::{FamilyKind, SemigroupFamily};
use crate::domain::DomainSpec;
use crate::error::{Error, Escape, Result};
use crate::expr::Expr;
use crate::norm::Norm;
use crate::{Operator, Point};

/// Points checked along `t ↦ exp(sA)x` for `s < t` before accepting a
/// linear evaluation.
const LINEAR_ESCAPE_PROBES: usize = 8;

fn unit_interval() -> DomainSpec {
    DomainSpec::interval(-1.0, 1.0).expect("valid interval")
}

/// The piecewise semigroup on `(−1, 1)`:
/// `e^{−t}x` for `|x| > ½, t ≤ ln 2|x|`; `2e^{−2t}x|x|` for `|x| > ½, t > ln 2|x|`;
/// `e^{−2t}x` for `|x| ≤ ½`.
pub fn example31_family() -> SemigroupFamily {
    fn eval(t: f64, x: f64) -> f64 {
        let a = x.abs();
        if a <= 0.5 {
            (-2.0 * t).exp() * x
        } else if t <= (2.0 * a).ln() {
            (-t).exp() * x
        } else {
            2.0 * (-2.0 * t).exp() * x * a
        }
    }
    fn derivative(t: f64, x: f64) -> f64 {
        let a = x.abs();
        if a <= 0.5 {
            (-2.0 * t).exp()
        } else if t <= (2.0 * a).ln() {
            (-t).exp()
        } else {
            4.0 * (-2.0 * t).exp() * a
        }
    }
    SemigroupFamily::new(
        "example31",
        FamilyKind::ClosedForm,
        unit_interval(),
        Arc::new(|t, x: &[f64]| Ok(vec![eval(t, x[0])])),
    )
    .with_derivative(Arc::new(|t, x: &[f64]| Ok(Operator::from_element(1, 1, derivative(t, x[0])))))
}

/// `F_t = exp(tA)` restricted to `domain`. Evaluation fails with an escape
/// when the orbit leaves the domain before time `t`.
pub fn linear_family(a: Operator, domain: DomainSpec) -> Result<SemigroupFamily> {
    let n = domain.ambient_dim;
    if a.nrows() != a.ncols() {
        return Err(Error::BadParameter(format!("matrix is {}×{}, not square", a.nrows(), a.ncols())));
    }
    if a.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.nrows(),
        });
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).iter().copied().collect()).collect();
    let (a_eval, a_der) = (a.clone(), a);
    let dom = domain.clone();
    let eval = move |t: f64, x: &[f64]| {
        let xv = Point::from_column_slice(x);
        let step = (&a_eval * (t / LINEAR_ESCAPE_PROBES as f64)).exp();
        let mut y = xv.clone();
        for k in 1..LINEAR_ESCAPE_PROBES {
            y = &step * y;
            if !dom.contains(y.as_slice()) {
                return Err(Error::TrajectoryEscape(Escape::Time(t * k as f64 / LINEAR_ESCAPE_PROBES as f64)));
            }
        }
        Ok(((&a_eval * t).exp() * xv).as_slice().to_vec())
    };
    Ok(
        SemigroupFamily::new("linear", FamilyKind::MatrixExponential, domain, Arc::new(eval))
            .with_derivative(Arc::new(move |t, _x: &[f64]| Ok((&a_der * t).exp())))
            .with_param("matrix", rows),
    )
}

/// Rotation `exp(tA)`, `A = [[0, 1], [−1, 0]]`, on the Euclidean unit disc.
pub fn rotation_family() -> SemigroupFamily {
    let d = DomainSpec::unit_ball(Norm::Euclidean, 2).expect("valid disc");
    linear_family(rotation_generator(), d)
        .expect("square generator")
        .renamed("rotation")
}

pub(crate) fn rotation_generator() -> Operator {
    Operator::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
}

/// The flow of `u' = −u³` in closed form, `x / √(1 + 2tx²)`, on `(−1, 1)`.
pub fn cubic_family() -> SemigroupFamily {
    SemigroupFamily::new(
        "cubic",
        FamilyKind::ClosedForm,
        unit_interval(),
        Arc::new(|t, x: &[f64]| Ok(vec![x[0] / (1.0 + 2.0 * t * x[0] * x[0]).sqrt()])),
    )
    .with_derivative(Arc::new(|t, x: &[f64]| {
        Ok(Operator::from_element(1, 1, (1.0 + 2.0 * t * x[0] * x[0]).powf(-1.5)))
    }))
}

pub fn identity_family(domain: DomainSpec) -> SemigroupFamily {
    let n = domain.ambient_dim;
    SemigroupFamily::new("identity", FamilyKind::ClosedForm, domain, Arc::new(|_, x: &[f64]| Ok(x.to_vec())))
        .with_derivative(Arc::new(move |_, _| Ok(Operator::identity(n, n))))
}

/// `F_t(x)` given componentwise by expressions in `x1, …, xn` and `t`,
/// with a symbolic spatial Jacobian.
pub fn expression_family(domain: DomainSpec, exprs: Vec<Expr>) -> Result<SemigroupFamily> {
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
    let text: Vec<String> = exprs.iter().map(|e| e.to_string()).collect();
    let exprs = Arc::new(exprs);
    Ok(SemigroupFamily::new(
        "expression",
        FamilyKind::ClosedForm,
        domain,
        Arc::new(move |t, x: &[f64]| Ok(exprs.iter().map(|e| e.eval(x, t)).collect())),
    )
    .with_derivative(Arc::new(move |t, x: &[f64]| {
        Ok(Operator::from_fn(n, n, |i, j| jac[i][j].eval(x, t)))
    }))
    .with_param("map", text))
}

/// `F_{kτ} = φ^k`, defined only on the lattice `t ∈ τℕ`.
pub fn iterate_extended_family(phi: SelfMap, tau: f64) -> Result<SemigroupFamily> {
    if !(tau > 0.0) {
        return Err(Error::BadParameter(format!("τ = {tau} must be positive")));
    }
    let name = format!("iterates[{}]", phi.name());
    let domain = phi.domain().clone();
    Ok(SemigroupFamily::new(
        name,
        FamilyKind::IterateExtended,
        domain,
        Arc::new(move |t, x: &[f64]| {
            let k = (t / tau).round();
            if (t / tau - k).abs() > 1e-9 * k.max(1.0) {
                return Err(Error::BadParameter(format!("t = {t} is not a multiple of τ = {tau}")));
            }
            phi.iterate(k as usize, x)
        }),
    )
    .with_param("tau", tau))
}

/// Catalog entry as written in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Example31,
    Cubic,
    Rotation,
    Identity,
    Linear {
        matrix: Vec<Vec<f64>>,
    },
    /// Flow of a field given componentwise as expressions.
    Flow {
        field: Vec<String>,
        #[serde(default)]
        integrator: IntegratorConfig,
    },
    /// Closed form `F_t(x)` in `x1, …, xn` and `t`.
    Expression {
        map: Vec<String>,
    },
}

fn parse_all(src: &[String]) -> Result<Vec<Expr>> {
    src.iter().map(|s| Expr::parse(s)).collect()
}

impl FamilySpec {
    /// Whether the family carries its own domain.
    pub fn intrinsic_domain(&self) -> Option<DomainSpec> {
        match self {
            FamilySpec::Example31 | FamilySpec::Cubic => Some(unit_interval()),
            FamilySpec::Rotation => Some(DomainSpec::unit_ball(Norm::Euclidean, 2).expect("valid disc")),
            _ => None,
        }
    }

    /// Builds the family, on `domain` when given or else on the family's own.
    pub fn build(&self, domain: Option<&DomainSpec>) -> Result<SemigroupFamily> {
        let need = || {
            domain
                .cloned()
                .ok_or_else(|| Error::BadParameter("this family needs an explicit domain".into()))
        };
        match self {
            FamilySpec::Example31 | FamilySpec::Cubic | FamilySpec::Rotation => {
                let own = self.intrinsic_domain().expect("intrinsic");
                if let Some(d) = domain {
                    if d != &own {
                        return Err(Error::BadParameter(format!(
                            "family {self:?} is defined on its own domain; drop the domain section or match it"
                        )));
                    }
                }
                Ok(match self {
                    FamilySpec::Example31 => example31_family(),
                    FamilySpec::Cubic => cubic_family(),
                    _ => rotation_family(),
                })
            }
            FamilySpec::Identity => Ok(identity_family(need()?)),
            FamilySpec::Linear { matrix } => {
                let n = matrix.len();
                if matrix.iter().any(|r| r.len() != n) {
                    return Err(Error::BadParameter("matrix rows must all have the matrix's row count".into()));
                }
                let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
                linear_family(Operator::from_row_slice(n, n, &flat), need()?)
            }
            FamilySpec::Flow { field, integrator } => {
                let f = VectorField::from_exprs(need()?, parse_all(field)?)?;
                flow_family(f, *integrator)
            }
            FamilySpec::Expression { map } => expression_family(need()?, parse_all(map)?),
        }
    }
}
