//! Difference quotients, the iterate and derivative inequalities, certified
//! generator extraction, Cauchy-problem residuals and corner detection.

mod corners;
mod estimate;
mod lemmas;

use serde::{Deserialize, Serialize};

pub use corners::{detect_corners, Corner, CornerConfig};
pub use estimate::Delta1Check;
pub use estimate::{
    cauchy_problem_residual, estimate_generator, estimate_generator_with, schedule, Certificate, GeneratorConfig, GeneratorEstimate,
    SCHEDULE_FLOOR,
};
pub use lemmas::{
    verify_corollary_quotients, verify_lemma_derivative, verify_lemma_iterates, verify_lemma_iterates_with, verify_transfer_estimate,
};

use crate::error::{Error, Result};
use crate::moduli::EstimatorKind;
use crate::semigroup::SemigroupFamily;

/// `f_t(x) = (F_t(x) − x) / t`.
pub fn difference_quotient(family: &SemigroupFamily, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(Error::BadParameter(format!("difference quotient needs t > 0, got {t}")));
    }
    Ok(family.eval(t, x)?.iter().zip(x).map(|(y, x)| (y - x) / t).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statement {
    /// `‖x − φ^p(x) − p(x − φ(x))‖ ≤ (p − 1) ℓ ‖x − φ(x)‖`.
    LemmaIterates,
    /// `‖f_{p t0}(x) − f_{t0}(x)‖ ≤ (p − 1)/p · ℓ ‖f_{t0}(x)‖`.
    CorollaryQuotients,
    /// `sup ‖Id − φ'‖ ≤ ℓ` on `D_μ` implies `Lip_{D̂,μ}(φ − Id) ≤ ℓ`.
    LemmaDerivative,
    /// `sup_{D1} ‖f_t − f_{t0}‖ ≤ (L + 1) ε_t`.
    TransferEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCheck {
    pub point: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partner: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

impl PointCheck {
    fn new(point: Vec<f64>, lhs: f64, rhs: f64) -> Self {
        PointCheck {
            point,
            partner: None,
            t: None,
            lhs,
            rhs,
            margin: rhs - lhs,
        }
    }
}

/// Pointwise check of one inequality on a sample. `ell` is the measured
/// modulus the right-hand side was built from; it is a sampled quantity, so
/// a pass is evidence and a failure beyond tolerance refutes the sampled
/// instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub statement: Statement,
    pub description: String,
    pub per_point: Vec<PointCheck>,
    pub pass: bool,
    pub tolerance: f64,
    pub min_margin: f64,
    pub ell: Option<f64>,
    pub ell_kind: Option<EstimatorKind>,
    pub inputs: serde_json::Value,
}

impl InequalityReport {
    fn assemble(
        statement: Statement,
        description: String,
        per_point: Vec<PointCheck>,
        tolerance: f64,
        ell: Option<(f64, EstimatorKind)>,
        inputs: serde_json::Value,
    ) -> Result<Self> {
        if per_point.is_empty() {
            return Err(Error::EmptySample);
        }
        let min_margin = per_point.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
        Ok(InequalityReport {
            statement,
            description,
            pass: min_margin >= -tolerance,
            per_point,
            tolerance,
            min_margin,
            ell: ell.map(|e| e.0),
            ell_kind: ell.map(|e| e.1),
            inputs,
        })
    }

    /// The check with the smallest margin.
    pub fn worst(&self) -> &PointCheck {
        self.per_point
            .iter()
            .min_by(|a, b| a.margin.total_cmp(&b.margin))
            .expect("reports hold at least one check")
    }

    /// CSV with columns `t, x1.., lhs, rhs, margin`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let dim = self.per_point[0].point.len();
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=dim).map(|i| format!("x{i}")));
        header.extend(["lhs", "rhs", "margin"].map(String::from));
        wtr.write_record(&header)?;
        for c in &self.per_point {
            let mut row = vec![c.t.map_or(String::new(), |t| format!("{t:e}"))];
            row.extend(c.point.iter().map(|v| format!("{v:e}")));
            row.extend([c.lhs, c.rhs, c.margin].map(|v| format!("{v:e}")));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
