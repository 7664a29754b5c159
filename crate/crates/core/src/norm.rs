//! Vector norms of the ambient space and the operator norms they induce.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    #[default]
    Euclidean,
    /// Maximum of absolute coordinates (the truncated ℓ∞ norm).
    #[serde(alias = "sup", alias = "max", alias = "linf")]
    SupNorm,
}

/// Residual target for the power iteration used above dimension 2.
pub const POWER_ITERATION_RESIDUAL: f64 = 1e-10;
const POWER_ITERATION_MAX: usize = 20_000;

impl Norm {
    pub fn norm(self, v: &DVector<f64>) -> f64 {
        self.norm_slice(v.as_slice())
    }

    pub fn norm_slice(self, v: &[f64]) -> f64 {
        match self {
            Norm::Euclidean => v.iter().map(|c| c * c).sum::<f64>().sqrt(),
            Norm::SupNorm => v.iter().fold(0.0, |m, c| m.max(c.abs())),
        }
    }

    pub fn dist(self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        match self {
            Norm::Euclidean => a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Norm::SupNorm => a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).abs())),
        }
    }

    pub fn dist_slices(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Norm::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Norm::SupNorm => a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs())),
        }
    }

    /// Norm of the dual space, used for distances to hyperplanes:
    /// `dist(x, {a·y = b}) = |a·x - b| / ‖a‖_*`.
    pub fn dual_norm_slice(self, a: &[f64]) -> f64 {
        match self {
            Norm::Euclidean => a.iter().map(|c| c * c).sum::<f64>().sqrt(),
            Norm::SupNorm => a.iter().map(|c| c.abs()).sum(),
        }
    }

    /// Operator norm induced by this vector norm.
    ///
    /// Sup norm: maximum absolute row sum (exact). Euclidean: largest singular
    /// value, closed form up to 2×2 and power iteration on `MᵀM` beyond.
    pub fn operator_norm(self, m: &DMatrix<f64>) -> f64 {
        match self {
            Norm::SupNorm => m.row_iter().map(|r| r.iter().map(|c| c.abs()).sum::<f64>()).fold(0.0, f64::max),
            Norm::Euclidean => spectral_norm(m),
        }
    }
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    match (m.nrows(), m.ncols()) {
        (0, _) | (_, 0) => 0.0,
        (1, _) | (_, 1) => m.iter().map(|c| c * c).sum::<f64>().sqrt(),
        (2, 2) => {
            let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
            let s = a * a + b * b + c * c + d * d;
            let det = a * d - b * c;
            let disc = (s * s - 4.0 * det * det).max(0.0).sqrt();
            ((s + disc) / 2.0).sqrt()
        }
        _ => power_iteration(m).unwrap_or_else(|| nalgebra::linalg::SVD::new(m.clone(), false, false).singular_values.max()),
    }
}

fn power_iteration(m: &DMatrix<f64>) -> Option<f64> {
    let gram = m.transpose() * m;
    let n = gram.nrows();
    // deterministic start with no special alignment
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * (i as f64 + 1.0).sqrt());
    v /= v.norm();
    let scale = gram.abs().max().max(f64::MIN_POSITIVE);
    for _ in 0..POWER_ITERATION_MAX {
        let w = &gram * &v;
        let lambda = v.dot(&w);
        let wn = w.norm();
        if wn == 0.0 {
            return Some(0.0);
        }
        let residual = (&w - &v * lambda).norm();
        if residual <= POWER_ITERATION_RESIDUAL * scale {
            return Some(lambda.max(0.0).sqrt());
        }
        v = w / wn;
    }
    None
}
