//! Detection of times where `t ↦ F_t(x)` has distinct one-sided derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semigroup::SemigroupFamily;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corner {
    pub t: f64,
    /// Norm of the jump `right_slope − left_slope`.
    pub jump: f64,
    /// First coordinate of the one-sided derivatives.
    pub left_slope: f64,
    pub right_slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CornerConfig {
    pub step: f64,
    pub jump_threshold: f64,
}

impl Default for CornerConfig {
    fn default() -> Self {
        CornerConfig {
            step: 1e-5,
            jump_threshold: 1e-3,
        }
    }
}

struct Path<'a> {
    family: &'a SemigroupFamily,
    x: &'a [f64],
}

impl Path<'_> {
    fn at(&self, t: f64) -> Result<Vec<f64>> {
        self.family.eval(t, self.x)
    }

    /// `(u(t + s·h) − u(t)) / (s·h)` for `s = ±1`.
    fn one_sided(&self, t: f64, h: f64, s: f64) -> Result<Vec<f64>> {
        let (a, b) = (self.at(t)?, self.at(t + s * h)?);
        Ok(b.iter().zip(&a).map(|(b, a)| (b - a) / (s * h)).collect())
    }

    /// One-sided slope with two Richardson levels over `h, h/2, h/4`.
    fn richardson(&self, t: f64, h: f64, s: f64) -> Result<Vec<f64>> {
        let d1 = self.one_sided(t, h, s)?;
        let d2 = self.one_sided(t, h / 2.0, s)?;
        let d4 = self.one_sided(t, h / 4.0, s)?;
        Ok((0..d1.len()).map(|i| (8.0 * d4[i] - 6.0 * d2[i] + d1[i]) / 3.0).collect())
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

/// Scans `t ↦ F_t(x)` over an increasing grid and reports every time at
/// which the one-sided derivatives differ by more than `jump_threshold`.
///
/// Candidate brackets come from slope jumps at grid nodes (probe width
/// `step`) and from slope changes across grid cells in excess of the change
/// seen in the neighbouring cells. Each bracket is bisected by classifying
/// the forward slope at the midpoint against the slopes at the bracket
/// ends, and the corner is kept only if the Richardson-refined one-sided
/// slopes there still jump. Bisection assumes the jump dominates the slope
/// variation across a bracket.
pub fn detect_corners(family: &SemigroupFamily, x: &[f64], t_grid: &[f64], step: f64, jump_threshold: f64) -> Result<Vec<Corner>> {
    if !(step > 0.0) || !(jump_threshold > 0.0) {
        return Err(Error::BadParameter("step and jump threshold must be positive".into()));
    }
    if t_grid.len() < 2 || t_grid[0] < 0.0 || t_grid.windows(2).any(|w| !(w[1] - w[0] > 2.0 * step)) {
        return Err(Error::BadParameter(
            "time grid must be nonnegative and increasing with spacing above 2·step".into(),
        ));
    }
    let path = Path { family, x };
    let n = t_grid.len();
    let right: Vec<Vec<f64>> = t_grid.iter().map(|&t| path.one_sided(t, step, 1.0)).collect::<Result<_>>()?;
    let left: Vec<Vec<f64>> = t_grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            if t >= step {
                path.one_sided(t, step, -1.0)
            } else {
                Ok(right[i].clone())
            }
        })
        .collect::<Result<_>>()?;

    let mut brackets: Vec<(usize, usize)> = Vec::new();
    for i in 1..n - 1 {
        if dist(&right[i], &left[i]) > jump_threshold {
            brackets.push((i - 1, i + 1));
        }
    }
    // change of slope across cell i, net of what the neighbouring cells show
    let change: Vec<f64> = (0..n - 1).map(|i| dist(&left[i + 1], &right[i])).collect();
    for i in 0..n - 1 {
        let nb: Vec<f64> = [i.checked_sub(1), (i + 1 < n - 1).then_some(i + 1)]
            .into_iter()
            .flatten()
            .map(|j| change[j])
            .collect();
        let background = if nb.is_empty() {
            0.0
        } else {
            nb.iter().sum::<f64>() / nb.len() as f64
        };
        if change[i] - background > jump_threshold {
            brackets.push((i, i + 1));
        }
    }
    brackets.sort_unstable();
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (a, b) in brackets {
        match merged.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }

    let mut corners: Vec<Corner> = Vec::new();
    for (a, b) in merged {
        let (mut lo, mut hi) = (t_grid[a], t_grid[b]);
        let s_left = right[a].clone();
        let s_right = left[b].clone();
        if dist(&s_left, &s_right) <= jump_threshold {
            continue;
        }
        while hi - lo > step / 16.0 {
            let m = 0.5 * (lo + hi);
            let s = path.one_sided(m, step, 1.0)?;
            if dist(&s, &s_left) <= dist(&s, &s_right) {
                lo = m;
            } else {
                hi = m;
            }
        }
        // the probe at lo stays left of the corner by more than step/2
        let t = 0.5 * (lo + hi) + 0.5 * step;
        let offset = step / 8.0;
        let l = path.richardson(t - offset, step, -1.0)?;
        let r = path.richardson(t + offset, step, 1.0)?;
        let jump = dist(&l, &r);
        if jump > jump_threshold && corners.last().is_none_or(|c| t - c.t > 2.0 * step) {
            corners.push(Corner {
                t,
                jump,
                left_slope: l[0],
                right_slope: r[0],
            });
        }
    }
    Ok(corners)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;
    use crate::semigroup::{example31_family, linear_family};
    use crate::Operator;

    fn grid() -> Vec<f64> {
        (0..=200).map(|i| i as f64 * 0.005).collect()
    }

    #[test]
    fn corner_at_log_two_x() {
        let f = example31_family();
        let c = detect_corners(&f, &[0.8], &grid(), 1e-5, 1e-3).unwrap();
        assert_eq!(c.len(), 1);
        let t0 = 1.6f64.ln();
        assert!((c[0].t - t0).abs() <= 2e-5, "{}", c[0].t);
        assert!((c[0].left_slope + 0.5).abs() < 1e-4, "{}", c[0].left_slope);
        assert!((c[0].right_slope + 1.0).abs() < 1e-4, "{}", c[0].right_slope);
    }

    #[test]
    fn smooth_paths_have_none() {
        let f = example31_family();
        assert!(detect_corners(&f, &[0.3], &grid(), 1e-5, 1e-3).unwrap().is_empty());
        let d = DomainSpec::interval(-2.0, 2.0).unwrap();
        let lin = linear_family(Operator::from_element(1, 1, -1.0), d).unwrap();
        assert!(detect_corners(&lin, &[1.5], &grid(), 1e-5, 1e-3).unwrap().is_empty());
    }
}
