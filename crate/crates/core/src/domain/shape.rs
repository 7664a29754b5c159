//! Convex building blocks of domains: open axis-aligned boxes and open
//! H-polytopes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, Rows};
use crate::norm::Norm;

/// Open box `{x : lo_k < x_k < hi_k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.is_empty() || lo.iter().zip(&hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::BadParameter(format!("degenerate box lo = {lo:?}, hi = {hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    /// Sup-norm ball, which is a box.
    pub fn cube(center: &[f64], radius: f64) -> Self {
        Self {
            lo: center.iter().map(|c| c - radius).collect(),
            hi: center.iter().map(|c| c + radius).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| l < v && v < h)
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| l <= v && v <= h)
    }

    /// Distance from an inside point to the complement. The nearest
    /// boundary point lies on a face, so the value is the same for both norms.
    pub fn depth(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (l, h))| (v - l).min(h - v))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn diameter(&self, norm: Norm) -> f64 {
        let ext: Vec<f64> = self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect();
        norm.norm_slice(&ext)
    }

    pub fn intersect(&self, other: &AxisBox) -> Option<AxisBox> {
        let lo: Vec<f64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        lo.iter().zip(&hi).all(|(l, h)| l < h).then_some(AxisBox { lo, hi })
    }

    /// Per-coordinate gaps between the closures (zero where they overlap).
    fn gaps(&self, other: &AxisBox) -> Vec<f64> {
        (0..self.dim())
            .map(|k| (other.lo[k] - self.hi[k]).max(self.lo[k] - other.hi[k]).max(0.0))
            .collect()
    }

    pub fn set_distance(&self, other: &AxisBox, norm: Norm) -> f64 {
        norm.norm_slice(&self.gaps(other))
    }

    pub fn point_distance(&self, x: &[f64], norm: Norm) -> f64 {
        let g: Vec<f64> = x
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (l, h))| (l - v).max(v - h).max(0.0))
            .collect();
        norm.norm_slice(&g)
    }

    /// Closest point of the closure, coordinate clamp. Exact for both norms.
    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (l, h))| v.clamp(*l, *h))
            .collect()
    }

    pub fn inflate(&self, r: f64) -> AxisBox {
        AxisBox {
            lo: self.lo.iter().map(|v| v - r).collect(),
            hi: self.hi.iter().map(|v| v + r).collect(),
        }
    }

    pub fn rows(&self) -> Rows {
        let n = self.dim();
        let mut rows = Rows::default();
        for k in 0..n {
            let mut up = vec![0.0; n];
            up[k] = 1.0;
            let mut down = vec![0.0; n];
            down[k] = -1.0;
            rows.normals.push(up);
            rows.offsets.push(self.hi[k]);
            rows.normals.push(down);
            rows.offsets.push(-self.lo[k]);
        }
        rows
    }

    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..(1usize << n))
            .map(|mask| (0..n).map(|k| if mask >> k & 1 == 1 { self.hi[k] } else { self.lo[k] }).collect())
            .collect()
    }
}

/// Open polytope `{x : a_i·x < b_i}`; must be bounded with nonempty interior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    pub normals: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
}

impl Polytope {
    pub fn new(normals: Vec<Vec<f64>>, offsets: Vec<f64>) -> Result<Self> {
        if normals.len() != offsets.len() || normals.is_empty() {
            return Err(Error::BadParameter("polytope needs matching nonempty normals/offsets".into()));
        }
        let n = normals[0].len();
        if normals.iter().any(|a| a.len() != n || a.iter().all(|c| *c == 0.0)) {
            return Err(Error::BadParameter(
                "polytope normals must be nonzero with a common dimension".into(),
            ));
        }
        Ok(Self { normals, offsets })
    }

    pub fn dim(&self) -> usize {
        self.normals[0].len()
    }

    pub fn rows(&self) -> Rows {
        Rows {
            normals: self.normals.clone(),
            offsets: self.offsets.clone(),
        }
    }

    fn slack(&self, x: &[f64]) -> impl Iterator<Item = (f64, &Vec<f64>)> + '_ {
        let x = x.to_vec();
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(move |(a, b)| (b - a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>(), a))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.slack(x).all(|(s, _)| s > 0.0)
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        self.slack(x).all(|(s, _)| s >= 0.0)
    }

    pub fn depth(&self, x: &[f64], norm: Norm) -> f64 {
        self.slack(x)
            .map(|(s, a)| s / norm.dual_norm_slice(a))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn bounding_box(&self) -> Result<AxisBox> {
        let (lo, hi) = lp::bounding_box(&self.rows(), self.dim())?;
        Ok(AxisBox { lo, hi })
    }
}

/// A convex piece of a domain decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Piece {
    Box(AxisBox),
    Polytope(Polytope),
}

impl Piece {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Piece::Box(b) => b.contains(x),
            Piece::Polytope(p) => p.contains(x),
        }
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        match self {
            Piece::Box(b) => b.contains_closed(x),
            Piece::Polytope(p) => p.contains_closed(x),
        }
    }

    pub fn depth(&self, x: &[f64], norm: Norm) -> f64 {
        match self {
            Piece::Box(b) => b.depth(x),
            Piece::Polytope(p) => p.depth(x, norm),
        }
    }

    pub fn rows(&self) -> Rows {
        match self {
            Piece::Box(b) => b.rows(),
            Piece::Polytope(p) => p.rows(),
        }
    }

    /// The piece with every face pushed inward by `eta` (distance in `norm`);
    /// `None` when nothing is left.
    pub fn shrink(&self, eta: f64, norm: Norm) -> Result<Option<Piece>> {
        Ok(match self {
            Piece::Box(b) => {
                let s = b.inflate(-eta);
                s.lo.iter().zip(&s.hi).all(|(l, h)| l < h).then_some(Piece::Box(s))
            }
            Piece::Polytope(p) => {
                let offsets = p
                    .normals
                    .iter()
                    .zip(&p.offsets)
                    .map(|(a, b)| b - eta * norm.dual_norm_slice(a))
                    .collect();
                let s = Polytope {
                    normals: p.normals.clone(),
                    offsets,
                };
                lp::chebyshev_center(&s.rows(), s.dim(), norm, 1e6)?
                    .filter(|(_, r)| *r > 0.0)
                    .map(|_| Piece::Polytope(s))
            }
        })
    }

    pub fn bounding_box(&self) -> Result<AxisBox> {
        match self {
            Piece::Box(b) => Ok(b.clone()),
            Piece::Polytope(p) => p.bounding_box(),
        }
    }

    /// Upper bound on the diameter (exact for boxes).
    pub fn diameter_bound(&self, norm: Norm) -> Result<f64> {
        Ok(self.bounding_box()?.diameter(norm))
    }

    /// Interior point of the open intersection with `other`, with its
    /// inscribed radius; `None` when the intersection has empty interior.
    pub fn overlap(&self, other: &Piece, norm: Norm) -> Result<Option<(Vec<f64>, f64)>> {
        if let (Piece::Box(a), Piece::Box(b)) = (self, other) {
            return Ok(a.intersect(b).map(|i| {
                let r = i.depth(&i.center());
                (i.center(), r)
            }));
        }
        let rows = self.rows().joined(&other.rows());
        let dim = rows.dim();
        Ok(lp::chebyshev_center(&rows, dim, norm, 1e6)?.filter(|(_, r)| *r > 1e-12))
    }
}

/// Whether the closed box `target` is covered by the union of open boxes.
///
/// Subtracts each piece in turn, keeping closed remnants (degenerate slabs on
/// piece faces included, so touching faces never count as covered). Answers
/// `false` when the remnant count exceeds `budget`.
pub fn box_covered(target: &AxisBox, pieces: &[AxisBox], budget: usize) -> bool {
    let mut remnants = vec![target.clone()];
    for p in pieces {
        let mut next = Vec::with_capacity(remnants.len());
        for r in remnants {
            subtract_open(&r, p, &mut next);
            if next.len() > budget {
                return false;
            }
        }
        remnants = next;
        if remnants.is_empty() {
            return true;
        }
    }
    remnants.is_empty()
}

fn subtract_open(r: &AxisBox, p: &AxisBox, out: &mut Vec<AxisBox>) {
    let n = r.dim();
    if (0..n).any(|k| r.hi[k] <= p.lo[k] || r.lo[k] >= p.hi[k]) {
        out.push(r.clone());
        return;
    }
    let mut core = r.clone();
    for k in 0..n {
        if core.lo[k] <= p.lo[k] {
            let mut slab = core.clone();
            slab.hi[k] = p.lo[k];
            out.push(slab);
            core.lo[k] = p.lo[k];
        }
        if core.hi[k] >= p.hi[k] {
            let mut slab = core.clone();
            slab.lo[k] = p.hi[k];
            out.push(slab);
            core.hi[k] = p.hi[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(lo: &[f64], hi: &[f64]) -> AxisBox {
        AxisBox::new(lo.to_vec(), hi.to_vec()).unwrap()
    }

    #[test]
    fn coverage_by_overlapping_intervals() {
        let pieces = [b(&[0.0], &[1.2]), b(&[0.8], &[2.0])];
        assert!(box_covered(&b(&[0.5], &[1.5]), &pieces, 1000));
        assert!(!box_covered(&b(&[0.5], &[2.0]), &pieces, 1000));
    }

    #[test]
    fn touching_faces_do_not_cover() {
        let pieces = [b(&[0.0], &[1.0]), b(&[1.0], &[2.0])];
        assert!(!box_covered(&b(&[0.5], &[1.5]), &pieces, 1000));
    }

    #[test]
    fn l_shape_coverage() {
        let pieces = [b(&[0.0, 0.0], &[2.0, 1.0]), b(&[0.0, 0.0], &[1.0, 2.0])];
        assert!(box_covered(&b(&[0.2, 0.2], &[0.9, 1.8]), &pieces, 1000));
        assert!(!box_covered(&b(&[0.2, 0.2], &[1.1, 1.1]), &pieces, 1000));
    }

    #[test]
    fn box_distances() {
        let a = b(&[0.0, 0.0], &[1.0, 1.0]);
        let c = b(&[2.0, 3.0], &[4.0, 4.0]);
        assert_eq!(a.set_distance(&c, Norm::SupNorm), 2.0);
        assert!((a.set_distance(&c, Norm::Euclidean) - 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(a.point_distance(&[0.5, 3.0], Norm::SupNorm), 2.0);
    }

    #[test]
    fn polytope_overlap_uses_lp() {
        let tri = Piece::Polytope(Polytope::new(vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]], vec![0.0, 0.0, 1.0]).unwrap());
        let far = Piece::Box(b(&[2.0, 2.0], &[3.0, 3.0]));
        let near = Piece::Box(b(&[0.2, 0.2], &[3.0, 3.0]));
        assert!(tri.overlap(&far, Norm::Euclidean).unwrap().is_none());
        assert!(tri.overlap(&near, Norm::Euclidean).unwrap().is_some());
    }
}
