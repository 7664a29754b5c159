//! Computable domains: open, connected subsets of a finite-dimensional
//! normed space with membership and boundary-distance oracles.

mod path;
mod sample;
mod shape;
mod subset;

pub use path::{
    ell_infinity_example_domain, ell_infinity_point, ell_infinity_refutation, finite_path_length_certificate, path_length,
    shortest_path_bound, PathCertificate, PathCurve, PathLengthOutcome, RefutationRow,
};
pub use sample::{sample, Pair, SampleDescriptor, SampleSet, SampleStrategy};
pub use shape::{box_covered, AxisBox, Piece, Polytope};
pub use subset::{inflate, SubsetShape, SubsetSpec};

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norm::Norm;

/// Default probe spacing for segment validation, relative to segment length.
pub const DEFAULT_PROBE_SPACING: f64 = 1e-3;

/// Bisection steps used to sharpen boundary distances on box unions.
const COVER_BISECTIONS: usize = 60;
const COVER_BUDGET: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Interval { lo: f64, hi: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    UnionOfBoxes { boxes: Vec<AxisBox> },
    UnionOfConvexPolytopes { polytopes: Vec<Polytope> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub ambient_dim: usize,
    #[serde(default)]
    pub norm: Norm,
    pub shape: Shape,
    #[serde(default = "default_probe_spacing")]
    pub probe_spacing: f64,
    /// Set when the domain is a member of a named parametric family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<DomainFamily>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum DomainFamily {
    /// Truncation to `truncation` coordinates of the union of the boxes
    /// `D_j^a` in sup-norm sequence space.
    EllInfinity { a: f64, truncation: usize },
}

fn default_probe_spacing() -> f64 {
    DEFAULT_PROBE_SPACING
}

impl DomainSpec {
    pub fn new(norm: Norm, shape: Shape) -> Result<Self> {
        let ambient_dim = match &shape {
            Shape::Interval { .. } => 1,
            Shape::Ball { center, .. } => center.len(),
            Shape::Box { lo, .. } => lo.len(),
            Shape::UnionOfBoxes { boxes } => boxes.first().map_or(0, AxisBox::dim),
            Shape::UnionOfConvexPolytopes { polytopes } => polytopes.first().map_or(0, Polytope::dim),
        };
        let d = Self {
            ambient_dim,
            norm,
            shape,
            probe_spacing: DEFAULT_PROBE_SPACING,
            family: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(Norm::Euclidean, Shape::Interval { lo, hi })
    }

    pub fn ball(norm: Norm, center: Vec<f64>, radius: f64) -> Result<Self> {
        Self::new(norm, Shape::Ball { center, radius })
    }

    pub fn unit_ball(norm: Norm, dim: usize) -> Result<Self> {
        Self::ball(norm, vec![0.0; dim], 1.0)
    }

    pub fn boxed(norm: Norm, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        Self::new(norm, Shape::Box { lo, hi })
    }

    pub fn union_of_boxes(norm: Norm, boxes: Vec<AxisBox>) -> Result<Self> {
        Self::new(norm, Shape::UnionOfBoxes { boxes })
    }

    pub fn union_of_polytopes(norm: Norm, polytopes: Vec<Polytope>) -> Result<Self> {
        Self::new(norm, Shape::UnionOfConvexPolytopes { polytopes })
    }

    pub fn with_probe_spacing(mut self, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0 && spacing < 1.0) {
            return Err(Error::BadParameter(format!("probe spacing {spacing} not in (0, 1)")));
        }
        self.probe_spacing = spacing;
        Ok(self)
    }

    /// Checks shape parameters, dimensions and connectedness. Called by the
    /// constructors; call it after deserializing.
    pub fn validate(&self) -> Result<()> {
        let n = self.ambient_dim;
        if n == 0 {
            return Err(Error::BadParameter("ambient dimension must be positive".into()));
        }
        let dim_ok = |got: usize| {
            if got == n {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { expected: n, got })
            }
        };
        if !(self.probe_spacing > 0.0 && self.probe_spacing < 1.0) {
            return Err(Error::BadParameter("probe spacing must lie in (0, 1)".into()));
        }
        match &self.shape {
            Shape::Interval { lo, hi } => {
                dim_ok(1)?;
                AxisBox::new(vec![*lo], vec![*hi])?;
            }
            Shape::Ball { center, radius } => {
                dim_ok(center.len())?;
                if !(*radius > 0.0 && radius.is_finite()) || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::BadParameter(format!("ball radius {radius} must be positive")));
                }
            }
            Shape::Box { lo, hi } => {
                dim_ok(lo.len())?;
                AxisBox::new(lo.clone(), hi.clone())?;
            }
            Shape::UnionOfBoxes { boxes } => {
                if boxes.is_empty() {
                    return Err(Error::BadParameter("union of boxes needs at least one box".into()));
                }
                for b in boxes {
                    dim_ok(b.dim())?;
                    AxisBox::new(b.lo.clone(), b.hi.clone())?;
                }
            }
            Shape::UnionOfConvexPolytopes { polytopes } => {
                if polytopes.is_empty() {
                    return Err(Error::BadParameter("union of polytopes needs at least one piece".into()));
                }
                for p in polytopes {
                    Polytope::new(p.normals.clone(), p.offsets.clone())?;
                    dim_ok(p.dim())?;
                    p.bounding_box()?;
                    let rows = p.rows();
                    if crate::lp::chebyshev_center(&rows, n, self.norm, 1e6)?.is_none_or(|(_, r)| r <= 0.0) {
                        return Err(Error::BadParameter("polytope has empty interior".into()));
                    }
                }
            }
        }
        if self.is_union() {
            let pieces = self.pieces()?;
            let (labels, count) = self.components(&pieces)?;
            drop(labels);
            if count != 1 {
                return Err(Error::BadParameter(format!("union is not connected ({count} components)")));
            }
        }
        Ok(())
    }

    pub fn is_union(&self) -> bool {
        matches!(self.shape, Shape::UnionOfBoxes { .. } | Shape::UnionOfConvexPolytopes { .. })
    }

    pub fn is_convex(&self) -> bool {
        match &self.shape {
            Shape::UnionOfBoxes { boxes } => boxes.len() == 1,
            Shape::UnionOfConvexPolytopes { polytopes } => polytopes.len() == 1,
            _ => true,
        }
    }

    /// Convex pieces of the domain. Euclidean balls have no polyhedral piece
    /// and are reported as `Unsupported`.
    pub fn pieces(&self) -> Result<Vec<Piece>> {
        Ok(match &self.shape {
            Shape::Interval { lo, hi } => vec![Piece::Box(AxisBox {
                lo: vec![*lo],
                hi: vec![*hi],
            })],
            Shape::Box { lo, hi } => vec![Piece::Box(AxisBox {
                lo: lo.clone(),
                hi: hi.clone(),
            })],
            Shape::Ball { center, radius } => match (self.norm, center.len()) {
                (Norm::SupNorm, _) | (_, 1) => vec![Piece::Box(AxisBox::cube(center, *radius))],
                _ => return Err(Error::Unsupported("euclidean ball has no polyhedral piece".into())),
            },
            Shape::UnionOfBoxes { boxes } => boxes.iter().cloned().map(Piece::Box).collect(),
            Shape::UnionOfConvexPolytopes { polytopes } => polytopes.iter().cloned().map(Piece::Polytope).collect(),
        })
    }

    /// Connected-component label of every piece via the overlap graph.
    pub(crate) fn components(&self, pieces: &[Piece]) -> Result<(Vec<usize>, usize)> {
        let mut uf = UnionFind::new(pieces.len());
        for i in 0..pieces.len() {
            for j in (i + 1)..pieces.len() {
                if pieces[i].overlap(&pieces[j], self.norm)?.is_some() {
                    uf.union(i, j);
                }
            }
        }
        let labels = uf.into_labeling();
        let mut distinct = labels.clone();
        distinct.sort_unstable();
        distinct.dedup();
        Ok((labels, distinct.len()))
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.ambient_dim || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.shape {
            Shape::Interval { lo, hi } => *lo < x[0] && x[0] < *hi,
            Shape::Ball { center, radius } => self.norm.dist_slices(x, center) < *radius,
            Shape::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| l < v && v < h),
            Shape::UnionOfBoxes { boxes } => boxes.iter().any(|b| b.contains(x)),
            Shape::UnionOfConvexPolytopes { polytopes } => polytopes.iter().any(|p| p.contains(x)),
        }
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        if x.len() != self.ambient_dim || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.shape {
            Shape::Interval { lo, hi } => *lo <= x[0] && x[0] <= *hi,
            Shape::Ball { center, radius } => self.norm.dist_slices(x, center) <= *radius,
            Shape::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| l <= v && v <= h),
            Shape::UnionOfBoxes { boxes } => boxes.iter().any(|b| b.contains_closed(x)),
            Shape::UnionOfConvexPolytopes { polytopes } => polytopes.iter().any(|p| p.contains_closed(x)),
        }
    }

    /// Distance from `x` to the boundary in the domain norm.
    ///
    /// Exact for convex shapes. For unions it is a certified lower bound: the
    /// deepest piece containing `x`, sharpened on box unions by finding the
    /// largest sup-norm cube around `x` still covered by the union (exact in
    /// the sup norm, and a lower bound for the Euclidean norm).
    pub fn dist_to_boundary(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        if !self.contains_closed(x) {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
        if !self.contains(x) {
            return Ok(0.0);
        }
        Ok(match &self.shape {
            Shape::Interval { lo, hi } => (x[0] - lo).min(hi - x[0]),
            Shape::Ball { center, radius } => radius - self.norm.dist_slices(x, center),
            Shape::Box { lo, hi } => AxisBox {
                lo: lo.clone(),
                hi: hi.clone(),
            }
            .depth(x),
            Shape::UnionOfBoxes { boxes } => {
                let lower = boxes.iter().filter(|b| b.contains(x)).map(|b| b.depth(x)).fold(0.0, f64::max);
                let upper = self.bounding_box()?.depth(x);
                covered_radius(boxes, x, lower, upper)
            }
            Shape::UnionOfConvexPolytopes { polytopes } => polytopes
                .iter()
                .filter(|p| p.contains(x))
                .map(|p| p.depth(x, self.norm))
                .fold(0.0, f64::max),
        })
    }

    pub fn bounding_box(&self) -> Result<AxisBox> {
        Ok(match &self.shape {
            Shape::Interval { lo, hi } => AxisBox {
                lo: vec![*lo],
                hi: vec![*hi],
            },
            Shape::Ball { center, radius } => AxisBox::cube(center, *radius),
            Shape::Box { lo, hi } => AxisBox {
                lo: lo.clone(),
                hi: hi.clone(),
            },
            Shape::UnionOfBoxes { boxes } => hull(boxes.iter().cloned()),
            Shape::UnionOfConvexPolytopes { polytopes } => hull(polytopes.iter().map(|p| p.bounding_box()).collect::<Result<Vec<_>>>()?),
        })
    }

    /// Half the norm-diameter of the bounding box; no point of the domain is
    /// farther than this from the boundary.
    pub fn outer_radius(&self) -> Result<f64> {
        Ok(0.5 * self.bounding_box()?.diameter(self.norm))
    }

    /// Checks that the closed segment `[a, b]` lies in the domain: exactly for
    /// convex shapes (and for unions when one piece holds both endpoints),
    /// otherwise by probing at spacing `probe_spacing × length`. Returns the
    /// first offending probe.
    pub fn segment_inside(&self, a: &[f64], b: &[f64]) -> std::result::Result<(), Vec<f64>> {
        if !self.contains(a) {
            return Err(a.to_vec());
        }
        if !self.contains(b) {
            return Err(b.to_vec());
        }
        if self.is_convex() {
            return Ok(());
        }
        let one_piece = match &self.shape {
            Shape::UnionOfBoxes { boxes } => boxes.iter().any(|p| p.contains(a) && p.contains(b)),
            Shape::UnionOfConvexPolytopes { polytopes } => polytopes.iter().any(|p| p.contains(a) && p.contains(b)),
            _ => true,
        };
        if one_piece {
            return Ok(());
        }
        let steps = (1.0 / self.probe_spacing).ceil() as usize;
        for k in 1..steps {
            let s = k as f64 / steps as f64;
            let p: Vec<f64> = a.iter().zip(b).map(|(u, v)| u + s * (v - u)).collect();
            if !self.contains(&p) {
                return Err(p);
            }
        }
        Ok(())
    }
}

fn hull(boxes: impl IntoIterator<Item = AxisBox>) -> AxisBox {
    let mut it = boxes.into_iter();
    let mut h = it.next().expect("validated nonempty union");
    for b in it {
        for k in 0..h.dim() {
            h.lo[k] = h.lo[k].min(b.lo[k]);
            h.hi[k] = h.hi[k].max(b.hi[k]);
        }
    }
    h
}

/// Largest `r` in `[lower, upper]` (up to bisection resolution, rounded
/// down) such that the closed sup-cube of radius `r` about `x` is covered.
fn covered_radius(boxes: &[AxisBox], x: &[f64], lower: f64, upper: f64) -> f64 {
    let (mut lo, mut hi) = (lower, upper);
    if hi <= lo {
        return lo;
    }
    for _ in 0..COVER_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if box_covered(&AxisBox::cube(x, mid), boxes, COVER_BUDGET) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Largest `r ≤ upper` such that the closed sup-norm `r`-neighbourhood of the
/// box `target` is covered by `boxes`; bisection from `lower`, which must be
/// known to be covered.
pub(crate) fn covered_inflation(boxes: &[AxisBox], target: &AxisBox, lower: f64, upper: f64) -> f64 {
    let (mut lo, mut hi) = (lower, upper);
    for _ in 0..COVER_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if box_covered(&target.inflate(mid), boxes, COVER_BUDGET) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn interval_boundary_distance() {
        let d = DomainSpec::interval(-1.0, 1.0).unwrap();
        assert_eq!(d.dist_to_boundary(&[0.0]).unwrap(), 1.0);
        assert_relative_eq!(d.dist_to_boundary(&[0.8]).unwrap(), 0.2, epsilon = 1e-15);
        assert_eq!(d.dist_to_boundary(&[1.0]).unwrap(), 0.0);
        assert!(matches!(d.dist_to_boundary(&[1.5]), Err(Error::OutsideDomain { .. })));
        assert!(matches!(d.dist_to_boundary(&[0.0, 0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn ball_distance_in_both_norms() {
        let e = DomainSpec::unit_ball(Norm::Euclidean, 2).unwrap();
        assert_relative_eq!(e.dist_to_boundary(&[0.3, 0.4]).unwrap(), 0.5, epsilon = 1e-15);
        let s = DomainSpec::unit_ball(Norm::SupNorm, 2).unwrap();
        assert_relative_eq!(s.dist_to_boundary(&[0.3, 0.4]).unwrap(), 0.6, epsilon = 1e-15);
    }

    #[test]
    fn disconnected_union_is_rejected() {
        let a = AxisBox::new(vec![0.0], vec![1.0]).unwrap();
        let b = AxisBox::new(vec![1.0], vec![2.0]).unwrap();
        assert!(DomainSpec::union_of_boxes(Norm::SupNorm, vec![a, b]).is_err());
    }

    #[test]
    fn union_distance_sees_across_interfaces() {
        // two overlapping intervals; at x = 1 each piece alone gives 0.2
        let a = AxisBox::new(vec![0.0], vec![1.2]).unwrap();
        let b = AxisBox::new(vec![0.8], vec![2.0]).unwrap();
        let d = DomainSpec::union_of_boxes(Norm::SupNorm, vec![a, b]).unwrap();
        assert_relative_eq!(d.dist_to_boundary(&[1.0]).unwrap(), 1.0, epsilon = 1e-12);
        assert!(d.dist_to_boundary(&[1.0]).unwrap() <= 1.0);
    }

    #[test]
    fn l_shape_segment_validation() {
        let a = AxisBox::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
        let b = AxisBox::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        let d = DomainSpec::union_of_boxes(Norm::Euclidean, vec![a, b]).unwrap();
        assert!(d.segment_inside(&[1.8, 0.5], &[0.5, 1.8]).is_err());
        assert!(d.segment_inside(&[1.8, 0.5], &[0.5, 0.5]).is_ok());
        assert!(d.segment_inside(&[1.5, 0.5], &[0.5, 1.4]).is_ok());
        assert!(!d.is_convex());
    }

    #[test]
    fn polytope_union_membership() {
        let tri = Polytope::new(vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]], vec![0.0, 0.0, 1.0]).unwrap();
        let d = DomainSpec::union_of_polytopes(Norm::Euclidean, vec![tri]).unwrap();
        assert!(d.contains(&[0.2, 0.2]));
        assert!(!d.contains(&[0.6, 0.6]));
        let r = d.dist_to_boundary(&[0.2, 0.2]).unwrap();
        assert_relative_eq!(r, 0.2, epsilon = 1e-12);
    }
}
