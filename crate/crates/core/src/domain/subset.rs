//! Subsets lying strictly inside a domain, and their μ-inflations.

use serde::{Deserialize, Serialize};

use super::shape::{box_covered, AxisBox, Piece};
use super::{covered_inflation, DomainSpec, Shape};
use crate::error::{Error, Result};
use crate::norm::Norm;

/// Vertex enumeration limit for margin computations on boxes.
const MAX_VERTEX_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubsetShape {
    Points {
        points: Vec<Vec<f64>>,
    },
    /// Closed box, or open when `open` is set.
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
        #[serde(default)]
        open: bool,
    },
    /// Ball in the parent norm, closed unless `open` is set.
    Ball {
        center: Vec<f64>,
        radius: f64,
        #[serde(default)]
        open: bool,
    },
    /// Open union of convex pieces.
    Pieces {
        pieces: Vec<Piece>,
    },
    /// `{x : dist(x, core) < radius}`.
    Neighborhood {
        core: Box<SubsetShape>,
        radius: f64,
    },
}

impl SubsetShape {
    pub fn closed_box(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        SubsetShape::Box { lo, hi, open: false }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Self::closed_box(vec![lo], vec![hi])
    }

    pub fn point(x: Vec<f64>) -> Self {
        SubsetShape::Points { points: vec![x] }
    }

    fn dims(&self) -> Vec<usize> {
        match self {
            SubsetShape::Points { points } => points.iter().map(Vec::len).collect(),
            SubsetShape::Box { lo, hi, .. } => vec![lo.len(), hi.len()],
            SubsetShape::Ball { center, .. } => vec![center.len()],
            SubsetShape::Pieces { pieces } => pieces
                .iter()
                .map(|p| match p {
                    Piece::Box(b) => b.dim(),
                    Piece::Polytope(p) => p.dim(),
                })
                .collect(),
            SubsetShape::Neighborhood { core, .. } => core.dims(),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            SubsetShape::Points { points } => points.is_empty(),
            SubsetShape::Pieces { pieces } => pieces.is_empty(),
            SubsetShape::Neighborhood { core, .. } => core.is_empty(),
            _ => false,
        }
    }

    /// Distance from `x` to the subset. Exact except for polytope pieces under
    /// the Euclidean norm, where an LP lower bound is used.
    pub fn distance(&self, x: &[f64], norm: Norm) -> Result<f64> {
        Ok(match self {
            SubsetShape::Points { points } => points.iter().map(|p| norm.dist_slices(x, p)).fold(f64::INFINITY, f64::min),
            SubsetShape::Box { lo, hi, .. } => AxisBox {
                lo: lo.clone(),
                hi: hi.clone(),
            }
            .point_distance(x, norm),
            SubsetShape::Ball { center, radius, .. } => (norm.dist_slices(x, center) - radius).max(0.0),
            SubsetShape::Pieces { pieces } => {
                let mut best = f64::INFINITY;
                for p in pieces {
                    let d = match p {
                        Piece::Box(b) => b.point_distance(x, norm),
                        Piece::Polytope(poly) if poly.contains_closed(x) => 0.0,
                        Piece::Polytope(poly) => crate::lp::point_region_distance(x, &poly.rows(), norm)?,
                    };
                    best = best.min(d);
                }
                best
            }
            SubsetShape::Neighborhood { core, radius } => (core.distance(x, norm)? - radius).max(0.0),
        })
    }

    pub fn contains(&self, x: &[f64], norm: Norm) -> bool {
        match self {
            SubsetShape::Points { points } => points.iter().any(|p| p.as_slice() == x),
            SubsetShape::Box { lo, hi, open } => {
                let b = AxisBox {
                    lo: lo.clone(),
                    hi: hi.clone(),
                };
                if *open {
                    b.contains(x)
                } else {
                    b.contains_closed(x)
                }
            }
            SubsetShape::Ball { center, radius, open } => {
                let d = norm.dist_slices(x, center);
                if *open {
                    d < *radius
                } else {
                    d <= *radius
                }
            }
            SubsetShape::Pieces { pieces } => pieces.iter().any(|p| p.contains(x)),
            SubsetShape::Neighborhood { core, radius } => core.distance(x, norm).map(|d| d < *radius).unwrap_or(false),
        }
    }

    /// Axis box containing the closure of the subset.
    pub fn bounding_box(&self) -> Result<AxisBox> {
        Ok(match self {
            SubsetShape::Points { points } => {
                let first = points.first().ok_or(Error::EmptySample)?;
                let mut b = AxisBox {
                    lo: first.clone(),
                    hi: first.clone(),
                };
                for p in points {
                    for k in 0..p.len() {
                        b.lo[k] = b.lo[k].min(p[k]);
                        b.hi[k] = b.hi[k].max(p[k]);
                    }
                }
                b
            }
            SubsetShape::Box { lo, hi, .. } => AxisBox {
                lo: lo.clone(),
                hi: hi.clone(),
            },
            SubsetShape::Ball { center, radius, .. } => AxisBox::cube(center, *radius),
            SubsetShape::Pieces { pieces } => {
                let boxes = pieces.iter().map(Piece::bounding_box).collect::<Result<Vec<_>>>()?;
                let mut it = boxes.into_iter();
                let mut h = it.next().ok_or(Error::EmptySample)?;
                for b in it {
                    for k in 0..h.dim() {
                        h.lo[k] = h.lo[k].min(b.lo[k]);
                        h.hi[k] = h.hi[k].max(b.hi[k]);
                    }
                }
                h
            }
            SubsetShape::Neighborhood { core, radius } => core.bounding_box()?.inflate(*radius),
        })
    }
}

/// A subset strictly inside `parent`, with a certified margin
/// (a lower bound on `inf dist(x, ∂parent)` over the subset).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SubsetRepr")]
pub struct SubsetSpec {
    parent: DomainSpec,
    shape: SubsetShape,
    margin: f64,
}

#[derive(Deserialize)]
struct SubsetRepr {
    parent: DomainSpec,
    shape: SubsetShape,
}

impl TryFrom<SubsetRepr> for SubsetSpec {
    type Error = Error;
    fn try_from(r: SubsetRepr) -> Result<Self> {
        r.parent.validate()?;
        SubsetSpec::new(r.parent, r.shape)
    }
}

impl SubsetSpec {
    /// Builds the subset and recomputes its margin; fails with
    /// `MarginViolation` unless the margin is positive.
    pub fn new(parent: DomainSpec, shape: SubsetShape) -> Result<Self> {
        let n = parent.ambient_dim;
        if let Some(&got) = shape.dims().iter().find(|&&d| d != n) {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
        validate_shape(&shape)?;
        let margin = if shape.is_empty() {
            f64::INFINITY
        } else {
            certified_margin(&parent, &shape)?
        };
        if !(margin > 0.0) {
            return Err(Error::MarginViolation {
                required: f64::MIN_POSITIVE,
                available: margin.max(0.0),
            });
        }
        Ok(Self { parent, shape, margin })
    }

    pub fn parent(&self) -> &DomainSpec {
        &self.parent
    }

    pub fn shape(&self) -> &SubsetShape {
        &self.shape
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn norm(&self) -> Norm {
        self.parent.norm
    }

    pub fn dim(&self) -> usize {
        self.parent.ambient_dim
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.shape.contains(x, self.norm())
    }

    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        self.shape.distance(x, self.norm())
    }

    pub fn is_empty(&self) -> bool {
        self.shape.is_empty()
    }
}

fn validate_shape(shape: &SubsetShape) -> Result<()> {
    match shape {
        SubsetShape::Box { lo, hi, open } => {
            if lo.iter().zip(hi).any(|(l, h)| !(l <= h) || (*open && l == h)) {
                return Err(Error::BadParameter(format!("subset box lo = {lo:?}, hi = {hi:?}")));
            }
        }
        SubsetShape::Ball { radius, open, .. } => {
            if !(*radius >= 0.0) || (*open && *radius == 0.0) {
                return Err(Error::BadParameter(format!("subset ball radius {radius}")));
            }
        }
        SubsetShape::Neighborhood { core, radius } => {
            if !(*radius > 0.0) {
                return Err(Error::BadParameter(format!("neighborhood radius {radius}")));
            }
            validate_shape(core)?;
        }
        SubsetShape::Points { points } => {
            if points.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::BadParameter("non-finite subset point".into()));
            }
        }
        SubsetShape::Pieces { .. } => {}
    }
    Ok(())
}

/// Certified lower bound on `inf_{x ∈ subset} dist(x, ∂parent)`.
fn certified_margin(parent: &DomainSpec, shape: &SubsetShape) -> Result<f64> {
    match shape {
        SubsetShape::Points { points } => {
            let mut m = f64::INFINITY;
            for p in points {
                m = m.min(parent.dist_to_boundary(p)?);
            }
            Ok(m)
        }
        SubsetShape::Neighborhood { core, radius } => Ok(certified_margin(parent, core)? - radius),
        SubsetShape::Pieces { pieces } => {
            let mut m = f64::INFINITY;
            for p in pieces {
                let pm = match (p, &parent.shape) {
                    (Piece::Polytope(poly), Shape::UnionOfConvexPolytopes { .. }) => polytope_union_margin(parent, &poly.rows())?,
                    _ => box_margin(parent, &p.bounding_box()?)?,
                };
                m = m.min(pm);
            }
            Ok(m)
        }
        SubsetShape::Ball { center, radius, .. } => {
            if let Shape::Ball { center: c0, radius: r0 } = &parent.shape {
                if !parent.contains_closed(center) {
                    return Err(Error::OutsideDomain { point: center.clone() });
                }
                return Ok(r0 - parent.norm.dist_slices(center, c0) - radius);
            }
            // the sup-norm cube contains the ball, so its margin is a lower bound
            box_margin(parent, &AxisBox::cube(center, *radius))
        }
        SubsetShape::Box { lo, hi, .. } => box_margin(
            parent,
            &AxisBox {
                lo: lo.clone(),
                hi: hi.clone(),
            },
        ),
    }
}

/// Margin of the closed box `b` inside `parent`.
fn box_margin(parent: &DomainSpec, b: &AxisBox) -> Result<f64> {
    let vertex_min = |depth: &dyn Fn(&[f64]) -> Result<f64>| -> Result<f64> {
        if b.dim() > MAX_VERTEX_DIM {
            return Err(Error::Unsupported(format!("box margins above dimension {MAX_VERTEX_DIM}")));
        }
        let mut m = f64::INFINITY;
        for v in b.vertices() {
            m = m.min(depth(&v)?);
        }
        Ok(m)
    };
    match &parent.shape {
        // boundary distance is concave on a convex domain: its minimum over a
        // box sits at a vertex
        Shape::Interval { .. } | Shape::Box { .. } | Shape::Ball { .. } => vertex_min(&|v| parent.dist_to_boundary(v)),
        Shape::UnionOfBoxes { boxes } => {
            if !box_covered(b, boxes, 200_000) {
                return Ok(0.0);
            }
            let upper = parent.bounding_box()?.diameter(Norm::SupNorm);
            Ok(covered_inflation(boxes, b, 0.0, upper))
        }
        Shape::UnionOfConvexPolytopes { .. } => polytope_union_margin(parent, &b.rows()),
    }
}

/// Margin of a closed polytope region inside a union of polytopes: the best
/// depth within a single piece, via support functions.
pub(crate) fn polytope_union_margin(parent: &DomainSpec, region: &crate::lp::Rows) -> Result<f64> {
    let Shape::UnionOfConvexPolytopes { polytopes } = &parent.shape else {
        return Err(Error::Unsupported("support-function margin needs a polytope union".into()));
    };
    let mut best = 0.0f64;
    for p in polytopes {
        let mut m = f64::INFINITY;
        for (a, b) in p.normals.iter().zip(&p.offsets) {
            let h = crate::lp::support(region, a)?;
            m = m.min((b - h) / parent.norm.dual_norm_slice(a));
            if m <= best {
                break;
            }
        }
        best = best.max(m * (1.0 - crate::lp::LP_SAFETY));
    }
    Ok(best)
}

/// The μ-inflation `{x : dist(x, D̂) < μ}`, with its margin recomputed.
pub fn inflate(subset: &SubsetSpec, mu: f64) -> Result<SubsetSpec> {
    if !(mu > 0.0) {
        return Err(Error::BadParameter(format!("inflation radius {mu} must be positive")));
    }
    if mu >= subset.margin {
        return Err(Error::MarginViolation {
            required: mu,
            available: subset.margin,
        });
    }
    let norm = subset.norm();
    let boxy = norm == Norm::SupNorm || subset.dim() == 1;
    let neighborhood = || SubsetShape::Neighborhood {
        core: Box::new(subset.shape.clone()),
        radius: mu,
    };
    let shape = match &subset.shape {
        SubsetShape::Points { points } if points.len() == 1 => SubsetShape::Ball {
            center: points[0].clone(),
            radius: mu,
            open: true,
        },
        SubsetShape::Box { lo, hi, .. } if boxy => {
            let b = AxisBox {
                lo: lo.clone(),
                hi: hi.clone(),
            }
            .inflate(mu);
            SubsetShape::Box {
                lo: b.lo,
                hi: b.hi,
                open: true,
            }
        }
        SubsetShape::Ball { center, radius, .. } => SubsetShape::Ball {
            center: center.clone(),
            radius: radius + mu,
            open: true,
        },
        SubsetShape::Pieces { pieces } if boxy && pieces.iter().all(|p| matches!(p, Piece::Box(_))) => SubsetShape::Pieces {
            pieces: pieces
                .iter()
                .map(|p| match p {
                    Piece::Box(b) => Piece::Box(b.inflate(mu)),
                    other => other.clone(),
                })
                .collect(),
        },
        SubsetShape::Neighborhood { core, radius } => SubsetShape::Neighborhood {
            core: core.clone(),
            radius: radius + mu,
        },
        _ => neighborhood(),
    };
    let mut out = SubsetSpec::new(subset.parent.clone(), shape)?;
    // every point of the inflation is within μ of the subset
    out.margin = out.margin.max(subset.margin - mu);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn interval_inflation() {
        let d = DomainSpec::interval(-1.0, 1.0).unwrap();
        let s = SubsetSpec::new(d, SubsetShape::interval(-0.5, 0.5)).unwrap();
        assert_relative_eq!(s.margin(), 0.5);
        let i = inflate(&s, 0.3).unwrap();
        match i.shape() {
            SubsetShape::Box { lo, hi, open } => {
                assert!(*open);
                assert_relative_eq!(lo[0], -0.8);
                assert_relative_eq!(hi[0], 0.8);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(i.margin() >= 0.2 - 1e-15);
        assert!(matches!(inflate(&s, 0.5), Err(Error::MarginViolation { .. })));
    }

    #[test]
    fn point_inflates_to_ball() {
        let d = DomainSpec::unit_ball(Norm::Euclidean, 2).unwrap();
        let s = SubsetSpec::new(d, SubsetShape::point(vec![0.0, 0.0])).unwrap();
        let i = inflate(&s, 0.25).unwrap();
        assert_eq!(
            i.shape(),
            &SubsetShape::Ball {
                center: vec![0.0, 0.0],
                radius: 0.25,
                open: true
            }
        );
        assert_relative_eq!(i.margin(), 0.75);
    }

    #[test]
    fn subset_touching_boundary_is_rejected() {
        let d = DomainSpec::interval(-1.0, 1.0).unwrap();
        assert!(matches!(
            SubsetSpec::new(d.clone(), SubsetShape::interval(-1.0, 0.0)),
            Err(Error::MarginViolation { .. })
        ));
        assert!(matches!(
            SubsetSpec::new(d, SubsetShape::point(vec![2.0])),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn margin_in_box_union_crosses_interfaces() {
        let a = AxisBox::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
        let b = AxisBox::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        let d = DomainSpec::union_of_boxes(Norm::SupNorm, vec![a, b]).unwrap();
        let s = SubsetSpec::new(d, SubsetShape::closed_box(vec![0.3, 0.3], vec![0.7, 1.5])).unwrap();
        assert_relative_eq!(s.margin(), 0.3, epsilon = 1e-12);
        assert!(s.margin() <= 0.3);
    }

    #[test]
    fn serde_recomputes_margin() {
        let d = DomainSpec::interval(-1.0, 1.0).unwrap();
        let s = SubsetSpec::new(d, SubsetShape::interval(-0.5, 0.25)).unwrap();
        let mut v = serde_json::to_value(&s).unwrap();
        v["margin"] = serde_json::json!(123.0);
        let back: SubsetSpec = serde_json::from_value(v).unwrap();
        assert_relative_eq!(back.margin(), 0.5);
    }
}
