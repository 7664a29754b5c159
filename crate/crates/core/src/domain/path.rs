//! Curves in domains, certified lower bounds on connecting lengths, and the
//! finite path-length property.

use std::io::Write;

use petgraph::algo::astar;
use petgraph::graph::{DiGraph, NodeIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::shape::{box_covered, AxisBox, Piece};
use super::subset::{SubsetShape, SubsetSpec};
use super::{DomainFamily, DomainSpec, Shape};
use crate::error::{Error, Result};
use crate::lp::{self, ChainNode};
use crate::norm::Norm;

/// Simple piece sequences enumerated for the chain bound before giving up.
const MAX_CHAIN_PATHS: usize = 512;
/// Relative push of witness nodes into the interior of an interface.
const NUDGE: f64 = 1e-7;

/// Piecewise-linear curve; every node and segment must lie in `domain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathCurve {
    pub nodes: Vec<Vec<f64>>,
    pub domain: DomainSpec,
}

impl PathCurve {
    pub fn new(domain: DomainSpec, nodes: Vec<Vec<f64>>) -> Self {
        Self { nodes, domain }
    }

    /// Sum of node-to-node distances without any validation.
    pub fn raw_length(&self) -> f64 {
        self.nodes.windows(2).map(|w| self.domain.norm.dist_slices(&w[0], &w[1])).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (k, node) in self.nodes.iter().enumerate() {
            if node.len() != self.domain.ambient_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.domain.ambient_dim,
                    got: node.len(),
                });
            }
            if !self.domain.contains(node) {
                return Err(Error::CurveExitsDomain {
                    segment: k.saturating_sub(1),
                    at: node.clone(),
                });
            }
        }
        for (k, w) in self.nodes.windows(2).enumerate() {
            self.domain
                .segment_inside(&w[0], &w[1])
                .map_err(|at| Error::CurveExitsDomain { segment: k, at })?;
        }
        Ok(())
    }

    /// Node list as CSV with columns `index, x1, …, xn`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["index".to_string()];
        header.extend((1..=self.domain.ambient_dim).map(|k| format!("x{k}")));
        wr.write_record(&header)?;
        for (i, n) in self.nodes.iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(n.iter().map(|v| format!("{v:e}")));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Length of a validated curve in the domain norm.
pub fn path_length(curve: &PathCurve) -> Result<f64> {
    curve.validate()?;
    Ok(curve.raw_length())
}

/// Closure of the open intersection of two overlapping pieces.
#[derive(Debug, Clone)]
enum Interface {
    Box(AxisBox),
    Polytope(lp::Rows),
}

impl Interface {
    fn between(a: &Piece, b: &Piece) -> Interface {
        match (a, b) {
            (Piece::Box(p), Piece::Box(q)) => Interface::Box(p.intersect(q).expect("overlapping boxes")),
            _ => Interface::Polytope(a.rows().joined(&b.rows())),
        }
    }

    fn rows(&self) -> lp::Rows {
        match self {
            Interface::Box(b) => b.rows(),
            Interface::Polytope(r) => r.clone(),
        }
    }

    fn point_distance(&self, x: &[f64], norm: Norm) -> Result<f64> {
        match self {
            Interface::Box(b) => Ok(b.point_distance(x, norm)),
            Interface::Polytope(r) => lp::point_region_distance(x, r, norm),
        }
    }

    fn distance(&self, other: &Interface, norm: Norm) -> Result<f64> {
        match (self, other) {
            (Interface::Box(a), Interface::Box(b)) => Ok(a.set_distance(b, norm)),
            _ => lp::region_distance(&self.rows(), &other.rows(), norm),
        }
    }

    /// A point of the open interface near `y`.
    fn nudge(&self, y: &[f64], norm: Norm) -> Result<Vec<f64>> {
        match self {
            Interface::Box(b) => {
                let ext = b.lo.iter().zip(&b.hi).map(|(l, h)| h - l).fold(f64::INFINITY, f64::min);
                Ok(b.inflate(-NUDGE * ext).clamp(y))
            }
            Interface::Polytope(rows) => {
                let (c, _) =
                    lp::chebyshev_center(rows, y.len(), norm, 1e6)?.ok_or_else(|| Error::Lp("interface lost its interior".into()))?;
                Ok(y.iter().zip(&c).map(|(a, b)| a + NUDGE * (b - a)).collect())
            }
        }
    }
}

/// Certified lower bound on the length of curves in `domain` joining `x1`
/// and `x2`, with a witness curve whose length bounds the optimum from above.
///
/// The bound is the largest of the straight-line distance, a shortest path in
/// the interface graph (nodes are pairwise piece intersections, edges carry
/// the distance between interfaces sharing a piece), and a chain LP over
/// simple piece sequences that couples consecutive interface crossings.
pub fn shortest_path_bound(domain: &DomainSpec, x1: &[f64], x2: &[f64]) -> Result<(f64, PathCurve)> {
    for x in [x1, x2] {
        if x.len() != domain.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: domain.ambient_dim,
                got: x.len(),
            });
        }
        if !domain.contains(x) {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
    }
    let norm = domain.norm;
    let straight = norm.dist_slices(x1, x2);
    let segment = PathCurve::new(domain.clone(), vec![x1.to_vec(), x2.to_vec()]);
    if domain.segment_inside(x1, x2).is_ok() {
        return Ok((straight, segment));
    }
    let pieces = domain.pieces()?;
    let (labels, _) = domain.components(&pieces)?;
    let starts: Vec<usize> = (0..pieces.len()).filter(|&i| pieces[i].contains(x1)).collect();
    let ends: Vec<usize> = (0..pieces.len()).filter(|&i| pieces[i].contains(x2)).collect();
    if !starts.iter().any(|&s| ends.iter().any(|&e| labels[s] == labels[e])) {
        return Err(Error::Unreachable);
    }

    let mut overlaps = vec![vec![None; pieces.len()]; pieces.len()];
    for i in 0..pieces.len() {
        for j in (i + 1)..pieces.len() {
            if pieces[i].overlap(&pieces[j], norm)?.is_some() {
                let iface = Interface::between(&pieces[i], &pieces[j]);
                overlaps[i][j] = Some(iface.clone());
                overlaps[j][i] = Some(iface);
            }
        }
    }

    let (graph_bound, graph_route) = interface_graph_bound(&pieces, &overlaps, x1, x2, &starts, &ends, norm)?;
    let chain = chain_bound(&overlaps, x1, x2, &starts, &ends, norm)?;

    let mut lower = straight.max(graph_bound);
    let witness_nodes = match &chain {
        Some((value, route, points)) => {
            lower = lower.max(*value);
            let mut nodes = vec![x1.to_vec()];
            for (k, y) in points.iter().enumerate() {
                let iface = overlaps[route[k]][route[k + 1]].as_ref().expect("route follows overlaps");
                nodes.push(iface.nudge(y, norm)?);
            }
            nodes.push(x2.to_vec());
            nodes
        }
        None => {
            let mut nodes = vec![x1.to_vec()];
            for (a, b) in graph_route {
                let iface = overlaps[a][b].as_ref().expect("route follows overlaps");
                let prev = nodes.last().expect("nonempty").clone();
                let target = match iface {
                    Interface::Box(bx) => bx.clamp(&prev),
                    Interface::Polytope(_) => prev,
                };
                nodes.push(iface.nudge(&target, norm)?);
            }
            nodes.push(x2.to_vec());
            nodes
        }
    };
    let witness = PathCurve::new(domain.clone(), witness_nodes);
    witness.validate()?;
    Ok((lower, witness))
}

type Route = Vec<(usize, usize)>;
/// Length, piece sequence and crossing nodes of one chain solution.
type Chain = (f64, Vec<usize>, Vec<Vec<f64>>);

fn interface_graph_bound(
    pieces: &[Piece],
    overlaps: &[Vec<Option<Interface>>],
    x1: &[f64],
    x2: &[f64],
    starts: &[usize],
    ends: &[usize],
    norm: Norm,
) -> Result<(f64, Route)> {
    // interfaces sharing a piece are adjacent, so consecutive witness nodes
    // always lie in one convex piece
    let mut g: DiGraph<Option<(usize, usize)>, f64> = DiGraph::new();
    let source = g.add_node(None);
    let sink = g.add_node(None);
    let mut ids: Vec<((usize, usize), NodeIndex)> = Vec::new();
    for i in 0..pieces.len() {
        for j in (i + 1)..pieces.len() {
            if overlaps[i][j].is_some() {
                ids.push(((i, j), g.add_node(Some((i, j)))));
            }
        }
    }
    if starts.iter().any(|s| ends.contains(s)) {
        g.add_edge(source, sink, norm.dist_slices(x1, x2));
    }
    for &((i, j), id) in &ids {
        let iface = overlaps[i][j].as_ref().expect("listed overlap");
        if starts.contains(&i) || starts.contains(&j) {
            g.add_edge(source, id, iface.point_distance(x1, norm)?);
        }
        if ends.contains(&i) || ends.contains(&j) {
            g.add_edge(id, sink, iface.point_distance(x2, norm)?);
        }
    }
    for (p, &((i, j), a)) in ids.iter().enumerate() {
        for &((k, l), b) in &ids[p + 1..] {
            if i == k || i == l || j == k || j == l {
                let d = overlaps[i][j]
                    .as_ref()
                    .expect("listed overlap")
                    .distance(overlaps[k][l].as_ref().expect("listed overlap"), norm)?;
                g.add_edge(a, b, d);
                g.add_edge(b, a, d);
            }
        }
    }
    let (cost, path) = astar(&g, source, |n| n == sink, |e| *e.weight(), |_| 0.0).ok_or(Error::Unreachable)?;
    let route: Route = path.into_iter().filter_map(|n| g[n]).collect();
    Ok((cost, route))
}

/// Minimum of the chain LP over all simple piece sequences from a piece
/// holding `x1` to one holding `x2`; `None` if there are too many sequences.
fn chain_bound(
    overlaps: &[Vec<Option<Interface>>],
    x1: &[f64],
    x2: &[f64],
    starts: &[usize],
    ends: &[usize],
    norm: Norm,
) -> Result<Option<Chain>> {
    let mut routes: Vec<Vec<usize>> = Vec::new();
    for &s in starts {
        let mut stack = vec![s];
        if !collect_routes(overlaps, &mut stack, ends, &mut routes) {
            return Ok(None);
        }
    }
    let dim = x1.len();
    let solved: Vec<Result<Chain>> = routes
        .into_par_iter()
        .map(|route| {
            let mut nodes = vec![ChainNode::Point(x1.to_vec())];
            for w in route.windows(2) {
                nodes.push(ChainNode::Region(overlaps[w[0]][w[1]].as_ref().expect("route").rows()));
            }
            nodes.push(ChainNode::Point(x2.to_vec()));
            let (_, pts) = lp::min_chain(&nodes, dim, norm)?;
            let bound = lp::chain_certificate(&nodes, dim, norm)?;
            let inner = pts[1..pts.len() - 1].to_vec();
            Ok((bound.max(0.0), route, inner))
        })
        .collect();
    let mut best: Option<(f64, Vec<usize>, Vec<Vec<f64>>)> = None;
    for r in solved {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.0 < b.0) {
            best = Some(r);
        }
    }
    Ok(best)
}

fn collect_routes(overlaps: &[Vec<Option<Interface>>], stack: &mut Vec<usize>, ends: &[usize], out: &mut Vec<Vec<usize>>) -> bool {
    let last = *stack.last().expect("nonempty");
    if ends.contains(&last) {
        out.push(stack.clone());
        if out.len() > MAX_CHAIN_PATHS {
            return false;
        }
    }
    for next in 0..overlaps.len() {
        if overlaps[last][next].is_some() && !stack.contains(&next) {
            stack.push(next);
            let ok = collect_routes(overlaps, stack, ends, out);
            stack.pop();
            if !ok {
                return false;
            }
        }
    }
    true
}

/// Union of the boxes `D_1^a, …, D_n^a` cut down to their first `n`
/// coordinates, under the sup norm.
pub fn ell_infinity_example_domain(a: f64, truncation_n: usize) -> Result<DomainSpec> {
    if !(a > 0.0 && a < 0.5) {
        return Err(Error::BadParameter(format!("a = {a} must lie in (0, 1/2)")));
    }
    if truncation_n < 2 {
        return Err(Error::BadParameter(format!("truncation {truncation_n} must be at least 2")));
    }
    let n = truncation_n;
    let boxes = (1..=n)
        .map(|j| {
            let mut lo = vec![0.0; n];
            let mut hi = vec![0.0; n];
            for k in 1..=n {
                let (l, h) = match k.cmp(&j) {
                    std::cmp::Ordering::Less => (1.0 - a, 1.0 + a),
                    std::cmp::Ordering::Equal => (-a, 1.0 + a),
                    std::cmp::Ordering::Greater => (-a, a),
                };
                lo[k - 1] = l;
                hi[k - 1] = h;
            }
            AxisBox { lo, hi }
        })
        .collect();
    let mut d = DomainSpec::union_of_boxes(Norm::SupNorm, boxes)?;
    d.family = Some(DomainFamily::EllInfinity { a, truncation: n });
    Ok(d)
}

/// The point with its first `j` coordinates equal to 1 and the rest 0.
pub fn ell_infinity_point(j: usize, n: usize) -> Vec<f64> {
    (1..=n).map(|k| if k <= j { 1.0 } else { 0.0 }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathCertificate {
    pub d2: SubsetSpec,
    pub l_bound: f64,
}

/// One line of the path-length refutation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefutationRow {
    pub truncation: usize,
    pub j: usize,
    pub lower_bound: f64,
    pub half_j: f64,
    pub witness_length: f64,
}

impl RefutationRow {
    pub fn meets_half_j(&self) -> bool {
        self.lower_bound >= self.half_j
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum PathLengthOutcome {
    Certificate(PathCertificate),
    Refutation { rows: Vec<RefutationRow> },
}

/// Lower bounds from the origin to `x^(j)` for every truncation `2..=n_max`
/// and every `j ≤ n`.
pub fn ell_infinity_refutation(a: f64, n_max: usize) -> Result<Vec<RefutationRow>> {
    let jobs: Vec<(usize, usize)> = (2..=n_max).flat_map(|n| (1..=n).map(move |j| (n, j))).collect();
    jobs.into_par_iter()
        .map(|(n, j)| {
            let domain = ell_infinity_example_domain(a, n)?;
            let (lower_bound, witness) = shortest_path_bound(&domain, &vec![0.0; n], &ell_infinity_point(j, n))?;
            Ok(RefutationRow {
                truncation: n,
                j,
                lower_bound,
                half_j: j as f64 / 2.0,
                witness_length: path_length(&witness)?,
            })
        })
        .collect()
}

/// Certificate `(D₂, L)` of the finite path-length property for `d1`, or a
/// refutation table for the ℓ∞ family.
///
/// `D₂` is the domain with every convex piece shrunk by some `η` below the
/// margin of `d1` (halved until `D₂` covers `d1` and stays connected), and
/// `L` is the sum of the piece diameters: a curve between two points of `D₂`
/// crosses each shrunk piece at most once along a simple piece sequence.
pub fn finite_path_length_certificate(domain: &DomainSpec, d1: &SubsetSpec) -> Result<PathLengthOutcome> {
    if d1.parent() != domain {
        return Err(Error::BadParameter("subset belongs to a different domain".into()));
    }
    if let Some(DomainFamily::EllInfinity { a, truncation }) = domain.family {
        return Ok(PathLengthOutcome::Refutation {
            rows: ell_infinity_refutation(a, truncation)?,
        });
    }
    let norm = domain.norm;
    if d1.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut eta = 0.5 * d1.margin().min(domain.outer_radius()?);
    if let Shape::Ball { center, radius } = &domain.shape {
        if !(norm == Norm::SupNorm || center.len() == 1) {
            let r = radius - eta;
            let d2 = SubsetSpec::new(
                domain.clone(),
                SubsetShape::Ball {
                    center: center.clone(),
                    radius: r,
                    open: true,
                },
            )?;
            return Ok(PathLengthOutcome::Certificate(PathCertificate { d2, l_bound: 2.0 * r }));
        }
    }
    let pieces = domain.pieces()?;
    for _ in 0..40 {
        let shrunk: Vec<Piece> = pieces
            .iter()
            .map(|p| p.shrink(eta, norm))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        if !shrunk.is_empty() && covers(&shrunk, d1)? && domain.components(&shrunk)?.1 == 1 {
            let mut l_bound = 0.0;
            for p in &shrunk {
                l_bound += p.diameter_bound(norm)?;
            }
            let d2 = SubsetSpec::new(domain.clone(), SubsetShape::Pieces { pieces: shrunk })?;
            return Ok(PathLengthOutcome::Certificate(PathCertificate { d2, l_bound }));
        }
        eta *= 0.5;
    }
    Err(Error::Unsupported("no shrunk cover of the subset found".into()))
}

/// Whether the union of open `pieces` contains the subset.
fn covers(pieces: &[Piece], d1: &SubsetSpec) -> Result<bool> {
    if let SubsetShape::Points { points } = d1.shape() {
        return Ok(points.iter().all(|p| pieces.iter().any(|q| q.contains(p))));
    }
    let bb = match d1.shape() {
        SubsetShape::Pieces { pieces: sub } => {
            let mut ok = true;
            for s in sub {
                ok &= covers_box(pieces, &s.bounding_box()?);
            }
            return Ok(ok);
        }
        other => other.bounding_box()?,
    };
    Ok(covers_box(pieces, &bb))
}

fn covers_box(pieces: &[Piece], b: &AxisBox) -> bool {
    let boxes: Option<Vec<AxisBox>> = pieces
        .iter()
        .map(|p| match p {
            Piece::Box(b) => Some(b.clone()),
            Piece::Polytope(_) => None,
        })
        .collect();
    match boxes {
        Some(boxes) => box_covered(b, &boxes, 200_000),
        None => {
            let verts = b.vertices();
            pieces.iter().any(|p| verts.iter().all(|v| p.contains(v)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn l_shape(norm: Norm) -> DomainSpec {
        let a = AxisBox::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
        let b = AxisBox::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        DomainSpec::union_of_boxes(norm, vec![a, b]).unwrap()
    }

    #[test]
    fn line_and_staircase_lengths() {
        let d = DomainSpec::interval(-1.0, 2.0).unwrap();
        let c = PathCurve::new(d, vec![vec![0.0], vec![0.5], vec![1.0]]);
        assert_relative_eq!(path_length(&c).unwrap(), 1.0);
        let b = DomainSpec::boxed(Norm::SupNorm, vec![-1.0, -1.0], vec![2.0, 2.0]).unwrap();
        let s = PathCurve::new(b, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]]);
        assert_relative_eq!(path_length(&s).unwrap(), 2.0);
    }

    #[test]
    fn exiting_curve_is_rejected() {
        let c = PathCurve::new(l_shape(Norm::Euclidean), vec![vec![1.8, 0.5], vec![0.5, 1.8]]);
        assert!(matches!(path_length(&c), Err(Error::CurveExitsDomain { segment: 0, .. })));
    }

    #[test]
    fn convex_bound_is_the_segment() {
        let d = DomainSpec::unit_ball(Norm::Euclidean, 2).unwrap();
        let (lb, w) = shortest_path_bound(&d, &[0.5, 0.0], &[0.0, -0.5]).unwrap();
        assert_relative_eq!(lb, 0.5f64.hypot(0.5));
        assert_eq!(w.nodes.len(), 2);
    }

    #[test]
    fn l_shape_sup_norm_is_exact() {
        let d = l_shape(Norm::SupNorm);
        let (lb, w) = shortest_path_bound(&d, &[1.8, 0.5], &[0.5, 1.8]).unwrap();
        assert!((lb - 1.6).abs() < 1e-8, "{lb}");
        let len = path_length(&w).unwrap();
        assert!(len >= lb && len < 1.6 + 1e-5);
    }

    #[test]
    fn ell_infinity_membership() {
        let d = ell_infinity_example_domain(1.0 / 3.0, 2).unwrap();
        assert!(d.contains(&[0.5, 0.0]));
        assert!(d.contains(&[1.0, 0.5]));
        assert!(!d.contains(&[0.5, 0.5]));
        assert!(matches!(ell_infinity_example_domain(0.5, 3), Err(Error::BadParameter(_))));
        assert!(matches!(ell_infinity_example_domain(0.2, 1), Err(Error::BadParameter(_))));
    }

    #[test]
    fn convex_certificate_uses_diameter() {
        let d = DomainSpec::boxed(Norm::SupNorm, vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
        let d1 = SubsetSpec::new(d.clone(), SubsetShape::closed_box(vec![0.5, 0.4], vec![1.5, 0.6])).unwrap();
        let PathLengthOutcome::Certificate(c) = finite_path_length_certificate(&d, &d1).unwrap() else {
            panic!("expected certificate")
        };
        // margin 0.4, η = 0.2: shrunk box (0.2, 1.8) × (0.2, 0.8)
        assert_relative_eq!(c.l_bound, 1.6, epsilon = 1e-12);
        assert_relative_eq!(c.d2.margin(), 0.2, epsilon = 1e-12);
    }
}
