//! Small linear programs over H-polytopes, solved with `microlp`.
//!
//! Everything here works on closures of open polytopes `{x : a_i·x < b_i}`;
//! callers decide how strictness is handled.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Variable};

use crate::error::{Error, Result};
use crate::norm::Norm;

/// Relative safety subtracted from LP optima that are used as lower bounds.
pub const LP_SAFETY: f64 = 1e-9;

/// Rows `a_i·x ≤ b_i`.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rows {
    pub normals: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
}

impl Rows {
    pub fn dim(&self) -> usize {
        self.normals.first().map_or(0, |a| a.len())
    }

    pub fn extend(&mut self, other: &Rows) {
        self.normals.extend(other.normals.iter().cloned());
        self.offsets.extend(other.offsets.iter().copied());
    }

    pub fn joined(&self, other: &Rows) -> Rows {
        let mut r = self.clone();
        r.extend(other);
        r
    }
}

fn lp_err(e: microlp::Error) -> Error {
    Error::Lp(e.to_string())
}

fn add_rows(problem: &mut Problem, vars: &[Variable], rows: &Rows, slack: Option<(Variable, Norm)>) {
    for (a, &b) in rows.normals.iter().zip(&rows.offsets) {
        let mut expr: Vec<(Variable, f64)> = vars.iter().zip(a).filter(|(_, &c)| c != 0.0).map(|(&v, &c)| (v, c)).collect();
        if let Some((r, norm)) = slack {
            expr.push((r, norm.dual_norm_slice(a)));
        }
        if !expr.is_empty() {
            problem.add_constraint(expr, ComparisonOp::Le, b);
        }
    }
}

/// Largest ball (in `norm`) inside the polytope: returns `(center, radius)`.
/// The radius is capped at `cap`; `None` if the closure is empty.
pub fn chebyshev_center(rows: &Rows, dim: usize, norm: Norm, cap: f64) -> Result<Option<(Vec<f64>, f64)>> {
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<Variable> = (0..dim).map(|_| problem.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    let r = problem.add_var(1.0, (f64::NEG_INFINITY, cap));
    add_rows(&mut problem, &vars, rows, Some((r, norm)));
    match problem.solve() {
        Ok(out) => {
            let sol = out.into_solution().map_err(|e| Error::Lp(format!("{e:?}")))?;
            let c = vars.iter().map(|&v| sol.var_value(v)).collect();
            let radius = sol.var_value(r);
            // a negative optimum means even the closure is empty
            Ok((radius >= 0.0).then_some((c, radius)))
        }
        Err(microlp::Error::Infeasible) => Ok(None),
        Err(e) => Err(lp_err(e)),
    }
}

/// Coordinate extents of the closure of the polytope.
pub fn bounding_box(rows: &Rows, dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lo = vec![0.0; dim];
    let mut hi = vec![0.0; dim];
    for k in 0..dim {
        for (dir, out) in [
            (OptimizationDirection::Minimize, &mut lo),
            (OptimizationDirection::Maximize, &mut hi),
        ] {
            let mut problem = Problem::new(dir);
            let vars: Vec<Variable> = (0..dim)
                .map(|i| {
                    let c = if i == k { 1.0 } else { 0.0 };
                    problem.add_var(c, (f64::NEG_INFINITY, f64::INFINITY))
                })
                .collect();
            add_rows(&mut problem, &vars, rows, None);
            let sol = problem
                .solve()
                .map_err(|e| match e {
                    microlp::Error::Unbounded => Error::Unsupported("unbounded polytope".into()),
                    other => lp_err(other),
                })?
                .into_solution()
                .map_err(|e| Error::Lp(format!("{e:?}")))?;
            out[k] = sol.var_value(vars[k]);
        }
    }
    Ok((lo, hi))
}

/// Support function `max {u·x : x in the closed polytope}`.
pub fn support(rows: &Rows, u: &[f64]) -> Result<f64> {
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<Variable> = u.iter().map(|&c| problem.add_var(c, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    add_rows(&mut problem, &vars, rows, None);
    let sol = problem
        .solve()
        .map_err(|e| match e {
            microlp::Error::Unbounded => Error::Unsupported("unbounded polytope".into()),
            other => lp_err(other),
        })?
        .into_solution()
        .map_err(|e| Error::Lp(format!("{e:?}")))?;
    Ok(sol.objective())
}

/// `±e_i`: the sup norm is exactly the maximum of these functionals.
pub fn axis_directions(dim: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::with_capacity(2 * dim);
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut u = vec![0.0; dim];
            u[i] = s;
            dirs.push(u);
        }
    }
    dirs
}

/// Unit directions whose support function under-approximates the Euclidean
/// norm: `‖v‖₂ ≥ max_u u·v`.
pub fn euclidean_directions(dim: usize) -> Vec<Vec<f64>> {
    if dim == 2 {
        let mut dirs = Vec::new();
        let m = 64;
        for k in 0..m {
            let th = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
            dirs.push(vec![th.cos(), th.sin()]);
        }
        return dirs;
    }
    let mut dirs = axis_directions(dim);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..dim {
        for j in (i + 1)..dim {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut u = vec![0.0; dim];
                u[i] = si * h;
                u[j] = sj * h;
                dirs.push(u);
            }
        }
    }
    dirs
}

/// A node of a chain: a fixed point or a free point in a closed polytope.
#[derive(Debug, Clone)]
pub enum ChainNode {
    Point(Vec<f64>),
    Region(Rows),
}

/// Minimum total length of chains `y_0 → y_1 → … → y_m` where each `y_k` is
/// the fixed point or ranges over the closed region of `nodes[k]`.
///
/// Legs are measured exactly in the sup norm and by a polyhedral
/// under-approximation in the Euclidean norm, so the optimum is a lower bound
/// in both cases. Returns the optimum and the chain points.
pub fn min_chain(nodes: &[ChainNode], dim: usize, norm: Norm) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Option<Vec<Variable>>> = nodes
        .iter()
        .map(|node| match node {
            ChainNode::Point(_) => None,
            ChainNode::Region(_) => Some((0..dim).map(|_| problem.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect()),
        })
        .collect();
    for (node, v) in nodes.iter().zip(&vars) {
        if let (ChainNode::Region(rows), Some(v)) = (node, v) {
            add_rows(&mut problem, v, rows, None);
        }
    }
    let dirs: Vec<Vec<f64>> = match norm {
        Norm::SupNorm => axis_directions(dim),
        Norm::Euclidean => euclidean_directions(dim),
    };
    let mut constant = 0.0;
    for k in 1..nodes.len() {
        if let (ChainNode::Point(a), ChainNode::Point(b)) = (&nodes[k - 1], &nodes[k]) {
            constant += norm.dist_slices(a, b);
            continue;
        }
        let s = problem.add_var(1.0, (0.0, f64::INFINITY));
        for u in &dirs {
            // u·(y_k - y_{k-1}) - s ≤ 0 with fixed points moved to the right
            let mut expr: Vec<(Variable, f64)> = vec![(s, -1.0)];
            let mut rhs = 0.0;
            for (i, &ui) in u.iter().enumerate() {
                if ui == 0.0 {
                    continue;
                }
                match (&nodes[k], &vars[k]) {
                    (_, Some(v)) => expr.push((v[i], ui)),
                    (ChainNode::Point(p), None) => rhs -= ui * p[i],
                    _ => unreachable!(),
                }
                match (&nodes[k - 1], &vars[k - 1]) {
                    (_, Some(v)) => expr.push((v[i], -ui)),
                    (ChainNode::Point(p), None) => rhs += ui * p[i],
                    _ => unreachable!(),
                }
            }
            problem.add_constraint(expr, ComparisonOp::Le, rhs);
        }
    }
    let sol = problem
        .solve()
        .map_err(lp_err)?
        .into_solution()
        .map_err(|e| Error::Lp(format!("{e:?}")))?;
    let chain = nodes
        .iter()
        .zip(&vars)
        .map(|(node, v)| match (node, v) {
            (ChainNode::Point(p), _) => p.clone(),
            (_, Some(v)) => v.iter().map(|&x| sol.var_value(x)).collect(),
            _ => unreachable!(),
        })
        .collect();
    Ok((sol.objective() + constant, chain))
}

/// Certified lower bound on the chain optimum of [`min_chain`] by weak
/// duality.
///
/// For leg functionals `g_k` in the dual unit ball, every chain satisfies
/// `Σ‖y_k − y_{k−1}‖ ≥ Σ g_k·(y_k − y_{k−1}) = Σ_j c_j·y_j` with
/// `c_j = g_j − g_{j+1}`, so minimizing each term over its node gives a bound.
/// The `g_k` come from the dual LP; the bound itself is evaluated in closed
/// form on boxes with compensated arithmetic, so its error is at rounding
/// level rather than solver tolerance. Non-box regions fall back to a
/// support-function LP with the usual safety margin.
pub fn chain_certificate(nodes: &[ChainNode], dim: usize, norm: Norm) -> Result<f64> {
    let m = nodes.len().saturating_sub(1);
    if m == 0 {
        return Ok(0.0);
    }
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    // objective coefficient of g_{k,i}: +p_k if node k is a point, −p_{k−1} if node k−1 is
    let g: Vec<Vec<Variable>> = (1..=m)
        .map(|k| {
            (0..dim)
                .map(|i| {
                    let mut c = 0.0;
                    if let ChainNode::Point(p) = &nodes[k] {
                        c += p[i];
                    }
                    if let ChainNode::Point(p) = &nodes[k - 1] {
                        c -= p[i];
                    }
                    problem.add_var(c, (-1.0, 1.0))
                })
                .collect()
        })
        .collect();
    for gk in &g {
        match norm {
            Norm::SupNorm => {
                let t: Vec<Variable> = (0..dim).map(|_| problem.add_var(0.0, (0.0, 1.0))).collect();
                for i in 0..dim {
                    problem.add_constraint([(t[i], 1.0), (gk[i], -1.0)], ComparisonOp::Ge, 0.0);
                    problem.add_constraint([(t[i], 1.0), (gk[i], 1.0)], ComparisonOp::Ge, 0.0);
                }
                problem.add_constraint(t.iter().map(|&v| (v, 1.0)), ComparisonOp::Le, 1.0);
            }
            Norm::Euclidean => {
                let dirs = euclidean_directions(dim);
                let lam: Vec<Variable> = dirs.iter().map(|_| problem.add_var(0.0, (0.0, 1.0))).collect();
                problem.add_constraint(lam.iter().map(|&v| (v, 1.0)), ComparisonOp::Le, 1.0);
                for i in 0..dim {
                    let mut expr = vec![(gk[i], 1.0)];
                    expr.extend(dirs.iter().zip(&lam).filter(|(u, _)| u[i] != 0.0).map(|(u, &l)| (l, -u[i])));
                    problem.add_constraint(expr, ComparisonOp::Eq, 0.0);
                }
            }
        }
    }
    for (j, node) in nodes.iter().enumerate() {
        let ChainNode::Region(rows) = node else { continue };
        // min over the region of c_j·y = max { −b·ν : Aᵀν = −c_j, ν ≥ 0 }
        let nu: Vec<Variable> = rows.offsets.iter().map(|&b| problem.add_var(-b, (0.0, f64::INFINITY))).collect();
        for i in 0..dim {
            let mut expr: Vec<(Variable, f64)> = rows
                .normals
                .iter()
                .zip(&nu)
                .filter(|(a, _)| a[i] != 0.0)
                .map(|(a, &v)| (v, a[i]))
                .collect();
            if j >= 1 {
                expr.push((g[j - 1][i], 1.0));
            }
            if j < m {
                expr.push((g[j][i], -1.0));
            }
            problem.add_constraint(expr, ComparisonOp::Eq, 0.0);
        }
    }
    let sol = problem
        .solve()
        .map_err(lp_err)?
        .into_solution()
        .map_err(|e| Error::Lp(format!("{e:?}")))?;
    let gv: Vec<Vec<f64>> = g
        .iter()
        .map(|gk| {
            let v: Vec<f64> = gk.iter().map(|&x| sol.var_value(x)).collect();
            let scale = norm.dual_norm_slice(&v).max(1.0);
            v.into_iter().map(|x| x / scale).collect()
        })
        .collect();
    let mut total = CompensatedSum::default();
    for (j, node) in nodes.iter().enumerate() {
        let c: Vec<f64> = (0..dim)
            .map(|i| {
                let to = if j >= 1 { gv[j - 1][i] } else { 0.0 };
                let from = if j < m { gv[j][i] } else { 0.0 };
                to - from
            })
            .collect();
        match node {
            ChainNode::Point(p) => {
                for i in 0..dim {
                    total.add_product(c[i], p[i]);
                }
            }
            ChainNode::Region(rows) => match box_bounds(rows, dim) {
                Some((lo, hi)) => {
                    for i in 0..dim {
                        total.add_product(c[i], if c[i] >= 0.0 { lo[i] } else { hi[i] });
                    }
                }
                None => {
                    let neg: Vec<f64> = c.iter().map(|v| -v).collect();
                    let h = support(rows, &neg)?;
                    total.add(-h - LP_SAFETY * (1.0 + h.abs()));
                }
            },
        }
    }
    Ok(total.value())
}

/// Tightest box bounds when every row is `±e_i·x ≤ b`.
fn box_bounds(rows: &Rows, dim: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut lo = vec![f64::NEG_INFINITY; dim];
    let mut hi = vec![f64::INFINITY; dim];
    for (a, &b) in rows.normals.iter().zip(&rows.offsets) {
        let mut nz = a.iter().enumerate().filter(|(_, c)| **c != 0.0);
        let (i, &c) = nz.next()?;
        if nz.next().is_some() || c.abs() != 1.0 {
            return None;
        }
        if c > 0.0 {
            hi[i] = hi[i].min(b);
        } else {
            lo[i] = lo[i].max(-b);
        }
    }
    lo.iter().zip(&hi).all(|(l, h)| l.is_finite() && h.is_finite()).then_some((lo, hi))
}

/// Neumaier summation with exact product splitting.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    err: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        self.err += if self.sum.abs() >= x.abs() {
            (self.sum - t) + x
        } else {
            (x - t) + self.sum
        };
        self.sum = t;
    }

    fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        self.add(p);
        self.err += a.mul_add(b, -p);
    }

    fn value(&self) -> f64 {
        self.sum + self.err
    }
}

/// Lower bound on the distance between two closed polytopes.
pub fn region_distance(a: &Rows, b: &Rows, norm: Norm) -> Result<f64> {
    let dim = a.dim().max(b.dim());
    let (v, _) = min_chain(&[ChainNode::Region(a.clone()), ChainNode::Region(b.clone())], dim, norm)?;
    Ok((v - LP_SAFETY * (1.0 + v.abs())).max(0.0))
}

/// Lower bound on the distance from a point to a closed polytope.
pub fn point_region_distance(x: &[f64], region: &Rows, norm: Norm) -> Result<f64> {
    let (v, _) = min_chain(&[ChainNode::Point(x.to_vec()), ChainNode::Region(region.clone())], x.len(), norm)?;
    Ok((v - LP_SAFETY * (1.0 + v.abs())).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Rows {
        Rows {
            normals: vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]],
            offsets: vec![1.0, 0.0, 1.0, 0.0],
        }
    }

    #[test]
    fn chebyshev_of_square() {
        let (c, r) = chebyshev_center(&unit_square(), 2, Norm::Euclidean, 10.0).unwrap().unwrap();
        assert!((r - 0.5).abs() < 1e-9);
        assert!((c[0] - 0.5).abs() < 1e-9 && (c[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn empty_intersection_is_detected() {
        let mut rows = unit_square();
        rows.normals.push(vec![1.0, 0.0]);
        rows.offsets.push(-1.0);
        assert!(chebyshev_center(&rows, 2, Norm::Euclidean, 10.0).unwrap().is_none());
    }

    #[test]
    fn bounding_box_of_triangle() {
        let rows = Rows {
            normals: vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]],
            offsets: vec![0.0, 0.0, 2.0],
        };
        let (lo, hi) = bounding_box(&rows, 2).unwrap();
        assert!(lo.iter().all(|v| v.abs() < 1e-9));
        assert!(hi.iter().all(|v| (v - 2.0).abs() < 1e-9));
    }

    #[test]
    fn region_distances() {
        let mut far = unit_square();
        far.offsets = vec![4.0, -3.0, 1.0, 0.0];
        let d = region_distance(&unit_square(), &far, Norm::SupNorm).unwrap();
        assert!((d - 2.0).abs() < 1e-8);
        let e = point_region_distance(&[2.0, 2.0], &unit_square(), Norm::Euclidean).unwrap();
        assert!(e <= 2f64.sqrt() && e > 2f64.sqrt() * 0.998);
    }

    #[test]
    fn certificate_matches_chain_optimum() {
        let nodes = [
            ChainNode::Point(vec![1.8, 0.5]),
            ChainNode::Region(unit_square()),
            ChainNode::Point(vec![0.5, 1.8]),
        ];
        let sup = chain_certificate(&nodes, 2, Norm::SupNorm).unwrap();
        assert!((sup - 1.6).abs() < 1e-12, "{sup}");
        // true Euclidean optimum through the corner (1, 1)
        let exact = 2.0 * 0.8f64.hypot(0.5);
        let euc = chain_certificate(&nodes, 2, Norm::Euclidean).unwrap();
        assert!(euc <= exact && euc > 0.998 * exact, "{euc}");
    }

    #[test]
    fn chain_through_corner() {
        // from (1.8, 0.5) to (0.5, 1.8) through the closed unit square
        let nodes = [
            ChainNode::Point(vec![1.8, 0.5]),
            ChainNode::Region(unit_square()),
            ChainNode::Point(vec![0.5, 1.8]),
        ];
        let (len, chain) = min_chain(&nodes, 2, Norm::SupNorm).unwrap();
        assert!((len - 1.6).abs() < 1e-9, "{len}");
        assert_eq!(chain.len(), 3);
        assert!(chain[1].iter().all(|c| (-1e-9..=1.0 + 1e-9).contains(c)));
    }
}
