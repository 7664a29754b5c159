//! Deterministic point and close-pair samples of a strictly-inside subset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::subset::{SubsetShape, SubsetSpec};
use crate::error::{Error, Result};
use crate::norm::Norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SampleStrategy {
    #[default]
    Grid,
    #[serde(alias = "halton", alias = "quasi")]
    QuasiRandom,
}

/// A base point `x ∈ D̂` and a partner `x̃` with `0 < ‖x − x̃‖ ≤ μ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub x: Vec<f64>,
    pub x_tilde: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub points: Vec<Vec<f64>>,
    pub pairs: Vec<Pair>,
    pub mu: f64,
    pub seed: u64,
    pub strategy: SampleStrategy,
    pub subset: SubsetSpec,
}

/// Replay information for a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDescriptor {
    pub seed: u64,
    pub strategy: SampleStrategy,
    pub n_points: usize,
    pub n_pairs: usize,
    pub mu: f64,
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
const MAX_REJECTION_FACTOR: usize = 1000;

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut f = 1.0 / b;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base as u64) as f64;
        i /= base as u64;
        f /= b;
    }
    r
}

impl SampleSet {
    pub fn norm(&self) -> Norm {
        self.subset.norm()
    }

    pub fn descriptor(&self) -> SampleDescriptor {
        SampleDescriptor {
            seed: self.seed,
            strategy: self.strategy,
            n_points: self.points.len(),
            n_pairs: self.pairs.len(),
            mu: self.mu,
        }
    }

    /// Re-checks the pair contract `x ∈ D̂`, `0 < ‖x − x̃‖ ≤ μ`.
    pub fn check_pairs(&self) -> Result<()> {
        let norm = self.norm();
        for (i, p) in self.pairs.iter().enumerate() {
            let d = norm.dist_slices(&p.x, &p.x_tilde);
            if d == 0.0 {
                return Err(Error::DegeneratePair { index: i });
            }
            if d > self.mu {
                return Err(Error::ContractViolation(format!("pair {i}: ‖x − x̃‖ = {d:e} > μ = {:e}", self.mu)));
            }
            if !self.subset.contains(&p.x) {
                return Err(Error::ContractViolation(format!("pair {i}: base point {:?} not in D̂", p.x)));
            }
        }
        Ok(())
    }

    /// This sample with the points and pairs of `other` appended.
    pub fn merged(&self, other: &SampleSet) -> SampleSet {
        let mut s = self.clone();
        s.points.extend(other.points.iter().cloned());
        s.pairs.extend(other.pairs.iter().cloned());
        s
    }

    /// A sample carrying only the given points (no pairs).
    pub fn from_points(subset: SubsetSpec, points: Vec<Vec<f64>>, mu: f64) -> Self {
        SampleSet {
            points,
            pairs: Vec::new(),
            mu,
            seed: 0,
            strategy: SampleStrategy::Grid,
            subset,
        }
    }
}

/// Draws `n_points` points of the closed subset and `n_pairs` close pairs.
///
/// Grid sampling puts `m` points per axis with `m^d ≈ n_points` (vertices
/// included for closed boxes, cell centres otherwise); quasi-random sampling
/// uses a Halton sequence with a seeded random shift. Non-box shapes are
/// handled by rejection from their bounding box.
pub fn sample(subset: &SubsetSpec, mu: f64, strategy: SampleStrategy, n_points: usize, n_pairs: usize, seed: u64) -> Result<SampleSet> {
    if !(mu > 0.0) {
        return Err(Error::BadParameter(format!("μ = {mu} must be positive")));
    }
    if mu > subset.margin() {
        return Err(Error::MarginViolation {
            required: mu,
            available: subset.margin(),
        });
    }
    if subset.is_empty() || n_points == 0 {
        return Err(Error::EmptySample);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = match (strategy, subset.shape()) {
        (_, SubsetShape::Points { points }) => points.clone(),
        (SampleStrategy::Grid, shape) => grid_points(subset, shape, n_points)?,
        (SampleStrategy::QuasiRandom, _) => halton_points(subset, n_points, &mut rng)?,
    };
    if points.is_empty() {
        return Err(Error::EmptySample);
    }
    let pairs = draw_pairs(&points, subset.norm(), mu, n_pairs, &mut rng);
    Ok(SampleSet {
        points,
        pairs,
        mu,
        seed,
        strategy,
        subset: subset.clone(),
    })
}

fn axis_values(lo: f64, hi: f64, m: usize, closed: bool) -> Vec<f64> {
    if lo == hi {
        return vec![lo];
    }
    if closed && m > 1 {
        (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect()
    } else {
        (0..m).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / m as f64).collect()
    }
}

fn tensor_grid(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

fn per_axis(n_points: usize, d: usize) -> usize {
    let m = (n_points as f64).powf(1.0 / d as f64).round() as usize;
    m.max(1)
}

fn grid_points(subset: &SubsetSpec, shape: &SubsetShape, n_points: usize) -> Result<Vec<Vec<f64>>> {
    let d = subset.dim();
    let m = per_axis(n_points, d);
    if let SubsetShape::Box { lo, hi, open } = shape {
        let axes: Vec<Vec<f64>> = lo.iter().zip(hi).map(|(l, h)| axis_values(*l, *h, m, !*open)).collect();
        return Ok(tensor_grid(&axes));
    }
    let bb = shape.bounding_box()?;
    // closed shapes are sampled on their closure, so include the bounding box faces
    let closed = matches!(shape, SubsetShape::Ball { open: false, .. });
    let axes: Vec<Vec<f64>> = bb.lo.iter().zip(&bb.hi).map(|(l, h)| axis_values(*l, *h, m, closed)).collect();
    Ok(tensor_grid(&axes).into_iter().filter(|p| subset.contains(p)).collect())
}

fn halton_points(subset: &SubsetSpec, n_points: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let d = subset.dim();
    if d > PRIMES.len() {
        return Err(Error::Unsupported(format!(
            "quasi-random sampling above dimension {}",
            PRIMES.len()
        )));
    }
    let bb = subset.shape().bounding_box()?;
    let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    let mut out = Vec::with_capacity(n_points);
    let max_tries = n_points * MAX_REJECTION_FACTOR;
    for i in 1..=max_tries as u64 {
        let p: Vec<f64> = (0..d)
            .map(|k| {
                let u = (radical_inverse(i, PRIMES[k]) + shift[k]).fract();
                bb.lo[k] + (bb.hi[k] - bb.lo[k]) * u
            })
            .collect();
        if subset.contains(&p) {
            out.push(p);
            if out.len() == n_points {
                break;
            }
        }
    }
    Ok(out)
}

fn draw_pairs(points: &[Vec<f64>], norm: Norm, mu: f64, n_pairs: usize, rng: &mut ChaCha8Rng) -> Vec<Pair> {
    let d = points[0].len();
    let mut pairs = Vec::with_capacity(n_pairs);
    while pairs.len() < n_pairs {
        let x = &points[rng.random_range(0..points.len())];
        let dir: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let len = norm.norm_slice(&dir);
        // radius in (0, μ]
        let rho = mu * (1.0 - rng.random::<f64>());
        if len < 1e-3 || rho == 0.0 {
            continue;
        }
        let mut x_tilde: Vec<f64> = x.iter().zip(&dir).map(|(a, v)| a + rho * v / len).collect();
        let mut s = 1.0;
        while norm.dist_slices(x, &x_tilde) > mu {
            s *= 1.0 - 1e-12;
            x_tilde = x.iter().zip(&dir).map(|(a, v)| a + s * rho * v / len).collect();
        }
        if x_tilde.as_slice() != x.as_slice() {
            pairs.push(Pair { x: x.clone(), x_tilde });
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;

    fn unit_interval_subset() -> SubsetSpec {
        SubsetSpec::new(DomainSpec::interval(-1.0, 1.0).unwrap(), SubsetShape::interval(-0.5, 0.5)).unwrap()
    }

    #[test]
    fn eleven_point_grid() {
        let s = sample(&unit_interval_subset(), 0.1, SampleStrategy::Grid, 11, 0, 0).unwrap();
        assert_eq!(s.points.len(), 11);
        for (i, p) in s.points.iter().enumerate() {
            assert!((p[0] - (-0.5 + 0.1 * i as f64)).abs() < 1e-15);
        }
    }

    #[test]
    fn pairs_respect_contract_and_seed() {
        let a = sample(&unit_interval_subset(), 0.3, SampleStrategy::QuasiRandom, 50, 200, 7).unwrap();
        let b = sample(&unit_interval_subset(), 0.3, SampleStrategy::QuasiRandom, 50, 200, 7).unwrap();
        assert_eq!(a, b);
        a.check_pairs().unwrap();
        let c = sample(&unit_interval_subset(), 0.3, SampleStrategy::QuasiRandom, 50, 200, 8).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn empty_subset_is_reported() {
        let d = DomainSpec::interval(-1.0, 1.0).unwrap();
        let s = SubsetSpec::new(d, SubsetShape::Points { points: vec![] }).unwrap();
        assert!(matches!(sample(&s, 0.1, SampleStrategy::Grid, 10, 10, 0), Err(Error::EmptySample)));
    }

    #[test]
    fn mu_above_margin_is_rejected() {
        assert!(matches!(
            sample(&unit_interval_subset(), 0.6, SampleStrategy::Grid, 10, 10, 0),
            Err(Error::MarginViolation { .. })
        ));
    }

    #[test]
    fn ball_grid_stays_inside() {
        let d = DomainSpec::unit_ball(Norm::Euclidean, 2).unwrap();
        let s = SubsetSpec::new(
            d,
            SubsetShape::Ball {
                center: vec![0.0, 0.0],
                radius: 0.5,
                open: false,
            },
        )
        .unwrap();
        let smp = sample(&s, 0.2, SampleStrategy::Grid, 400, 50, 1).unwrap();
        assert!(smp.points.len() > 250);
        assert!(smp.points.iter().all(|p| Norm::Euclidean.norm_slice(p) <= 0.5));
        smp.check_pairs().unwrap();
    }
}
