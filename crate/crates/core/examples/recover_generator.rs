//! Recovers the generator of `F_t(x) = x / √(1 + 2tx²)` and checks it
//! against `f(x) = −x³`.

use semigroup_lab::domain::{sample, SampleStrategy, SubsetShape, SubsetSpec};
use semigroup_lab::generator::{estimate_generator, schedule, SCHEDULE_FLOOR};
use semigroup_lab::semigroup::cubic_family;

fn main() -> semigroup_lab::Result<()> {
    let family = cubic_family();
    let d_hat = SubsetSpec::new(family.domain().clone(), SubsetShape::interval(-0.5, 0.5))?;
    let points = sample(&d_hat, 0.2, SampleStrategy::Grid, 11, 50, 1)?;
    let est = estimate_generator(&family, &d_hat, 0.2, 1e-3, &schedule(0.5, SCHEDULE_FLOOR), &points)?;
    let c = est.certificate;
    println!(
        "delta1 = {}, L = {}, gap {:.2e} <= {:.2e}, converged = {}",
        c.delta1, c.l, est.cauchy_gap, c.bound, est.converged
    );
    for (x, f) in est.points.iter().zip(&est.f_values) {
        println!("x = {:+.2}  f = {:+.8}  -x^3 = {:+.8}", x[0], f[0], -x[0].powi(3));
    }
    Ok(())
}
