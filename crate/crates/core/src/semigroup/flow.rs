//! Flow maps of autonomous fields by the Dormand–Prince 5(4) pair.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::field::VectorField;
use super::{FamilyKind, SemigroupFamily};
use crate::error::{Error, Escape, Result};
use crate::Operator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub atol: f64,
    pub rtol: f64,
    /// Relative step size below which integration is abandoned.
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            atol: 1e-10,
            rtol: 1e-10,
            min_step: 1e-14,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn tolerance(&self) -> f64 {
        self.atol.max(self.rtol)
    }

    fn validate(&self) -> Result<()> {
        if !(self.atol > 0.0 && self.rtol >= 0.0 && self.min_step > 0.0 && self.max_steps > 0) {
            return Err(Error::BadParameter(format!("integrator settings {self:?}")));
        }
        Ok(())
    }
}

/// Accepted steps of one integration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial state")
    }
}

const A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

fn scaled_rms(v: &[f64], y: &[f64], y_new: &[f64], cfg: &IntegratorConfig) -> f64 {
    let s: f64 = v
        .iter()
        .zip(y.iter().zip(y_new))
        .map(|(e, (a, b))| {
            let sc = cfg.atol + cfg.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / v.len() as f64).sqrt()
}

fn initial_step<F: Fn(&[f64], &mut [f64])>(rhs: &F, y0: &[f64], f0: &[f64], t_end: f64, cfg: &IntegratorConfig) -> f64 {
    let d0 = scaled_rms(y0, y0, y0, cfg);
    let d1 = scaled_rms(f0, y0, y0, cfg);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    rhs(&y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = scaled_rms(&diff, y0, y0, cfg) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(t_end)
}

/// Integrates `y' = rhs(y)` from `y0` over `[0, t_end]`, checking `inside`
/// after every accepted step.
fn dopri5<F, I>(rhs: F, y0: &[f64], t_end: f64, cfg: &IntegratorConfig, inside: I, record: bool) -> Result<Trajectory>
where
    F: Fn(&[f64], &mut [f64]),
    I: Fn(&[f64]) -> bool,
{
    cfg.validate()?;
    let n = y0.len();
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![y0.to_vec()],
    };
    if t_end == 0.0 {
        return Ok(traj);
    }
    let mut k = vec![vec![0.0; n]; 7];
    let mut y = y0.to_vec();
    rhs(&y, &mut k[0]);
    let mut h = initial_step(&rhs, &y, &k[0], t_end, cfg);
    let mut t = 0.0;
    let mut y_stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err_vec = vec![0.0; n];
    let mut last_rejected = false;
    for _ in 0..cfg.max_steps {
        if t >= t_end {
            break;
        }
        let final_step = t + h >= t_end;
        if final_step {
            h = t_end - t;
        }
        if h < cfg.min_step * t.abs().max(1.0) {
            return Err(Error::StiffnessFailure { time: t, step: h });
        }
        for s in 0..6 {
            for i in 0..n {
                y_stage[i] = y[i] + h * A[s].iter().zip(&k).map(|(a, kj)| a * kj[i]).sum::<f64>();
            }
            let (_, rest) = k.split_at_mut(s + 1);
            rhs(&y_stage, &mut rest[0]);
        }
        // the last stage was evaluated at the fifth-order solution
        y_new.copy_from_slice(&y_stage);
        for i in 0..n {
            err_vec[i] = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
        }
        let err = if y_new.iter().all(|v| v.is_finite()) {
            scaled_rms(&err_vec, &y, &y_new, cfg)
        } else {
            f64::INFINITY
        };
        if err <= 1.0 {
            t = if final_step { t_end } else { t + h };
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
            if !inside(&y) {
                return Err(Error::TrajectoryEscape(Escape::Time(t)));
            }
            if record {
                traj.times.push(t);
                traj.states.push(y.clone());
            }
            let mut fac = SAFETY * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(FAC_MIN, if last_rejected { 1.0 } else { FAC_MAX });
            h *= fac;
            last_rejected = false;
        } else {
            let fac = if err.is_finite() {
                (SAFETY * err.powf(-0.2)).max(FAC_MIN)
            } else {
                FAC_MIN
            };
            h *= fac;
            last_rejected = true;
        }
    }
    if t < t_end {
        return Err(Error::StiffnessFailure { time: t, step: h });
    }
    if !record {
        traj.times.push(t);
        traj.states.push(y);
    }
    Ok(traj)
}

/// Solves `u' = f(u)`, `u(0) = x` on `[0, t]`, recording every accepted step
/// when `record` is set (otherwise only the endpoints).
pub fn integrate(field: &VectorField, x: &[f64], t: f64, cfg: &IntegratorConfig, record: bool) -> Result<Trajectory> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::BadParameter(format!("time t = {t} must be finite and nonnegative")));
    }
    let rhs = |y: &[f64], out: &mut [f64]| out.copy_from_slice(&field.eval(y));
    dopri5(rhs, x, t, cfg, |y| field.domain.contains(y), record)
}

/// `(u(t), ∂u(t)/∂x)` from the variational equations `Φ' = Df(u)Φ`.
fn integrate_variational(field: &VectorField, x: &[f64], t: f64, cfg: &IntegratorConfig) -> Result<Operator> {
    let n = x.len();
    let mut y0 = x.to_vec();
    y0.extend(Operator::identity(n, n).iter());
    let rhs = |y: &[f64], out: &mut [f64]| {
        let (u, phi) = y.split_at(n);
        out[..n].copy_from_slice(&field.eval(u));
        let d = field.jacobian(u) * Operator::from_column_slice(n, n, phi);
        out[n..].copy_from_slice(d.as_slice());
    };
    let traj = dopri5(rhs, &y0, t, cfg, |y| field.domain.contains(&y[..n]), false)?;
    Ok(Operator::from_column_slice(n, n, &traj.last()[n..]))
}

/// The flow `F_t(x) = u(t)` of `u' = f(u)`, `u(0) = x`. An analytic
/// derivative (variational equations) is attached when the field has a
/// Jacobian.
pub fn flow_family(field: VectorField, cfg: IntegratorConfig) -> Result<SemigroupFamily> {
    cfg.validate()?;
    let domain = field.domain.clone();
    let name = format!("flow[{}]", field.name);
    let eval_field = field.clone();
    let mut fam = SemigroupFamily::new(
        name,
        FamilyKind::FlowGenerated,
        domain,
        Arc::new(move |t, x: &[f64]| Ok(integrate(&eval_field, x, t, &cfg, false)?.last().to_vec())),
    )
    .with_param("field", &field.name)
    .with_param("integrator", cfg)
    .with_tolerance(cfg.tolerance());
    if field.has_jacobian() {
        fam = fam.with_derivative(Arc::new(move |t, x: &[f64]| integrate_variational(&field, x, t, &cfg)));
    }
    Ok(fam)
}
