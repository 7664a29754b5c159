//! The four commands. Each returns an [`Outcome`]; errors are classified
//! into exit codes by [`crate::exit_code`].

use anyhow::Context;
use semigroup_lab::domain::{
    ell_infinity_refutation, finite_path_length_certificate, inflate, sample, PathCertificate, PathLengthOutcome, SampleStrategy,
    SubsetSpec,
};
use semigroup_lab::expr::Expr;
use semigroup_lab::generator::{
    cauchy_problem_residual, detect_corners, estimate_generator_with, verify_corollary_quotients, verify_lemma_derivative,
    verify_lemma_iterates_with, verify_transfer_estimate, InequalityReport,
};
use semigroup_lab::moduli::{derivative_modulus_with_step, t_continuity_modulus, t_lipschitz_modulus, ModulusReport, Witness};
use semigroup_lab::semigroup::{compose_residual, FamilySpec, SemigroupFamily, VectorField};
use semigroup_lab::Operator;
use serde::Serialize;

use crate::config::{config_error, CheckKind, ScenarioConfig};
use crate::output::{writer, Sink};

/// Whether every requested criterion passed, with one summary line each.
#[derive(Debug, Default)]
pub struct Outcome {
    pub pass: bool,
    pub lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            pass: true,
            lines: Vec::new(),
        }
    }

    fn record(&mut self, pass: bool, line: String) {
        self.pass &= pass;
        self.lines.push(format!("[{}] {line}", if pass { "PASS" } else { "FAIL" }));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum LemmaKind {
    Iterates,
    Corollary,
    Derivative,
    Transfer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ExampleKind {
    PiecewiseCorner,
    EllinfPaths,
}

fn witness_text(w: &Witness) -> String {
    match w {
        Witness::Point { x } => format!("x = {x:?}"),
        Witness::Pair { x, x_tilde } => format!("x = {x:?}, x̃ = {x_tilde:?}"),
    }
}

/// Index of the smallest grid time.
fn finest(report: &ModulusReport) -> usize {
    (0..report.t_grid.len())
        .min_by(|&a, &b| report.t_grid[a].total_cmp(&report.t_grid[b]))
        .unwrap_or(0)
}

fn write_modulus(sink: &mut Sink, stem: &str, report: &ModulusReport) -> anyhow::Result<()> {
    sink.csv(stem, |buf| Ok(report.write_csv(buf)?))?;
    sink.json(stem, "report", report)
}

#[derive(Serialize)]
struct LawRow {
    s: f64,
    t: f64,
    residual: f64,
    witness: Vec<f64>,
}

/// Semigroup-law residuals and the T-moduli requested in `[[check]]`.
pub fn cmd_check(cfg: &ScenarioConfig, sink: &mut Sink) -> anyhow::Result<Outcome> {
    if cfg.check.is_empty() {
        return Err(config_error("no [[check]] entries"));
    }
    let family = cfg.family()?;
    let (subset, mu) = cfg.subset_on(family.domain())?;
    let smp = cfg.draw(&subset, mu)?;
    let grid = cfg.grid.times()?;
    let mut out = Outcome::new();
    for (i, spec) in cfg.check.iter().enumerate() {
        let bound = spec.max.unwrap_or(cfg.tolerance);
        let stem = format!(
            "{}_check{}_{}",
            cfg.name,
            i + 1,
            serde_json::to_value(spec.kind)?.as_str().unwrap_or("check")
        );
        match spec.kind {
            CheckKind::SemigroupLaw => {
                let ts = if spec.t.is_empty() { &spec.s } else { &spec.t };
                let mut rows = Vec::new();
                for &s in &spec.s {
                    for &t in ts {
                        let r = compose_residual(&family, s, t, &smp)?;
                        let witness = match &r.witnesses[0] {
                            Witness::Point { x } => x.clone(),
                            Witness::Pair { x, .. } => x.clone(),
                        };
                        rows.push(LawRow {
                            s,
                            t,
                            residual: r.values[0],
                            witness,
                        });
                    }
                }
                let worst = rows
                    .iter()
                    .max_by(|a, b| a.residual.total_cmp(&b.residual))
                    .expect("nonempty s list");
                out.record(
                    worst.residual <= bound,
                    format!(
                        "semigroup law: max residual {:e} (bound {bound:e}) at s = {}, t = {}, x = {:?}",
                        worst.residual, worst.s, worst.t, worst.witness
                    ),
                );
                sink.csv(&stem, |buf| {
                    let dim = rows[0].witness.len();
                    let mut w = writer(buf);
                    let mut header = vec!["s".to_string(), "t".into(), "residual".into()];
                    header.extend((1..=dim).map(|k| format!("w_x{k}")));
                    w.write_record(&header)?;
                    for r in &rows {
                        let mut rec = vec![format!("{:e}", r.s), format!("{:e}", r.t), format!("{:e}", r.residual)];
                        rec.extend(r.witness.iter().map(|v| format!("{v:e}")));
                        w.write_record(&rec)?;
                    }
                    w.flush()?;
                    Ok(())
                })?;
                sink.json(&stem, "report", &rows)?;
            }
            CheckKind::TContinuity | CheckKind::TLipschitz | CheckKind::Derivative => {
                let report = match spec.kind {
                    CheckKind::TContinuity => t_continuity_modulus(&family, &subset, spec.t0, &grid, &smp)?,
                    CheckKind::TLipschitz => t_lipschitz_modulus(&family, &subset, mu, &grid, &smp)?,
                    _ => {
                        cfg.check_inflation(&subset, mu)?;
                        let d_mu = inflate(&subset, mu)?;
                        let s = sample(&d_mu, mu.min(d_mu.margin()), SampleStrategy::Grid, cfg.sample.n_points, 0, cfg.seed)?;
                        derivative_modulus_with_step(&family, &d_mu, &grid, &s, cfg.fd_step)?
                    }
                };
                let k = finest(&report);
                out.record(
                    report.values[k] <= bound,
                    format!(
                        "{}: {:e} at t = {:e} (bound {bound:e}), witness {}",
                        report.quantity,
                        report.values[k],
                        report.t_grid[k],
                        witness_text(&report.witnesses[k])
                    ),
                );
                write_modulus(sink, &stem, &report)?;
            }
        }
    }
    Ok(out)
}

/// The generating field to compare against: `[generator] field`, the field
/// of a flow family, or the known generator of a catalog family.
fn reference_field(cfg: &ScenarioConfig, family: &SemigroupFamily) -> anyhow::Result<Option<VectorField>> {
    let domain = family.domain().clone();
    let parse = |src: &[String]| -> anyhow::Result<VectorField> {
        let exprs = src.iter().map(|s| Expr::parse(s)).collect::<Result<Vec<_>, _>>()?;
        VectorField::from_exprs(domain.clone(), exprs).map_err(|e| config_error(format!("[generator] field: {e}")))
    };
    if let Some(f) = &cfg.generator.field {
        return parse(f).map(Some);
    }
    Ok(match cfg.family.as_ref() {
        Some(FamilySpec::Flow { field, .. }) => Some(parse(field)?),
        Some(FamilySpec::Linear { matrix }) => {
            let n = matrix.len();
            let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
            Some(VectorField::linear(domain, Operator::from_row_slice(n, n, &flat))?)
        }
        Some(FamilySpec::Cubic) => Some(VectorField::neg_cube(domain)),
        Some(FamilySpec::Rotation) => Some(VectorField::linear(domain, Operator::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]))?),
        Some(FamilySpec::Identity) => {
            let n = domain.ambient_dim;
            Some(VectorField::linear(domain, Operator::zeros(n, n))?)
        }
        _ => None,
    })
}

#[derive(Serialize)]
struct GeneratorDoc<'a> {
    estimate: &'a semigroup_lab::generator::GeneratorEstimate,
    certificate_holds: bool,
    field: Option<String>,
    field_error: Option<f64>,
    field_tolerance: Option<f64>,
    residuals: Vec<ModulusReport>,
}

/// Certified generator estimate, comparison with the reference field and
/// Cauchy-problem residuals.
pub fn cmd_generator(cfg: &ScenarioConfig, sink: &mut Sink) -> anyhow::Result<Outcome> {
    let family = cfg.family()?;
    let (subset, mu) = cfg.subset_on(family.domain())?;
    let smp = cfg.draw(&subset, mu)?;
    let schedule = cfg.generator.schedule()?;
    let est = estimate_generator_with(&family, &subset, mu, &schedule, &smp, &cfg.generator.config())?;
    let mut out = Outcome::new();
    let holds = est.certificate_holds();
    let c = est.certificate;
    out.record(
        est.converged && holds,
        format!(
            "generator of {}: converged = {}, cauchy gap {:e} ≤ 6εL = {:e}, sup ‖f‖ = {:e} ≤ L = {:e} (δ₁ = {:e}, μ = {mu})",
            family.name(),
            est.converged,
            est.cauchy_gap,
            c.bound,
            est.sup_f,
            c.l,
            c.delta1
        ),
    );
    let field = reference_field(cfg, &family)?;
    let norm = family.domain().norm;
    let mut field_error = None;
    let mut field_tolerance = None;
    let mut residuals = Vec::new();
    if let Some(f) = &field {
        let err = est
            .points
            .iter()
            .zip(&est.f_values)
            .map(|(x, v)| norm.dist_slices(v, &f.eval(x)))
            .fold(0.0, f64::max);
        let tol = cfg
            .generator
            .field_tolerance
            .unwrap_or_else(|| (10.0 * family.tolerance().unwrap_or(0.0)).max(1e-6));
        out.record(
            err <= tol,
            format!("sup ‖f − {}‖ over the sample = {err:e} (bound {tol:e})", f.name),
        );
        field_error = Some(err);
        field_tolerance = Some(tol);
        let points = if cfg.generator.residual_points.is_empty() {
            vec![est.points[est.points.len() - 1].clone()]
        } else {
            cfg.generator.residual_points.clone()
        };
        for x in &points {
            let r = cauchy_problem_residual(&family, f, x, &cfg.generator.residual_times, cfg.generator.residual_step)?;
            out.lines.push(format!(
                "[INFO] Cauchy residual at x = {x:?}, step {:e}: max {:e}",
                cfg.generator.residual_step,
                r.max()
            ));
            residuals.push(r);
        }
    }
    let stem = format!("{}_generator", cfg.name);
    sink.csv(&stem, |buf| Ok(est.write_csv(buf)?))?;
    sink.csv(&format!("{stem}_gaps"), |buf| {
        let mut w = writer(buf);
        w.write_record(["t", "gap"])?;
        for (t, g) in est.t_schedule.iter().skip(1).zip(&est.gaps) {
            w.write_record([format!("{t:e}"), format!("{g:e}")])?;
        }
        w.flush()?;
        Ok(())
    })?;
    for (i, r) in residuals.iter().enumerate() {
        sink.csv(&format!("{stem}_residual{}", i + 1), |buf| Ok(r.write_csv(buf)?))?;
    }
    let doc = GeneratorDoc {
        estimate: &est,
        certificate_holds: holds,
        field: field.as_ref().map(|f| f.name.clone()),
        field_error,
        field_tolerance,
        residuals,
    };
    sink.json(&stem, "report", &doc)?;
    Ok(out)
}

fn lemma_outcome(report: &InequalityReport) -> Outcome {
    let mut out = Outcome::new();
    let w = report.worst();
    out.record(
        report.pass,
        format!(
            "{} ({} checks): min margin {:e} at x = {:?} (lhs {:e}, rhs {:e}), ℓ = {}, tolerance {:e}",
            report.description,
            report.per_point.len(),
            report.min_margin,
            w.point,
            w.lhs,
            w.rhs,
            report.ell.map_or("n/a".into(), |v| format!("{v:e}")),
            report.tolerance
        ),
    );
    out
}

/// One of the four inequality verifiers.
pub fn cmd_lemma(cfg: &ScenarioConfig, which: LemmaKind, sink: &mut Sink) -> anyhow::Result<Outcome> {
    let l = &cfg.lemma;
    let report = match which {
        LemmaKind::Iterates | LemmaKind::Derivative => {
            let domain = cfg.resolved_domain()?;
            let phi = cfg.lemma_map(&domain)?;
            let (subset, mu) = cfg.subset_on(&domain)?;
            let smp = cfg.draw(&subset, mu)?;
            if which == LemmaKind::Iterates {
                verify_lemma_iterates_with(&phi, &subset, mu, l.p, &smp, cfg.tolerance, l.ell)?
            } else {
                cfg.check_inflation(&subset, mu)?;
                verify_lemma_derivative(&phi, &subset, mu, &smp, cfg.tolerance)?
            }
        }
        LemmaKind::Corollary => {
            let family = cfg.family()?;
            let (subset, mu) = cfg.subset_on(family.domain())?;
            let smp = cfg.draw(&subset, mu)?;
            verify_corollary_quotients(&family, l.t0, l.p, &subset, mu, &smp, cfg.tolerance)?
        }
        LemmaKind::Transfer => {
            let family = cfg.family()?.into_vector_valued();
            let domain = family.domain().clone();
            let (d1, mu) = cfg.subset_on(&domain)?;
            let smp = cfg.draw(&d1, mu)?;
            let cert = match (&l.d2, l.l_bound) {
                (Some(shape), Some(l_bound)) => {
                    let d2 = SubsetSpec::new(domain.clone(), shape.clone()).map_err(|e| config_error(format!("[lemma] d2: {e}")))?;
                    PathLengthOutcome::Certificate(PathCertificate { d2, l_bound })
                }
                (None, None) => finite_path_length_certificate(&domain, &d1)?,
                _ => return Err(config_error("[lemma] d2 and l_bound must be given together")),
            };
            verify_transfer_estimate(&family, &d1, &cert, l.t0, &cfg.grid.times()?, &smp, cfg.tolerance)?
        }
    };
    let stem = format!("{}_lemma_{}", cfg.name, format!("{which:?}").to_lowercase());
    sink.csv(&stem, |buf| Ok(report.write_csv(buf)?))?;
    sink.json(&stem, "report", &report)?;
    Ok(lemma_outcome(&report))
}

#[derive(Serialize)]
struct CornerRow {
    x: f64,
    corners: usize,
    t_corner: Option<f64>,
    expected_t: Option<f64>,
    left_slope: Option<f64>,
    right_slope: Option<f64>,
    expected_left: Option<f64>,
    expected_right: Option<f64>,
    pass: bool,
}

/// Slope tolerance of the corner table.
const SLOPE_TOLERANCE: f64 = 1e-4;

fn piecewise_corner(cfg: &ScenarioConfig, sink: &mut Sink) -> anyhow::Result<Outcome> {
    let e = &cfg.example;
    if e.t_points < 3 || !(e.t_hi > e.t_lo) {
        return Err(config_error("[example] needs t_points ≥ 3 and t_hi > t_lo"));
    }
    let family = semigroup_lab::semigroup::example31_family();
    let grid: Vec<f64> = (0..e.t_points)
        .map(|i| e.t_lo + (e.t_hi - e.t_lo) * i as f64 / (e.t_points - 1) as f64)
        .collect();
    let mut rows = Vec::new();
    for &x in &e.xs {
        let found = detect_corners(&family, &[x], &grid, e.step, e.jump_threshold)?;
        let a = x.abs();
        let row = if a > 0.5 && (2.0 * a).ln() < e.t_hi {
            let t0 = (2.0 * a).ln();
            let (l, r) = (-x * (-t0).exp(), -4.0 * x * a * (-2.0 * t0).exp());
            let c = found.first();
            let pass = found.len() == 1
                && c.is_some_and(|c| {
                    (c.t - t0).abs() <= 2.0 * e.step
                        && (c.left_slope - l).abs() <= SLOPE_TOLERANCE
                        && (c.right_slope - r).abs() <= SLOPE_TOLERANCE
                });
            CornerRow {
                x,
                corners: found.len(),
                t_corner: c.map(|c| c.t),
                expected_t: Some(t0),
                left_slope: c.map(|c| c.left_slope),
                right_slope: c.map(|c| c.right_slope),
                expected_left: Some(l),
                expected_right: Some(r),
                pass,
            }
        } else {
            CornerRow {
                x,
                corners: found.len(),
                t_corner: found.first().map(|c| c.t),
                expected_t: None,
                left_slope: None,
                right_slope: None,
                expected_left: None,
                expected_right: None,
                pass: found.is_empty(),
            }
        };
        rows.push(row);
    }
    let mut out = Outcome::new();
    for r in &rows {
        out.record(
            r.pass,
            format!(
                "x = {}: {} corner(s), t = {}, ln(2|x|) = {}",
                r.x,
                r.corners,
                r.t_corner.map_or("-".into(), |v| format!("{v:.8}")),
                r.expected_t.map_or("-".into(), |v| format!("{v:.8}"))
            ),
        );
    }
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:e}"));
    let stem = format!("{}_piecewise_corner", cfg.name);
    sink.csv(&stem, |buf| {
        let mut w = writer(buf);
        w.write_record([
            "x",
            "corners",
            "t_corner",
            "ln_2x",
            "left_slope",
            "right_slope",
            "expected_left",
            "expected_right",
            "pass",
        ])?;
        for r in &rows {
            w.write_record([
                format!("{:e}", r.x),
                r.corners.to_string(),
                opt(r.t_corner),
                opt(r.expected_t),
                opt(r.left_slope),
                opt(r.right_slope),
                opt(r.expected_left),
                opt(r.expected_right),
                r.pass.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    sink.json(&stem, "rows", &rows)?;
    Ok(out)
}

fn ellinf_paths(cfg: &ScenarioConfig, sink: &mut Sink) -> anyhow::Result<Outcome> {
    let e = &cfg.example;
    let mut rows = ell_infinity_refutation(e.a, e.n_max).map_err(|err| match err {
        semigroup_lab::Error::BadParameter(m) => config_error(format!("[example]: {m}")),
        other => other.into(),
    })?;
    rows.sort_by_key(|r| (r.truncation, r.j));
    let mut out = Outcome::new();
    for n in 2..=e.n_max {
        let col: Vec<_> = rows.iter().filter(|r| r.truncation == n).collect();
        let monotone = col.windows(2).all(|w| w[1].lower_bound >= w[0].lower_bound);
        let failing: Vec<usize> = col.iter().filter(|r| !r.meets_half_j()).map(|r| r.j).collect();
        let reachable = col
            .iter()
            .all(|r| r.witness_length.is_finite() && r.witness_length >= r.lower_bound);
        out.record(
            failing.is_empty() && monotone && reachable,
            format!(
                "n = {n}: lower bounds {:?} vs j/2; below j/2 at j = {failing:?}; monotone = {monotone}; witnesses reach every x^(j) = {reachable}",
                col.iter().map(|r| (r.lower_bound * 1e6).round() / 1e6).collect::<Vec<_>>()
            ),
        );
    }
    let stem = format!("{}_ellinf_paths", cfg.name);
    sink.csv(&stem, |buf| {
        let mut w = writer(buf);
        w.write_record(["n", "j", "lower_bound", "half_j", "witness_length", "meets_half_j"])?;
        for r in &rows {
            w.write_record([
                r.truncation.to_string(),
                r.j.to_string(),
                format!("{:e}", r.lower_bound),
                format!("{:e}", r.half_j),
                format!("{:e}", r.witness_length),
                r.meets_half_j().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    sink.json(&stem, "rows", &rows)?;
    Ok(out)
}

/// The two worked examples: the corner table and the ℓ∞ path-length table.
pub fn cmd_example(cfg: &ScenarioConfig, which: ExampleKind, sink: &mut Sink) -> anyhow::Result<Outcome> {
    match which {
        ExampleKind::PiecewiseCorner => piecewise_corner(cfg, sink),
        ExampleKind::EllinfPaths => ellinf_paths(cfg, sink),
    }
}

/// Prints the summary lines of an outcome.
pub fn print_outcome(out: &Outcome, mut w: impl std::io::Write) -> anyhow::Result<()> {
    for l in &out.lines {
        writeln!(w, "{l}").context("writing summary")?;
    }
    Ok(())
}
