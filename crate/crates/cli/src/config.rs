//! Scenario files: a TOML tree naming a domain, a family, a base subset, a
//! sample, a time grid and the sections each command reads.

use std::path::Path;

use anyhow::{bail, Context};
use semigroup_lab::domain::{inflate, sample, DomainSpec, SampleSet, SampleStrategy, Shape, SubsetShape, SubsetSpec};
use semigroup_lab::expr::Expr;
use semigroup_lab::generator::{schedule, GeneratorConfig, SCHEDULE_FLOOR};
use semigroup_lab::moduli::{geometric_grid, Refinement, DEFAULT_FD_STEP, DEFAULT_GRID_POINTS};
use semigroup_lab::semigroup::{FamilySpec, SelfMap, SemigroupFamily};
use semigroup_lab::Norm;
use serde::{Deserialize, Serialize};

/// A problem with the scenario itself, reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub(crate) fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(default)]
    pub norm: Norm,
    pub shape: Shape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetConfig {
    pub shape: SubsetShape,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub strategy: SampleStrategy,
    pub n_points: usize,
    pub n_pairs: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            strategy: SampleStrategy::Grid,
            n_points: 21,
            n_pairs: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridConfig {
    /// `t_max · 2^{-k}`, `k = 0..n`.
    Geometric {
        t_max: f64,
        n: usize,
    },
    /// `n` equally spaced times from `lo` to `hi`.
    Uniform {
        lo: f64,
        hi: f64,
        n: usize,
    },
    Explicit {
        times: Vec<f64>,
    },
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig::Geometric {
            t_max: 0.1,
            n: DEFAULT_GRID_POINTS,
        }
    }
}

impl GridConfig {
    pub fn times(&self) -> anyhow::Result<Vec<f64>> {
        let times = match self {
            GridConfig::Geometric { t_max, n } => geometric_grid(*t_max, *n),
            GridConfig::Uniform { lo, hi, n } => match n {
                0 => Vec::new(),
                1 => vec![*lo],
                _ => (0..*n).map(|i| lo + (hi - lo) * i as f64 / (*n - 1) as f64).collect(),
            },
            GridConfig::Explicit { times } => times.clone(),
        };
        if times.is_empty() {
            return Err(config_error("[grid] yields no times"));
        }
        if let Some(t) = times.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return Err(config_error(format!("[grid] time {t} must be finite and nonnegative")));
        }
        Ok(times)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    SemigroupLaw,
    TContinuity,
    TLipschitz,
    Derivative,
}

/// One requested check and its pass threshold. Law residuals pass when
/// every residual is at most `max`; the moduli pass when their value at the
/// smallest grid time is at most `max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub kind: CheckKind,
    #[serde(default)]
    pub max: Option<f64>,
    /// Law check times `s`; `t` defaults to the same list.
    #[serde(default)]
    pub s: Vec<f64>,
    #[serde(default)]
    pub t: Vec<f64>,
    /// Base time of the continuity modulus.
    #[serde(default)]
    pub t0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSection {
    pub epsilon: f64,
    pub t_max: f64,
    pub floor: f64,
    pub consecutive: usize,
    pub gap_floor: Option<f64>,
    pub refinement: Refinement,
    /// Field the estimate is compared with and the Cauchy residual is taken
    /// against; flow families default to their own field.
    pub field: Option<Vec<String>>,
    /// Pass bound on `sup ‖f − field‖` over the sample.
    pub field_tolerance: Option<f64>,
    /// Cauchy residual settings.
    pub residual_points: Vec<Vec<f64>>,
    pub residual_times: Vec<f64>,
    pub residual_step: f64,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        let g = GeneratorConfig::default();
        GeneratorSection {
            epsilon: g.epsilon,
            t_max: 0.5,
            floor: SCHEDULE_FLOOR,
            consecutive: g.consecutive,
            gap_floor: g.gap_floor,
            refinement: g.refinement,
            field: None,
            field_tolerance: None,
            residual_points: Vec::new(),
            residual_times: vec![0.1, 0.5],
            residual_step: 1e-3,
        }
    }
}

impl GeneratorSection {
    pub fn config(&self) -> GeneratorConfig {
        GeneratorConfig {
            epsilon: self.epsilon,
            gap_floor: self.gap_floor,
            consecutive: self.consecutive,
            refinement: self.refinement,
        }
    }

    pub fn schedule(&self) -> anyhow::Result<Vec<f64>> {
        let s = schedule(self.t_max, self.floor);
        if s.len() < 2 {
            return Err(config_error(format!(
                "[generator] t_max = {} and floor = {} give fewer than two times",
                self.t_max, self.floor
            )));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaSection {
    /// Componentwise expressions of `φ` in `x1, …, xn`.
    pub map: Option<Vec<String>>,
    pub p: usize,
    pub t0: f64,
    /// Bound `ℓ` supplied for the iterate inequality.
    pub ell: Option<f64>,
    /// Path-length bound and enlarged subset for the transfer estimate;
    /// computed from the domain when absent.
    pub l_bound: Option<f64>,
    pub d2: Option<SubsetShape>,
}

impl Default for LemmaSection {
    fn default() -> Self {
        LemmaSection {
            map: None,
            p: 2,
            t0: 0.1,
            ell: None,
            l_bound: None,
            d2: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExampleSection {
    /// Base points for the corner table.
    pub xs: Vec<f64>,
    pub step: f64,
    pub jump_threshold: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub t_points: usize,
    /// Box half-width `a` and largest truncation of the ℓ∞ example.
    pub a: f64,
    pub n_max: usize,
}

impl Default for ExampleSection {
    fn default() -> Self {
        ExampleSection {
            xs: vec![0.3, 0.4, 0.6, 0.7, 0.8, 0.9],
            step: 1e-5,
            jump_threshold: 1e-3,
            t_lo: 0.0,
            t_hi: 1.0,
            t_points: 201,
            a: 1.0 / 3.0,
            n_max: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
    pub format: Format,
}

fn default_name() -> String {
    "scenario".into()
}

fn default_tolerance() -> f64 {
    1e-9
}

fn default_fd_step() -> f64 {
    DEFAULT_FD_STEP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default)]
    pub family: Option<FamilySpec>,
    #[serde(default)]
    pub domain: Option<DomainConfig>,
    #[serde(default)]
    pub subset: Option<SubsetConfig>,
    #[serde(default)]
    pub sample: SampleConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub check: Vec<CheckSpec>,
    #[serde(default)]
    pub generator: GeneratorSection,
    #[serde(default)]
    pub lemma: LemmaSection,
    #[serde(default)]
    pub example: ExampleSection,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty scenario is valid")
    }
}

impl ScenarioConfig {
    /// Parses TOML; syntax and type errors carry line and column.
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| config_error(format!("scenario: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Checks that do not need any numerics.
    pub fn validate(&self) -> anyhow::Result<()> {
        let mut errors = Vec::new();
        if !(self.tolerance >= 0.0) {
            errors.push(format!("tolerance = {} must be nonnegative", self.tolerance));
        }
        if !(self.fd_step > 0.0) {
            errors.push(format!("fd_step = {} must be positive", self.fd_step));
        }
        if let Some(s) = &self.subset {
            if !(s.mu > 0.0) {
                errors.push(format!("[subset] mu = {} must be positive", s.mu));
            }
        }
        for (i, c) in self.check.iter().enumerate() {
            if c.kind == CheckKind::SemigroupLaw && c.s.is_empty() {
                errors.push(format!("[[check]] #{}: semigroup_law needs a nonempty `s` list", i + 1));
            }
        }
        if self.lemma.p == 0 {
            errors.push("[lemma] p must be at least 1".into());
        }
        if let Some(map) = &self.lemma.map {
            for (i, src) in map.iter().enumerate() {
                if let Err(e) = Expr::parse(src) {
                    errors.push(format!("[lemma] map[{i}]: {e}"));
                }
            }
        }
        if let Some(field) = &self.generator.field {
            for (i, src) in field.iter().enumerate() {
                if let Err(e) = Expr::parse(src) {
                    errors.push(format!("[generator] field[{i}]: {e}"));
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(config_error(errors.join("\n")))
        }
    }

    pub fn domain(&self) -> anyhow::Result<Option<DomainSpec>> {
        self.domain
            .as_ref()
            .map(|d| DomainSpec::new(d.norm, d.shape.clone()).map_err(|e| config_error(format!("[domain]: {e}"))))
            .transpose()
    }

    pub fn family(&self) -> anyhow::Result<SemigroupFamily> {
        let spec = self.family.as_ref().ok_or_else(|| config_error("missing [family] section"))?;
        spec.build(self.domain()?.as_ref())
            .map_err(|e| config_error(format!("[family]: {e}")))
    }

    /// The family's domain, or the `[domain]` section when there is no family.
    pub fn resolved_domain(&self) -> anyhow::Result<DomainSpec> {
        if self.family.is_some() {
            return Ok(self.family()?.domain().clone());
        }
        self.domain()?.ok_or_else(|| config_error("missing [domain] section"))
    }

    pub fn subset_on(&self, domain: &DomainSpec) -> anyhow::Result<(SubsetSpec, f64)> {
        let s = self.subset.as_ref().ok_or_else(|| config_error("missing [subset] section"))?;
        let subset = SubsetSpec::new(domain.clone(), s.shape.clone()).map_err(|e| config_error(format!("[subset]: {e}")))?;
        Ok((subset, s.mu))
    }

    pub fn draw(&self, subset: &SubsetSpec, mu: f64) -> anyhow::Result<SampleSet> {
        sample(
            subset,
            mu,
            self.sample.strategy,
            self.sample.n_points,
            self.sample.n_pairs,
            self.seed,
        )
        .map_err(|e| config_error(format!("[sample]: {e}")))
    }

    pub fn lemma_map(&self, domain: &DomainSpec) -> anyhow::Result<SelfMap> {
        let Some(map) = &self.lemma.map else {
            bail!(ConfigError("[lemma] map is required".into()));
        };
        let exprs = map.iter().map(|s| Expr::parse(s)).collect::<Result<Vec<_>, _>>()?;
        SelfMap::from_exprs(domain.clone(), exprs).map_err(|e| config_error(format!("[lemma] map: {e}")))
    }

    /// `D_μ` is only checked here, so a bad μ surfaces as a config error.
    pub fn check_inflation(&self, subset: &SubsetSpec, mu: f64) -> anyhow::Result<()> {
        inflate(subset, mu)
            .map(|_| ())
            .map_err(|e| config_error(format!("[subset] mu: {e}")))
    }
}
