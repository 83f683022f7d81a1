//! Scenario files: TOML with a fixed schema.
//!
//! Parsing never stops at the first problem. Every section is decoded on its
//! own and every violation is reported together.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::{ExponentFamily, ExponentFunction};
use crate::field::{BallPolicy, Grid, GridFunction, Region, SignMode};
use crate::harness::ProbeRecipe;
use crate::operators::{OperatorHandle, OperatorKind};
use crate::planner::{self, ExtrapolationPlan, LimitedMode, LimitedOptions, XRational};
use crate::weights::Weight;

pub const SCHEMA_VERSION: u32 = 1;

const SECTIONS: [&str; 13] = [
    "schema_version",
    "name",
    "seed",
    "grid",
    "exponent",
    "target_exponent",
    "weight",
    "operator",
    "balls",
    "plan",
    "probes",
    "function",
    "tolerances",
];
const OUTPUT: &str = "output";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub resolution: usize,
    /// Further resolutions for refinement trends.
    #[serde(default)]
    pub refinements: Vec<usize>,
}

impl GridSpec {
    pub fn grid_at(&self, resolution: usize) -> Result<Grid> {
        Grid::new(self.lower.len(), &self.lower, &self.upper, resolution)
    }

    pub fn grid(&self) -> Result<Grid> {
        self.grid_at(self.resolution)
    }

    /// The base grid followed by each refinement.
    pub fn grids(&self) -> Result<Vec<Grid>> {
        std::iter::once(self.resolution).chain(self.refinements.iter().copied()).map(|n| self.grid_at(n)).collect()
    }

    pub fn region(&self) -> Region {
        Region::new(self.lower.clone(), self.upper.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightSpec {
    Unit,
    /// `|x|^{-a}`, raised to `power`.
    Power {
        a: f64,
        #[serde(default = "one")]
        power: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl WeightSpec {
    pub fn build(&self) -> Result<Weight> {
        match self {
            WeightSpec::Unit => Ok(Weight::unit()),
            WeightSpec::Power { a, power } => Ok(Weight::power_law(*a)?.pow(*power)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallSpec {
    #[serde(default = "all_pairs")]
    pub policy: BallPolicy,
    /// Balls used when estimating class constants for obligations.
    #[serde(default = "dyadic")]
    pub class_policy: BallPolicy,
}

fn all_pairs() -> BallPolicy {
    BallPolicy::AllPairs
}

fn dyadic() -> BallPolicy {
    BallPolicy::DyadicRadii
}

impl Default for BallSpec {
    fn default() -> Self {
        Self { policy: all_pairs(), class_policy: dyadic() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub recipes: Vec<ProbeRecipe>,
    #[serde(default = "three")]
    pub per_recipe: usize,
}

fn three() -> usize {
    3
}

/// Test functions for the `norm` and `modular` commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    Constant {
        value: f64,
    },
    /// `Σ c_k x_1^k`.
    Polynomial {
        coefficients: Vec<f64>,
    },
    /// `|x - center|^exponent`, with the value at the center set to 0.
    Power {
        center: Vec<f64>,
        exponent: f64,
    },
    /// 1 on the box `[lower, upper]`, 0 elsewhere.
    Indicator {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// One value per node, row-major, in a single `value` column.
    Csv {
        path: PathBuf,
    },
}

impl FunctionSpec {
    pub fn sample(&self, grid: &Grid, base: &Path) -> Result<GridFunction> {
        let sign = SignMode::Signed;
        match self {
            FunctionSpec::Constant { value } => GridFunction::constant(*grid, *value),
            FunctionSpec::Polynomial { coefficients } => {
                GridFunction::from_fn(*grid, sign, |x| coefficients.iter().rev().fold(0.0, |acc, c| acc * x[0] + c))
            }
            FunctionSpec::Power { center, exponent } => GridFunction::from_fn(*grid, sign, |x| {
                let r = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                if r > 0.0 {
                    r.powf(*exponent)
                } else {
                    0.0
                }
            }),
            FunctionSpec::Indicator { lower, upper } => GridFunction::from_fn(*grid, sign, |x| {
                let inside = x.iter().zip(lower.iter().zip(upper)).all(|(v, (a, b))| (a..=b).contains(&v));
                if inside {
                    1.0
                } else {
                    0.0
                }
            }),
            FunctionSpec::Csv { path } => {
                let path = if path.is_absolute() { path.clone() } else { base.join(path) };
                let mut rdr = csv::Reader::from_path(&path)?;
                let mut values = Vec::new();
                for rec in rdr.deserialize::<ValueRow>() {
                    values.push(rec?.value);
                }
                GridFunction::new(*grid, values, sign)
            }
        }
    }
}

#[derive(Deserialize)]
struct ValueRow {
    value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative bisection width for every norm.
    #[serde(default = "norm_tol")]
    pub norm: f64,
    /// Allowed relative change of the best constant between the last two
    /// resolutions.
    #[serde(default = "stability_tol")]
    pub stability: f64,
}

fn norm_tol() -> f64 {
    1e-12
}

fn stability_tol() -> f64 {
    0.1
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { norm: norm_tol(), stability: stability_tol() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

/// Planner inputs as exact rational strings (`"6/5"`, `"inf"`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRequest {
    pub scenario: String,
    pub p0: Option<String>,
    pub q0: Option<String>,
    pub p: Option<String>,
    pub p_minus: Option<String>,
    pub p_plus: Option<String>,
    pub q_minus: Option<String>,
    pub q_plus: Option<String>,
    pub s: Option<String>,
    pub beta1: Option<String>,
    pub p_star: Option<String>,
    pub delta: Option<String>,
    pub r: Option<String>,
    pub n: Option<u32>,
    /// Limited range only: `weighted` (default) or `unweighted`.
    pub mode: Option<String>,
}

pub const PLAN_SCENARIOS: [&str; 10] = [
    "diagonal",
    "off-diagonal",
    "limited",
    "constant-reduction",
    "a1",
    "ainfty",
    "delta",
    "rough-sio",
    "riesz-divergence",
    "spherical",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PlanOutcome {
    Plan(Box<ExtrapolationPlan>),
    Reduction(Box<planner::ConstantReduction>),
    Delta(planner::DeltaRange),
    Spherical(planner::SphericalReport),
}

impl PlanOutcome {
    pub fn plan(&self) -> Option<&ExtrapolationPlan> {
        match self {
            PlanOutcome::Plan(p) => Some(p),
            _ => None,
        }
    }

    pub fn table(&self) -> String {
        let row = |k: &str, v: &XRational| format!("{k:<18} {:<12} {:.6}\n", v.to_string(), v.to_f64());
        match self {
            PlanOutcome::Plan(p) => p.table(),
            PlanOutcome::Reduction(r) => {
                let mut out = String::from("scenario           constant-reduction\n");
                for (k, v) in [("p", &r.p), ("q_minus", &r.q_minus), ("q_plus", &r.q_plus), ("tau_p", &r.tau_p)] {
                    out += &row(k, v);
                }
                out += &row("alpha1", &r.alpha1);
                out += &row("beta1", &r.beta1);
                out += &row("route1 s", &r.route1.0);
                out += &row("route1 beta2", &r.route1.1);
                out += &row("route2 s", &r.route2.0);
                out += &row("route2 beta2", &r.route2.1);
                out += &format!(
                    "routes agree       {}\ns window           {} (s inside: {})\n",
                    r.agree, r.window, r.s_in_window
                );
                out
            }
            PlanOutcome::Delta(d) => {
                let mut out = String::from("scenario           delta\n");
                out += &row("delta", &d.delta);
                out += &row("q_minus", &d.q_minus);
                out += &row("q_plus", &d.q_plus);
                out += &format!("q_range            ({}, {})\n{}\n", d.q_minus, d.q_plus, d.bridge);
                out
            }
            PlanOutcome::Spherical(s) => {
                let mut out = format!("scenario           spherical\nn                  {}\n", s.n);
                out += &row("p_minus above", &s.p_lower);
                out += &row("p_plus below", &s.oscillation_bound);
                out += &row("sigma above", &s.sigma_threshold);
                out +=
                    &format!("unweighted         {}\n", if s.unweighted_feasible { "feasible" } else { "infeasible" });
                out
            }
        }
    }
}

impl PlanRequest {
    fn get(&self, name: &str, value: &Option<String>) -> Result<XRational> {
        self.opt(value)?
            .ok_or_else(|| Error::Config(vec![format!("plan.{name}: required for scenario '{}'", self.scenario)]))
    }

    fn opt(&self, value: &Option<String>) -> Result<Option<XRational>> {
        value.as_deref().map(|s| s.parse::<XRational>().map_err(Error::from)).transpose()
    }

    /// Every rational field that fails to parse.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !PLAN_SCENARIOS.contains(&self.scenario.as_str()) {
            out.push(format!(
                "plan.scenario: unknown scenario '{}', expected one of {}",
                self.scenario,
                PLAN_SCENARIOS.join(", ")
            ));
        }
        let fields = [
            ("p0", &self.p0),
            ("q0", &self.q0),
            ("p", &self.p),
            ("p_minus", &self.p_minus),
            ("p_plus", &self.p_plus),
            ("q_minus", &self.q_minus),
            ("q_plus", &self.q_plus),
            ("s", &self.s),
            ("beta1", &self.beta1),
            ("p_star", &self.p_star),
            ("delta", &self.delta),
            ("r", &self.r),
        ];
        for (name, v) in fields {
            if let Some(s) = v {
                if let Err(e) = s.parse::<XRational>() {
                    out.push(format!("plan.{name}: {e}"));
                }
            }
        }
        if let Some(m) = &self.mode {
            if !["weighted", "unweighted"].contains(&m.as_str()) {
                out.push(format!("plan.mode: expected 'weighted' or 'unweighted', got '{m}'"));
            }
        }
        out
    }

    pub fn run(&self) -> Result<PlanOutcome> {
        let v = self.violations();
        if !v.is_empty() {
            return Err(Error::Config(v));
        }
        let n =
            || self.n.ok_or_else(|| Error::Config(vec![format!("plan.n: required for scenario '{}'", self.scenario)]));
        let plan = match self.scenario.as_str() {
            "diagonal" => planner::plan_diagonal(
                &self.get("p0", &self.p0)?,
                &self.get("p_minus", &self.p_minus)?,
                &self.get("p_plus", &self.p_plus)?,
                self.opt(&self.s)?,
                self.opt(&self.beta1)?,
            )?,
            "off-diagonal" => planner::plan_offdiagonal(
                &self.get("p0", &self.p0)?,
                &self.get("q0", &self.q0)?,
                &self.get("p_minus", &self.p_minus)?,
                &self.get("q_minus", &self.q_minus)?,
                self.opt(&self.s)?,
                self.opt(&self.beta1)?,
            )?,
            "limited" => {
                let mode = match (self.mode.as_deref(), self.opt(&self.beta1)?) {
                    (_, Some(b)) => LimitedMode::Beta1(b),
                    (Some("unweighted"), None) => LimitedMode::Unweighted,
                    _ => LimitedMode::Weighted,
                };
                let opts = LimitedOptions { p_star: self.opt(&self.p_star)?, s: self.opt(&self.s)?, mode };
                planner::plan_limited(
                    &self.get("q_minus", &self.q_minus)?,
                    &self.get("q_plus", &self.q_plus)?,
                    &self.get("p_minus", &self.p_minus)?,
                    &self.get("p_plus", &self.p_plus)?,
                    &opts,
                )?
            }
            "constant-reduction" => {
                return Ok(PlanOutcome::Reduction(Box::new(planner::plan_limited_constant_reduction(
                    &self.get("p", &self.p)?,
                    &self.get("q_minus", &self.q_minus)?,
                    &self.get("q_plus", &self.q_plus)?,
                )?)))
            }
            "a1" => planner::plan_a1(&self.get("p0", &self.p0)?, &self.get("p_minus", &self.p_minus)?)?,
            "ainfty" => planner::plan_ainfty(
                &self.get("p0", &self.p0)?,
                &self.get("s", &self.s)?,
                &self.get("p_minus", &self.p_minus)?,
            )?,
            "delta" => return Ok(PlanOutcome::Delta(planner::plan_corollary_delta(&self.get("delta", &self.delta)?)?)),
            "rough-sio" => planner::plan_rough_sio(&self.get("r", &self.r)?)?,
            "riesz-divergence" => planner::plan_riesz_divergence(
                n()?,
                &self.get("p_minus", &self.p_minus)?,
                &self.get("p_plus", &self.p_plus)?,
                &self.get("q_plus", &self.q_plus)?,
            )?,
            "spherical" => {
                return Ok(PlanOutcome::Spherical(planner::plan_spherical(
                    n()?,
                    &self.get("p_minus", &self.p_minus)?,
                    &self.get("p_plus", &self.p_plus)?,
                )?))
            }
            other => return Err(Error::Config(vec![format!("plan.scenario: unknown scenario '{other}'")])),
        };
        Ok(PlanOutcome::Plan(Box::new(plan)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    pub grid: Option<GridSpec>,
    pub exponent: Option<ExponentFamily>,
    pub target_exponent: Option<ExponentFamily>,
    pub weight: Option<WeightSpec>,
    pub operator: Option<OperatorKind>,
    pub balls: BallSpec,
    pub plan: Option<PlanRequest>,
    pub probes: Option<ProbeSpec>,
    pub function: Option<FunctionSpec>,
    pub tolerances: Tolerances,
    pub output: OutputSpec,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn section<T: serde::de::DeserializeOwned>(table: &toml::Table, key: &str, errors: &mut Vec<String>) -> Option<T> {
    let value = table.get(key)?.clone();
    match value.try_into::<T>() {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(format!("{key}: {}", e.message().trim()));
            None
        }
    }
}

impl ScenarioConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if cfg.name.is_empty() {
            cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
        let mut errors = Vec::new();
        for key in table.keys() {
            if !SECTIONS.contains(&key.as_str()) && key != OUTPUT {
                errors.push(format!("{key}: unknown key"));
            }
        }
        let schema_version = section::<u32>(&table, "schema_version", &mut errors);
        match schema_version {
            None if !table.contains_key("schema_version") => errors.push("schema_version: missing".into()),
            Some(v) if v != SCHEMA_VERSION => {
                errors.push(format!("schema_version: unsupported version {v}, expected {SCHEMA_VERSION}"))
            }
            _ => {}
        }
        let cfg = ScenarioConfig {
            schema_version: schema_version.unwrap_or(SCHEMA_VERSION),
            name: section(&table, "name", &mut errors).unwrap_or_default(),
            seed: section(&table, "seed", &mut errors).unwrap_or(0),
            grid: section(&table, "grid", &mut errors),
            exponent: section(&table, "exponent", &mut errors),
            target_exponent: section(&table, "target_exponent", &mut errors),
            weight: section(&table, "weight", &mut errors),
            operator: section(&table, "operator", &mut errors),
            balls: section(&table, "balls", &mut errors).unwrap_or_default(),
            plan: section(&table, "plan", &mut errors),
            probes: section(&table, "probes", &mut errors),
            function: section(&table, "function", &mut errors),
            tolerances: section(&table, "tolerances", &mut errors).unwrap_or_default(),
            output: section(&table, OUTPUT, &mut errors).unwrap_or_default(),
            base_dir: PathBuf::new(),
        };
        errors.extend(cfg.semantic_violations());
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errors))
        }
    }

    fn semantic_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(g) = &self.grid {
            if g.lower.len() != g.upper.len() {
                out.push(format!("grid: lower has {} entries but upper has {}", g.lower.len(), g.upper.len()));
            }
            for n in std::iter::once(g.resolution).chain(g.refinements.iter().copied()) {
                if let Err(e) = g.grid_at(n) {
                    out.push(format!("grid: {e}"));
                }
            }
        }
        let needs_grid = self.exponent.is_some() || self.function.is_some() || self.probes.is_some();
        if needs_grid && self.grid.is_none() {
            out.push("grid: required when exponent, function or probes are given".into());
        }
        for (key, fam) in [("exponent", &self.exponent), ("target_exponent", &self.target_exponent)] {
            if let (Some(fam), Some(g)) = (fam, &self.grid) {
                if let Err(e) = ExponentFunction::new(fam.clone(), g.region()) {
                    out.push(format!("{key}: {e}"));
                }
            }
        }
        if let Some(w) = &self.weight {
            if let Err(e) = w.build() {
                out.push(format!("weight: {e}"));
            }
        }
        if let Some(p) = &self.plan {
            out.extend(p.violations());
        }
        if !(self.tolerances.norm > 0.0 && self.tolerances.norm < 1.0) {
            out.push(format!("tolerances.norm: must lie in (0, 1), got {}", self.tolerances.norm));
        }
        if !(self.tolerances.stability > 0.0) {
            out.push(format!("tolerances.stability: must be positive, got {}", self.tolerances.stability));
        }
        out
    }

    pub fn exponent_function(&self) -> Result<Option<ExponentFunction>> {
        self.build_exponent(&self.exponent)
    }

    pub fn target_exponent_function(&self) -> Result<Option<ExponentFunction>> {
        self.build_exponent(&self.target_exponent)
    }

    fn build_exponent(&self, fam: &Option<ExponentFamily>) -> Result<Option<ExponentFunction>> {
        match (fam, &self.grid) {
            (Some(fam), Some(g)) => Ok(Some(ExponentFunction::new(fam.clone(), g.region())?)),
            (Some(_), None) => Err(Error::Config(vec!["grid: required for the exponent's domain".into()])),
            (None, _) => Ok(None),
        }
    }

    pub fn weight(&self) -> Result<Weight> {
        self.weight.as_ref().map_or(Ok(Weight::unit()), WeightSpec::build)
    }

    pub fn operator_handle(&self) -> Option<OperatorHandle> {
        self.operator.map(|k| OperatorHandle::new(k, self.balls.policy))
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}
