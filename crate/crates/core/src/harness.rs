//! End-to-end checks: probe families, best-constant estimates under
//! refinement, and obligation checks for a plan.
//!
//! A finite probe family can only bound a constant from below, so the
//! conclusion of a theorem is judged by whether the best constant settles
//! as the grid is refined.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{PlanOutcome, ScenarioConfig, Tolerances};
use crate::error::{Error, Result};
use crate::exponent::{ExponentFamily, ExponentFunction};
use crate::field::{enumerate_balls, BallPolicy, Grid, GridFunction, Region, SignMode};
use crate::norm::{weighted_norm_with, NormOptions};
use crate::operators::{OperatorHandle, OperatorKind};
use crate::par;
use crate::planner::{ExtrapolationPlan, ObligationKind};
use crate::weights::{class_estimate, classify, Verdict, Weight, WeightClass};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeRecipe {
    Steps,
    Bumps,
    RandomPiecewise,
    Oscillatory,
}

impl ProbeRecipe {
    pub const ALL: [ProbeRecipe; 4] =
        [ProbeRecipe::Steps, ProbeRecipe::Bumps, ProbeRecipe::RandomPiecewise, ProbeRecipe::Oscillatory];
}

impl std::fmt::Display for ProbeRecipe {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProbeRecipe::Steps => "steps",
            ProbeRecipe::Bumps => "bumps",
            ProbeRecipe::RandomPiecewise => "random-piecewise",
            ProbeRecipe::Oscillatory => "oscillatory",
        })
    }
}

/// A probe as a function of the normalized coordinate `t ∈ [0, 1]^n`, so
/// the same probe can be sampled at every resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum ProbeShape {
    Constant {
        value: f64,
    },
    /// Piecewise constant in `t_1`; `values.len() == breaks.len() + 1`.
    Steps {
        breaks: Vec<f64>,
        values: Vec<f64>,
    },
    /// `floor + height * (1 - |t - center|^2 / width^2)_+`.
    Bump {
        center: Vec<f64>,
        width: f64,
        height: f64,
        floor: f64,
    },
    /// Piecewise linear in `t_1` through equally spaced knots.
    Piecewise {
        knots: Vec<f64>,
    },
    /// `1 + amplitude * sin(2π frequency t_1 + phase)`.
    Oscillatory {
        frequency: f64,
        phase: f64,
        amplitude: f64,
    },
}

impl ProbeShape {
    pub fn eval(&self, t: &[f64]) -> f64 {
        match self {
            ProbeShape::Constant { value } => *value,
            ProbeShape::Steps { breaks, values } => values[breaks.partition_point(|b| *b <= t[0])],
            ProbeShape::Bump { center, width, height, floor } => {
                let r2: f64 = t.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                floor + height * (1.0 - r2 / (width * width)).max(0.0)
            }
            ProbeShape::Piecewise { knots } => {
                let m = knots.len() - 1;
                let x = t[0].clamp(0.0, 1.0) * m as f64;
                let i = (x.floor() as usize).min(m - 1);
                let u = x - i as f64;
                knots[i] * (1.0 - u) + knots[i + 1] * u
            }
            ProbeShape::Oscillatory { frequency, phase, amplitude } => {
                1.0 + amplitude * (2.0 * PI * frequency * t[0] + phase).sin()
            }
        }
    }

    fn random(recipe: ProbeRecipe, dim: usize, rng: &mut ChaCha8Rng) -> Self {
        match recipe {
            ProbeRecipe::Steps => {
                let k = rng.random_range(1..=4);
                let mut breaks: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..0.95)).collect();
                breaks.sort_by(f64::total_cmp);
                let values = (0..=k).map(|_| rng.random_range(0.1..1.0)).collect();
                ProbeShape::Steps { breaks, values }
            }
            ProbeRecipe::Bumps => ProbeShape::Bump {
                center: (0..dim).map(|_| rng.random_range(0.0..1.0)).collect(),
                width: rng.random_range(0.05..0.4),
                height: rng.random_range(0.5..4.0),
                floor: 0.05,
            },
            ProbeRecipe::RandomPiecewise => {
                let k = rng.random_range(3..=9);
                ProbeShape::Piecewise { knots: (0..k).map(|_| rng.random_range(0.1..1.0)).collect() }
            }
            ProbeRecipe::Oscillatory => ProbeShape::Oscillatory {
                frequency: rng.random_range(1.0..8.0),
                phase: rng.random_range(0.0..2.0 * PI),
                amplitude: rng.random_range(0.2..0.9),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub tag: String,
    pub shape: ProbeShape,
}

/// The family of test functions `f`; pairs `(Tf, f)` are formed by the
/// checks that apply an operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeFamily {
    pub seed: u64,
    pub probes: Vec<Probe>,
}

impl ProbeFamily {
    pub fn generate(recipes: &[ProbeRecipe], per_recipe: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut probes = Vec::with_capacity(recipes.len() * per_recipe);
        for &recipe in recipes {
            for k in 0..per_recipe {
                probes.push(Probe { tag: format!("{recipe}-{k}"), shape: ProbeShape::random(recipe, dim, &mut rng) });
            }
        }
        Self { seed, probes }
    }

    pub fn from_shapes(seed: u64, shapes: impl IntoIterator<Item = (String, ProbeShape)>) -> Self {
        Self { seed, probes: shapes.into_iter().map(|(tag, shape)| Probe { tag, shape }).collect() }
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    pub fn sample(&self, grid: &Grid) -> Result<Vec<GridFunction>> {
        let region = Region::of_grid(grid);
        self.probes
            .iter()
            .map(|p| {
                GridFunction::from_fn(*grid, SignMode::Nonnegative, |x| {
                    let mut t = [0.0; 2];
                    for (k, v) in x.iter().enumerate() {
                        t[k] = (v - region.lower[k]) / (region.upper[k] - region.lower[k]);
                    }
                    p.shape.eval(&t[..x.len()])
                })
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    Stable,
    Unstable,
    /// Fewer than two resolutions.
    Insufficient,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeRow {
    pub resolution: usize,
    pub probe: usize,
    pub tag: String,
    pub numerator: f64,
    pub denominator: f64,
    /// `None` when the denominator vanished and the probe was skipped.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObligationCheck {
    pub obligation: String,
    pub method: String,
    pub trend: Vec<(usize, f64)>,
    pub verdict: Verdict,
}

impl ObligationCheck {
    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Diverging
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub scenario: String,
    pub seed: u64,
    pub inequality: String,
    #[serde(skip)]
    pub rows: Vec<ProbeRow>,
    pub best_constant: f64,
    /// Best constant per resolution, coarsest first.
    pub trend: Vec<(usize, f64)>,
    pub stability: Stability,
    pub obligations: Vec<ObligationCheck>,
    pub plan: Option<PlanOutcome>,
    pub warnings: Vec<String>,
}

pub const CSV_HEADER: [&str; 8] =
    ["scenario", "seed", "resolution", "probe", "tag", "numerator", "denominator", "ratio"];

impl VerificationReport {
    fn empty(scenario: &str, seed: u64, inequality: String) -> Self {
        Self {
            scenario: scenario.to_string(),
            seed,
            inequality,
            rows: Vec::new(),
            best_constant: f64::NAN,
            trend: Vec::new(),
            stability: Stability::Insufficient,
            obligations: Vec::new(),
            plan: None,
            warnings: Vec::new(),
        }
    }

    pub fn obligations_pass(&self) -> bool {
        self.obligations.iter().all(ObligationCheck::passed)
    }

    /// 0 when everything checked out, 1 when there are warnings.
    pub fn exit_code(&self) -> i32 {
        let unstable = self.stability == Stability::Unstable;
        if self.obligations_pass() && !unstable && self.warnings.is_empty() {
            0
        } else {
            1
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                self.scenario.clone(),
                self.seed.to_string(),
                r.resolution.to_string(),
                r.probe.to_string(),
                r.tag.clone(),
                format!("{:.15e}", r.numerator),
                format!("{:.15e}", r.denominator),
                r.ratio.map_or_else(String::new, |x| format!("{x:.15e}")),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }

    fn finish(&mut self, tol: f64) {
        self.best_constant = self.rows.iter().filter_map(|r| r.ratio).fold(f64::NAN, f64::max);
        let mut trend: Vec<(usize, f64)> = Vec::new();
        for r in &self.rows {
            let v = r.ratio.unwrap_or(f64::NAN);
            match trend.last_mut() {
                Some((res, best)) if *res == r.resolution => *best = best.max(v),
                _ => trend.push((r.resolution, v)),
            }
        }
        self.stability = match trend.as_slice() {
            [.., (_, a), (_, b)] if (b / a - 1.0).abs() <= tol => Stability::Stable,
            [.., _, _] => Stability::Unstable,
            _ => Stability::Insufficient,
        };
        self.trend = trend;
        let skipped = self.rows.iter().filter(|r| r.ratio.is_none()).count();
        if skipped > 0 {
            self.warnings.push(format!("{skipped} probe evaluations skipped for a zero denominator"));
        }
    }
}

fn norm_options(tol: &Tolerances) -> NormOptions {
    NormOptions { tolerance: tol.norm, ..NormOptions::default() }
}

/// Target exponent for operators that gain integrability: `1/q = 1/p - α/n`.
fn fractional_target(alpha: f64, p: &ExponentFunction, dim: usize) -> Result<ExponentFunction> {
    let n = dim as f64;
    if p.p_plus() >= n / alpha {
        return Err(Error::Precondition(format!(
            "p_+ < n/alpha required, got p_+ = {} and n/alpha = {}",
            p.p_plus(),
            n / alpha
        )));
    }
    match p.constant_value() {
        Some(c) => ExponentFunction::constant(1.0 / (1.0 / c - alpha / n), p.domain().clone()),
        None => Err(Error::Precondition("a variable p needs an explicit target exponent q".into())),
    }
}

/// Best constant in `‖Tf‖_{L^q(w)} <= C ‖f‖_{L^p(w)}` over the probes, at each
/// grid. The sharp maximal function is checked the other way round,
/// `‖f‖ <= C ‖M^# f‖`, so constant probes drop out.
pub fn verify_norm_inequality(
    op: &OperatorHandle,
    probes: &ProbeFamily,
    p: &ExponentFunction,
    w: &Weight,
    q: Option<&ExponentFunction>,
    grids: &[Grid],
    tol: &Tolerances,
) -> Result<VerificationReport> {
    if probes.is_empty() {
        return Err(Error::NoUsableProbes("empty probe family".into()));
    }
    let dim = grids.first().map_or(p.dim(), Grid::dim);
    let q = match (q, op.kind) {
        (Some(q), _) => q.clone(),
        (None, OperatorKind::RieszPotential { alpha } | OperatorKind::FractionalMaximal { alpha }) => {
            fractional_target(alpha, p, dim)?
        }
        (None, _) => p.clone(),
    };
    let reversed = op.kind == OperatorKind::SharpMaximal;
    let target = if q == *p { "p" } else { "q" };
    let inequality = if reversed {
        format!("||f||_p <= C ||{} f||_p", op.kind.name())
    } else {
        format!("||{} f||_{target} <= C ||f||_p", op.kind.name())
    };
    let mut report = VerificationReport::empty("norm-inequality", probes.seed, inequality);
    let opts = norm_options(tol);
    for grid in grids {
        let fs = probes.sample(grid)?;
        let op = OperatorHandle { family: Some(op.family_for(grid)), ..op.clone() };
        let rows = par::try_map_range(fs.len(), |k| -> Result<ProbeRow> {
            let f = &fs[k];
            let tf = op.apply(f)?;
            let (num, den) = if reversed {
                (weighted_norm_with(f, w, p, &opts)?.value, weighted_norm_with(&tf, w, p, &opts)?.value)
            } else {
                (weighted_norm_with(&tf, w, &q, &opts)?.value, weighted_norm_with(f, w, p, &opts)?.value)
            };
            let ratio = (den > 0.0 && den.is_finite()).then(|| num / den);
            Ok(ProbeRow {
                resolution: grid.resolution(),
                probe: k,
                tag: probes.probes[k].tag.clone(),
                numerator: num,
                denominator: den,
                ratio,
            })
        })?;
        for r in rows.iter().filter(|r| r.ratio.is_none()) {
            log::warn!("probe {} ({}) skipped at resolution {}: zero denominator", r.probe, r.tag, r.resolution);
        }
        report.rows.extend(rows);
    }
    if report.rows.iter().all(|r| r.ratio.is_none()) {
        return Err(Error::NoUsableProbes("every probe has a zero denominator".into()));
    }
    report.finish(tol.stability);
    Ok(report)
}

fn lq_sum(fs: &[GridFunction], q: f64) -> Result<GridFunction> {
    let first = fs.first().ok_or_else(|| Error::NoUsableProbes("empty probe list".into()))?;
    let mut acc = vec![0.0; first.len()];
    for f in fs {
        f.check_same_grid(first)?;
        for (a, v) in acc.iter_mut().zip(f.values()) {
            *a += v.abs().powf(q);
        }
    }
    let vals = acc.into_iter().map(|a| a.powf(1.0 / q)).collect();
    GridFunction::new(*first.grid(), vals, SignMode::Nonnegative)
}

fn vector_row(
    op: &OperatorHandle,
    list: &[GridFunction],
    q: f64,
    p: &ExponentFunction,
    w: &Weight,
    opts: &NormOptions,
) -> Result<(f64, f64)> {
    let mapped = list.iter().map(|f| op.apply(f)).collect::<Result<Vec<_>>>()?;
    let num = weighted_norm_with(&lq_sum(&mapped, q)?, w, p, opts)?.value;
    let den = weighted_norm_with(&lq_sum(list, q)?, w, p, opts)?.value;
    Ok((num, den))
}

/// Best constant in `‖(Σ (M f_k)^q)^{1/q}‖_{L^p(w)} <= C ‖(Σ |f_k|^q)^{1/q}‖_{L^p(w)}`,
/// one ratio per list. All lists must live on one grid.
pub fn vector_valued_check(
    op: &OperatorHandle,
    lists: &[Vec<GridFunction>],
    q: f64,
    p: &ExponentFunction,
    w: &Weight,
    tol: &Tolerances,
) -> Result<VerificationReport> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::Precondition(format!("1 < q < inf required, got {q}")));
    }
    if lists.is_empty() || lists.iter().any(Vec::is_empty) {
        return Err(Error::NoUsableProbes("vector-valued check needs nonempty lists".into()));
    }
    let opts = norm_options(tol);
    let mut report = VerificationReport::empty("vector-valued", 0, format!("||l^{q}(M f_k)||_p <= C ||l^{q}(f_k)||_p"));
    let rows = par::try_map_range(lists.len(), |k| vector_row(op, &lists[k], q, p, w, &opts))?;
    for (k, (num, den)) in rows.into_iter().enumerate() {
        let resolution = lists[k][0].grid().resolution();
        let ratio = (den > 0.0 && den.is_finite()).then(|| num / den);
        report.rows.push(ProbeRow {
            resolution,
            probe: k,
            tag: format!("list-{k}"),
            numerator: num,
            denominator: den,
            ratio,
        });
    }
    report.rows.sort_by_key(|r| r.resolution);
    report.finish(tol.stability);
    Ok(report)
}

/// Like [`vector_valued_check`], with each list given as probe shapes and
/// sampled at every grid, so the best constant gets a refinement trend.
pub fn vector_valued_trend(
    op: &OperatorHandle,
    lists: &[ProbeFamily],
    q: f64,
    p: &ExponentFunction,
    w: &Weight,
    grids: &[Grid],
    tol: &Tolerances,
) -> Result<VerificationReport> {
    let mut sampled = Vec::new();
    for grid in grids {
        for fam in lists {
            sampled.push(fam.sample(grid)?);
        }
    }
    let mut report = vector_valued_check(op, &sampled, q, p, w, tol)?;
    report.seed = lists.first().map_or(0, |f| f.seed);
    Ok(report)
}

/// Checks each obligation of `plan` on every grid.
///
/// A maximal-operator obligation gets two checks: the `A_{p(·)}` constant of
/// the weight, and a probe estimate of the operator norm. Either one
/// diverging fails it.
pub fn check_obligations(
    plan: &ExtrapolationPlan,
    p: &ExponentFunction,
    q: Option<&ExponentFunction>,
    w: &Weight,
    probes: &ProbeFamily,
    grids: &[Grid],
    class_policy: BallPolicy,
    tol: &Tolerances,
) -> Result<Vec<ObligationCheck>> {
    let opts = norm_options(tol);
    let mut out = Vec::new();
    for ob in &plan.obligations {
        let e = ob.exponent.instantiate(p, q)?;
        let v = w.pow(ob.weight_power.to_f64());
        let class = WeightClass::ApVar { p: e.clone() };
        let mut class_trend = Vec::new();
        for g in grids {
            class_trend.push((g.resolution(), class_estimate(&v, &class, &enumerate_balls(g, class_policy))?));
        }
        let values: Vec<f64> = class_trend.iter().map(|t| t.1).collect();
        out.push(ObligationCheck {
            obligation: ob.to_string(),
            method: format!("A_p(.) constant over {class_policy} balls"),
            verdict: classify(&values),
            trend: class_trend,
        });
        if ob.kind == ObligationKind::MaximalBounded {
            let m = OperatorHandle::maximal();
            let mut trend = Vec::new();
            for g in grids {
                let fs = probes.sample(g)?;
                let m = OperatorHandle { family: Some(m.family_for(g)), ..m.clone() };
                let ratios = par::try_map_range(fs.len(), |k| -> Result<f64> {
                    let den = weighted_norm_with(&fs[k], &v, &e, &opts)?.value;
                    let num = weighted_norm_with(&m.apply(&fs[k])?, &v, &e, &opts)?.value;
                    Ok(if den > 0.0 { num / den } else { f64::NAN })
                })?;
                trend.push((g.resolution(), ratios.into_iter().fold(f64::NAN, f64::max)));
            }
            let values: Vec<f64> = trend.iter().map(|t| t.1).collect();
            out.push(ObligationCheck {
                obligation: ob.to_string(),
                method: "maximal operator norm over probes".into(),
                verdict: classify(&values),
                trend,
            });
        }
    }
    Ok(out)
}

/// Builds everything the config describes, then plans, checks obligations
/// and estimates the best constant. Without a grid only the plan is made.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<VerificationReport> {
    let outcome = cfg.plan.as_ref().map(|r| r.run()).transpose()?;
    let name = if cfg.name.is_empty() { "scenario".to_string() } else { cfg.name.clone() };
    let mut report = VerificationReport::empty(&name, cfg.seed, String::new());
    report.plan = outcome.clone();

    let (Some(grid_spec), Some(p)) = (&cfg.grid, cfg.exponent_function()?) else {
        if cfg.operator.is_some() || cfg.probes.is_some() {
            report.warnings.push("no grid or exponent given: numerical checks skipped".into());
        }
        return Ok(report);
    };
    let grids = grid_spec.grids()?;
    let q = cfg.target_exponent_function()?;
    let w = cfg.weight()?;
    let spec = cfg.probes.as_ref().ok_or_else(|| Error::NoUsableProbes("no [probes] section".into()))?;
    let probes = ProbeFamily::generate(&spec.recipes, spec.per_recipe, grid_spec.lower.len(), cfg.seed);
    if probes.is_empty() {
        return Err(Error::NoUsableProbes("empty probe family".into()));
    }

    if let Some(plan) = outcome.as_ref().and_then(PlanOutcome::plan) {
        report.obligations =
            check_obligations(plan, &p, q.as_ref(), &w, &probes, &grids, cfg.balls.class_policy, &cfg.tolerances)?;
        for c in report.obligations.iter().filter(|c| !c.passed()) {
            report.warnings.push(format!("obligation looks diverging: {} ({})", c.obligation, c.method));
        }
    }
    if let Some(op) = cfg.operator_handle() {
        let conclusion = verify_norm_inequality(&op, &probes, &p, &w, q.as_ref(), &grids, &cfg.tolerances)?;
        report.inequality = conclusion.inequality;
        report.rows = conclusion.rows;
        report.best_constant = conclusion.best_constant;
        report.trend = conclusion.trend;
        report.stability = conclusion.stability;
        report.warnings.extend(conclusion.warnings);
    }
    Ok(report)
}

/// Concatenates report CSVs that share the standard header.
pub fn merge_csv(inputs: &[&Path], output: &Path) -> Result<usize> {
    let mut w = csv::Writer::from_path(output)?;
    w.write_record(CSV_HEADER)?;
    let mut rows = 0;
    for path in inputs {
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header != CSV_HEADER {
            return Err(Error::Io(format!("{}: unexpected header {header:?}", path.display())));
        }
        for rec in r.records() {
            w.write_record(&rec?)?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok(rows)
}

/// Constant-exponent `p` on the grid's box, for quick checks.
pub fn constant_exponent(value: f64, grid: &Grid) -> Result<ExponentFunction> {
    ExponentFunction::new(ExponentFamily::Constant { value }, Region::of_grid(grid))
}
