//! Weights and estimates of their class constants over finite ball families.
//!
//! Every estimate is a maximum over a finite family, hence a lower bound for
//! the supremum over all balls. Whether a class looks bounded is judged by
//! the trend under grid refinement, see [`classify`].

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponent::{conj, ExponentFunction, Transform};
use crate::field::{enumerate_balls, Ball, BallFamily, BallPolicy, Grid, GridFunction, PrefixSums, SignMode};
use crate::norm::{holder_budget, Modular, NormOptions};
use crate::par;
use crate::planner::XRational;

#[derive(Clone, Debug, PartialEq)]
pub enum WeightBase {
    Unit,
    /// `|x|^{-a}`
    Power {
        a: f64,
    },
    Grid(GridFunction),
}

/// `base^power`. Powers compose by multiplication, so `w.pow(-1).pow(-1)`
/// rasterizes to exactly the same values as `w`.
#[derive(Clone, Debug)]
pub struct Weight {
    base: WeightBase,
    power: f64,
    cache: Arc<Mutex<HashMap<String, f64>>>,
}

impl PartialEq for Weight {
    fn eq(&self, other: &Self) -> bool {
        self.base == other.base && self.power == other.power
    }
}

impl Weight {
    fn with_base(base: WeightBase) -> Self {
        Self { base, power: 1.0, cache: Arc::default() }
    }

    pub fn unit() -> Self {
        Self::with_base(WeightBase::Unit)
    }

    /// `|x|^{-a}`; negative `a` gives vanishing weights such as `|x|^{1/2}`.
    pub fn power_law(a: f64) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::InvalidWeight(format!("power exponent must be finite, got {a}")));
        }
        Ok(Self::with_base(WeightBase::Power { a }))
    }

    pub fn from_grid(values: GridFunction) -> Result<Self> {
        if let Some(i) = values.values().iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidWeight(format!(
                "grid weight must be positive and finite, node {i} has {}",
                values.values()[i]
            )));
        }
        Ok(Self::with_base(WeightBase::Grid(values)))
    }

    pub fn base(&self) -> &WeightBase {
        &self.base
    }

    pub fn exponent(&self) -> f64 {
        self.power
    }

    pub fn is_unit(&self) -> bool {
        self.base == WeightBase::Unit
    }

    /// `w^t`.
    pub fn pow(&self, t: f64) -> Self {
        Self { base: self.base.clone(), power: self.power * t, cache: Arc::default() }
    }

    pub fn inverse(&self) -> Self {
        self.pow(-1.0)
    }

    pub fn describe(&self) -> String {
        let base = match &self.base {
            WeightBase::Unit => return "1".into(),
            WeightBase::Power { a } => format!("|x|^{}", -a),
            WeightBase::Grid(f) => format!("grid({})", f.grid().describe()),
        };
        if self.power == 1.0 {
            base
        } else {
            format!("({base})^{}", self.power)
        }
    }

    fn base_values(&self, grid: &Grid) -> Result<Vec<f64>> {
        match &self.base {
            WeightBase::Unit => Ok(vec![1.0; grid.len()]),
            WeightBase::Power { a } => Ok(power_weight_values(*a, grid)),
            WeightBase::Grid(f) => {
                if f.grid() != grid {
                    return Err(Error::GridMismatch(format!(
                        "weight lives on {}, requested {}",
                        f.grid().describe(),
                        grid.describe()
                    )));
                }
                Ok(f.values().to_vec())
            }
        }
    }

    /// Values at the nodes of `grid`.
    pub fn rasterize(&self, grid: &Grid) -> Result<GridFunction> {
        let mut values = self.base_values(grid)?;
        if self.power == -1.0 {
            values.iter_mut().for_each(|v| *v = 1.0 / *v);
        } else if self.power != 1.0 {
            values.iter_mut().for_each(|v| *v = v.powf(self.power));
        }
        if let Some(i) = values.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::WeightNotInvertible(i));
        }
        GridFunction::new(*grid, values, SignMode::Nonnegative)
    }
}

/// `|x|^{-a}` at the nodes. A node at the origin gets the average of
/// `|x|^{-a}` over the ball of the cell's measure (`h/2` in 1-D, `h/√π` in
/// 2-D) when that is finite, and `ρ^{-a}` on that ball's boundary otherwise.
fn power_weight_values(a: f64, grid: &Grid) -> Vec<f64> {
    let n = grid.dim() as f64;
    let h = grid.min_spacing();
    let rho = if grid.dim() == 1 { 0.5 * h } else { h / std::f64::consts::PI.sqrt() };
    let origin = if a < n { n * rho.powf(-a) / (n - a) } else { rho.powf(-a) };
    (0..grid.len())
        .map(|i| {
            let x = grid.point(i);
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r == 0.0 {
                origin
            } else {
                r.powf(-a)
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum WeightClass {
    Ap { p: f64 },
    A1,
    ReverseHolder { s: f64 },
    ApVar { p: ExponentFunction },
    Apq { p: f64, q: f64 },
    ApqVar { p: ExponentFunction, q: ExponentFunction, gamma: f64 },
}

impl WeightClass {
    pub fn tag(&self) -> &'static str {
        match self {
            WeightClass::Ap { .. } => "A_p",
            WeightClass::A1 => "A_1",
            WeightClass::ReverseHolder { .. } => "RH_s",
            WeightClass::ApVar { .. } => "A_p(.)",
            WeightClass::Apq { .. } => "A_p,q",
            WeightClass::ApqVar { .. } => "A_p(.),q(.)",
        }
    }

    pub fn params(&self) -> String {
        let range = |e: &ExponentFunction| format!("{}[{},{}]", e.family().tag(), e.p_minus(), e.p_plus());
        match self {
            WeightClass::Ap { p } => format!("p={p}"),
            WeightClass::A1 => String::new(),
            WeightClass::ReverseHolder { s } => format!("s={s}"),
            WeightClass::ApVar { p } => format!("p={}", range(p)),
            WeightClass::Apq { p, q } => format!("p={p};q={q}"),
            WeightClass::ApqVar { p, q, gamma } => format!("p={};q={};gamma={gamma}", range(p), range(q)),
        }
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        match self {
            WeightClass::Ap { p } if !(*p > 1.0 && p.is_finite()) => {
                Err(Error::InvalidClass(format!("A_p needs 1 < p < inf, got {p}")))
            }
            WeightClass::ReverseHolder { s } if !(*s > 1.0 && s.is_finite()) => {
                Err(Error::InvalidClass(format!("RH_s needs 1 < s < inf, got {s}")))
            }
            WeightClass::Apq { p, q } if !(*p >= 1.0 && p <= q && q.is_finite()) => {
                Err(Error::InvalidClass(format!("A_p,q needs 1 <= p <= q < inf, got p={p}, q={q}")))
            }
            WeightClass::ApVar { p } if p.p_minus() < 1.0 => {
                Err(Error::InvalidClass(format!("A_p(.) needs p_- >= 1, got {}", p.p_minus())))
            }
            WeightClass::ApqVar { p, q, gamma } => {
                if !(*gamma > 0.0 && *gamma < 1.0) {
                    return Err(Error::InvalidClass(format!("gamma must lie in (0,1), got {gamma}")));
                }
                check_gap(p, q, *gamma, grid)
            }
            _ => Ok(()),
        }
    }
}

/// Checks `1/p(x) - 1/q(x) = gamma` at every node.
fn check_gap(p: &ExponentFunction, q: &ExponentFunction, gamma: f64, grid: &Grid) -> Result<()> {
    let ps = p.sample(grid)?;
    let qs = q.sample(grid)?;
    for (i, (a, b)) in ps.iter().zip(&qs).enumerate() {
        let gap = 1.0 / a - 1.0 / b;
        if (gap - gamma).abs() > 1e-9 {
            return Err(Error::InvalidClass(format!("1/p - 1/q = {gap} at node {i}, expected {gamma}")));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    BoundedLooking,
    Diverging,
    /// Fewer than two refinement levels.
    Insufficient,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::BoundedLooking => "bounded-looking",
            Verdict::Diverging => "diverging",
            Verdict::Insufficient => "insufficient",
        })
    }
}

/// Growth factor per refinement level at or above which a trend counts as
/// diverging.
pub const DIVERGENCE_GROWTH: f64 = 1.25;

/// Diverging when every refinement step grows the estimate by at least 25%.
pub fn classify(trend: &[f64]) -> Verdict {
    if trend.len() < 2 {
        return Verdict::Insufficient;
    }
    if trend.iter().any(|v| !v.is_finite()) {
        return Verdict::Diverging;
    }
    if trend.windows(2).all(|w| w[1] >= DIVERGENCE_GROWTH * w[0]) {
        Verdict::Diverging
    } else {
        Verdict::BoundedLooking
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassConstantReport {
    pub class: String,
    pub params: String,
    pub family: String,
    pub resolution: usize,
    pub estimate: f64,
    /// `(resolution, estimate)` per refinement level, coarsest first.
    pub trend: Vec<(usize, f64)>,
    pub verdict: Verdict,
}

impl ClassConstantReport {
    pub const CSV_HEADER: [&'static str; 6] = ["class", "params", "family", "resolution", "estimate", "verdict"];

    pub fn csv_row(&self) -> [String; 6] {
        [
            self.class.clone(),
            self.params.clone(),
            self.family.clone(),
            self.resolution.to_string(),
            format!("{:.12e}", self.estimate),
            self.verdict.to_string(),
        ]
    }
}

/// Member ranges and quadrature measure of each ball.
struct Members {
    ranges: Vec<Vec<(usize, usize)>>,
    measure: Vec<f64>,
}

fn members(family: &BallFamily, weights: &[f64]) -> Result<Members> {
    let ranges: Vec<Vec<(usize, usize)>> = par::map_slice(family.balls(), |b| family.member_ranges(b));
    let mut measure = Vec::with_capacity(ranges.len());
    for (ball, r) in family.balls().iter().zip(&ranges) {
        let m: f64 = r.iter().flat_map(|&(a, b)| a..b).map(|i| weights[i]).sum();
        if m == 0.0 {
            return Err(Error::BallBelowResolution { center: ball.center, radius: ball.radius });
        }
        measure.push(m);
    }
    Ok(Members { ranges, measure })
}

fn avg(prefix: &PrefixSums, ranges: &[(usize, usize)]) -> f64 {
    let (m, t) = prefix.over(ranges);
    t / m
}

fn min_on(values: &[f64], ranges: &[(usize, usize)]) -> f64 {
    ranges.iter().flat_map(|&(a, b)| values[a..b].iter().copied()).fold(f64::INFINITY, f64::min)
}

fn max_on(values: &[f64], ranges: &[(usize, usize)]) -> f64 {
    ranges.iter().flat_map(|&(a, b)| values[a..b].iter().copied()).fold(0.0, f64::max)
}

fn pow_values(values: &[f64], t: f64) -> Vec<f64> {
    values.iter().map(|v| v.powf(t)).collect()
}

/// `‖g χ_B‖_{p(·)}` for every ball, with a closed form for constant `p`.
fn ball_norms(g: &[f64], p: &ExponentFunction, grid: &Grid, weights: &[f64], mem: &Members) -> Result<Vec<f64>> {
    if let Some(pc) = p.constant_value() {
        if pc.is_infinite() {
            return Ok(mem.ranges.iter().map(|r| max_on(g, r)).collect());
        }
        let prefix = PrefixSums::new(weights, &pow_values(g, pc));
        return Ok(mem.ranges.iter().map(|r| prefix.over(r).1.powf(1.0 / pc)).collect());
    }
    let exps = p.sample(grid)?;
    let opts = NormOptions::default();
    par::try_map_range(mem.ranges.len(), |k| {
        let nodes = mem.ranges[k].iter().flat_map(|&(a, b)| a..b);
        Modular::new(g, &exps, weights, nodes).solve(&opts).map(|r| r.value)
    })
}

/// The defining quantity of `class` on each ball of `family`.
pub fn ball_quantities(w: &Weight, class: &WeightClass, family: &BallFamily) -> Result<Vec<f64>> {
    let grid = family.grid();
    class.validate(grid)?;
    let wv = w.rasterize(grid)?;
    let wv = wv.values();
    let inv = w.inverse().rasterize(grid)?;
    let inv = inv.values();
    let weights = grid.quadrature_weights();
    let mem = members(family, &weights)?;
    let n = mem.ranges.len();
    let out = match class {
        WeightClass::Ap { p } => {
            let pw = PrefixSums::new(&weights, wv);
            let pd = PrefixSums::new(&weights, &pow_values(inv, conj(*p) - 1.0));
            (0..n).map(|k| avg(&pw, &mem.ranges[k]) * avg(&pd, &mem.ranges[k]).powf(p - 1.0)).collect()
        }
        WeightClass::A1 => {
            let pw = PrefixSums::new(&weights, wv);
            (0..n).map(|k| avg(&pw, &mem.ranges[k]) / min_on(wv, &mem.ranges[k])).collect()
        }
        WeightClass::ReverseHolder { s } => {
            let pw = PrefixSums::new(&weights, wv);
            let ps = PrefixSums::new(&weights, &pow_values(wv, *s));
            (0..n).map(|k| avg(&ps, &mem.ranges[k]).powf(1.0 / s) / avg(&pw, &mem.ranges[k])).collect()
        }
        WeightClass::Apq { p, q } => {
            let pq = PrefixSums::new(&weights, &pow_values(wv, *q));
            if *p == 1.0 {
                let wq = pow_values(wv, *q);
                (0..n).map(|k| avg(&pq, &mem.ranges[k]) / min_on(&wq, &mem.ranges[k])).collect()
            } else {
                let pp = conj(*p);
                let pd = PrefixSums::new(&weights, &pow_values(inv, pp));
                (0..n)
                    .map(|k| avg(&pq, &mem.ranges[k]).powf(1.0 / q) * avg(&pd, &mem.ranges[k]).powf(1.0 / pp))
                    .collect()
            }
        }
        WeightClass::ApVar { p } => {
            let a = ball_norms(wv, p, grid, &weights, &mem)?;
            let b = ball_norms(inv, &p.conjugate()?, grid, &weights, &mem)?;
            (0..n).map(|k| a[k] * b[k] / mem.measure[k]).collect()
        }
        WeightClass::ApqVar { p, q, gamma } => {
            let a = ball_norms(wv, q, grid, &weights, &mem)?;
            let b = ball_norms(inv, &p.conjugate()?, grid, &weights, &mem)?;
            (0..n).map(|k| mem.measure[k].powf(gamma - 1.0) * a[k] * b[k]).collect()
        }
    };
    Ok(out)
}

fn cache_key(class: &WeightClass, family: &BallFamily) -> String {
    format!("{:?}|{}|{:x}", class, family.id(), family.fingerprint())
}

/// Maximum of the class quantity over `family`; cached per weight.
pub fn class_estimate(w: &Weight, class: &WeightClass, family: &BallFamily) -> Result<f64> {
    let key = cache_key(class, family);
    if let Some(v) = w.cache.lock().expect("weight cache poisoned").get(&key) {
        return Ok(*v);
    }
    let q = ball_quantities(w, class, family)?;
    let est = q.into_iter().fold(f64::NEG_INFINITY, f64::max);
    w.cache.lock().expect("weight cache poisoned").insert(key, est);
    Ok(est)
}

/// Constant estimate on a single family. One level gives no trend, so the
/// verdict is [`Verdict::Insufficient`]; use [`class_constant_trend`] for a
/// refinement verdict.
pub fn class_constant(w: &Weight, class: &WeightClass, family: &BallFamily) -> Result<ClassConstantReport> {
    let est = class_estimate(w, class, family)?;
    let res = family.grid().resolution();
    Ok(ClassConstantReport {
        class: class.tag().into(),
        params: class.params(),
        family: family.id(),
        resolution: res,
        estimate: est,
        trend: vec![(res, est)],
        verdict: classify(&[est]),
    })
}

/// Estimates at `levels` nested refinements of `grid` and the resulting verdict.
pub fn class_constant_trend(
    w: &Weight,
    class: &WeightClass,
    grid: &Grid,
    policy: BallPolicy,
    levels: usize,
) -> Result<ClassConstantReport> {
    let mut g = *grid;
    let mut trend = Vec::with_capacity(levels);
    let mut last = None;
    for level in 0..levels {
        if level > 0 {
            g = g.refined();
        }
        let family = enumerate_balls(&g, policy);
        let est = class_estimate(w, class, &family)?;
        trend.push((g.resolution(), est));
        last = Some(family);
    }
    let family = last.ok_or_else(|| Error::InvalidClass("need at least one refinement level".into()))?;
    let values: Vec<f64> = trend.iter().map(|t| t.1).collect();
    Ok(ClassConstantReport {
        class: class.tag().into(),
        params: class.params(),
        family: family.id(),
        resolution: g.resolution(),
        estimate: *values.last().unwrap(),
        verdict: classify(&values),
        trend,
    })
}

/// The `A_t` exponents scanned as a stand-in for `A_∞`.
pub const AINFTY_SCAN: [f64; 4] = [1.5, 2.0, 4.0, 8.0];

/// `A_t` trends for each `t` in [`AINFTY_SCAN`]; `w` looks `A_∞` when any is
/// bounded-looking.
pub fn ainfty_scan(
    w: &Weight,
    grid: &Grid,
    policy: BallPolicy,
    levels: usize,
) -> Result<(bool, Vec<ClassConstantReport>)> {
    let reports = AINFTY_SCAN
        .iter()
        .map(|&t| class_constant_trend(w, &WeightClass::Ap { p: t }, grid, policy, levels))
        .collect::<Result<Vec<_>>>()?;
    let member = reports.iter().any(|r| r.verdict == Verdict::BoundedLooking);
    Ok((member, reports))
}

/// `μ1 μ2^{1-p}` on `grid`.
pub fn reverse_factorization(mu1: &Weight, mu2: &Weight, p: f64, grid: &Grid) -> Result<Weight> {
    if !(p > 1.0) {
        return Err(Error::InvalidClass(format!("reverse factorization needs p > 1, got {p}")));
    }
    let a = mu1.rasterize(grid)?;
    let b = mu2.pow(1.0 - p).rasterize(grid)?;
    Weight::from_grid(a.product(&b)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FactorizationCheck {
    pub ap_constant: f64,
    pub a1_mu1: f64,
    pub a1_mu2: f64,
    /// `[μ1]_{A_1} [μ2]_{A_1}^{p-1}`
    pub bound: f64,
    /// Balls where `Q_p(B) > Q_1(μ1;B) Q_1(μ2;B)^{p-1}` beyond rounding.
    pub violations: usize,
}

/// Ball-by-ball check of `[μ1 μ2^{1-p}]_{A_p} <= [μ1]_{A_1} [μ2]_{A_1}^{p-1}`.
pub fn factorization_check(mu1: &Weight, mu2: &Weight, p: f64, family: &BallFamily) -> Result<FactorizationCheck> {
    let w = reverse_factorization(mu1, mu2, p, family.grid())?;
    let qp = ball_quantities(&w, &WeightClass::Ap { p }, family)?;
    let q1 = ball_quantities(mu1, &WeightClass::A1, family)?;
    let q2 = ball_quantities(mu2, &WeightClass::A1, family)?;
    let violations = (0..qp.len()).filter(|&k| qp[k] > q1[k] * q2[k].powf(p - 1.0) * (1.0 + 1e-12)).count();
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (a1_mu1, a1_mu2) = (max(&q1), max(&q2));
    Ok(FactorizationCheck { ap_constant: max(&qp), a1_mu1, a1_mu2, bound: a1_mu1 * a1_mu2.powf(p - 1.0), violations })
}

/// `τ = s(p-1) + 1`.
pub fn jn_exponent(p: f64, s: f64) -> Result<f64> {
    if !(p > 1.0 && s > 1.0 && p.is_finite() && s.is_finite()) {
        return Err(Error::Precondition(format!("jn_exponent needs p > 1, s > 1, got p={p}, s={s}")));
    }
    Ok(s * (p - 1.0) + 1.0)
}

pub fn jn_exponent_exact(p: &XRational, s: &XRational) -> Result<XRational> {
    let one = BigRational::one();
    let (p, s) = (p.finite()?, s.finite()?);
    if !(*p > one && *s > one) {
        return Err(Error::Precondition(format!("jn_exponent needs p > 1, s > 1, got p={p}, s={s}")));
    }
    Ok(XRational::Finite(s * (p - &one) + one))
}

/// `r = 1 + q/p'`.
pub fn apq_to_ar(p: f64, q: f64) -> Result<f64> {
    if !(p >= 1.0 && p < q && q.is_finite()) {
        return Err(Error::Precondition(format!("apq_to_ar needs 1 <= p < q < inf, got p={p}, q={q}")));
    }
    Ok(1.0 + q / conj(p))
}

pub fn apq_to_ar_exact(p: &XRational, q: &XRational) -> Result<XRational> {
    let (pf, qf) = (p.finite()?, q.finite()?);
    if !(*pf >= BigRational::one() && pf < qf) {
        return Err(Error::Precondition(format!("apq_to_ar needs 1 <= p < q < inf, got p={pf}, q={qf}")));
    }
    let q_over_pp = match p.conj()? {
        XRational::Infinity => BigRational::zero(),
        XRational::Finite(pp) => qf / pp,
    };
    Ok(XRational::Finite(BigRational::one() + q_over_pp))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SigmaCheck {
    pub sigma: f64,
    /// Max over nodes of `|σ (q/σ)'(x) - p'(x)| / p'(x)`.
    pub conjugate_identity_error: f64,
    pub apq_constant: f64,
    pub ap_sigma_constant: f64,
    /// Max over balls of `|Q_{q/σ}(w^σ; B) - Q_{p,q}(w; B)^σ|` relative to the latter.
    pub max_ball_error: f64,
    pub balls: usize,
}

/// `w ∈ A_{p(·),q(·)}` versus `w^σ ∈ A_{q(·)/σ}`, compared ball by ball.
pub fn apqvar_sigma_check(
    w: &Weight,
    p: &ExponentFunction,
    q: &ExponentFunction,
    sigma: f64,
    family: &BallFamily,
) -> Result<SigmaCheck> {
    if !(sigma > 1.0 && sigma.is_finite()) {
        return Err(Error::Precondition(format!("sigma must exceed 1, got {sigma}")));
    }
    let grid = family.grid();
    let gamma = 1.0 / conj(sigma);
    check_gap(p, q, gamma, grid).map_err(|e| Error::Precondition(e.to_string()))?;
    let r = q.transform(Transform::DivideBy(sigma))?;
    let rc = r.conjugate()?.sample(grid)?;
    let pc = p.conjugate()?.sample(grid)?;
    let conjugate_identity_error = rc.iter().zip(&pc).map(|(a, b)| (sigma * a - b).abs() / b).fold(0.0, f64::max);
    let q1 = ball_quantities(w, &WeightClass::ApqVar { p: p.clone(), q: q.clone(), gamma }, family)?;
    let q2 = ball_quantities(&w.pow(sigma), &WeightClass::ApVar { p: r }, family)?;
    let max_ball_error = q1
        .iter()
        .zip(&q2)
        .map(|(a, b)| {
            let target = a.powf(sigma);
            (b - target).abs() / target
        })
        .fold(0.0, f64::max);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(SigmaCheck {
        sigma,
        conjugate_identity_error,
        apq_constant: max(&q1),
        ap_sigma_constant: max(&q2),
        max_ball_error,
        balls: q1.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AinftyWeakerCheck {
    pub s: f64,
    /// `[w^s]_{A_{p(·)/s}}`
    pub scaled_constant: f64,
    /// `[w]_{A_{p(·)}}`
    pub constant: f64,
    pub budget: f64,
    /// `budget * constant^s`
    pub bound: f64,
    /// Balls where `Q_s(B) > budget * Q_1(B)^s`.
    pub ball_violations: usize,
    pub holds: bool,
}

/// Checks `[w^s]_{A_{p(·)/s}} <= K_H [w]_{A_{p(·)}}^s`, ball by ball and overall.
pub fn ainfty_weaker_check(w: &Weight, p: &ExponentFunction, s: f64, family: &BallFamily) -> Result<AinftyWeakerCheck> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Precondition(format!("s must lie in (0,1), got {s}")));
    }
    let budget = holder_budget(p);
    let q1 = ball_quantities(w, &WeightClass::ApVar { p: p.clone() }, family)?;
    let qs = ball_quantities(&w.pow(s), &WeightClass::ApVar { p: p.transform(Transform::DivideBy(s))? }, family)?;
    let ball_violations = q1.iter().zip(&qs).filter(|(a, b)| **b > budget * a.powf(s)).count();
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (constant, scaled_constant) = (max(&q1), max(&qs));
    let bound = budget * constant.powf(s);
    Ok(AinftyWeakerCheck {
        s,
        scaled_constant,
        constant,
        budget,
        bound,
        ball_violations,
        holds: ball_violations == 0 && scaled_constant <= bound,
    })
}

/// `0 <= a < n / p_+`.
pub fn power_weight_admissible(a: f64, p: &ExponentFunction, n: usize) -> bool {
    a >= 0.0 && a < n as f64 / p.p_plus()
}

/// The ball achieving the family maximum of `class`, for diagnostics.
pub fn argmax_ball(w: &Weight, class: &WeightClass, family: &BallFamily) -> Result<Option<Ball>> {
    let q = ball_quantities(w, class, family)?;
    let best = q.iter().enumerate().fold(None::<(usize, f64)>, |acc, (k, v)| match acc {
        Some((_, b)) if b >= *v => acc,
        _ => Some((k, *v)),
    });
    Ok(best.map(|(k, _)| family.balls()[k]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::ExponentFamily;
    use crate::field::Region;

    fn grid(lo: f64, hi: f64, n: usize) -> Grid {
        Grid::line(lo, hi, n).unwrap()
    }

    #[test]
    fn unit_weight_constants_are_one() {
        let g = grid(0.0, 1.0, 33);
        let fam = enumerate_balls(&g, BallPolicy::AllPairs);
        let p = ExponentFunction::new(
            ExponentFamily::Affine { intercept: 2.0, slope: vec![1.0] },
            Region::interval(0.0, 1.0),
        )
        .unwrap();
        let w = Weight::unit();
        for class in [
            WeightClass::Ap { p: 2.0 },
            WeightClass::A1,
            WeightClass::ReverseHolder { s: 3.0 },
            WeightClass::ApVar { p: ExponentFunction::constant(2.5, Region::interval(0.0, 1.0)).unwrap() },
        ] {
            let est = class_constant(&w, &class, &fam).unwrap().estimate;
            assert!((est - 1.0).abs() < 1e-12, "{class:?}: {est}");
        }
        let est = class_constant(&w, &WeightClass::ApVar { p }, &fam).unwrap().estimate;
        assert!(est >= 1.0 - 1e-9, "{est}");
    }

    #[test]
    fn inverse_of_inverse_is_bitwise() {
        let g = grid(-1.0, 1.0, 65);
        let w = Weight::power_law(0.3).unwrap();
        assert_eq!(w.rasterize(&g).unwrap(), w.inverse().inverse().rasterize(&g).unwrap());
    }

    #[test]
    fn origin_cell_average() {
        let g = grid(-1.0, 1.0, 5);
        let v = Weight::power_law(0.5).unwrap().rasterize(&g).unwrap();
        let h: f64 = 0.5;
        // average of |x|^{-1/2} over [-h/2, h/2] is 2 (h/2)^{-1/2}
        assert!((v.values()[2] - 2.0 * (h / 2.0).powf(-0.5)).abs() < 1e-14);
        assert!((v.values()[3] - h.powf(-0.5)).abs() < 1e-14);
    }

    #[test]
    fn classical_power_weight_criterion() {
        let g = grid(-1.0, 1.0, 33);
        let bad = class_constant_trend(
            &Weight::power_law(2.0).unwrap(),
            &WeightClass::Ap { p: 2.0 },
            &g,
            BallPolicy::AllPairs,
            3,
        )
        .unwrap();
        assert_eq!(bad.verdict, Verdict::Diverging, "{:?}", bad.trend);
        let good = class_constant_trend(
            &Weight::power_law(0.5).unwrap(),
            &WeightClass::Ap { p: 2.0 },
            &g,
            BallPolicy::AllPairs,
            3,
        )
        .unwrap();
        assert_eq!(good.verdict, Verdict::BoundedLooking, "{:?}", good.trend);
    }

    #[test]
    fn jn_coupling_example() {
        let g = grid(-1.0, 1.0, 33);
        let w = Weight::power_law(-0.5).unwrap();
        let tau = jn_exponent(2.0, 2.0).unwrap();
        assert_eq!(tau, 3.0);
        for (weight, class) in [
            (w.clone(), WeightClass::Ap { p: 2.0 }),
            (w.clone(), WeightClass::ReverseHolder { s: 2.0 }),
            (w.pow(2.0), WeightClass::Ap { p: tau }),
        ] {
            let r = class_constant_trend(&weight, &class, &g, BallPolicy::AllPairs, 3).unwrap();
            assert_eq!(r.verdict, Verdict::BoundedLooking, "{class:?} {:?}", r.trend);
        }
    }

    #[test]
    fn jn_and_apq_examples() {
        assert_eq!(jn_exponent(3.0, 1.5).unwrap(), 4.0);
        assert!((jn_exponent(2.0, 1.0 + 1e-12).unwrap() - 2.0).abs() < 1e-11);
        assert!(jn_exponent(1.0, 2.0).is_err());
        assert_eq!(apq_to_ar(2.0, 4.0).unwrap(), 3.0);
        assert!((apq_to_ar(4.0 / 3.0, 4.0).unwrap() - 2.0).abs() < 1e-14);
        assert!(apq_to_ar(2.0, 2.0).is_err());
        let x = |s: &str| s.parse::<XRational>().unwrap();
        assert_eq!(apq_to_ar_exact(&x("4/3"), &x("4")).unwrap(), x("2"));
        assert_eq!(apq_to_ar_exact(&x("1"), &x("4")).unwrap(), x("1"));
        assert_eq!(jn_exponent_exact(&x("3"), &x("3/2")).unwrap(), x("4"));
    }

    #[test]
    fn duality_of_apvar_is_exact() {
        let g = grid(0.0, 1.0, 33);
        let fam = enumerate_balls(&g, BallPolicy::AllPairs);
        let p = ExponentFunction::new(
            ExponentFamily::Affine { intercept: 2.0, slope: vec![0.25] },
            Region::interval(0.0, 1.0),
        )
        .unwrap();
        let w = Weight::power_law(0.125).unwrap();
        let a = ball_quantities(&w, &WeightClass::ApVar { p: p.clone() }, &fam).unwrap();
        let b = ball_quantities(&w.inverse(), &WeightClass::ApVar { p: p.conjugate().unwrap() }, &fam).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn power_weight_admissibility_examples() {
        let p2 = ExponentFunction::constant(2.0, Region::interval(0.0, 1.0)).unwrap();
        assert!(power_weight_admissible(0.0, &p2, 1));
        assert!(power_weight_admissible(0.4, &p2, 1));
        assert!(!power_weight_admissible(0.6, &p2, 1));
        let p4 = ExponentFunction::constant(4.0, Region::new(vec![0.0, 0.0], vec![1.0, 1.0])).unwrap();
        assert!(!power_weight_admissible(0.5, &p4, 2));
    }

    #[test]
    fn factorization_bound_holds_ball_by_ball() {
        let g = grid(-1.0, 1.0, 65);
        let fam = enumerate_balls(&g, BallPolicy::AllPairs);
        let mu1 = Weight::power_law(0.3).unwrap();
        let mu2 = Weight::from_grid(
            GridFunction::from_fn(g, SignMode::Nonnegative, |x| (x[0] - 0.2).abs().powf(-0.4).min(1e3)).unwrap(),
        )
        .unwrap();
        let c = factorization_check(&mu1, &mu2, 3.0, &fam).unwrap();
        assert_eq!(c.violations, 0);
        assert!(c.ap_constant <= c.bound * (1.0 + 1e-12));
        let unit = reverse_factorization(&Weight::unit(), &Weight::unit(), 3.0, &g).unwrap();
        assert!(unit.rasterize(&g).unwrap().values().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn sigma_and_ainfty_checks_on_unit_weight() {
        let g = grid(0.0, 1.0, 17);
        let fam = enumerate_balls(&g, BallPolicy::AllPairs);
        let dom = Region::interval(0.0, 1.0);
        let p = ExponentFunction::constant(2.0, dom.clone()).unwrap();
        let q = ExponentFunction::constant(4.0, dom).unwrap();
        let c = apqvar_sigma_check(&Weight::unit(), &p, &q, 4.0 / 3.0, &fam).unwrap();
        assert!(c.conjugate_identity_error < 1e-15);
        assert!((c.apq_constant - 1.0).abs() < 1e-12 && (c.ap_sigma_constant - 1.0).abs() < 1e-12);
        assert!(apqvar_sigma_check(&Weight::unit(), &p, &q, 2.0, &fam).is_err());
        let a = ainfty_weaker_check(&Weight::unit(), &p, 0.5, &fam).unwrap();
        assert!(a.holds && (a.scaled_constant - 1.0).abs() < 1e-12);
    }

    #[test]
    fn estimates_grow_with_the_family() {
        let g = grid(-1.0, 1.0, 33);
        let w = Weight::power_law(0.6).unwrap();
        let small = enumerate_balls(&g, BallPolicy::DyadicRadii);
        let big = small.extended(enumerate_balls(&g, BallPolicy::AllPairs).balls().iter().copied());
        let class = WeightClass::Ap { p: 2.0 };
        assert!(class_estimate(&w, &class, &big).unwrap() >= class_estimate(&w, &class, &small).unwrap());
    }

    #[test]
    fn classifier_thresholds() {
        assert_eq!(classify(&[1.0]), Verdict::Insufficient);
        assert_eq!(classify(&[1.0, 1.25, 1.5625]), Verdict::Diverging);
        assert_eq!(classify(&[1.0, 1.3, 1.4]), Verdict::BoundedLooking);
    }
}
