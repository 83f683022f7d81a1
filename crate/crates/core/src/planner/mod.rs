//! Exact parameter bookkeeping for the extrapolation theorems.
//!
//! Every plan works in rational arithmetic. A plan fixes the free constants
//! (`s`, `α`, `β`, `σ`, ...), checks them against their admissible windows,
//! and lists the maximal-operator and weight-class conditions that a weight
//! has to satisfy for the conclusion to follow.

mod xrational;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Result as CoreResult;
use crate::exponent::{ExponentFunction, Transform};

pub use xrational::XRational;

type Result<T> = std::result::Result<T, PlanError>;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum PlanError {
    #[error("division by zero")]
    DivisionByZero,

    #[error("undefined operation: {0}")]
    Undefined(String),

    #[error("{0}")]
    NotFinite(String),

    #[error("conjugate exponent undefined for {0} < 1")]
    InvalidConjugate(String),

    #[error("cannot parse {0:?} as an exact rational")]
    Parse(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("infeasible s = {s}: admissible window is {window}")]
    InfeasibleS { s: Box<XRational>, window: Box<Interval> },

    #[error("empty admissible window for {name}: {window}")]
    EmptyWindow { name: String, window: Box<Interval> },

    #[error("p0 = 1 is the endpoint case: use plan_a1")]
    UseA1,

    #[error("sigma = 1 reduces to the diagonal case: use plan_diagonal")]
    UseDiagonal,

    #[error("oscillation too large: p_+/p_- = {ratio_p} is not below q_+/q_- = {ratio_q}, no p_* exists")]
    OscillationTooLarge { ratio_p: Box<XRational>, ratio_q: Box<XRational> },

    #[error("p_* = {p_star} lies outside ({q_minus}, {q_plus})")]
    PStarOutOfRange { p_star: Box<XRational>, q_minus: Box<XRational>, q_plus: Box<XRational> },

    #[error("A1 extrapolation only goes up: p_- = {p_minus} < p0 = {p0}")]
    OnlyGoesUp { p0: Box<XRational>, p_minus: Box<XRational> },
}

fn add(a: &XRational, b: &XRational) -> Result<XRational> {
    a.checked_add(b)
}

fn sub(a: &XRational, b: &XRational) -> Result<XRational> {
    a.checked_sub(b)
}

fn mul(a: &XRational, b: &XRational) -> Result<XRational> {
    a.checked_mul(b)
}

fn div(a: &XRational, b: &XRational) -> Result<XRational> {
    a.checked_div(b)
}

fn int(n: i64) -> XRational {
    XRational::int(n)
}

fn neg(a: &XRational) -> Result<XRational> {
    sub(&XRational::zero(), a)
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(PlanError::Precondition(msg()))
    }
}

/// Open interval `(lower, upper)`, or `(lower, upper]` when `upper_closed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: XRational,
    pub upper: XRational,
    pub upper_closed: bool,
}

impl Interval {
    pub fn open(lower: XRational, upper: XRational) -> Self {
        Self { lower, upper, upper_closed: false }
    }

    pub fn contains(&self, x: &XRational) -> bool {
        *x > self.lower && (*x < self.upper || self.upper_closed && *x == self.upper)
    }

    pub fn is_empty(&self) -> bool {
        if self.upper_closed {
            self.upper < self.lower
        } else {
            self.upper <= self.lower
        }
    }

    pub fn midpoint(&self) -> Result<XRational> {
        XRational::midpoint(&self.lower, &self.upper)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}{}", self.lower, self.upper, if self.upper_closed { "]" } else { ")" })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentBase {
    P,
    Q,
}

/// `base(·)/divide_by`, conjugated if asked, then divided by `then_divide_by`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentExpr {
    pub base: ExponentBase,
    pub divide_by: XRational,
    pub conjugate: bool,
    pub then_divide_by: XRational,
}

impl ExponentExpr {
    pub fn plain(base: ExponentBase, divide_by: XRational) -> Self {
        Self { base, divide_by, conjugate: false, then_divide_by: XRational::one() }
    }

    pub fn conjugate_of(base: ExponentBase, divide_by: XRational) -> Self {
        Self { base, divide_by, conjugate: true, then_divide_by: XRational::one() }
    }

    pub fn then_divided_by(mut self, d: XRational) -> Self {
        self.then_divide_by = d;
        self
    }

    /// Builds the concrete exponent from `p` (and `q` for off-diagonal plans).
    pub fn instantiate(&self, p: &ExponentFunction, q: Option<&ExponentFunction>) -> CoreResult<ExponentFunction> {
        let base = match (self.base, q) {
            (ExponentBase::P, _) => p,
            (ExponentBase::Q, Some(q)) => q,
            (ExponentBase::Q, None) => {
                return Err(crate::error::Error::Precondition("obligation needs the target exponent q(·)".into()))
            }
        };
        let d = self.divide_by.finite()?;
        let mut e = base.transform(Transform::DivideBy(XRational::Finite(d.clone()).to_f64()))?;
        if self.conjugate {
            e = e.conjugate()?;
        }
        if self.then_divide_by != XRational::one() {
            e = e.transform(Transform::DivideBy(self.then_divide_by.to_f64()))?;
        }
        Ok(e)
    }
}

fn scaled_name(name: &str, d: &XRational) -> String {
    match d {
        d if *d == XRational::one() => name.to_string(),
        XRational::Finite(r) if r.numer() == &1.into() => format!("{}{name}", r.denom()),
        XRational::Finite(r) if r.is_integer() => format!("{name}/{}", r.numer()),
        d => format!("{name}/({d})"),
    }
}

impl fmt::Display for ExponentExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letter = match self.base {
            ExponentBase::P => "p",
            ExponentBase::Q => "q",
        };
        let inner = if self.divide_by == XRational::one() {
            if self.conjugate {
                format!("{letter}'(·)")
            } else {
                format!("{letter}(·)")
            }
        } else {
            let s = scaled_name(&format!("{letter}(·)"), &self.divide_by);
            if self.conjugate {
                format!("({s})'")
            } else {
                s
            }
        };
        f.write_str(&scaled_name(&inner, &self.then_divide_by))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObligationKind {
    /// `M` bounded on `L^{exponent}(w^{weight_power})`.
    MaximalBounded,
    /// `w^{weight_power} ∈ A_{exponent}`.
    WeightClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obligation {
    pub kind: ObligationKind,
    pub exponent: ExponentExpr,
    pub weight_power: XRational,
}

impl Obligation {
    pub fn maximal(exponent: ExponentExpr, weight_power: XRational) -> Self {
        Self { kind: ObligationKind::MaximalBounded, exponent, weight_power }
    }

    pub fn class(exponent: ExponentExpr, weight_power: XRational) -> Self {
        Self { kind: ObligationKind::WeightClass, exponent, weight_power }
    }

    /// `(base(·)/scale, w^{power})` is an M-pair.
    pub fn m_pair(base: ExponentBase, scale: XRational, power: XRational) -> Result<Vec<Self>> {
        let dual = neg(&power)?;
        Ok(vec![
            Self::maximal(ExponentExpr::plain(base, scale.clone()), power),
            Self::maximal(ExponentExpr::conjugate_of(base, scale), dual),
        ])
    }

    pub fn weight_label(&self) -> String {
        match &self.weight_power {
            w if *w == XRational::zero() => "1".into(),
            w if *w == XRational::one() => "w".into(),
            w => format!("w^{{{w}}}"),
        }
    }
}

impl fmt::Display for Obligation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ObligationKind::MaximalBounded => {
                write!(f, "M bounded on L^{{{}}}({})", self.exponent, self.weight_label())
            }
            ObligationKind::WeightClass => write!(f, "{} in A_{{{}}}", self.weight_label(), self.exponent),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Diagonal,
    OffDiagonal,
    OffDiagonalEndpoint,
    Limited,
    A1,
    Ainfty,
    RoughSio,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scenario::Diagonal => "diagonal",
            Scenario::OffDiagonal => "off-diagonal",
            Scenario::OffDiagonalEndpoint => "off-diagonal-endpoint",
            Scenario::Limited => "limited",
            Scenario::A1 => "a1",
            Scenario::Ainfty => "ainfty",
            Scenario::RoughSio => "rough-sio",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: XRational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationPlan {
    pub scenario: Scenario,
    pub parameters: Vec<Parameter>,
    pub obligations: Vec<Obligation>,
    /// Admissible window for `s`, when `s` is free.
    pub window: Option<Interval>,
    pub p_star_window: Option<Interval>,
    pub notes: Vec<String>,
}

impl ExtrapolationPlan {
    fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            parameters: Vec::new(),
            obligations: Vec::new(),
            window: None,
            p_star_window: None,
            notes: Vec::new(),
        }
    }

    fn set(&mut self, name: &str, value: XRational) {
        self.parameters.push(Parameter { name: name.to_string(), value });
    }

    pub fn param(&self, name: &str) -> Option<&XRational> {
        self.parameters.iter().find(|p| p.name == name).map(|p| &p.value)
    }

    /// Re-checks the chosen values against their windows.
    pub fn check(&self) -> Result<()> {
        if self.obligations.is_empty() {
            return Err(PlanError::Precondition("plan has no obligations".into()));
        }
        if let (Some(w), Some(s)) = (&self.window, self.param("s")) {
            if !w.contains(s) {
                return Err(PlanError::InfeasibleS { s: Box::new(s.clone()), window: Box::new(w.clone()) });
            }
        }
        if let (Some(w), Some(p)) = (&self.p_star_window, self.param("p_star")) {
            if !w.contains(p) {
                return Err(PlanError::EmptyWindow { name: "p_star".into(), window: Box::new(w.clone()) });
            }
        }
        Ok(())
    }

    pub fn table(&self) -> String {
        let mut out = format!("scenario      {}\n", self.scenario);
        if let Some(w) = &self.p_star_window {
            out += &format!("p_star window {w}\n");
        }
        if let Some(w) = &self.window {
            out += &format!("s window      {w}\n");
        }
        out += "parameters\n";
        for p in &self.parameters {
            out += &format!("  {:<8} {:<12} {:.6}\n", p.name, p.value.to_string(), p.value.to_f64());
        }
        out += "obligations\n";
        for o in &self.obligations {
            out += &format!("  {o}\n");
        }
        for n in &self.notes {
            out += &format!("note: {n}\n");
        }
        out
    }
}

fn choose_s(window: Interval, s: Option<XRational>, default: XRational) -> Result<(Interval, XRational)> {
    if window.is_empty() {
        return Err(PlanError::EmptyWindow { name: "s".into(), window: Box::new(window) });
    }
    let s = s.unwrap_or(default);
    if !window.contains(&s) {
        return Err(PlanError::InfeasibleS { s: Box::new(s), window: Box::new(window) });
    }
    Ok((window, s))
}

/// Diagonal extrapolation from `L^{p0}(w0)`, `w0 ∈ A_{p0}`.
pub fn plan_diagonal(
    p0: &XRational,
    p_minus: &XRational,
    p_plus: &XRational,
    s: Option<XRational>,
    beta1: Option<XRational>,
) -> Result<ExtrapolationPlan> {
    let one = XRational::one();
    p0.finite()?;
    if *p0 == one {
        return Err(PlanError::UseA1);
    }
    require(*p0 > one, || format!("p0 > 1 required, got {p0}"))?;
    require(one < *p_minus && p_minus <= p_plus && !p_plus.is_infinite(), || {
        format!("1 < p_- <= p_+ < inf required, got p_- = {p_minus}, p_+ = {p_plus}")
    })?;

    let p0m1 = sub(p0, &one)?;
    let lower = sub(p0, &mul(p_minus, &p0m1)?)?.max(XRational::zero());
    let upper = p_minus.clone().min(p0.clone());
    let (window, s) = choose_s(Interval::open(lower, upper), s, one.clone())?;
    let beta1 = beta1.unwrap_or_else(XRational::zero);

    let alpha1 = div(&sub(p0, &s)?, &p0m1)?;
    let alpha2 = one.clone();
    let beta2 = sub(&s, &mul(&beta1, &sub(&one, p0)?)?)?;
    let gamma = div(&s, &div(p0, &s)?.conj()?)?;

    let mut plan = ExtrapolationPlan::new(Scenario::Diagonal);
    plan.window = Some(window);
    for (k, v) in [("p0", p0.clone()), ("s", s.clone()), ("alpha1", alpha1.clone()), ("beta1", beta1.clone())] {
        plan.set(k, v);
    }
    plan.set("alpha2", alpha2.clone());
    plan.set("beta2", beta2.clone());
    plan.set("gamma", gamma);
    plan.obligations = vec![
        Obligation::maximal(ExponentExpr::plain(ExponentBase::P, alpha1.clone()), sub(&alpha1, &beta1)?),
        Obligation::maximal(ExponentExpr::conjugate_of(ExponentBase::P, s).then_divided_by(alpha2), neg(&beta2)?),
    ];
    plan.check()?;
    Ok(plan)
}

/// `σ` from `1/σ' = 1/p0 - 1/q0`.
pub fn offdiagonal_sigma(p0: &XRational, q0: &XRational) -> Result<XRational> {
    let gap = sub(&p0.recip()?, &q0.recip()?)?;
    if gap == XRational::zero() {
        return Ok(XRational::one());
    }
    gap.recip()?.conj()
}

/// Off-diagonal extrapolation from `A_{p0,q0}`.
pub fn plan_offdiagonal(
    p0: &XRational,
    q0: &XRational,
    p_minus: &XRational,
    q_minus: &XRational,
    s: Option<XRational>,
    beta1: Option<XRational>,
) -> Result<ExtrapolationPlan> {
    let one = XRational::one();
    q0.finite()?;
    require(one <= *p0 && p0 <= q0, || format!("1 <= p0 <= q0 < inf required, got p0 = {p0}, q0 = {q0}"))?;
    let sigma = offdiagonal_sigma(p0, q0)?;
    if sigma == one {
        return Err(PlanError::UseDiagonal);
    }

    if *p0 == one {
        let mut plan = ExtrapolationPlan::new(Scenario::OffDiagonalEndpoint);
        plan.set("p0", p0.clone());
        plan.set("q0", q0.clone());
        plan.set("sigma", sigma);
        plan.obligations = vec![Obligation::maximal(ExponentExpr::conjugate_of(ExponentBase::Q, q0.clone()), neg(q0)?)];
        plan.check()?;
        return Ok(plan);
    }

    require(p_minus.is_positive() && q_minus.is_positive(), || "p_- and q_- must be positive".into())?;
    let q0_sigma = div(q0, &sigma)?;
    let lower = sub(q0, &mul(q_minus, &sub(&q0_sigma, &one)?)?)?.max(XRational::zero());
    let upper = q0.clone().min(q_minus.clone());
    let (window, s) = choose_s(Interval::open(lower, upper), s, sigma.clone())?;
    let beta1 = beta1.unwrap_or_else(XRational::zero);

    let alpha1 = div(&sub(q0, &s)?, &sub(&q0_sigma, &one)?)?;
    let alpha2 = one.clone();
    let beta2 = sub(&s, &mul(&beta1, &sub(&one, &q0_sigma)?)?)?;
    let r0 = div(q0, &s)?;
    let gamma = div(&s, &r0.conj()?)?;

    let mut plan = ExtrapolationPlan::new(Scenario::OffDiagonal);
    plan.window = Some(window);
    plan.set("p0", p0.clone());
    plan.set("q0", q0.clone());
    plan.set("sigma", sigma.clone());
    plan.set("s", s.clone());
    plan.set("alpha1", alpha1.clone());
    plan.set("beta1", beta1.clone());
    plan.set("alpha2", alpha2.clone());
    plan.set("beta2", beta2.clone());
    plan.set("r0", r0);
    plan.set("gamma", gamma);
    if alpha1 != s {
        plan.notes
            .push(format!("alpha1 = (q0 - s)/(q0/sigma - 1) = {alpha1} differs from the shortcut alpha1 = s = {s}"));
    }
    let gap = sub(&p_minus.recip()?, &q_minus.recip()?)?;
    if gap != sub(&p0.recip()?, &q0.recip()?)? {
        plan.notes.push(format!("1/p_- - 1/q_- = {gap} does not match 1/p0 - 1/q0"));
    }
    plan.obligations = vec![
        Obligation::maximal(ExponentExpr::plain(ExponentBase::Q, alpha1.clone()), sub(&alpha1, &beta1)?),
        Obligation::maximal(ExponentExpr::conjugate_of(ExponentBase::Q, s).then_divided_by(alpha2), neg(&beta2)?),
    ];
    plan.check()?;
    Ok(plan)
}

#[derive(Clone, Debug, PartialEq)]
pub enum LimitedMode {
    /// `β1 = -sσ/p_*`, so the dual condition is void.
    Weighted,
    /// `w ≡ 1`.
    Unweighted,
    Beta1(XRational),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitedOptions {
    pub p_star: Option<XRational>,
    pub s: Option<XRational>,
    pub mode: LimitedMode,
}

impl Default for LimitedOptions {
    fn default() -> Self {
        Self { p_star: None, s: None, mode: LimitedMode::Weighted }
    }
}

/// `(q_-, q_+·p_-/p_+)`, the range of admissible `p_*`.
pub fn p_star_interval(
    q_minus: &XRational,
    q_plus: &XRational,
    p_minus: &XRational,
    p_plus: &XRational,
) -> Result<Interval> {
    require(q_minus.is_positive() && !q_minus.is_infinite() && p_minus.is_positive() && !p_plus.is_infinite(), || {
        format!("0 < q_- < inf, 0 < p_- <= p_+ < inf required, got q_- = {q_minus}, p_- = {p_minus}, p_+ = {p_plus}")
    })?;
    require(q_minus < q_plus && p_minus <= p_plus, || {
        format!("q_- < q_+ and p_- <= p_+ required, got ({q_minus}, {q_plus}), ({p_minus}, {p_plus})")
    })?;
    let interval = Interval::open(q_minus.clone(), div(&mul(q_plus, p_minus)?, p_plus)?);
    if interval.is_empty() {
        return Err(PlanError::OscillationTooLarge {
            ratio_p: Box::new(div(p_plus, p_minus)?),
            ratio_q: Box::new(div(q_plus, q_minus)?),
        });
    }
    Ok(interval)
}

/// Limited-range extrapolation from `A_{p0/q_-} ∩ RH_{(q_+/p0)'}`.
pub fn plan_limited(
    q_minus: &XRational,
    q_plus: &XRational,
    p_minus: &XRational,
    p_plus: &XRational,
    opts: &LimitedOptions,
) -> Result<ExtrapolationPlan> {
    let one = XRational::one();
    let p_window = p_star_interval(q_minus, q_plus, p_minus, p_plus)?;
    require(one <= *q_minus && q_minus < p_minus && p_plus < q_plus, || {
        format!("1 <= q_- < p_- <= p_+ < q_+ required, got q_- = {q_minus}, p_- = {p_minus}, p_+ = {p_plus}, q_+ = {q_plus}")
    })?;

    let p_star = match &opts.p_star {
        Some(p) => {
            if !(p > q_minus && p < q_plus) {
                return Err(PlanError::PStarOutOfRange {
                    p_star: Box::new(p.clone()),
                    q_minus: Box::new(q_minus.clone()),
                    q_plus: Box::new(q_plus.clone()),
                });
            }
            p.clone()
        }
        None if p_window.contains(p_minus) => p_minus.clone(),
        None => p_window.midpoint()?,
    };

    let ratio_conj = div(q_plus, &p_star)?.conj()?;
    let lower = sub(p_minus, &mul(&p_star, &sub(&div(p_minus, q_minus)?, &one)?)?)?
        .max(div(&mul(&p_star, p_plus)?, q_plus)?)
        .max(XRational::zero());
    let upper = p_minus.clone().min(p_star.clone());
    let window = Interval::open(lower, upper);
    if window.is_empty() {
        return Err(PlanError::EmptyWindow { name: "s".into(), window: Box::new(window) });
    }
    let default_s = window.midpoint()?;
    let (window, s) = choose_s(window, opts.s.clone(), default_s)?;

    let tau0 = add(&mul(&ratio_conj, &sub(&div(&p_star, q_minus)?, &one)?)?, &one)?;
    let sigma = div(&mul(&p_star, q_minus)?, &sub(&p_star, q_minus)?)?;
    let c = sub(&one, &div(&s, &p_star)?)?;
    let alpha1 = div(&mul(q_minus, &sub(&p_star, &s)?)?, &sub(&p_star, q_minus)?)?;
    let alpha2 = ratio_conj.clone();
    let beta1 = match &opts.mode {
        LimitedMode::Weighted => neg(&div(&mul(&s, &sigma)?, &p_star)?)?,
        LimitedMode::Unweighted => XRational::zero(),
        LimitedMode::Beta1(b) => b.clone(),
    };
    let beta2 = sub(&mul(&s, &alpha2)?, &mul(&beta1, &sub(&one, &tau0)?)?)?;

    let mut plan = ExtrapolationPlan::new(Scenario::Limited);
    plan.p_star_window = Some(p_window);
    plan.window = Some(window);
    for (k, v) in [
        ("p_star", p_star.clone()),
        ("s", s.clone()),
        ("tau0", tau0),
        ("sigma", sigma.clone()),
        ("c", c),
        ("alpha1", alpha1.clone()),
        ("beta1", beta1.clone()),
        ("alpha2", alpha2.clone()),
        ("beta2", beta2.clone()),
    ] {
        plan.set(k, v);
    }
    plan.notes.push("tau0 includes the +1 term, so that beta1 = -s*sigma/p_* gives beta2 = 0".into());

    let first = ExponentExpr::plain(ExponentBase::P, alpha1.clone());
    let second = ExponentExpr::conjugate_of(ExponentBase::P, s.clone()).then_divided_by(alpha2.clone());
    plan.obligations = match opts.mode {
        LimitedMode::Weighted => {
            if beta2 != XRational::zero() {
                return Err(PlanError::Undefined(format!("weighted mode left beta2 = {beta2}")));
            }
            plan.notes.push(format!("dual condition 1 in A_{{{second}}} holds for p in LH"));
            vec![Obligation::class(first, sub(&alpha1, &beta1)?)]
        }
        LimitedMode::Unweighted => {
            vec![Obligation::maximal(first, XRational::zero()), Obligation::maximal(second, XRational::zero())]
        }
        LimitedMode::Beta1(_) => {
            vec![Obligation::class(first, sub(&alpha1, &beta1)?), Obligation::class(second, neg(&beta2)?)]
        }
    };

    // The two conditions coincide only if (p/α1)' = (p/s)'/α2, which pins p
    // to a single constant.
    if alpha2 != one {
        let merge = div(&sub(&mul(&s, &alpha2)?, &alpha1)?, &sub(&alpha2, &one)?)?;
        if *p_minus == merge && *p_plus == merge {
            plan.notes.push(format!("conditions merge: p is the constant {merge}"));
        } else {
            plan.notes.push(format!("conditions cannot merge: that would need p(·) = {merge} everywhere"));
        }
        plan.set("merge_p", merge);
    }
    plan.check()?;
    Ok(plan)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantReduction {
    pub p: XRational,
    pub q_minus: XRational,
    pub q_plus: XRational,
    pub tau_p: XRational,
    pub alpha1: XRational,
    pub beta1: XRational,
    /// `(s, β2)` from matching the first condition.
    pub route1: (XRational, XRational),
    /// `(s, β2)` from matching the dual condition.
    pub route2: (XRational, XRational),
    pub agree: bool,
    pub window: Interval,
    pub s_in_window: bool,
}

/// Recovers the constant-exponent limited-range theorem from the general
/// parameters, computing `(s, β2)` both ways.
pub fn plan_limited_constant_reduction(
    p: &XRational,
    q_minus: &XRational,
    q_plus: &XRational,
) -> Result<ConstantReduction> {
    let one = XRational::one();
    p.finite()?;
    require(q_minus.is_positive() && q_minus < p && p < q_plus, || {
        format!("0 < q_- < p < q_+ required, got q_- = {q_minus}, p = {p}, q_+ = {q_plus}")
    })?;
    let alpha2 = div(q_plus, p)?.conj()?;
    let tau_p = add(&mul(&alpha2, &sub(&div(p, q_minus)?, &one)?)?, &one)?;
    let p_tau = div(p, &tau_p)?;

    let alpha1 = p_tau.clone();
    let beta1 = mul(&p_tau, &sub(&one, &alpha2)?)?;
    let s1 = add(&mul(&p_tau, &sub(&one, &div(p, q_minus)?)?)?, p)?;
    let beta2_1 = sub(&mul(&s1, &alpha2)?, &mul(&beta1, &sub(&one, &tau_p)?)?)?;

    let s2 = div(p, &mul(&alpha2, &tau_p.conj()?)?.conj()?)?;
    let beta2_2 = mul(&p_tau, &alpha2)?;

    let lower = sub(p, &mul(p, &sub(&div(p, q_minus)?, &one)?)?)?.max(div(&mul(p, p)?, q_plus)?).max(XRational::zero());
    let window = Interval::open(lower, p.clone());
    let s_in_window = window.contains(&s1);
    Ok(ConstantReduction {
        p: p.clone(),
        q_minus: q_minus.clone(),
        q_plus: q_plus.clone(),
        tau_p,
        alpha1,
        beta1,
        agree: s1 == s2 && beta2_1 == beta2_2,
        route1: (s1, beta2_1),
        route2: (s2, beta2_2),
        window,
        s_in_window,
    })
}

/// Extrapolation from `A_1`: `p_- >= p0` and a single dual condition.
pub fn plan_a1(p0: &XRational, p_minus: &XRational) -> Result<ExtrapolationPlan> {
    p0.finite()?;
    require(p0.is_positive(), || format!("p0 > 0 required, got {p0}"))?;
    if p_minus < p0 {
        return Err(PlanError::OnlyGoesUp { p0: Box::new(p0.clone()), p_minus: Box::new(p_minus.clone()) });
    }
    let mut plan = ExtrapolationPlan::new(Scenario::A1);
    plan.set("p0", p0.clone());
    plan.set("alpha2", XRational::one());
    plan.set("beta2", p0.clone());
    plan.obligations = vec![Obligation::maximal(ExponentExpr::conjugate_of(ExponentBase::P, p0.clone()), neg(p0)?)];
    if *p0 < XRational::one() {
        plan.notes.push("p0 < 1: quasi-norm regime".into());
    }
    plan.check()?;
    Ok(plan)
}

/// Extrapolation from `A_∞` through `A_1` at level `s`.
pub fn plan_ainfty(p0: &XRational, s: &XRational, p_minus: &XRational) -> Result<ExtrapolationPlan> {
    p0.finite()?;
    s.finite()?;
    require(p0.is_positive() && s.is_positive(), || format!("p0 > 0 and s > 0 required, got p0 = {p0}, s = {s}"))?;
    require(s <= p_minus, || format!("s <= p_- required, got s = {s}, p_- = {p_minus}"))?;
    let mut plan = ExtrapolationPlan::new(Scenario::Ainfty);
    plan.window = Some(Interval { lower: XRational::zero(), upper: p_minus.clone(), upper_closed: true });
    plan.set("p0", p0.clone());
    plan.set("s", s.clone());
    plan.obligations = vec![
        Obligation::class(ExponentExpr::plain(ExponentBase::P, s.clone()), s.clone()),
        Obligation::maximal(ExponentExpr::conjugate_of(ExponentBase::P, s.clone()), neg(s)?),
    ];
    plan.notes.push(format!("A_inf hypothesis at p0 = {p0} gives it at s = {s}, then A_1 extrapolation at p0 = {s}"));
    plan.check()?;
    Ok(plan)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRange {
    pub delta: XRational,
    pub q_minus: XRational,
    pub q_plus: XRational,
    pub bridge: String,
}

/// `q_- = 2/(1+δ)`, `q_+ = 2/(1-δ)`.
pub fn plan_corollary_delta(delta: &XRational) -> Result<DeltaRange> {
    let one = XRational::one();
    require(delta.is_positive() && *delta != XRational::zero() && *delta <= one, || {
        format!("0 < delta <= 1 required, got {delta}")
    })?;
    let two = int(2);
    let q_minus = div(&two, &add(&one, delta)?)?;
    let q_plus = if *delta == one { XRational::Infinity } else { div(&two, &sub(&one, delta)?)? };
    let rh = div(&q_plus, &two)?.conj()?;
    let bridge = format!(
        "w0^({}) in A_2 iff w0 in A_{{2/q_-}} cap RH_{{(q_+/2)'}} = A_{{{}}} cap RH_{{{rh}}}",
        delta.recip()?,
        div(&two, &q_minus)?
    );
    Ok(DeltaRange { delta: delta.clone(), q_minus, q_plus, bridge })
}

/// Rough singular integrals: `(p(·)/r', w^{r'})` must be an M-pair.
pub fn plan_rough_sio(r: &XRational) -> Result<ExtrapolationPlan> {
    require(*r > XRational::one(), || format!("r > 1 required, got {r}"))?;
    let rp = r.conj()?;
    let mut plan = ExtrapolationPlan::new(Scenario::RoughSio);
    plan.set("r", r.clone());
    plan.set("r_prime", rp.clone());
    plan.obligations = Obligation::m_pair(ExponentBase::P, rp.clone(), rp.clone())?;
    plan.notes.push(format!("|T f|^{rp} is estimated in L^{{p(·)/{rp}}}; an M-pair there needs p_- > {rp}"));
    plan.check()?;
    Ok(plan)
}

/// Weighted limited-range plan for the Riesz transform of a divergence-form
/// operator: `q_-` replaced by `2n/(n+2)`, `p_* = 2`.
pub fn plan_riesz_divergence(
    n: u32,
    p_minus: &XRational,
    p_plus: &XRational,
    q_plus: &XRational,
) -> Result<ExtrapolationPlan> {
    require(n >= 3, || format!("n >= 3 required, got {n}"))?;
    let n = int(n as i64);
    let q_minus = div(&mul(&int(2), &n)?, &add(&n, &int(2))?)?;
    let opts = LimitedOptions { p_star: Some(int(2)), ..Default::default() };
    plan_limited(&q_minus, q_plus, p_minus, p_plus, &opts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphericalReport {
    pub n: u32,
    /// `n/(n-1)`; `p_-` must exceed it.
    pub p_lower: XRational,
    /// `(n-1)p_-`; `p_+` must stay below it.
    pub oscillation_bound: XRational,
    pub unweighted_feasible: bool,
    /// `σ` must exceed `(n-1)/(n-2)·p_-` in the weighted bound.
    pub sigma_threshold: XRational,
}

pub fn plan_spherical(n: u32, p_minus: &XRational, p_plus: &XRational) -> Result<SphericalReport> {
    require(n >= 3, || format!("n >= 3 required, got {n}"))?;
    require(p_minus <= p_plus, || format!("p_- <= p_+ required, got {p_minus}, {p_plus}"))?;
    let nn = int(n as i64);
    let n1 = sub(&nn, &int(1))?;
    let p_lower = div(&nn, &n1)?;
    let oscillation_bound = mul(&n1, p_minus)?;
    let sigma_threshold = mul(&div(&n1, &sub(&nn, &int(2))?)?, p_minus)?;
    Ok(SphericalReport {
        n,
        unweighted_feasible: *p_minus > p_lower && *p_plus < oscillation_bound,
        p_lower,
        oscillation_bound,
        sigma_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x(s: &str) -> XRational {
        s.parse().unwrap()
    }

    #[test]
    fn diagonal_defaults_are_the_m_pair() {
        let plan = plan_diagonal(&x("2"), &x("3/2"), &x("3"), None, None).unwrap();
        assert_eq!(plan.param("alpha1"), Some(&x("1")));
        assert_eq!(plan.param("beta2"), Some(&x("1")));
        assert_eq!(plan.param("gamma"), Some(&x("1/2")));
        assert_eq!(plan.obligations, Obligation::m_pair(ExponentBase::P, x("1"), x("1")).unwrap());
        let text: Vec<String> = plan.obligations.iter().map(|o| o.to_string()).collect();
        assert_eq!(text, ["M bounded on L^{p(·)}(w)", "M bounded on L^{p'(·)}(w^{-1})"]);
        assert_eq!(plan.window.unwrap(), Interval::open(x("1/2"), x("3/2")));
    }

    #[test]
    fn diagonal_errors() {
        assert_eq!(plan_diagonal(&x("1"), &x("2"), &x("3"), None, None).unwrap_err(), PlanError::UseA1);
        let err = plan_diagonal(&x("2"), &x("3/2"), &x("3"), Some(x("3/2")), None).unwrap_err();
        assert!(matches!(err, PlanError::InfeasibleS { .. }));
        assert!(err.to_string().contains("(1/2, 3/2)"));
    }

    #[test]
    fn offdiagonal_examples() {
        assert_eq!(offdiagonal_sigma(&x("2"), &x("4")).unwrap(), x("4/3"));
        let plan = plan_offdiagonal(&x("2"), &x("4"), &x("12/7"), &x("3"), None, None).unwrap();
        assert_eq!(plan.window.as_ref().unwrap(), &Interval::open(x("0"), x("3")));
        assert_eq!(plan.param("s"), Some(&x("4/3")));
        assert_eq!(plan.param("alpha1"), Some(&x("4/3")));
        assert_eq!(plan.obligations, Obligation::m_pair(ExponentBase::Q, x("4/3"), x("4/3")).unwrap());
        assert!(plan.notes.is_empty());

        let end = plan_offdiagonal(&x("1"), &x("3/2"), &x("1"), &x("3/2"), None, None).unwrap();
        assert_eq!(end.scenario, Scenario::OffDiagonalEndpoint);
        assert_eq!(end.obligations.len(), 1);
        assert_eq!(end.obligations[0].to_string(), "M bounded on L^{(q(·)/(3/2))'}(w^{-3/2})");
        assert_eq!(
            plan_offdiagonal(&x("2"), &x("2"), &x("2"), &x("2"), None, None).unwrap_err(),
            PlanError::UseDiagonal
        );
    }

    #[test]
    fn offdiagonal_flags_statement_alpha() {
        let plan = plan_offdiagonal(&x("2"), &x("4"), &x("12/7"), &x("3"), Some(x("1")), None).unwrap();
        assert_eq!(plan.param("alpha1"), Some(&x("3/2")));
        assert!(plan.notes[0].contains("differs"));
    }

    #[test]
    fn limited_example() {
        let plan = plan_limited(&x("6/5"), &x("6"), &x("2"), &x("3"), &LimitedOptions::default()).unwrap();
        assert_eq!(plan.window.as_ref().unwrap(), &Interval::open(x("1"), x("2")));
        for (k, v) in [("p_star", "2"), ("s", "3/2"), ("sigma", "3"), ("c", "1/4"), ("alpha1", "3/4")] {
            assert_eq!(plan.param(k), Some(&x(v)), "{k}");
        }
        for (k, v) in [("tau0", "2"), ("beta1", "-9/4"), ("beta2", "0"), ("merge_p", "3")] {
            assert_eq!(plan.param(k), Some(&x(v)), "{k}");
        }
        assert_eq!(plan.obligations.len(), 1);
        assert_eq!(plan.obligations[0].to_string(), "w^{3} in A_{p(·)/(3/4)}");
        assert!(plan.notes.iter().any(|n| n.contains("cannot merge")));
    }

    #[test]
    fn limited_errors_and_modes() {
        let err = plan_limited(&x("2"), &x("4"), &x("1"), &x("3"), &LimitedOptions::default()).unwrap_err();
        assert!(matches!(err, PlanError::OscillationTooLarge { .. }));
        let opts = LimitedOptions { p_star: Some(x("7")), ..Default::default() };
        let err = plan_limited(&x("6/5"), &x("6"), &x("2"), &x("3"), &opts).unwrap_err();
        assert!(matches!(err, PlanError::PStarOutOfRange { .. }));
        let opts = LimitedOptions { mode: LimitedMode::Unweighted, ..Default::default() };
        let plan = plan_limited(&x("6/5"), &x("6"), &x("2"), &x("3"), &opts).unwrap();
        assert!(plan
            .obligations
            .iter()
            .all(|o| o.weight_power == XRational::zero() && o.kind == ObligationKind::MaximalBounded));
        let inf = plan_limited(&x("1"), &XRational::Infinity, &x("2"), &x("3"), &LimitedOptions::default()).unwrap();
        assert_eq!(inf.param("alpha2"), Some(&x("1")));
        assert!(inf.param("merge_p").is_none());
    }

    #[test]
    fn riesz_and_spherical() {
        let plan = plan_riesz_divergence(3, &x("2"), &x("3"), &x("6")).unwrap();
        assert_eq!(plan.param("sigma"), Some(&x("3")));
        for n in 3..9 {
            let plan = plan_riesz_divergence(n, &x("2"), &x("5/2"), &x("6")).unwrap();
            assert_eq!(plan.param("sigma"), Some(&int(n as i64)));
        }
        let sph = plan_spherical(3, &x("2"), &x("7/2")).unwrap();
        assert!(sph.unweighted_feasible);
        assert_eq!(sph.oscillation_bound, x("4"));
        assert_eq!(sph.sigma_threshold, x("4"));
        assert!(!plan_spherical(3, &x("2"), &x("4")).unwrap().unweighted_feasible);
        assert!(!plan_spherical(3, &x("3/2"), &x("2")).unwrap().unweighted_feasible);
    }

    #[test]
    fn constant_reduction_example() {
        let r = plan_limited_constant_reduction(&x("2"), &x("4/3"), &x("4")).unwrap();
        assert!(r.agree);
        assert_eq!(r.route1, (x("3/2"), x("2")));
        assert!(r.s_in_window);
    }

    #[test]
    fn a1_and_ainfty() {
        let plan = plan_a1(&x("1"), &x("2")).unwrap();
        assert_eq!(plan.obligations[0].to_string(), "M bounded on L^{p'(·)}(w^{-1})");
        assert!(matches!(plan_a1(&x("2"), &x("3/2")).unwrap_err(), PlanError::OnlyGoesUp { .. }));
        let quasi = plan_a1(&x("1/2"), &x("1/2")).unwrap();
        assert_eq!(quasi.obligations[0].to_string(), "M bounded on L^{(2p(·))'}(w^{-1/2})");
        assert!(quasi.notes[0].contains("quasi"));

        let plan = plan_ainfty(&x("3"), &x("1/2"), &x("1")).unwrap();
        assert_eq!(plan.obligations[0].to_string(), "w^{1/2} in A_{2p(·)}");
        assert_eq!(plan.obligations[1].to_string(), "M bounded on L^{(2p(·))'}(w^{-1/2})");
        assert!(plan_ainfty(&x("3"), &x("1"), &x("1")).is_ok());
        assert!(plan_ainfty(&x("3"), &x("3/2"), &x("1")).is_err());
    }

    #[test]
    fn delta_ranges() {
        let d = plan_corollary_delta(&x("1/2")).unwrap();
        assert_eq!((d.q_minus, d.q_plus), (x("4/3"), x("4")));
        let d = plan_corollary_delta(&x("1/3")).unwrap();
        assert_eq!((d.q_minus, d.q_plus), (x("3/2"), x("3")));
        let d = plan_corollary_delta(&x("1")).unwrap();
        assert_eq!((d.q_minus, d.q_plus), (x("1"), XRational::Infinity));
        assert!(plan_corollary_delta(&x("0")).is_err());
        assert!(plan_corollary_delta(&x("3/2")).is_err());
    }

    #[test]
    fn rough_sio() {
        let plan = plan_rough_sio(&XRational::Infinity).unwrap();
        let diag = plan_diagonal(&x("2"), &x("2"), &x("3"), None, None).unwrap();
        assert_eq!(plan.obligations, diag.obligations);
        let plan = plan_rough_sio(&x("3/2")).unwrap();
        assert_eq!(plan.param("r_prime"), Some(&x("3")));
        assert_eq!(plan.obligations[0].to_string(), "M bounded on L^{p(·)/3}(w^{3})");
        assert!(plan_rough_sio(&x("1")).is_err());
    }

    #[test]
    fn plan_json_is_structured() {
        let plan = plan_limited(&x("6/5"), &x("6"), &x("2"), &x("3"), &LimitedOptions::default()).unwrap();
        let v: serde_json::Value = serde_json::to_value(&plan).unwrap();
        assert_eq!(v["scenario"], "limited");
        assert_eq!(v["parameters"][3]["name"], "sigma");
        assert_eq!(v["parameters"][3]["value"]["num"], "3");
        let back: ExtrapolationPlan = serde_json::from_value(v).unwrap();
        assert_eq!(back, plan);
    }

    fn rat(n: i64, d: i64) -> XRational {
        XRational::ratio(n, d).unwrap()
    }

    proptest! {
        #[test]
        fn unit_s_is_always_diagonal_feasible(a in 1i64..200, b in 1i64..200, d in 1i64..50) {
            let p0 = rat(a + d, d);
            let pm = rat(b + d, d);
            prop_assert!(plan_diagonal(&p0, &pm, &pm, None, None).is_ok());
        }

        #[test]
        fn offdiagonal_alpha_equals_sigma_at_default(a in 1i64..100, b in 1i64..100, d in 1i64..30) {
            let p0 = rat(a + d, d);
            let q0 = add(&p0, &rat(b, d)).unwrap();
            let sigma = offdiagonal_sigma(&p0, &q0).unwrap();
            let qm = q0.clone();
            let plan = plan_offdiagonal(&p0, &q0, &p0, &qm, None, None).unwrap();
            prop_assert_eq!(plan.param("alpha1"), Some(&sigma));
        }

        #[test]
        fn limited_weighted_identity(qm in 11i64..40, gap in 1i64..20, spread in 0i64..10, extra in 1i64..40) {
            let q_minus = rat(qm, 10);
            let p_minus = rat(qm + gap, 10);
            let p_plus = rat(qm + gap + spread, 10);
            let q_plus = rat((qm + gap + spread) * 4 + extra, 10);
            if let Ok(plan) = plan_limited(&q_minus, &q_plus, &p_minus, &p_plus, &LimitedOptions::default()) {
                let a = plan.param("alpha1").unwrap();
                let b = plan.param("beta1").unwrap();
                prop_assert_eq!(&sub(a, b).unwrap(), plan.param("sigma").unwrap());
                prop_assert_eq!(plan.param("beta2").unwrap(), &XRational::zero());
                prop_assert!(plan.check().is_ok());
            }
        }
    }
}
