//! Variable exponents `p(·)` on a box, their conjugates and rescalings, and
//! log-Hölder diagnostics.
//!
//! `f64::INFINITY` is a legitimate exponent value and marks the infinity
//! region. Values below 1 are allowed so that rescaled exponents `p/s` in the
//! quasi-norm range can be represented; [`ExponentFunction::is_banach`]
//! records whether `p_- >= 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid, Region};

/// Pointwise conjugate `t / (t - 1)` with `1 <-> inf`.
pub fn conj(t: f64) -> f64 {
    if t == 1.0 {
        f64::INFINITY
    } else if t.is_infinite() {
        1.0
    } else {
        t / (t - 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExponentFamily {
    Constant {
        value: f64,
    },
    /// `intercept + slope . x`; missing slope entries are zero.
    Affine {
        intercept: f64,
        slope: Vec<f64>,
    },
    /// `base + amplitude * sin(frequency * (x_1 + ... + x_n))`.
    Sinusoid {
        base: f64,
        amplitude: f64,
        frequency: f64,
    },
    /// `p_inf + c_inf / ln(e + |x|)`.
    LogHolder {
        p_inf: f64,
        c_inf: f64,
    },
    /// `left` for `x_1 < at`, `right` otherwise. Either side may be infinite.
    Step {
        left: f64,
        right: f64,
        at: f64,
    },
    Conjugate {
        of: Box<ExponentFamily>,
    },
    Scaled {
        of: Box<ExponentFamily>,
        factor: f64,
    },
}

impl ExponentFamily {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ExponentFamily::Constant { value } => *value,
            ExponentFamily::Affine { intercept, slope } => {
                intercept + slope.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            }
            ExponentFamily::Sinusoid { base, amplitude, frequency } => {
                base + amplitude * (frequency * x.iter().sum::<f64>()).sin()
            }
            ExponentFamily::LogHolder { p_inf, c_inf } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                p_inf + c_inf / (std::f64::consts::E + r).ln()
            }
            ExponentFamily::Step { left, right, at } => {
                if x[0] < *at {
                    *left
                } else {
                    *right
                }
            }
            ExponentFamily::Conjugate { of } => conj(of.eval(x)),
            ExponentFamily::Scaled { of, factor } => of.eval(x) * factor,
        }
    }

    /// Short tag used in reports.
    pub fn tag(&self) -> &'static str {
        match self {
            ExponentFamily::Constant { .. } => "constant",
            ExponentFamily::Affine { .. } => "affine",
            ExponentFamily::Sinusoid { .. } => "smooth-sample",
            ExponentFamily::LogHolder { .. } => "log-holder-model",
            ExponentFamily::Step { .. } => "step",
            ExponentFamily::Conjugate { .. } => "conjugate",
            ExponentFamily::Scaled { .. } => "scaled",
        }
    }

    fn conjugated(&self) -> Self {
        match self {
            ExponentFamily::Conjugate { of } => (**of).clone(),
            ExponentFamily::Constant { value } => ExponentFamily::Constant { value: conj(*value) },
            other => ExponentFamily::Conjugate { of: Box::new(other.clone()) },
        }
    }

    fn scaled(&self, factor: f64) -> Self {
        match self {
            ExponentFamily::Constant { value } => ExponentFamily::Constant { value: value * factor },
            ExponentFamily::Scaled { of, factor: f0 } => {
                let f = f0 * factor;
                if (f - 1.0).abs() <= 4.0 * f64::EPSILON {
                    (**of).clone()
                } else {
                    ExponentFamily::Scaled { of: of.clone(), factor: f }
                }
            }
            other => ExponentFamily::Scaled { of: Box::new(other.clone()), factor },
        }
    }
}

/// Pointwise rescalings used throughout the extrapolation arguments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Transform {
    /// `p / s`
    DivideBy(f64),
    /// `(p / s)'`
    ConjugateOfQuotient(f64),
    /// `r p`
    MultiplyBy(f64),
}

/// An exponent on a box with its cached essential range.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentFunction {
    family: ExponentFamily,
    domain: Region,
    p_minus: f64,
    p_plus: f64,
}

const SAMPLES_1D: usize = 4097;
const SAMPLES_2D: usize = 257;

fn sample_grid(region: &Region) -> Result<Grid> {
    let n = if region.lower.len() == 1 { SAMPLES_1D } else { SAMPLES_2D };
    Grid::new(region.lower.len(), &region.lower, &region.upper, n).map_err(|e| Error::DegenerateRegion(e.to_string()))
}

impl ExponentFunction {
    pub fn new(family: ExponentFamily, domain: Region) -> Result<Self> {
        let grid = sample_grid(&domain).map_err(|e| Error::InvalidExponent(e.to_string()))?;
        let (p_minus, p_plus) = range_on(&family, &grid)?;
        Ok(Self { family, domain, p_minus, p_plus })
    }

    pub fn constant(value: f64, domain: Region) -> Result<Self> {
        Self::new(ExponentFamily::Constant { value }, domain)
    }

    pub fn family(&self) -> &ExponentFamily {
        &self.family
    }

    pub fn domain(&self) -> &Region {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.lower.len()
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    /// `p_- >= 1`, i.e. the Luxemburg functional is a norm.
    pub fn is_banach(&self) -> bool {
        self.p_minus >= 1.0
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self.family {
            ExponentFamily::Constant { value } => Some(value),
            _ if self.p_minus == self.p_plus => Some(self.p_minus),
            _ => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.family.eval(x)
    }

    pub fn in_infinity_region(&self, x: &[f64]) -> bool {
        self.eval(x).is_infinite()
    }

    /// Exponent values at every node of `grid`.
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        if grid.dim() != self.dim() {
            return Err(Error::GridMismatch(format!("{}-D exponent on {}-D grid", self.dim(), grid.dim())));
        }
        let d = grid.dim();
        Ok((0..grid.len()).map(|i| self.eval(&grid.point(i)[..d])).collect())
    }

    pub fn conjugate(&self) -> Result<Self> {
        if self.p_minus < 1.0 {
            return Err(Error::InvalidExponent(format!("conjugate needs p >= 1, but p_- = {}", self.p_minus)));
        }
        Self::new(self.family.conjugated(), self.domain.clone())
    }

    pub fn transform(&self, t: Transform) -> Result<Self> {
        match t {
            Transform::DivideBy(s) | Transform::ConjugateOfQuotient(s) | Transform::MultiplyBy(s)
                if !(s > 0.0 && s.is_finite()) =>
            {
                Err(Error::InvalidScale(s))
            }
            Transform::DivideBy(s) => Self::new(self.family.scaled(1.0 / s), self.domain.clone()),
            Transform::MultiplyBy(r) => Self::new(self.family.scaled(r), self.domain.clone()),
            Transform::ConjugateOfQuotient(s) => {
                Self::new(self.family.scaled(1.0 / s), self.domain.clone())?.conjugate()
            }
        }
    }

    /// Minimum and maximum of `p` over the samples of `region`.
    pub fn essential_range(&self, region: &Region) -> Result<(f64, f64)> {
        let clipped = clip(region, &self.domain).ok_or_else(|| {
            Error::DegenerateRegion(format!(
                "{:?}..{:?} misses the domain {:?}..{:?}",
                region.lower, region.upper, self.domain.lower, self.domain.upper
            ))
        })?;
        range_on(&self.family, &sample_grid(&clipped)?)
    }

    /// Log-Hölder estimates on the default sampling grid.
    pub fn lh_constants(&self) -> LhEstimate {
        let n = if self.dim() == 1 { 1025 } else { 33 };
        let grid =
            Grid::new(self.dim(), &self.domain.lower, &self.domain.upper, n).expect("domain validated at construction");
        self.lh_constants_on(&grid)
    }

    /// Log-Hölder estimates from the nodes of `grid`; infinite values are
    /// left out.
    pub fn lh_constants_on(&self, grid: &Grid) -> LhEstimate {
        let d = grid.dim();
        let nodes: Vec<([f64; 2], f64)> = (0..grid.len())
            .map(|i| {
                let x = grid.point(i);
                (x, self.eval(&x[..d]))
            })
            .filter(|(_, v)| v.is_finite())
            .collect();
        if nodes.is_empty() {
            return LhEstimate { c0: 0.0, c_inf: 0.0, p_inf: f64::INFINITY, is_lh: false };
        }
        let rows = crate::par::map_range(nodes.len(), |i| {
            let (x, px) = nodes[i];
            let mut best: f64 = 0.0;
            for &(y, py) in &nodes[i + 1..] {
                let dist = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
                if dist > 0.0 && dist < 0.5 {
                    best = best.max((px - py).abs() * -dist.ln());
                }
            }
            best
        });
        let c0 = rows.into_iter().fold(0.0, f64::max);
        let norm = |x: &[f64; 2]| (x[0] * x[0] + x[1] * x[1]).sqrt();
        let mut far = 0;
        for (i, (x, _)) in nodes.iter().enumerate() {
            if norm(x) > norm(&nodes[far].0) {
                far = i;
            }
        }
        let p_inf = nodes[far].1;
        let c_inf =
            nodes.iter().map(|(x, v)| (v - p_inf).abs() * (std::f64::consts::E + norm(x)).ln()).fold(0.0, f64::max);
        LhEstimate { c0, c_inf, p_inf, is_lh: c0.is_finite() && c_inf.is_finite() }
    }

    /// `C_0` estimates at resolutions `N`, `2N-1`, `4N-3` and a divergence
    /// verdict. Nested refinements keep every earlier pair, so the sequence
    /// never decreases; it is called diverging when the increments stay
    /// comparable instead of dying out.
    pub fn lh_refinement(&self, resolution: usize) -> Result<LhRefinement> {
        let g0 = Grid::new(self.dim(), &self.domain.lower, &self.domain.upper, resolution)?;
        let g1 = g0.refined();
        let g2 = g1.refined();
        let c0 = [self.lh_constants_on(&g0).c0, self.lh_constants_on(&g1).c0, self.lh_constants_on(&g2).c0];
        let d1 = c0[1] - c0[0];
        let d2 = c0[2] - c0[1];
        let diverging = d1 > 0.0 && d2 >= LH_INCREMENT_RATIO * d1 && d2 > LH_MIN_GROWTH * c0[2];
        Ok(LhRefinement { resolutions: [g0.resolution(), g1.resolution(), g2.resolution()], c0, diverging })
    }
}

const LH_INCREMENT_RATIO: f64 = 0.75;
const LH_MIN_GROWTH: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LhEstimate {
    pub c0: f64,
    pub c_inf: f64,
    /// Value at the sample farthest from the origin; a proxy on a box.
    pub p_inf: f64,
    pub is_lh: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LhRefinement {
    pub resolutions: [usize; 3],
    pub c0: [f64; 3],
    pub diverging: bool,
}

fn clip(region: &Region, domain: &Region) -> Option<Region> {
    if region.lower.len() != domain.lower.len() || region.upper.len() != domain.lower.len() {
        return None;
    }
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for a in 0..domain.lower.len() {
        let lo = region.lower[a].max(domain.lower[a]);
        let hi = region.upper[a].min(domain.upper[a]);
        if !(lo < hi) {
            return None;
        }
        lower.push(lo);
        upper.push(hi);
    }
    Some(Region { lower, upper })
}

fn range_on(family: &ExponentFamily, grid: &Grid) -> Result<(f64, f64)> {
    let d = grid.dim();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..grid.len() {
        let x = grid.point(i);
        let v = family.eval(&x[..d]);
        if !(v > 0.0) {
            return Err(Error::InvalidExponent(format!("{} exponent takes value {v} at {:?}", family.tag(), &x[..d])));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> Region {
        Region::interval(0.0, 1.0)
    }

    fn two_plus_x() -> ExponentFunction {
        ExponentFunction::new(ExponentFamily::Affine { intercept: 2.0, slope: vec![1.0] }, unit()).unwrap()
    }

    #[test]
    fn conjugate_examples() {
        let p2 = ExponentFunction::constant(2.0, unit()).unwrap().conjugate().unwrap();
        assert_eq!(p2.eval(&[0.3]), 2.0);
        let p1 = ExponentFunction::constant(1.0, unit()).unwrap().conjugate().unwrap();
        assert!(p1.eval(&[0.3]).is_infinite());
        assert!(p1.in_infinity_region(&[0.7]));
        let q = two_plus_x().conjugate().unwrap();
        assert!((q.eval(&[0.5]) - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn essential_range_examples() {
        let p3 = ExponentFunction::constant(3.0, unit()).unwrap();
        assert_eq!(p3.essential_range(&Region::interval(0.2, 0.4)).unwrap(), (3.0, 3.0));
        let p = two_plus_x();
        assert_eq!(p.essential_range(&unit()).unwrap(), (2.0, 3.0));
        let (lo, hi) = p.essential_range(&Region::interval(0.25, 0.5)).unwrap();
        assert!((lo - 2.25).abs() < 1e-15 && (hi - 2.5).abs() < 1e-15);
        assert!(matches!(p.essential_range(&Region::interval(2.0, 3.0)), Err(Error::DegenerateRegion(_))));
    }

    #[test]
    fn conjugate_range_is_swapped_conjugates() {
        let p = two_plus_x();
        let q = p.conjugate().unwrap();
        assert_eq!(q.p_minus(), conj(p.p_plus()));
        assert_eq!(q.p_plus(), conj(p.p_minus()));
    }

    #[test]
    fn transform_examples() {
        let p4 = ExponentFunction::constant(4.0, unit()).unwrap();
        assert_eq!(p4.transform(Transform::DivideBy(2.0)).unwrap().eval(&[0.1]), 2.0);
        let p3 = ExponentFunction::constant(3.0, unit()).unwrap();
        assert_eq!(p3.transform(Transform::ConjugateOfQuotient(1.0)).unwrap().eval(&[0.1]), 1.5);
        let p = two_plus_x().transform(Transform::DivideBy(0.5)).unwrap();
        assert!((p.eval(&[0.3]) - 4.6).abs() < 1e-15);
        assert_eq!(p.transform(Transform::MultiplyBy(0.0)).unwrap_err(), Error::InvalidScale(0.0));
        assert_eq!(p.transform(Transform::DivideBy(-1.0)).unwrap_err(), Error::InvalidScale(-1.0));
    }

    #[test]
    fn quotient_below_one_is_flagged() {
        let p = two_plus_x().transform(Transform::DivideBy(4.0)).unwrap();
        assert!(!p.is_banach());
        assert!(p.conjugate().is_err());
    }

    #[test]
    fn lh_constant_exponent() {
        let lh = ExponentFunction::constant(2.0, unit()).unwrap().lh_constants();
        assert_eq!((lh.c0, lh.c_inf), (0.0, 0.0));
        assert!(lh.is_lh);
    }

    #[test]
    fn lh_smooth_is_bounded_and_step_diverges() {
        let smooth = ExponentFunction::new(
            ExponentFamily::Sinusoid { base: 2.0, amplitude: 0.25, frequency: 1.0 },
            Region::interval(-2.0, 2.0),
        )
        .unwrap();
        let lh = smooth.lh_constants();
        assert!(lh.is_lh && lh.c0.is_finite() && lh.c0 < 1.0);
        assert!(!smooth.lh_refinement(129).unwrap().diverging);

        let step =
            ExponentFunction::new(ExponentFamily::Step { left: 2.0, right: 3.0, at: 0.0 }, Region::interval(-1.0, 1.0))
                .unwrap();
        let r = step.lh_refinement(129).unwrap();
        assert!(r.c0[0] < r.c0[1] && r.c0[1] < r.c0[2], "{r:?}");
        assert!(r.diverging);
    }

    #[test]
    fn lh_passes_to_conjugate() {
        let p =
            ExponentFunction::new(ExponentFamily::LogHolder { p_inf: 2.0, c_inf: 1.0 }, Region::interval(-3.0, 3.0))
                .unwrap();
        let q = p.conjugate().unwrap();
        assert!(p.lh_constants().is_lh && q.lh_constants().is_lh);
        assert!(!q.lh_refinement(65).unwrap().diverging);
    }

    #[test]
    fn infinity_region_step() {
        let p = ExponentFunction::new(
            ExponentFamily::Step { left: 2.0, right: f64::INFINITY, at: 1.0 },
            Region::interval(0.0, 2.0),
        )
        .unwrap();
        assert!(p.p_plus().is_infinite());
        assert!(p.in_infinity_region(&[1.5]) && !p.in_infinity_region(&[0.5]));
    }

    #[test]
    fn rejects_nonpositive_values() {
        let bad = ExponentFunction::new(ExponentFamily::Affine { intercept: -1.0, slope: vec![1.0] }, unit());
        assert!(matches!(bad, Err(Error::InvalidExponent(_))));
    }

    #[test]
    fn serde_roundtrip() {
        let fam = ExponentFamily::Affine { intercept: 2.0, slope: vec![0.25] };
        let text = serde_json::to_string(&fam).unwrap();
        assert_eq!(text, r#"{"family":"affine","intercept":2.0,"slope":[0.25]}"#);
        assert_eq!(serde_json::from_str::<ExponentFamily>(&text).unwrap(), fam);
    }

    proptest! {
        #[test]
        fn conjugate_is_involution(base in 1.2f64..5.0, amp in 0.0f64..0.19, x in 0.0f64..1.0) {
            let p = ExponentFunction::new(
                ExponentFamily::Sinusoid { base, amplitude: amp, frequency: 3.0 },
                unit(),
            ).unwrap();
            let pp = p.conjugate().unwrap().conjugate().unwrap();
            prop_assert_eq!(pp.eval(&[x]), p.eval(&[x]));
            let direct = conj(conj(p.eval(&[x])));
            prop_assert!((direct - p.eval(&[x])).abs() <= 1e-12 * p.eval(&[x]));
        }

        #[test]
        fn dividing_round_trips(s in 0.1f64..10.0, x in 0.0f64..1.0) {
            let p = two_plus_x();
            let back = p.transform(Transform::DivideBy(s)).unwrap().transform(Transform::DivideBy(1.0 / s)).unwrap();
            prop_assert!((back.eval(&[x]) - p.eval(&[x])).abs() < 1e-13);
        }

        #[test]
        fn range_is_monotone_in_region(a in 0.0f64..0.4, b in 0.6f64..1.0, da in 0.0f64..0.1, db in 0.0f64..0.1) {
            let p = ExponentFunction::new(
                ExponentFamily::Sinusoid { base: 3.0, amplitude: 1.0, frequency: 7.0 },
                unit(),
            ).unwrap();
            let (lo_in, hi_in) = p.essential_range(&Region::interval(a + da, b - db)).unwrap();
            let (lo_out, hi_out) = p.essential_range(&Region::interval(a, b)).unwrap();
            prop_assert!(lo_out <= lo_in + 1e-5 && hi_out >= hi_in - 1e-5);
        }
    }
}
