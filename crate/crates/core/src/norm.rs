//! The modular, the Luxemburg norm and weighted norms on grids.
//!
//! For an exponent with an infinity region the norm is the least `λ > 0` with
//!
//! ```text
//! ∫_{p<∞} |f/λ|^{p(x)} dx + sup_{p=∞} |f|/λ <= 1
//! ```
//!
//! The map `λ ↦ φ(λ)` on the left is continuous and strictly decreasing
//! wherever it is finite and positive, so bisection on `λ` is certified.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponent::ExponentFunction;
use crate::field::{GridFunction, SignMode};
use crate::weights::Weight;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormOptions {
    /// Relative bracket width at which bisection stops.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iterations: 200 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormResult {
    pub value: f64,
    pub bisection_iterations: usize,
    pub bracket_width: f64,
    pub modular_at_value: f64,
}

impl NormResult {
    const ZERO: NormResult =
        NormResult { value: 0.0, bisection_iterations: 0, bracket_width: 0.0, modular_at_value: 0.0 };
}

/// Node data for `φ(λ)`, with `ln|f|` precomputed and zero nodes dropped.
#[derive(Clone, Debug, Default)]
pub(crate) struct Modular {
    weight: Vec<f64>,
    exponent: Vec<f64>,
    log_value: Vec<f64>,
    sup_on_infinity: f64,
    max_value: f64,
    measure: f64,
}

impl Modular {
    /// Collects the nodes yielded by `nodes`; `values` are taken in absolute value.
    pub(crate) fn new(
        values: &[f64],
        exponents: &[f64],
        weights: &[f64],
        nodes: impl IntoIterator<Item = usize>,
    ) -> Self {
        let mut m = Modular::default();
        for i in nodes {
            m.measure += weights[i];
            let v = values[i].abs();
            if v == 0.0 {
                continue;
            }
            m.max_value = m.max_value.max(v);
            if exponents[i].is_infinite() {
                m.sup_on_infinity = m.sup_on_infinity.max(v);
            } else {
                m.weight.push(weights[i]);
                m.exponent.push(exponents[i]);
                m.log_value.push(v.ln());
            }
        }
        m
    }

    /// `φ(λ)`; `+∞` when a term overflows.
    pub(crate) fn phi(&self, lambda: f64) -> f64 {
        let l = lambda.ln();
        let mut total = 0.0;
        for k in 0..self.weight.len() {
            total += self.weight[k] * (self.exponent[k] * (self.log_value[k] - l)).exp();
        }
        total + self.sup_on_infinity / lambda
    }

    pub(crate) fn solve(&self, opts: &NormOptions) -> Result<NormResult> {
        if self.max_value == 0.0 {
            return Ok(NormResult::ZERO);
        }
        // Bracket by doubling/halving from a scale-aware start.
        let mut hi = self.max_value * (1.0 + self.measure);
        let mut guard = 0;
        while self.phi(hi) > 1.0 {
            hi *= 2.0;
            guard += 1;
            if guard > 2100 || !hi.is_finite() {
                return Err(Error::NoConvergence { iterations: guard, lo: hi / 2.0, hi });
            }
        }
        let mut lo = hi / 2.0;
        while self.phi(lo) <= 1.0 {
            hi = lo;
            lo /= 2.0;
            guard += 1;
            if guard > 2100 || lo == 0.0 {
                return Err(Error::NoConvergence { iterations: guard, lo, hi });
            }
        }
        let mut iterations = 0;
        while hi - lo > opts.tolerance * hi {
            if iterations == opts.max_iterations {
                return Err(Error::NoConvergence { iterations, lo, hi });
            }
            let mid = 0.5 * (lo + hi);
            if self.phi(mid) <= 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            iterations += 1;
        }
        let value = 0.5 * (lo + hi);
        Ok(NormResult {
            value,
            bisection_iterations: iterations,
            bracket_width: hi - lo,
            modular_at_value: self.phi(value),
        })
    }
}

fn nonneg_values(f: &GridFunction) -> Vec<f64> {
    match f.sign() {
        SignMode::Nonnegative => f.values().to_vec(),
        SignMode::Signed => f.values().iter().map(|v| v.abs()).collect(),
    }
}

fn whole(f: &GridFunction, p: &ExponentFunction) -> Result<Modular> {
    let exps = p.sample(f.grid())?;
    let weights = f.grid().quadrature_weights();
    Ok(Modular::new(&nonneg_values(f), &exps, &weights, 0..f.len()))
}

/// `∫ |f|^{p(x)}` over the finite-exponent region. Returns `+∞` on overflow.
pub fn modular(f: &GridFunction, p: &ExponentFunction) -> Result<f64> {
    let m = whole(f, p)?;
    Ok(m.phi(1.0) - m.sup_on_infinity)
}

pub fn luxemburg_norm(f: &GridFunction, p: &ExponentFunction) -> Result<NormResult> {
    luxemburg_norm_with(f, p, &NormOptions::default())
}

pub fn luxemburg_norm_with(f: &GridFunction, p: &ExponentFunction, opts: &NormOptions) -> Result<NormResult> {
    whole(f, p)?.solve(opts)
}

/// `‖f w‖_{p(·)}`.
pub fn weighted_norm(f: &GridFunction, w: &Weight, p: &ExponentFunction) -> Result<NormResult> {
    weighted_norm_with(f, w, p, &NormOptions::default())
}

pub fn weighted_norm_with(
    f: &GridFunction,
    w: &Weight,
    p: &ExponentFunction,
    opts: &NormOptions,
) -> Result<NormResult> {
    let wv = w.rasterize(f.grid())?;
    luxemburg_norm_with(&f.abs().product(&wv)?, p, opts)
}

/// Hölder budget: 1 (plus rounding slack) for constant exponents, 4 otherwise.
pub fn holder_budget(p: &ExponentFunction) -> f64 {
    if p.constant_value().is_some() {
        1.0 + 1e-9
    } else {
        4.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DualPairing {
    pub pairing: f64,
    pub norm_f: f64,
    pub norm_h: f64,
    pub budget: f64,
    pub bound: f64,
    /// `pairing / bound`; at most 1 when Hölder holds with the budget.
    pub ratio: f64,
}

/// Compares `∫ f h` with `K ‖f‖_{p} ‖h‖_{p'}`.
pub fn dual_pairing_bound(f: &GridFunction, h: &GridFunction, p: &ExponentFunction) -> Result<DualPairing> {
    if f.sign() != SignMode::Nonnegative || h.sign() != SignMode::Nonnegative {
        return Err(Error::InvalidFunction("dual pairing needs nonnegative inputs".into()));
    }
    let pairing = f.product(h)?.integrate();
    let norm_f = luxemburg_norm(f, p)?.value;
    let norm_h = luxemburg_norm(h, &p.conjugate()?)?.value;
    let budget = holder_budget(p);
    let bound = budget * norm_f * norm_h;
    let ratio = if bound > 0.0 { pairing / bound } else { 0.0 };
    Ok(DualPairing { pairing, norm_f, norm_h, budget, bound, ratio })
}

/// The candidate `h = (|f|/‖f‖)^{p(x)-1}` normalized in `L^{p'}`, together
/// with the achieved constant `∫ f h / ‖f‖_{p}`.
pub fn duality_witness(f: &GridFunction, p: &ExponentFunction) -> Result<(GridFunction, f64)> {
    let norm = luxemburg_norm(f, p)?.value;
    if norm == 0.0 {
        return Err(Error::InvalidFunction("duality witness of the zero function".into()));
    }
    let exps = p.sample(f.grid())?;
    let raw: Vec<f64> = f
        .values()
        .iter()
        .zip(&exps)
        .map(|(v, q)| {
            let t = v.abs() / norm;
            if t == 0.0 {
                0.0
            } else if q.is_infinite() {
                1.0
            } else {
                t.powf(q - 1.0)
            }
        })
        .collect();
    let h = GridFunction::new(*f.grid(), raw, SignMode::Nonnegative)?;
    let hn = luxemburg_norm(&h, &p.conjugate()?)?.value;
    let h = h.scale(1.0 / hn);
    let achieved = f.abs().product(&h)?.integrate() / norm;
    Ok((h, achieved))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::ExponentFamily;
    use crate::field::{Grid, Region};
    use proptest::prelude::*;

    fn line(lo: f64, hi: f64, n: usize) -> Grid {
        Grid::line(lo, hi, n).unwrap()
    }

    fn konst(p: f64, lo: f64, hi: f64) -> ExponentFunction {
        ExponentFunction::constant(p, Region::interval(lo, hi)).unwrap()
    }

    fn from_fn(g: Grid, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction::from_fn(g, SignMode::Nonnegative, |x| f(x[0])).unwrap()
    }

    #[test]
    fn modular_examples() {
        let g = line(0.0, 1.0, 2001);
        assert!((modular(&from_fn(g, |_| 1.0), &konst(2.0, 0.0, 1.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!((modular(&from_fn(g, |_| 2.0), &konst(3.0, 0.0, 1.0)).unwrap() - 8.0).abs() < 1e-12);
        let p = ExponentFunction::new(
            ExponentFamily::Affine { intercept: 2.0, slope: vec![1.0] },
            Region::interval(0.0, 1.0),
        )
        .unwrap();
        let exact = 4.0 / std::f64::consts::LN_2;
        // trapezoid error <= h^2/12 * max (2^{2+x})'' = 8 ln(2)^2 h^2 / 12
        assert!((modular(&from_fn(g, |_| 2.0), &p).unwrap() - exact).abs() < 1e-6);
    }

    #[test]
    fn modular_overflow_is_infinite() {
        let g = line(0.0, 1.0, 11);
        let f = from_fn(g, |_| 1e10);
        assert_eq!(modular(&f, &konst(1e6, 0.0, 1.0)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn norm_examples() {
        let g = line(0.0, 1.0, 10_001);
        let one = luxemburg_norm(&from_fn(g, |_| 1.0), &konst(2.0, 0.0, 1.0)).unwrap();
        assert!((one.value - 1.0).abs() < 1e-9);
        assert!(one.bracket_width <= 1e-10 * one.value * 1.01);
        let x = luxemburg_norm(&from_fn(g, |x| x), &konst(2.0, 0.0, 1.0)).unwrap();
        assert!((x.value - 1.0 / 3f64.sqrt()).abs() < 1e-6);
        let g2 = line(0.0, 2.0, 10_001);
        let r = luxemburg_norm(&from_fn(g2, |_| 1.0), &konst(2.0, 0.0, 2.0)).unwrap();
        assert!((r.value - 2f64.sqrt()).abs() < 1e-8);
        assert!((r.modular_at_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_function_has_zero_norm() {
        let g = line(0.0, 1.0, 9);
        let r = luxemburg_norm(&GridFunction::zeros(g), &konst(3.0, 0.0, 1.0)).unwrap();
        assert_eq!(r, NormResult::ZERO);
    }

    #[test]
    fn infinity_region_against_scan() {
        // p = 2 on [0,1), ∞ on [1,2]; f ≡ 1.
        let g = line(0.0, 2.0, 2001);
        let p = ExponentFunction::new(
            ExponentFamily::Step { left: 2.0, right: f64::INFINITY, at: 1.0 },
            Region::interval(0.0, 2.0),
        )
        .unwrap();
        let f = from_fn(g, |_| 1.0);
        let got = luxemburg_norm(&f, &p).unwrap().value;
        // Oracle: mass of the finite part is m, constraint m/λ² + 1/λ <= 1.
        let m: f64 =
            g.quadrature_weights().iter().enumerate().filter(|(i, _)| g.coord(0, *i) < 1.0).map(|(_, w)| w).sum();
        let mut lam = 1.0;
        let mut step = 1.0;
        for _ in 0..60 {
            while m / (lam * lam) + 1.0 / lam > 1.0 {
                lam += step;
            }
            lam -= step;
            step /= 10.0;
            if step < 1e-13 {
                break;
            }
        }
        assert!((got - lam).abs() < 1e-8 * lam, "{got} vs {lam}");
    }

    #[test]
    fn weighted_norm_examples() {
        let g = line(0.0, 1.0, 10_001);
        let p = konst(2.0, 0.0, 1.0);
        let f = from_fn(g, |x| 0.3 + x);
        let a = weighted_norm(&f, &Weight::unit(), &p).unwrap().value;
        assert!((a - luxemburg_norm(&f, &p).unwrap().value).abs() < 1e-15);
        let w = Weight::from_grid(from_fn(g, |x| x.max(1e-300))).unwrap();
        let got = weighted_norm(&from_fn(g, |_| 1.0), &w, &p).unwrap().value;
        assert!((got - 1.0 / 3f64.sqrt()).abs() < 1e-6);
        let twice = weighted_norm(&f.scale(2.0), &w, &p).unwrap().value;
        let once = weighted_norm(&f, &w, &p).unwrap().value;
        assert!((twice - 2.0 * once).abs() < 1e-9 * once);
    }

    #[test]
    fn dual_pairing_examples() {
        let g = line(0.0, 1.0, 10_001);
        let p = konst(2.0, 0.0, 1.0);
        let one = from_fn(g, |_| 1.0);
        let d = dual_pairing_bound(&one, &one, &p).unwrap();
        assert!((d.pairing - 1.0).abs() < 1e-12 && d.ratio <= 1.0);
        let d = dual_pairing_bound(&from_fn(g, |x| x), &from_fn(g, |x| 1.0 - x), &p).unwrap();
        assert!((d.pairing - 1.0 / 6.0).abs() < 1e-8);
        assert!((d.norm_f * d.norm_h - 1.0 / 3.0).abs() < 1e-6);
        assert!((d.pairing / (d.norm_f * d.norm_h) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn duality_witness_attains_near_one() {
        let g = line(0.0, 1.0, 2001);
        let p = ExponentFunction::new(
            ExponentFamily::Affine { intercept: 1.5, slope: vec![2.0] },
            Region::interval(0.0, 1.0),
        )
        .unwrap();
        let (h, achieved) = duality_witness(&from_fn(g, |x| 1.0 + x * x), &p).unwrap();
        assert!(h.min_value() >= 0.0);
        assert!(achieved > 0.5 && achieved <= 4.0, "{achieved}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn homogeneity_and_triangle(
            a in proptest::collection::vec(0.0f64..5.0, 65),
            b in proptest::collection::vec(0.0f64..5.0, 65),
            c in 0.01f64..100.0,
            base in 1.0f64..4.0,
            slope in 0.0f64..3.0,
        ) {
            let g = line(0.0, 1.0, 65);
            let p = ExponentFunction::new(ExponentFamily::Affine { intercept: base, slope: vec![slope] }, Region::interval(0.0, 1.0)).unwrap();
            let f = GridFunction::new(g, a.clone(), SignMode::Nonnegative).unwrap();
            let h = GridFunction::new(g, b.clone(), SignMode::Nonnegative).unwrap();
            let nf = luxemburg_norm(&f, &p).unwrap().value;
            let nh = luxemburg_norm(&h, &p).unwrap().value;
            let ns = luxemburg_norm(&f.zip_with(&h, SignMode::Nonnegative, |x, y| x + y).unwrap(), &p).unwrap().value;
            let nc = luxemburg_norm(&f.scale(c), &p).unwrap().value;
            prop_assert!((nc - c * nf).abs() <= 1e-9 * c * nf.max(1e-300));
            prop_assert!(ns <= (nf + nh) * (1.0 + 1e-9));
        }

        #[test]
        fn quasi_norm_homogeneity(
            a in proptest::collection::vec(0.0f64..5.0, 33),
            c in 0.01f64..100.0,
        ) {
            let g = line(0.0, 1.0, 33);
            let p = ExponentFunction::new(ExponentFamily::Affine { intercept: 0.5, slope: vec![0.4] }, Region::interval(0.0, 1.0)).unwrap();
            prop_assert!(!p.is_banach());
            let f = GridFunction::new(g, a, SignMode::Nonnegative).unwrap();
            let nf = luxemburg_norm(&f, &p).unwrap().value;
            let nc = luxemburg_norm(&f.scale(c), &p).unwrap().value;
            prop_assert!((nc - c * nf).abs() <= 1e-9 * c * nf.max(1e-300));
        }
    }
}
