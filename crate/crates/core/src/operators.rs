//! Discrete maximal operators, the Riesz potential, the sharp maximal
//! function and a truncated Hilbert transform.
//!
//! Maximal operators are uncentered: the value at a node is the largest ball
//! quantity over family balls containing it. The cell ball of each node (the
//! node alone) is always part of the supremum, so `Mf >= |f|` holds exactly.
//! With [`BallPolicy::CenteredOnly`] a ball only counts at its center.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::ExponentFunction;
use crate::field::{enumerate_balls, BallFamily, BallPolicy, Grid, GridFunction, PrefixSums, SignMode};
use crate::norm::weighted_norm;
use crate::par;
use crate::weights::Weight;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OperatorKind {
    HardyLittlewood,
    FractionalMaximal {
        alpha: f64,
    },
    RieszPotential {
        alpha: f64,
    },
    SharpMaximal,
    /// Truncation `epsilon`; `None` means twice the grid spacing.
    Hilbert {
        epsilon: Option<f64>,
    },
}

impl OperatorKind {
    pub fn name(&self) -> String {
        match self {
            OperatorKind::HardyLittlewood => "M".into(),
            OperatorKind::FractionalMaximal { alpha } => format!("M_{alpha}"),
            OperatorKind::RieszPotential { alpha } => format!("I_{alpha}"),
            OperatorKind::SharpMaximal => "M#".into(),
            OperatorKind::Hilbert { .. } => "H".into(),
        }
    }

    pub fn uses_balls(&self) -> bool {
        matches!(
            self,
            OperatorKind::HardyLittlewood | OperatorKind::FractionalMaximal { .. } | OperatorKind::SharpMaximal
        )
    }
}

/// An operator together with the balls its suprema range over. When the
/// stored family lives on a different grid than the input, a family is
/// enumerated on the input grid with `policy`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorHandle {
    pub kind: OperatorKind,
    pub policy: BallPolicy,
    pub family: Option<BallFamily>,
}

impl OperatorHandle {
    pub fn new(kind: OperatorKind, policy: BallPolicy) -> Self {
        Self { kind, policy, family: None }
    }

    pub fn maximal() -> Self {
        Self::new(OperatorKind::HardyLittlewood, BallPolicy::AllPairs)
    }

    pub fn with_family(kind: OperatorKind, family: BallFamily) -> Self {
        Self { kind, policy: family.policy(), family: Some(family) }
    }

    pub fn family_for(&self, grid: &Grid) -> BallFamily {
        match &self.family {
            Some(f) if f.grid() == grid => f.clone(),
            _ => enumerate_balls(grid, self.policy),
        }
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        let n = f.grid().dim() as f64;
        match self.kind {
            OperatorKind::HardyLittlewood => apply_maximal(f, &self.family_for(f.grid())),
            OperatorKind::FractionalMaximal { alpha } => {
                check_alpha(alpha, n)?;
                apply_fractional_maximal(f, alpha, &self.family_for(f.grid()))
            }
            OperatorKind::RieszPotential { alpha } => apply_riesz_potential(f, alpha),
            OperatorKind::SharpMaximal => apply_sharp_maximal(f, &self.family_for(f.grid())),
            OperatorKind::Hilbert { epsilon } => apply_hilbert(f, epsilon.unwrap_or(2.0 * f.grid().min_spacing())),
        }
    }
}

fn check_alpha(alpha: f64, n: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < n) {
        return Err(Error::InvalidOperator(format!("need 0 < alpha < {n}, got {alpha}")));
    }
    Ok(())
}

/// Which quantity a maximal sweep maximizes.
#[derive(Clone, Copy)]
enum BallQuantity {
    Average,
    /// `|B|^{α/n}` times the average.
    Fractional(f64),
    Oscillation,
}

fn maximal_sweep(f: &GridFunction, family: &BallFamily, what: BallQuantity) -> Result<GridFunction> {
    let grid = f.grid();
    if family.grid() != grid {
        return Err(Error::GridMismatch(format!(
            "ball family on {}, function on {}",
            family.grid().describe(),
            grid.describe()
        )));
    }
    let v: Vec<f64> = f.values().iter().map(|x| x.abs()).collect();
    let weights = grid.quadrature_weights();
    let prefix = PrefixSums::new(&weights, &v);
    let dim = grid.dim() as f64;
    let n = v.len();

    let cell = |i: usize| match what {
        BallQuantity::Average => v[i],
        BallQuantity::Fractional(a) => weights[i].powf(a / dim) * v[i],
        BallQuantity::Oscillation => 0.0,
    };
    let quantity = |ranges: &[(usize, usize)]| -> f64 {
        let (m, t) = prefix.over(ranges);
        let mean = t / m;
        match what {
            BallQuantity::Average => mean,
            BallQuantity::Fractional(a) => m.powf(a / dim) * mean,
            BallQuantity::Oscillation => {
                let dev: f64 = ranges.iter().flat_map(|&(a, b)| a..b).map(|i| weights[i] * (v[i] - mean).abs()).sum();
                dev / m
            }
        }
    };

    let mut out = if family.is_interval_pairs() && !matches!(what, BallQuantity::Oscillation) {
        // For each left end i, sweep right ends from the top so every node
        // k >= i sees the best interval [i, j] with j >= max(k, i+1).
        par::max_scatter(n, n, 0.0, |i, out| {
            let mut best = f64::NEG_INFINITY;
            for k in (i..n).rev() {
                if k > i {
                    best = best.max(quantity(&[(i, k + 1)]));
                }
                if best > out[k] {
                    out[k] = best;
                }
            }
        })
    } else {
        let centered = family.policy() == BallPolicy::CenteredOnly;
        let covered = par::max_scatter(family.len(), n, 0.0, |b, out| {
            let ball = &family.balls()[b];
            let ranges = family.member_ranges(ball);
            if ranges.is_empty() {
                return;
            }
            match (centered, ball.center_node) {
                (true, Some(c)) => out[c] = out[c].max(1.0),
                _ => ranges.iter().flat_map(|&(a, e)| a..e).for_each(|i| out[i] = 1.0),
            }
        });
        if let Some(i) = covered.iter().position(|c| *c == 0.0) {
            return Err(Error::FamilyDoesNotCover(i));
        }
        par::max_scatter(family.len(), n, 0.0, |b, out| {
            let ball = &family.balls()[b];
            let ranges = family.member_ranges(ball);
            if ranges.is_empty() {
                return;
            }
            let q = quantity(&ranges);
            match (centered, ball.center_node) {
                (true, Some(c)) => out[c] = out[c].max(q),
                _ => {
                    for i in ranges.iter().flat_map(|&(a, e)| a..e) {
                        if q > out[i] {
                            out[i] = q;
                        }
                    }
                }
            }
        })
    };
    for (i, o) in out.iter_mut().enumerate() {
        *o = o.max(cell(i));
    }
    GridFunction::new(*grid, out, SignMode::Nonnegative)
}

/// `Mf(x) = sup_{B ∋ x} ⨍_B |f|`.
pub fn apply_maximal(f: &GridFunction, balls: &BallFamily) -> Result<GridFunction> {
    maximal_sweep(f, balls, BallQuantity::Average)
}

/// `M_α f(x) = sup_{B ∋ x} |B|^{α/n} ⨍_B |f|`.
pub fn apply_fractional_maximal(f: &GridFunction, alpha: f64, balls: &BallFamily) -> Result<GridFunction> {
    check_alpha(alpha, f.grid().dim() as f64)?;
    maximal_sweep(f, balls, BallQuantity::Fractional(alpha))
}

/// `M^# f(x) = sup_{B ∋ x} ⨍_B |f - f_B|`, applied to `|f|`.
pub fn apply_sharp_maximal(f: &GridFunction, balls: &BallFamily) -> Result<GridFunction> {
    maximal_sweep(f, balls, BallQuantity::Oscillation)
}

/// `∫_{cell} |x - y|^{α - n} dy` for the cell of node `i`, treating the
/// cell as a ball of equal measure in 2-D.
fn riesz_self_weight(grid: &Grid, i: usize, alpha: f64) -> f64 {
    if grid.dim() == 1 {
        let h = grid.spacing(0);
        let half = (0.5 * h).powf(alpha) / alpha;
        let r = grid.resolution();
        if i == 0 || i + 1 == r {
            half
        } else {
            2.0 * half
        }
    } else {
        let rho = (grid.spacing(0) * grid.spacing(1) / std::f64::consts::PI).sqrt();
        let full = 2.0 * std::f64::consts::PI * rho.powf(alpha) / alpha;
        let (i0, i1) = grid.split_index(i);
        let edge = |k: usize| if k == 0 || k + 1 == grid.resolution() { 0.5 } else { 1.0 };
        full * edge(i0) * edge(i1)
    }
}

/// `I_α f(x) = ∫ f(y) |x - y|^{α - n} dy` by quadrature, with the kernel
/// integrated exactly over the node's own cell.
pub fn apply_riesz_potential(f: &GridFunction, alpha: f64) -> Result<GridFunction> {
    let grid = *f.grid();
    let n = grid.dim() as f64;
    check_alpha(alpha, n)?;
    let weights = grid.quadrature_weights();
    let points = grid.points();
    let v = f.values();
    let out = par::map_range(grid.len(), |i| {
        let x = points[i];
        let mut total = riesz_self_weight(&grid, i, alpha) * v[i];
        for j in 0..v.len() {
            if j == i || v[j] == 0.0 {
                continue;
            }
            let d = ((x[0] - points[j][0]).powi(2) + (x[1] - points[j][1]).powi(2)).sqrt();
            total += weights[j] * v[j] * d.powf(alpha - n);
        }
        total
    });
    GridFunction::new(grid, out, f.sign())
}

/// `(1/π) ∫_{|x-y|>ε} f(y) / (x - y) dy` on a 1-D grid.
pub fn apply_hilbert(f: &GridFunction, epsilon: f64) -> Result<GridFunction> {
    let grid = *f.grid();
    if grid.dim() != 1 {
        return Err(Error::InvalidOperator("the Hilbert transform is 1-D only".into()));
    }
    let h = grid.spacing(0);
    if !(epsilon >= h * (1.0 - 1e-12)) {
        return Err(Error::InvalidOperator(format!("truncation {epsilon} is below the spacing {h}")));
    }
    let weights = grid.quadrature_weights();
    let xs: Vec<f64> = (0..grid.len()).map(|i| grid.coord(0, i)).collect();
    let v = f.values();
    let out = par::map_range(grid.len(), |i| {
        let mut total = 0.0;
        for j in 0..v.len() {
            let d = xs[i] - xs[j];
            if d.abs() > epsilon {
                total += weights[j] * v[j] / d;
            }
        }
        total / std::f64::consts::PI
    });
    GridFunction::new(grid, out, SignMode::Signed)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OperatorNormEstimate {
    /// Max ratio over usable probes; a lower bound for the operator norm.
    pub estimate: f64,
    /// Ratio per probe, `None` for skipped probes.
    pub ratios: Vec<Option<f64>>,
    pub skipped: usize,
}

/// `max_f ‖Tf‖_{L^p(w)} / ‖f‖_{L^p(w)}` over `probes`.
pub fn estimate_operator_norm(
    op: &OperatorHandle,
    p: &ExponentFunction,
    w: &Weight,
    probes: &[GridFunction],
) -> Result<OperatorNormEstimate> {
    if probes.is_empty() {
        return Err(Error::NoUsableProbes("empty probe family".into()));
    }
    let ratios = par::try_map_range(probes.len(), |k| -> Result<Option<f64>> {
        let f = &probes[k];
        let den = weighted_norm(f, w, p)?.value;
        if !(den > 0.0 && den.is_finite()) {
            return Ok(None);
        }
        let num = weighted_norm(&op.apply(f)?, w, p)?.value;
        Ok(Some(num / den))
    })?;
    let skipped = ratios.iter().filter(|r| r.is_none()).count();
    for (k, r) in ratios.iter().enumerate() {
        if r.is_none() {
            log::warn!("probe {k} has zero norm and was skipped");
        }
    }
    if skipped == probes.len() {
        return Err(Error::NoUsableProbes(format!("all {skipped} probes have zero norm")));
    }
    let estimate = ratios.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(OperatorNormEstimate { estimate, ratios, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Ball, Region};
    use proptest::prelude::*;

    fn line(lo: f64, hi: f64, n: usize) -> Grid {
        Grid::line(lo, hi, n).unwrap()
    }

    fn from_fn(g: Grid, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction::from_fn(g, SignMode::Nonnegative, |x| f(x[0])).unwrap()
    }

    fn chi(a: f64, b: f64) -> impl Fn(f64) -> f64 {
        move |x| if (a..=b).contains(&x) { 1.0 } else { 0.0 }
    }

    /// Brute force over every interval with node endpoints plus single nodes.
    fn brute_maximal(f: &GridFunction) -> Vec<f64> {
        let g = f.grid();
        let n = g.len();
        let mut out: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
        for i in 0..n {
            for j in i + 1..n {
                let avg =
                    crate::field::average_on_ball(&f.abs(), &Ball::interval(g.coord(0, i), g.coord(0, j))).unwrap();
                for o in &mut out[i..=j] {
                    *o = o.max(avg);
                }
            }
        }
        out
    }

    #[test]
    fn maximal_of_constant_is_constant() {
        let g = line(0.0, 1.0, 33);
        for policy in [BallPolicy::AllPairs, BallPolicy::DyadicRadii, BallPolicy::CenteredOnly] {
            let m = apply_maximal(&from_fn(g, |_| 2.5), &enumerate_balls(&g, policy)).unwrap();
            assert!(m.values().iter().all(|v| (v - 2.5).abs() < 1e-13), "{policy}");
        }
    }

    #[test]
    fn maximal_indicator_at_endpoint() {
        let g = line(-2.0, 2.0, 41);
        let f = from_fn(g, chi(0.0, 1.0));
        let m = apply_maximal(&f, &enumerate_balls(&g, BallPolicy::AllPairs)).unwrap();
        // The best interval containing 2 is [0, 2].
        let brute = brute_maximal(&f);
        assert!((m.values()[40] - brute[40]).abs() < 1e-14);
        assert!((m.values()[40] - 0.5).abs() < 0.04, "{}", m.values()[40]);
        for (a, b) in m.values().iter().zip(&brute) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn general_path_matches_pair_sweep() {
        let g = line(0.0, 1.0, 24);
        let f = from_fn(g, |x| (7.0 * x).sin().abs() + x);
        let fam = enumerate_balls(&g, BallPolicy::AllPairs);
        let fast = apply_maximal(&f, &fam).unwrap();
        let slow_family = BallFamily::from_balls(g, BallPolicy::AllPairs, fam.balls().to_vec()).unwrap();
        // Forcing the scatter path through a 2-ball extension.
        let slow = apply_maximal(&f, &slow_family.extended([Ball::interval(0.0, 0.5)])).unwrap();
        let fast_ext = {
            let mut v = fast.values().to_vec();
            let avg = crate::field::average_on_ball(&f, &Ball::interval(0.0, 0.5)).unwrap();
            for (i, o) in v.iter_mut().enumerate() {
                if g.coord(0, i) <= 0.5 {
                    *o = o.max(avg);
                }
            }
            v
        };
        for (a, b) in slow.values().iter().zip(&fast_ext) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn fractional_maximal_examples() {
        let g = line(0.0, 1.0, 21);
        let fam = enumerate_balls(&g, BallPolicy::AllPairs);
        let f = from_fn(g, |_| 1.0);
        let m = apply_fractional_maximal(&f, 0.5, &fam).unwrap();
        assert!((m.values()[10] - 1.0).abs() < 1e-14);
        let z = apply_fractional_maximal(&GridFunction::zeros(g), 0.5, &fam).unwrap();
        assert!(z.values().iter().all(|v| *v == 0.0));
        let h = from_fn(g, |x| 1.0 + x * x);
        let m0 = apply_fractional_maximal(&h, 1e-9, &fam).unwrap();
        let mm = apply_maximal(&h, &fam).unwrap();
        for (a, b) in m0.values().iter().zip(mm.values()) {
            assert!((a - b).abs() < 1e-7);
        }
        assert!(apply_fractional_maximal(&h, 1.0, &fam).is_err());
    }

    #[test]
    fn riesz_examples() {
        let g = line(0.0, 2.0, 4001);
        let f = from_fn(g, chi(0.0, 1.0));
        let r = apply_riesz_potential(&f, 0.5).unwrap();
        let exact = 2.0 * (2f64.sqrt() - 1.0);
        assert!((r.values()[4000] - exact).abs() < 1e-3, "{}", r.values()[4000]);
        let z = apply_riesz_potential(&GridFunction::zeros(g), 0.5).unwrap();
        assert!(z.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn riesz_diagonal_cell_converges() {
        // f ≡ 1 on [0,1], x = 1/2: exact 2 (1/2)^{α}/α.
        let alpha = 0.5;
        let exact = 2.0 * 0.5f64.powf(alpha) / alpha;
        let mut errs = Vec::new();
        for n in [101, 401, 1601] {
            let g = line(0.0, 1.0, n);
            let r = apply_riesz_potential(&from_fn(g, |_| 1.0), alpha).unwrap();
            errs.push((r.values()[(n - 1) / 2] - exact).abs());
        }
        assert!(errs[2] < errs[1] && errs[1] < errs[0], "{errs:?}");
        assert!(errs[2] < 0.05, "{errs:?}");
    }

    #[test]
    fn sharp_maximal_examples() {
        let g = line(-1.0, 2.0, 31);
        let fam = enumerate_balls(&g, BallPolicy::AllPairs);
        let c = apply_sharp_maximal(&from_fn(g, |_| 3.0), &fam).unwrap();
        assert!(c.values().iter().all(|v| v.abs() < 1e-13));
        let f = from_fn(g, chi(0.0, 1.0));
        let s = apply_sharp_maximal(&f, &fam).unwrap();
        let m = apply_maximal(&f, &fam).unwrap();
        for (a, b) in s.values().iter().zip(m.values()) {
            assert!(*a <= 2.0 * b + 1e-14);
        }
        // Whole box: mean about 1/3, oscillation about 4/9.
        let wts = g.quadrature_weights();
        let total: f64 = wts.iter().sum();
        let mean = wts.iter().zip(f.values()).map(|(w, v)| w * v).sum::<f64>() / total;
        let osc = wts.iter().zip(f.values()).map(|(w, v)| w * (v - mean).abs()).sum::<f64>() / total;
        let whole = crate::field::average_on_ball(&f, &Ball::interval(-1.0, 2.0)).unwrap();
        assert!((whole - mean).abs() < 1e-14);
        assert!((mean - 1.0 / 3.0).abs() < 0.05 && (osc - 4.0 / 9.0).abs() < 0.05);
        assert!(s.values()[15] >= osc - 1e-14);
    }

    #[test]
    fn hilbert_examples() {
        let g = line(-4.0, 4.0, 8001);
        let f = from_fn(g, chi(-1.0, 1.0));
        let h = apply_hilbert(&f, 2.0 * g.spacing(0)).unwrap();
        let exact = 3f64.ln() / std::f64::consts::PI;
        assert!((h.values()[6000] - exact).abs() < 1e-3, "{}", h.values()[6000]);
        assert!(h.values()[4000].abs() < 1e-12);
        let even = from_fn(g, |x| (-x * x).exp());
        assert!(apply_hilbert(&even, 0.01).unwrap().values()[4000].abs() < 1e-12);
        let z = apply_hilbert(&GridFunction::zeros(g), 0.01).unwrap();
        assert!(z.values().iter().all(|v| *v == 0.0));
        assert!(apply_hilbert(&f, 1e-5).is_err());
    }

    #[test]
    fn operator_norm_on_constants_is_one() {
        let g = line(0.0, 1.0, 65);
        let p = ExponentFunction::constant(2.0, Region::interval(0.0, 1.0)).unwrap();
        let probes = vec![from_fn(g, |_| 1.0), from_fn(g, |_| 3.0), GridFunction::zeros(g)];
        let est = estimate_operator_norm(&OperatorHandle::maximal(), &p, &Weight::unit(), &probes).unwrap();
        assert!((est.estimate - 1.0).abs() < 1e-9);
        assert_eq!(est.skipped, 1);
        let err = estimate_operator_norm(&OperatorHandle::maximal(), &p, &Weight::unit(), &[GridFunction::zeros(g)]);
        assert!(matches!(err, Err(Error::NoUsableProbes(_))));
    }

    #[test]
    fn uncovered_node_is_an_error() {
        let g = line(0.0, 1.0, 11);
        let fam = BallFamily::from_balls(g, BallPolicy::DyadicRadii, vec![Ball::interval(0.0, 0.3)]).unwrap();
        let err = apply_maximal(&from_fn(g, |_| 1.0), &fam).unwrap_err();
        assert_eq!(err, Error::FamilyDoesNotCover(4));
    }

    #[test]
    fn two_dimensional_maximal() {
        let g = Grid::square([0.0, 0.0], [1.0, 1.0], 9).unwrap();
        let f = GridFunction::from_fn(g, SignMode::Nonnegative, |x| x[0] + 2.0 * x[1]).unwrap();
        for policy in [BallPolicy::AllPairs, BallPolicy::DyadicRadii] {
            let m = apply_maximal(&f, &enumerate_balls(&g, policy)).unwrap();
            for (a, b) in m.values().iter().zip(f.values()) {
                assert!(*a >= *b);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn maximal_is_sublinear_and_homogeneous(
            a in proptest::collection::vec(-3.0f64..3.0, 20),
            b in proptest::collection::vec(0.0f64..3.0, 20),
            c in -4.0f64..4.0,
        ) {
            let g = line(0.0, 1.0, 20);
            let fam = enumerate_balls(&g, BallPolicy::AllPairs);
            let f = GridFunction::new(g, a, SignMode::Signed).unwrap();
            let h = GridFunction::new(g, b, SignMode::Nonnegative).unwrap();
            let mf = apply_maximal(&f, &fam).unwrap();
            let mh = apply_maximal(&h, &fam).unwrap();
            let sum = f.abs().zip_with(&h, SignMode::Nonnegative, |x, y| x + y).unwrap();
            let ms = apply_maximal(&sum, &fam).unwrap();
            for i in 0..20 {
                prop_assert!(ms.values()[i] <= mf.values()[i] + mh.values()[i] + 1e-12);
            }
            let mc = apply_maximal(&f.scale(c), &fam).unwrap();
            for i in 0..20 {
                prop_assert!((mc.values()[i] - c.abs() * mf.values()[i]).abs() <= 1e-12 * (1.0 + mf.values()[i]));
            }
            prop_assert!(mf.values().iter().zip(f.values()).all(|(m, v)| *m >= v.abs()));
        }

        #[test]
        fn riesz_is_linear(
            a in proptest::collection::vec(0.0f64..3.0, 25),
            b in proptest::collection::vec(0.0f64..3.0, 25),
            s in 0.0f64..3.0,
            t in 0.0f64..3.0,
        ) {
            let g = line(-1.0, 1.0, 25);
            let f = GridFunction::new(g, a, SignMode::Nonnegative).unwrap();
            let h = GridFunction::new(g, b, SignMode::Nonnegative).unwrap();
            let comb = f.zip_with(&h, SignMode::Nonnegative, |x, y| s * x + t * y).unwrap();
            let lhs = apply_riesz_potential(&comb, 0.5).unwrap();
            let rf = apply_riesz_potential(&f, 0.5).unwrap();
            let rh = apply_riesz_potential(&h, 0.5).unwrap();
            for i in 0..25 {
                let rhs = s * rf.values()[i] + t * rh.values()[i];
                prop_assert!((lhs.values()[i] - rhs).abs() <= 1e-12 * (1.0 + rhs));
            }
        }

        #[test]
        fn larger_family_larger_maximal(vals in proptest::collection::vec(0.0f64..5.0, 17)) {
            let g = line(0.0, 1.0, 17);
            let f = GridFunction::new(g, vals, SignMode::Nonnegative).unwrap();
            let small = enumerate_balls(&g, BallPolicy::DyadicRadii);
            let big = small.extended(enumerate_balls(&g, BallPolicy::AllPairs).balls().iter().copied());
            for op in [apply_maximal, apply_sharp_maximal] {
                let a = op(&f, &small).unwrap();
                let b = op(&f, &big).unwrap();
                prop_assert!(a.values().iter().zip(b.values()).all(|(x, y)| x <= y));
            }
        }
    }
}
