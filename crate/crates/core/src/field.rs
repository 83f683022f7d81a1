//! Uniform grids on boxes in dimension 1 or 2, trapezoid quadrature, sampled
//! functions and the ball families that stand in for "all balls".
//!
//! Averages over a ball use the clipped-ball convention: only the part of the
//! ball inside the box counts, and its measure is the quadrature measure of
//! the member nodes. Numerator and denominator use the same weights, so the
//! average of a constant is that constant.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the plane; 1-D grids leave the second coordinate at zero.
pub type Point = [f64; 2];

/// Relative slack when testing whether a node lies inside a ball.
const MEMBERSHIP_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    lower: [f64; 2],
    upper: [f64; 2],
    resolution: usize,
}

impl Grid {
    pub fn new(dim: usize, lower: &[f64], upper: &[f64], resolution: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if lower.len() != dim || upper.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} bounds per side, got {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if resolution < 2 {
            return Err(Error::InvalidGrid(format!("resolution must be at least 2, got {resolution}")));
        }
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for axis in 0..dim {
            if !(lower[axis].is_finite() && upper[axis].is_finite() && lower[axis] < upper[axis]) {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: need finite lo < hi, got [{}, {}]",
                    lower[axis], upper[axis]
                )));
            }
            lo[axis] = lower[axis];
            hi[axis] = upper[axis];
        }
        Ok(Self { dim, lower: lo, upper: hi, resolution })
    }

    pub fn line(lo: f64, hi: f64, resolution: usize) -> Result<Self> {
        Self::new(1, &[lo], &[hi], resolution)
    }

    pub fn square(lo: [f64; 2], hi: [f64; 2], resolution: usize) -> Result<Self> {
        Self::new(2, &lo, &hi, resolution)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.lower[axis]
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.upper[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.resolution - 1) as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    /// Number of nodes, `resolution^dim`.
    pub fn len(&self) -> usize {
        self.resolution.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of node `i` along `axis`; the last node sits exactly on `upper`.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.resolution {
            self.upper[axis]
        } else {
            self.lower[axis] + i as f64 * self.spacing(axis)
        }
    }

    /// Row-major flat index; axis 0 is the slow index.
    pub fn index(&self, i0: usize, i1: usize) -> usize {
        if self.dim == 1 {
            i0
        } else {
            i0 * self.resolution + i1
        }
    }

    pub fn split_index(&self, idx: usize) -> (usize, usize) {
        if self.dim == 1 {
            (idx, 0)
        } else {
            (idx / self.resolution, idx % self.resolution)
        }
    }

    pub fn point(&self, idx: usize) -> Point {
        let (i0, i1) = self.split_index(idx);
        if self.dim == 1 {
            [self.coord(0, i0), 0.0]
        } else {
            [self.coord(0, i0), self.coord(1, i1)]
        }
    }

    pub fn points(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Lebesgue measure of the box.
    pub fn measure(&self) -> f64 {
        (0..self.dim).map(|a| self.upper[a] - self.lower[a]).product()
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim).map(|a| (self.upper[a] - self.lower[a]).powi(2)).sum::<f64>().sqrt()
    }

    /// Composite trapezoid weights (tensor product in 2-D). Each weight is
    /// the measure of the node's cell clipped to the box.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let axis_weights = |axis: usize| -> Vec<f64> {
            let h = self.spacing(axis);
            (0..self.resolution).map(|i| if i == 0 || i + 1 == self.resolution { 0.5 * h } else { h }).collect()
        };
        let w0 = axis_weights(0);
        if self.dim == 1 {
            return w0;
        }
        let w1 = axis_weights(1);
        let mut out = Vec::with_capacity(self.len());
        for a in &w0 {
            for b in &w1 {
                out.push(a * b);
            }
        }
        out
    }

    /// Same box at a different resolution.
    pub fn with_resolution(&self, resolution: usize) -> Result<Self> {
        Self::new(self.dim, &self.lower[..self.dim], &self.upper[..self.dim], resolution)
    }

    /// Nested refinement: every node of `self` is a node of the result.
    pub fn refined(&self) -> Self {
        Self { resolution: 2 * self.resolution - 1, ..*self }
    }

    pub fn contains(&self, x: &Point) -> bool {
        (0..self.dim).all(|a| x[a] >= self.lower[a] && x[a] <= self.upper[a])
    }

    pub fn describe(&self) -> String {
        if self.dim == 1 {
            format!("1d[{},{}]x{}", self.lower[0], self.upper[0], self.resolution)
        } else {
            format!(
                "2d[{},{}]x[{},{}]x{}^2",
                self.lower[0], self.upper[0], self.lower[1], self.upper[1], self.resolution
            )
        }
    }

    /// Inclusive index range of nodes along `axis` with coordinate in `[a, b]`.
    fn axis_range(&self, axis: usize, a: f64, b: f64) -> Option<(usize, usize)> {
        let h = self.spacing(axis);
        let lo = self.lower[axis];
        let n = self.resolution as f64;
        let first = ((a - lo) / h - MEMBERSHIP_SLACK).ceil().max(0.0);
        let last = ((b - lo) / h + MEMBERSHIP_SLACK).floor().min(n - 1.0);
        if first > last || last < 0.0 || first > n - 1.0 {
            None
        } else {
            Some((first as usize, last as usize))
        }
    }
}

/// An axis-aligned box used as a region of interest inside a domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Region {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self { lower, upper }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Self { lower: vec![lo], upper: vec![hi] }
    }

    pub fn of_grid(grid: &Grid) -> Self {
        let d = grid.dim();
        Self { lower: (0..d).map(|a| grid.lower(a)).collect(), upper: (0..d).map(|a| grid.upper(a)).collect() }
    }

    /// Intersection with a grid's box, if it has positive measure.
    pub fn clip_to(&self, grid: &Grid) -> Option<Region> {
        if self.lower.len() != grid.dim() || self.upper.len() != grid.dim() {
            return None;
        }
        let mut lower = Vec::with_capacity(grid.dim());
        let mut upper = Vec::with_capacity(grid.dim());
        for a in 0..grid.dim() {
            let lo = self.lower[a].max(grid.lower(a));
            let hi = self.upper[a].min(grid.upper(a));
            if !(lo < hi) {
                return None;
            }
            lower.push(lo);
            upper.push(hi);
        }
        Some(Region { lower, upper })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignMode {
    Nonnegative,
    Signed,
}

/// Values sampled at the nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
    sign: SignMode,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>, sign: SignMode) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidFunction(format!("expected {} values, got {}", grid.len(), values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidFunction(format!("non-finite value at node {i}")));
        }
        if sign == SignMode::Nonnegative {
            if let Some(i) = values.iter().position(|v| *v < 0.0) {
                return Err(Error::InvalidFunction(format!(
                    "negative value {} at node {i} in nonnegative mode",
                    values[i]
                )));
            }
        }
        Ok(Self { grid, values, sign })
    }

    pub fn from_fn(grid: Grid, sign: SignMode, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let d = grid.dim();
        let values = (0..grid.len()).map(|i| f(&grid.point(i)[..d])).collect();
        Self::new(grid, values, sign)
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        let sign = if c >= 0.0 { SignMode::Nonnegative } else { SignMode::Signed };
        Self::new(grid, vec![c; grid.len()], sign)
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.len()], sign: SignMode::Nonnegative }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sign(&self) -> SignMode {
        self.sign
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn abs(&self) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v.abs()).collect(), sign: SignMode::Nonnegative }
    }

    pub fn map(&self, sign: SignMode, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|v| f(*v)).collect(), sign)
    }

    pub fn zip_with(&self, other: &Self, sign: SignMode, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect();
        Self::new(self.grid, values, sign)
    }

    /// Pointwise product; the result is nonnegative when both factors are.
    pub fn product(&self, other: &Self) -> Result<Self> {
        let sign = if self.sign == SignMode::Nonnegative && other.sign == SignMode::Nonnegative {
            SignMode::Nonnegative
        } else {
            SignMode::Signed
        };
        self.zip_with(other, sign, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        let sign = if c >= 0.0 { self.sign } else { SignMode::Signed };
        Self { grid: self.grid, values: self.values.iter().map(|v| v * c).collect(), sign }
    }

    /// `|f|^t` pointwise.
    pub fn abs_pow(&self, t: f64) -> Result<Self> {
        self.map(SignMode::Nonnegative, |v| if v == 0.0 { 0.0 } else { v.abs().powf(t) })
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{} vs {}", self.grid.describe(), other.grid.describe())));
        }
        Ok(())
    }

    /// Trapezoid (tensor-trapezoid in 2-D) approximation of the integral.
    pub fn integrate(&self) -> f64 {
        self.grid.quadrature_weights().iter().zip(&self.values).map(|(w, v)| w * v).sum()
    }

    /// Writes `x[,y],value` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        if self.grid.dim() == 1 {
            wtr.write_record(["x", "value"])?;
        } else {
            wtr.write_record(["x", "y", "value"])?;
        }
        for (i, v) in self.values.iter().enumerate() {
            let p = self.grid.point(i);
            if self.grid.dim() == 1 {
                wtr.write_record([p[0].to_string(), v.to_string()])?;
            } else {
                wtr.write_record([p[0].to_string(), p[1].to_string(), v.to_string()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// A Euclidean ball; in 1-D an interval `[center - radius, center + radius]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
    /// Grid node at the center, when the center is a node.
    pub center_node: Option<usize>,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Self {
        Self { center, radius, center_node: None }
    }

    pub fn interval(a: f64, b: f64) -> Self {
        Self::new([0.5 * (a + b), 0.0], 0.5 * (b - a))
    }

    pub fn endpoints(&self) -> (f64, f64) {
        (self.center[0] - self.radius, self.center[0] + self.radius)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BallPolicy {
    /// 1-D: every interval whose endpoints are distinct nodes. 2-D: every
    /// node center with radii at all integer multiples of the spacing.
    AllPairs,
    /// Every node center with radii `h * 2^k` up to the box diameter.
    DyadicRadii,
    /// The dyadic balls, but each one only counts at its own center.
    CenteredOnly,
}

impl std::fmt::Display for BallPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BallPolicy::AllPairs => "all-pairs",
            BallPolicy::DyadicRadii => "dyadic-radii",
            BallPolicy::CenteredOnly => "centered-only",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for BallPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all-pairs" => Ok(Self::AllPairs),
            "dyadic-radii" | "dyadic" => Ok(Self::DyadicRadii),
            "centered-only" | "centered" => Ok(Self::CenteredOnly),
            other => Err(Error::InvalidGrid(format!("unknown ball policy '{other}'"))),
        }
    }
}

/// A finite family of balls standing in for the supremum over all balls.
#[derive(Clone, Debug, PartialEq)]
pub struct BallFamily {
    grid: Grid,
    policy: BallPolicy,
    balls: Vec<Ball>,
    /// Exactly the family produced by [`enumerate_balls`].
    complete: bool,
}

/// Number of dyadic radius levels, `ceil(log2(diam / h))`.
fn dyadic_levels(grid: &Grid) -> usize {
    let ratio = grid.diameter() / grid.min_spacing();
    (ratio.log2() - 1e-12).ceil().max(1.0) as usize
}

/// Builds the ball family for `grid` under `policy`. Deterministic.
pub fn enumerate_balls(grid: &Grid, policy: BallPolicy) -> BallFamily {
    let n = grid.resolution();
    let h = grid.min_spacing();
    let mut balls = Vec::new();
    match (policy, grid.dim()) {
        (BallPolicy::AllPairs, 1) => {
            balls.reserve(n * (n - 1) / 2);
            for i in 0..n {
                for j in i + 1..n {
                    balls.push(Ball::interval(grid.coord(0, i), grid.coord(0, j)));
                }
            }
        }
        (BallPolicy::AllPairs, _) => {
            let levels = (grid.diameter() / h - 1e-12).ceil() as usize;
            for c in 0..grid.len() {
                for k in 1..=levels {
                    balls.push(Ball { center: grid.point(c), radius: k as f64 * h, center_node: Some(c) });
                }
            }
        }
        (BallPolicy::DyadicRadii | BallPolicy::CenteredOnly, _) => {
            let levels = dyadic_levels(grid);
            for c in 0..grid.len() {
                for k in 0..levels {
                    balls.push(Ball { center: grid.point(c), radius: h * (1u64 << k) as f64, center_node: Some(c) });
                }
            }
        }
    }
    BallFamily { grid: *grid, policy, balls, complete: true }
}

impl BallFamily {
    /// A family from explicit balls; useful for single-ball checks.
    pub fn from_balls(grid: Grid, policy: BallPolicy, balls: Vec<Ball>) -> Result<Self> {
        for b in &balls {
            if !(b.radius > 0.0) {
                return Err(Error::InvalidGrid(format!("ball radius must be positive, got {}", b.radius)));
            }
        }
        Ok(Self { grid, policy, balls, complete: false })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn policy(&self) -> BallPolicy {
        self.policy
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn id(&self) -> String {
        format!("{}@{}#{}", self.policy, self.grid.describe(), self.balls.len())
    }

    /// Hash of every ball's center and radius; distinguishes families that
    /// share an id.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in &self.balls {
            for v in [b.center[0], b.center[1], b.radius] {
                h ^= v.to_bits();
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    /// Adds balls; used to check monotonicity of suprema in the family.
    pub fn extended(&self, extra: impl IntoIterator<Item = Ball>) -> Self {
        let mut out = self.clone();
        out.balls.extend(extra);
        out.complete = false;
        out
    }

    /// True when the 1-D all-pairs fast paths apply.
    pub(crate) fn is_interval_pairs(&self) -> bool {
        self.complete && self.policy == BallPolicy::AllPairs && self.grid.dim() == 1
    }

    /// Member nodes of `ball` as half-open ranges of flat indices.
    pub fn member_ranges(&self, ball: &Ball) -> Vec<(usize, usize)> {
        member_ranges(&self.grid, ball)
    }

    /// The cell-scale ball of a node: it contains that node only.
    pub fn cell_ball(&self, node: usize) -> Ball {
        Ball { center: self.grid.point(node), radius: 0.5 * self.grid.min_spacing(), center_node: Some(node) }
    }
}

pub fn member_ranges(grid: &Grid, ball: &Ball) -> Vec<(usize, usize)> {
    let r = ball.radius * (1.0 + MEMBERSHIP_SLACK);
    if grid.dim() == 1 {
        return grid
            .axis_range(0, ball.center[0] - r, ball.center[0] + r)
            .map(|(a, b)| vec![(a, b + 1)])
            .unwrap_or_default();
    }
    let mut out = Vec::new();
    if let Some((r0, r1)) = grid.axis_range(0, ball.center[0] - r, ball.center[0] + r) {
        for i0 in r0..=r1 {
            let dx = grid.coord(0, i0) - ball.center[0];
            let half = (r * r - dx * dx).max(0.0).sqrt();
            if let Some((c0, c1)) = grid.axis_range(1, ball.center[1] - half, ball.center[1] + half) {
                out.push((grid.index(i0, c0), grid.index(i0, c1) + 1));
            }
        }
    }
    out
}

/// Quadrature average of `f` over the part of `ball` inside the box.
pub fn average_on_ball(f: &GridFunction, ball: &Ball) -> Result<f64> {
    let weights = f.grid().quadrature_weights();
    let ranges = member_ranges(f.grid(), ball);
    let mut mass = 0.0;
    let mut total = 0.0;
    for (a, b) in ranges {
        for (w, v) in weights[a..b].iter().zip(&f.values()[a..b]) {
            mass += w;
            total += w * v;
        }
    }
    if mass == 0.0 {
        return Err(Error::BallBelowResolution { center: ball.center, radius: ball.radius });
    }
    Ok(total / mass)
}

/// Quadrature measure of the part of `ball` inside the box.
pub fn ball_measure(grid: &Grid, ball: &Ball) -> f64 {
    let weights = grid.quadrature_weights();
    member_ranges(grid, ball).into_iter().flat_map(|(a, b)| a..b).map(|i| weights[i]).sum()
}

/// Prefix sums of `weight` and `weight * value` over flat indices, so any
/// union of contiguous ranges can be averaged in O(number of ranges).
#[derive(Clone, Debug)]
pub(crate) struct PrefixSums {
    mass: Vec<f64>,
    total: Vec<f64>,
}

impl PrefixSums {
    pub(crate) fn new(weights: &[f64], values: &[f64]) -> Self {
        let mut mass = Vec::with_capacity(weights.len() + 1);
        let mut total = Vec::with_capacity(weights.len() + 1);
        let (mut m, mut t) = (0.0, 0.0);
        mass.push(0.0);
        total.push(0.0);
        for (w, v) in weights.iter().zip(values) {
            m += w;
            t += w * v;
            mass.push(m);
            total.push(t);
        }
        Self { mass, total }
    }

    /// (measure, integral) over the given ranges.
    pub(crate) fn over(&self, ranges: &[(usize, usize)]) -> (f64, f64) {
        ranges
            .iter()
            .fold((0.0, 0.0), |(m, t), &(a, b)| (m + self.mass[b] - self.mass[a], t + self.total[b] - self.total[a]))
    }
}
