//! The piecewise model diffeomorphism: a two-branch horseshoe near the saddle
//! `P0 = (0, 0)` (second fixed point `P1 = (1, 1)`), a quadratic fold carrying
//! a neighbourhood of `r = (0, a)` on the local unstable leaf of `P0` to a
//! neighbourhood of `q = (b, c)` on its local stable leaf, and the class of
//! perturbations supported near the line of tangencies.
//!
//! Coordinates are chosen so that the stable foliation is horizontal and the
//! unstable foliation is vertical: every saddle branch has the product form
//! `(x, y) -> (xi(x), eta(y))`.

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix2;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numeric;

/// Abscissa of the saddle `P0` whose local unstable leaf carries `r`.
pub const SADDLE_X: f64 = 0.0;
/// Ordinate of the saddle `P0`.
pub const SADDLE_Y: f64 = 0.0;
/// Membership slack for strip and domain checks.
const SLACK: f64 = 1e-12;
/// Largest admissible perturbation size.
pub const MAX_DELTA: f64 = 0.05;
/// Default bound `K` for `1/K <= |alpha|, |beta|, |gamma| <= K`.
pub const DEFAULT_COEFFICIENT_BOUND: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// One of the two horseshoe branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    /// Fixes `P0 = (0, 0)`.
    Left,
    /// Fixes `P1 = (1, 1)`.
    Right,
}

impl Branch {
    pub fn index(self) -> u8 {
        match self {
            Branch::Left => 0,
            Branch::Right => 1,
        }
    }

    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            0 => Some(Branch::Left),
            1 => Some(Branch::Right),
            _ => None,
        }
    }

    /// Coordinate of the branch's fixed point (same on both axes).
    pub fn fixed_datum(self) -> f64 {
        match self {
            Branch::Left => 0.0,
            Branch::Right => 1.0,
        }
    }
}

/// A finite itinerary through the horseshoe strips, written as a string of
/// `0`/`1` characters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Word(pub Vec<Branch>);

impl Word {
    pub fn zeros(n: usize) -> Self {
        Word(vec![Branch::Left; n])
    }

    /// The word whose `i`-th letter is bit `n-1-i` of `bits`.
    pub fn from_bits(bits: u64, n: usize) -> Self {
        Word(
            (0..n)
                .map(|i| {
                    if (bits >> (n - 1 - i)) & 1 == 1 {
                        Branch::Right
                    } else {
                        Branch::Left
                    }
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = Branch> + '_ {
        self.0.iter().copied()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{}", b.index())?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(Branch::Left),
                '1' => Ok(Branch::Right),
                other => Err(Error::validation(format!(
                    "invalid branch symbol {other:?} in word"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Smooth position dependence of the contraction and expansion rates:
/// `lambda(x) = lambda (1 + lambda_slope |x - o|)` and
/// `sigma(y) = sigma (1 + sigma_slope |y - o|)` with `o` the branch's fixed datum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Nonlinearity {
    #[serde(default)]
    pub lambda_slope: f64,
    #[serde(default)]
    pub sigma_slope: f64,
}

impl Nonlinearity {
    pub fn is_affine(&self) -> bool {
        self.lambda_slope == 0.0 && self.sigma_slope == 0.0
    }
}

/// The strongly dissipative horseshoe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleSpec {
    pub lambda: f64,
    pub sigma: f64,
    #[serde(default)]
    pub nonlinearity: Nonlinearity,
}

impl Default for SaddleSpec {
    fn default() -> Self {
        SaddleSpec {
            lambda: 0.2,
            sigma: 2.1,
            nonlinearity: Nonlinearity::default(),
        }
    }
}

/// Uniform hyperbolicity constants over the horseshoe neighbourhood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformRates {
    pub lambda_max: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl SaddleSpec {
    pub fn is_affine(&self) -> bool {
        self.nonlinearity.is_affine()
    }

    /// Contraction ratio of `branch` at abscissa `x`.
    pub fn lambda_at(&self, branch: Branch, x: f64) -> f64 {
        self.lambda * (1.0 + self.nonlinearity.lambda_slope * (x - branch.fixed_datum()).abs())
    }

    /// Expansion ratio of `branch` at ordinate `y`.
    pub fn sigma_at(&self, branch: Branch, y: f64) -> f64 {
        self.sigma * (1.0 + self.nonlinearity.sigma_slope * (y - branch.fixed_datum()).abs())
    }

    /// Width `w` of each vertical strip: `sigma (1 + eta w) w = 1`.
    pub fn strip_width(&self) -> f64 {
        let eta = self.nonlinearity.sigma_slope;
        if eta == 0.0 {
            1.0 / self.sigma
        } else {
            (-1.0 + (1.0 + 4.0 * eta / self.sigma).sqrt()) / (2.0 * eta)
        }
    }

    /// Ordinate range of the strip mapped by `branch`.
    pub fn strip(&self, branch: Branch) -> (f64, f64) {
        let w = self.strip_width();
        match branch {
            Branch::Left => (0.0, w),
            Branch::Right => (1.0 - w, 1.0),
        }
    }

    pub fn in_strip(&self, branch: Branch, p: Point) -> bool {
        let (lo, hi) = self.strip(branch);
        p.x >= -SLACK && p.x <= 1.0 + SLACK && p.y >= lo - SLACK && p.y <= hi + SLACK
    }

    pub fn uniform_rates(&self) -> UniformRates {
        let nl = self.nonlinearity;
        UniformRates {
            lambda_max: self.lambda * (1.0 + nl.lambda_slope.max(0.0)),
            sigma_min: self.sigma * (1.0 + nl.sigma_slope.min(0.0) * self.strip_width()),
            sigma_max: self.sigma * (1.0 + nl.sigma_slope.max(0.0) * self.strip_width()),
        }
    }

    /// One iterate along `branch` without the strip check.
    pub fn step_unchecked(&self, p: Point, branch: Branch) -> Point {
        let o = branch.fixed_datum();
        Point {
            x: o + self.lambda_at(branch, p.x) * (p.x - o),
            y: o + self.sigma_at(branch, p.y) * (p.y - o),
        }
    }

    pub fn step_jacobian(&self, p: Point, branch: Branch) -> Matrix2<f64> {
        let o = branch.fixed_datum();
        let nl = self.nonlinearity;
        let dx = self.lambda * (1.0 + 2.0 * nl.lambda_slope * (p.x - o).abs());
        let dy = self.sigma * (1.0 + 2.0 * nl.sigma_slope * (p.y - o).abs());
        Matrix2::new(dx, 0.0, 0.0, dy)
    }

    /// Preimage ordinate of `y` under `branch` (inverse of the vertical action).
    pub fn inverse_y(&self, branch: Branch, y: f64) -> f64 {
        let o = branch.fixed_datum();
        let d = y - o;
        let eta = self.nonlinearity.sigma_slope;
        let mag = if eta == 0.0 {
            d.abs() / self.sigma
        } else {
            (-1.0 + (1.0 + 4.0 * eta * d.abs() / self.sigma).sqrt()) / (2.0 * eta)
        };
        o + mag.copysign(d)
    }

    /// Image abscissa of `x` under `branch`.
    pub fn forward_x(&self, branch: Branch, x: f64) -> f64 {
        let o = branch.fixed_datum();
        o + self.lambda_at(branch, x) * (x - o)
    }

    pub fn validate(&self) -> Result<()> {
        let nl = self.nonlinearity;
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::validation(format!(
                "lambda must lie in (0, 1), got {}",
                self.lambda
            )));
        }
        if !(self.sigma > 2.0) {
            return Err(Error::validation(format!(
                "sigma must exceed 2 for disjoint strips, got {}",
                self.sigma
            )));
        }
        if nl.lambda_slope.abs() >= 1.0 || nl.sigma_slope.abs() >= 1.0 {
            return Err(Error::validation(
                "nonlinearity slopes must have modulus below 1",
            ));
        }
        if self.lambda * (1.0 + nl.lambda_slope.max(0.0)) >= 0.5 {
            return Err(Error::validation(
                "horseshoe images overlap: lambda (1 + lambda_slope) >= 1/2",
            ));
        }
        if self.strip_width() >= 0.5 {
            return Err(Error::validation("horseshoe strips overlap"));
        }
        let worst = self.dissipativity_sup(100);
        if worst >= 1.0 {
            return Err(Error::validation(format!(
                "horseshoe is not strongly dissipative: sup lambda(x) sigma(y)^2 = {worst}"
            )));
        }
        Ok(())
    }

    /// Largest `lambda(x) sigma(y)^2` over a `per_axis x per_axis` grid covering
    /// both strips.
    pub fn dissipativity_sup(&self, per_axis: usize) -> f64 {
        let mut worst = 0.0f64;
        let half = per_axis / 2;
        for branch in [Branch::Left, Branch::Right] {
            let (lo, hi) = self.strip(branch);
            for i in 0..per_axis {
                let x = i as f64 / (per_axis - 1) as f64;
                for j in 0..half.max(1) {
                    let y = lo + (hi - lo) * j as f64 / (half.max(2) - 1) as f64;
                    let v = self.lambda_at(branch, x) * self.sigma_at(branch, y).powi(2);
                    worst = worst.max(v);
                }
            }
        }
        worst
    }
}

/// Image of `p` under the named branch.
pub fn saddle_step(s: &SaddleSpec, p: Point, branch: Branch) -> Result<Point> {
    if !s.in_strip(branch, p) {
        return Err(Error::Escape {
            step: 0,
            x: p.x,
            y: p.y,
        });
    }
    Ok(s.step_unchecked(p, branch))
}

/// Products of the contraction and expansion ratios along the orbit of `p`
/// following `word`: `(prod lambda(x_j), prod sigma(y_j))`.
pub fn accumulated_rates(s: &SaddleSpec, p: Point, word: &Word) -> Result<(f64, f64)> {
    let mut q = p;
    let (mut lam, mut sig) = (1.0, 1.0);
    for (j, b) in word.iter().enumerate() {
        if !s.in_strip(b, q) {
            return Err(Error::Escape {
                step: j,
                x: q.x,
                y: q.y,
            });
        }
        lam *= s.lambda_at(b, q.x);
        sig *= s.sigma_at(b, q.y);
        q = s.step_unchecked(q, b);
    }
    Ok((lam, sig))
}

/// A polynomial term `coef * X^x_pow * Y^y_pow` contributing to the first or
/// second coordinate of a map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub component: u8,
    pub x_pow: u32,
    pub y_pow: u32,
    pub coef: f64,
}

impl Monomial {
    fn eval(&self, x: f64, y: f64) -> f64 {
        self.coef * x.powi(self.x_pow as i32) * y.powi(self.y_pow as i32)
    }

    fn dx(&self, x: f64, y: f64) -> f64 {
        if self.x_pow == 0 {
            0.0
        } else {
            self.coef
                * self.x_pow as f64
                * x.powi(self.x_pow as i32 - 1)
                * y.powi(self.y_pow as i32)
        }
    }

    fn dy(&self, x: f64, y: f64) -> f64 {
        if self.y_pow == 0 {
            0.0
        } else {
            self.coef
                * self.y_pow as f64
                * x.powi(self.x_pow as i32)
                * y.powi(self.y_pow as i32 - 1)
        }
    }
}

fn default_radius() -> f64 {
    0.25
}

fn default_transition() -> usize {
    1
}

/// Quadratic fold from a neighbourhood of `r = (0, a)` to a neighbourhood of
/// `q = (b, c)`:
/// `(x*, a + y*) -> (b + alpha y* + R1, c + beta y*^2 + mu + gamma x* + R2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Number of transition iterates collapsed into the fold.
    #[serde(rename = "N", default = "default_transition")]
    pub transition_iterates: usize,
    #[serde(default)]
    pub remainder: Vec<Monomial>,
    /// Half-height of the fold domain around `y = a`.
    #[serde(default = "default_radius")]
    pub domain_radius: f64,
}

impl Default for FoldSpec {
    fn default() -> Self {
        FoldSpec {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            a: 0.5,
            b: 0.5,
            c: 0.0,
            transition_iterates: 1,
            remainder: Vec::new(),
            domain_radius: 0.25,
        }
    }
}

impl FoldSpec {
    /// Stable distance from `q` to the saddle, taken as `|b - x_P|`.
    pub fn stable_arc_length(&self) -> f64 {
        (self.b - SADDLE_X).abs()
    }

    pub fn has_remainder(&self) -> bool {
        self.remainder.iter().any(|m| m.coef != 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha * self.gamma == 0.0 {
            return Err(Error::validation(
                "fold must be a diffeomorphism: alpha * gamma != 0",
            ));
        }
        if self.beta == 0.0 {
            return Err(Error::validation("tangency must be quadratic: beta != 0"));
        }
        if !(self.domain_radius > 0.0) {
            return Err(Error::validation("fold domain radius must be positive"));
        }
        for m in &self.remainder {
            let forbidden = match m.component {
                1 => matches!((m.x_pow, m.y_pow), (0, 0) | (0, 1)),
                2 => matches!((m.x_pow, m.y_pow), (0, 0) | (1, 0) | (0, 1) | (0, 2)),
                _ => {
                    return Err(Error::validation(format!(
                        "remainder component must be 1 or 2, got {}",
                        m.component
                    )))
                }
            };
            if forbidden {
                return Err(Error::validation(format!(
                    "remainder term x*^{} y*^{} in H{} would redefine the fold coefficients",
                    m.x_pow, m.y_pow, m.component
                )));
            }
        }
        Ok(())
    }

    fn local(&self, p: Point) -> Result<(f64, f64)> {
        let xs = p.x - SADDLE_X;
        let ys = p.y - self.a;
        if ys.abs() > self.domain_radius + SLACK || xs.abs() > 1.0 + SLACK {
            return Err(Error::FoldDomain { x: p.x, y: p.y });
        }
        Ok((xs, ys))
    }

    pub fn jacobian(&self, p: Point) -> Result<Matrix2<f64>> {
        let (xs, ys) = self.local(p)?;
        let mut j = Matrix2::new(0.0, self.alpha, self.gamma, 2.0 * self.beta * ys);
        for m in &self.remainder {
            let row = (m.component - 1) as usize;
            j[(row, 0)] += m.dx(xs, ys);
            j[(row, 1)] += m.dy(xs, ys);
        }
        Ok(j)
    }
}

/// Image of `p` under the fold with height parameter `mu`.
pub fn fold_step(fold: &FoldSpec, mu: f64, p: Point) -> Result<Point> {
    let (xs, ys) = fold.local(p)?;
    let mut h1 = fold.alpha * ys;
    let mut h2 = fold.beta * ys * ys + mu + fold.gamma * xs;
    for m in &fold.remainder {
        match m.component {
            1 => h1 += m.eval(xs, ys),
            _ => h2 += m.eval(xs, ys),
        }
    }
    Ok(Point {
        x: fold.b + h1,
        y: fold.c + h2,
    })
}

/// C^3 cutoff equal to 1 on `[lo, hi]` and vanishing outside
/// `[lo - ramp, hi + ramp]`. Returns the value and its derivative.
fn plateau(v: f64, lo: f64, hi: f64, ramp: f64) -> (f64, f64) {
    let d = if v < lo {
        lo - v
    } else if v > hi {
        v - hi
    } else {
        return (1.0, 0.0);
    };
    if d >= ramp {
        return (0.0, 0.0);
    }
    let z = d / ramp;
    // septic smoothstep, C^3 at both ends
    let s = z.powi(4) * (35.0 - 84.0 * z + 70.0 * z * z - 20.0 * z.powi(3));
    let ds = 140.0 * z.powi(3) * (1.0 - z).powi(3) / ramp;
    let sign = if v < lo { 1.0 } else { -1.0 };
    (1.0 - s, sign * ds)
}

/// Perturbation `xi` supported in the band `V` around the line of tangencies
/// `x = b`:
/// `xi(u, v) = (u + psi P1(u - b, v - c), v + psi (k + P2(u - b, v - c)))`
/// where `P2` only contains terms of order two or more in `u - b`, so that on
/// the line of tangencies the vertical displacement is exactly `k` and its
/// horizontal derivative vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    #[serde(default)]
    pub k: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub shape: Vec<Monomial>,
}

/// Half-width of the core of `V` around `x = b` where the cutoff equals one.
const V_CORE_HALF_WIDTH: f64 = 0.15;
const V_RAMP_X: f64 = 0.15;
/// Vertical plateau of `V`, relative to `c`.
const V_BAND: (f64, f64) = (-0.5, 1.5);
const V_RAMP_Y: f64 = 0.5;

impl PerturbationSpec {
    pub fn translation(k: f64) -> Self {
        PerturbationSpec {
            k,
            delta: 0.0,
            shape: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta <= MAX_DELTA) {
            return Err(Error::validation(format!(
                "perturbation size delta = {} outside [0, {MAX_DELTA}]",
                self.delta
            )));
        }
        for m in &self.shape {
            if m.component != 1 && m.component != 2 {
                return Err(Error::validation("shape component must be 1 or 2"));
            }
            if m.component == 2 && m.x_pow < 2 {
                return Err(Error::validation(format!(
                    "shape term (u-b)^{} (v-c)^{} moves the line of tangencies; vertical terms need order >= 2 in u-b",
                    m.x_pow, m.y_pow
                )));
            }
            if m.coef.abs() > self.delta {
                return Err(Error::validation(format!(
                    "shape coefficient {} exceeds delta = {}",
                    m.coef, self.delta
                )));
            }
        }
        Ok(())
    }

    fn cutoff(fold: &FoldSpec, p: Point) -> (f64, f64, f64) {
        let (px, dpx) = plateau(
            p.x,
            fold.b - V_CORE_HALF_WIDTH,
            fold.b + V_CORE_HALF_WIDTH,
            V_RAMP_X,
        );
        let (py, dpy) = plateau(p.y, fold.c + V_BAND.0, fold.c + V_BAND.1, V_RAMP_Y);
        (px * py, dpx * py, px * dpy)
    }

    pub fn apply(&self, fold: &FoldSpec, p: Point) -> Point {
        let (psi, _, _) = Self::cutoff(fold, p);
        if psi == 0.0 {
            return p;
        }
        let (u, v) = (p.x - fold.b, p.y - fold.c);
        let mut h1 = 0.0;
        let mut h2 = self.k;
        for m in &self.shape {
            match m.component {
                1 => h1 += m.eval(u, v),
                _ => h2 += m.eval(u, v),
            }
        }
        Point {
            x: p.x + psi * h1,
            y: p.y + psi * h2,
        }
    }

    pub fn jacobian(&self, fold: &FoldSpec, p: Point) -> Matrix2<f64> {
        let (psi, dpsi_x, dpsi_y) = Self::cutoff(fold, p);
        if psi == 0.0 && dpsi_x == 0.0 && dpsi_y == 0.0 {
            return Matrix2::identity();
        }
        let (u, v) = (p.x - fold.b, p.y - fold.c);
        let (mut h1, mut h1u, mut h1v) = (0.0, 0.0, 0.0);
        let (mut h2, mut h2u, mut h2v) = (self.k, 0.0, 0.0);
        for m in &self.shape {
            let (e, du, dv) = (m.eval(u, v), m.dx(u, v), m.dy(u, v));
            if m.component == 1 {
                h1 += e;
                h1u += du;
                h1v += dv;
            } else {
                h2 += e;
                h2u += du;
                h2v += dv;
            }
        }
        Matrix2::new(
            1.0 + psi * h1u + dpsi_x * h1,
            psi * h1v + dpsi_y * h1,
            psi * h2u + dpsi_x * h2,
            1.0 + psi * h2v + dpsi_y * h2,
        )
    }
}

mod one_or_many {
    use super::PerturbationSpec;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(PerturbationSpec),
        Many(Vec<PerturbationSpec>),
    }

    pub fn serialize<S: Serializer>(v: &[PerturbationSpec], s: S) -> Result<S::Ok, S::Error> {
        if v.len() == 1 {
            v[0].serialize(s)
        } else {
            v.serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<PerturbationSpec>, D::Error> {
        Ok(match Option::<OneOrMany>::deserialize(d)? {
            None => Vec::new(),
            Some(OneOrMany::One(p)) => vec![p],
            Some(OneOrMany::Many(v)) => v,
        })
    }
}

/// The full model map with its unfolding parameter `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMap {
    #[serde(default)]
    pub saddle: SaddleSpec,
    #[serde(default)]
    pub fold: FoldSpec,
    #[serde(default)]
    pub t: f64,
    /// Offset added to `t` in the fold height.
    #[serde(default)]
    pub baseline: f64,
    /// Perturbations applied after the fold, innermost first.
    #[serde(
        default,
        rename = "perturbation",
        with = "one_or_many",
        skip_serializing_if = "Vec::is_empty"
    )]
    pub perturbations: Vec<PerturbationSpec>,
}

impl Default for ModelMap {
    fn default() -> Self {
        ModelMap {
            saddle: SaddleSpec::default(),
            fold: FoldSpec::default(),
            t: 0.0,
            baseline: 0.0,
            perturbations: Vec::new(),
        }
    }
}

impl ModelMap {
    pub fn validate(&self) -> Result<()> {
        self.saddle.validate()?;
        self.fold.validate()?;
        for p in &self.perturbations {
            p.validate()?;
        }
        Ok(())
    }

    pub fn with_t(&self, t: f64) -> Self {
        ModelMap { t, ..self.clone() }
    }

    /// Fold height parameter `mu = t + baseline`.
    pub fn mu(&self) -> f64 {
        self.t + self.baseline
    }

    /// Net vertical translation of the line of tangencies.
    pub fn total_k(&self) -> f64 {
        self.perturbations.iter().map(|p| p.k).sum()
    }

    pub fn is_exactly_quadratic(&self) -> bool {
        !self.fold.has_remainder() && self.perturbations.iter().all(|p| p.shape.is_empty())
    }

    fn xi(&self, mut p: Point) -> Point {
        for pert in &self.perturbations {
            p = pert.apply(&self.fold, p);
        }
        p
    }

    fn xi_jacobian(&self, mut p: Point) -> Matrix2<f64> {
        let mut j = Matrix2::identity();
        for pert in &self.perturbations {
            j = pert.jacobian(&self.fold, p) * j;
            p = pert.apply(&self.fold, p);
        }
        j
    }

    /// Fold transition followed by the perturbation.
    pub fn transition(&self, p: Point) -> Result<Point> {
        Ok(self.xi(fold_step(&self.fold, self.mu(), p)?))
    }

    pub fn transition_jacobian(&self, p: Point) -> Result<Matrix2<f64>> {
        let jf = self.fold.jacobian(p)?;
        let image = fold_step(&self.fold, self.mu(), p)?;
        Ok(self.xi_jacobian(image) * jf)
    }

    /// Follow `word` through the horseshoe strips.
    pub fn saddle_orbit(&self, word: &Word, p: Point) -> Result<Point> {
        let mut q = p;
        for (j, b) in word.iter().enumerate() {
            if !self.saddle.in_strip(b, q) {
                return Err(Error::Escape {
                    step: j,
                    x: q.x,
                    y: q.y,
                });
            }
            q = self.saddle.step_unchecked(q, b);
        }
        Ok(q)
    }

    /// Period of a point returning through `word` and one fold passage.
    pub fn period(&self, word: &Word) -> usize {
        word.len() + self.fold.transition_iterates
    }
}

/// `word.len()` saddle steps followed by the fold transition.
pub fn return_map(m: &ModelMap, word: &Word, p: Point) -> Result<Point> {
    let q = m.saddle_orbit(word, p)?;
    m.transition(q)
}

/// Derivative of [`return_map`] by the chain rule.
pub fn return_jacobian(m: &ModelMap, word: &Word, p: Point) -> Result<Matrix2<f64>> {
    let mut q = p;
    let mut j = Matrix2::identity();
    for (step, b) in word.iter().enumerate() {
        if !m.saddle.in_strip(b, q) {
            return Err(Error::Escape {
                step,
                x: q.x,
                y: q.y,
            });
        }
        j = m.saddle.step_jacobian(q, b) * j;
        q = m.saddle.step_unchecked(q, b);
    }
    Ok(m.transition_jacobian(q)? * j)
}

/// Returns `m` with `xi` composed after the fold.
pub fn apply_perturbation(m: &ModelMap, xi: PerturbationSpec) -> Result<ModelMap> {
    xi.validate()?;
    let mut out = m.clone();
    out.perturbations.push(xi);
    Ok(out)
}

/// Points of the line of tangencies: for each unstable leaf `x = x0` the image
/// point where the image arc has a horizontal tangent.
pub fn line_of_tangencies(m: &ModelMap, leaves: &[f64]) -> Result<Vec<Point>> {
    leaves.iter().map(|&x0| tangency_point(m, x0)).collect()
}

/// Image-arc vertex of the unstable leaf `x = x0`.
pub fn tangency_point(m: &ModelMap, x0: f64) -> Result<Point> {
    let r = m.fold.domain_radius;
    let slope = |ys: f64| -> f64 {
        m.transition_jacobian(Point::new(x0, m.fold.a + ys))
            .map(|j| j[(1, 1)])
            .unwrap_or(f64::NAN)
    };
    let ys = if m.is_exactly_quadratic() {
        0.0
    } else {
        numeric::find_root(slope, -r, r, 1e-15, 200)
            .map_err(|e| Error::numerical(format!("line of tangencies at leaf x0 = {x0}: {e}")))?
    };
    m.transition(Point::new(x0, m.fold.a + ys))
}

/// Fold coefficients measured by central differences at `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub bound: f64,
    pub within_bounds: bool,
}

pub fn fold_coefficients(m: &ModelMap) -> Result<FoldCoefficients> {
    fold_coefficients_with_bound(m, DEFAULT_COEFFICIENT_BOUND)
}

pub fn fold_coefficients_with_bound(m: &ModelMap, bound: f64) -> Result<FoldCoefficients> {
    let a = m.fold.a;
    let eval = |xs: f64, ys: f64| m.transition(Point::new(SADDLE_X + xs, a + ys));
    // validate the domain once so the closures below cannot fail
    eval(0.0, 0.0)?;
    let h1 = 1e-6;
    let h2 = 1e-4;
    let comp = |xs: f64, ys: f64, k: usize| {
        let p = eval(xs, ys).expect("inside fold domain");
        if k == 0 {
            p.x
        } else {
            p.y
        }
    };
    let alpha = numeric::central_diff(|ys| comp(0.0, ys, 0), 0.0, h1);
    let gamma = numeric::central_diff(|xs| comp(xs, 0.0, 1), 0.0, h1);
    let beta = 0.5 * numeric::second_diff(|ys| comp(0.0, ys, 1), 0.0, h2);
    let ok = |v: f64| v.abs() >= 1.0 / bound && v.abs() <= bound;
    let within_bounds = ok(alpha) && ok(beta) && ok(gamma);
    if !within_bounds {
        log::warn!(
            "fold coefficients (alpha, beta, gamma) = ({alpha}, {beta}, {gamma}) leave [1/{bound}, {bound}]"
        );
    }
    Ok(FoldCoefficients {
        alpha,
        beta,
        gamma,
        bound,
        within_bounds,
    })
}
