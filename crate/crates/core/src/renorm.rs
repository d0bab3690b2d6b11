//! Renormalization chart near a homoclinic tangency and diagnostics of the
//! convergence of the renormalized return maps to `(x, y) -> (y, y^2 + mu)`.

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    return_jacobian, return_map, Branch, ModelMap, Point, SaddleSpec, Word, SADDLE_Y,
};

/// Smallest saddle iterate count for which the chart maps `[-1, 1]^2` into
/// the horseshoe strips and the fold domain.
pub const MIN_N: usize = 1;
const NEWTON_MAX_ITER: usize = 100;
const NEWTON_TOL: f64 = 1e-13;
const STRIP_SLACK: f64 = 1e-12;

/// Products of expansion rates along the orbit of the ordinate `y` under
/// `word`, and their derivative with respect to `y`.
pub fn sigma_product(s: &SaddleSpec, word: &Word, y: f64) -> Result<(f64, f64)> {
    let eta = s.nonlinearity.sigma_slope;
    let (mut prod, mut dprod, mut dy, mut yj) = (1.0, 0.0, 1.0, y);
    for (step, b) in word.iter().enumerate() {
        let (lo, hi) = s.strip(b);
        if !(yj >= lo - STRIP_SLACK && yj <= hi + STRIP_SLACK) {
            return Err(Error::Escape {
                step,
                x: f64::NAN,
                y: yj,
            });
        }
        let o = b.fixed_datum();
        let sj = s.sigma_at(b, yj);
        let dsj = s.sigma * eta * (yj - o).signum() * dy;
        dprod = dprod * sj + prod * dsj;
        prod *= sj;
        dy *= s.sigma * (1.0 + 2.0 * eta * (yj - o).abs());
        yj = o + sj * (yj - o);
    }
    Ok((prod, dprod))
}

/// Products of contraction rates along the orbit of the abscissa `x` under
/// `word`, and their derivative with respect to `x`.
pub fn lambda_product(s: &SaddleSpec, word: &Word, x: f64) -> Result<(f64, f64)> {
    let kappa = s.nonlinearity.lambda_slope;
    let (mut prod, mut dprod, mut dx, mut xj) = (1.0, 0.0, 1.0, x);
    for (step, b) in word.iter().enumerate() {
        if !(-STRIP_SLACK..=1.0 + STRIP_SLACK).contains(&xj) {
            return Err(Error::Escape {
                step,
                x: xj,
                y: f64::NAN,
            });
        }
        let o = b.fixed_datum();
        let lj = s.lambda_at(b, xj);
        let dlj = s.lambda * kappa * (xj - o).signum() * dx;
        dprod = dprod * lj + prod * dlj;
        prod *= lj;
        dx *= s.lambda * (1.0 + 2.0 * kappa * (xj - o).abs());
        xj = o + lj * (xj - o);
    }
    Ok((prod, dprod))
}

/// Ordinate of the stable leaf `B_w^{-1}(y)`: the point whose orbit under
/// `word` lands on `y`.
pub fn stable_preimage(s: &SaddleSpec, word: &Word, y: f64) -> f64 {
    word.iter().rev().fold(y, |acc, b| s.inverse_y(b, acc))
}

/// Abscissa of the unstable leaf `B_w(x)`.
pub fn unstable_image(s: &SaddleSpec, word: &Word, x: f64) -> f64 {
    word.iter().fold(x, |acc, b| s.forward_x(b, acc))
}

/// Change of coordinates and parameter attached to a tangency between the
/// fold image of the unstable leaf `x = x0` and the stable leaf `y = c_i`,
/// with `n = |word|` saddle iterates per return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenormChart {
    pub word: Word,
    pub n: usize,
    /// `sigma^(n)` at the reference point.
    pub sigma_n: f64,
    /// `lambda^(n)` at `x = b`.
    pub lambda_n: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub stable_arc_length: f64,
    /// Ordinate of the point with `x_hat = y_hat = 0`.
    pub y_reference: f64,
    /// Ordinate `c_i` of the stable leaf through the tangency.
    pub stable_leaf: f64,
    /// Abscissa `x0` of the unstable leaf entering the fold.
    pub unstable_leaf: f64,
    saddle: SaddleSpec,
}

impl RenormChart {
    pub fn new(m: &ModelMap, word: &Word) -> Result<Self> {
        let n = word.len();
        if n < MIN_N {
            return Err(Error::Precondition(format!(
                "renormalization chart needs at least {MIN_N} saddle iterates, got {n}"
            )));
        }
        let s = m.saddle;
        let f = &m.fold;
        let stable_leaf = stable_preimage(&s, word, SADDLE_Y);
        let unstable_leaf = unstable_image(&s, word, crate::model::SADDLE_X);
        let mut chart = RenormChart {
            word: word.clone(),
            n,
            sigma_n: s.sigma.powi(n as i32),
            lambda_n: 0.0,
            alpha: f.alpha,
            beta: f.beta,
            gamma: f.gamma,
            a: f.a,
            b: f.b,
            c: f.c,
            stable_arc_length: f.stable_arc_length(),
            y_reference: 0.0,
            stable_leaf,
            unstable_leaf,
            saddle: s,
        };
        chart.lambda_n = lambda_product(&s, word, f.b)?.0;
        chart.y_reference = chart.solve_y(0.0)?;
        chart.sigma_n = sigma_product(&s, word, chart.y_reference)?.0;
        Ok(chart)
    }

    /// `A = a - y(P)`.
    pub fn unstable_offset(&self) -> f64 {
        self.a - SADDLE_Y
    }

    pub fn saddle(&self) -> &SaddleSpec {
        &self.saddle
    }

    fn sigma(&self, y: f64) -> Result<(f64, f64)> {
        sigma_product(&self.saddle, &self.word, y)
    }

    fn lambda(&self, x: f64) -> Result<(f64, f64)> {
        lambda_product(&self.saddle, &self.word, x)
    }

    /// Solves `((y - c_i) s(y)^2 - A s(y)) beta = y_hat` for `y`.
    fn solve_y(&self, y_hat: f64) -> Result<f64> {
        let ci = self.stable_leaf;
        let big_a = self.unstable_offset();
        let s0 = self.sigma_n;
        let mut y = ci + (big_a + y_hat / (self.beta * s0)) / s0;
        if self.saddle.nonlinearity.sigma_slope == 0.0 {
            return Ok(y);
        }
        let target = y_hat / self.beta;
        for _ in 0..NEWTON_MAX_ITER {
            let (s, ds) = self.sigma(y)?;
            let g = (y - ci) * s * s - big_a * s - target;
            let dg = s * s + 2.0 * (y - ci) * s * ds - big_a * ds;
            let step = g / dg;
            y -= step;
            if step.abs() <= NEWTON_TOL * (y - ci).abs().max(f64::MIN_POSITIVE) {
                return Ok(y);
            }
        }
        Err(Error::numerical(format!(
            "implicit chart equation did not converge for y_hat = {y_hat}"
        )))
    }

    /// Relative height `mu_i` of the fold vertex over the stable leaf at the
    /// model's current parameter.
    pub fn relative_height(&self, m: &ModelMap) -> f64 {
        m.fold.c + m.mu() + m.total_k() + m.fold.gamma * self.unstable_leaf - self.stable_leaf
    }

    /// Parameter `t` of `m` at which the relative height equals `mu_i`.
    pub fn t_for_relative_height(&self, m: &ModelMap, mu_i: f64) -> f64 {
        mu_i - (m.fold.c + m.baseline + m.total_k() + m.fold.gamma * self.unstable_leaf
            - self.stable_leaf)
    }

    /// Parameter at which the fold image of `x = x0` is tangent to `y = c_i`.
    pub fn tangency_t(&self, m: &ModelMap) -> f64 {
        self.t_for_relative_height(m, 0.0)
    }

    pub fn hat_coordinates(&self, p: Point) -> Result<(f64, f64)> {
        let (s, _) = self.sigma(p.y)?;
        let x_hat = (p.x - self.b) * s * self.beta / self.alpha;
        let y_hat = ((p.y - self.stable_leaf) * s * s - self.unstable_offset() * s) * self.beta;
        Ok((x_hat, y_hat))
    }

    /// Derivative of `(x_hat, y_hat)` with respect to `(x, y)`.
    pub fn hat_jacobian(&self, p: Point) -> Result<Matrix2<f64>> {
        let (s, ds) = self.sigma(p.y)?;
        let k = self.beta / self.alpha;
        let dy = (s * s + 2.0 * (p.y - self.stable_leaf) * s * ds - self.unstable_offset() * ds)
            * self.beta;
        Ok(Matrix2::new(s * k, (p.x - self.b) * ds * k, 0.0, dy))
    }

    /// Renormalized parameter at `p` for the relative height `mu_i`.
    pub fn mu_hat_at(&self, p: Point, mu_i: f64) -> Result<f64> {
        let (s, _) = self.sigma(p.y)?;
        let (l, _) = self.lambda(p.x)?;
        Ok(self.mu_hat_from_rates(s, l, mu_i))
    }

    fn mu_hat_from_rates(&self, s: f64, l: f64, mu_i: f64) -> f64 {
        (mu_i * s * s + self.stable_arc_length * self.gamma * l * s * s
            - self.unstable_offset() * s)
            * self.beta
    }

    /// Renormalized parameter of `m` at the reference point `(b, y_reference)`.
    pub fn mu_hat(&self, m: &ModelMap) -> Result<f64> {
        self.mu_hat_at(
            Point::new(self.b, self.y_reference),
            self.relative_height(m),
        )
    }

    /// Point with `x_hat = y_hat = 0` for the model's chart.
    pub fn reference_point(&self) -> Point {
        Point::new(self.b, self.y_reference)
    }

    /// Spatial part of the inverse chart.
    pub fn point_from_hat(&self, x_hat: f64, y_hat: f64) -> Result<Point> {
        let y = self.solve_y(y_hat)?;
        let (s, _) = self.sigma(y)?;
        Ok(Point::new(self.b + self.alpha * x_hat / (self.beta * s), y))
    }

    /// Gradient of `mu_hat` along the surface of constant `mu_i`, in hat
    /// coordinates.
    pub fn mu_hat_gradient(&self, p: Point, mu_i: f64) -> Result<(f64, f64)> {
        let (s, ds) = self.sigma(p.y)?;
        let (l, dl) = self.lambda(p.x)?;
        let d = self.stable_arc_length * self.gamma;
        let dmx = d * dl * s * s * self.beta;
        let dmy = (2.0 * (mu_i + d * l) * s - self.unstable_offset()) * ds * self.beta;
        let h = self.hat_jacobian(p)?;
        let hinv = h
            .try_inverse()
            .ok_or_else(|| Error::numerical("singular chart derivative"))?;
        Ok((
            dmx * hinv[(0, 0)] + dmy * hinv[(1, 0)],
            dmx * hinv[(0, 1)] + dmy * hinv[(1, 1)],
        ))
    }
}

/// Forward chart `(x, y, mu_i) -> (x_hat, y_hat, mu_hat)`.
pub fn to_renorm(chart: &RenormChart, (x, y, mu): (f64, f64, f64)) -> Result<(f64, f64, f64)> {
    let (x_hat, y_hat) = chart.hat_coordinates(Point::new(x, y))?;
    let mu_hat = chart.mu_hat_at(Point::new(x, y), mu)?;
    Ok((x_hat, y_hat, mu_hat))
}

/// Inverse chart `(x_hat, y_hat, mu_hat) -> (x, y, mu_i)`.
pub fn from_renorm(
    chart: &RenormChart,
    (x_hat, y_hat, mu_hat): (f64, f64, f64),
) -> Result<(f64, f64, f64)> {
    let p = chart.point_from_hat(x_hat, y_hat)?;
    let (s, _) = chart.sigma(p.y)?;
    let (l, _) = chart.lambda(p.x)?;
    let mu = mu_hat / (chart.beta * s * s) - chart.stable_arc_length * chart.gamma * l
        + chart.unstable_offset() / s;
    Ok((p.x, p.y, mu))
}

/// The return map `f^(n+N)` at fixed parameter, read in hat coordinates.
pub fn renormalized_return(
    m: &ModelMap,
    chart: &RenormChart,
    (x_hat, y_hat): (f64, f64),
) -> Result<(f64, f64)> {
    let p = chart.point_from_hat(x_hat, y_hat)?;
    let q = return_map(m, &chart.word, p)?;
    chart.hat_coordinates(q)
}

/// Derivative of [`renormalized_return`] in hat coordinates.
pub fn renormalized_jacobian(
    m: &ModelMap,
    chart: &RenormChart,
    (x_hat, y_hat): (f64, f64),
) -> Result<Matrix2<f64>> {
    let p = chart.point_from_hat(x_hat, y_hat)?;
    let q = return_map(m, &chart.word, p)?;
    let hp = chart.hat_jacobian(p)?;
    let hq = chart.hat_jacobian(q)?;
    let hp_inv = hp
        .try_inverse()
        .ok_or_else(|| Error::numerical("singular chart derivative"))?;
    Ok(hq * return_jacobian(m, &chart.word, p)? * hp_inv)
}

/// The quadratic limit `(x_hat, y_hat) -> (y_hat, y_hat^2 + mu_hat)`.
pub fn limit_map((_x_hat, y_hat): (f64, f64), mu_hat: f64) -> (f64, f64) {
    (y_hat, y_hat * y_hat + mu_hat)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenormDiagnostics {
    pub n: usize,
    pub c0_deviation: f64,
    pub c1_deviation: f64,
    pub muhat_dx: f64,
    pub muhat_dy: f64,
}

/// Parameter slices on which the flatness of `mu_hat` is sampled.
const FLATNESS_SLICES: [f64; 3] = [-1.0, 0.0, 1.0];

fn grid(points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![0.0];
    }
    (0..points)
        .map(|i| -1.0 + 2.0 * i as f64 / (points - 1) as f64)
        .collect()
}

/// Deviation of the renormalized return from its limit and flatness of the
/// parameter chart on the unit box, for the chart of `word` with the model
/// tuned to `mu_hat = 0` at the reference point.
pub fn diagnostics(m: &ModelMap, word: &Word, points: usize) -> Result<RenormDiagnostics> {
    let chart = RenormChart::new(m, word)?;
    let mu_i0 = mu_i_for(&chart, 0.0)?;
    let tuned = m.with_t(chart.t_for_relative_height(m, mu_i0));
    let mu_hat = chart.mu_hat(&tuned)?;
    let g = grid(points);

    let rows: Vec<(f64, f64)> = g
        .par_iter()
        .map(|&yh| -> Result<(f64, f64)> {
            let (mut c0, mut c1) = (0.0f64, 0.0f64);
            for &xh in &g {
                let (x1, y1) = renormalized_return(&tuned, &chart, (xh, yh))?;
                let (lx, ly) = limit_map((xh, yh), mu_hat);
                c0 = c0.max((x1 - lx).abs()).max((y1 - ly).abs());
                let dt = renormalized_jacobian(&tuned, &chart, (xh, yh))?;
                let dl = Matrix2::new(0.0, 1.0, 0.0, 2.0 * yh);
                c1 = c1.max((dt - dl).abs().max());
            }
            Ok((c0, c1))
        })
        .collect::<Result<_>>()?;
    let c0 = rows.iter().fold(0.0f64, |acc, r| acc.max(r.0));
    let c1 = rows.iter().fold(c0, |acc, r| acc.max(r.1));

    let (dx, dy) = flatness(&chart, &g)?;
    Ok(RenormDiagnostics {
        n: word.len(),
        c0_deviation: c0,
        c1_deviation: c1,
        muhat_dx: dx,
        muhat_dy: dy,
    })
}

fn flatness(chart: &RenormChart, g: &[f64]) -> Result<(f64, f64)> {
    let rows: Vec<(f64, f64)> = g
        .par_iter()
        .map(|&yh| -> Result<(f64, f64)> {
            let (mut sx, mut sy) = (0.0f64, 0.0f64);
            for &slice in &FLATNESS_SLICES {
                for &xh in g {
                    let (x, y, mu_i) = from_renorm(chart, (xh, yh, slice))?;
                    let (gx, gy) = chart.mu_hat_gradient(Point::new(x, y), mu_i)?;
                    sx = sx.max(gx.abs());
                    sy = sy.max(gy.abs());
                }
            }
            Ok((sx, sy))
        })
        .collect::<Result<_>>()?;
    Ok(rows
        .iter()
        .fold((0.0f64, 0.0f64), |acc, r| (acc.0.max(r.0), acc.1.max(r.1))))
}

/// Relative height giving `mu_hat` at the chart's reference point.
fn mu_i_for(chart: &RenormChart, mu_hat: f64) -> Result<f64> {
    Ok(from_renorm(chart, (0.0, 0.0, mu_hat))?.2)
}

/// [`diagnostics`] along the words `0^n` for `n` in `n_range`.
pub fn convergence_report(
    m: &ModelMap,
    n_range: std::ops::RangeInclusive<usize>,
    points: usize,
) -> Result<Vec<RenormDiagnostics>> {
    n_range
        .map(|n| diagnostics(m, &Word::zeros(n), points))
        .collect()
}

/// The implicit height `G(mu_hat)`: the absolute height `nu` of the fold
/// vertex at which the renormalized parameter equals `mu_hat`, solving
/// `nu = c_i + A / s(nu) + mu_hat s(nu)^-2 / beta - dist gamma lambda^(n)`.
pub fn implicit_height(chart: &RenormChart, mu_hat: f64) -> Result<f64> {
    if !(mu_hat > -2.0 && mu_hat < 2.0) {
        return Err(Error::validation(format!(
            "mu_hat = {mu_hat} outside (-2, 2)"
        )));
    }
    let shift = chart.stable_arc_length * chart.gamma * chart.lambda_n;
    solve_height(chart, mu_hat, shift)
}

/// Baseline height `nu^(0)`: the implicit height equation at `mu_hat = 0`
/// without the contraction term.
pub fn baseline_height(chart: &RenormChart) -> Result<f64> {
    solve_height(chart, 0.0, 0.0)
}

fn solve_height(chart: &RenormChart, mu_hat: f64, shift: f64) -> Result<f64> {
    let big_a = chart.unstable_offset();
    let ci = chart.stable_leaf;
    let rhs = |nu: f64| -> Result<(f64, f64)> {
        let (s, ds) = chart.sigma(nu)?;
        let v = ci + big_a / s + mu_hat / (chart.beta * s * s) - shift;
        let dv = -big_a * ds / (s * s) - 2.0 * mu_hat * ds / (chart.beta * s * s * s);
        Ok((v, dv))
    };
    let mut nu =
        ci + big_a / chart.sigma_n + mu_hat / (chart.beta * chart.sigma_n * chart.sigma_n) - shift;
    for _ in 0..NEWTON_MAX_ITER {
        let (v, dv) = rhs(nu)?;
        let step = (nu - v) / (1.0 - dv);
        nu -= step;
        if step.abs() <= NEWTON_TOL * (nu - ci).abs().max(f64::MIN_POSITIVE) {
            return Ok(nu);
        }
    }
    Err(Error::numerical(format!(
        "implicit height equation did not converge at mu_hat = {mu_hat}"
    )))
}

/// Derivative `dG/dmu_hat` by central differences.
pub fn implicit_height_slope(chart: &RenormChart, mu_hat: f64) -> Result<f64> {
    let h = 1e-4;
    Ok((implicit_height(chart, mu_hat + h)? - implicit_height(chart, mu_hat - h)?) / (2.0 * h))
}

/// Branch sequence `0^n`, the returns through the saddle `P0` itself.
pub fn primary_word(n: usize) -> Word {
    Word(vec![Branch::Left; n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Nonlinearity;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn affine() -> ModelMap {
        ModelMap::default()
    }

    fn curved() -> ModelMap {
        ModelMap {
            saddle: SaddleSpec {
                nonlinearity: Nonlinearity {
                    lambda_slope: 0.1,
                    sigma_slope: 0.05,
                },
                ..SaddleSpec::default()
            },
            ..ModelMap::default()
        }
    }

    #[test]
    fn trivial_cancellations() {
        let chart = RenormChart::new(&affine(), &Word::zeros(5)).unwrap();
        let s5 = 2.1f64.powi(5);
        let (xh, _, _) = to_renorm(&chart, (0.5, 0.01, 0.0)).unwrap();
        assert_eq!(xh, 0.0);
        let (_, yh, _) = to_renorm(&chart, (0.4, 0.5 / s5, 0.0)).unwrap();
        assert!(yh.abs() < 1e-12);
    }

    #[test]
    fn inverse_at_origin() {
        let chart = RenormChart::new(&affine(), &Word::zeros(5)).unwrap();
        let s5 = 2.1f64.powi(5);
        let (x, y, mu) = from_renorm(&chart, (0.0, 0.0, 0.0)).unwrap();
        assert_eq!(x, 0.5);
        assert_relative_eq!(y, 0.5 / s5, max_relative = 1e-15);
        assert_relative_eq!(mu, 0.5 / s5 - 0.5 * 0.2f64.powi(5), max_relative = 1e-14);
        assert_relative_eq!(
            mu,
            implicit_height(&chart, 0.0).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in [affine(), curved()] {
            let chart = RenormChart::new(&m, &Word::zeros(5)).unwrap();
            for _ in 0..100 {
                let v: (f64, f64, f64) = (
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                let p = from_renorm(&chart, v).unwrap();
                let back = to_renorm(&chart, p).unwrap();
                assert!((back.0 - v.0).abs() < 1e-12);
                assert!((back.1 - v.1).abs() < 1e-12);
                assert!((back.2 - v.2).abs() < 1e-12);
                let again = from_renorm(&chart, back).unwrap();
                assert!((again.0 - p.0).abs() < 1e-12 && (again.1 - p.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn affine_return_matches_closed_form() {
        let m = affine();
        for n in 4..=9 {
            let chart = RenormChart::new(&m, &Word::zeros(n)).unwrap();
            let tuned = m.with_t(chart.t_for_relative_height(&m, mu_i_for(&chart, -0.15).unwrap()));
            let mu_hat = chart.mu_hat(&tuned).unwrap();
            let coupling = 0.42f64.powi(n as i32);
            for &(xh, yh) in &[(0.0, 0.0), (0.3, -0.2), (-1.0, 1.0), (1.0, 0.7)] {
                let (x1, y1) = renormalized_return(&tuned, &chart, (xh, yh)).unwrap();
                let scale = 1.0 + mu_hat.abs();
                assert!((x1 - yh).abs() < 1e-10 * scale, "n={n}");
                assert!(
                    (y1 - (yh * yh + mu_hat + coupling * xh)).abs() < 1e-10 * scale,
                    "n={n}"
                );
            }
        }
    }

    #[test]
    fn coupling_shrinks_by_lambda_sigma() {
        let m = affine();
        let mut prev = None;
        for n in 4..=9 {
            let chart = RenormChart::new(&m, &Word::zeros(n)).unwrap();
            let tuned = m.with_t(chart.t_for_relative_height(&m, mu_i_for(&chart, 0.0).unwrap()));
            let j = renormalized_jacobian(&tuned, &chart, (0.2, 0.1)).unwrap();
            if let Some(p) = prev {
                assert_relative_eq!(j[(1, 0)] / p, 0.42, max_relative = 1e-9);
            }
            prev = Some(j[(1, 0)]);
        }
    }

    #[test]
    fn origin_is_fixed_at_zero_parameter() {
        let m = affine();
        let chart = RenormChart::new(&m, &Word::zeros(6)).unwrap();
        let tuned = m.with_t(chart.t_for_relative_height(&m, mu_i_for(&chart, 0.0).unwrap()));
        assert!(chart.mu_hat(&tuned).unwrap().abs() < 1e-12);
        let (x1, y1) = renormalized_return(&tuned, &chart, (0.0, 0.0)).unwrap();
        assert!(x1.abs() < 1e-12 && y1.abs() < 1e-10);
    }

    #[test]
    fn limit_map_values() {
        let (a, b) = limit_map((0.3, -0.2), 0.1);
        assert_eq!(a, -0.2);
        assert_relative_eq!(b, 0.14, epsilon = 1e-15);
        assert_eq!(limit_map((0.0, 0.0), 0.0), (0.0, 0.0));
        let mu: f64 = -0.2;
        let ys = (1.0 - (1.0 - 4.0 * mu).sqrt()) / 2.0;
        let (u, v) = limit_map((ys, ys), mu);
        assert_relative_eq!(u, ys);
        assert_relative_eq!(v, ys, epsilon = 1e-15);
    }

    #[test]
    fn affine_deviation_is_geometric() {
        let m = affine();
        for d in convergence_report(&m, 4..=7, 11).unwrap() {
            let exact = 0.42f64.powi(d.n as i32);
            assert!((d.c1_deviation - exact).abs() < 1e-8, "{d:?}");
            assert!((d.c0_deviation - exact).abs() < 1e-8, "{d:?}");
            assert_eq!(d.muhat_dx, 0.0);
            assert_eq!(d.muhat_dy, 0.0);
        }
    }

    #[test]
    fn contraction_nonlinearity_flattens() {
        let m = ModelMap {
            saddle: SaddleSpec {
                nonlinearity: Nonlinearity {
                    lambda_slope: 0.2,
                    sigma_slope: 0.0,
                },
                ..SaddleSpec::default()
            },
            ..ModelMap::default()
        };
        let report = convergence_report(&m, 4..=12, 11).unwrap();
        for w in report.windows(2) {
            assert!(w[1].muhat_dx < w[0].muhat_dx);
            assert!(w[1].c1_deviation < w[0].c1_deviation);
        }
        assert!(report.last().unwrap().muhat_dx < 1e-3);
    }

    #[test]
    fn expansion_nonlinearity_tilts_the_parameter_surface() {
        // the orbit-dependent expansion product makes mu_hat vary with y_hat
        // at a rate that does not decay with n
        let report = convergence_report(&curved(), 4..=10, 11).unwrap();
        let first = report.first().unwrap().muhat_dy;
        let last = report.last().unwrap().muhat_dy;
        assert!(first > 1e-2 && last > 1e-2);
    }

    #[test]
    fn implicit_height_anchors() {
        let chart = RenormChart::new(&affine(), &Word::zeros(5)).unwrap();
        let g0 = implicit_height(&chart, 0.0).unwrap();
        assert!((g0 - 0.0120826).abs() < 1e-7);
        let nu0 = baseline_height(&chart).unwrap();
        assert_relative_eq!(nu0, 0.5 / 2.1f64.powi(5), max_relative = 1e-14);
        assert_relative_eq!(nu0 - g0, 0.5 * 0.2f64.powi(5), max_relative = 1e-9);
        let slope = implicit_height_slope(&chart, 0.0).unwrap();
        assert_relative_eq!(slope, 2.1f64.powi(-10), max_relative = 1e-8);
        assert!(implicit_height(&chart, 2.5).is_err());
    }

    #[test]
    fn implicit_height_is_monotone() {
        for m in [affine(), curved()] {
            let chart = RenormChart::new(&m, &Word::zeros(6)).unwrap();
            let mut prev = f64::NEG_INFINITY;
            for i in 1..40 {
                let mu = -2.0 + 4.0 * i as f64 / 40.0;
                let g = implicit_height(&chart, mu).unwrap();
                assert!(g > prev);
                prev = g;
            }
        }
    }

    #[test]
    fn nonprimary_word_chart() {
        let m = affine();
        let w: Word = "0100".parse().unwrap();
        let chart = RenormChart::new(&m, &w).unwrap();
        assert_relative_eq!(
            chart.stable_leaf,
            (1.0 - 1.0 / 2.1) / 2.1,
            max_relative = 1e-14
        );
        assert_relative_eq!(chart.unstable_leaf, 0.8 * 0.04, max_relative = 1e-14);
        let tuned = m.with_t(chart.t_for_relative_height(&m, mu_i_for(&chart, 0.1).unwrap()));
        let mu_hat = chart.mu_hat(&tuned).unwrap();
        assert_relative_eq!(mu_hat, 0.1, max_relative = 1e-9);
        let (x1, y1) = renormalized_return(&tuned, &chart, (0.5, 0.25)).unwrap();
        assert!((x1 - 0.25).abs() < 1e-9);
        assert!(
            (y1 - (0.0625 + mu_hat + 0.42f64.powi(4) * 0.5)).abs() < 1e-9 * (1.0 + mu_hat.abs())
        );
    }

    #[test]
    fn chart_needs_iterates() {
        assert!(matches!(
            RenormChart::new(&affine(), &Word::zeros(0)),
            Err(Error::Precondition(_))
        ));
    }
}
