//! Periodic orbits of the return maps: Newton solves, multiplier
//! classification and natural-parameter continuation with bifurcation
//! detection.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{return_jacobian, return_map, ModelMap, Point, Word};
use crate::numeric::eigenvalues2;
use crate::quadratic;
use crate::renorm::RenormChart;

/// Distance from modulus one below which a multiplier counts as neutral.
pub const HYPERBOLICITY_TOL: f64 = 1e-9;
pub const NEWTON_MAX_ITER: usize = 50;
/// Residual accepted as a periodic point.
pub const RESIDUAL_TOL: f64 = 1e-10;
const RESIDUAL_TARGET: f64 = 1e-15;
const MAX_DAMPING: usize = 30;
/// Parameter resolution of bifurcation localization.
pub const BISECTION_TOL: f64 = 1e-10;
/// Largest real multiplier at the existence boundary still read as a fold.
const FOLD_MULTIPLIER: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitClass {
    Sink,
    Saddle,
    Source,
    Nonhyperbolic,
}

impl std::fmt::Display for OrbitClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            OrbitClass::Sink => "sink",
            OrbitClass::Saddle => "saddle",
            OrbitClass::Source => "source",
            OrbitClass::Nonhyperbolic => "nonhyperbolic",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    pub re: f64,
    pub im: f64,
}

impl Multiplier {
    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

impl From<Complex64> for Multiplier {
    fn from(z: Complex64) -> Self {
        Multiplier { re: z.re, im: z.im }
    }
}

/// Eigenvalues of `j` ordered by decreasing modulus, and the resulting class.
pub fn classify(j: &Matrix2<f64>) -> (OrbitClass, [Multiplier; 2]) {
    let mut ev = eigenvalues2(j);
    if ev[0].norm() < ev[1].norm() {
        ev.swap(0, 1);
    }
    let (big, small) = (ev[0].norm(), ev[1].norm());
    let class = if big < 1.0 - HYPERBOLICITY_TOL {
        OrbitClass::Sink
    } else if small > 1.0 + HYPERBOLICITY_TOL {
        OrbitClass::Source
    } else if small < 1.0 - HYPERBOLICITY_TOL && big > 1.0 + HYPERBOLICITY_TOL {
        OrbitClass::Saddle
    } else {
        OrbitClass::Nonhyperbolic
    };
    (class, [ev[0].into(), ev[1].into()])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub point: Point,
    pub word: Word,
    /// Saddle iterates plus fold transition iterates.
    pub period: usize,
    /// Ordered by decreasing modulus.
    pub multipliers: [Multiplier; 2],
    pub class: OrbitClass,
    pub residual: f64,
    pub newton_steps: usize,
}

impl PeriodicOrbit {
    pub fn max_modulus(&self) -> f64 {
        self.multipliers[0].modulus()
    }

    pub fn is_sink(&self) -> bool {
        self.class == OrbitClass::Sink
    }
}

fn residual_at(m: &ModelMap, word: &Word, p: Point) -> Result<(Vector2<f64>, f64)> {
    let q = return_map(m, word, p)?;
    let f = Vector2::new(q.x - p.x, q.y - p.y);
    Ok((f, f.norm()))
}

/// Damped Newton iteration on `return_map(p) - p` started at `seed`.
pub fn find_periodic(m: &ModelMap, word: &Word, seed: Point) -> Result<PeriodicOrbit> {
    let mut p = seed;
    let (mut f, mut res) = residual_at(m, word, p)?;
    let mut steps = 0;
    while res > RESIDUAL_TARGET && steps < NEWTON_MAX_ITER {
        let j = return_jacobian(m, word, p)? - Matrix2::identity();
        let Some(delta) = j.lu().solve(&(-f)) else {
            return Err(Error::numerical(format!(
                "singular Newton system at ({}, {})",
                p.x, p.y
            )));
        };
        steps += 1;
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_DAMPING {
            let trial = Point::new(p.x + scale * delta.x, p.y + scale * delta.y);
            if let Ok((ft, rt)) = residual_at(m, word, trial) {
                if rt < res || rt <= RESIDUAL_TARGET {
                    accepted = Some((trial, ft, rt));
                    break;
                }
            }
            scale *= 0.5;
        }
        match accepted {
            Some((trial, ft, rt)) => {
                let stalled = (trial.x - p.x).abs() + (trial.y - p.y).abs()
                    <= 4.0 * f64::EPSILON * (p.x.abs() + p.y.abs());
                p = trial;
                f = ft;
                res = rt;
                if stalled {
                    break;
                }
            }
            None => break,
        }
    }
    if !(res <= RESIDUAL_TOL) {
        return Err(Error::numerical(format!(
            "Newton search for a period-{} orbit did not converge (residual {res:e} after {steps} steps)",
            m.period(word)
        )));
    }
    let (class, multipliers) = classify(&return_jacobian(m, word, p)?);
    Ok(PeriodicOrbit {
        point: p,
        word: word.clone(),
        period: m.period(word),
        multipliers,
        class,
        residual: res,
        newton_steps: steps,
    })
}

/// Seed for the sink of the renormalized map: the lower fixed point of the
/// quadratic family read back through the chart.
pub fn sink_seed(chart: &RenormChart, mu_hat: f64) -> Result<Point> {
    let ys = quadratic::analyze(mu_hat)
        .lower_fixed_point()
        .ok_or_else(|| {
            Error::numerical(format!(
                "quadratic family has no fixed point at mu_hat = {mu_hat}"
            ))
        })?;
    chart.point_from_hat(ys, ys)
}

/// Newton solve for the sink associated with `chart`, seeded through the
/// chart at the model's renormalized parameter.
pub fn find_sink(m: &ModelMap, chart: &RenormChart) -> Result<PeriodicOrbit> {
    let mu_hat = chart.mu_hat(m)?;
    let seed = sink_seed(chart, mu_hat.clamp(-0.75, 0.25))?;
    find_periodic(m, &chart.word, seed)
}

/// Forward-iterates the return map from a point displaced by `offset` in
/// chart coordinates and reports whether it contracts onto the orbit.
pub fn attracts(
    m: &ModelMap,
    chart: &RenormChart,
    orbit: &PeriodicOrbit,
    offset: f64,
    iterations: usize,
) -> Result<bool> {
    let (xh, yh) = chart.hat_coordinates(orbit.point)?;
    let mut p = chart.point_from_hat(xh + offset, yh + offset)?;
    for _ in 0..iterations {
        p = return_map(m, &orbit.word, p)?;
        let (a, b) = chart.hat_coordinates(p)?;
        if (a - xh).abs().max((b - yh).abs()) <= 1e-9 {
            return Ok(true);
        }
    }
    Ok(false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bifurcation {
    /// A real multiplier crosses `+1`.
    SaddleNode,
    /// A real multiplier crosses `-1`.
    PeriodDoubling,
    /// A complex pair crosses the unit circle.
    NeimarkSacker,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum EndReason {
    RangeExhausted,
    MultiplierCrossedOne { t: f64, kind: Bifurcation },
    NewtonFailed { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub t: f64,
    pub orbit: PeriodicOrbit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationPath {
    pub samples: Vec<PathSample>,
    pub end_reason: EndReason,
}

impl ContinuationPath {
    pub fn last(&self) -> &PathSample {
        self.samples.last().expect("paths hold at least one sample")
    }

    /// Whether the sink reached the end of the requested range.
    pub fn completed(&self) -> bool {
        self.end_reason == EndReason::RangeExhausted
    }
}

/// Smallest continuation step as a fraction of the initial one.
const STEP_FLOOR_FRACTION: f64 = 1.0 / (1u64 << 30) as f64;

/// Follows `orbit` along `t -> family(t)` from `t_range.0` to `t_range.1`.
pub fn continue_orbit<F>(
    family: F,
    orbit: &PeriodicOrbit,
    t_range: (f64, f64),
    initial_step: f64,
) -> ContinuationPath
where
    F: Fn(f64) -> ModelMap,
{
    let (t0, t1) = t_range;
    let word = &orbit.word;
    let start = match find_periodic(&family(t0), word, orbit.point) {
        Ok(o) => o,
        Err(_) => {
            return ContinuationPath {
                samples: vec![PathSample {
                    t: t0,
                    orbit: orbit.clone(),
                }],
                end_reason: EndReason::NewtonFailed { t: t0 },
            }
        }
    };
    let mut samples = vec![PathSample {
        t: t0,
        orbit: start,
    }];
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let h_max = initial_step.abs().max(f64::MIN_POSITIVE);
    let floor = h_max * STEP_FLOOR_FRACTION;
    let mut h = h_max;
    let mut t = t0;

    while dir * (t1 - t) > 0.0 {
        let step = h.min(dir * (t1 - t));
        let t_new = if step == dir * (t1 - t) {
            t1
        } else {
            t + dir * step
        };
        let prev = &samples.last().expect("nonempty").orbit;
        match find_periodic(&family(t_new), word, prev.point) {
            Ok(o) if o.max_modulus() < 1.0 || prev.max_modulus() >= 1.0 => {
                t = t_new;
                samples.push(PathSample { t, orbit: o });
                h = (2.0 * h).min(h_max);
            }
            Ok(o) => {
                let (tc, last) = localize(&family, word, (t, prev.clone()), t_new);
                let kind = crossing_kind(&o, &last);
                if last.t != t {
                    samples.push(last);
                }
                return ContinuationPath {
                    samples,
                    end_reason: EndReason::MultiplierCrossedOne { t: tc, kind },
                };
            }
            Err(_) if h > floor => h *= 0.5,
            Err(_) => {
                let (tc, last) = localize(&family, word, (t, prev.clone()), t_new);
                let fold = last.orbit.multipliers[0].im == 0.0
                    && last.orbit.multipliers[0].re > FOLD_MULTIPLIER;
                if last.t != t {
                    samples.push(last);
                }
                let end_reason = if fold {
                    EndReason::MultiplierCrossedOne {
                        t: tc,
                        kind: Bifurcation::SaddleNode,
                    }
                } else {
                    EndReason::NewtonFailed { t: tc }
                };
                return ContinuationPath {
                    samples,
                    end_reason,
                };
            }
        }
    }
    ContinuationPath {
        samples,
        end_reason: EndReason::RangeExhausted,
    }
}

fn crossing_kind(after: &PeriodicOrbit, before: &PathSample) -> Bifurcation {
    let m = if after.max_modulus() >= 1.0 {
        after.multipliers[0]
    } else {
        before.orbit.multipliers[0]
    };
    if m.im != 0.0 {
        Bifurcation::NeimarkSacker
    } else if m.re > 0.0 {
        Bifurcation::SaddleNode
    } else {
        Bifurcation::PeriodDoubling
    }
}

/// Bisection between the last sink sample and a parameter where the sink is
/// gone (lost or no longer attracting). Returns the located parameter and
/// the last sink sample.
fn localize<F>(family: &F, word: &Word, good: (f64, PeriodicOrbit), bad: f64) -> (f64, PathSample)
where
    F: Fn(f64) -> ModelMap,
{
    let (mut a, mut orbit) = good;
    let mut b = bad;
    while (b - a).abs() > BISECTION_TOL {
        let mid = 0.5 * (a + b);
        match find_periodic(&family(mid), word, orbit.point) {
            Ok(o) if o.max_modulus() < 1.0 => {
                a = mid;
                orbit = o;
            }
            _ => b = mid,
        }
    }
    (0.5 * (a + b), PathSample { t: a, orbit })
}
