//! Nested parameter windows carrying one more simultaneous sink per stage,
//! plus the persistence and unfolding-survival experiments run on them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cantor::{limit_thickness, stable_cantor_set, unstable_cantor_set};
use crate::error::{Error, Result};
use crate::model::{
    apply_perturbation, fold_coefficients, ModelMap, Monomial, PerturbationSpec, Point, Word,
};
use crate::orbits::{
    continue_orbit, find_periodic, find_sink, EndReason, Multiplier, PeriodicOrbit,
};
use crate::quadratic::{self, PROPOSITION_WINDOW};
use crate::renorm::{
    baseline_height, implicit_height, implicit_height_slope, stable_preimage, unstable_image,
    RenormChart,
};

/// Smallest saddle iterate count accepted for a sink window.
pub const MIN_WINDOW_N: usize = 2;
/// Largest saddle iterate count whose windows are resolved in double
/// precision: `sigma^(2n) * EPSILON` must stay below `1e-5`.
pub const MAX_WINDOW_N: usize = 16;
/// Default slack of the `beta` stability bound.
pub const DEFAULT_EPS: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinkWindow {
    /// Stage number, starting at 1.
    pub index: usize,
    pub n: usize,
    pub word: Word,
    /// Abscissa of the unstable leaf of the tangency.
    pub x0: f64,
    /// Ordinate of the stable leaf of the tangency.
    pub y_s: f64,
    /// Parameter of the homoclinic tangency.
    pub t_center: f64,
    /// Baseline height `nu^(0)`.
    pub nu_zero: f64,
    /// Implicit height `G(0)` at which the window is centred.
    pub nu_mid: f64,
    pub nu_minus: f64,
    pub nu_plus: f64,
    pub t_minus: f64,
    pub t_plus: f64,
    /// Formula width `C = (max sigma)^(-2n) / (8 (1 + eps) beta)`.
    pub width: f64,
    /// Measured slope `dG/dmu_hat` of the implicit height at `mu_hat = 0`.
    pub height_slope: f64,
    pub eps: f64,
    /// Eigenvalue bound used for narrowing, if any.
    pub rho: Option<f64>,
    pub period: usize,
}

impl SinkWindow {
    pub fn t_mid(&self) -> f64 {
        0.5 * (self.t_minus + self.t_plus)
    }

    pub fn t_width(&self) -> f64 {
        self.t_plus - self.t_minus
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.t_width()
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_minus && t <= self.t_plus
    }

    pub fn chart(&self, m: &ModelMap) -> Result<RenormChart> {
        RenormChart::new(m, &self.word)
    }
}

/// Window of parameters for which the return through `word` has a sink
/// whose renormalized parameter stays in the central eighth of the quadratic
/// sink window; optionally narrowed to multipliers below `rho`.
pub fn sink_window(m: &ModelMap, word: &Word, rho: Option<f64>, eps: f64) -> Result<SinkWindow> {
    let n = word.len();
    if n < MIN_WINDOW_N {
        return Err(Error::Precondition(format!(
            "sink window needs n >= {MIN_WINDOW_N}, got {n}; use a larger n"
        )));
    }
    if !(eps >= 0.0) {
        return Err(Error::validation(format!(
            "eps must be nonnegative, got {eps}"
        )));
    }
    let chart = RenormChart::new(m, word)?;
    let beta = chart.beta;
    let sigma_max = m.saddle.uniform_rates().sigma_max;
    let width = sigma_max.powi(-2 * n as i32) / (8.0 * (1.0 + eps) * beta.abs());
    let nu_zero = baseline_height(&chart)?;
    let nu_mid = implicit_height(&chart, 0.0)?;
    let (mut nu_minus, mut nu_plus) = (nu_mid - 0.5 * width, nu_mid + 0.5 * width);
    if let Some(r) = rho {
        let (lo, hi) = quadratic::eigenvalue_window(r)?;
        let (g_lo, g_hi) = (implicit_height(&chart, lo)?, implicit_height(&chart, hi)?);
        nu_minus = nu_minus.max(g_lo.min(g_hi));
        nu_plus = nu_plus.min(g_lo.max(g_hi));
    }
    let t_center = chart.tangency_t(m);
    let c_i = chart.stable_leaf;
    let window = SinkWindow {
        index: 1,
        n,
        word: word.clone(),
        x0: chart.unstable_leaf,
        y_s: c_i,
        t_center,
        nu_zero,
        nu_mid,
        nu_minus,
        nu_plus,
        t_minus: t_center + (nu_minus - c_i),
        t_plus: t_center + (nu_plus - c_i),
        width,
        height_slope: implicit_height_slope(&chart, 0.0)?,
        eps,
        rho,
        period: m.period(word),
    };
    for t in [window.t_minus, window.t_plus] {
        let mu_hat = chart.mu_hat(&m.with_t(t))?;
        if !(mu_hat > PROPOSITION_WINDOW.0 && mu_hat < PROPOSITION_WINDOW.1) {
            return Err(Error::Precondition(format!(
                "window for n = {n} leaves the chart's sink regime (mu_hat = {mu_hat}); use a larger n"
            )));
        }
    }
    Ok(window)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedSink {
    pub stage: usize,
    pub word: Word,
    pub period: usize,
    pub point: Point,
    pub multipliers: [Multiplier; 2],
    pub max_multiplier: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageVerification {
    pub stage: usize,
    pub t: f64,
    pub sinks: Vec<CertifiedSink>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeResult {
    pub rho: f64,
    pub eps: f64,
    pub windows: Vec<SinkWindow>,
    pub t_infinity: f64,
    pub verification: Vec<StageVerification>,
}

impl CascadeResult {
    pub fn final_sinks(&self) -> &[CertifiedSink] {
        self.verification.last().map_or(&[], |v| &v.sinks)
    }
}

/// Newton certification of the sinks of `windows` in the single map `m.with_t(t)`.
pub fn certify_simultaneous(
    m: &ModelMap,
    windows: &[SinkWindow],
    t: f64,
    rho: f64,
) -> Result<Vec<CertifiedSink>> {
    let mt = m.with_t(t);
    let sinks = windows
        .par_iter()
        .map(|w| -> Result<CertifiedSink> {
            let chart = w.chart(&mt)?;
            let orbit = find_sink(&mt, &chart).map_err(|e| {
                Error::numerical(format!(
                    "stage {} sink (word {}) at t = {t}: {e}",
                    w.index, w.word
                ))
            })?;
            if !orbit.is_sink() || orbit.max_modulus() >= rho {
                return Err(Error::numerical(format!(
                    "stage {} orbit (word {}) at t = {t} has multiplier {} (bound {rho})",
                    w.index,
                    w.word,
                    orbit.max_modulus()
                )));
            }
            Ok(CertifiedSink {
                stage: w.index,
                word: w.word.clone(),
                period: orbit.period,
                point: orbit.point,
                multipliers: orbit.multipliers,
                max_multiplier: orbit.max_modulus(),
                residual: orbit.residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for (i, a) in sinks.iter().enumerate() {
        for b in &sinks[i + 1..] {
            if a.point.dist(&b.point) <= 1e-12 {
                return Err(Error::numerical(format!(
                    "sinks of stages {} and {} coincide at t = {t}",
                    a.stage, b.stage
                )));
            }
        }
    }
    Ok(sinks)
}

/// Sinks at `samples` evenly spaced interior parameters of `w`.
pub fn certify_window(
    m: &ModelMap,
    w: &SinkWindow,
    rho: f64,
    samples: usize,
) -> Result<Vec<(f64, PeriodicOrbit)>> {
    (0..samples)
        .into_par_iter()
        .map(|k| {
            let t = w.t_minus + w.t_width() * (k + 1) as f64 / (samples + 1) as f64;
            let mt = m.with_t(t);
            let orbit = find_sink(&mt, &w.chart(&mt)?)?;
            if !orbit.is_sink() || orbit.multipliers[0].modulus() >= rho {
                return Err(Error::numerical(format!(
                    "orbit at t = {t} is not a sink with multipliers below {rho} ({:?})",
                    orbit.multipliers
                )));
            }
            Ok((t, orbit))
        })
        .collect()
}

fn thickness_condition(m: &ModelMap) -> Result<()> {
    let ts = limit_thickness(&stable_cantor_set(m, 8));
    let tu = limit_thickness(&unstable_cantor_set(m, 8)?);
    if !(ts * tu > 1.0) {
        return Err(Error::Precondition(format!(
            "large thickness condition fails: tau(K^s) tau(K^u) = {}",
            ts * tu
        )));
    }
    Ok(())
}

/// Approximate window midpoint, used to discard words before building charts.
fn rough_center(m: &ModelMap, word: &Word) -> f64 {
    let s = &m.saddle;
    let f = &m.fold;
    let x0 = unstable_image(s, word, 0.0);
    let y_s = stable_preimage(s, word, 0.0);
    let lam_n = s.lambda.powi(word.len() as i32);
    let t_tan = y_s - f.c - m.baseline - m.total_k() - f.gamma * x0;
    t_tan + f.a * s.sigma.powi(-(word.len() as i32)) - f.stable_arc_length() * f.gamma * lam_n
}

/// First word (in length, then lexicographic order) whose window lies
/// strictly inside the middle half of `parent`.
fn next_window(
    m: &ModelMap,
    stage: usize,
    parent: (f64, f64),
    min_n: usize,
    periods: &[usize],
    rho: f64,
    eps: f64,
) -> Result<SinkWindow> {
    let w = parent.1 - parent.0;
    let (mid_lo, mid_hi) = (parent.0 + 0.25 * w, parent.1 - 0.25 * w);
    let start = min_n.max(MIN_WINDOW_N);
    for n in start..=MAX_WINDOW_N {
        let period = n + m.fold.transition_iterates;
        if periods.iter().any(|&p| period.is_multiple_of(p)) {
            continue;
        }
        let slack = w + m.saddle.sigma.powi(-(n as i32));
        let found = (0..(1u64 << n)).into_par_iter().find_first(|&bits| {
            let word = Word::from_bits(bits, n);
            let c = rough_center(m, &word);
            if c < mid_lo - slack || c > mid_hi + slack {
                return false;
            }
            match sink_window(m, &word, Some(rho), eps) {
                Ok(sw) => sw.t_minus > mid_lo && sw.t_plus < mid_hi,
                Err(_) => false,
            }
        });
        if let Some(bits) = found {
            return sink_window(m, &Word::from_bits(bits, n), Some(rho), eps);
        }
    }
    Err(Error::numerical(format!(
        "stage {stage}: no tangency window fits the middle half ({mid_lo:e}, {mid_hi:e}) for n in {start}..={MAX_WINDOW_N}; \
         deeper windows are below double-precision resolution"
    )))
}

/// Cascade stages built before the first failure, with the failure if any.
pub fn run_cascade_partial(
    m: &ModelMap,
    sinks: usize,
    rho: f64,
    min_n: &[usize],
    eps: f64,
) -> (CascadeResult, Option<Error>) {
    let mut result = CascadeResult {
        rho,
        eps,
        windows: Vec::new(),
        t_infinity: 0.0,
        verification: Vec::new(),
    };
    if let Err(e) = m.validate().and_then(|_| thickness_condition(m)) {
        return (result, Some(e));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return (
            result,
            Some(Error::validation(format!(
                "rho must lie in (0, 1), got {rho}"
            ))),
        );
    }
    for stage in 1..=sinks {
        let min = min_n.get(stage - 1).copied().unwrap_or(MIN_WINDOW_N);
        let window = if stage == 1 {
            sink_window(m, &Word::zeros(min.max(MIN_WINDOW_N)), Some(rho), eps)
        } else {
            let parent = result.windows.last().expect("stage >= 2");
            let periods: Vec<usize> = result.windows.iter().map(|w| w.period).collect();
            next_window(
                m,
                stage,
                (parent.t_minus, parent.t_plus),
                min,
                &periods,
                rho,
                eps,
            )
        };
        let mut window = match window {
            Ok(w) => w,
            Err(e) => return (result, Some(e)),
        };
        window.index = stage;
        log::info!(
            "stage {stage}: word {} (n = {}), t in [{:e}, {:e}]",
            window.word,
            window.n,
            window.t_minus,
            window.t_plus
        );
        result.windows.push(window);
        let t = result.windows.last().expect("pushed").t_mid();
        match certify_simultaneous(m, &result.windows, t, rho) {
            Ok(s) => {
                result.t_infinity = t;
                result
                    .verification
                    .push(StageVerification { stage, t, sinks: s });
            }
            Err(e) => {
                result.windows.pop();
                return (result, Some(e));
            }
        }
    }
    (result, None)
}

/// The inductive construction with `sinks` stages.
pub fn run_cascade(
    m: &ModelMap,
    sinks: usize,
    rho: f64,
    min_n: &[usize],
    eps: f64,
) -> Result<CascadeResult> {
    match run_cascade_partial(m, sinks, rho, min_n, eps) {
        (r, None) => Ok(r),
        (_, Some(e)) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceTrial {
    pub trial: usize,
    pub perturbation: PerturbationSpec,
    pub continued: Vec<bool>,
    pub max_multipliers: Vec<f64>,
    pub beta: f64,
    pub beta_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceReport {
    pub delta: f64,
    pub eps: f64,
    pub seed: u64,
    pub beta0: f64,
    pub trials: Vec<PersistenceTrial>,
}

impl PersistenceReport {
    pub fn all_continued(&self) -> bool {
        self.trials.iter().all(|t| t.continued.iter().all(|&c| c))
    }

    pub fn beta_within_bounds(&self) -> bool {
        self.trials
            .iter()
            .all(|t| t.beta_ratio > 1.0 - self.eps && t.beta_ratio < 1.0 + self.eps)
    }
}

/// Random perturbation with `k = 0` and every coefficient of modulus at most `delta`.
pub fn random_shape(rng: &mut ChaCha8Rng, delta: f64) -> PerturbationSpec {
    let terms = [
        (1, 0, 1),
        (1, 1, 0),
        (1, 0, 2),
        (1, 2, 0),
        (2, 2, 0),
        (2, 2, 1),
        (2, 3, 0),
    ];
    let shape = terms
        .iter()
        .map(|&(component, x_pow, y_pow)| Monomial {
            component,
            x_pow,
            y_pow,
            coef: if delta > 0.0 {
                rng.random_range(-delta..=delta)
            } else {
                0.0
            },
        })
        .collect();
    PerturbationSpec {
        k: 0.0,
        delta,
        shape,
    }
}

/// Re-certifies every sink of the cascade at `t_infinity` for `trials` random
/// perturbations of size `delta` that keep the line of tangencies in place.
pub fn persistence_experiment(
    result: &CascadeResult,
    m: &ModelMap,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<PersistenceReport> {
    let base = m.with_t(result.t_infinity);
    let beta0 = fold_coefficients(&base)?.beta;
    let sinks = result.final_sinks();
    let rows = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<PersistenceTrial> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64));
            let xi = random_shape(&mut rng, delta);
            let g = apply_perturbation(&base, xi.clone())?;
            let beta = fold_coefficients(&g)?.beta;
            let (continued, max_multipliers) = sinks
                .iter()
                .map(|s| match find_periodic(&g, &s.word, s.point) {
                    Ok(o) => (o.is_sink() && o.max_modulus() < result.rho, o.max_modulus()),
                    Err(_) => (false, f64::NAN),
                })
                .unzip();
            Ok(PersistenceTrial {
                trial,
                perturbation: xi,
                continued,
                max_multipliers,
                beta,
                beta_ratio: beta / beta0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PersistenceReport {
        delta,
        eps: result.eps,
        seed,
        beta0,
        trials: rows,
    })
}

/// Sinks of the cascade that are still sinks after the perturbation `xi`.
pub fn surviving_sinks(
    result: &CascadeResult,
    m: &ModelMap,
    xi: PerturbationSpec,
) -> Result<Vec<bool>> {
    let g = apply_perturbation(&m.with_t(result.t_infinity), xi)?;
    Ok(result
        .final_sinks()
        .iter()
        .map(|s| find_periodic(&g, &s.word, s.point).is_ok_and(|o| o.is_sink()))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRow {
    pub offset: f64,
    pub survivors: Vec<bool>,
    pub count: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalReport {
    pub v: f64,
    pub half_widths: Vec<f64>,
    pub rows: Vec<SurvivalRow>,
}

impl SurvivalReport {
    pub fn is_staircase(&self) -> bool {
        let mut rows: Vec<&SurvivalRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| a.offset.abs().total_cmp(&b.offset.abs()));
        rows.windows(2).all(|w| w[1].count <= w[0].count)
    }
}

/// Continues every cascade sink from `t_infinity` to `t_infinity + v tau`
/// for each offset `tau`.
pub fn survival_under_unfolding(
    result: &CascadeResult,
    m: &ModelMap,
    v: f64,
    offsets: &[f64],
) -> Result<SurvivalReport> {
    if !(v > 0.0) {
        return Err(Error::validation(format!(
            "unfolding velocity must be positive, got {v}"
        )));
    }
    let t0 = result.t_infinity;
    let sinks = result.final_sinks();
    let half_widths: Vec<f64> = result.windows.iter().map(|w| w.half_width()).collect();
    let orbits: Vec<PeriodicOrbit> = sinks
        .iter()
        .map(|s| find_periodic(&m.with_t(t0), &s.word, s.point))
        .collect::<Result<_>>()?;
    let rows = offsets
        .par_iter()
        .map(|&tau| {
            let survivors: Vec<bool> = orbits
                .iter()
                .zip(&half_widths)
                .map(|(o, &hw)| {
                    let shift = v * tau;
                    if shift == 0.0 {
                        return true;
                    }
                    let step = shift.abs().min(0.25 * hw);
                    let path = continue_orbit(|t| m.with_t(t), o, (t0, t0 + shift), step);
                    path.end_reason == EndReason::RangeExhausted && path.last().orbit.is_sink()
                })
                .collect();
            let count = survivors.iter().filter(|&&s| s).count();
            let predicted = half_widths
                .iter()
                .filter(|&&hw| hw > (tau * v).abs())
                .count();
            SurvivalRow {
                offset: tau,
                survivors,
                count,
                predicted,
            }
        })
        .collect();
    Ok(SurvivalReport {
        v,
        half_widths,
        rows,
    })
}

/// `count` offsets spaced logarithmically between `lo` and `hi`.
pub fn log_offsets(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}
