//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tangencylab::cantor::{
    affine_cantor, gap_trichotomy_to_depth, thickness, CantorApprox, Trichotomy,
};
use tangencylab::cascade::{
    certify_window, log_offsets, persistence_experiment, run_cascade_partial, sink_window,
    survival_under_unfolding, CascadeResult, DEFAULT_EPS,
};
use tangencylab::model::{ModelMap, Word};
use tangencylab::orbits::{continue_orbit, find_sink, EndReason};
use tangencylab::quadratic::analyze;
use tangencylab::renorm::convergence_report;
use tangencylab::Error;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let elapsed = start.elapsed();
    if elapsed > limit {
        o.pass = false;
        o.detail = format!("{}; runtime {:.2?} exceeds {:?}", o.detail, elapsed, limit);
    } else {
        o.detail = format!("{}; runtime {:.2?}", o.detail, elapsed);
    }
    o
}

fn quadratic_anchors() -> Outcome {
    let pd = analyze(-0.75).sink_multiplier.unwrap_or(f64::NAN);
    let sn = analyze(0.25).sink_multiplier.unwrap_or(f64::NAN);
    let pass = (pd + 1.0).abs() <= 1e-12 && (sn - 1.0).abs() <= 1e-12;
    outcome(pass, format!("multiplier at -3/4 = {pd}, at 1/4 = {sn}"))
}

fn renormalization_convergence() -> Outcome {
    let m = ModelMap::default();
    let rows = match convergence_report(&m, 4..=12, 21) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("diagnostics failed: {e}")),
    };
    let lam_sig = m.saddle.lambda * m.saddle.sigma;
    let ga = (m.fold.gamma * m.fold.alpha).abs();
    let worst = rows
        .iter()
        .filter(|r| r.n <= 10)
        .map(|r| (r.c1_deviation - ga * lam_sig.powi(r.n as i32)).abs())
        .fold(0.0, f64::max);
    let monotone = rows
        .windows(2)
        .all(|w| w[1].muhat_dx <= w[0].muhat_dx && w[1].muhat_dy <= w[0].muhat_dy);
    let last = rows.last().expect("n = 12 present");
    let flat = last.muhat_dx < 1e-3 && last.muhat_dy < 1e-3;
    outcome(
        worst <= 1e-8 && monotone && flat,
        format!(
            "max |c1 - |ga|(ls)^n| = {worst:e} (n = 4..10), flatness nonincreasing {monotone}, sups at n = 12: {:e}, {:e}",
            last.muhat_dx, last.muhat_dy
        ),
    )
}

/// Thickness by direct search: for each gap boundary, the bridge extends to
/// the nearest gap at least as long.
fn brute_thickness(k: &CantorApprox) -> f64 {
    let mut tau = f64::INFINITY;
    for g in &k.gaps {
        let len = g.1 - g.0;
        let left = k
            .gaps
            .iter()
            .filter(|h| h.1 <= g.0 && h.1 - h.0 >= len)
            .map(|h| h.1)
            .fold(k.base.0, f64::max);
        let right = k
            .gaps
            .iter()
            .filter(|h| h.0 >= g.1 && h.1 - h.0 >= len)
            .map(|h| h.0)
            .fold(k.base.1, f64::min);
        tau = tau.min((g.0 - left) / len).min((right - g.1) / len);
    }
    tau
}

fn thickness_oracle() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (r, expected) in [(1.0 / 3.0, 1.0), (0.2, 1.0 / 3.0), (0.4, 2.0)] {
        let k = match affine_cantor(r, 8, (0.0, 1.0)) {
            Ok(k) => k,
            Err(e) => return outcome(false, format!("r = {r}: {e}")),
        };
        let swept = thickness(&k).tau;
        let brute = brute_thickness(&k);
        let formula = r / (1.0 - 2.0 * r);
        let ok = (swept - expected).abs() <= 1e-9
            && (brute - formula).abs() <= 1e-9
            && (formula - expected).abs() <= 1e-9;
        pass &= ok;
        parts.push(format!(
            "r = {r:.4}: tau = {swept:.12}, brute = {brute:.12}"
        ));
    }
    outcome(pass, parts.join(", "))
}

fn gap_lemma_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut pairs, mut no_case, mut errors) = (0, 0, 0);
    let mut counts = [0usize; 3];
    while pairs < 1000 {
        let r1: f64 = rng.random_range(0.15..0.45);
        let r2: f64 = rng.random_range(0.15..0.45);
        let (t1, t2) = (r1 / (1.0 - 2.0 * r1), r2 / (1.0 - 2.0 * r2));
        if t1 * t2 <= 1.0 {
            continue;
        }
        let lo1: f64 = rng.random_range(-1.0..1.0);
        let len1: f64 = rng.random_range(0.2..2.0);
        let len2: f64 = rng.random_range(0.2..2.0);
        let lo2: f64 = rng.random_range(lo1 - len2 + 1e-3..lo1 + len1 - 1e-3);
        let (Ok(k1), Ok(k2)) = (
            affine_cantor(r1, 12, (lo1, lo1 + len1)),
            affine_cantor(r2, 12, (lo2, lo2 + len2)),
        ) else {
            errors += 1;
            pairs += 1;
            continue;
        };
        pairs += 1;
        match gap_trichotomy_to_depth(&k1, &k2, 12) {
            Ok(Trichotomy::NoCase { .. }) => no_case += 1,
            Ok(Trichotomy::FirstInGapOfSecond { .. }) => counts[0] += 1,
            Ok(Trichotomy::SecondInGapOfFirst { .. }) => counts[1] += 1,
            Ok(Trichotomy::Intersect { .. }) => counts[2] += 1,
            Err(_) => errors += 1,
        }
    }
    outcome(
        no_case == 0 && errors == 0,
        format!(
            "{pairs} pairs: {} first-in-gap, {} second-in-gap, {} intersect, {no_case} no-case, {errors} errors",
            counts[0], counts[1], counts[2]
        ),
    )
}

fn sink_window_certification() -> Outcome {
    let m = ModelMap::default();
    let w = match sink_window(&m, &Word::zeros(5), None, 0.0) {
        Ok(w) => w,
        Err(e) => return outcome(false, format!("window: {e}")),
    };
    let formula = 1.0 / (8.0 * 2.1f64.powi(10));
    let width_ok = ((w.nu_plus - w.nu_minus) / formula - 1.0).abs() < 1e-12;
    let cert = certify_window(&m, &w, 0.5, 11);
    let worst = cert
        .as_ref()
        .map(|c| c.iter().map(|(_, o)| o.max_modulus()).fold(0.0, f64::max))
        .unwrap_or(f64::NAN);
    let mid = m.with_t(w.t_mid());
    let exits = match find_sink(&mid, &w.chart(&mid).expect("chart at window midpoint")) {
        Ok(orbit) => [
            w.t_mid() + 50.0 * w.t_width(),
            w.t_mid() - 50.0 * w.t_width(),
        ]
        .map(|end| {
            let path = continue_orbit(|t| m.with_t(t), &orbit, (w.t_mid(), end), w.t_width() / 8.0);
            match path.end_reason {
                EndReason::MultiplierCrossedOne { t, .. } => Some(t),
                _ => None,
            }
        }),
        Err(_) => [None, None],
    };
    let outside = matches!(exits, [Some(hi), Some(lo)] if hi > w.t_plus && lo < w.t_minus);
    outcome(
        width_ok && cert.is_ok() && outside,
        format!(
            "width = {:e} (formula {formula:e}), 11 samples certified {} with max multiplier {worst:.4}, \
             exits at {:?} around [{:e}, {:e}]",
            w.nu_plus - w.nu_minus,
            cert.is_ok(),
            exits,
            w.t_minus,
            w.t_plus
        ),
    )
}

fn cascade_criterion(run: &(CascadeResult, Option<Error>)) -> Outcome {
    let (r, err) = run;
    if let Some(e) = err {
        return outcome(false, format!("{} of 4 stages built; {e}", r.windows.len()));
    }
    let nested = r
        .windows
        .windows(2)
        .all(|w| w[1].t_minus > w[0].t_minus && w[1].t_plus < w[0].t_plus);
    let ratios_ok = r.windows.windows(2).all(|w| {
        let predicted = 2.1f64.powi(-2 * (w[1].n as i32 - w[0].n as i32));
        let ratio = w[1].t_width() / w[0].t_width();
        ratio >= predicted / 4.0 && ratio <= predicted * 4.0
    });
    let sinks = r.final_sinks();
    let distinct = sinks.iter().enumerate().all(|(i, a)| {
        sinks[i + 1..]
            .iter()
            .all(|b| a.point.dist(&b.point) > 1e-12)
    });
    let bounded = sinks.iter().all(|s| s.max_multiplier < 0.5);
    outcome(
        nested && ratios_ok && sinks.len() == 4 && distinct && bounded,
        format!(
            "nested {nested}, width ratios {ratios_ok}, {} sinks at t_inf = {}",
            sinks.len(),
            r.t_infinity
        ),
    )
}

fn persistence_criterion(run: &(CascadeResult, Option<Error>), m: &ModelMap) -> Outcome {
    let (r, err) = run;
    let rep = match persistence_experiment(r, m, 1e-3, 20, 7) {
        Ok(rep) => rep,
        Err(e) => return outcome(false, format!("experiment failed: {e}")),
    };
    let full = rep
        .trials
        .iter()
        .filter(|t| t.continued.iter().all(|&c| c))
        .count();
    let detail = format!(
        "{full}/20 trials continue all {} sinks, beta within (1 +- {}): {}",
        r.final_sinks().len(),
        rep.eps,
        rep.beta_within_bounds()
    );
    match err {
        Some(e) => outcome(
            false,
            format!(
                "needs 4 sinks but the cascade stopped at {} ({e}); on those: {detail}",
                r.windows.len()
            ),
        ),
        None => outcome(
            r.final_sinks().len() == 4 && rep.all_continued() && rep.beta_within_bounds(),
            detail,
        ),
    }
}

fn destruction_criterion(run: &(CascadeResult, Option<Error>), m: &ModelMap) -> Outcome {
    let (r, err) = run;
    let offsets = log_offsets(1e-12, 1e-3, 28);
    let rep = match survival_under_unfolding(r, m, 1.0, &offsets) {
        Ok(rep) => rep,
        Err(e) => return outcome(false, format!("experiment failed: {e}")),
    };
    let within = rep
        .rows
        .iter()
        .all(|row| row.count.abs_diff(row.predicted) <= 1);
    let largest = rep.half_widths.iter().copied().fold(0.0, f64::max);
    let beyond = rep
        .rows
        .iter()
        .filter(|row| row.offset > largest)
        .map(|row| row.count)
        .max()
        .unwrap_or(0);
    let detail = format!(
        "staircase nonincreasing {}, counts within 1 of prediction {within}, max survivors beyond largest half-width {largest:e}: {beyond}",
        rep.is_staircase()
    );
    match err {
        Some(e) => outcome(
            false,
            format!(
                "needs 4 sinks but the cascade stopped at {} ({e}); on those: {detail}",
                r.windows.len()
            ),
        ),
        None => outcome(rep.is_staircase() && within && beyond == 0, detail),
    }
}

fn main() {
    let m = ModelMap::default();
    let mut results = vec![
        (
            "quadratic anchors",
            timed(Duration::from_secs(1), quadratic_anchors),
        ),
        (
            "renormalization convergence",
            timed(Duration::from_secs(30), renormalization_convergence),
        ),
        (
            "thickness oracle",
            timed(Duration::from_secs(5), thickness_oracle),
        ),
        (
            "gap lemma suite",
            timed(Duration::from_secs(60), gap_lemma_suite),
        ),
        (
            "sink window certification",
            timed(Duration::from_secs(30), sink_window_certification),
        ),
    ];
    let start = Instant::now();
    let run = run_cascade_partial(&m, 4, 0.5, &[5, 8, 11, 14], DEFAULT_EPS);
    let cascade_time = start.elapsed();
    results.push((
        "cascade",
        timed(
            Duration::from_secs(300).saturating_sub(cascade_time),
            || cascade_criterion(&run),
        ),
    ));
    results.push((
        "persistence",
        timed(Duration::from_secs(300), || persistence_criterion(&run, &m)),
    ));
    results.push((
        "destruction",
        timed(Duration::from_secs(300), || destruction_criterion(&run, &m)),
    ));

    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!(
            "criterion {} ({name}): {}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
