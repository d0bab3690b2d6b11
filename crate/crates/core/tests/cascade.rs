use std::sync::OnceLock;

use tangencylab::cascade::*;
use tangencylab::model::{ModelMap, PerturbationSpec, Word};
use tangencylab::orbits::{continue_orbit, find_sink, Bifurcation, EndReason};
use tangencylab::Error;

fn two_stage() -> &'static CascadeResult {
    static R: OnceLock<CascadeResult> = OnceLock::new();
    R.get_or_init(|| run_cascade(&ModelMap::default(), 2, 0.5, &[5, 8], DEFAULT_EPS).unwrap())
}

#[test]
fn stage_one_is_the_primary_window() {
    let r = two_stage();
    let w = &r.windows[0];
    assert_eq!(w.word, Word::zeros(5));
    assert_eq!(w.t_center, 0.0);
    let single = run_cascade(&ModelMap::default(), 1, 0.5, &[5], DEFAULT_EPS).unwrap();
    assert_eq!(&single.windows[0], w);
}

#[test]
fn stages_nest_and_certify() {
    let r = two_stage();
    assert_eq!(r.verification.len(), 2);
    for (i, v) in r.verification.iter().enumerate() {
        assert_eq!(v.sinks.len(), i + 1);
        assert!(r.windows[i].contains(v.t));
        assert!(v
            .sinks
            .iter()
            .all(|s| s.max_multiplier < 0.5 && s.residual < 1e-10));
    }
    assert!(r.windows[0].contains(r.t_infinity) && r.windows[1].contains(r.t_infinity));
}

#[test]
fn third_stage_is_below_double_precision() {
    let (r, err) = run_cascade_partial(&ModelMap::default(), 3, 0.5, &[5, 8, 11], DEFAULT_EPS);
    assert_eq!(r.windows.len(), 2);
    match err {
        Some(Error::Numerical(msg)) => assert!(msg.contains("stage 3"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn thin_horseshoe_fails_thickness_precondition() {
    let mut m = ModelMap::default();
    m.saddle.lambda = 0.05;
    m.saddle.sigma = 4.0;
    let (r, err) = run_cascade_partial(&m, 1, 0.5, &[5], DEFAULT_EPS);
    assert!(r.windows.is_empty());
    assert!(matches!(err, Some(Error::Precondition(_))), "{err:?}");
}

#[test]
fn formula_window_is_conservative() {
    let m = ModelMap::default();
    for n in 5..=8 {
        let w = sink_window(&m, &Word::zeros(n), None, 0.0).unwrap();
        let mid = m.with_t(w.t_mid());
        let orbit = find_sink(&mid, &w.chart(&mid).unwrap()).unwrap();
        let up = continue_orbit(
            |t| m.with_t(t),
            &orbit,
            (w.t_mid(), w.t_mid() + 40.0 * w.t_width()),
            w.t_width() / 8.0,
        );
        let down = continue_orbit(
            |t| m.with_t(t),
            &orbit,
            (w.t_mid(), w.t_mid() - 40.0 * w.t_width()),
            w.t_width() / 8.0,
        );
        match (up.end_reason, down.end_reason) {
            (
                EndReason::MultiplierCrossedOne {
                    t: hi,
                    kind: Bifurcation::SaddleNode,
                },
                EndReason::MultiplierCrossedOne {
                    t: lo,
                    kind: Bifurcation::PeriodDoubling,
                },
            ) => assert!(
                lo < w.t_minus && hi > w.t_plus,
                "n = {n}: ({lo}, {hi}) vs {:?}",
                (w.t_minus, w.t_plus)
            ),
            other => panic!("n = {n}: {other:?}"),
        }
    }
}

#[test]
fn rho_narrows_the_window() {
    let m = ModelMap::default();
    let wide = sink_window(&m, &Word::zeros(10), None, 0.0).unwrap();
    let narrow = sink_window(&m, &Word::zeros(10), Some(0.1), 0.0).unwrap();
    assert!(narrow.t_width() < wide.t_width());
    assert!(narrow.t_minus >= wide.t_minus && narrow.t_plus <= wide.t_plus);
    let cert = certify_window(&m, &narrow, 0.1, 5).unwrap();
    assert!(cert.iter().all(|(_, o)| o.max_modulus() < 0.1));
}

#[test]
fn zero_perturbation_keeps_sinks() {
    let r = two_stage();
    let m = ModelMap::default();
    let rep = persistence_experiment(r, &m, 0.0, 2, 1).unwrap();
    for trial in &rep.trials {
        assert!(trial.continued.iter().all(|&c| c));
        assert_eq!(trial.beta_ratio, 1.0);
        for (mm, s) in trial.max_multipliers.iter().zip(r.final_sinks()) {
            assert!((mm - s.max_multiplier).abs() < 1e-12);
        }
    }
}

#[test]
fn small_perturbations_persist() {
    let r = two_stage();
    let rep = persistence_experiment(r, &ModelMap::default(), 1e-3, 20, 11).unwrap();
    assert_eq!(rep.trials.len(), 20);
    assert!(rep.all_continued());
    assert!(rep.beta_within_bounds());
}

#[test]
fn persistence_is_reproducible() {
    let r = two_stage();
    let m = ModelMap::default();
    let a = persistence_experiment(r, &m, 1e-3, 4, 5).unwrap();
    let b = persistence_experiment(r, &m, 1e-3, 4, 5).unwrap();
    assert_eq!(a, b);
}

#[test]
fn shifting_the_tangency_line_destroys_sinks() {
    let r = two_stage();
    let k = r.windows[0].t_width();
    let alive = surviving_sinks(r, &ModelMap::default(), PerturbationSpec::translation(k)).unwrap();
    assert!(alive.iter().any(|&a| !a), "{alive:?}");
}

#[test]
fn survival_staircase() {
    let r = two_stage();
    let offsets = log_offsets(1e-12, 1e-3, 19);
    let rep = survival_under_unfolding(r, &ModelMap::default(), 1.0, &offsets).unwrap();
    assert!(rep.is_staircase());
    for row in &rep.rows {
        assert!(row.count >= row.predicted, "{row:?}");
        assert!(row.count.abs_diff(row.predicted) <= 1, "{row:?}");
    }
    assert_eq!(rep.rows[0].count, 2);
    assert_eq!(rep.rows.last().unwrap().count, 0);
}

#[test]
fn zero_offset_keeps_everything() {
    let r = two_stage();
    let rep = survival_under_unfolding(r, &ModelMap::default(), 1.0, &[0.0]).unwrap();
    assert_eq!(rep.rows[0].count, 2);
    assert!(survival_under_unfolding(r, &ModelMap::default(), 0.0, &[0.0]).is_err());
}

#[test]
fn cascade_json_round_trip() {
    let r = two_stage();
    let s = serde_json::to_string(r).unwrap();
    let back: CascadeResult = serde_json::from_str(&s).unwrap();
    assert_eq!(&back, r);
}
