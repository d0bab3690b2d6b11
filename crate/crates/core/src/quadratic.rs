//! Fixed points and sinks of the quadratic family `y -> y^2 + mu`, the limit of
//! the renormalized return maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters for which the lower fixed point is attracting.
pub const SINK_WINDOW: (f64, f64) = (-0.75, 0.25);
/// Half of [`SINK_WINDOW`], leaving room for the finite-`n` error of the
/// renormalization.
pub const PROPOSITION_WINDOW: (f64, f64) = (-0.375, 0.125);

const BASIN_TOL: f64 = 1e-9;
const BASIN_MAX_STEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadAnalysis {
    pub mu_hat: f64,
    /// Real fixed points in increasing order.
    pub fixed_points: Vec<f64>,
    /// Multiplier `2 y*` of the lower fixed point.
    pub sink_multiplier: Option<f64>,
}

impl QuadAnalysis {
    /// Lower fixed point `(1 - sqrt(1 - 4 mu)) / 2`.
    pub fn lower_fixed_point(&self) -> Option<f64> {
        self.fixed_points.first().copied()
    }

    pub fn is_sink(&self) -> bool {
        self.sink_multiplier.is_some_and(|m| m.abs() < 1.0)
    }
}

pub fn analyze(mu_hat: f64) -> QuadAnalysis {
    let disc = 1.0 - 4.0 * mu_hat;
    if disc < 0.0 || disc.is_nan() {
        return QuadAnalysis {
            mu_hat,
            fixed_points: Vec::new(),
            sink_multiplier: None,
        };
    }
    let r = disc.sqrt();
    let fixed_points = if r == 0.0 {
        vec![0.5]
    } else {
        vec![(1.0 - r) / 2.0, (1.0 + r) / 2.0]
    };
    QuadAnalysis {
        mu_hat,
        fixed_points,
        sink_multiplier: Some(1.0 - r),
    }
}

pub fn sink_window() -> (f64, f64) {
    SINK_WINDOW
}

/// Parameters `(2k-, 2k+)` for which the sink multiplier has modulus below `rho`.
pub fn eigenvalue_window(rho: f64) -> Result<(f64, f64)> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::validation(format!(
            "rho must lie in (0, 1), got {rho}"
        )));
    }
    Ok((
        (1.0 - (1.0 + rho).powi(2)) / 4.0,
        (1.0 - (1.0 - rho).powi(2)) / 4.0,
    ))
}

/// `(k-, k+)` with `eigenvalue_window(rho) = (2k-, 2k+)`.
pub fn k_bounds(rho: f64) -> Result<(f64, f64)> {
    let (lo, hi) = eigenvalue_window(rho)?;
    Ok((lo / 2.0, hi / 2.0))
}

/// Iterates of `y -> y^2 + mu` needed to come within `1e-9` of the sink, or
/// `None` if that does not happen in `10^4` steps.
pub fn steps_to_sink(mu_hat: f64, y0: f64) -> Option<usize> {
    let target = analyze(mu_hat).lower_fixed_point()?;
    let mut y = y0;
    for step in 0..=BASIN_MAX_STEPS {
        if (y - target).abs() <= BASIN_TOL {
            return Some(step);
        }
        y = y * y + mu_hat;
        if !y.is_finite() {
            return None;
        }
    }
    None
}

/// Fraction of the starting points that are attracted to the sink.
pub fn basin_check(mu_hat: f64, samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 1.0;
    }
    let hits = samples
        .iter()
        .filter(|&&y| steps_to_sink(mu_hat, y).is_some())
        .count();
    hits as f64 / samples.len() as f64
}

/// `count` evenly spaced points strictly inside `(-1/4, 1/4)`.
pub fn basin_samples(count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| -0.25 + 0.5 * (i as f64 + 0.5) / count as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn remark_endpoints() {
        let a = analyze(0.0);
        assert_eq!(a.fixed_points, vec![0.0, 1.0]);
        assert_eq!(a.sink_multiplier, Some(0.0));
        let pd = analyze(-0.75);
        assert_eq!(pd.lower_fixed_point(), Some(-0.5));
        assert_eq!(pd.sink_multiplier, Some(-1.0));
        let sn = analyze(0.25);
        assert_eq!(sn.fixed_points, vec![0.5]);
        assert_eq!(sn.sink_multiplier, Some(1.0));
        assert!(analyze(0.26).fixed_points.is_empty());
    }

    #[test]
    fn window_membership() {
        assert_eq!(sink_window(), (-0.75, 0.25));
        for mu in [-0.74, 0.0, 0.24] {
            assert!(analyze(mu).is_sink());
        }
        assert!(!analyze(-0.76).is_sink());
        assert!(analyze(-0.76).sink_multiplier.unwrap().abs() >= 1.0);
        assert!(analyze(0.26).sink_multiplier.is_none());
    }

    #[test]
    fn eigenvalue_windows() {
        assert_eq!(eigenvalue_window(0.5).unwrap(), (-0.3125, 0.1875));
        let m = analyze(0.18).sink_multiplier.unwrap();
        assert!((m - (1.0 - 0.28f64.sqrt())).abs() < 1e-15 && m < 0.5);
        let (lo, hi) = eigenvalue_window(1.0 - 1e-12).unwrap();
        assert!((lo + 0.75).abs() < 1e-11 && (hi - 0.25).abs() < 1e-11);
        assert!(eigenvalue_window(0.0).is_err());
        assert!(eigenvalue_window(1.0).is_err());
        assert_eq!(k_bounds(0.5).unwrap(), (-0.15625, 0.09375));
        for rho in [0.1, 0.3, 0.5, 0.9] {
            let (lo, hi) = eigenvalue_window(rho).unwrap();
            assert!((analyze(lo).sink_multiplier.unwrap().abs() - rho).abs() < 1e-12);
            assert!((analyze(hi).sink_multiplier.unwrap().abs() - rho).abs() < 1e-12);
        }
    }

    #[test]
    fn multiplier_is_increasing() {
        let mut prev = f64::NEG_INFINITY;
        for i in 1..1000 {
            let mu = -0.75 + i as f64 / 1000.0;
            let m = analyze(mu).sink_multiplier.unwrap();
            assert!(m > prev);
            prev = m;
        }
    }

    #[test]
    fn basin() {
        assert!(steps_to_sink(0.0, 0.249).is_some());
        assert_eq!(steps_to_sink(0.0, 0.0), Some(0));
        assert_eq!(basin_check(0.2, &basin_samples(101)), 1.0);
        assert_eq!(basin_check(-0.7, &basin_samples(101)), 1.0);
        assert_eq!(basin_check(-0.8, &basin_samples(11)), 0.0);
    }
}
