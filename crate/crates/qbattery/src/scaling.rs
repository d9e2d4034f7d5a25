//! Finite-size scaling fits and hardware rate mapping.
//!
//! Scaling exponents come from least-squares lines through
//! `(ln N, ln value)` with one robust outlier pass: residuals of a
//! preliminary ordinary-least-squares fit are centered on their median and
//! normalized by `1.4826 * MAD` (the Gaussian-consistent median absolute
//! deviation); points with `|z| > 2` are discarded before the final fit.
//! A degenerate `MAD = 0` (collinear points) skips the removal.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Fitted exponent (slope in log-log space).
    pub alpha: f64,
    /// Intercept in log-log space (ln of the prefactor).
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points_used: usize,
    pub n_outliers_removed: usize,
    pub observable: String,
    pub regime: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissipationRegime {
    TunedDecay,
    Intermediate,
    DephasingDominated,
}

impl std::fmt::Display for DissipationRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DissipationRegime::TunedDecay => write!(f, "tuned_decay"),
            DissipationRegime::Intermediate => write!(f, "intermediate"),
            DissipationRegime::DephasingDominated => write!(f, "dephasing_dominated"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardwareRates {
    pub t1: f64,
    pub t2: f64,
    pub t_phi: f64,
    pub gamma_minus: f64,
    pub gamma_z: f64,
    /// gamma_z / gamma_minus
    pub ratio: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 0 {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    } else {
        v[n / 2]
    }
}

fn ols(points: &[(f64, f64)]) -> (f64, f64) {
    // centered form for numerical stability
    let n = points.len() as f64;
    let mx: f64 = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my: f64 = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn r_squared(points: &[(f64, f64)], slope: f64, intercept: f64) -> f64 {
    let my = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
        .sum();
    if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    }
}

/// Robust log-log power-law fit of `value ~ N^alpha`.
pub fn fit_power_law(points: &[(f64, f64)], mad_threshold: f64) -> Result<ScalingFit> {
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "power-law fit needs at least 4 points, got {}",
            points.len()
        )));
    }
    for &(n, v) in points {
        if !(n > 0.0) {
            return Err(Error::Domain(format!("non-positive N = {n}")));
        }
        if !(v > 0.0) {
            return Err(Error::Domain(format!(
                "non-positive value {v} at N = {n}: power law undefined"
            )));
        }
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, v)| (n.ln(), v.ln())).collect();

    // preliminary ordinary least squares
    let (slope0, icept0) = ols(&logs);
    let residuals: Vec<f64> = logs
        .iter()
        .map(|&(x, y)| y - (slope0 * x + icept0))
        .collect();
    let med = median(residuals.clone());
    let mad = median(residuals.iter().map(|r| (r - med).abs()).collect());

    // MAD at the round-off floor means the points are collinear; there is
    // nothing meaningful to normalize by, so skip the removal pass.
    let scale = logs.iter().map(|p| p.1.abs()).fold(1.0f64, f64::max);
    let keep: Vec<(f64, f64)> = if mad <= 1e-12 * scale {
        logs.clone()
    } else {
        let sigma = 1.4826 * mad;
        logs.iter()
            .zip(&residuals)
            .filter(|(_, &r)| ((r - med) / sigma).abs() <= mad_threshold)
            .map(|(&p, _)| p)
            .collect()
    };
    if keep.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} points survive outlier removal",
            keep.len()
        )));
    }
    let (slope, intercept) = ols(&keep);
    Ok(ScalingFit {
        alpha: slope,
        intercept,
        r_squared: r_squared(&keep, slope, intercept),
        n_points_used: keep.len(),
        n_outliers_removed: points.len() - keep.len(),
        observable: String::new(),
        regime: String::new(),
    })
}

/// Ratio-based regime classification at decade boundaries.
pub fn classify_regime(gamma_minus: f64, gamma_z: f64) -> Result<DissipationRegime> {
    if !(gamma_minus > 0.0) || !(gamma_z > 0.0) {
        return Err(Error::InvalidArgument(
            "regime classification needs strictly positive rates".into(),
        ));
    }
    let ratio = gamma_z / gamma_minus;
    Ok(if ratio < 10f64.powf(0.5) {
        DissipationRegime::TunedDecay
    } else if ratio < 10f64.powf(1.5) {
        DissipationRegime::Intermediate
    } else {
        DissipationRegime::DephasingDominated
    })
}

/// Map measured coherence times to model rates:
/// `1/T2 = 1/(2 T1) + 1/T_phi`, `gamma- = 2 pi / T1`, `gamma_z = 2 pi / T_phi`.
pub fn hardware_map(t1: f64, t2: f64) -> Result<HardwareRates> {
    if !(t1 > 0.0) || !(t2 > 0.0) {
        return Err(Error::InvalidArgument("T1 and T2 must be > 0".into()));
    }
    if t2 > 2.0 * t1 {
        return Err(Error::UnphysicalCoherence(format!(
            "T2 = {t2} exceeds 2 T1 = {}",
            2.0 * t1
        )));
    }
    let inv_tphi = 1.0 / t2 - 1.0 / (2.0 * t1);
    let two_pi = 2.0 * std::f64::consts::PI;
    let (t_phi, gamma_z) = if inv_tphi <= 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        (1.0 / inv_tphi, two_pi * inv_tphi)
    };
    let gamma_minus = two_pi / t1;
    Ok(HardwareRates {
        t1,
        t2,
        t_phi,
        gamma_minus,
        gamma_z,
        ratio: gamma_z / gamma_minus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain least squares, written independently, for cross-checking the
    /// robust path on clean subsets.
    fn direct_ls(pts: &[(f64, f64)]) -> f64 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0.ln()).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
        let num: f64 = pts
            .iter()
            .map(|p| (p.0.ln() - mx) * (p.1.ln() - my))
            .sum();
        let den: f64 = pts.iter().map(|p| (p.0.ln() - mx).powi(2)).sum();
        num / den
    }

    fn power_points(c: f64, alpha: f64) -> Vec<(f64, f64)> {
        (1..=10)
            .map(|k| {
                let n = (5 * k) as f64;
                (n, c * n.powf(alpha))
            })
            .collect()
    }

    #[test]
    fn exact_power_law_recovered() {
        let fit = fit_power_law(&power_points(3.7, 2.0), 2.0).unwrap();
        assert!((fit.alpha - 2.0).abs() < 1e-12);
        assert_eq!(fit.n_outliers_removed, 0);
        assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn constant_values_give_zero_exponent() {
        let pts: Vec<(f64, f64)> = (1..=8).map(|k| ((5 * k) as f64, 4.2)).collect();
        let fit = fit_power_law(&pts, 2.0).unwrap();
        assert!(fit.alpha.abs() < 1e-12);
    }

    #[test]
    fn gross_outlier_removed_and_slope_recovered() {
        let mut pts = power_points(2.0, 1.0);
        pts[4].1 *= 100.0;
        let fit = fit_power_law(&pts, 2.0).unwrap();
        assert_eq!(fit.n_outliers_removed, 1);
        assert!((fit.alpha - 1.0).abs() < 1e-9, "alpha = {}", fit.alpha);
        // cross-check against an independent direct fit on the clean subset
        let clean: Vec<(f64, f64)> = pts
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != 4)
            .map(|(_, &p)| p)
            .collect();
        assert!((fit.alpha - direct_ls(&clean)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_mad_skips_removal() {
        // exactly collinear: every residual is zero, MAD = 0
        let fit = fit_power_law(&power_points(1.0, 1.5), 2.0).unwrap();
        assert_eq!(fit.n_outliers_removed, 0);
        assert_eq!(fit.n_points_used, 10);
    }

    #[test]
    fn error_paths() {
        assert!(fit_power_law(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)], 2.0).is_err());
        let mut pts = power_points(1.0, 1.0);
        pts[2].1 = 0.0;
        assert!(fit_power_law(&pts, 2.0).is_err());
        pts[2].1 = -1.0;
        assert!(fit_power_law(&pts, 2.0).is_err());
    }

    #[test]
    fn scale_invariance_and_permutation_invariance() {
        let pts = {
            let mut p = power_points(2.0, 1.3);
            // mild deterministic noise so the fit is not exactly collinear
            for (k, q) in p.iter_mut().enumerate() {
                q.1 *= 1.0 + 0.01 * ((k as f64 * 1.7).sin());
            }
            p
        };
        let f1 = fit_power_law(&pts, 2.0).unwrap();
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(n, v)| (n, 7.3 * v)).collect();
        let f2 = fit_power_law(&scaled, 2.0).unwrap();
        assert!((f1.alpha - f2.alpha).abs() < 1e-12);
        assert!((f2.intercept - f1.intercept - 7.3f64.ln()).abs() < 1e-12);

        let mut shuffled = pts.clone();
        shuffled.swap(0, 7);
        shuffled.swap(3, 9);
        let f3 = fit_power_law(&shuffled, 2.0).unwrap();
        assert!((f1.alpha - f3.alpha).abs() < 1e-14);
    }

    #[test]
    fn outlier_filter_is_idempotent_on_clean_data() {
        let mut pts = power_points(1.0, 0.7);
        for (k, q) in pts.iter_mut().enumerate() {
            q.1 *= 1.0 + 0.02 * ((k as f64 * 0.9).cos());
        }
        let fit = fit_power_law(&pts, 2.0).unwrap();
        assert_eq!(fit.n_outliers_removed, 0);
    }

    #[test]
    fn regime_classification() {
        assert_eq!(
            classify_regime(1e-3, 1e-3).unwrap(),
            DissipationRegime::TunedDecay
        );
        assert_eq!(
            classify_regime(1e-2, 0.3).unwrap(),
            DissipationRegime::Intermediate
        );
        assert_eq!(
            classify_regime(1e-3, 0.3).unwrap(),
            DissipationRegime::DephasingDominated
        );
        assert!(classify_regime(0.0, 0.1).is_err());
    }

    #[test]
    fn hardware_map_limits() {
        // pure relaxation: T2 = 2 T1 -> no dephasing
        let hr = hardware_map(1.0, 2.0).unwrap();
        assert_eq!(hr.gamma_z, 0.0);
        assert!(hr.t_phi.is_infinite());

        // T1 = T2 -> 1/T_phi = 1/(2 T1), ratio = 1/2
        let hr = hardware_map(3.0, 3.0).unwrap();
        assert!((hr.t_phi - 6.0).abs() < 1e-12);
        assert!((hr.ratio - 0.5).abs() < 1e-12);

        // T1 = 1 ms, T2 = 2 us -> dephasing dominance at the 1e3 scale
        let hr = hardware_map(1e-3, 2e-6).unwrap();
        let expected_tphi = 1.0 / (1.0 / 2e-6 - 1.0 / 2e-3);
        assert!((hr.t_phi - expected_tphi).abs() / expected_tphi < 1e-12);
        assert!(hr.ratio > 400.0 && hr.ratio < 1000.0, "ratio {}", hr.ratio);

        assert!(hardware_map(1.0, 2.5).is_err());
    }

    #[test]
    fn hardware_map_round_trip() {
        let hr = hardware_map(7.0, 3.0).unwrap();
        let t2_back = 1.0 / (1.0 / (2.0 * hr.t1) + 1.0 / hr.t_phi);
        assert!((t2_back - 3.0).abs() / 3.0 < 1e-12);
    }
}
