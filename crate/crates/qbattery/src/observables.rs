//! Thermodynamic and information-theoretic observables.
//!
//! Stored qubit energy is referenced to the collective ground state, so
//! `e_qub in [0, N omega_q]`. Entropies are von Neumann entropies of the
//! reduced states, in nats. `e_total` is `<H0>` referenced to t = 0;
//! `e_total_drive` additionally includes the instantaneous drive term
//! `eta(t) <a† + a>` (both conventions are exported, the qubit energy is the
//! primary observable for the charging summary).

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::propagator::{SampleState, Trajectory};
use crate::space::{entropy_from_eigenvalues, HilbertSpace};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    /// Qubit energy relative to ground, units of hbar*omega_q.
    pub e_qub: Vec<f64>,
    /// <H0> relative to t=0.
    pub e_total: Vec<f64>,
    /// <H0 + H_drive(t)> relative to t=0.
    pub e_total_drive: Vec<f64>,
    pub s_q: Vec<f64>,
    pub s_c: Vec<f64>,
    pub n_phot: Vec<f64>,
    pub top_fock_pop: Vec<f64>,
    /// Energy capacity N*omega_q of the ensemble (bound for e_qub).
    pub capacity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableSummary {
    /// Largest stored qubit energy.
    pub e_max: f64,
    /// First grid time at which the energy reaches its maximum.
    pub tau: f64,
    /// e_max / tau.
    pub p_max: f64,
    pub s_q_max: f64,
    pub s_c_max: f64,
    pub s_q_final: f64,
    pub s_c_final: f64,
    /// Set when the energy stays at zero for the whole run.
    pub flat_energy: bool,
    /// Maxima of the two total-energy conventions, for the record.
    pub e_max_total: f64,
    pub e_max_total_drive: f64,
}

/// Compute the observable series from a trajectory produced on `space`.
pub fn compute_series(
    traj: &Trajectory,
    space: HilbertSpace,
    model: &ModelConfig,
) -> Result<ObservableSeries> {
    let meta = traj.meta();
    if meta.factor_dims != (space.dicke_dim(), space.fock_dim()) {
        return Err(Error::DimensionMismatch(
            "trajectory was not produced on the given space".into(),
        ));
    }
    series_from_meta(traj, model.omega_q)
}

/// Series computation shared by the collective engine and the dense oracle;
/// the trajectory's basis metadata supplies the Jz spectrum.
pub fn series_from_meta(traj: &Trajectory, omega_q: f64) -> Result<ObservableSeries> {
    let meta = traj.meta();
    let jz = &meta.matter_jz;
    let j_ground = -jz.iter().cloned().fold(f64::INFINITY, f64::min);
    let capacity = omega_q * (jz.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + j_ground);

    let n = traj.len();
    let mut out = ObservableSeries {
        times: traj.times().to_vec(),
        e_qub: Vec::with_capacity(n),
        e_total: Vec::with_capacity(n),
        e_total_drive: Vec::with_capacity(n),
        s_q: Vec::with_capacity(n),
        s_c: Vec::with_capacity(n),
        n_phot: Vec::with_capacity(n),
        top_fock_pop: Vec::with_capacity(n),
        capacity,
    };

    let mut ref_total = 0.0;
    let mut ref_drive = 0.0;
    for (k, (t, sample)) in traj.times().iter().zip(traj.samples()).enumerate() {
        let (rho_qub, rho_cav) = match &sample.state {
            SampleState::Thin { rho_qub, rho_cav } => (rho_qub.clone(), rho_cav.clone()),
            SampleState::Full(dm) => (
                crate::space::partial_trace(dm, crate::space::Keep::Qubits),
                crate::space::partial_trace(dm, crate::space::Keep::Cavity),
            ),
        };

        let mut e = 0.0;
        for (mi, &m) in jz.iter().enumerate() {
            e += m * rho_qub.matrix()[(mi, mi)].re;
        }
        let e_qub = omega_q * (e + j_ground);
        if e_qub < -1e-6 || e_qub > capacity + 1e-6 {
            return Err(Error::CorruptedState(format!(
                "stored energy {e_qub:.6e} outside [0, {capacity:.3}] at t = {t}"
            )));
        }
        out.e_qub.push(e_qub.max(0.0));

        out.s_q.push(entropy_from_eigenvalues(&rho_qub.eigenvalues())?);
        out.s_c.push(entropy_from_eigenvalues(&rho_cav.eigenvalues())?);

        let mut nph = 0.0;
        for nn in 0..rho_cav.dim() {
            nph += nn as f64 * rho_cav.matrix()[(nn, nn)].re;
        }
        out.n_phot.push(nph);
        out.top_fock_pop.push(sample.scalars.top_fock_pop);

        let raw_total = sample.scalars.e_total_raw;
        let raw_drive = raw_total + sample.scalars.e_drive_raw;
        if k == 0 {
            ref_total = raw_total;
            ref_drive = raw_drive;
        }
        out.e_total.push(raw_total - ref_total);
        out.e_total_drive.push(raw_drive - ref_drive);
    }
    Ok(out)
}

/// Reduce a series to the charging figures of merit.
pub fn summarize(series: &ObservableSeries) -> Result<ObservableSummary> {
    if series.times.is_empty() {
        return Err(Error::InsufficientData("empty series".into()));
    }
    let e_max = series.e_qub.iter().cloned().fold(0.0f64, f64::max);
    let s_q_max = series.s_q.iter().cloned().fold(0.0f64, f64::max);
    let s_c_max = series.s_c.iter().cloned().fold(0.0f64, f64::max);
    let s_q_final = *series.s_q.last().unwrap();
    let s_c_final = *series.s_c.last().unwrap();
    let e_max_total = series.e_total.iter().cloned().fold(0.0f64, f64::max);
    let e_max_total_drive = series.e_total_drive.iter().cloned().fold(0.0f64, f64::max);

    if e_max == 0.0 {
        return Ok(ObservableSummary {
            e_max: 0.0,
            tau: 0.0,
            p_max: 0.0,
            s_q_max,
            s_c_max,
            s_q_final,
            s_c_final,
            flat_energy: true,
            e_max_total,
            e_max_total_drive,
        });
    }

    // infimum over the grid: first sample within relative tolerance of the
    // maximum
    let threshold = (1.0 - 1e-9) * e_max;
    let k_tau = series
        .e_qub
        .iter()
        .position(|&e| e >= threshold)
        .expect("maximum exists");
    let tau = series.times[k_tau];
    if tau == 0.0 {
        return Err(Error::DegenerateTiming(format!(
            "energy maximum {e_max:.3e} attained at the initial sample"
        )));
    }
    let p_max = e_max / tau;
    Ok(ObservableSummary {
        e_max,
        tau,
        p_max,
        s_q_max,
        s_c_max,
        s_q_final,
        s_c_final,
        flat_energy: false,
        e_max_total,
        e_max_total_drive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(times: Vec<f64>, e_qub: Vec<f64>) -> ObservableSeries {
        let n = times.len();
        ObservableSeries {
            times,
            e_qub,
            e_total: vec![0.0; n],
            e_total_drive: vec![0.0; n],
            s_q: vec![0.1; n],
            s_c: vec![0.2; n],
            n_phot: vec![0.0; n],
            top_fock_pop: vec![0.0; n],
            capacity: 10.0,
        }
    }

    #[test]
    fn summary_from_simple_series() {
        let s = series(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, 3.0, 2.0]);
        let sum = summarize(&s).unwrap();
        assert_eq!(sum.e_max, 3.0);
        assert_eq!(sum.tau, 2.0);
        assert_eq!(sum.p_max, 1.5);
        assert!(!sum.flat_energy);
        assert!((sum.p_max * sum.tau - sum.e_max).abs() <= 1e-9 * sum.e_max);
    }

    #[test]
    fn flat_energy_flag() {
        let s = series(vec![0.0, 1.0, 2.0], vec![0.0, 0.0, 0.0]);
        let sum = summarize(&s).unwrap();
        assert!(sum.flat_energy);
        assert_eq!(sum.e_max, 0.0);
        assert_eq!(sum.p_max, 0.0);
    }

    #[test]
    fn tie_breaks_to_first_maximum() {
        let s = series(
            vec![0.0, 1.0, 2.0, 3.0, 4.0],
            vec![0.0, 1.0, 5.0, 4.0, 5.0],
        );
        let sum = summarize(&s).unwrap();
        assert_eq!(sum.tau, 2.0);
    }

    #[test]
    fn entropy_maxima_dominate_finals() {
        let mut s = series(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.5]);
        s.s_q = vec![0.0, 0.9, 0.3];
        s.s_c = vec![0.0, 0.8, 0.2];
        let sum = summarize(&s).unwrap();
        assert!(sum.s_q_max >= sum.s_q_final);
        assert!(sum.s_c_max >= sum.s_c_final);
        assert_eq!(sum.s_q_max, 0.9);
        assert_eq!(sum.s_q_final, 0.3);
    }
}
