//! Dense full-Hilbert-space reference engine.
//!
//! Represents the qubits in the full `2^N` product basis (N <= 3) with
//! collective operators built as sums over per-qubit Paulis
//! (`J± = Σ σ±_j`, `Jz = ½ Σ σz_j`), and evolves the joint state with the
//! same propagator and observable definitions as the collective engine.
//! Its only purpose is to validate the symmetric-subspace reduction: with a
//! symmetric initial state and collective collapse operators the dynamics
//! never leave the `J = N/2` sector, so both engines must agree.

use crate::error::{Error, Result};
use crate::model::{Interaction, Scenario};
use crate::observables::{series_from_meta, ObservableSeries};
use crate::propagator::{FockPolicy, SampleState, SimulationProblem, Trajectory};
use crate::space::DensityMatrix;
use crate::sparse::{Csr, C64};
use ndarray::Array2;

/// Full tensor-product space `2^N ⊗ (n_max+1)`, N <= 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FullSpace {
    n_qubits: usize,
    fock_cutoff: usize,
}

impl FullSpace {
    pub fn new(n_qubits: usize, fock_cutoff: usize) -> Result<Self> {
        if !(1..=3).contains(&n_qubits) {
            return Err(Error::InvalidArgument(format!(
                "dense oracle is restricted to n_qubits in 1..=3, got {n_qubits}"
            )));
        }
        if fock_cutoff < 1 {
            return Err(Error::InvalidArgument("fock_cutoff must be >= 1".into()));
        }
        Ok(Self {
            n_qubits,
            fock_cutoff,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn fock_cutoff(&self) -> usize {
        self.fock_cutoff
    }

    pub fn matter_dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_cutoff + 1
    }

    pub fn total_dim(&self) -> usize {
        self.matter_dim() * self.fock_dim()
    }

    /// Collective ladder operator on the matter factor: `J- = Σ σ-_j`.
    pub fn jminus_matter(&self) -> Csr {
        let d = self.matter_dim();
        let mut t = Vec::new();
        for b in 0..d {
            for j in 0..self.n_qubits {
                let bit = 1usize << j;
                if b & bit != 0 {
                    t.push(((b & !bit) as u32, b as u32, C64::new(1.0, 0.0)));
                }
            }
        }
        Csr::from_triplets(d, d, t)
    }

    /// `Jz = ½ Σ σz_j` on the matter factor (diagonal).
    pub fn jz_matter(&self) -> Csr {
        let d = self.matter_dim();
        let diag: Vec<C64> = (0..d)
            .map(|b| C64::new(self.jz_of(b), 0.0))
            .collect();
        Csr::from_diag(&diag)
    }

    pub fn jz_of(&self, basis: usize) -> f64 {
        let ups = (basis as u32).count_ones() as f64;
        ups - self.n_qubits as f64 / 2.0
    }

    fn fock_annihilate(&self) -> Csr {
        let d = self.fock_dim();
        let mut t = Vec::new();
        for n in 1..d {
            t.push(((n - 1) as u32, n as u32, C64::new((n as f64).sqrt(), 0.0)));
        }
        Csr::from_triplets(d, d, t)
    }

    fn embed_matter(&self, m: &Csr) -> Csr {
        m.kron(&Csr::identity(self.fock_dim()))
    }

    fn embed_cavity(&self, f: &Csr) -> Csr {
        Csr::identity(self.matter_dim()).kron(f)
    }

    /// Projector onto the symmetric (J = N/2) sector of the matter factor,
    /// extended by the identity on the cavity.
    pub fn symmetric_projector(&self) -> Csr {
        let n = self.n_qubits;
        let dm = self.matter_dim();
        // Dicke state with k excitations: uniform superposition over all
        // basis states with k bits set, amplitude 1/sqrt(C(N,k))
        let mut p = Csr::zeros(dm, dm);
        for k in 0..=n {
            let members: Vec<usize> =
                (0..dm).filter(|b| (*b as u32).count_ones() as usize == k).collect();
            let amp = 1.0 / (members.len() as f64);
            let mut t = Vec::new();
            for &a in &members {
                for &b in &members {
                    t.push((a as u32, b as u32, C64::new(amp, 0.0)));
                }
            }
            p = p.add(&Csr::from_triplets(dm, dm, t));
        }
        self.embed_matter(&p)
    }
}

pub struct OracleRun {
    pub series: ObservableSeries,
    pub trajectory: Trajectory,
    pub space: FullSpace,
    pub n_max_used: usize,
}

/// Evolve the problem on the full `2^N` space and compute the observable
/// series with the same definitions as the collective engine.
pub fn dense_evolve(p: &SimulationProblem) -> Result<OracleRun> {
    if p.n_qubits > 3 {
        return Err(Error::InvalidArgument(
            "dense oracle refuses n_qubits > 3".into(),
        ));
    }
    p.sim.validate()?;
    let (mut n_max, eps, adaptive) = match p.sim.fock_policy {
        FockPolicy::Fixed { n_max } => (n_max, 1e-6, false),
        FockPolicy::Adaptive {
            start,
            population_eps,
        } => {
            let mut n0 = start.unwrap_or(p.n_qubits.max(10));
            if p.initial.scenario == Scenario::Undriven {
                n0 = n0.max(p.initial.cavity_fock + 3);
            }
            (n0, population_eps, true)
        }
    };

    for _ in 0..7 {
        let run = dense_evolve_fixed(p, n_max)?;
        let max_pop = run
            .trajectory
            .top_fock_pops()
            .fold(0.0f64, f64::max);
        if !adaptive || max_pop < eps {
            return Ok(run);
        }
        n_max *= 2;
    }
    Err(Error::Resource(
        "oracle adaptive Fock policy did not converge within 7 doublings".into(),
    ))
}

fn dense_evolve_fixed(p: &SimulationProblem, n_max: usize) -> Result<OracleRun> {
    let space = FullSpace::new(p.n_qubits, n_max)?;
    let m = &p.model;

    let jm = space.jminus_matter();
    let jp = jm.adjoint();
    let jz = space.jz_matter();
    let a_f = space.fock_annihilate();
    let ad_f = a_f.adjoint();
    let num_f = ad_f.matmul(&a_f);

    let a = space.embed_cavity(&a_f);
    let adag = space.embed_cavity(&ad_f);
    let jm_full = space.embed_matter(&jm);
    let jp_full = space.embed_matter(&jp);
    let jz_full = space.embed_matter(&jz);

    let mut h = space
        .embed_cavity(&num_f)
        .scale(C64::new(m.omega_c, 0.0))
        .add(&jz_full.scale(C64::new(m.omega_q, 0.0)));
    if m.g != 0.0 {
        let co = adag.matmul(&jm_full).add(&a.matmul(&jp_full));
        h = h.add(&co.scale(C64::new(m.g, 0.0)));
        if m.interaction == Interaction::Dicke {
            let cr = adag.matmul(&jp_full).add(&a.matmul(&jm_full));
            h = h.add(&cr.scale(C64::new(m.g, 0.0)));
        }
    }
    let drive_op = a.add(&adag);

    let mut collapse: Vec<Csr> = Vec::new();
    let d = &p.dissipation;
    if d.kappa > 0.0 {
        collapse.push(a.scale(C64::new(d.kappa.sqrt(), 0.0)));
    }
    if d.gamma_minus > 0.0 {
        collapse.push(jm_full.scale(C64::new(d.gamma_minus.sqrt(), 0.0)));
    }
    if d.gamma_z > 0.0 {
        collapse.push(jz_full.scale(C64::new(d.gamma_z.sqrt(), 0.0)));
    }

    // initial state: all qubits down (basis 0), cavity in |n> or vacuum
    let n0 = match p.initial.scenario {
        Scenario::Driven => 0,
        Scenario::Undriven => p.initial.cavity_fock,
    };
    if n0 > n_max {
        return Err(Error::InvalidArgument(format!(
            "cavity_fock = {n0} exceeds fock_cutoff = {n_max}"
        )));
    }
    let dim = space.total_dim();
    let mut rho0 = Array2::<C64>::zeros((dim, dim));
    rho0[(n0, n0)] = C64::new(1.0, 0.0);
    let rho0 = DensityMatrix::new(rho0, (space.matter_dim(), space.fock_dim()))?;

    let drive = match p.initial.scenario {
        Scenario::Driven => Some(p.drive.unwrap_or_default()),
        Scenario::Undriven => None,
    };

    let mut sec = Vec::with_capacity(dim);
    for b in 0..space.matter_dim() {
        let exc = (b as u32).count_ones() as i32;
        for n in 0..space.fock_dim() {
            sec.push(exc + n as i32);
        }
    }
    let site = crate::propagator::engine::SiteInfo {
        sec,
        factor_dims: (space.matter_dim(), space.fock_dim()),
        matter_jz: (0..space.matter_dim()).map(|b| space.jz_of(b)).collect(),
    };
    let ops = crate::propagator::engine::GeneratorOps {
        h0: &h,
        drive_op: &drive_op,
        collapse: collapse.iter().collect(),
    };
    let trajectory =
        crate::propagator::evolve_generic(&rho0, &ops, &site, drive.as_ref(), &p.sim)?;
    let series = series_from_meta(&trajectory, m.omega_q)?;
    Ok(OracleRun {
        series,
        trajectory,
        space,
        n_max_used: n_max,
    })
}

/// The fixed configuration matrix used for engine validation: 2 models x
/// 2 scenarios x 3 dissipation settings at the given qubit number.
pub fn validation_matrix(n_qubits: usize) -> Vec<SimulationProblem> {
    use crate::model::{DissipationConfig, InitialStateSpec, ModelConfig};
    let dissipations = [
        DissipationConfig {
            kappa: 1e-3,
            gamma_minus: 1e-3,
            gamma_z: 1e-3,
        },
        DissipationConfig {
            kappa: 1e-2,
            gamma_minus: 1e-2,
            gamma_z: 0.1,
        },
        DissipationConfig {
            kappa: 1e-3,
            gamma_minus: 1e-3,
            gamma_z: 0.3,
        },
    ];
    let mut out = Vec::new();
    for interaction in [Interaction::Dicke, Interaction::TavisCummings] {
        for driven in [false, true] {
            for diss in dissipations {
                let (initial, n_max) = if driven {
                    (InitialStateSpec::driven(), 12)
                } else {
                    (InitialStateSpec::undriven(n_qubits), n_qubits + 5)
                };
                out.push(SimulationProblem {
                    n_qubits,
                    model: ModelConfig::resonant(interaction, 0.1),
                    drive: None, // default pulse applies in the driven scenario
                    dissipation: diss,
                    initial,
                    sim: crate::propagator::SimulationConfig {
                        t_final: 50.0,
                        sample_dt: 0.05,
                        rel_tol: 1e-9,
                        abs_tol: 1e-11,
                        fock_policy: FockPolicy::Fixed { n_max },
                        storage: crate::propagator::StorageMode::Thin,
                        check_stride: 100,
                    },
                });
            }
        }
    }
    out
}

/// Maximum absolute deviations between the collective engine and the dense
/// oracle over the full series.
#[derive(Debug, Clone, Copy)]
pub struct EngineComparison {
    pub max_e_qub: f64,
    pub max_e_total: f64,
    pub max_s_q: f64,
    pub max_s_c: f64,
    pub max_n_phot: f64,
}

impl EngineComparison {
    pub fn max_dev(&self) -> f64 {
        self.max_e_qub
            .max(self.max_e_total)
            .max(self.max_s_q)
            .max(self.max_s_c)
            .max(self.max_n_phot)
    }
}

/// Run the same problem through both engines and diff the observable series.
pub fn compare_engines(p: &SimulationProblem) -> Result<EngineComparison> {
    let oracle = dense_evolve(p)?;
    let run = crate::propagator::simulate(p)?;
    let series = crate::observables::compute_series(&run.trajectory, run.space, &p.model)?;
    let a = &series;
    let b = &oracle.series;
    if a.times.len() != b.times.len() {
        return Err(Error::DimensionMismatch(
            "engine and oracle produced different sample grids".into(),
        ));
    }
    let maxdev = |x: &[f64], y: &[f64]| {
        x.iter()
            .zip(y)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0f64, f64::max)
    };
    Ok(EngineComparison {
        max_e_qub: maxdev(&a.e_qub, &b.e_qub),
        max_e_total: maxdev(&a.e_total, &b.e_total),
        max_s_q: maxdev(&a.s_q, &b.s_q),
        max_s_c: maxdev(&a.s_c, &b.s_c),
        max_n_phot: maxdev(&a.n_phot, &b.n_phot),
    })
}

/// Maximum population outside the symmetric sector over a full-storage
/// trajectory.
pub fn max_symmetric_leakage(space: &FullSpace, traj: &Trajectory) -> f64 {
    let proj = space.symmetric_projector();
    let mut max = 0.0f64;
    for s in traj.samples() {
        if let SampleState::Full(dm) = &s.state {
            let pop_sym = crate::sparse::expect(&proj, dm.matrix()).re;
            max = max.max((1.0 - pop_sym).max(0.0));
        }
    }
    max
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DissipationConfig, DriveConfig, InitialStateSpec, ModelConfig};
    use crate::propagator::{SimulationConfig, StorageMode};

    fn problem(
        n: usize,
        interaction: Interaction,
        driven: bool,
        diss: DissipationConfig,
        n_max: usize,
    ) -> SimulationProblem {
        SimulationProblem {
            n_qubits: n,
            model: ModelConfig::resonant(interaction, 0.2),
            drive: if driven {
                Some(DriveConfig {
                    eta0: 0.5,
                    sigma: 1.0,
                    t0: 2.0,
                })
            } else {
                None
            },
            dissipation: diss,
            initial: if driven {
                InitialStateSpec::driven()
            } else {
                InitialStateSpec::undriven(n)
            },
            sim: SimulationConfig {
                t_final: 10.0,
                sample_dt: 0.05,
                rel_tol: 1e-9,
                abs_tol: 1e-11,
                fock_policy: FockPolicy::Fixed { n_max },
                storage: StorageMode::Thin,
                check_stride: 50,
            },
        }
    }

    #[test]
    fn refuses_large_n() {
        let p = problem(
            3,
            Interaction::TavisCummings,
            false,
            DissipationConfig::closed(),
            5,
        );
        let mut p4 = p;
        p4.n_qubits = 4;
        assert!(dense_evolve(&p4).is_err());
    }

    #[test]
    fn n1_matches_collective_engine_to_machine_precision() {
        // for N = 1 the symmetric manifold is the full qubit space, so both
        // engines integrate literally the same generator
        let p = problem(
            1,
            Interaction::TavisCummings,
            false,
            DissipationConfig::new(1e-3, 1e-3, 1e-3).unwrap(),
            4,
        );
        let oracle = dense_evolve(&p).unwrap();
        let run = crate::propagator::simulate(&p).unwrap();
        let series =
            crate::observables::compute_series(&run.trajectory, run.space, &p.model).unwrap();
        for k in 0..series.times.len() {
            assert!((series.e_qub[k] - oracle.series.e_qub[k]).abs() < 1e-10);
            assert!((series.s_q[k] - oracle.series.s_q[k]).abs() < 1e-10);
            assert!((series.n_phot[k] - oracle.series.n_phot[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn collective_dynamics_stay_in_symmetric_sector() {
        let mut p = problem(
            2,
            Interaction::Dicke,
            true,
            DissipationConfig::new(1e-2, 1e-2, 0.1).unwrap(),
            6,
        );
        p.sim.storage = StorageMode::Full;
        p.sim.sample_dt = 0.25;
        let oracle = dense_evolve(&p).unwrap();
        let leak = max_symmetric_leakage(&oracle.space, &oracle.trajectory);
        assert!(leak < 1e-10, "leakage {leak}");
    }

    #[test]
    fn n2_engine_equivalence_with_dissipation() {
        let p = problem(
            2,
            Interaction::TavisCummings,
            false,
            DissipationConfig::new(1e-3, 1e-3, 1e-3).unwrap(),
            5,
        );
        let oracle = dense_evolve(&p).unwrap();
        let run = crate::propagator::simulate(&p).unwrap();
        let series =
            crate::observables::compute_series(&run.trajectory, run.space, &p.model).unwrap();
        for k in 0..series.times.len() {
            assert!(
                (series.e_qub[k] - oracle.series.e_qub[k]).abs() < 1e-6,
                "e_qub deviates at sample {k}"
            );
            assert!((series.s_c[k] - oracle.series.s_c[k]).abs() < 1e-6);
        }
    }
}
