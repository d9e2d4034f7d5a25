//! Time propagation of the Lindblad master equation.
//!
//! [`evolve`] integrates `d rho / dt` over `[0, t_final]` with an adaptive
//! embedded Dormand–Prince 5(4) scheme and dense output sampled on a uniform
//! grid, enforcing physicality watchdogs (trace drift, Hermiticity,
//! positivity) on every sampled state. [`simulate`] is the one-stop driver
//! that assembles the model for a given qubit number, applies the Fock
//! truncation policy (doubling the cutoff until the top-level population
//! watchdog passes, for the adaptive policy) and returns the trajectory.

mod dopri5;
pub(crate) mod engine;

use crate::error::{Error, Result};
use crate::liouville::{build_liouvillian, Superoperator};
use crate::model::{
    build_drive_operator, build_static_hamiltonian, initial_state, DissipationConfig, DriveConfig,
    InitialStateSpec, ModelConfig, Scenario,
};
use crate::model::build_collapse_ops;
use crate::space::{reduce_matrix, DensityMatrix, HilbertSpace, Keep};
use crate::sparse::{expect, Csr, C64};
use crate::{linalg, model};
use dopri5::Dopri5;
use engine::{Generator, GeneratorOps, SiteInfo};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Fock-space truncation policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum FockPolicy {
    Fixed {
        n_max: usize,
    },
    /// Start at `start` (default `max(N, 10)`, floored at the initial Fock
    /// number + 3 in the undriven scenario) and double until the maximum
    /// population of the top Fock level stays below `population_eps`.
    Adaptive {
        start: Option<usize>,
        population_eps: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StorageMode {
    /// Store only pre-reduced per-sample data (default; bounds memory for
    /// sweeps at large N).
    Thin,
    /// Store the full density matrix at every sample.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub t_final: f64,
    pub sample_dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub fock_policy: FockPolicy,
    #[serde(default = "default_storage")]
    pub storage: StorageMode,
    /// Samples between rigorous positivity (minimum-eigenvalue) checks;
    /// trace and Hermiticity are checked at every sample regardless.
    #[serde(default = "default_check_stride")]
    pub check_stride: usize,
}

fn default_storage() -> StorageMode {
    StorageMode::Thin
}

fn default_check_stride() -> usize {
    25
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            t_final: 50.0,
            sample_dt: 0.01,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            fock_policy: FockPolicy::Adaptive {
                start: None,
                population_eps: 1e-6,
            },
            storage: StorageMode::Thin,
            check_stride: 25,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0) {
            return Err(Error::InvalidArgument("t_final must be > 0".into()));
        }
        if !(self.sample_dt > 0.0) || self.sample_dt > self.t_final {
            return Err(Error::InvalidArgument(
                "sample_dt must be > 0 and <= t_final".into(),
            ));
        }
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be > 0".into()));
        }
        if self.check_stride == 0 {
            return Err(Error::InvalidArgument("check_stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-sample scalar diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct SampleScalars {
    pub trace_dev: f64,
    pub herm_dev: f64,
    pub top_fock_pop: f64,
    pub purity: f64,
    /// Tr(rho H0), not yet referenced to t = 0.
    pub e_total_raw: f64,
    /// eta(t) Tr(rho (a† + a)).
    pub e_drive_raw: f64,
    /// Present on samples where the rigorous positivity check ran.
    pub min_eig: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum SampleState {
    Thin {
        rho_qub: DensityMatrix,
        rho_cav: DensityMatrix,
    },
    Full(DensityMatrix),
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub scalars: SampleScalars,
    pub state: SampleState,
}

/// Basis metadata carried with a trajectory so that observables can be
/// computed uniformly for the collective engine and the dense oracle.
#[derive(Debug, Clone)]
pub struct TrajectoryMeta {
    pub factor_dims: (usize, usize),
    /// Collective Jz eigenvalue per matter basis index.
    pub matter_jz: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvolveStats {
    pub n_steps: usize,
    pub n_rejected: usize,
    pub n_rhs: usize,
    pub wall_secs: f64,
    pub n_coords: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    samples: Vec<Sample>,
    meta: TrajectoryMeta,
    stats: EvolveStats,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn meta(&self) -> &TrajectoryMeta {
        &self.meta
    }

    pub fn stats(&self) -> &EvolveStats {
        &self.stats
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn top_fock_pops(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.scalars.top_fock_pop)
    }
}

/// `true` iff the population of the top Fock level stays below `eps` over
/// the whole trajectory; also returns that maximum population.
pub fn check_fock_convergence(traj: &Trajectory, eps: f64) -> (bool, f64) {
    let max = traj.top_fock_pops().fold(0.0f64, f64::max);
    (max < eps, max)
}

/// Integrate the master equation generated by `l` (plus the optional drive)
/// from `rho0`, sampling on the uniform grid of `sim`.
pub fn evolve(
    rho0: &DensityMatrix,
    l: &Superoperator,
    drive: Option<&DriveConfig>,
    sim: &SimulationConfig,
) -> Result<Trajectory> {
    let site = SiteInfo::for_space(l.space());
    let ops = GeneratorOps {
        h0: l.h0().matrix(),
        drive_op: l.drive_op().matrix(),
        collapse: l.collapse_ops().iter().map(|o| o.matrix()).collect(),
    };
    evolve_generic(rho0, &ops, &site, drive, sim)
}

const MAX_SITE_DIM: usize = 4096;
const MAX_COORDS: usize = 4_000_000;

pub(crate) fn evolve_generic(
    rho0: &DensityMatrix,
    ops: &GeneratorOps,
    site: &SiteInfo,
    drive: Option<&DriveConfig>,
    sim: &SimulationConfig,
) -> Result<Trajectory> {
    sim.validate()?;
    let d = site.dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "initial state dimension {} does not match generator dimension {d}",
            rho0.dim()
        )));
    }
    if d > MAX_SITE_DIM {
        return Err(Error::Resource(format!(
            "space dimension {d} exceeds the propagation budget {MAX_SITE_DIM}"
        )));
    }
    // re-validate the input state (it may have been built unchecked)
    if rho0.hermiticity_deviation() > 1e-10 {
        return Err(Error::CorruptedState(
            "initial state is not Hermitian within 1e-10".into(),
        ));
    }
    let tr0 = rho0.trace();
    if (tr0.re - 1.0).abs() > 1e-8 || tr0.im.abs() > 1e-8 {
        return Err(Error::CorruptedState(
            "initial state trace deviates from 1 beyond 1e-8".into(),
        ));
    }

    let wall_start = std::time::Instant::now();
    let gen = Generator::build(ops, site, drive.copied(), rho0.matrix());
    if gen.coords.len() > MAX_COORDS {
        return Err(Error::Resource(format!(
            "{} stored matrix coordinates exceed the budget {MAX_COORDS}",
            gen.coords.len()
        )));
    }
    let n_coords = gen.coords.len();

    let n_intervals = ((sim.t_final / sim.sample_dt).round() as usize).max(1);
    let times: Vec<f64> = (0..=n_intervals).map(|k| k as f64 * sim.sample_dt).collect();
    let t_end = times[n_intervals];

    let mut rec = Recorder {
        site,
        h0: ops.h0,
        drive_op: ops.drive_op,
        drive: drive.copied(),
        storage: sim.storage,
        check_stride: sim.check_stride,
        last_index: n_intervals,
        warm: Vec::new(),
        full_buf: Array2::zeros((d, d)),
        samples: Vec::with_capacity(times.len()),
    };

    let y0 = gen.gather(rho0.matrix());
    let mut integ = Dopri5::new(gen, y0, sim.rel_tol, sim.abs_tol);
    rec.record(0, times[0], integ.y(), &integ.sys)?;

    let mut ks = 1usize;
    let mut buf = vec![C64::new(0.0, 0.0); n_coords];
    while integ.t() < t_end - 1e-12 && ks <= n_intervals {
        let next_sample = times[ks];
        let res = integ
            .step(t_end, next_sample)
            .map_err(|e| Error::Integration {
                time: e.time,
                what: e.what,
            })?;
        let t1 = res.t_new;
        while ks <= n_intervals && times[ks] <= t1 + 1e-12 {
            let ts = times[ks];
            if (ts - t1).abs() <= 1e-12 {
                rec.record(ks, ts, integ.y(), &integ.sys)?;
            } else {
                match &res.dense {
                    Some(dense) => {
                        let theta = (ts - dense.t0) / dense.h;
                        dense.eval(&mut integ.sys, theta, &mut buf);
                        rec.record(ks, ts, &buf, &integ.sys)?;
                    }
                    None => {
                        return Err(Error::Integration {
                            time: ts,
                            what: "sample fell inside a forward-only step".into(),
                        })
                    }
                }
            }
            ks += 1;
        }
    }
    if ks <= n_intervals {
        return Err(Error::Integration {
            time: integ.t(),
            what: "integration stalled before reaching t_final".into(),
        });
    }

    Ok(Trajectory {
        times,
        samples: rec.samples,
        meta: TrajectoryMeta {
            factor_dims: site.factor_dims,
            matter_jz: site.matter_jz.clone(),
        },
        stats: EvolveStats {
            n_steps: integ.n_steps,
            n_rejected: integ.n_rejected,
            n_rhs: integ.n_rhs,
            wall_secs: wall_start.elapsed().as_secs_f64(),
            n_coords,
        },
    })
}

struct Recorder<'a> {
    site: &'a SiteInfo,
    h0: &'a Csr,
    drive_op: &'a Csr,
    drive: Option<DriveConfig>,
    storage: StorageMode,
    check_stride: usize,
    last_index: usize,
    warm: Vec<C64>,
    full_buf: Array2<C64>,
    samples: Vec<Sample>,
}

impl Recorder<'_> {
    fn record(&mut self, ks: usize, t: f64, v: &[C64], gen: &Generator) -> Result<()> {
        gen.scatter(v, &mut self.full_buf);
        let m = &self.full_buf;
        let d = m.nrows();
        let (dm, dc) = self.site.factor_dims;

        let tr: C64 = m.diag().sum();
        let trace_dev = (tr - C64::new(1.0, 0.0)).norm();
        if trace_dev > 1e-8 {
            return Err(Error::PhysicalityFailure {
                time: t,
                what: format!("trace drift {trace_dev:.3e} exceeds 1e-8"),
            });
        }

        let mut herm_dev = 0.0f64;
        for i in 0..d {
            for j in i..d {
                let dev = (m[(i, j)] - m[(j, i)].conj()).norm();
                if dev > herm_dev {
                    herm_dev = dev;
                }
            }
        }
        if herm_dev > 1e-10 {
            return Err(Error::PhysicalityFailure {
                time: t,
                what: format!("hermiticity deviation {herm_dev:.3e} exceeds 1e-10"),
            });
        }

        let mut top_fock_pop = 0.0;
        for mi in 0..dm {
            top_fock_pop += m[(mi * dc + dc - 1, mi * dc + dc - 1)].re;
        }

        let purity = Generator::purity(v);
        let e_total_raw = expect(self.h0, m).re;
        let e_drive_raw = match &self.drive {
            Some(dr) => model::drive_envelope(t, dr) * expect(self.drive_op, m).re,
            None => 0.0,
        };

        let min_eig = if ks % self.check_stride == 0 || ks == self.last_index {
            let (lam, ritz) = linalg::min_eigenvalue_lanczos(
                m,
                if self.warm.is_empty() {
                    None
                } else {
                    Some(&self.warm)
                },
                1e-9,
            );
            if !ritz.is_empty() {
                self.warm = ritz;
            }
            if lam < -1e-6 {
                return Err(Error::PhysicalityFailure {
                    time: t,
                    what: format!("negativity: min eigenvalue {lam:.3e} below -1e-6"),
                });
            }
            Some(lam)
        } else {
            None
        };

        let state = match self.storage {
            StorageMode::Thin => {
                let rho_qub = reduce_matrix(m, (dm, dc), Keep::Qubits);
                let rho_cav = reduce_matrix(m, (dm, dc), Keep::Cavity);
                SampleState::Thin {
                    rho_qub: DensityMatrix::new_unchecked(rho_qub, (dm, 1))?,
                    rho_cav: DensityMatrix::new_unchecked(rho_cav, (dc, 1))?,
                }
            }
            StorageMode::Full => {
                SampleState::Full(DensityMatrix::new_unchecked(m.clone(), (dm, dc))?)
            }
        };

        self.samples.push(Sample {
            scalars: SampleScalars {
                trace_dev,
                herm_dev,
                top_fock_pop,
                purity,
                e_total_raw,
                e_drive_raw,
                min_eig,
            },
            state,
        });
        Ok(())
    }
}

/// A complete single-point problem: model, dissipation, scenario, grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationProblem {
    pub n_qubits: usize,
    pub model: ModelConfig,
    pub drive: Option<DriveConfig>,
    pub dissipation: DissipationConfig,
    pub initial: InitialStateSpec,
    pub sim: SimulationConfig,
}

#[derive(Debug)]
pub struct SimulationRun {
    pub space: HilbertSpace,
    pub liouvillian: Superoperator,
    pub trajectory: Trajectory,
    pub fock_converged: bool,
    pub max_top_fock_pop: f64,
    pub n_max_used: usize,
}

/// Build the model at the required Fock cutoff and evolve. Under the
/// adaptive policy the cutoff doubles until the top-level population
/// watchdog passes.
pub fn simulate(p: &SimulationProblem) -> Result<SimulationRun> {
    p.sim.validate()?;
    let n = p.n_qubits;
    let (mut n_max, eps, adaptive) = match p.sim.fock_policy {
        FockPolicy::Fixed { n_max } => (n_max, 1e-6, false),
        FockPolicy::Adaptive {
            start,
            population_eps,
        } => {
            let mut n0 = start.unwrap_or(n.max(10));
            if p.initial.scenario == Scenario::Undriven {
                n0 = n0.max(p.initial.cavity_fock + 3);
            }
            (n0, population_eps, true)
        }
    };
    let drive = match p.initial.scenario {
        Scenario::Driven => Some(p.drive.unwrap_or_default()),
        Scenario::Undriven => None,
    };

    for _attempt in 0..7 {
        let space = crate::space::make_space(n, n_max)?;
        let h0 = build_static_hamiltonian(space, &p.model);
        let dop = build_drive_operator(space);
        let cs = build_collapse_ops(space, &p.dissipation);
        let l = build_liouvillian(h0, dop, cs)?;
        let rho0 = initial_state(space, &p.initial)?;
        let trajectory = evolve(&rho0, &l, drive.as_ref(), &p.sim)?;
        let (ok, max_pop) = check_fock_convergence(&trajectory, eps);
        if ok || !adaptive {
            return Ok(SimulationRun {
                space,
                liouvillian: l,
                trajectory,
                fock_converged: ok,
                max_top_fock_pop: max_pop,
                n_max_used: n_max,
            });
        }
        n_max *= 2;
        if (n + 1) * (n_max + 1) > MAX_SITE_DIM {
            return Err(Error::Resource(format!(
                "adaptive Fock policy reached cutoff {n_max} beyond the memory budget \
                 (top-level population {max_pop:.3e} still above {eps:.1e})"
            )));
        }
    }
    Err(Error::Resource(
        "adaptive Fock policy did not converge within 7 doublings".into(),
    ))
}

#[cfg(test)]
mod tests;
