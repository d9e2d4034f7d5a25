//! Model assembly: Hamiltonians, Gaussian drive, collapse operators and
//! initial states.
//!
//! Conventions (natural units, hbar = 1, frequencies in units of omega_q):
//!
//! - `H0 = omega_c a†a + omega_q Jz + g (a† J- + a J+) [+ g (a† J+ + a J-)]`,
//!   the bracketed counter-rotating part present only for the Dicke
//!   interaction. The qubit term `omega_q Jz` has spectrum `m in [-N/2, N/2]`;
//!   stored qubit energy is referenced to the ground value `-omega_q N/2`, so
//!   a fully charged battery stores `N omega_q`.
//! - The drive enters as `eta(t) (a† + a)` with the Gaussian envelope
//!   `eta(t) = eta0 exp(-(t-t0)^2 / (2 sigma^2))`; no carrier.
//! - Collapse operators are collective: `sqrt(kappa) a`, `sqrt(gamma-) J-`,
//!   `sqrt(gammaz) Jz`. Zero-rate channels are omitted.

use crate::error::{Error, Result};
use crate::space::{
    cavity_op, collective_op, CavityKind, CollectiveKind, DensityMatrix, HilbertSpace, Operator,
};
use crate::sparse::C64;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interaction {
    Dicke,
    TavisCummings,
}

impl std::fmt::Display for Interaction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Interaction::Dicke => write!(f, "dicke"),
            Interaction::TavisCummings => write!(f, "tavis_cummings"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Qubits and cavity in their ground states; a Gaussian pulse charges
    /// the battery through the cavity.
    Driven,
    /// Qubits in the collective ground state, cavity prepared in an excited
    /// Fock state.
    Undriven,
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scenario::Driven => write!(f, "driven"),
            Scenario::Undriven => write!(f, "undriven"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub interaction: Interaction,
    pub omega_q: f64,
    pub omega_c: f64,
    pub g: f64,
}

impl ModelConfig {
    pub fn new(interaction: Interaction, omega_q: f64, omega_c: f64, g: f64) -> Result<Self> {
        if omega_q <= 0.0 {
            return Err(Error::InvalidArgument("omega_q must be > 0".into()));
        }
        if omega_c <= 0.0 {
            return Err(Error::InvalidArgument("omega_c must be > 0".into()));
        }
        if g < 0.0 {
            return Err(Error::InvalidArgument("g must be >= 0".into()));
        }
        Ok(Self {
            interaction,
            omega_q,
            omega_c,
            g,
        })
    }

    /// Resonant model in natural units with the given coupling.
    pub fn resonant(interaction: Interaction, g: f64) -> Self {
        Self::new(interaction, 1.0, 1.0, g).expect("g >= 0")
    }

    pub fn detuning(&self) -> f64 {
        self.omega_q - self.omega_c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    /// Amplitude, units of omega_q.
    pub eta0: f64,
    /// Pulse width, units of 1/omega_q.
    pub sigma: f64,
    /// Pulse center, units of 1/omega_q.
    pub t0: f64,
}

impl DriveConfig {
    pub fn new(eta0: f64, sigma: f64, t0: f64) -> Result<Self> {
        if eta0 < 0.0 {
            return Err(Error::InvalidArgument("eta0 must be >= 0".into()));
        }
        if sigma <= 0.0 {
            return Err(Error::InvalidArgument("sigma must be > 0".into()));
        }
        Ok(Self { eta0, sigma, t0 })
    }
}

impl Default for DriveConfig {
    /// Pulse parameters of the charging protocol: amplitude omega_q,
    /// width 2/omega_q, center 5/omega_q.
    fn default() -> Self {
        Self {
            eta0: 1.0,
            sigma: 2.0,
            t0: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipationConfig {
    /// Cavity leakage rate kappa.
    pub kappa: f64,
    /// Collective relaxation rate gamma^-.
    pub gamma_minus: f64,
    /// Collective dephasing rate gamma^z.
    pub gamma_z: f64,
}

impl DissipationConfig {
    pub fn new(kappa: f64, gamma_minus: f64, gamma_z: f64) -> Result<Self> {
        if kappa < 0.0 || gamma_minus < 0.0 || gamma_z < 0.0 {
            return Err(Error::InvalidArgument("rates must be >= 0".into()));
        }
        Ok(Self {
            kappa,
            gamma_minus,
            gamma_z,
        })
    }

    pub fn closed() -> Self {
        Self {
            kappa: 0.0,
            gamma_minus: 0.0,
            gamma_z: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialStateSpec {
    pub scenario: Scenario,
    /// Initial cavity Fock number; used only in the undriven scenario.
    pub cavity_fock: usize,
}

impl InitialStateSpec {
    pub fn driven() -> Self {
        Self {
            scenario: Scenario::Driven,
            cavity_fock: 0,
        }
    }

    /// Undriven with `n` initial photons. The conventional default is
    /// `n = N`, enough quanta to fully invert the ensemble.
    pub fn undriven(cavity_fock: usize) -> Self {
        Self {
            scenario: Scenario::Undriven,
            cavity_fock,
        }
    }
}

/// Gaussian envelope `eta0 exp(-(t-t0)^2 / (2 sigma^2))`.
pub fn drive_envelope(t: f64, d: &DriveConfig) -> f64 {
    let x = (t - d.t0) / d.sigma;
    d.eta0 * (-0.5 * x * x).exp()
}

/// Static Hamiltonian `H0` (everything except the drive).
pub fn build_static_hamiltonian(space: HilbertSpace, m: &ModelConfig) -> Operator {
    let num = cavity_op(space, CavityKind::Number);
    let jz = collective_op(space, CollectiveKind::Jz);
    let a = cavity_op(space, CavityKind::Annihilate);
    let adag = cavity_op(space, CavityKind::Create);
    let jp = collective_op(space, CollectiveKind::JPlus);
    let jm = collective_op(space, CollectiveKind::JMinus);

    let mut h = num
        .matrix()
        .scale(C64::new(m.omega_c, 0.0))
        .add(&jz.matrix().scale(C64::new(m.omega_q, 0.0)));
    if m.g != 0.0 {
        let co_rotating = adag
            .matrix()
            .matmul(jm.matrix())
            .add(&a.matrix().matmul(jp.matrix()));
        h = h.add(&co_rotating.scale(C64::new(m.g, 0.0)));
        if m.interaction == Interaction::Dicke {
            let counter_rotating = adag
                .matrix()
                .matmul(jp.matrix())
                .add(&a.matrix().matmul(jm.matrix()));
            h = h.add(&counter_rotating.scale(C64::new(m.g, 0.0)));
        }
    }
    Operator::new(space, h, true).expect("H0 hermitian by construction")
}

/// The qubit part `omega_q Jz` alone (for stored-energy evaluation).
pub fn build_qubit_hamiltonian(space: HilbertSpace, m: &ModelConfig) -> Operator {
    collective_op(space, CollectiveKind::Jz).scale(m.omega_q)
}

/// Hermitian drive operator `a† + a`; its time dependence is the scalar
/// [`drive_envelope`] supplied at propagation time.
pub fn build_drive_operator(space: HilbertSpace) -> Operator {
    let a = cavity_op(space, CavityKind::Annihilate);
    let adag = cavity_op(space, CavityKind::Create);
    let m = a.matrix().add(adag.matrix());
    Operator::new(space, m, true).expect("a + a† hermitian")
}

/// Collapse operators `{sqrt(kappa) a, sqrt(gamma-) J-, sqrt(gammaz) Jz}`,
/// omitting zero-rate channels.
pub fn build_collapse_ops(space: HilbertSpace, d: &DissipationConfig) -> Vec<Operator> {
    let mut ops = Vec::new();
    if d.kappa > 0.0 {
        ops.push(cavity_op(space, CavityKind::Annihilate).scale(d.kappa.sqrt()));
    }
    if d.gamma_minus > 0.0 {
        ops.push(collective_op(space, CollectiveKind::JMinus).scale(d.gamma_minus.sqrt()));
    }
    if d.gamma_z > 0.0 {
        ops.push(collective_op(space, CollectiveKind::Jz).scale(d.gamma_z.sqrt()));
    }
    ops
}

/// Initial density matrix for the given scenario: collective qubit ground
/// state, cavity either in Fock level `n` (undriven) or vacuum (driven).
pub fn initial_state(space: HilbertSpace, spec: &InitialStateSpec) -> Result<DensityMatrix> {
    let n = match spec.scenario {
        Scenario::Driven => 0,
        Scenario::Undriven => spec.cavity_fock,
    };
    if n > space.fock_cutoff() {
        return Err(Error::InvalidArgument(format!(
            "cavity_fock = {} exceeds fock_cutoff = {}",
            n,
            space.fock_cutoff()
        )));
    }
    let d = space.total_dim();
    let mut psi = vec![C64::new(0.0, 0.0); d];
    psi[space.index(0, n)] = C64::new(1.0, 0.0);
    let mut m = Array2::zeros((d, d));
    let k = space.index(0, n);
    m[(k, k)] = C64::new(1.0, 0.0);
    DensityMatrix::on_space(space, m)
}
