//! Permutation-invariant Hilbert space and its operators.
//!
//! The qubit ensemble lives entirely in the maximal-spin Dicke manifold
//! `|J = N/2, m>`, `m = -J..+J` (dimension `N + 1`): all collapse operators
//! in this crate are collective, so lower-J sectors are never populated and
//! are not represented. The cavity is a hard-truncated Fock space; validity
//! of the truncation is enforced downstream by a top-level population
//! watchdog rather than by modifying the operators.
//!
//! Basis layout: `index = m_idx * (n_max + 1) + n` with `m_idx = 0`
//! corresponding to the collective ground state `m = -J`.

use crate::error::{Error, Result};
use crate::linalg;
use crate::sparse::{Csr, C64};
use ndarray::Array2;

/// Joint Dicke-manifold x truncated-Fock space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HilbertSpace {
    n_qubits: usize,
    fock_cutoff: usize,
}

impl HilbertSpace {
    /// `n_qubits >= 1`, `fock_cutoff >= 1` (highest retained Fock level).
    pub fn new(n_qubits: usize, fock_cutoff: usize) -> Result<Self> {
        if n_qubits < 1 {
            return Err(Error::InvalidArgument("n_qubits must be >= 1".into()));
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

    /// Total spin J = N/2 (half-integers are exact in f64).
    pub fn j(&self) -> f64 {
        self.n_qubits as f64 / 2.0
    }

    pub fn fock_cutoff(&self) -> usize {
        self.fock_cutoff
    }

    pub fn dicke_dim(&self) -> usize {
        self.n_qubits + 1
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_cutoff + 1
    }

    pub fn total_dim(&self) -> usize {
        self.dicke_dim() * self.fock_dim()
    }

    /// Jz eigenvalue for the Dicke level `m_idx` (0 = collective ground).
    pub fn m_of(&self, m_idx: usize) -> f64 {
        m_idx as f64 - self.j()
    }

    pub fn index(&self, m_idx: usize, n: usize) -> usize {
        m_idx * self.fock_dim() + n
    }

    pub fn split_index(&self, idx: usize) -> (usize, usize) {
        (idx / self.fock_dim(), idx % self.fock_dim())
    }
}

/// Construct the joint space. Same as [`HilbertSpace::new`].
pub fn make_space(n_qubits: usize, fock_cutoff: usize) -> Result<HilbertSpace> {
    HilbertSpace::new(n_qubits, fock_cutoff)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollectiveKind {
    Jz,
    JPlus,
    JMinus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CavityKind {
    /// Annihilation operator `a`.
    Annihilate,
    /// Creation operator `a†` (annihilates the top truncated level).
    Create,
    /// Photon number `a†a`.
    Number,
}

/// A sparse operator on the joint space.
#[derive(Debug, Clone)]
pub struct Operator {
    space: HilbertSpace,
    matrix: Csr,
    hermitian: bool,
}

impl Operator {
    pub fn new(space: HilbertSpace, matrix: Csr, hermitian: bool) -> Result<Self> {
        if matrix.nrows() != space.total_dim() || matrix.ncols() != space.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "operator is {}x{}, space dimension is {}",
                matrix.nrows(),
                matrix.ncols(),
                space.total_dim()
            )));
        }
        if hermitian && matrix.hermiticity_deviation() > 1e-12 {
            return Err(Error::InvalidArgument(
                "matrix flagged hermitian deviates from its adjoint".into(),
            ));
        }
        Ok(Self {
            space,
            matrix,
            hermitian,
        })
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn matrix(&self) -> &Csr {
        &self.matrix
    }

    pub fn is_hermitian_hint(&self) -> bool {
        self.hermitian
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            space: self.space,
            matrix: self.matrix.scale(C64::new(s, 0.0)),
            hermitian: self.hermitian,
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            space: self.space,
            matrix: self.matrix.adjoint(),
            hermitian: self.hermitian,
        }
    }
}

/// Dicke-factor matrix of a collective spin operator (dimension N+1).
pub fn collective_factor(space: HilbertSpace, kind: CollectiveKind) -> Csr {
    let d = space.dicke_dim();
    let j = space.j();
    let mut t = Vec::new();
    match kind {
        CollectiveKind::Jz => {
            for mi in 0..d {
                let m = space.m_of(mi);
                if m != 0.0 {
                    t.push((mi as u32, mi as u32, C64::new(m, 0.0)));
                }
            }
        }
        CollectiveKind::JPlus => {
            // <m+1| J+ |m> = sqrt(J(J+1) - m(m+1))
            for mi in 0..d - 1 {
                let m = space.m_of(mi);
                let amp = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
                t.push(((mi + 1) as u32, mi as u32, C64::new(amp, 0.0)));
            }
        }
        CollectiveKind::JMinus => {
            for mi in 1..d {
                let m = space.m_of(mi);
                let amp = (j * (j + 1.0) - m * (m - 1.0)).sqrt();
                t.push(((mi - 1) as u32, mi as u32, C64::new(amp, 0.0)));
            }
        }
    }
    Csr::from_triplets(d, d, t)
}

/// Fock-factor matrix of a cavity operator (dimension n_max+1).
pub fn cavity_factor(space: HilbertSpace, kind: CavityKind) -> Csr {
    let d = space.fock_dim();
    let mut t = Vec::new();
    match kind {
        CavityKind::Annihilate => {
            for n in 1..d {
                t.push(((n - 1) as u32, n as u32, C64::new((n as f64).sqrt(), 0.0)));
            }
        }
        CavityKind::Create => {
            for n in 1..d {
                t.push((n as u32, (n - 1) as u32, C64::new((n as f64).sqrt(), 0.0)));
            }
        }
        CavityKind::Number => {
            for n in 1..d {
                t.push((n as u32, n as u32, C64::new(n as f64, 0.0)));
            }
        }
    }
    Csr::from_triplets(d, d, t)
}

/// Collective spin operator embedded in the joint space (identity on the
/// cavity factor).
pub fn collective_op(space: HilbertSpace, kind: CollectiveKind) -> Operator {
    let f = collective_factor(space, kind);
    let m = f.kron(&Csr::identity(space.fock_dim()));
    Operator::new(space, m, matches!(kind, CollectiveKind::Jz)).expect("consistent by construction")
}

/// Cavity operator embedded in the joint space (identity on the Dicke
/// factor).
pub fn cavity_op(space: HilbertSpace, kind: CavityKind) -> Operator {
    let f = cavity_factor(space, kind);
    let m = Csr::identity(space.dicke_dim()).kron(&f);
    Operator::new(space, m, matches!(kind, CavityKind::Number)).expect("consistent by construction")
}

/// Which factor to keep in a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    Qubits,
    Cavity,
}

/// A dense system state. `factor_dims = (matter, cavity)` records the
/// bipartite layout; reduced states carry `(d, 1)`.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: Array2<C64>,
    factor_dims: (usize, usize),
}

impl DensityMatrix {
    /// Validates Hermiticity (1e-10) and unit trace (1e-8).
    pub fn new(matrix: Array2<C64>, factor_dims: (usize, usize)) -> Result<Self> {
        let dm = Self::new_unchecked(matrix, factor_dims)?;
        let h = dm.hermiticity_deviation();
        if h > 1e-10 {
            return Err(Error::CorruptedState(format!(
                "hermiticity deviation {h:.3e} exceeds 1e-10"
            )));
        }
        let tr = dm.trace();
        if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
            return Err(Error::CorruptedState(format!(
                "trace {tr} deviates from 1 beyond 1e-8"
            )));
        }
        Ok(dm)
    }

    /// Skips the Hermiticity/trace checks but still enforces shape.
    pub fn new_unchecked(matrix: Array2<C64>, factor_dims: (usize, usize)) -> Result<Self> {
        let d = factor_dims.0 * factor_dims.1;
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, factor dims give {}",
                matrix.nrows(),
                matrix.ncols(),
                d
            )));
        }
        Ok(Self {
            matrix,
            factor_dims,
        })
    }

    pub fn on_space(space: HilbertSpace, matrix: Array2<C64>) -> Result<Self> {
        Self::new(matrix, (space.dicke_dim(), space.fock_dim()))
    }

    /// Pure state |psi><psi| from a normalized state vector.
    pub fn from_pure(psi: &[C64], factor_dims: (usize, usize)) -> Result<Self> {
        let d = psi.len();
        let nrm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        if (nrm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "state vector norm^2 = {nrm}, expected 1"
            )));
        }
        let mut m = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        Self::new(m, factor_dims)
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn factor_dims(&self) -> (usize, usize) {
        self.factor_dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.diag().sum()
    }

    pub fn purity(&self) -> f64 {
        // Tr(rho^2) for Hermitian rho = sum |rho_ij|^2
        self.matrix.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let mut max = 0.0f64;
        for i in 0..self.matrix.nrows() {
            for j in i..self.matrix.ncols() {
                let d = (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm();
                if d > max {
                    max = d;
                }
            }
        }
        max
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() <= 64 {
            self.eigenvalues()[0]
        } else {
            linalg::min_eigenvalue_lanczos(&self.matrix, None, 1e-10).0
        }
    }
}

/// Partial trace on a raw matrix with bipartite layout
/// `index = matter * db + cavity`.
pub fn reduce_matrix(m: &Array2<C64>, dims: (usize, usize), keep: Keep) -> Array2<C64> {
    let (da, db) = dims;
    debug_assert_eq!(m.nrows(), da * db);
    match keep {
        Keep::Qubits => {
            let mut red = Array2::zeros((da, da));
            for i in 0..da {
                for j in 0..da {
                    let mut s = C64::new(0.0, 0.0);
                    for n in 0..db {
                        s += m[(i * db + n, j * db + n)];
                    }
                    red[(i, j)] = s;
                }
            }
            red
        }
        Keep::Cavity => {
            let mut red = Array2::zeros((db, db));
            for n in 0..db {
                for np in 0..db {
                    let mut s = C64::new(0.0, 0.0);
                    for i in 0..da {
                        s += m[(i * db + n, i * db + np)];
                    }
                    red[(n, np)] = s;
                }
            }
            red
        }
    }
}

/// Trace out one factor. The reduced state keeps unit trace and
/// Hermiticity exactly (up to round-off).
pub fn partial_trace(rho: &DensityMatrix, keep: Keep) -> DensityMatrix {
    let out = reduce_matrix(rho.matrix(), rho.factor_dims(), keep);
    let d = out.nrows();
    DensityMatrix {
        matrix: out,
        factor_dims: (d, 1),
    }
}

/// Von Neumann entropy, natural log. Eigenvalues in `[-1e-10, 0)` are
/// round-off and clamp to zero; anything below `-1e-6` indicates a
/// corrupted state.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    entropy_from_eigenvalues(&rho.eigenvalues())
}

pub fn entropy_from_eigenvalues(eigs: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &l in eigs {
        if l < -1e-6 {
            return Err(Error::CorruptedState(format!(
                "reduced density matrix eigenvalue {l:.3e} below -1e-6"
            )));
        }
        if l > 0.0 {
            s -= l * l.ln();
        }
    }
    Ok(s.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn space_dimensions() {
        let s = make_space(50, 30).unwrap();
        assert_eq!(s.total_dim(), 51 * 31);
        assert_eq!(s.total_dim(), 1581);
        let s = make_space(1, 1).unwrap();
        assert_eq!(s.total_dim(), 4);
        let s = make_space(10, 20).unwrap();
        assert_eq!(s.dicke_dim(), 11);
        assert_eq!(s.j(), 5.0);
        assert!(make_space(0, 5).is_err());
        assert!(make_space(5, 0).is_err());
    }

    #[test]
    fn collective_ladder_values() {
        let s = make_space(2, 1).unwrap();
        // N=2 (J=1): Jz eigenvalues on the Dicke factor are {-1, 0, +1}
        let jz = collective_factor(s, CollectiveKind::Jz);
        assert_eq!(jz.get(0, 0), c(-1.0, 0.0));
        assert_eq!(jz.get(1, 1), c(0.0, 0.0));
        assert_eq!(jz.get(2, 2), c(1.0, 0.0));
        // <J,1| J+ |J,0> = sqrt(2)
        let jp = collective_factor(s, CollectiveKind::JPlus);
        assert!((jp.get(2, 1).re - 2.0f64.sqrt()).abs() < 1e-15);
        // J+ on the top state is the zero vector
        let top: Vec<C64> = vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let out = jp.matvec(&top);
        assert!(out.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn ladder_termination_any_n() {
        for n in 1..=10 {
            let s = make_space(n, 1).unwrap();
            let jp = collective_factor(s, CollectiveKind::JPlus);
            let d = s.dicke_dim();
            let mut top = vec![c(0.0, 0.0); d];
            top[d - 1] = c(1.0, 0.0);
            assert!(jp.matvec(&top).iter().all(|v| v.norm() == 0.0));
        }
    }

    #[test]
    fn cavity_matrix_elements() {
        let s = make_space(1, 3).unwrap();
        let a = cavity_factor(s, CavityKind::Annihilate);
        // <1| a |2> = sqrt(2)
        assert!((a.get(1, 2).re - 2.0f64.sqrt()).abs() < 1e-15);
        // a|0> = 0
        let vac: Vec<C64> = vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        assert!(a.matvec(&vac).iter().all(|v| v.norm() == 0.0));
        // hard truncation: a† annihilates |n_max>
        let adag = cavity_factor(s, CavityKind::Create);
        let mut topv = vec![c(0.0, 0.0); 4];
        topv[3] = c(1.0, 0.0);
        assert!(adag.matvec(&topv).iter().all(|v| v.norm() == 0.0));
        // number operator eigenvalues 0..n_max
        let num = cavity_factor(s, CavityKind::Number);
        for n in 0..4 {
            assert_eq!(num.get(n, n), c(n as f64, 0.0));
        }
    }

    #[test]
    fn spin_commutators_small_n() {
        for n in 1..=10 {
            let s = make_space(n, 1).unwrap();
            let jp = collective_factor(s, CollectiveKind::JPlus);
            let jm = collective_factor(s, CollectiveKind::JMinus);
            let jz = collective_factor(s, CollectiveKind::Jz);
            // [J+, J-] = 2 Jz
            let comm = jp.matmul(&jm).sub(&jm.matmul(&jp));
            let twojz = jz.scale(c(2.0, 0.0));
            assert!(comm.sub(&twojz).max_abs() < 1e-12, "N={n}");
            // [Jz, J±] = ±J±
            let cp = jz.matmul(&jp).sub(&jp.matmul(&jz));
            assert!(cp.sub(&jp).max_abs() < 1e-12);
            let cm = jz.matmul(&jm).sub(&jm.matmul(&jz));
            assert!(cm.add(&jm).max_abs() < 1e-12);
        }
    }

    #[test]
    fn boson_commutator_below_truncation() {
        let s = make_space(1, 7).unwrap();
        let a = cavity_factor(s, CavityKind::Annihilate);
        let ad = cavity_factor(s, CavityKind::Create);
        let comm = a.matmul(&ad).sub(&ad.matmul(&a));
        // identity except on the top level
        let d = s.fock_dim();
        let cd = comm.to_dense();
        for i in 0..d - 1 {
            for j in 0..d - 1 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((cd[(i, j)] - c(expect, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn embedded_ops_commute_across_factors() {
        let s = make_space(3, 4).unwrap();
        let jm = collective_op(s, CollectiveKind::JMinus);
        let a = cavity_op(s, CavityKind::Annihilate);
        let comm = jm
            .matrix()
            .matmul(a.matrix())
            .sub(&a.matrix().matmul(jm.matrix()));
        assert_eq!(comm.nnz(), 0);
    }

    #[test]
    fn partial_trace_product_state() {
        // rho_A ⊗ rho_B with rho_A = diag(0.25, 0.75), rho_B = |+><+|
        let rho_a = array![[c(0.25, 0.0), c(0.1, 0.05)], [c(0.1, -0.05), c(0.75, 0.0)]];
        let rho_b = array![[c(0.5, 0.0), c(0.5, 0.0)], [c(0.5, 0.0), c(0.5, 0.0)]];
        let mut joint = Array2::zeros((4, 4));
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        joint[(i * 2 + k, j * 2 + l)] = rho_a[(i, j)] * rho_b[(k, l)];
                    }
                }
            }
        }
        let dm = DensityMatrix::new(joint, (2, 2)).unwrap();
        let red_a = partial_trace(&dm, Keep::Qubits);
        for i in 0..2 {
            for j in 0..2 {
                assert!((red_a.matrix()[(i, j)] - rho_a[(i, j)]).norm() < 1e-14);
            }
        }
        let red_b = partial_trace(&dm, Keep::Cavity);
        for i in 0..2 {
            for j in 0..2 {
                assert!((red_b.matrix()[(i, j)] - rho_b[(i, j)]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn partial_trace_bell_state() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let psi = vec![c(r, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(r, 0.0)];
        let dm = DensityMatrix::from_pure(&psi, (2, 2)).unwrap();
        for keep in [Keep::Qubits, Keep::Cavity] {
            let red = partial_trace(&dm, keep);
            assert!((red.matrix()[(0, 0)].re - 0.5).abs() < 1e-14);
            assert!((red.matrix()[(1, 1)].re - 0.5).abs() < 1e-14);
            assert!(red.matrix()[(0, 1)].norm() < 1e-14);
        }
    }

    #[test]
    fn entropy_values() {
        // pure state
        let psi = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let dm = DensityMatrix::from_pure(&psi, (2, 1)).unwrap();
        assert!(von_neumann_entropy(&dm).unwrap().abs() < 1e-14);
        // two-dim maximally mixed
        let m = array![[c(0.5, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.5, 0.0)]];
        let dm = DensityMatrix::new(m, (2, 1)).unwrap();
        let s = von_neumann_entropy(&dm).unwrap();
        assert!((s - 2.0f64.ln()).abs() < 1e-12);
        // diag(0.5, 0.25, 0.25) -> 1.5 ln 2
        let m = Array2::from_diag(&ndarray::arr1(&[c(0.5, 0.0), c(0.25, 0.0), c(0.25, 0.0)]));
        let dm = DensityMatrix::new(m, (3, 1)).unwrap();
        let s = von_neumann_entropy(&dm).unwrap();
        assert!((s - 1.5 * 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_clamping_and_corruption() {
        assert_eq!(entropy_from_eigenvalues(&[1.0, -5e-11]).unwrap(), 0.0);
        assert!(entropy_from_eigenvalues(&[1.0, -5e-6]).is_err());
    }
}
