//! Dense Hermitian eigenvalue helpers.

use ndarray::Array2;
use num_complex::Complex64 as C64;

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &Array2<C64>) -> Vec<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    let dm = nalgebra::DMatrix::from_fn(n, n, |r, c| {
        let v = m[(r, c)];
        nalgebra::Complex::new(v.re, v.im)
    });
    let mut ev: Vec<f64> = dm.symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Smallest eigenvalue of a Hermitian matrix via Lanczos with full
/// reorthogonalization. `warm` seeds the starting vector (e.g. the Ritz
/// vector from the previous time sample). Falls back to a dense solve for
/// small matrices. Returns `(lambda_min, ritz_vector)`.
pub fn min_eigenvalue_lanczos(
    m: &Array2<C64>,
    warm: Option<&[C64]>,
    tol: f64,
) -> (f64, Vec<C64>) {
    let n = m.nrows();
    if n <= 64 {
        let ev = hermitian_eigenvalues(m);
        return (ev[0], Vec::new());
    }

    let mut v: Vec<C64> = match warm {
        Some(w) if w.len() == n && norm(w) > 0.0 => w.to_vec(),
        _ => (0..n)
            .map(|i| C64::new(1.0 + (i as f64 * 0.7391).sin(), (i as f64 * 0.397).cos()))
            .collect(),
    };
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let max_iter = 48.min(n);
    let mut basis: Vec<Vec<C64>> = vec![v.clone()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![C64::new(0.0, 0.0); n];
    let mut best = f64::INFINITY;

    for it in 0..max_iter {
        // w = M v
        for r in 0..n {
            let mut s = C64::new(0.0, 0.0);
            let row = m.row(r);
            for (x, y) in row.iter().zip(basis[it].iter()) {
                s += x * y;
            }
            w[r] = s;
        }
        let alpha = dot(&basis[it], &w).re;
        alphas.push(alpha);
        // full reorthogonalization against the Krylov basis
        for b in &basis {
            let c = dot(b, &w);
            for (wi, bi) in w.iter_mut().zip(b.iter()) {
                *wi -= c * bi;
            }
        }
        for b in &basis {
            let c = dot(b, &w);
            for (wi, bi) in w.iter_mut().zip(b.iter()) {
                *wi -= c * bi;
            }
        }
        let beta = norm(&w);

        let (theta, s_last) = tridiag_min_eig(&alphas, &betas);
        let resid = if betas.is_empty() && beta == 0.0 {
            0.0
        } else {
            beta * s_last.abs()
        };
        best = theta;
        if resid < tol || beta < 1e-14 {
            break;
        }
        betas.push(beta);
        let next: Vec<C64> = w.iter().map(|x| x / beta).collect();
        basis.push(next);
    }

    // Ritz vector for warm restart of the next call.
    let (_, coeffs) = tridiag_min_eig_vec(&alphas, &betas);
    let mut ritz = vec![C64::new(0.0, 0.0); n];
    for (c, b) in coeffs.iter().zip(basis.iter()) {
        for (r, bi) in ritz.iter_mut().zip(b.iter()) {
            *r += C64::new(*c, 0.0) * bi;
        }
    }
    (best, ritz)
}

/// Minimum eigenvalue of the symmetric tridiagonal matrix defined by
/// `alphas` (diagonal) and `betas` (off-diagonal), plus the last component
/// of its eigenvector (for the Lanczos residual bound).
fn tridiag_min_eig(alphas: &[f64], betas: &[f64]) -> (f64, f64) {
    let (vals, vecs) = tridiag_eig(alphas, betas);
    let mut kmin = 0;
    for (k, v) in vals.iter().enumerate() {
        if *v < vals[kmin] {
            kmin = k;
        }
    }
    (vals[kmin], vecs[(alphas.len() - 1, kmin)])
}

fn tridiag_min_eig_vec(alphas: &[f64], betas: &[f64]) -> (f64, Vec<f64>) {
    let (vals, vecs) = tridiag_eig(alphas, betas);
    let mut kmin = 0;
    for (k, v) in vals.iter().enumerate() {
        if *v < vals[kmin] {
            kmin = k;
        }
    }
    (vals[kmin], vecs.column(kmin).iter().cloned().collect())
}

fn tridiag_eig(alphas: &[f64], betas: &[f64]) -> (Vec<f64>, nalgebra::DMatrix<f64>) {
    let k = alphas.len();
    let mut t = nalgebra::DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k && i < betas.len() {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let se = nalgebra::SymmetricEigen::new(t);
    (se.eigenvalues.iter().cloned().collect(), se.eigenvectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn dense_eigenvalues_of_known_matrix() {
        // Pauli-x has eigenvalues ±1
        let mut m = Array2::zeros((2, 2));
        m[(0, 1)] = C64::new(1.0, 0.0);
        m[(1, 0)] = C64::new(1.0, 0.0);
        let ev = hermitian_eigenvalues(&m);
        assert!((ev[0] + 1.0).abs() < 1e-12);
        assert!((ev[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lanczos_matches_dense_on_random_hermitian() {
        let n = 90;
        let mut m = Array2::zeros((n, n));
        // deterministic pseudo-random Hermitian matrix
        let mut s = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        for i in 0..n {
            for j in i..n {
                let v = C64::new(next(), if i == j { 0.0 } else { next() });
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
            }
        }
        let dense = hermitian_eigenvalues(&m)[0];
        let (lz, _) = min_eigenvalue_lanczos(&m, None, 1e-10);
        assert!(
            (dense - lz).abs() < 1e-7,
            "dense {dense} vs lanczos {lz}"
        );
    }
}
