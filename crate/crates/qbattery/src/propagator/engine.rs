//! Assembly of the propagation generator.
//!
//! The Lindblad generator acts on matrix entries ("coordinates") `(x, y)`.
//! Every operator in the model shifts the excitation sector `sec(x)` by a
//! fixed set of amounts, so the set of coherence orders
//! `q = sec(x) - sec(y)` reachable from the initial state is closed under
//! the dynamics. When that set is a strict subset (e.g. `q = 0` for the
//! undriven Tavis–Cummings model, even `q` for the undriven Dicke model),
//! only the reachable coordinates are stored and evolved — an exact
//! restriction, not a truncation.
//!
//! The vectorized-diagonal part of the generator (free phases, dissipative
//! decay of every coordinate, and the diagonal-collapse cross term) is
//! handled exactly by the integrator's Lawson factor; the sparse
//! `remainder` matrix holds everything else.

use crate::model::{drive_envelope, DriveConfig};
use crate::sparse::{Csr, C64};
use ndarray::Array2;
use std::collections::BTreeSet;

use super::dopri5::LawsonSystem;

/// Basis metadata the engine needs from a concrete space.
#[derive(Debug, Clone)]
pub(crate) struct SiteInfo {
    /// Excitation sector per basis site (matter excitations + photons).
    pub sec: Vec<i32>,
    /// `(matter_dim, cavity_dim)`; site index = matter * cavity_dim + n.
    pub factor_dims: (usize, usize),
    /// Collective Jz eigenvalue per matter basis index.
    pub matter_jz: Vec<f64>,
}

impl SiteInfo {
    pub fn for_space(space: crate::space::HilbertSpace) -> Self {
        let (dm, dc) = (space.dicke_dim(), space.fock_dim());
        let mut sec = Vec::with_capacity(dm * dc);
        for mi in 0..dm {
            for n in 0..dc {
                sec.push((mi + n) as i32);
            }
        }
        SiteInfo {
            sec,
            factor_dims: (dm, dc),
            matter_jz: (0..dm).map(|mi| space.m_of(mi)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.factor_dims.0 * self.factor_dims.1
    }
}

/// Borrowed views of the operators defining the generator.
pub(crate) struct GeneratorOps<'a> {
    pub h0: &'a Csr,
    pub drive_op: &'a Csr,
    pub collapse: Vec<&'a Csr>,
}

/// The stored coordinate subset.
pub(crate) struct CoordSet {
    pub d: usize,
    pub xs: Vec<u32>,
    pub ys: Vec<u32>,
    /// full index x*d + y -> restricted index, u32::MAX if absent
    pub lookup: Vec<u32>,
    pub is_full: bool,
}

impl CoordSet {
    pub fn len(&self) -> usize {
        self.xs.len()
    }
}

fn shift_set(m: &Csr, sec: &[i32]) -> BTreeSet<i32> {
    let mut s = BTreeSet::new();
    for r in 0..m.nrows() {
        let (cols, _) = m.row(r);
        for &c in cols {
            s.insert(sec[r] - sec[c as usize]);
        }
    }
    s
}

/// Coherence orders reachable from `seeds` under transitions by `deltas`.
fn reachable(seeds: &BTreeSet<i32>, deltas: &BTreeSet<i32>, qmin: i32, qmax: i32) -> BTreeSet<i32> {
    let mut q: BTreeSet<i32> = seeds.clone();
    let mut frontier: Vec<i32> = q.iter().cloned().collect();
    while let Some(v) = frontier.pop() {
        for &d in deltas {
            let w = v + d;
            if w >= qmin && w <= qmax && q.insert(w) {
                frontier.push(w);
            }
        }
    }
    q
}

/// Determine the reachable coordinate set for this problem.
pub(crate) fn analyze_coords(
    ops: &GeneratorOps,
    site: &SiteInfo,
    drive_present: bool,
    rho0: &Array2<C64>,
) -> CoordSet {
    let d = site.dim();
    let sec = &site.sec;
    let smin = *sec.iter().min().unwrap();
    let smax = *sec.iter().max().unwrap();
    let (qmin, qmax) = (smin - smax, smax - smin);

    let mut deltas: BTreeSet<i32> = BTreeSet::new();
    for s in shift_set(ops.h0, sec) {
        deltas.insert(s);
        deltas.insert(-s);
    }
    if drive_present {
        for s in shift_set(ops.drive_op, sec) {
            deltas.insert(s);
            deltas.insert(-s);
        }
    }
    for c in &ops.collapse {
        let sh = shift_set(c, sec);
        for &s1 in &sh {
            for &s2 in &sh {
                deltas.insert(s1 - s2);
            }
        }
        let cdc = c.adjoint().matmul(c);
        for s in shift_set(&cdc, sec) {
            deltas.insert(s);
            deltas.insert(-s);
        }
    }

    let mut seeds = BTreeSet::new();
    for ((x, y), v) in rho0.indexed_iter() {
        if v.norm_sqr() != 0.0 {
            seeds.insert(sec[x] - sec[y]);
        }
    }
    if seeds.is_empty() {
        seeds.insert(0);
    }

    let q = reachable(&seeds, &deltas, qmin, qmax);

    // every q value realized by some site pair
    let mut possible = BTreeSet::new();
    let distinct: BTreeSet<i32> = sec.iter().cloned().collect();
    for &a in &distinct {
        for &b in &distinct {
            possible.insert(a - b);
        }
    }
    let is_full = possible.iter().all(|v| q.contains(v));

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut lookup = vec![u32::MAX; d * d];
    for x in 0..d {
        for y in 0..d {
            if is_full || q.contains(&(sec[x] - sec[y])) {
                lookup[x * d + y] = xs.len() as u32;
                xs.push(x as u32);
                ys.push(y as u32);
            }
        }
    }
    CoordSet {
        d,
        xs,
        ys,
        lookup,
        is_full,
    }
}

/// The assembled propagation generator; implements [`LawsonSystem`].
pub(crate) struct Generator {
    pub coords: CoordSet,
    remainder: Csr,
    drive_comm: Option<Csr>,
    drive: Option<DriveConfig>,
    eta_cut: f64,
    lam_site: Vec<C64>,
    gain_idx: Vec<u32>,
    gain_vals: Vec<f64>,
    has_gain: bool,
    max_re_lambda: f64,
    factor_cache: std::collections::HashMap<u64, (Vec<C64>, Vec<f64>)>,
}

impl Generator {
    pub fn build(
        ops: &GeneratorOps,
        site: &SiteInfo,
        drive: Option<DriveConfig>,
        rho0: &Array2<C64>,
    ) -> Self {
        let coords = analyze_coords(ops, site, drive.is_some(), rho0);
        let d = coords.d;
        let nc = coords.len();

        // Lawson site exponents: p_x = -i H_xx - 1/2 sum_C (C†C)_xx
        let h_diag = ops.h0.diag();
        let mut lam_site: Vec<C64> = h_diag.iter().map(|&h| C64::new(0.0, -1.0) * h).collect();
        let mut cdcs: Vec<Csr> = Vec::new();
        for c in &ops.collapse {
            let cdc = c.adjoint().matmul(c);
            for (x, v) in cdc.diag().into_iter().enumerate() {
                lam_site[x] -= 0.5 * v;
            }
            cdcs.push(cdc);
        }

        // diagonal-collapse cross term exp(g tau), g_xy = sum_C v_x v_y
        // (real diagonal collapse operators only; anything else stays in
        // the sparse remainder)
        let mut diag_gain_sites: Vec<Vec<f64>> = Vec::new();
        for c in &ops.collapse {
            if c.is_diagonal() {
                let dg = c.diag();
                if dg.iter().all(|v| v.im == 0.0) {
                    let mut v = vec![0.0; d];
                    for (x, val) in dg.into_iter().enumerate() {
                        v[x] = val.re;
                    }
                    diag_gain_sites.push(v);
                }
            }
        }
        let mut gain_per_coord: Vec<f64> = vec![0.0; nc];
        for v in &diag_gain_sites {
            for k in 0..nc {
                gain_per_coord[k] += v[coords.xs[k] as usize] * v[coords.ys[k] as usize];
            }
        }
        let has_gain = gain_per_coord.iter().any(|&g| g != 0.0);
        let (gain_idx, gain_vals) = if has_gain {
            let mut vals: Vec<f64> = gain_per_coord.clone();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            let idx: Vec<u32> = gain_per_coord
                .iter()
                .map(|g| vals.binary_search_by(|v| v.partial_cmp(g).unwrap()).unwrap() as u32)
                .collect();
            (idx, vals)
        } else {
            (Vec::new(), Vec::new())
        };

        let remainder = assemble_remainder(ops, &cdcs, &coords, &lam_site, &gain_per_coord);
        let drive_comm = drive.map(|_| assemble_commutator(ops.drive_op, &coords));
        let eta_cut = drive.map(|d| d.eta0 * 1e-18).unwrap_or(0.0);

        let mut max_re_lambda = 0.0f64;
        for k in 0..nc {
            let re = lam_site[coords.xs[k] as usize].re
                + lam_site[coords.ys[k] as usize].re
                + gain_per_coord[k];
            max_re_lambda = max_re_lambda.max(re.abs());
        }

        Generator {
            coords,
            remainder,
            drive_comm,
            drive,
            eta_cut,
            lam_site,
            gain_idx,
            gain_vals,
            has_gain,
            max_re_lambda,
            factor_cache: std::collections::HashMap::new(),
        }
    }

    pub fn gather(&self, rho: &Array2<C64>) -> Vec<C64> {
        let nc = self.coords.len();
        let mut v = Vec::with_capacity(nc);
        for k in 0..nc {
            v.push(rho[(self.coords.xs[k] as usize, self.coords.ys[k] as usize)]);
        }
        v
    }

    pub fn scatter(&self, v: &[C64], out: &mut Array2<C64>) {
        out.fill(C64::new(0.0, 0.0));
        for k in 0..v.len() {
            out[(self.coords.xs[k] as usize, self.coords.ys[k] as usize)] = v[k];
        }
    }

    /// Tr(rho^2) directly from the stored coordinates.
    pub fn purity(v: &[C64]) -> f64 {
        v.iter().map(|c| c.norm_sqr()).sum()
    }
}

impl LawsonSystem for Generator {
    fn dim(&self) -> usize {
        self.coords.len()
    }

    fn apply_f(&mut self, t: f64, w: &[C64], out: &mut [C64]) {
        self.remainder.matvec_into(w, out);
        if let (Some(b), Some(dr)) = (&self.drive_comm, &self.drive) {
            let amp = drive_envelope(t, dr);
            if amp.abs() > self.eta_cut {
                b.matvec_acc(w, C64::new(amp, 0.0), out);
            }
        }
    }

    fn factor(&mut self, tau: f64, v: &mut [C64]) {
        if tau == 0.0 {
            return;
        }
        if self.factor_cache.len() > 96 {
            self.factor_cache.clear();
        }
        let (lam_site, gain_vals) = (&self.lam_site, &self.gain_vals);
        let (u, gv) = self.factor_cache.entry(tau.to_bits()).or_insert_with(|| {
            (
                lam_site.iter().map(|&p| (p * tau).exp()).collect(),
                gain_vals.iter().map(|&g| (g * tau).exp()).collect(),
            )
        });
        if self.has_gain {
            for k in 0..v.len() {
                v[k] *= u[self.coords.xs[k] as usize]
                    * u[self.coords.ys[k] as usize].conj()
                    * gv[self.gain_idx[k] as usize];
            }
        } else {
            for k in 0..v.len() {
                v[k] *= u[self.coords.xs[k] as usize] * u[self.coords.ys[k] as usize].conj();
            }
        }
    }

    fn max_re_lambda(&self) -> f64 {
        self.max_re_lambda
    }
}

/// Row-by-row assembly of the restricted remainder matrix (the generator
/// minus its Lawson-handled diagonal).
fn assemble_remainder(
    ops: &GeneratorOps,
    cdcs: &[Csr],
    coords: &CoordSet,
    lam_site: &[C64],
    gain_per_coord: &[f64],
) -> Csr {
    let d = coords.d;
    let nc = coords.len();
    let h = ops.h0;
    let ht = h.transpose();
    let cts: Vec<Csr> = cdcs.iter().map(|m| m.transpose()).collect();

    let mut indptr = Vec::with_capacity(nc + 1);
    indptr.push(0usize);
    let mut indices: Vec<u32> = Vec::new();
    let mut data: Vec<C64> = Vec::new();
    let mut row_buf: Vec<(u32, C64)> = Vec::with_capacity(32);
    let mi = C64::new(0.0, -1.0);
    let pi = C64::new(0.0, 1.0);

    for k in 0..nc {
        let x = coords.xs[k] as usize;
        let y = coords.ys[k] as usize;
        row_buf.clear();

        let mut push = |col_full: usize, val: C64| {
            let rc = coords.lookup[col_full];
            debug_assert!(rc != u32::MAX, "generator leaves the coordinate set");
            if rc != u32::MAX {
                row_buf.push((rc, val));
            }
        };

        // -i H rho
        {
            let (cols, vals) = h.row(x);
            for (&xp, &v) in cols.iter().zip(vals) {
                push(xp as usize * d + y, mi * v);
            }
        }
        // +i rho H
        {
            let (cols, vals) = ht.row(y);
            for (&yp, &v) in cols.iter().zip(vals) {
                push(x * d + yp as usize, pi * v);
            }
        }
        for (c, (cdc, ct)) in ops.collapse.iter().zip(cdcs.iter().zip(cts.iter())) {
            // C rho C†
            let (xcols, xvals) = c.row(x);
            let (ycols, yvals) = c.row(y);
            for (&xp, &a) in xcols.iter().zip(xvals) {
                for (&yp, &b) in ycols.iter().zip(yvals) {
                    push(xp as usize * d + yp as usize, a * b.conj());
                }
            }
            // -1/2 (C†C rho + rho C†C)
            let (cols, vals) = cdc.row(x);
            for (&xp, &v) in cols.iter().zip(vals) {
                push(xp as usize * d + y, -0.5 * v);
            }
            let (cols, vals) = ct.row(y);
            for (&yp, &v) in cols.iter().zip(vals) {
                push(x * d + yp as usize, -0.5 * v);
            }
        }
        // remove the Lawson-handled diagonal
        let lam = lam_site[x] + lam_site[y].conj() + gain_per_coord[k];
        row_buf.push((k as u32, -lam));

        row_buf.sort_unstable_by_key(|e| e.0);
        let mut i = 0;
        while i < row_buf.len() {
            let col = row_buf[i].0;
            let mut v = row_buf[i].1;
            i += 1;
            while i < row_buf.len() && row_buf[i].0 == col {
                v += row_buf[i].1;
                i += 1;
            }
            if v.norm_sqr() != 0.0 {
                indices.push(col);
                data.push(v);
            }
        }
        indptr.push(indices.len());
    }
    Csr::from_raw(nc, nc, indptr, indices, data)
}

/// `-i [op, ·]` restricted to the coordinate set.
fn assemble_commutator(op: &Csr, coords: &CoordSet) -> Csr {
    let d = coords.d;
    let nc = coords.len();
    let opt = op.transpose();
    let mut indptr = Vec::with_capacity(nc + 1);
    indptr.push(0usize);
    let mut indices: Vec<u32> = Vec::new();
    let mut data: Vec<C64> = Vec::new();
    let mut row_buf: Vec<(u32, C64)> = Vec::with_capacity(16);
    let mi = C64::new(0.0, -1.0);
    let pi = C64::new(0.0, 1.0);

    for k in 0..nc {
        let x = coords.xs[k] as usize;
        let y = coords.ys[k] as usize;
        row_buf.clear();
        {
            let (cols, vals) = op.row(x);
            for (&xp, &v) in cols.iter().zip(vals) {
                let rc = coords.lookup[xp as usize * d + y];
                if rc != u32::MAX {
                    row_buf.push((rc, mi * v));
                }
            }
        }
        {
            let (cols, vals) = opt.row(y);
            for (&yp, &v) in cols.iter().zip(vals) {
                let rc = coords.lookup[x * d + yp as usize];
                if rc != u32::MAX {
                    row_buf.push((rc, pi * v));
                }
            }
        }
        row_buf.sort_unstable_by_key(|e| e.0);
        let mut i = 0;
        while i < row_buf.len() {
            let col = row_buf[i].0;
            let mut v = row_buf[i].1;
            i += 1;
            while i < row_buf.len() && row_buf[i].0 == col {
                v += row_buf[i].1;
                i += 1;
            }
            if v.norm_sqr() != 0.0 {
                indices.push(col);
                data.push(v);
            }
        }
        indptr.push(indices.len());
    }
    Csr::from_raw(nc, nc, indptr, indices, data)
}
