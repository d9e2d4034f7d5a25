//! Dormand–Prince 5(4) embedded Runge–Kutta integrator on complex state
//! vectors, with an exact elementwise integrating factor for the diagonal
//! part of the generator.
//!
//! The method is the Lawson transformation of DOPRI5: each step integrates
//! `sigma(tau) = E(-tau) ∘ rho(t_n + tau)` with `E(tau) = exp(Lambda tau)`
//! the elementwise exponential of the vectorized-diagonal part of the
//! generator (free phases and all dissipative decay rates). The stages are
//! evaluated in *transported* form,
//!
//! `W_i = E(c_i h) ∘ y_n + h Σ_j a_ij E((c_i - c_j) h) ∘ K_j`,
//! `K_i = F(t_n + c_i h, W_i)`,
//! `y_{n+1} = E(h) ∘ y_n + h Σ_i b_i E((1 - c_i) h) ∘ K_i`,
//!
//! so every factor has a non-negative argument and magnitude <= 1: the
//! scheme stays round-off-safe for arbitrarily stiff diagonals (the DOPRI5
//! nodes are non-decreasing, which makes this possible). The embedded error
//! estimate uses the same transported combination.
//!
//! Dense output needs backward factors `E((theta - c_i) h)`, so it is only
//! produced when `h * max|Re Lambda|` is below a fixed exponent cap; for
//! larger steps the controller clips the step to the next sample boundary
//! instead, and samples are taken at step endpoints exactly.

use crate::sparse::C64;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

// b - b_hat (5th-order weights minus the embedded 4th-order weights)
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

// dense-output coefficients
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 5.0;
const MAX_STEPS: usize = 50_000_000;
/// Largest |Re Lambda| * tau allowed in a backward factor.
const DENSE_EXP_CAP: f64 = 11.0;

/// The remainder evaluation and integrating factor of one problem.
pub trait LawsonSystem {
    fn dim(&self) -> usize;

    /// `out = F(t, w)`: the non-diagonal remainder of the generator (plus
    /// the drive term) applied to the physical state `w`.
    fn apply_f(&mut self, t: f64, w: &[C64], out: &mut [C64]);

    /// `v *= E(tau)` elementwise.
    fn factor(&mut self, tau: f64, v: &mut [C64]);

    /// Largest |Re Lambda| over all stored coordinates.
    fn max_re_lambda(&self) -> f64;
}

pub struct StepError {
    pub time: f64,
    pub what: String,
}

/// Dense-output coefficients (on the Lawson variable) of one accepted step.
pub struct DenseOut {
    pub t0: f64,
    pub h: f64,
    r1: Vec<C64>,
    r2: Vec<C64>,
    r3: Vec<C64>,
    r4: Vec<C64>,
    r5: Vec<C64>,
}

impl DenseOut {
    /// Interpolated physical state at `t0 + theta * h`, `theta` in [0, 1].
    pub fn eval<S: LawsonSystem>(&self, sys: &mut S, theta: f64, out: &mut [C64]) {
        let th1 = 1.0 - theta;
        for k in 0..out.len() {
            out[k] = self.r1[k]
                + theta
                    * (self.r2[k]
                        + th1 * (self.r3[k] + theta * (self.r4[k] + th1 * self.r5[k])));
        }
        sys.factor(theta * self.h, out);
    }
}

/// Outcome of one accepted step.
pub struct StepResult {
    pub t_new: f64,
    /// Present when the step was taken in dense-output mode.
    pub dense: Option<DenseOut>,
}

pub struct Dopri5<S: LawsonSystem> {
    pub sys: S,
    pub rel_tol: f64,
    pub abs_tol: f64,
    t: f64,
    y: Vec<C64>,
    k: [Vec<C64>; 7],
    w: Vec<C64>,
    tmp: Vec<C64>,
    ynew: Vec<C64>,
    err: Vec<C64>,
    h: f64,
    first: bool,
    pub n_steps: usize,
    pub n_rejected: usize,
    pub n_rhs: usize,
}

impl<S: LawsonSystem> Dopri5<S> {
    pub fn new(sys: S, y0: Vec<C64>, rel_tol: f64, abs_tol: f64) -> Self {
        let n = y0.len();
        assert_eq!(n, sys.dim());
        let z = vec![C64::new(0.0, 0.0); n];
        Self {
            sys,
            rel_tol,
            abs_tol,
            t: 0.0,
            y: y0,
            k: std::array::from_fn(|_| z.clone()),
            w: z.clone(),
            tmp: z.clone(),
            ynew: z.clone(),
            err: z,
            h: 0.0,
            first: true,
            n_steps: 0,
            n_rejected: 0,
            n_rhs: 0,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[C64] {
        &self.y
    }

    fn scaled_err_norm(&self) -> f64 {
        let n = self.err.len();
        let mut s = 0.0;
        for i in 0..n {
            let sk = self.abs_tol + self.rel_tol * self.y[i].norm().max(self.ynew[i].norm());
            let e = self.err[i].norm() / sk;
            s += e * e;
        }
        (s / n as f64).sqrt()
    }

    fn initial_step(&mut self, t_final: f64) -> f64 {
        let n = self.y.len();
        let mut d0 = 0.0f64;
        let mut d1 = 0.0f64;
        for i in 0..n {
            let sk = self.abs_tol + self.rel_tol * self.y[i].norm();
            d0 += (self.y[i].norm() / sk).powi(2);
            d1 += (self.k[0][i].norm() / sk).powi(2);
        }
        d0 = (d0 / n as f64).sqrt();
        d1 = (d1 / n as f64).sqrt();
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        // the factor handles Re(Lambda) exactly, but start conservatively
        let lam = self.sys.max_re_lambda();
        if lam > 0.0 {
            h0 = h0.min(1.0 / lam);
        }
        h0.min(t_final).min(0.1)
    }

    /// Advance by one accepted step. `next_sample` is the next output time
    /// the caller needs; steps too large for dense output get clipped to it.
    pub fn step(&mut self, t_final: f64, next_sample: f64) -> Result<StepResult, StepError> {
        let n = self.y.len();
        if self.first {
            let (y, k0) = (&self.y, &mut self.k[0]);
            self.sys.apply_f(self.t, y, k0);
            self.n_rhs += 1;
            self.h = self.initial_step(t_final);
            self.first = false;
        }
        let lam = self.sys.max_re_lambda();
        loop {
            self.n_steps += 1;
            if self.n_steps > MAX_STEPS {
                return Err(StepError {
                    time: self.t,
                    what: "step limit exceeded".into(),
                });
            }
            let t = self.t;
            let mut h = self.h.min(t_final - t).max(1e-14);
            let h_dense_max = if lam > 0.0 { DENSE_EXP_CAP / lam } else { f64::INFINITY };
            let mut use_dense = h <= h_dense_max;
            if !use_dense {
                // prefer the larger of (a) a dense-capable step and (b) a
                // forward-only step clipped to the next sample boundary
                let h_clip = (next_sample - t).max(0.0).min(t_final - t);
                if h_clip >= h_dense_max && h_clip > 1e-14 {
                    h = h.min(h_clip);
                } else {
                    h = h_dense_max;
                    use_dense = true;
                }
            }

            // stages in transported form
            for i in 1..7 {
                self.w.copy_from_slice(&self.y);
                self.sys.factor(C[i] * h, &mut self.w);
                for j in 0..i {
                    let a = A[i][j];
                    if a == 0.0 {
                        continue;
                    }
                    self.tmp.copy_from_slice(&self.k[j]);
                    self.sys.factor((C[i] - C[j]) * h, &mut self.tmp);
                    let ha = h * a;
                    for (wv, kv) in self.w.iter_mut().zip(&self.tmp) {
                        *wv += ha * kv;
                    }
                }
                if i == 6 {
                    // FSAL structure: W_7 is the 5th-order solution
                    self.ynew.copy_from_slice(&self.w);
                }
                let (sys, w, ki) = (&mut self.sys, &self.w, &mut self.k[i]);
                sys.apply_f(t + C[i] * h, w, ki);
            }
            self.n_rhs += 6;

            // transported error estimate
            self.err.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            for i in 0..7 {
                if E[i] == 0.0 {
                    continue;
                }
                self.tmp.copy_from_slice(&self.k[i]);
                self.sys.factor((1.0 - C[i]) * h, &mut self.tmp);
                let he = h * E[i];
                for (ev, kv) in self.err.iter_mut().zip(&self.tmp) {
                    *ev += he * kv;
                }
            }
            let err_norm = self.scaled_err_norm();

            if err_norm <= 1.0 {
                let dense = if use_dense {
                    Some(self.build_dense(t, h))
                } else {
                    None
                };
                // plain FSAL: K_7 = F(t + h, y_new)
                let (head, tail) = self.k.split_at_mut(6);
                std::mem::swap(&mut head[0], &mut tail[0]);
                std::mem::swap(&mut self.y, &mut self.ynew);
                self.t = t + h;
                let scale = (SAFETY * err_norm.powf(-0.2)).clamp(MIN_SCALE, MAX_SCALE);
                self.h = h * scale;
                return Ok(StepResult {
                    t_new: self.t,
                    dense,
                });
            }

            self.n_rejected += 1;
            let scale = (SAFETY * err_norm.powf(-0.2)).clamp(MIN_SCALE, 1.0);
            self.h = h * scale;
            if self.h < 1e-13 {
                return Err(StepError {
                    time: self.t,
                    what: format!("step size underflow (err_norm = {err_norm:.3e})"),
                });
            }
        }
    }

    /// Dense-output coefficients on the Lawson variable; backward factors
    /// are bounded by the exponent cap in dense mode.
    fn build_dense(&mut self, t: f64, h: f64) -> DenseOut {
        let n = self.y.len();
        let mut ks: Vec<Vec<C64>> = Vec::with_capacity(7);
        for i in 0..7 {
            let mut v = self.k[i].clone();
            if i > 0 {
                self.sys.factor(-C[i] * h, &mut v);
            }
            ks.push(v);
        }
        // sigma(h) = E(-h) ∘ y_new
        let mut sig1 = self.ynew.clone();
        self.sys.factor(-h, &mut sig1);

        let mut r1 = vec![C64::new(0.0, 0.0); n];
        let mut r2 = vec![C64::new(0.0, 0.0); n];
        let mut r3 = vec![C64::new(0.0, 0.0); n];
        let mut r4 = vec![C64::new(0.0, 0.0); n];
        let mut r5 = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            let dy = sig1[i] - self.y[i];
            r1[i] = self.y[i];
            r2[i] = dy;
            r3[i] = h * ks[0][i] - dy;
            r4[i] = dy - h * ks[6][i] - r3[i];
            r5[i] = h
                * (D1 * ks[0][i]
                    + D3 * ks[2][i]
                    + D4 * ks[3][i]
                    + D5 * ks[4][i]
                    + D6 * ks[5][i]
                    + D7 * ks[6][i]);
        }
        DenseOut {
            t0: t,
            h,
            r1,
            r2,
            r3,
            r4,
            r5,
        }
    }
}
