//! Power control at fixed receive weights.
//!
//! With `theta = log(eta)` every inverse SINR
//!
//! ```text
//! f_k(theta) = sum_{i!=k} (a_ki + b_ki) e^{theta_i - theta_k} + b_kk + c_k e^{-theta_k}
//! ```
//!
//! is a sum of exponentials of affine functions and hence convex. The
//! nonsmooth objective `max_k f_k` is replaced by the log-sum-exp surrogate
//!
//! ```text
//! f(theta; tau) = (1/tau) log sum_k e^{tau f_k(theta)},
//! f(theta) <= f(theta; tau) <= f(theta) + log(K)/tau,
//! ```
//!
//! which is minimized over the box `theta <= theta_max` by an accelerated
//! projected gradient method with Nesterov momentum.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1, Zip};

use crate::csvio::{fmt_f64, CsvFile};
use crate::sinr::ReducedCoeffs;
use crate::{Error, Result};

/// Default smoothing accuracy on the inverse-SINR scale.
pub const DEFAULT_SMOOTHING_EPS: f64 = 1e-3;

/// Log-domain powers with their box bound.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerState {
    pub theta: Array1<f64>,
    pub theta_max: f64,
}

impl PowerState {
    /// Every user at the power cap.
    pub fn full_power(users: usize, power_cap: f64) -> Self {
        let theta_max = power_cap.ln();
        Self {
            theta: Array1::from_elem(users, theta_max),
            theta_max,
        }
    }

    pub fn eta(&self) -> Array1<f64> {
        self.theta.mapv(f64::exp)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApgConfig {
    /// Smoothness parameter of the log-sum-exp surrogate.
    pub tau: f64,
    /// Step size; the initial trial step when backtracking is on.
    pub alpha: f64,
    pub max_iters: usize,
    /// Stop once the smoothed objective changes by less than this.
    pub tol: f64,
    pub backtracking: bool,
    /// Step shrink factor used by the backtracking search.
    pub shrink: f64,
    /// Reset momentum whenever an accelerated step increases the objective.
    pub restart: bool,
}

impl ApgConfig {
    /// Defaults for `users` users: `tau = log(K) / 1e-3`, backtracking on.
    pub fn for_users(users: usize) -> Self {
        Self {
            tau: default_tau(users, DEFAULT_SMOOTHING_EPS),
            alpha: 1.0,
            max_iters: 20_000,
            tol: 1e-5,
            backtracking: true,
            shrink: 0.5,
            restart: false,
        }
    }

    /// Backtracking plus adaptive restart.
    pub fn robust(users: usize) -> Self {
        Self {
            restart: true,
            ..Self::for_users(users)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.alpha > 0.0 && self.tol > 0.0) {
            return Err(Error::InvalidParam(
                "tau, alpha and tol must be positive".into(),
            ));
        }
        if self.backtracking && !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidParam(
                "shrink factor must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// `tau = log(K) / eps`; a single user has no smoothing error, so
/// `1 / eps` is used there.
pub fn default_tau(users: usize, eps: f64) -> f64 {
    if users > 1 {
        (users as f64).ln() / eps
    } else {
        1.0 / eps
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApgRecord {
    pub iter: usize,
    pub f_smooth: f64,
    /// `max_k f_k`, the inverse of the minimum SINR.
    pub f_true: f64,
    pub elapsed_s: f64,
}

impl ApgRecord {
    pub fn min_sinr(&self) -> f64 {
        1.0 / self.f_true
    }

    pub fn min_se(&self, pre_log_factor: f64) -> f64 {
        pre_log_factor * self.min_sinr().ln_1p() / std::f64::consts::LN_2
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ApgTrace {
    pub records: Vec<ApgRecord>,
    /// Smoothed objective at each momentum-restart anchor.
    pub restart_values: Vec<f64>,
}

impl ApgTrace {
    pub fn write_csv<W: Write>(&self, mut out: W, pre_log_factor: f64) -> std::io::Result<()> {
        writeln!(out, "iter,f_smooth,f_true,min_se,elapsed_s")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.iter,
                fmt_f64(r.f_smooth),
                fmt_f64(r.f_true),
                fmt_f64(r.min_se(pre_log_factor)),
                fmt_f64(r.elapsed_s)
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path, pre_log_factor: f64) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, pre_log_factor)
            .map_err(|e| Error::io(path, e))?;
        let mut f = CsvFile::create(path)?;
        f.line(String::from_utf8_lossy(&buf).trim_end())?;
        f.finish()
    }
}

#[derive(Debug, Clone)]
pub struct ApgSolution {
    pub state: PowerState,
    pub trace: ApgTrace,
    pub iterations: usize,
    /// False when the iteration cap was reached first.
    pub converged: bool,
}

/// The smoothed max-of-inverse-SINR objective for fixed coefficients.
#[derive(Debug, Clone)]
pub struct SmoothedObjective {
    coupling: Array2<f64>,
    self_term: Array1<f64>,
    noise: Array1<f64>,
    tau: f64,
    // scratch: e[[k, i]] = coupling_ki * exp(theta_i - theta_k)
    terms: Array2<f64>,
    shifted: Array1<f64>,
    noise_terms: Array1<f64>,
    f: Array1<f64>,
    weights: Array1<f64>,
}

impl SmoothedObjective {
    pub fn new(coeffs: &ReducedCoeffs, tau: f64) -> Self {
        let k = coeffs.num_users();
        Self {
            coupling: coeffs.coupling(),
            self_term: coeffs.b.diag().to_owned(),
            noise: coeffs.c.clone(),
            tau,
            terms: Array2::zeros((k, k)),
            shifted: Array1::zeros(k),
            noise_terms: Array1::zeros(k),
            f: Array1::zeros(k),
            weights: Array1::zeros(k),
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn set_tau(&mut self, tau: f64) {
        self.tau = tau;
    }

    pub fn num_users(&self) -> usize {
        self.noise.len()
    }

    /// Fills `out` with `f_k(theta)`; the coupling exponentials are left in
    /// the scratch matrix for the gradient.
    ///
    /// When the spread of `theta` is moderate, `exp(theta_i - theta_k)` is
    /// formed as a ratio of exponentials shifted by `max theta`, which needs
    /// K instead of K^2 calls to `exp`. Both factors are then within
    /// `[exp(-SPREAD_LIMIT), 1]`, so nothing overflows or underflows.
    fn fill_components(&mut self, theta: ArrayView1<'_, f64>, out: &mut Array1<f64>) {
        const SPREAD_LIMIT: f64 = 600.0;
        let k = self.num_users();
        let hi = theta.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lo = theta.fold(f64::INFINITY, |a, &b| a.min(b));
        let shifted = hi - lo < SPREAD_LIMIT && hi.abs() < SPREAD_LIMIT;
        let noise_scale = if shifted { (-hi).exp() } else { 0.0 };
        if shifted {
            for i in 0..k {
                self.shifted[i] = (theta[i] - hi).exp();
            }
        }
        for user in 0..k {
            let tk = theta[user];
            let row = self.coupling.row(user);
            let mut trow = self.terms.row_mut(user);
            let noise_exp = if shifted {
                let inv_pk = 1.0 / self.shifted[user];
                Zip::from(&mut trow)
                    .and(&row)
                    .and(&self.shifted)
                    .for_each(|e, &s, &p| *e = s * p * inv_pk);
                noise_scale * inv_pk
            } else {
                Zip::from(&mut trow)
                    .and(&row)
                    .and(&theta)
                    .for_each(|e, &s, &ti| *e = if s == 0.0 { 0.0 } else { s * (ti - tk).exp() });
                (-tk).exp()
            };
            self.noise_terms[user] = self.noise[user] * noise_exp;
            out[user] = self.self_term[user] + trow.sum() + self.noise_terms[user];
        }
    }

    pub fn components(&mut self, theta: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.num_users());
        self.fill_components(theta, &mut out);
        out
    }

    /// Smoothed value together with `max_k f_k`.
    pub fn value(&mut self, theta: ArrayView1<'_, f64>) -> (f64, f64) {
        let mut f = std::mem::take(&mut self.f);
        self.fill_components(theta, &mut f);
        let fmax = f.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let v = log_sum_exp(f.view(), self.tau, fmax);
        self.f = f;
        (v, fmax)
    }

    /// Smoothed value, `max_k f_k`, and the gradient written into `grad`.
    pub fn value_and_gradient(
        &mut self,
        theta: ArrayView1<'_, f64>,
        grad: &mut Array1<f64>,
    ) -> (f64, f64) {
        let k = self.num_users();
        let mut f = std::mem::take(&mut self.f);
        self.fill_components(theta, &mut f);
        let fmax = f.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let tau = self.tau;
        let mut total = 0.0;
        for (w, &v) in self.weights.iter_mut().zip(f.iter()) {
            *w = shifted_exp(tau * (v - fmax));
            total += *w;
        }

        grad.fill(0.0);
        for user in 0..k {
            let w = self.weights[user] / total;
            if w == 0.0 {
                continue;
            }
            let mut own = self.noise_terms[user];
            let row = self.terms.row(user);
            for i in 0..k {
                let e = row[i];
                grad[i] += w * e;
                own += e;
            }
            grad[user] -= w * own;
        }
        self.f = f;
        (fmax + total.ln() / tau, fmax)
    }
}

/// `exp(x)` for `x <= 0`, flushing results below the normal range to zero
/// without going through the libm underflow path.
#[inline]
fn shifted_exp(x: f64) -> f64 {
    if x < -700.0 {
        0.0
    } else {
        x.exp()
    }
}

fn log_sum_exp(f: ArrayView1<'_, f64>, tau: f64, fmax: f64) -> f64 {
    let s: f64 = f.iter().map(|&v| shifted_exp(tau * (v - fmax))).sum();
    fmax + s.ln() / tau
}

/// Softmax weights `e^{tau f_k} / sum_j e^{tau f_j}`, computed with the
/// maximum subtracted.
pub fn softmax(f: ArrayView1<'_, f64>, tau: f64, fmax: f64) -> Array1<f64> {
    let mut w = f.mapv(|v| shifted_exp(tau * (v - fmax)));
    let s = w.sum();
    w /= s;
    w
}

/// `f_k(theta) = 1 / gamma_k(exp(theta))` for every user.
pub fn inv_sinr(theta: ArrayView1<'_, f64>, coeffs: &ReducedCoeffs) -> Array1<f64> {
    SmoothedObjective::new(coeffs, 1.0).components(theta)
}

pub fn smoothed_objective(theta: ArrayView1<'_, f64>, coeffs: &ReducedCoeffs, tau: f64) -> f64 {
    SmoothedObjective::new(coeffs, tau).value(theta).0
}

pub fn gradient(theta: ArrayView1<'_, f64>, coeffs: &ReducedCoeffs, tau: f64) -> Array1<f64> {
    let mut g = Array1::zeros(theta.len());
    SmoothedObjective::new(coeffs, tau).value_and_gradient(theta, &mut g);
    g
}

/// Euclidean projection onto `{theta <= theta_max}`.
pub fn project(x: ArrayView1<'_, f64>, theta_max: f64) -> Array1<f64> {
    x.mapv(|v| v.min(theta_max))
}

/// Next element of the momentum sequence `t_{n+1} = (1 + sqrt(4 t_n^2 + 1)) / 2`.
pub fn next_momentum(t: f64) -> f64 {
    0.5 * (1.0 + (4.0 * t * t + 1.0).sqrt())
}

/// Minimizes the smoothed objective over `theta <= theta_max` starting from
/// `theta0` (projected first).
pub fn apg_solve(
    coeffs: &ReducedCoeffs,
    theta0: ArrayView1<'_, f64>,
    theta_max: f64,
    config: &ApgConfig,
) -> Result<ApgSolution> {
    config.validate()?;
    let k = coeffs.num_users();
    if theta0.len() != k {
        return Err(Error::Dimension(format!(
            "theta0 has {} entries, expected {k}",
            theta0.len()
        )));
    }
    let start = Instant::now();
    let mut obj = SmoothedObjective::new(coeffs, config.tau);

    let mut theta = project(theta0, theta_max);
    let mut theta_prev = theta.clone();
    let (mut f_cur, f_true) = obj.value(theta.view());
    let mut trace = ApgTrace::default();
    trace.records.push(ApgRecord {
        iter: 0,
        f_smooth: f_cur,
        f_true,
        elapsed_s: 0.0,
    });

    let mut t_prev = 1.0;
    let mut t = 1.0;
    let mut alpha = config.alpha;
    let mut grad = Array1::zeros(k);
    let mut y = Array1::zeros(k);
    let mut cand = Array1::zeros(k);
    let mut converged = false;
    let mut iterations = 0;

    for n in 1..=config.max_iters {
        iterations = n;
        let momentum = (t_prev - 1.0) / t;
        Zip::from(&mut y)
            .and(&theta)
            .and(&theta_prev)
            .for_each(|y, &a, &b| *y = a + momentum * (a - b));
        let (f_y, _) = obj.value_and_gradient(y.view(), &mut grad);

        let (f_cand, f_cand_true) = loop {
            Zip::from(&mut cand)
                .and(&y)
                .and(&grad)
                .for_each(|c, &y, &g| *c = (y - alpha * g).min(theta_max));
            let (f_c, f_c_true) = obj.value(cand.view());
            if !config.backtracking {
                break (f_c, f_c_true);
            }
            let (mut lin, mut sq) = (0.0, 0.0);
            for i in 0..k {
                let d = cand[i] - y[i];
                lin += grad[i] * d;
                sq += d * d;
            }
            let bound = f_y + lin + sq / (2.0 * alpha);
            // A vanishing step means y is already stationary.
            if f_c <= bound + 1e-15 * f_y.abs() || sq == 0.0 {
                break (f_c, f_c_true);
            }
            alpha *= config.shrink;
        };

        if config.restart && momentum > 0.0 && f_cand > f_cur {
            trace.restart_values.push(f_cur);
            theta_prev.assign(&theta);
            t_prev = 1.0;
            t = 1.0;
            continue;
        }

        std::mem::swap(&mut theta_prev, &mut theta);
        std::mem::swap(&mut theta, &mut cand);
        let t_next = next_momentum(t);
        t_prev = t;
        t = t_next;

        trace.records.push(ApgRecord {
            iter: n,
            f_smooth: f_cand,
            f_true: f_cand_true,
            elapsed_s: start.elapsed().as_secs_f64(),
        });
        let change = (f_cand - f_cur).abs();
        f_cur = f_cand;
        if change < config.tol {
            converged = true;
            break;
        }
    }

    Ok(ApgSolution {
        state: PowerState { theta, theta_max },
        trace,
        iterations,
        converged,
    })
}
