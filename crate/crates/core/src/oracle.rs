//! Exact max-min power control at fixed receive weights.
//!
//! A target SINR `t` is feasible iff the standard interference map
//!
//! ```text
//! eta_k <- t (sum_{i!=k} (a_ki + b_ki) eta_i + c_k) / (1 - t b_kk)
//! ```
//!
//! has a fixed point inside the power box. Iterating the map from zero
//! produces a componentwise non-decreasing sequence that converges to the
//! minimal feasible power vector, so any iterate above the cap proves
//! infeasibility. Bisection on `t` then yields the max-min SINR.

use ndarray::{Array1, Array2, ArrayView1};

use crate::sinr::ReducedCoeffs;

/// Iteration cap of the fixed-point feasibility test.
pub const FIXED_POINT_MAX_ITERS: usize = 10_000;
/// Relative change at which the fixed-point iteration is considered converged.
pub const FIXED_POINT_RTOL: f64 = 1e-13;
pub const DEFAULT_TOL_T: f64 = 1e-6;

/// The interference map for a fixed target `t`.
#[derive(Debug, Clone)]
pub struct InterferenceMap {
    coupling: Array2<f64>,
    /// `t c_k / (1 - t b_kk)`.
    offset: Array1<f64>,
    /// `t / (1 - t b_kk)`.
    gain: Array1<f64>,
}

impl InterferenceMap {
    /// `None` when `t b_kk >= 1` for some user, i.e. the target exceeds
    /// what that user reaches even with no interference and infinite power.
    pub fn new(t: f64, coeffs: &ReducedCoeffs) -> Option<Self> {
        let k = coeffs.num_users();
        let mut gain = Array1::zeros(k);
        for user in 0..k {
            let margin = 1.0 - t * coeffs.b[[user, user]];
            if !(margin > 0.0) {
                return None;
            }
            gain[user] = t / margin;
        }
        Some(Self {
            coupling: coeffs.coupling(),
            offset: &gain * &coeffs.c,
            gain,
        })
    }

    pub fn apply(&self, eta: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut next = self.coupling.dot(&eta);
        next *= &self.gain;
        next += &self.offset;
        next
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// Minimal feasible powers when `feasible`, otherwise the last iterate.
    pub eta: Array1<f64>,
    pub iterations: usize,
}

pub fn feasibility(t: f64, coeffs: &ReducedCoeffs, power_cap: f64) -> Feasibility {
    let k = coeffs.num_users();
    let zero = Array1::zeros(k);
    if t <= 0.0 {
        return Feasibility {
            feasible: true,
            eta: zero,
            iterations: 0,
        };
    }
    let Some(map) = InterferenceMap::new(t, coeffs) else {
        return Feasibility {
            feasible: false,
            eta: zero,
            iterations: 0,
        };
    };

    let mut eta = zero;
    for it in 1..=FIXED_POINT_MAX_ITERS {
        let next = map.apply(eta.view());
        if next.iter().any(|&x| x > power_cap) {
            return Feasibility {
                feasible: false,
                eta: next,
                iterations: it,
            };
        }
        let settled = next
            .iter()
            .zip(eta.iter())
            .all(|(&n, &o)| (n - o).abs() <= FIXED_POINT_RTOL * n);
        eta = next;
        if settled {
            return Feasibility {
                feasible: true,
                eta,
                iterations: it,
            };
        }
    }
    Feasibility {
        feasible: false,
        eta,
        iterations: FIXED_POINT_MAX_ITERS,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub t_star: f64,
    pub eta_star: Array1<f64>,
    pub bisection_iters: usize,
    pub feasibility_iters_total: usize,
}

/// Upper bracket for the max-min SINR: the interference-free SINR of the
/// weakest user at full power. No power vector in the box can beat it.
pub fn sinr_upper_bound(coeffs: &ReducedCoeffs, power_cap: f64) -> f64 {
    (0..coeffs.num_users())
        .map(|k| power_cap / (coeffs.b[[k, k]] * power_cap + coeffs.c[k]))
        .fold(f64::INFINITY, f64::min)
}

pub fn bisection_solve(coeffs: &ReducedCoeffs, power_cap: f64, tol_t: f64) -> OracleResult {
    let k = coeffs.num_users();
    let mut lo = 0.0;
    let mut hi = sinr_upper_bound(coeffs, power_cap);
    let mut best = Array1::zeros(k);
    let mut bisection_iters = 0;
    let mut feas_iters = 0;

    let top = feasibility(hi, coeffs, power_cap);
    feas_iters += top.iterations;
    if top.feasible {
        lo = hi;
        best = top.eta;
    } else {
        while hi - lo > tol_t {
            bisection_iters += 1;
            let mid = 0.5 * (lo + hi);
            let probe = feasibility(mid, coeffs, power_cap);
            feas_iters += probe.iterations;
            if probe.feasible {
                lo = mid;
                best = probe.eta;
            } else {
                hi = mid;
            }
        }
    }

    // Scaling a feasible vector up raises every SINR, so push the largest
    // power onto the cap.
    let mut t_star = lo;
    let peak = best.fold(0.0f64, |a, &b| a.max(b));
    if peak > 0.0 {
        let scaled = &best * (power_cap / peak);
        let achieved = coeffs
            .sinr_eta(scaled.view())
            .fold(f64::INFINITY, |a, &b| a.min(b));
        if achieved >= t_star {
            t_star = achieved;
            best = scaled;
        }
    }

    OracleResult {
        t_star,
        eta_star: best,
        bisection_iters,
        feasibility_iters_total: feas_iters,
    }
}
