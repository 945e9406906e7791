//! Alternating optimization of receive weights and powers.
//!
//! Each outer iteration recomputes the optimal receive vectors at the
//! current powers and then re-solves the power-control problem with those
//! vectors fixed, using either the APG solver or the exact oracle.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array1, ArrayView1};

use crate::apg::{apg_solve, ApgConfig, PowerState, SmoothedObjective};
use crate::oracle::{bisection_solve, DEFAULT_TOL_T};
use crate::receiver::optimal_weights;
use crate::sinr::{reduce_coeffs, sinr, ReceiverWeights, SinrTerms};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerSolver {
    Apg,
    Oracle,
}

impl fmt::Display for PowerSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PowerSolver::Apg => "apg",
            PowerSolver::Oracle => "oracle",
        })
    }
}

impl FromStr for PowerSolver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "apg" => Ok(PowerSolver::Apg),
            "oracle" => Ok(PowerSolver::Oracle),
            other => Err(Error::Config(format!("unknown power solver {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    /// Stop once the min-SE improves by less than this (bit/s/Hz).
    pub outer_tol: f64,
    pub outer_max_iters: usize,
    pub apg: ApgConfig,
    pub power_solver: PowerSolver,
    /// Bisection bracket width of the oracle solver.
    pub oracle_tol_t: f64,
    /// Double tau at every outer iteration.
    pub tau_continuation: bool,
    /// `1 - T_p / T_c`.
    pub pre_log_factor: f64,
}

impl SolveConfig {
    pub fn for_users(users: usize) -> Self {
        Self {
            outer_tol: 1e-5,
            outer_max_iters: 1000,
            apg: ApgConfig::for_users(users),
            power_solver: PowerSolver::Apg,
            oracle_tol_t: DEFAULT_TOL_T,
            tau_continuation: false,
            pre_log_factor: 0.9,
        }
    }

    pub fn with_solver(mut self, solver: PowerSolver) -> Self {
        self.power_solver = solver;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.outer_tol > 0.0) || self.outer_max_iters == 0 {
            return Err(Error::InvalidParam(
                "outer_tol must be positive and outer_max_iters at least 1".into(),
            ));
        }
        if !(self.oracle_tol_t > 0.0) {
            return Err(Error::InvalidParam("oracle tol_t must be positive".into()));
        }
        if !(self.pre_log_factor > 0.0 && self.pre_log_factor <= 1.0) {
            return Err(Error::InvalidParam(
                "pre-log factor must lie in (0, 1]".into(),
            ));
        }
        self.apg.validate()
    }
}

/// State after one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterRecord {
    pub iter: usize,
    pub min_se: f64,
    pub min_sinr: f64,
    /// Power-solver iterations spent in this outer iteration (APG steps or
    /// bisection steps).
    pub power_iters: usize,
    /// The power update was rejected because it lowered the min SINR.
    pub kept_incumbent: bool,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub min_se: f64,
    pub se_per_user: Array1<f64>,
    pub eta_star: Array1<f64>,
    pub weights_star: ReceiverWeights,
    pub outer_iters: usize,
    pub total_apg_iters: usize,
    pub wall_time_s: f64,
    pub converged: bool,
    /// Min-SE at the starting point (full power, first receiver update).
    pub initial_min_se: f64,
    pub initial_min_sinr: f64,
    pub history: Vec<OuterRecord>,
    /// Number of APG calls that stopped at the iteration cap.
    pub apg_capped: usize,
}

fn se(pre_log: f64, gamma: f64) -> f64 {
    pre_log * gamma.ln_1p() / std::f64::consts::LN_2
}

fn min_of(v: ArrayView1<'_, f64>) -> f64 {
    v.fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Runs the alternating receiver / power optimization for user power cap
/// `eta_max / L`.
pub fn alternating_solve(
    terms: &SinrTerms,
    eta_max: f64,
    config: &SolveConfig,
) -> Result<SolveResult> {
    config.validate()?;
    if !(eta_max > 0.0) {
        return Err(Error::InvalidParam("eta_max must be positive".into()));
    }
    let start = Instant::now();
    let users = terms.num_users();
    let cap = eta_max / terms.antennas as f64;
    let mut state = PowerState::full_power(users, cap);
    let mut tau = config.apg.tau;

    let mut history = Vec::new();
    let mut total_power_iters = 0;
    let mut apg_capped = 0;
    let mut converged = false;
    let mut prev_se = f64::NAN;
    let mut initial_min_se = f64::NAN;
    let mut initial_min_sinr = f64::NAN;
    let mut weights = ReceiverWeights::uniform(users, terms.num_aps());

    for m in 1..=config.outer_max_iters {
        let eta = state.eta();
        weights = optimal_weights(terms, eta.view())?;
        let coeffs = reduce_coeffs(&weights, terms)?;

        let mut objective = SmoothedObjective::new(&coeffs, tau);
        let incumbent_f = objective.value(state.theta.view()).1;
        if m == 1 {
            initial_min_sinr = 1.0 / incumbent_f;
            initial_min_se = se(config.pre_log_factor, initial_min_sinr);
            prev_se = initial_min_se;
        }

        let (candidate, power_iters) = match config.power_solver {
            PowerSolver::Apg => {
                let apg = ApgConfig {
                    tau,
                    ..config.apg.clone()
                };
                let sol = apg_solve(&coeffs, state.theta.view(), state.theta_max, &apg)?;
                if !sol.converged {
                    apg_capped += 1;
                }
                (sol.state.theta, sol.iterations)
            }
            PowerSolver::Oracle => {
                let r = bisection_solve(&coeffs, cap, config.oracle_tol_t);
                (r.eta_star.mapv(f64::ln), r.bisection_iters)
            }
        };
        total_power_iters += power_iters;

        let candidate_f = objective.value(candidate.view()).1;
        let kept_incumbent = !(candidate_f <= incumbent_f);
        if !kept_incumbent {
            state.theta = candidate;
        }
        let f_now = candidate_f.min(incumbent_f);
        let min_se = se(config.pre_log_factor, 1.0 / f_now);
        history.push(OuterRecord {
            iter: m,
            min_se,
            min_sinr: 1.0 / f_now,
            power_iters,
            kept_incumbent,
        });

        let improvement = min_se - prev_se;
        prev_se = min_se;
        if improvement < config.outer_tol {
            converged = true;
            break;
        }
        if config.tau_continuation {
            tau *= 2.0;
            objective.set_tau(tau);
        }
    }

    let eta_star = state.eta();
    let gamma = sinr(eta_star.view(), &weights, terms);
    let se_per_user = gamma.mapv(|g| se(config.pre_log_factor, g));
    Ok(SolveResult {
        min_se: min_of(se_per_user.view()),
        se_per_user,
        eta_star,
        weights_star: weights,
        outer_iters: history.len(),
        total_apg_iters: total_power_iters,
        wall_time_s: start.elapsed().as_secs_f64(),
        converged,
        initial_min_se,
        initial_min_sinr,
        history,
        apg_capped,
    })
}
