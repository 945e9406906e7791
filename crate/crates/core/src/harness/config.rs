//! Flat `key = value` experiment configuration.
//!
//! Keys are dotted (`sim.M`, `apg.tau`, `exp.M_list`); `#` starts a comment.
//! Every key can also be overridden from the command line under the same
//! name. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::apg::{default_tau, ApgConfig, DEFAULT_SMOOTHING_EPS};
use crate::network::SimParams;
use crate::solver::SolveConfig;
use crate::{Error, Result};

/// Every accepted key, in the order used when echoing a resolved config.
pub const KEYS: &[&str] = &[
    "sim.M",
    "sim.K",
    "sim.L",
    "sim.D",
    "sim.T_c",
    "sim.T_p",
    "sim.zeta_p_watt",
    "sim.zeta_u_watt",
    "sim.sigma_sh_db",
    "sim.bandwidth_hz",
    "sim.noise_figure_db",
    "sim.seed",
    "sim.pl_loss_db",
    "sim.pl_d0_km",
    "sim.pl_d1_km",
    "sim.wrap_around",
    "solve.outer_tol",
    "solve.outer_max_iters",
    "solve.power_solver",
    "solve.tau_continuation",
    "apg.tau",
    "apg.smoothing_eps",
    "apg.alpha",
    "apg.max_iters",
    "apg.tol",
    "apg.backtracking",
    "apg.shrink",
    "apg.restart",
    "oracle.tol_t",
    "exp.n_realizations",
    "exp.workers",
    "exp.L_list",
    "exp.M_list",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Trace,
    Cdf,
    Sweep,
    Bench,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Trace => "trace",
            ExperimentKind::Cdf => "cdf",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Bench => "bench",
        })
    }
}

/// Raw key/value pairs as read from a file and command-line overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            map.set(key.trim(), value.trim())?;
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key {key:?}")));
        }
        self.entries.insert(key.to_owned(), value.to_owned());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Applies every entry of `other` on top of `self`.
    pub fn merge(&mut self, other: &ConfigMap) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}"))),
        }
    }

    fn flag(&self, key: &str) -> Result<Option<bool>> {
        match self.get(key) {
            None => Ok(None),
            Some("true" | "1" | "on" | "yes") => Ok(Some(true)),
            Some("false" | "0" | "off" | "no") => Ok(Some(false)),
            Some(v) => Err(Error::Config(format!(
                "{key}: expected a boolean, got {v:?}"
            ))),
        }
    }

    fn list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|x| x.trim())
                .filter(|x| !x.is_empty())
                .map(|x| {
                    x.parse()
                        .map_err(|_| Error::Config(format!("{key}: cannot parse list entry {x:?}")))
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// `seed` doubles as the seed base: realization `r` uses `seed + r`.
    pub sim: SimParams,
    pub solve: SolveConfig,
    pub n_realizations: usize,
    pub workers: usize,
    pub l_list: Vec<usize>,
    pub m_list: Vec<usize>,
}

impl ExperimentConfig {
    /// Defaults for `kind`, before any key is applied.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let sim = SimParams::default();
        let solve = SolveConfig::for_users(sim.users);
        let (n_realizations, l_list, m_list) = match kind {
            ExperimentKind::Trace => (3, vec![sim.antennas], vec![sim.aps]),
            ExperimentKind::Cdf => (50, vec![sim.antennas], vec![sim.aps]),
            ExperimentKind::Sweep => (30, vec![1, 2, 4], vec![50, 100]),
            ExperimentKind::Bench => (3, vec![sim.antennas], vec![120, 160, 200, 240]),
        };
        Self {
            kind,
            sim,
            solve,
            n_realizations,
            workers: 1,
            l_list,
            m_list,
        }
    }

    pub fn from_map(kind: ExperimentKind, map: &ConfigMap) -> Result<Self> {
        let mut cfg = Self::defaults(kind);
        let sim = &mut cfg.sim;
        macro_rules! take {
            ($field:expr, $key:literal) => {
                if let Some(v) = map.parsed($key)? {
                    $field = v;
                }
            };
        }
        take!(sim.aps, "sim.M");
        take!(sim.users, "sim.K");
        take!(sim.antennas, "sim.L");
        take!(sim.side_km, "sim.D");
        take!(sim.coherence_len, "sim.T_c");
        take!(sim.pilot_len, "sim.T_p");
        take!(sim.zeta_p_watt, "sim.zeta_p_watt");
        take!(sim.zeta_u_watt, "sim.zeta_u_watt");
        take!(sim.sigma_sh_db, "sim.sigma_sh_db");
        take!(sim.bandwidth_hz, "sim.bandwidth_hz");
        take!(sim.noise_figure_db, "sim.noise_figure_db");
        take!(sim.seed, "sim.seed");
        take!(sim.path_loss.loss_db, "sim.pl_loss_db");
        take!(sim.path_loss.d0_km, "sim.pl_d0_km");
        take!(sim.path_loss.d1_km, "sim.pl_d1_km");
        if let Some(v) = map.flag("sim.wrap_around")? {
            sim.wrap_around = v;
        }
        let users = sim.users;
        let pre_log = sim.pre_log_factor();

        let mut solve = SolveConfig::for_users(users);
        solve.pre_log_factor = pre_log;
        take!(solve.outer_tol, "solve.outer_tol");
        take!(solve.outer_max_iters, "solve.outer_max_iters");
        take!(solve.power_solver, "solve.power_solver");
        if let Some(v) = map.flag("solve.tau_continuation")? {
            solve.tau_continuation = v;
        }
        take!(solve.oracle_tol_t, "oracle.tol_t");

        let eps: f64 = map
            .parsed("apg.smoothing_eps")?
            .unwrap_or(DEFAULT_SMOOTHING_EPS);
        if !(eps > 0.0) {
            return Err(Error::Config("apg.smoothing_eps must be positive".into()));
        }
        let apg: &mut ApgConfig = &mut solve.apg;
        apg.tau = default_tau(users, eps);
        take!(apg.tau, "apg.tau");
        take!(apg.alpha, "apg.alpha");
        take!(apg.max_iters, "apg.max_iters");
        take!(apg.tol, "apg.tol");
        take!(apg.shrink, "apg.shrink");
        if let Some(v) = map.flag("apg.backtracking")? {
            apg.backtracking = v;
        }
        if let Some(v) = map.flag("apg.restart")? {
            apg.restart = v;
        }
        cfg.solve = solve;

        take!(cfg.n_realizations, "exp.n_realizations");
        take!(cfg.workers, "exp.workers");
        match (kind, map.list("exp.L_list")?) {
            (_, Some(l)) => cfg.l_list = l,
            (ExperimentKind::Sweep, None) => {}
            (_, None) => cfg.l_list = vec![cfg.sim.antennas],
        }
        match (kind, map.list("exp.M_list")?) {
            (_, Some(m)) => cfg.m_list = m,
            (ExperimentKind::Sweep | ExperimentKind::Bench, None) => {}
            (_, None) => cfg.m_list = vec![cfg.sim.aps],
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| match e {
            Error::InvalidParam(msg) => Error::Config(msg),
            other => other,
        };
        self.sim.validate().map_err(cfg_err)?;
        self.solve.validate().map_err(cfg_err)?;
        if self.n_realizations == 0 {
            return Err(Error::Config(
                "exp.n_realizations must be at least 1".into(),
            ));
        }
        if self.workers == 0 {
            return Err(Error::Config("exp.workers must be at least 1".into()));
        }
        if self.l_list.is_empty() || self.m_list.is_empty() {
            return Err(Error::Config(
                "exp.L_list and exp.M_list must be non-empty".into(),
            ));
        }
        if self.l_list.contains(&0) || self.m_list.contains(&0) {
            return Err(Error::Config(
                "exp.L_list and exp.M_list entries must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Simulation parameters of realization `index` at a grid point.
    pub fn realization_params(&self, aps: usize, antennas: usize, index: usize) -> SimParams {
        SimParams {
            aps,
            antennas,
            seed: self.sim.seed.wrapping_add(index as u64),
            ..self.sim.clone()
        }
    }

    /// Every key with its resolved value, `key=value` separated by `;`.
    /// The worker count is left out since it never affects results.
    pub fn resolved(&self) -> String {
        let s = &self.sim;
        let v = &self.solve;
        let a = &v.apg;
        let join = |l: &[usize]| l.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let pairs: Vec<(&str, String)> = vec![
            ("kind", self.kind.to_string()),
            ("sim.M", s.aps.to_string()),
            ("sim.K", s.users.to_string()),
            ("sim.L", s.antennas.to_string()),
            ("sim.D", s.side_km.to_string()),
            ("sim.T_c", s.coherence_len.to_string()),
            ("sim.T_p", s.pilot_len.to_string()),
            ("sim.zeta_p_watt", s.zeta_p_watt.to_string()),
            ("sim.zeta_u_watt", s.zeta_u_watt.to_string()),
            ("sim.sigma_sh_db", s.sigma_sh_db.to_string()),
            ("sim.bandwidth_hz", s.bandwidth_hz.to_string()),
            ("sim.noise_figure_db", s.noise_figure_db.to_string()),
            ("sim.seed", s.seed.to_string()),
            ("sim.pl_loss_db", s.path_loss.loss_db.to_string()),
            ("sim.pl_d0_km", s.path_loss.d0_km.to_string()),
            ("sim.pl_d1_km", s.path_loss.d1_km.to_string()),
            ("sim.wrap_around", s.wrap_around.to_string()),
            ("solve.outer_tol", v.outer_tol.to_string()),
            ("solve.outer_max_iters", v.outer_max_iters.to_string()),
            ("solve.power_solver", v.power_solver.to_string()),
            ("solve.tau_continuation", v.tau_continuation.to_string()),
            ("apg.tau", a.tau.to_string()),
            ("apg.alpha", a.alpha.to_string()),
            ("apg.max_iters", a.max_iters.to_string()),
            ("apg.tol", a.tol.to_string()),
            ("apg.backtracking", a.backtracking.to_string()),
            ("apg.shrink", a.shrink.to_string()),
            ("apg.restart", a.restart.to_string()),
            ("oracle.tol_t", v.oracle_tol_t.to_string()),
            ("exp.n_realizations", self.n_realizations.to_string()),
            ("exp.L_list", join(&self.l_list)),
            ("exp.M_list", join(&self.m_list)),
        ];
        pairs
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}
