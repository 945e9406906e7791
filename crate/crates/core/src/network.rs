//! Network realization: AP/user drop, large-scale fading, pilot assignment
//! and MMSE channel-estimation statistics.
//!
//! Large-scale coefficients are stored noise-normalized (`beta = beta_bar /
//! noise_power`, in 1/W) while transmit powers stay in watts, so that
//! `power * beta` is directly a received SNR.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::csvio::{fmt_f64, parse_field, read_table, CsvFile};
use crate::{Error, Result};

/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.381e-23;
/// Noise temperature (K).
pub const NOISE_TEMPERATURE_K: f64 = 290.0;

pub type Point = [f64; 2];

/// Three-slope path loss in dB with distances in km.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeSlope {
    pub loss_db: f64,
    pub d0_km: f64,
    pub d1_km: f64,
}

impl Default for ThreeSlope {
    fn default() -> Self {
        Self {
            loss_db: 140.7,
            d0_km: 0.01,
            d1_km: 0.05,
        }
    }
}

impl ThreeSlope {
    pub fn path_loss_db(&self, distance_km: f64) -> f64 {
        let d = distance_km;
        if d > self.d1_km {
            -self.loss_db - 35.0 * d.log10()
        } else if d > self.d0_km {
            -self.loss_db - 15.0 * self.d1_km.log10() - 20.0 * d.log10()
        } else {
            -self.loss_db - 15.0 * self.d1_km.log10() - 20.0 * self.d0_km.log10()
        }
    }
}

/// Path loss with the default three-slope constants.
pub fn path_loss_db(distance_km: f64) -> f64 {
    ThreeSlope::default().path_loss_db(distance_km)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    /// Number of APs (M).
    pub aps: usize,
    /// Number of users (K).
    pub users: usize,
    /// Antennas per AP (L).
    pub antennas: usize,
    /// Side of the square coverage area in km (D).
    pub side_km: f64,
    /// Coherence interval in symbols (T_c).
    pub coherence_len: usize,
    /// Pilot length in symbols (T_p).
    pub pilot_len: usize,
    pub zeta_p_watt: f64,
    pub zeta_u_watt: f64,
    pub sigma_sh_db: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub seed: u64,
    pub path_loss: ThreeSlope,
    /// Measure distances on a torus of side `side_km`.
    pub wrap_around: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            aps: 150,
            users: 20,
            antennas: 1,
            side_km: 1.0,
            coherence_len: 200,
            pilot_len: 20,
            zeta_p_watt: 0.2,
            zeta_u_watt: 0.2,
            sigma_sh_db: 8.0,
            bandwidth_hz: 20e6,
            noise_figure_db: 9.0,
            seed: 0,
            path_loss: ThreeSlope::default(),
            wrap_around: true,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParam(msg.to_owned()));
        if self.aps == 0 || self.users == 0 || self.antennas == 0 {
            return bad("M, K and L must be at least 1");
        }
        if self.pilot_len == 0 || self.pilot_len >= self.coherence_len {
            return bad("pilot length must satisfy 1 <= T_p < T_c");
        }
        if !(self.side_km > 0.0) {
            return bad("area side D must be positive");
        }
        for (name, v) in [
            ("zeta_p_watt", self.zeta_p_watt),
            ("zeta_u_watt", self.zeta_u_watt),
            ("bandwidth_hz", self.bandwidth_hz),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParam(format!("{name} must be positive")));
            }
        }
        if !(self.sigma_sh_db >= 0.0) {
            return bad("shadowing std dev must be non-negative");
        }
        let pl = &self.path_loss;
        if !(pl.d0_km > 0.0 && pl.d0_km <= pl.d1_km) {
            return bad("path loss breakpoints must satisfy 0 < d0 <= d1");
        }
        Ok(())
    }

    /// Thermal noise power `B k_B T_0 W` in watts.
    pub fn noise_power_watt(&self) -> f64 {
        self.bandwidth_hz
            * BOLTZMANN
            * NOISE_TEMPERATURE_K
            * 10f64.powf(self.noise_figure_db / 10.0)
    }

    /// Per-user power cap of the uplink payload, `eta_max / L`.
    pub fn power_cap(&self) -> f64 {
        self.zeta_u_watt / self.antennas as f64
    }

    /// Pre-log factor `1 - T_p / T_c` of the spectral efficiency.
    pub fn pre_log_factor(&self) -> f64 {
        1.0 - self.pilot_len as f64 / self.coherence_len as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub side_km: f64,
    pub ap_positions: Vec<Point>,
    pub user_positions: Vec<Point>,
}

impl Geometry {
    pub fn distance_km(&self, ap: usize, user: usize, wrap_around: bool) -> f64 {
        let a = self.ap_positions[ap];
        let u = self.user_positions[user];
        let mut dx = (a[0] - u[0]).abs();
        let mut dy = (a[1] - u[1]).abs();
        if wrap_around {
            dx = dx.min(self.side_km - dx);
            dy = dy.min(self.side_km - dy);
        }
        dx.hypot(dy)
    }
}

/// AP/user positions together with the noise-normalized large-scale fading.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScaleModel {
    pub geometry: Geometry,
    /// M x K matrix, `beta[[m, k]]` between AP m and user k.
    pub beta: Array2<f64>,
}

pub fn generate_geometry<R: Rng + ?Sized>(params: &SimParams, rng: &mut R) -> Result<Geometry> {
    params.validate()?;
    let d = params.side_km;
    let mut draw = |n: usize| -> Vec<Point> {
        (0..n)
            .map(|_| [rng.random::<f64>() * d, rng.random::<f64>() * d])
            .collect()
    };
    let ap_positions = draw(params.aps);
    let user_positions = draw(params.users);
    Ok(Geometry {
        side_km: d,
        ap_positions,
        user_positions,
    })
}

/// Draws log-normal shadowing on top of the three-slope path loss and
/// normalizes by the receiver noise power.
pub fn large_scale_fading<R: Rng + ?Sized>(
    geometry: Geometry,
    params: &SimParams,
    rng: &mut R,
) -> LargeScaleModel {
    let m = geometry.ap_positions.len();
    let k = geometry.user_positions.len();
    let noise = params.noise_power_watt();
    let mut beta = Array2::zeros((m, k));
    for ap in 0..m {
        for user in 0..k {
            let d = geometry.distance_km(ap, user, params.wrap_around);
            let z: f64 = rng.sample(StandardNormal);
            let db = params.path_loss.path_loss_db(d) + params.sigma_sh_db * z;
            beta[[ap, user]] = 10f64.powf(db / 10.0) / noise;
        }
    }
    LargeScaleModel { geometry, beta }
}

/// Orthonormal pilot assignment, described through `|psi_k^H psi_i|`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBook {
    pub pilot_len: usize,
    pub assignment: Vec<usize>,
    /// K x K matrix of pilot inner-product magnitudes.
    pub gram_abs: Array2<f64>,
}

impl PilotBook {
    pub fn from_assignment(pilot_len: usize, assignment: Vec<usize>) -> Self {
        let k = assignment.len();
        let gram_abs = Array2::from_shape_fn((k, k), |(a, b)| {
            if assignment[a] == assignment[b] {
                1.0
            } else {
                0.0
            }
        });
        Self {
            pilot_len,
            assignment,
            gram_abs,
        }
    }
}

pub fn assign_pilots<R: Rng + ?Sized>(users: usize, pilot_len: usize, rng: &mut R) -> PilotBook {
    assert!(pilot_len >= 1, "pilot length must be at least 1");
    let assignment = if users <= pilot_len {
        (0..users).collect()
    } else {
        (0..users).map(|_| rng.random_range(0..pilot_len)).collect()
    };
    PilotBook::from_assignment(pilot_len, assignment)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationStats {
    /// Estimator gains c_mk, M x K.
    pub c: Array2<f64>,
    /// Mean-square estimate per antenna element nu_mk, M x K.
    pub nu: Array2<f64>,
    /// Pilot power in the units matching `beta` (watts).
    pub pilot_power: f64,
}

/// MMSE estimation statistics for the given pilot power (watts) and length.
pub fn estimation_stats(
    beta: &Array2<f64>,
    pilots: &PilotBook,
    pilot_power: f64,
    pilot_len: usize,
) -> Result<EstimationStats> {
    let (m, k) = beta.dim();
    if pilots.gram_abs.dim() != (k, k) {
        return Err(Error::Dimension(format!(
            "pilot gram is {:?}, expected {k}x{k}",
            pilots.gram_abs.dim()
        )));
    }
    let rho = pilot_power * pilot_len as f64;
    let mut c = Array2::zeros((m, k));
    let mut nu = Array2::zeros((m, k));
    for ap in 0..m {
        for user in 0..k {
            let contamination: f64 = (0..k)
                .map(|i| beta[[ap, i]] * pilots.gram_abs[[user, i]].powi(2))
                .sum();
            let denom = rho * contamination + 1.0;
            let b = beta[[ap, user]];
            c[[ap, user]] = rho.sqrt() * b / denom;
            nu[[ap, user]] = rho * b * b / denom;
        }
    }
    Ok(EstimationStats { c, nu, pilot_power })
}

/// One complete channel realization.
#[derive(Debug, Clone)]
pub struct Network {
    pub params: SimParams,
    pub model: LargeScaleModel,
    pub pilots: PilotBook,
    pub stats: EstimationStats,
}

impl Network {
    /// Draws geometry, shadowing and pilots, in that order, from a single
    /// ChaCha stream seeded with `params.seed`.
    pub fn generate(params: &SimParams) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let geometry = generate_geometry(params, &mut rng)?;
        let model = large_scale_fading(geometry, params, &mut rng);
        let pilots = assign_pilots(params.users, params.pilot_len, &mut rng);
        let stats = estimation_stats(&model.beta, &pilots, params.zeta_p_watt, params.pilot_len)?;
        Ok(Self {
            params: params.clone(),
            model,
            pilots,
            stats,
        })
    }
}

impl LargeScaleModel {
    /// Writes `<stem>_positions.csv` and `<stem>_beta.csv` under `dir`.
    pub fn write_csv_bundle(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        let pos_path = dir.join(format!("{stem}_positions.csv"));
        let beta_path = dir.join(format!("{stem}_beta.csv"));

        let mut pos = CsvFile::create(&pos_path)?;
        pos.line("kind,index,x_km,y_km")?;
        pos.line(&format!(
            "side,0,{},{}",
            fmt_f64(self.geometry.side_km),
            fmt_f64(self.geometry.side_km)
        ))?;
        for (kind, points) in [
            ("ap", &self.geometry.ap_positions),
            ("user", &self.geometry.user_positions),
        ] {
            for (i, p) in points.iter().enumerate() {
                pos.row(&[kind.to_owned(), i.to_string(), fmt_f64(p[0]), fmt_f64(p[1])])?;
            }
        }
        pos.finish()?;

        let (m, k) = self.beta.dim();
        let mut beta = CsvFile::create(&beta_path)?;
        let mut header = vec!["ap".to_owned()];
        header.extend((0..k).map(|u| format!("user{u}")));
        beta.row(&header)?;
        for ap in 0..m {
            let mut row = vec![ap.to_string()];
            row.extend(self.beta.row(ap).iter().map(|&b| fmt_f64(b)));
            beta.row(&row)?;
        }
        beta.finish()?;
        Ok((pos_path, beta_path))
    }

    pub fn read_csv_bundle(dir: &Path, stem: &str) -> Result<Self> {
        let pos_path = dir.join(format!("{stem}_positions.csv"));
        let beta_path = dir.join(format!("{stem}_beta.csv"));

        let (_, rows) = read_table(&pos_path)?;
        let mut side_km = f64::NAN;
        let mut ap_positions = Vec::new();
        let mut user_positions = Vec::new();
        for row in rows {
            if row.len() != 4 {
                return Err(Error::Csv {
                    path: pos_path,
                    msg: "positions rows need 4 fields".into(),
                });
            }
            let x: f64 = parse_field(&pos_path, &row[2])?;
            let y: f64 = parse_field(&pos_path, &row[3])?;
            match row[0].as_str() {
                "side" => side_km = x,
                "ap" => ap_positions.push([x, y]),
                "user" => user_positions.push([x, y]),
                other => {
                    return Err(Error::Csv {
                        path: pos_path,
                        msg: format!("unknown point kind {other:?}"),
                    })
                }
            }
        }

        let (header, rows) = read_table(&beta_path)?;
        let k = header.len().saturating_sub(1);
        let m = rows.len();
        let mut beta = Array2::zeros((m, k));
        for (ap, row) in rows.iter().enumerate() {
            if row.len() != k + 1 {
                return Err(Error::Csv {
                    path: beta_path,
                    msg: format!("row {ap} has {} fields, expected {}", row.len(), k + 1),
                });
            }
            for user in 0..k {
                beta[[ap, user]] = parse_field(&beta_path, &row[user + 1])?;
            }
        }
        if ap_positions.len() != m || user_positions.len() != k {
            return Err(Error::Dimension(
                "positions bundle does not match beta matrix".into(),
            ));
        }
        Ok(Self {
            geometry: Geometry {
                side_km,
                ap_positions,
                user_positions,
            },
            beta,
        })
    }
}
