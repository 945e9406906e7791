//! Closed-form SINR structure of the combined uplink signal.
//!
//! For user k the SINR is the ratio of quadratic forms
//!
//! ```text
//! gamma_k = eta_k (u_k^T nu_kk)^2
//!         / ( sum_{i!=k} eta_i (u_k^T nu_ki)^2
//!             + (1/L) sum_i eta_i u_k^T D_ki u_k + (1/L) u_k^T R_k u_k )
//! ```
//!
//! where `D_ki` and `R_k` are diagonal and therefore stored as M-vectors.
//! Every quantity is real and non-negative, so receive weights are real too.

use ndarray::{Array1, Array2, Array3, ArrayView1};

use crate::network::{EstimationStats, PilotBook};
use crate::{Error, Result};

/// `|u_k^T nu_kk|^2` below this value is treated as a broken receive vector.
pub const DEGENERATE_BEAM_TOL: f64 = 1e-30;

#[derive(Debug, Clone)]
pub struct SinrTerms {
    /// `nu[[k, i, m]]`: entry m of the cross-estimate vector nu_ki.
    pub nu: Array3<f64>,
    /// `d[[k, i, m]] = nu_mk * beta_mi`, the diagonal of D_ki.
    pub d: Array3<f64>,
    /// `r[[k, m]] = nu_mk`, the diagonal of R_k.
    pub r: Array2<f64>,
    /// Pilot inner-product magnitudes; zero entries mark users whose nu_ki
    /// vanishes identically.
    pub gram_abs: Array2<f64>,
    pub antennas: usize,
}

impl SinrTerms {
    pub fn num_users(&self) -> usize {
        self.r.nrows()
    }

    pub fn num_aps(&self) -> usize {
        self.r.ncols()
    }

    pub fn nu_vec(&self, k: usize, i: usize) -> ArrayView1<'_, f64> {
        self.nu.slice(ndarray::s![k, i, ..])
    }

    pub fn d_diag(&self, k: usize, i: usize) -> ArrayView1<'_, f64> {
        self.d.slice(ndarray::s![k, i, ..])
    }

    pub fn r_diag(&self, k: usize) -> ArrayView1<'_, f64> {
        self.r.row(k)
    }

    /// Whether user i shares a pilot (in the gram sense) with user k, i != k.
    pub fn is_copilot(&self, k: usize, i: usize) -> bool {
        i != k && self.gram_abs[[k, i]] != 0.0
    }
}

pub fn build_sinr_terms(
    stats: &EstimationStats,
    beta: &Array2<f64>,
    pilots: &PilotBook,
    antennas: usize,
) -> Result<SinrTerms> {
    let (m, k) = beta.dim();
    if stats.nu.dim() != (m, k) || pilots.gram_abs.dim() != (k, k) {
        return Err(Error::Dimension(format!(
            "beta {:?}, nu {:?}, gram {:?}",
            beta.dim(),
            stats.nu.dim(),
            pilots.gram_abs.dim()
        )));
    }
    if antennas == 0 {
        return Err(Error::InvalidParam("L must be at least 1".into()));
    }
    if let Some(((ap, user), _)) = beta.indexed_iter().find(|(_, &b)| !(b > 0.0)) {
        return Err(Error::ZeroBeta { ap, user });
    }

    let mut nu = Array3::zeros((k, k, m));
    let mut d = Array3::zeros((k, k, m));
    let mut r = Array2::zeros((k, m));
    for user in 0..k {
        for ap in 0..m {
            r[[user, ap]] = stats.nu[[ap, user]];
        }
        for i in 0..k {
            let g = pilots.gram_abs[[user, i]];
            for ap in 0..m {
                let nu_mk = stats.nu[[ap, user]];
                if i == user {
                    nu[[user, i, ap]] = nu_mk;
                } else if g != 0.0 {
                    nu[[user, i, ap]] = g * nu_mk * beta[[ap, i]] / beta[[ap, user]];
                }
                d[[user, i, ap]] = nu_mk * beta[[ap, i]];
            }
        }
    }
    Ok(SinrTerms {
        nu,
        d,
        r,
        gram_abs: pilots.gram_abs.clone(),
        antennas,
    })
}

/// Real unit-norm combining vectors, one row of length M per user.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverWeights {
    pub u: Array2<f64>,
}

impl ReceiverWeights {
    /// Normalizes every row of `raw` to unit Euclidean norm.
    pub fn from_unnormalized(mut raw: Array2<f64>) -> Result<Self> {
        for (k, mut row) in raw.rows_mut().into_iter().enumerate() {
            let norm = row.dot(&row).sqrt();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::DegenerateBeam { user: k, gain: 0.0 });
            }
            row /= norm;
        }
        Ok(Self { u: raw })
    }

    /// All-ones combining (plain MRC at the CPU), normalized.
    pub fn uniform(users: usize, aps: usize) -> Self {
        Self {
            u: Array2::from_elem((users, aps), 1.0 / (aps as f64).sqrt()),
        }
    }

    pub fn user(&self, k: usize) -> ArrayView1<'_, f64> {
        self.u.row(k)
    }
}

/// Per-user quadratic forms shared by `sinr` and `reduce_coeffs`.
struct Forms {
    /// `(u_k^T nu_ki)^2` for every i (including i == k).
    cross: Array1<f64>,
    /// `(1/L) u_k^T D_ki u_k`.
    diag_d: Array1<f64>,
    /// `(1/L) u_k^T R_k u_k`.
    diag_r: f64,
}

fn forms(terms: &SinrTerms, u: ArrayView1<'_, f64>, k: usize) -> Forms {
    let users = terms.num_users();
    let inv_l = 1.0 / terms.antennas as f64;
    let u_sq = u.mapv(|x| x * x);
    let mut cross = Array1::zeros(users);
    let mut diag_d = Array1::zeros(users);
    for i in 0..users {
        if i == k || terms.is_copilot(k, i) {
            let p = u.dot(&terms.nu_vec(k, i));
            cross[i] = p * p;
        }
        diag_d[i] = inv_l * u_sq.dot(&terms.d_diag(k, i));
    }
    Forms {
        cross,
        diag_d,
        diag_r: inv_l * u_sq.dot(&terms.r_diag(k)),
    }
}

/// Per-user SINR for powers `eta` and receive weights `weights`.
pub fn sinr(eta: ArrayView1<'_, f64>, weights: &ReceiverWeights, terms: &SinrTerms) -> Array1<f64> {
    let users = terms.num_users();
    Array1::from_shape_fn(users, |k| {
        let f = forms(terms, weights.user(k), k);
        let interference: f64 = (0..users)
            .filter(|&i| i != k)
            .map(|i| f.cross[i] * eta[i])
            .sum::<f64>()
            + f.diag_d.dot(&eta)
            + f.diag_r;
        eta[k] * f.cross[k] / interference
    })
}

/// `SE_k = (1 - T_p/T_c) log2(1 + gamma_k)` in bit/s/Hz.
pub fn spectral_efficiency(
    gamma: ArrayView1<'_, f64>,
    pilot_len: usize,
    coherence_len: usize,
) -> Array1<f64> {
    let pre_log = 1.0 - pilot_len as f64 / coherence_len as f64;
    gamma.mapv(|g| pre_log * g.ln_1p() / std::f64::consts::LN_2)
}

/// Coefficients of the posynomial inverse SINR at fixed receive weights:
/// `1/gamma_k = (sum_{i!=k} a_ki eta_i + sum_i b_ki eta_i + c_k) / eta_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedCoeffs {
    /// K x K, diagonal held at zero.
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub c: Array1<f64>,
}

impl ReducedCoeffs {
    pub fn num_users(&self) -> usize {
        self.c.len()
    }

    /// Coupling `a_ki + b_ki` for i != k, zero on the diagonal.
    pub fn coupling(&self) -> Array2<f64> {
        let mut s = &self.a + &self.b;
        s.diag_mut().fill(0.0);
        s
    }

    /// Inverse SINR evaluated directly in the power domain.
    pub fn inv_sinr_eta(&self, eta: ArrayView1<'_, f64>) -> Array1<f64> {
        let k = self.num_users();
        Array1::from_shape_fn(k, |user| {
            let mut acc = self.c[user];
            for i in 0..k {
                if i != user {
                    acc += self.a[[user, i]] * eta[i];
                }
                acc += self.b[[user, i]] * eta[i];
            }
            acc / eta[user]
        })
    }

    pub fn sinr_eta(&self, eta: ArrayView1<'_, f64>) -> Array1<f64> {
        self.inv_sinr_eta(eta).mapv(f64::recip)
    }
}

pub fn reduce_coeffs(weights: &ReceiverWeights, terms: &SinrTerms) -> Result<ReducedCoeffs> {
    let users = terms.num_users();
    if weights.u.dim() != (users, terms.num_aps()) {
        return Err(Error::Dimension(format!(
            "weights {:?} vs {} users x {} APs",
            weights.u.dim(),
            users,
            terms.num_aps()
        )));
    }
    let mut a = Array2::zeros((users, users));
    let mut b = Array2::zeros((users, users));
    let mut c = Array1::zeros(users);
    for k in 0..users {
        let f = forms(terms, weights.user(k), k);
        let signal = f.cross[k];
        if !(signal >= DEGENERATE_BEAM_TOL) {
            return Err(Error::DegenerateBeam {
                user: k,
                gain: signal,
            });
        }
        for i in 0..users {
            if i != k {
                a[[k, i]] = f.cross[i] / signal;
            }
            b[[k, i]] = f.diag_d[i] / signal;
        }
        c[k] = f.diag_r / signal;
    }
    Ok(ReducedCoeffs { a, b, c })
}
