//! Optimal receive combining at fixed powers.
//!
//! For user k the optimal unit-norm vector maximizes the generalized
//! Rayleigh quotient `u^T A_k u / u^T B_k u` with `A_k = eta_k nu_kk nu_kk^T`,
//! and is `B_k^{-1} nu_kk` up to normalization. `B_k` is a positive diagonal
//! matrix plus one rank-one term per co-pilot interferer, so its inverse is
//! built from the diagonal inverse with a sequence of Sherman-Morrison
//! updates at O(M^2) each.

use ndarray::{Array1, Array2, ArrayView1};

use crate::sinr::{ReceiverWeights, SinrTerms};
use crate::{Error, Result};

/// Reusable scratch for solving `B_k x = nu_kk`.
///
/// The running inverse is only materialized as a dense M x M matrix once
/// the first rank-one update is applied; with orthogonal pilots `B_k` stays
/// diagonal and the solve is O(M).
#[derive(Debug, Clone)]
pub struct RankOneSolver {
    inv: Array2<f64>,
    diag: Array1<f64>,
    work: Array1<f64>,
    ops: u64,
}

impl RankOneSolver {
    pub fn new(aps: usize) -> Self {
        Self {
            inv: Array2::zeros((aps, aps)),
            diag: Array1::zeros(aps),
            work: Array1::zeros(aps),
            ops: 0,
        }
    }

    /// Multiply-add operations performed since construction or the last
    /// [`reset_ops`](Self::reset_ops).
    pub fn ops(&self) -> u64 {
        self.ops
    }

    pub fn reset_ops(&mut self) {
        self.ops = 0;
    }

    /// Solves with rank-one updates in increasing interferer index.
    pub fn solve(&mut self, terms: &SinrTerms, eta: ArrayView1<'_, f64>, k: usize) -> Array1<f64> {
        let order: Vec<usize> = (0..terms.num_users()).collect();
        self.solve_ordered(terms, eta, k, &order)
    }

    /// Solves applying the rank-one updates in the order given by `order`;
    /// entries equal to `k` or for users on orthogonal pilots are skipped.
    pub fn solve_ordered(
        &mut self,
        terms: &SinrTerms,
        eta: ArrayView1<'_, f64>,
        k: usize,
        order: &[usize],
    ) -> Array1<f64> {
        let m = terms.num_aps();
        let users = terms.num_users();
        assert_eq!(self.diag.len(), m, "solver sized for a different AP count");
        let inv_l = 1.0 / terms.antennas as f64;

        // Diagonal part (1/L)(sum_i eta_i D_ki + R_k).
        self.diag.assign(&terms.r_diag(k));
        for i in 0..users {
            if eta[i] != 0.0 {
                self.diag.scaled_add(eta[i], &terms.d_diag(k, i));
            }
        }
        self.diag.mapv_inplace(|x| 1.0 / (inv_l * x));
        self.ops += (users * m) as u64;

        let mut dense = false;
        for &i in order {
            if !terms.is_copilot(k, i) || eta[i] == 0.0 {
                continue;
            }
            if !dense {
                self.inv.fill(0.0);
                self.inv.diag_mut().assign(&self.diag);
                dense = true;
            }
            self.rank_one_update(terms.nu_vec(k, i), eta[i]);
        }

        let rhs = terms.nu_vec(k, k);
        if dense {
            self.ops += (m * m) as u64;
            self.inv.dot(&rhs)
        } else {
            self.ops += m as u64;
            &self.diag * &rhs
        }
    }

    /// `H <- H - w H v v^T H / (1 + w v^T H v)` for the symmetric running
    /// inverse H.
    fn rank_one_update(&mut self, v: ArrayView1<'_, f64>, weight: f64) {
        let m = v.len();
        ndarray::linalg::general_mat_vec_mul(1.0, &self.inv, &v, 0.0, &mut self.work);
        let denom = 1.0 + weight * v.dot(&self.work);
        let scale = weight / denom;
        for (r, mut row) in self.inv.rows_mut().into_iter().enumerate() {
            let coef = -scale * self.work[r];
            row.scaled_add(coef, &self.work);
        }
        self.ops += (2 * m * m + m) as u64;
    }
}

/// `B_k^{-1} nu_kk` for user `k` at powers `eta`.
pub fn solve_b_system(terms: &SinrTerms, eta: ArrayView1<'_, f64>, k: usize) -> Array1<f64> {
    RankOneSolver::new(terms.num_aps()).solve(terms, eta, k)
}

/// Optimal unit-norm receive vectors for every user at powers `eta`.
///
/// The `sqrt(eta_k)` prefactor of the closed form cancels in the
/// normalization and is omitted, which keeps users with zero power well
/// defined.
pub fn optimal_weights(terms: &SinrTerms, eta: ArrayView1<'_, f64>) -> Result<ReceiverWeights> {
    let users = terms.num_users();
    let m = terms.num_aps();
    if eta.len() != users {
        return Err(Error::Dimension(format!(
            "eta has {} entries, expected {users}",
            eta.len()
        )));
    }
    let mut solver = RankOneSolver::new(m);
    let mut raw = Array2::zeros((users, m));
    for k in 0..users {
        let x = solver.solve(terms, eta, k);
        raw.row_mut(k).assign(&x);
    }
    ReceiverWeights::from_unnormalized(raw)
}
