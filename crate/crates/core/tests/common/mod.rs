#![allow(dead_code)]

use cellfree_maxmin::network::{Network, SimParams};
use cellfree_maxmin::receiver::optimal_weights;
use cellfree_maxmin::sinr::{build_sinr_terms, reduce_coeffs, ReducedCoeffs, SinrTerms};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn params(aps: usize, users: usize, pilot_len: usize, antennas: usize, seed: u64) -> SimParams {
    SimParams {
        aps,
        users,
        pilot_len,
        antennas,
        seed,
        ..Default::default()
    }
}

pub fn terms_for(p: &SimParams) -> SinrTerms {
    let net = Network::generate(p).unwrap();
    build_sinr_terms(&net.stats, &net.model.beta, &net.pilots, p.antennas).unwrap()
}

/// A random small instance drawn from `seed`: M in [4, max_aps], K in
/// [2, max_users], T_p in [1, K].
pub fn random_terms(seed: u64, max_aps: usize, max_users: usize) -> (SimParams, SinrTerms) {
    let mut r = rng(seed ^ 0x5eed);
    let m = r.random_range(4..=max_aps);
    let k = r.random_range(2..=max_users);
    let tp = r.random_range(1..=k);
    let p = params(m, k, tp, 1, seed);
    let t = terms_for(&p);
    (p, t)
}

/// Coefficients at the optimal receivers for full power.
pub fn coeffs_at_full_power(p: &SimParams, terms: &SinrTerms) -> ReducedCoeffs {
    let eta = Array1::from_elem(p.users, p.power_cap());
    let w = optimal_weights(terms, eta.view()).unwrap();
    reduce_coeffs(&w, terms).unwrap()
}

/// Random positive coefficients with order-one entries.
pub fn random_coeffs(seed: u64, users: usize) -> ReducedCoeffs {
    let mut r = rng(seed);
    let mut a = Array2::from_shape_fn((users, users), |_| r.random_range(0.0..0.2));
    a.diag_mut().fill(0.0);
    let b = Array2::from_shape_fn((users, users), |_| r.random_range(0.0..0.05));
    let c = Array1::from_shape_fn(users, |_| r.random_range(0.05..1.0));
    ReducedCoeffs { a, b, c }
}

pub fn min(v: &Array1<f64>) -> f64 {
    v.fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Dense `B_k = sum_{i!=k} eta_i nu_ki nu_ki^T + (1/L) diag(sum_i eta_i D_ki + R_k)`.
pub fn dense_b(terms: &SinrTerms, eta: &Array1<f64>, k: usize) -> nalgebra::DMatrix<f64> {
    let m = terms.num_aps();
    let inv_l = 1.0 / terms.antennas as f64;
    let mut b = nalgebra::DMatrix::zeros(m, m);
    for ap in 0..m {
        let mut d = terms.r_diag(k)[ap];
        for i in 0..terms.num_users() {
            d += eta[i] * terms.d_diag(k, i)[ap];
        }
        b[(ap, ap)] = inv_l * d;
    }
    for i in 0..terms.num_users() {
        if i == k || !terms.is_copilot(k, i) {
            continue;
        }
        let v = nalgebra::DVector::from_iterator(m, terms.nu_vec(k, i).iter().copied());
        b += eta[i] * &v * v.transpose();
    }
    b
}

/// `B_k^{-1} nu_kk` by LU on the symmetrically scaled system
/// `S B S y = S nu`, `x = S y` with `S = diag(B)^{-1/2}`. Large-scale gains
/// span many decades, so unscaled B is badly conditioned in norm even
/// though the scaled matrix is close to the identity.
pub fn dense_solve_b(terms: &SinrTerms, eta: &Array1<f64>, k: usize) -> Vec<f64> {
    let b = dense_b(terms, eta, k);
    let m = b.nrows();
    let s: Vec<f64> = (0..m).map(|i| 1.0 / b[(i, i)].sqrt()).collect();
    let scaled = nalgebra::DMatrix::from_fn(m, m, |i, j| s[i] * b[(i, j)] * s[j]);
    let rhs = nalgebra::DVector::from_iterator(
        m,
        terms.nu_vec(k, k).iter().zip(&s).map(|(v, si)| v * si),
    );
    let y = scaled.lu().solve(&rhs).expect("B_k is positive definite");
    y.iter().zip(&s).map(|(yi, si)| yi * si).collect()
}

/// Relative 2-norm distance of `x` from `reference`.
pub fn rel_err(x: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = reference.iter().map(|b| b * b).sum();
    (num / den).sqrt()
}
