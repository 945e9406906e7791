mod common;

use cellfree_maxmin::apg::{
    apg_solve, default_tau, gradient, inv_sinr, smoothed_objective, softmax, ApgConfig, PowerState,
    DEFAULT_SMOOTHING_EPS,
};
use cellfree_maxmin::network::{estimation_stats, Network, PilotBook};
use cellfree_maxmin::oracle::{bisection_solve, feasibility, InterferenceMap};
use cellfree_maxmin::receiver::{optimal_weights, solve_b_system, RankOneSolver};
use cellfree_maxmin::sinr::{reduce_coeffs, sinr, ReceiverWeights};
use cellfree_maxmin::solver::{alternating_solve, PowerSolver, SolveConfig};
use common::*;
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn random_eta(seed: u64, users: usize, cap: f64) -> Array1<f64> {
    let mut r = rng(seed);
    Array1::from_shape_fn(users, |_| cap * r.random_range(0.01..1.0))
}

proptest! {
    #![proptest_config(cfg(48))]

    #[test]
    fn estimate_variance_below_gain_and_gram_well_formed(seed in 0u64..10_000) {
        let (p, _) = random_terms(seed, 30, 8);
        let net = Network::generate(&p).unwrap();
        for (nu, beta) in net.stats.nu.iter().zip(net.model.beta.iter()) {
            prop_assert!(*nu > 0.0 && nu < beta);
        }
        let g = &net.pilots.gram_abs;
        for i in 0..p.users {
            prop_assert_eq!(g[[i, i]], 1.0);
            for j in 0..p.users {
                prop_assert_eq!(g[[i, j]], g[[j, i]]);
                prop_assert!(g[[i, j]] == 0.0 || g[[i, j]] == 1.0);
            }
        }
    }

    #[test]
    fn estimate_variance_grows_toward_gain_with_pilot_power(seed in 0u64..10_000) {
        let p = params(10, 4, 4, 1, seed);
        let net = Network::generate(&p).unwrap();
        let pilots = PilotBook::from_assignment(4, vec![0, 1, 2, 3]);
        let mut prev = Array2::<f64>::zeros(net.model.beta.dim());
        for power in [1e-6, 1e-4, 1e-2, 1.0, 1e2] {
            let s = estimation_stats(&net.model.beta, &pilots, power, 4).unwrap();
            for ((nu, old), beta) in s.nu.iter().zip(prev.iter()).zip(net.model.beta.iter()) {
                prop_assert!(nu >= old && nu < beta);
            }
            prev = s.nu;
        }
        let s = estimation_stats(&net.model.beta, &pilots, 1e12, 4).unwrap();
        for (nu, beta) in s.nu.iter().zip(net.model.beta.iter()) {
            prop_assert!((nu / beta - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn generation_is_deterministic(seed in 0u64..10_000) {
        let (p, _) = random_terms(seed, 20, 6);
        let a = Network::generate(&p).unwrap();
        let b = Network::generate(&p).unwrap();
        prop_assert_eq!(&a.model.beta, &b.model.beta);
        prop_assert_eq!(&a.pilots.assignment, &b.pilots.assignment);
        prop_assert_eq!(&a.stats.nu, &b.stats.nu);
        prop_assert_eq!(&a.stats.c, &b.stats.c);
    }

    #[test]
    fn sinr_invariant_to_common_power_and_noise_scaling(seed in 0u64..10_000, s in 0.01f64..100.0) {
        let (p, t) = random_terms(seed, 20, 6);
        let mut q = p.clone();
        q.zeta_p_watt *= s;
        q.zeta_u_watt *= s;
        q.bandwidth_hz *= s;
        let tq = terms_for(&q);
        let eta_p = Array1::from_elem(p.users, p.power_cap());
        let eta_q = Array1::from_elem(q.users, q.power_cap());
        let w = ReceiverWeights::uniform(p.users, p.aps);
        let g_p = sinr(eta_p.view(), &w, &t);
        let g_q = sinr(eta_q.view(), &w, &tq);
        for (a, b) in g_p.iter().zip(g_q.iter()) {
            prop_assert!((a - b).abs() <= 1e-10 * a);
        }
    }

    #[test]
    fn sinr_scale_invariant_in_weights(seed in 0u64..10_000, lambda in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0]) {
        let (p, t) = random_terms(seed, 20, 6);
        let eta = random_eta(seed, p.users, p.power_cap());
        let w = optimal_weights(&t, eta.view()).unwrap();
        let scaled = ReceiverWeights { u: &w.u * lambda };
        let g = sinr(eta.view(), &w, &t);
        let gs = sinr(eta.view(), &scaled, &t);
        for (a, b) in g.iter().zip(gs.iter()) {
            prop_assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn sinr_monotone_in_powers(seed in 0u64..10_000, factor in 1.01f64..3.0) {
        let (p, t) = random_terms(seed, 20, 6);
        let eta = random_eta(seed, p.users, p.power_cap());
        let w = optimal_weights(&t, eta.view()).unwrap();
        let base = sinr(eta.view(), &w, &t);
        let j = (seed as usize) % p.users;
        let mut up = eta.clone();
        up[j] *= factor;
        let g = sinr(up.view(), &w, &t);
        prop_assert!(g[j] >= base[j] * (1.0 - 1e-12));
        for k in 0..p.users {
            if k != j {
                prop_assert!(g[k] <= base[k] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn reduced_coeffs_reproduce_sinr(seed in 0u64..10_000) {
        let (p, t) = random_terms(seed, 20, 6);
        let eta = random_eta(seed, p.users, p.power_cap());
        let w = optimal_weights(&t, eta.view()).unwrap();
        let co = reduce_coeffs(&w, &t).unwrap();
        prop_assert!(co.a.iter().chain(co.b.iter()).all(|&x| x >= 0.0));
        prop_assert!(co.c.iter().all(|&x| x > 0.0));
        let g = sinr(eta.view(), &w, &t);
        let inv = co.inv_sinr_eta(eta.view());
        for (a, b) in g.iter().zip(inv.iter()) {
            prop_assert!((a * b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn optimal_weights_are_unit_norm_and_locally_optimal(seed in 0u64..10_000) {
        let (p, t) = random_terms(seed, 20, 6);
        let eta = random_eta(seed, p.users, p.power_cap());
        let w = optimal_weights(&t, eta.view()).unwrap();
        let g = sinr(eta.view(), &w, &t);
        let mut r = rng(seed + 7);
        for k in 0..p.users {
            prop_assert!((w.user(k).dot(&w.user(k)).sqrt() - 1.0).abs() < 1e-12);
        }
        for _ in 0..10 {
            let mut u = w.u.clone();
            u.mapv_inplace(|x| x + 1e-2 * r.random_range(-1.0..1.0));
            let perturbed = ReceiverWeights::from_unnormalized(u).unwrap();
            let gp = sinr(eta.view(), &perturbed, &t);
            for k in 0..p.users {
                prop_assert!(gp[k] <= g[k] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn rank_one_solve_matches_dense_and_ignores_order(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let m = r.random_range(2..=40);
        let k = r.random_range(2..=10);
        let p = params(m, k, r.random_range(1..=k), r.random_range(1..=4), seed);
        let t = terms_for(&p);
        let eta = random_eta(seed, k, p.power_cap());
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut r);
        let mut solver = RankOneSolver::new(m);
        for user in 0..k {
            let x = solve_b_system(&t, eta.view(), user);
            let dense = dense_solve_b(&t, &eta, user);
            prop_assert!(rel_err(x.as_slice().unwrap(), &dense) <= 1e-10);
            let norm = dense.iter().map(|v| v * v).sum::<f64>().sqrt();
            let shuffled = solver.solve_ordered(&t, eta.view(), user, &order);
            let err = x.iter().zip(shuffled.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(err <= 1e-12 * norm);
        }
    }

    #[test]
    fn smoothing_sandwich_and_softmax(seed in 0u64..10_000, tau in 0.1f64..1e5) {
        let k = 2 + (seed % 9) as usize;
        let co = random_coeffs(seed, k);
        let mut r = rng(seed + 1);
        let theta = Array1::from_shape_fn(k, |_| r.random_range(-8.0..2.0));
        let f = inv_sinr(theta.view(), &co);
        let fmax = f.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let s = smoothed_objective(theta.view(), &co, tau);
        prop_assert!(fmax <= s);
        prop_assert!(s <= fmax + (k as f64).ln() / tau);
        let w = softmax(f.view(), tau, fmax);
        prop_assert!((w.sum() - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn smoothed_objective_is_convex(seed in 0u64..10_000, lambda in 0.0f64..=1.0) {
        let k = 2 + (seed % 7) as usize;
        let co = random_coeffs(seed, k);
        let tau = default_tau(k, DEFAULT_SMOOTHING_EPS);
        let mut r = rng(seed + 2);
        let t1 = Array1::from_shape_fn(k, |_| r.random_range(-4.0..1.0));
        let t2 = Array1::from_shape_fn(k, |_| r.random_range(-4.0..1.0));
        let mid = &t1 * lambda + &t2 * (1.0 - lambda);
        let lhs = smoothed_objective(mid.view(), &co, tau);
        let rhs = lambda * smoothed_objective(t1.view(), &co, tau)
            + (1.0 - lambda) * smoothed_objective(t2.view(), &co, tau);
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences(seed in 0u64..10_000) {
        let k = 2 + (seed % 7) as usize;
        let co = random_coeffs(seed, k);
        let tau = 20.0;
        let mut r = rng(seed + 3);
        let theta = Array1::from_shape_fn(k, |_| r.random_range(-2.0..1.0));
        let g = gradient(theta.view(), &co, tau);
        let h = 1e-6;
        for i in 0..k {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (smoothed_objective(up.view(), &co, tau) - smoothed_objective(dn.view(), &co, tau)) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-6 * g.iter().map(|x| x.abs()).fold(0.0, f64::max) + 1e-9);
        }
    }

    #[test]
    fn apg_stays_feasible_and_restarts_monotone(seed in 0u64..10_000) {
        let (p, t) = random_terms(seed, 30, 8);
        let co = coeffs_at_full_power(&p, &t);
        let start = PowerState::full_power(p.users, p.power_cap());
        let sol = apg_solve(&co, start.theta.view(), start.theta_max, &ApgConfig::robust(p.users)).unwrap();
        prop_assert!(sol.state.theta.iter().all(|&x| x <= start.theta_max));
        for pair in sol.trace.restart_values.windows(2) {
            prop_assert!(pair[1] <= pair[0]);
        }
        let first = sol.trace.records.first().unwrap().f_true;
        let last = sol.trace.records.last().unwrap().f_true;
        prop_assert!(last <= first * (1.0 + 1e-9));
    }

    #[test]
    fn feasibility_is_monotone_in_target(seed in 0u64..10_000, frac in 0.0f64..1.0) {
        let (p, t) = random_terms(seed, 30, 8);
        let co = coeffs_at_full_power(&p, &t);
        let r = bisection_solve(&co, p.power_cap(), 1e-6);
        prop_assert!(feasibility(r.t_star * (1.0 - 1e-9), &co, p.power_cap()).feasible);
        prop_assert!(feasibility(r.t_star * frac, &co, p.power_cap()).feasible);
        prop_assert!(!feasibility(r.t_star + 1e-5, &co, p.power_cap()).feasible);
    }

    #[test]
    fn interference_map_iterates_increase(seed in 0u64..10_000, frac in 0.1f64..1.0) {
        let (p, t) = random_terms(seed, 30, 8);
        let co = coeffs_at_full_power(&p, &t);
        let target = frac * bisection_solve(&co, p.power_cap(), 1e-6).t_star;
        let map = InterferenceMap::new(target, &co).unwrap();
        let mut eta = Array1::zeros(p.users);
        for _ in 0..50 {
            let next = map.apply(eta.view());
            prop_assert!(next.iter().zip(eta.iter()).all(|(n, o)| n >= o));
            eta = next;
        }
    }

    #[test]
    fn oracle_optimum_is_equalized_or_capped(seed in 0u64..10_000) {
        let (p, t) = random_terms(seed, 30, 8);
        let co = coeffs_at_full_power(&p, &t);
        let cap = p.power_cap();
        let r = bisection_solve(&co, cap, 1e-6);
        let g = co.sinr_eta(r.eta_star.view());
        prop_assert!(g.iter().all(|&x| x >= r.t_star - 1e-5));
        prop_assert!(r.eta_star.iter().all(|&e| e <= cap * (1.0 + 1e-12)));
        prop_assert!(r.eta_star.iter().any(|&e| (e - cap).abs() <= 1e-12 * cap));
    }

    #[test]
    fn alternating_solve_ascends_and_is_feasible(seed in 0u64..10_000, oracle in any::<bool>()) {
        let (p, t) = random_terms(seed, 30, 6);
        let solver = if oracle { PowerSolver::Oracle } else { PowerSolver::Apg };
        let c = SolveConfig::for_users(p.users).with_solver(solver);
        let res = alternating_solve(&t, p.zeta_u_watt, &c).unwrap();
        let mut prev = res.initial_min_se;
        for h in &res.history {
            prop_assert!(h.min_se >= prev - 1e-6);
            prev = h.min_se;
        }
        prop_assert!(res.eta_star.iter().all(|&e| e > 0.0 && e <= p.power_cap()));
        for k in 0..p.users {
            prop_assert!((res.weights_star.user(k).dot(&res.weights_star.user(k)) - 1.0).abs() < 1e-12);
        }
        prop_assert!((res.min_se - min(&res.se_per_user)).abs() < 1e-12);
    }
}
