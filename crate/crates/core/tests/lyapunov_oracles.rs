//! Lyapunov exponents against the Perron root (via a general eigenvalue
//! solver), excursion Monte Carlo and exact finite-horizon integrals.

mod common;

use common::{eigen_log_root, random_chain, random_potential, rng};
use polymer_lab::chain::ChainSpec;
use polymer_lab::levy::{EnvironmentLaw, LevyTriple};
use polymer_lab::lyapunov::{
    c_beta_f_estimate, c_derivative_at_zero, c_of_f, cycle_mgf, perron_log_root,
    start_independence_check, varadhan_direct, LyapunovError, Potential,
};
use polymer_lab::replica::Estimate;
use polymer_lab::transfer::ReplicaPlan;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn c_of_f_matches_eigenvalue_oracle() {
    let mut r = rng(31);
    for k in 0..20 {
        let size = 1 + k % 6;
        let chain = random_chain(size, &mut r);
        let f = random_potential(size, 0.5, &mut r);
        let start = r.random_range(0..size);
        let report = c_of_f(&chain, start, &f).unwrap();
        let oracle = eigen_log_root(&chain, &f);
        assert!((report.c - oracle).abs() <= 1e-9, "{report:?} vs {oracle}");
        assert!((report.c - perron_log_root(&chain, &f).unwrap()).abs() <= 1e-9);
        assert!(report.c >= f.inf() - 1e-12 && report.c <= f.sup() + 1e-12);
    }
}

#[test]
fn cycle_mgf_matches_excursion_sampling() {
    let chain = ChainSpec::symmetric_two_state(0.3).unwrap();
    let f = Potential::new(vec![0.3, -0.2]).unwrap();
    let c = 0.1;
    let exact = cycle_mgf(&chain, 0, &f, c).unwrap();
    let mut r = rng(32);
    let samples: Vec<f64> = (0..1_000_000)
        .map(|_| {
            let mut state = 0;
            let mut sum = f.values()[0] - c;
            loop {
                state = chain.step(state, &mut r);
                if state == 0 {
                    break sum.exp();
                }
                sum += f.values()[state] - c;
            }
        })
        .collect();
    let mc = Estimate::from_samples(&samples);
    assert!(mc.covers(exact, 3.0), "{mc:?} vs {exact}");
}

#[test]
fn trivial_potentials() {
    let chain = ChainSpec::from_matrix(vec![
        vec![0.2, 0.5, 0.3],
        vec![0.6, 0.0, 0.4],
        vec![0.1, 0.1, 0.8],
    ])
    .unwrap();
    assert!((cycle_mgf(&chain, 1, &Potential::zero(3), 0.0).unwrap() - 1.0).abs() < 1e-12);
    let k = Potential::constant(0.4, 3);
    assert!((cycle_mgf(&chain, 0, &k, 0.4).unwrap() - 1.0).abs() < 1e-12);
    assert!((c_of_f(&chain, 2, &k).unwrap().c - 0.4).abs() < 1e-12);
    assert!(c_of_f(&chain, 0, &Potential::zero(3)).unwrap().c.abs() < 1e-12);
    for n in [1, 7, 100] {
        assert!((varadhan_direct(&chain, 0, &k, n).unwrap() - 0.4).abs() < 1e-12);
    }
    let f = Potential::new(vec![0.3, -0.1, 0.2]).unwrap();
    assert_eq!(varadhan_direct(&chain, 1, &f, 1).unwrap(), -0.1);
    let gap = start_independence_check(&chain, &k, 0, 2, 50).unwrap();
    assert!(gap.gap < 1e-12);
}

#[test]
fn varadhan_converges_to_c_of_f() {
    let mut r = rng(33);
    for size in 2..=5 {
        let chain = random_chain(size, &mut r);
        let f = random_potential(size, 0.4, &mut r);
        let c = c_of_f(&chain, 0, &f).unwrap().c;
        let v = varadhan_direct(&chain, 0, &f, 4096).unwrap();
        assert!((v - c).abs() <= 1e-3, "{v} vs {c}");
    }
}

#[test]
fn derivative_at_zero_is_mean_under_mu() {
    let mut r = rng(34);
    for _ in 0..10 {
        let chain = random_chain(4, &mut r);
        let f = random_potential(4, 1.0, &mut r);
        let check = c_derivative_at_zero(&chain, 0, &f, 1e-4).unwrap();
        assert!(check.gap() <= 1e-6, "{check:?}");
    }
    let sym = ChainSpec::symmetric_two_state(0.3).unwrap();
    let f = Potential::new(vec![1.0, -1.0]).unwrap();
    let check = c_derivative_at_zero(&sym, 0, &f, 1e-4).unwrap();
    assert!(check.analytic.abs() < 1e-15 && check.finite_difference.abs() < 1e-6);
}

#[test]
fn quenched_exponent_at_zero_beta_is_the_shifted_varadhan_integral() {
    let chain = ChainSpec::uniform(3).unwrap();
    let law = LevyTriple::gaussian(1.0).unwrap();
    let f = Potential::new(vec![0.2, -0.3, 0.1]).unwrap();
    let n = 200;
    let q = c_beta_f_estimate(&chain, &law, 0, 0.0, &f, ReplicaPlan::new(n, 8, 1)).unwrap();
    // Σ_{i=1}^n f(S_i) = Σ_{i=0}^n f(S_i) - f(S_0)
    let shifted = ((n + 1) as f64 * varadhan_direct(&chain, 0, &f, n + 1).unwrap() - f.values()[0]) / n as f64;
    assert!((q.at_n.mean - shifted).abs() < 1e-12);
    assert_eq!(q.at_n.stderr, 0.0);
    let c = c_of_f(&chain, 0, &f).unwrap().c;
    assert!((q.at_2n.mean - c).abs() < 2.0 * f.sup_norm() / (2 * n) as f64 + 1e-9);
}

#[test]
fn quenched_free_energy_lies_in_the_bracket() {
    let chain = ChainSpec::symmetric_two_state(0.3).unwrap();
    let law = LevyTriple::gaussian(1.0).unwrap();
    let beta = 0.5;
    let lambda = law.cumulant(beta).unwrap();
    let f = Potential::zero(2);
    let mut means = Vec::new();
    for seed in [1, 2] {
        let q = c_beta_f_estimate(&chain, &law, 0, beta, &f, ReplicaPlan::new(800, 200, seed)).unwrap();
        for e in [q.at_n, q.at_2n] {
            assert!(e.mean >= -3.0 * e.stderr && e.mean <= lambda + 3.0 * e.stderr, "{e:?}");
        }
        assert!(q.hypothesis_margin > 0.0);
        means.push(q.at_n);
    }
    assert!((means[0].mean - means[1].mean).abs() <= 4.0 * means[0].combined_stderr(&means[1]));
}

/// Least-squares slope of `log gap` on `log n`.
fn gap_slope(chain: &ChainSpec, f: &Potential, x: usize, y: usize) -> f64 {
    let points: Vec<(f64, f64)> = [64usize, 128, 256, 512, 1024, 2048]
        .iter()
        .map(|&n| {
            let g = start_independence_check(chain, f, x, y, n).unwrap().gap;
            ((n as f64).ln(), g.ln())
        })
        .collect();
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn start_gap_decays_like_one_over_n() {
    let mut r = rng(35);
    for size in [2, 3, 4] {
        let chain = random_chain(size, &mut r);
        let f = random_potential(size, 0.3, &mut r);
        let slope = gap_slope(&chain, &f, 0, 1);
        assert!((slope + 1.0).abs() <= 0.3, "slope {slope}");
    }
}

#[test]
fn start_gap_coupling_bound_on_uniform_three_state_chain() {
    let chain = ChainSpec::uniform(3).unwrap();
    let mut r = rng(36);
    for _ in 0..10 {
        let f = random_potential(3, 0.3, &mut r);
        for n in [1, 5, 50, 500] {
            let gap = start_independence_check(&chain, &f, 0, 2, n).unwrap().gap;
            // diameter 1
            assert!(gap <= 2.0 * f.sup_norm() / n as f64 + 1e-9);
        }
    }
}

/// `n |V_x - V_y| ≤ 2 d ‖f‖∞ - log P^d(x, y)` (and symmetrically), the bound
/// obtained by forcing the path from one start to the other in `d` steps.
#[test]
fn start_gap_bound_with_transition_penalty() {
    let sticky = ChainSpec::from_matrix(vec![vec![0.99, 0.01], vec![0.01, 0.99]]).unwrap();
    let f = Potential::new(vec![0.1, -0.1]).unwrap();
    let n = 400;
    let gap = start_independence_check(&sticky, &f, 0, 1, n).unwrap().gap;
    // the diameter-only bound 2‖f‖∞·1/n does not hold for a slowly mixing chain
    assert!(gap > 2.0 * f.sup_norm() / n as f64);
    let penalised = (2.0 * f.sup_norm() - 0.01f64.ln()) / n as f64;
    assert!(gap <= penalised + 1e-12);

    let mut r = rng(37);
    for _ in 0..10 {
        let chain = random_chain(3, &mut r);
        let f = random_potential(3, 0.5, &mut r);
        for n in [10, 100, 1000] {
            let gap = start_independence_check(&chain, &f, 0, 1, n).unwrap().gap;
            let bound = |a: usize, b: usize| {
                // smallest d with P^d(a, b) > 0
                let mut power = chain.transition().clone();
                let mut d = 1;
                while power[(a, b)] <= 0.0 {
                    power *= chain.transition();
                    d += 1;
                }
                2.0 * d as f64 * f.sup_norm() - power[(a, b)].ln()
            };
            let b = bound(0, 1).max(bound(1, 0));
            assert!(gap * n as f64 <= b + 1e-9, "n {n}: {} > {b}", gap * n as f64);
        }
    }
}

#[test]
fn phi_is_strictly_decreasing_in_c() {
    let mut r = rng(38);
    let chain = random_chain(4, &mut r);
    let f = random_potential(4, 0.5, &mut r);
    let mut previous = f64::INFINITY;
    for k in 0..=40 {
        let c = f.inf() + (f.sup() - f.inf()) * k as f64 / 40.0;
        // divergence (φ = +∞) may only occur below the finite domain
        match cycle_mgf(&chain, 0, &f, c) {
            Ok(phi) => {
                assert!(phi < previous);
                previous = phi;
            }
            Err(LyapunovError::Divergent { .. }) => assert!(previous.is_infinite()),
            Err(e) => panic!("{e}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn c_of_scaled_potential_is_convex(size in 2usize..=5, seed in any::<u64>()) {
        let mut r = rng(seed);
        let chain = random_chain(size, &mut r);
        let f = random_potential(size, 0.5, &mut r);
        let ts: Vec<f64> = (-10..=10).map(|k| k as f64 * 0.1).collect();
        let cs: Vec<f64> = ts.iter().map(|&t| c_of_f(&chain, 0, &f.scaled(t)).unwrap().c).collect();
        for w in cs.windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-8);
        }
    }
}
