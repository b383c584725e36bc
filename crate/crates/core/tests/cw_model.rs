use std::collections::BTreeMap;

use steinmd_core::cw::{
    analyze_rho, apply_sweep_exact, exact_magnetization_dist, glauber_sampler, h_eval, h_prime, pair_diagnostics,
    psi_deviation, psi_phi, tail_prob, PairOptions, PairSource, RhoMeasure,
};

/// Direct enumeration of all configurations: lattice unit of `S` to probability.
fn brute_force(rho: &RhoMeasure, n: usize) -> BTreeMap<i64, f64> {
    let step = rho.lattice_step().unwrap();
    let (pts, wts) = (rho.points(), rho.weights());
    let d = pts.len();
    let mut acc: BTreeMap<i64, f64> = BTreeMap::new();
    for c in 0..d.pow(n as u32) {
        let (mut s, mut w, mut cc) = (0.0, 1.0, c);
        for _ in 0..n {
            s += pts[cc % d];
            w *= wts[cc % d];
            cc /= d;
        }
        let weight = w * (s * s / (2.0 * n as f64)).exp();
        *acc.entry((s / step).round() as i64).or_default() += weight;
    }
    let z: f64 = acc.values().sum();
    acc.values_mut().for_each(|v| *v /= z);
    acc
}

fn config_probs(rho: &RhoMeasure, n: usize) -> Vec<f64> {
    let (pts, wts) = (rho.points(), rho.weights());
    let d = pts.len();
    let mut p: Vec<f64> = (0..d.pow(n as u32))
        .map(|c| {
            let (mut s, mut w, mut cc) = (0.0, 1.0, c);
            for _ in 0..n {
                s += pts[cc % d];
                w *= wts[cc % d];
                cc /= d;
            }
            w * (s * s / (2.0 * n as f64)).exp()
        })
        .collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= z);
    p
}

#[test]
fn rademacher_is_quartic() {
    let a = analyze_rho(&RhoMeasure::rademacher(), 12).unwrap();
    assert_eq!(a.k, 2);
    assert!((a.h2k - 2.0).abs() < 1e-12);
    assert!((a.drift_scale - 1.0 / 3.0).abs() < 1e-12);
    assert!((a.lambda(16) - 16f64.powf(-1.5)).abs() < 1e-15);
    assert!(a.h_prime_positive);
}

#[test]
fn three_point_is_sextic() {
    let a = analyze_rho(&RhoMeasure::three_point(), 12).unwrap();
    assert_eq!(a.k, 3);
    assert!((a.h2k - 6.0).abs() < 1e-10);
    // cumulants holds kappa_2 upwards.
    assert!(a.cumulants[1..4].iter().all(|c| c.abs() <= 1e-10));
    assert!((a.cumulants[4] + 6.0).abs() < 1e-10);
    assert!((a.tau1() - 0.4).abs() < 1e-15);
    assert!((a.tau2() - 1.4).abs() < 1e-15);
}

#[test]
fn analysis_ignores_support_order() {
    let a = RhoMeasure::normalized(vec![-2.0, -1.0, 0.0, 1.0, 2.0], vec![1.0, 4.0, 2.0, 4.0, 1.0]).unwrap();
    let b = RhoMeasure::normalized(vec![2.0, 0.0, -1.0, 1.0, -2.0], vec![1.0, 2.0, 4.0, 4.0, 1.0]).unwrap();
    let (ra, rb) = (analyze_rho(&a, 12).unwrap(), analyze_rho(&b, 12).unwrap());
    assert_eq!(ra.k, rb.k);
    assert!((ra.h2k - rb.h2k).abs() < 1e-12 * ra.h2k);
}

#[test]
fn h_function_values() {
    let r = RhoMeasure::rademacher();
    assert!((h_eval(&r, 1.0) - (0.5 - 1f64.cosh().ln())).abs() < 1e-15);
    assert!((h_eval(&r, 1.0) - 0.066_219_169_516_972_88).abs() < 1e-12);
    let t = RhoMeasure::three_point();
    assert_eq!(h_eval(&t, 0.0), 0.0);
    for s in [0.3, 1.1, 2.5] {
        assert!((h_eval(&t, s) - h_eval(&t, -s)).abs() < 1e-14);
        assert!((h_prime(&r, s) - (s - s.tanh())).abs() < 1e-15);
    }
}

#[test]
fn psi_phi_values() {
    let r = RhoMeasure::rademacher();
    let (psi, phi) = psi_phi(&r, None, 1.0);
    assert!((psi - 0.761_594_155_955_764_9).abs() < 1e-15);
    assert!((phi - 1.0).abs() < 1e-15);
    assert_eq!(psi_phi(&RhoMeasure::three_point(), None, 0.0).0, 0.0);
}

#[test]
fn psi_converges_at_rate_one_over_n() {
    let t = RhoMeasure::three_point();
    let scaled: Vec<f64> = [100, 1000, 10_000]
        .iter()
        .map(|&n| n as f64 * psi_deviation(&t, n, 2001))
        .collect();
    for pair in scaled.windows(2) {
        let r = pair[1] / pair[0];
        assert!((0.5..=2.0).contains(&r), "{scaled:?}");
    }
}

#[test]
fn two_spin_enumeration() {
    let d = exact_magnetization_dist(&RhoMeasure::rademacher(), 2).unwrap();
    let e = std::f64::consts::E;
    assert!((d.log_prob_units(2).exp() - e / (2.0 * e + 2.0)).abs() < 1e-15);
    assert!((d.log_prob_units(0).exp() - 2.0 / (2.0 * e + 2.0)).abs() < 1e-15);
    assert!((tail_prob(&d, 2, 1.0) - 0.365_529_289_315_002_45).abs() < 1e-12);

    let one = exact_magnetization_dist(&RhoMeasure::rademacher(), 1).unwrap();
    assert!((one.log_prob_units(1).exp() - 0.5).abs() < 1e-15);
}

#[test]
fn tail_conventions() {
    let t = RhoMeasure::three_point();
    let d = exact_magnetization_dist(&t, 9).unwrap();
    let p0 = d.log_prob_units(0).exp();
    assert!((tail_prob(&d, 3, 0.0) - 0.5 * (1.0 + p0)).abs() < 1e-13);
    let top = 9f64.powf(1.0 / 6.0) * t.radius();
    assert_eq!(tail_prob(&d, 3, top * 1.001), 0.0);
}

#[test]
fn dp_matches_brute_force() {
    for rho in [RhoMeasure::rademacher(), RhoMeasure::three_point()] {
        for n in 1..=8 {
            let oracle = brute_force(&rho, n);
            let d = exact_magnetization_dist(&rho, n as u64).unwrap();
            for (&t, &p) in &oracle {
                let got = d.log_prob_units(t);
                assert!((got - p.ln()).abs() <= 1e-10, "n={n} t={t}");
            }
            let mass: f64 = d.pmf().iter().sum();
            assert!((mass - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn exact_pmf_is_symmetric() {
    let d = exact_magnetization_dist(&RhoMeasure::three_point(), 200).unwrap();
    for (&u, &lp) in d.units.iter().zip(&d.log_pmf) {
        assert!((d.log_prob_units(-u) - lp).abs() < 1e-10 * (1.0 + lp.abs()));
    }
}

#[test]
fn sweep_preserves_gibbs_measure() {
    for (rho, n) in [(RhoMeasure::rademacher(), 8), (RhoMeasure::three_point(), 6)] {
        let p = config_probs(&rho, n);
        let q = apply_sweep_exact(&rho, n, &p).unwrap();
        let dev = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev <= 1e-10, "n={n}: {dev}");
    }
}

#[test]
fn sampler_matches_exact_law() {
    let rho = RhoMeasure::rademacher();
    let n = 8;
    let exact = exact_magnetization_dist(&rho, n).unwrap();
    let samples: Vec<f64> = glauber_sampler(&rho, n as usize, 2024, 1000, 100_000, 1).unwrap().collect();
    let mut counts: BTreeMap<i64, f64> = BTreeMap::new();
    for s in &samples {
        *counts.entry(s.round() as i64).or_default() += 1.0 / samples.len() as f64;
    }
    let tv: f64 = 0.5
        * exact
            .units
            .iter()
            .map(|&u| (exact.log_prob_units(u).exp() - counts.get(&u).copied().unwrap_or(0.0)).abs())
            .sum::<f64>();
    assert!(tv <= 0.02, "TV = {tv}");
}

#[test]
fn sampler_is_deterministic() {
    let rho = RhoMeasure::three_point();
    let a: Vec<f64> = glauber_sampler(&rho, 32, 7, 10, 200, 2).unwrap().collect();
    let b: Vec<f64> = glauber_sampler(&rho, 32, 7, 10, 200, 2).unwrap().collect();
    assert_eq!(a, b);
    let c: Vec<f64> = glauber_sampler(&rho, 32, 8, 10, 200, 2).unwrap().collect();
    assert_ne!(a, c);
}

#[test]
fn rademacher_pair_step_and_constant_spins() {
    let a = analyze_rho(&RhoMeasure::rademacher(), 12).unwrap();
    let diag = pair_diagnostics(&a, 256, PairSource::Exact, &PairOptions::default()).unwrap();
    assert!((diag.delta - 0.031_25).abs() < 1e-15);
    assert!(diag.max_step <= diag.delta * (1.0 + 1e-12));
    let ratios = diag.zeta_ratios.unwrap();
    assert!(ratios.iter().all(|r| r.ratio == 0.0));
}
