use statrs::function::gamma::{gamma, gamma_ur};
use steinmd_core::limit_laws::{
    check_conditions, mills_bounds_check, normalizing_constant, DriftFunction, GridSpec, LawRecord, LimitLaw,
};

/// Upper tail of the law with density proportional to `exp(-a |y|^q / q)`,
/// through the regularized upper incomplete gamma function.
fn gamma_tail(a: f64, q: f64, z: f64) -> f64 {
    if z == 0.0 {
        return 0.5;
    }
    0.5 * gamma_ur(1.0 / q, a * z.powf(q) / q)
}

/// Composite trapezoid rule on `[-r, r]`; exponentially accurate for smooth
/// integrands that vanish at both ends.
fn trapezoid<F: Fn(f64) -> f64>(f: F, r: f64, panels: usize) -> f64 {
    let h = 2.0 * r / panels as f64;
    let inner: f64 = (1..panels).map(|i| f(-r + i as f64 * h)).sum();
    h * (inner + 0.5 * (f(-r) + f(r)))
}

fn y6_law() -> LimitLaw {
    LimitLaw::new(DriftFunction::monomial(6.0 / 120.0, 5.0).unwrap()).unwrap()
}

#[test]
fn quartic_constant_closed_form() {
    let law = LimitLaw::quartic_12();
    let closed = 2f64.sqrt() / (3f64.powf(0.25) * gamma(0.25));
    assert!((law.c1() - closed).abs() < 1e-13);
    assert!((law.c1() - 0.29636).abs() < 5e-5);
    let trap = 1.0 / trapezoid(|y: f64| (-y.powi(4) / 12.0).exp(), 12.0, 4000);
    assert!((law.c1() - trap).abs() < 1e-12);
    assert_eq!(law.density(0.0), law.c1());
}

#[test]
fn gaussian_constant() {
    let c = normalizing_constant(&DriftFunction::gaussian()).unwrap();
    assert!((c - 0.398_942_280_401_432_7).abs() < 1e-14);
}

#[test]
fn normalization_within_1e10() {
    for law in [LimitLaw::quartic_12(), LimitLaw::standard_normal(), y6_law()] {
        let r = law.truncation_radius() * 1.2;
        let mass = trapezoid(|y| law.density(y), r, 6000);
        assert!((mass - 1.0).abs() <= 1e-10, "{}: {mass}", law.label());
        assert!((law.cdf(0.0) - 0.5).abs() < 1e-14);
    }
}

#[test]
fn tails_match_incomplete_gamma() {
    let cases = [(LimitLaw::quartic_12(), 1.0 / 3.0, 4.0), (LimitLaw::standard_normal(), 1.0, 2.0), (y6_law(), 0.05, 6.0)];
    for (law, a, q) in cases {
        for i in 0..=50 {
            let z = 0.1 * i as f64;
            let want = gamma_tail(a, q, z);
            let got = law.tail(z);
            assert!(((got - want) / want).abs() < 1e-9, "{} z={z}: {got} vs {want}", law.label());
        }
    }
}

#[test]
fn quartic_tail_frozen_values() {
    // High-precision quadrature values of the W(4,12) tail.
    let law = LimitLaw::quartic_12();
    let frozen = [
        (0.5, 0.351_962_534_195_059_55),
        (1.0, 0.208_444_321_303_894_84),
        (2.0, 0.021_014_485_323_166_214),
        (3.0, 3.508_522_372_910_204e-5),
        (5.0, 1.684_472_474_072_318e-25),
    ];
    for (z, want) in frozen {
        assert!(((law.tail(z) - want) / want).abs() < 1e-10, "z = {z}");
        assert!(((law.cdf(-z) - want) / want).abs() < 1e-10, "z = -{z}");
    }
}

#[test]
fn gaussian_tail_at_one() {
    let law = LimitLaw::standard_normal();
    assert!((law.tail(1.0) - 0.158_655).abs() < 1e-6);
}

#[test]
fn cdf_symmetric_and_monotone() {
    for law in [LimitLaw::quartic_12(), LimitLaw::standard_normal(), y6_law()] {
        let mut prev = 0.0;
        for i in -200..=200 {
            let y = 0.04 * i as f64;
            let c = law.cdf(y);
            assert!(c >= prev);
            prev = c;
            assert!((law.cdf(-y) - (1.0 - c)).abs() < 1e-10);
            assert_eq!(law.density(y), law.density(-y));
            assert!((law.tail(y) - (1.0 - c)).abs() < 1e-14);
        }
    }
}

#[test]
fn quantile_inverts_cdf() {
    for law in [LimitLaw::quartic_12(), LimitLaw::standard_normal(), y6_law()] {
        for i in 1..=999 {
            let q = i as f64 / 1000.0;
            let y = law.quantile(q).unwrap();
            assert!((law.cdf(y) - q).abs() < 1e-12, "{} q={q}", law.label());
            assert!((law.quantile(law.cdf(y)).unwrap() - y).abs() < 1e-8);
        }
    }
}

#[test]
fn record_round_trip_is_bit_exact() {
    let law = LimitLaw::quartic_12();
    let rec = law.to_record().unwrap();
    let json = serde_json::to_string(&rec).unwrap();
    let back: LawRecord = serde_json::from_str(&json).unwrap();
    assert_eq!(back, rec);
    let rebuilt = LimitLaw::from_record(&back).unwrap();
    assert_eq!(rebuilt.c1().to_bits(), law.c1().to_bits());
    assert_eq!(rebuilt.truncation_radius().to_bits(), law.truncation_radius().to_bits());
    assert!(json.contains("\"kind\":\"scaled-odd-monomial\""));
}

#[test]
fn truncation_radius_solves_level_equation() {
    for law in [LimitLaw::quartic_12(), LimitLaw::standard_normal(), y6_law()] {
        let r = law.truncation_radius();
        assert!((law.big_g(r) - 40.0).abs() < 1e-9);
    }
}

#[test]
fn conditions_identity_drift() {
    let rep = check_conditions(&DriftFunction::gaussian(), &GridSpec::default()).unwrap();
    assert!(rep.monotone_ok && rep.sign_ok);
    assert!(rep.c3_est <= 2.0);
    // Direct scan oracle: |g'|(1+|y|)/(1+|y|) = 1.
    assert!((rep.c3_grid_sup - 1.0).abs() < 1e-15);
    assert!(rep.c2_est >= 1.0);
}

#[test]
fn conditions_cubic_and_negated() {
    let cubic = DriftFunction::monomial(1.0, 3.0).unwrap();
    let rep = check_conditions(&cubic, &GridSpec::default()).unwrap();
    assert!(rep.monotone_ok && rep.sign_ok);
    assert!(rep.c2_est >= 1.0 && rep.c3_est >= 1.0);

    let neg = DriftFunction::user_supplied("-y", |y| -y, |_| -1.0);
    let rep = check_conditions(&neg, &GridSpec::default()).unwrap();
    assert!(!rep.sign_ok);
    assert!(!rep.all_ok());
}

#[test]
fn mills_sandwich_all_laws() {
    let grid: Vec<f64> = (0..1000).map(|i| -8.0 + 16.0 * i as f64 / 999.0).collect();
    for law in [LimitLaw::quartic_12(), LimitLaw::standard_normal(), y6_law()] {
        let c3 = check_conditions(law.drift(), &GridSpec::default()).unwrap().c3_est;
        let rep = mills_bounds_check(&law, c3, &grid).unwrap();
        assert_eq!(rep.points_checked, 1000);
        assert!(rep.min_slack > 0.0);
    }
}

#[test]
fn mills_ratio_values() {
    let law = LimitLaw::quartic_12();
    let r = law.mills_upper(1.0);
    assert!(r <= 3.0);
    assert!((r - 0.764_412_298_547_778_4).abs() < 1e-12);
    let gauss = LimitLaw::standard_normal();
    assert!((gauss.mills_upper(2.0) - 0.421_369_229_288_054_5).abs() < 1e-12);
}
