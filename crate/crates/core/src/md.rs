//! Mean-field monomer-dimer model with imitation coefficient `J` and field `h`.
//!
//! On the complete graph with `n` vertices a configuration is a set of disjoint
//! dimers; `M` counts the uncovered vertices (monomers) and `m = M/n`. The law of
//! `m` concentrates at the maximizer `m0` of
//! `H(x) = -J x^2 - (1 - g(tau(x)) + log(1 - g(tau(x))))/2` with
//! `tau(x) = (2x - 1) J + h`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit_laws::{DriftFunction, LimitLaw};
use crate::numeric::{derivative, ln_binomial, log_sum_exp};

const CRIT_TOL: f64 = 1e-9;
const DERIV_STEPS: [f64; 4] = [0.02, 0.05, 0.1, 0.2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct MDParams {
    pub J: f64,
    pub h: f64,
    pub n: u64,
}

impl MDParams {
    #[allow(non_snake_case)]
    pub fn new(J: f64, h: f64, n: u64) -> Result<Self> {
        if !(J >= 0.0 && J.is_finite()) {
            return Err(Error::InvalidArgument(format!("J = {J} must be finite and >= 0")));
        }
        if !h.is_finite() {
            return Err(Error::InvalidArgument(format!("h = {h} must be finite")));
        }
        if n < 2 {
            return Err(Error::InvalidArgument(format!("n = {n} must be at least 2")));
        }
        Ok(Self { J, h, n })
    }

    /// `b = log(n)/2 + h - J`.
    pub fn b(&self) -> f64 {
        0.5 * (self.n as f64).ln() + self.h - self.J
    }
}

/// `g(t) = (sqrt(e^{4t} + 4 e^{2t}) - e^{2t}) / 2`, the positive root of
/// `g^2 = (1 - g) e^{2t}`, evaluated without cancellation.
pub fn g_fn(t: f64) -> f64 {
    if t >= 0.0 {
        2.0 / (1.0 + (1.0 + 4.0 * (-2.0 * t).exp()).sqrt())
    } else {
        let e = t.exp();
        2.0 * e / (e + (e * e + 4.0).sqrt())
    }
}

/// `log(1 - g(t))`, accurate as `g -> 1`.
fn log_one_minus_g(t: f64) -> f64 {
    if t >= 0.0 {
        4f64.ln() - 2.0 * t - 2.0 * (1.0 + (1.0 + 4.0 * (-2.0 * t).exp()).sqrt()).ln()
    } else {
        (-g_fn(t)).ln_1p()
    }
}

/// `g'(t) = 2 g (1 - g) / (2 - g)`.
pub fn g_prime(t: f64) -> f64 {
    let g = g_fn(t);
    2.0 * g * (1.0 - g) / (2.0 - g)
}

#[allow(non_snake_case)]
pub fn tau(J: f64, h: f64, x: f64) -> f64 {
    (2.0 * x - 1.0) * J + h
}

#[allow(non_snake_case)]
fn h_value(J: f64, h: f64, x: f64) -> Result<f64> {
    let t = tau(J, h, x);
    let g = g_fn(t);
    let l = log_one_minus_g(t);
    if !(g < 1.0) || !l.is_finite() {
        return Err(Error::Domain(format!("g(tau({x})) = {g} leaves log(1 - g) undefined")));
    }
    Ok(-J * x * x - 0.5 * (1.0 - g + l))
}

/// `[H(x), H'(x), ..., H^{(order)}(x)]`, derivatives by Richardson extrapolation.
#[allow(non_snake_case)]
pub fn H_and_derivs(J: f64, h: f64, x: f64, order: usize) -> Result<Vec<f64>> {
    if order > 4 {
        return Err(Error::InvalidArgument(format!("order {order} exceeds 4")));
    }
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("x = {x} outside (0, 1)")));
    }
    let reach = 2.0 * DERIV_STEPS[DERIV_STEPS.len() - 1];
    h_value(J, h, x - reach)?;
    h_value(J, h, x + reach)?;
    let f = |y: f64| h_value(J, h, y).unwrap_or(f64::NAN);
    let mut out = vec![h_value(J, h, x)?];
    for k in 1..=order {
        out.push(derivative(f, x, k, &DERIV_STEPS).0);
    }
    Ok(out)
}

/// `(J_c, h_c, m_c)` in closed form.
pub fn critical_constants() -> (f64, f64, f64) {
    let s2 = 2f64.sqrt();
    let jc = 1.0 / (4.0 * (3.0 - 2.0 * s2));
    let hc = 0.5 * (2.0 * s2 - 2.0).ln() - 0.25;
    (jc, hc, 2.0 - s2)
}

#[allow(non_snake_case)]
pub fn is_critical(J: f64, h: f64) -> bool {
    let (jc, hc, _) = critical_constants();
    (J - jc).abs() <= CRIT_TOL && (h - hc).abs() <= CRIT_TOL
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Noncritical,
    Critical,
}

/// Maximizer of `H` with its fluctuation constant: `lambda0` in the noncritical
/// phase, `lambda_c = -H''''(m_c)` at the critical point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct MDStationary {
    pub J: f64,
    pub h: f64,
    pub phase: Phase,
    pub m0: f64,
    pub lambda: f64,
}

impl MDStationary {
    /// Scaling exponent of `W = n^{a} (m - m0)`.
    pub fn w_exponent(&self) -> f64 {
        match self.phase {
            Phase::Noncritical => 0.5,
            Phase::Critical => 0.25,
        }
    }

    pub fn w_of(&self, n: u64, m: f64) -> f64 {
        (n as f64).powf(self.w_exponent()) * (m - self.m0)
    }

    /// Limit drift: `y / lambda0`, or `(lambda_c / 6) y^3`.
    pub fn drift(&self) -> DriftFunction {
        match self.phase {
            Phase::Noncritical => DriftFunction::normal(self.lambda).expect("positive variance"),
            Phase::Critical => DriftFunction::monomial(self.lambda / 6.0, 3.0).expect("positive coefficient"),
        }
    }

    pub fn limit_law(&self) -> Result<LimitLaw> {
        LimitLaw::new(self.drift())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Fixed point `m0 = g(tau(m0))`.
///
/// `H'(x) = 2J (g(tau(x)) - x)`, so the root is bracketed on `F(m) = g(tau(m)) - m`,
/// which stays meaningful at `J = 0`. More than one sign change of `F` on a fine
/// grid is reported instead of choosing between maximizers.
#[allow(non_snake_case)]
pub fn solve_m0(J: f64, h: f64) -> Result<MDStationary> {
    if !(J >= 0.0 && J.is_finite() && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("(J, h) = ({J}, {h}) is not admissible")));
    }
    let f = |m: f64| g_fn(tau(J, h, m)) - m;
    let grid = 10_000;
    let eps = 1e-9;
    let xs: Vec<f64> = (0..=grid)
        .map(|i| eps + (1.0 - 2.0 * eps) * i as f64 / grid as f64)
        .collect();
    let mut changes = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for &x in &xs {
        let v = f(x);
        if v == 0.0 {
            continue;
        }
        if let Some((lx, lv)) = last {
            if lv.signum() != v.signum() {
                changes.push((lx, x));
            }
        }
        last = Some((x, v));
    }
    if changes.len() != 1 {
        return Err(Error::AmbiguousMaximizer {
            sign_changes: changes.len(),
        });
    }
    let (mut lo, mut hi) = changes[0];
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut m0 = 0.5 * (lo + hi);
    for _ in 0..3 {
        let slope = 2.0 * J * g_prime(tau(J, h, m0)) - 1.0;
        let next = m0 - f(m0) / slope;
        if next.is_finite() && (next - m0).abs() < 1e-6 && f(next).abs() <= f(m0).abs() {
            m0 = next;
        }
    }
    if is_critical(J, h) {
        let (_, _, mc) = critical_constants();
        if (m0 - mc).abs() > 1e-4 {
            return Err(Error::Domain(format!("critical root {m0} is not near m_c = {mc}")));
        }
        let d = H_and_derivs(J, h, mc, 4)?;
        return Ok(MDStationary {
            J,
            h,
            phase: Phase::Critical,
            m0: mc,
            lambda: -d[4],
        });
    }
    let lambda = if J == 0.0 {
        g_prime(h)
    } else {
        let h2 = H_and_derivs(J, h, m0, 2)?[2];
        -1.0 / h2 - 1.0 / (2.0 * J)
    };
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda0 = {lambda} is not positive at m0 = {m0}")));
    }
    Ok(MDStationary {
        J,
        h,
        phase: Phase::Noncritical,
        m0,
        lambda,
    })
}

/// `log((m - 1)!!)`, the number of perfect matchings of `K_m`; `-inf` for odd `m`.
pub fn matchings_log_count(m: u64) -> f64 {
    if m % 2 == 1 {
        return f64::NEG_INFINITY;
    }
    let mf = m as f64;
    libm::lgamma(mf + 1.0) - 0.5 * mf * std::f64::consts::LN_2 - libm::lgamma(0.5 * mf + 1.0)
}

/// Exact law of the monomer count `M`; only `j` with `n - j` even is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct MDMagnetizationDist {
    pub params: MDParams,
    pub j: Vec<u64>,
    pub log_pmf: Vec<f64>,
}

impl MDMagnetizationDist {
    pub fn w_values(&self, st: &MDStationary) -> Vec<f64> {
        let n = self.params.n;
        self.j.iter().map(|&j| st.w_of(n, j as f64 / n as f64)).collect()
    }

    pub fn pmf(&self) -> Vec<f64> {
        self.log_pmf.iter().map(|l| l.exp()).collect()
    }

    /// CSV with columns `j,w_value,log_prob`.
    pub fn write_csv<W: Write>(&self, mut out: W, st: &MDStationary) -> Result<()> {
        writeln!(out, "j,w_value,log_prob")?;
        for ((j, w), lp) in self.j.iter().zip(self.w_values(st)).zip(&self.log_pmf) {
            writeln!(out, "{j},{w:?},{lp:?}")?;
        }
        Ok(())
    }
}

pub const MAX_N: u64 = 1_000_000;

/// `log P(M = j) = log C(n, j) + log (n - j - 1)!! + n (J m^2 + b m) - log Z`.
pub fn exact_magnetization_dist(params: &MDParams) -> Result<MDMagnetizationDist> {
    let n = params.n;
    if n > MAX_N {
        return Err(Error::StateSpaceOverflow {
            n,
            states: n as u128 + 1,
            limit: MAX_N as u128 + 1,
        });
    }
    let b = params.b();
    let nf = n as f64;
    let j: Vec<u64> = (n % 2..=n).step_by(2).collect();
    let mut log_pmf: Vec<f64> = j
        .iter()
        .map(|&j| {
            let m = j as f64 / nf;
            ln_binomial(n, j) + matchings_log_count(n - j) + nf * (params.J * m * m + b * m)
        })
        .collect();
    let z = log_sum_exp(&log_pmf);
    for lp in &mut log_pmf {
        *lp -= z;
    }
    Ok(MDMagnetizationDist {
        params: *params,
        j,
        log_pmf,
    })
}

/// `(L_1(x), L_2(x))`, leading terms of `E(M - M' | m)` and `E((M - M')^2 | m)`.
#[allow(non_snake_case)]
pub fn L_drifts(J: f64, h: f64, x: f64) -> Result<(f64, f64)> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("x = {x} outside (0, 1)")));
    }
    let e = (2.0 * tau(J, h, x)).exp();
    let den = (1.0 - x) + e;
    let l1 = 2.0 * (1.0 - x) * (x * x - (1.0 - x) * e) / den;
    let l2 = 4.0 * (1.0 - x) * (x * x + (1.0 - x) * e) / den;
    Ok((l1, l2))
}

/// `P(W >= z)` with `W = n^{1/2}(m - m0)` or `n^{1/4}(m - m_c)`; atoms within
/// `1e-12` of `z` count.
pub fn tail_prob(dist: &MDMagnetizationDist, st: &MDStationary, z: f64) -> f64 {
    let terms: Vec<f64> = dist
        .w_values(st)
        .iter()
        .zip(&dist.log_pmf)
        .filter(|(w, _)| **w >= z - 1e-12)
        .map(|(_, lp)| *lp)
        .collect();
    log_sum_exp(&terms).exp().clamp(0.0, 1.0)
}

/// `(E(M - M' | M = j), E((M - M')^2 | M = j))` for the pair that resamples a
/// uniformly chosen pair of distinct vertices from its conditional law.
pub fn pair_conditional_moments(params: &MDParams, j: u64) -> Result<(f64, f64)> {
    let n = params.n;
    if j > n || (n - j) % 2 == 1 {
        return Err(Error::InvalidArgument(format!("M = {j} is not reachable for n = {n}")));
    }
    let nf = n as f64;
    let b = params.b();
    // Log weight of a single configuration with `k` monomers.
    let weight = |k: u64| {
        let m = k as f64 / nf;
        matchings_log_count(n - k) + nf * (params.J * m * m + b * m)
    };
    let pairs = nf * (nf - 1.0) / 2.0;
    let jf = j as f64;
    let cases = [
        (2u64, jf * (jf - 1.0) / 2.0 / pairs),
        (1, jf * (nf - jf) / pairs),
        (0, (nf - jf) * (nf - jf - 1.0) / 2.0 / pairs),
    ];
    let (mut e1, mut e2) = (0.0, 0.0);
    for (occupied, pr) in cases {
        if pr <= 0.0 {
            continue;
        }
        let base = j - occupied;
        // (s, t) in {0,1}^2: new monomer counts base, base+1 (twice), base+2.
        let opts = [(base, 1.0), (base + 1, 2.0), (base + 2, 1.0)];
        let logs: Vec<f64> = opts.iter().map(|&(k, mult)| weight(k) + f64::ln(mult)).collect();
        let z = log_sum_exp(&logs);
        for (&(k, _), l) in opts.iter().zip(&logs) {
            let q = (l - z).exp();
            let d = jf - k as f64;
            e1 += pr * q * d;
            e2 += pr * q * d * d;
        }
    }
    Ok((e1, e2))
}

/// `E(M - M')^2` under the exact law of `M`.
pub fn pair_second_moment(dist: &MDMagnetizationDist) -> Result<f64> {
    let mut total = 0.0;
    for (&j, lp) in dist.j.iter().zip(&dist.log_pmf) {
        let p = lp.exp();
        if p > 0.0 {
            total += p * pair_conditional_moments(&dist.params, j)?.1;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_identity_and_golden_ratio() {
        assert!((g_fn(0.0) - 0.5 * (5f64.sqrt() - 1.0)).abs() < 1e-15);
        for t in [-30.0, -2.0, -0.1, 0.0, 0.7, 5.0, 30.0] {
            let g = g_fn(t);
            let l = log_one_minus_g(t);
            let rel = (g * g - (l + 2.0 * t).exp()).abs() / (g * g);
            assert!(rel < 1e-12, "t = {t}: {rel}");
            assert!((l.exp() - (1.0 - g)).abs() <= 1e-15 + 1e-12 * (1.0 - g));
        }
    }

    #[test]
    fn params_validate() {
        assert!(MDParams::new(-0.1, 0.0, 10).is_err());
        assert!(MDParams::new(0.5, f64::NAN, 10).is_err());
        assert!(MDParams::new(0.5, 0.0, 1).is_err());
        assert!((MDParams::new(1.0, 0.5, 100).unwrap().b() - (0.5 * 100f64.ln() - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn derivative_order_limits() {
        assert!(H_and_derivs(0.5, 0.0, 0.5, 5).is_err());
        assert!(matches!(H_and_derivs(0.5, 0.0, 1.2, 1), Err(Error::Domain(_))));
        assert_eq!(H_and_derivs(0.5, 0.0, 0.5, 2).unwrap().len(), 3);
    }

    #[test]
    fn odd_counts() {
        assert_eq!(matchings_log_count(7), f64::NEG_INFINITY);
        assert_eq!(matchings_log_count(0), 0.0);
    }

    #[test]
    fn coexistence_is_ambiguous() {
        // Well above J_c on the symmetric line there are several fixed points.
        let (jc, _, _) = critical_constants();
        let j = 3.0 * jc;
        // tau(1/2) = h makes x = 1/2 a candidate; pick h so that 1/2 = g(h).
        let h = 0.5 * (0.25f64 / 0.5).ln();
        assert!(matches!(solve_m0(j, h), Err(Error::AmbiguousMaximizer { .. })));
    }

    #[test]
    fn pair_moments_reject_wrong_parity() {
        let p = MDParams::new(0.5, 0.0, 10).unwrap();
        assert!(pair_conditional_moments(&p, 3).is_err());
        assert!(pair_conditional_moments(&p, 4).is_ok());
    }
}
