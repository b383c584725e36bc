//! The Curie-Weiss model `CW(rho)` at inverse temperature one.
//!
//! A configuration `x = (x_1, ..., x_n)` has Gibbs weight
//! `exp(S^2 / (2n)) prod rho(dx_i)` with `S = sum x_i`. Near the critical point
//! the magnetization is governed by the cumulant expansion of `rho`.

mod exact;
mod glauber;
mod pair;

pub use exact::{exact_magnetization_dist, log_convolution, tail_prob, LatticeConvolution, MagnetizationDist};
pub use glauber::{apply_sweep_exact, chain_rng, conditional_law, glauber_sampler, GlauberChain, GlauberSamples};
pub use pair::{
    pair_diagnostics, PairBin, PairDiagnostics, PairOptions, PairSample, PairSource, ZetaRatio,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit_laws::{DriftFunction, LimitLaw};
use crate::numeric::log_sum_exp_iter;

const CUMULANT_ZERO: f64 = 1e-10;

/// Symmetric probability measure with finite support and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoMeasure {
    points: Vec<f64>,
    weights: Vec<f64>,
    radius: f64,
    lattice_step: Option<f64>,
}

impl RhoMeasure {
    /// Validates a measure given by support points and weights. The lattice step
    /// is inferred when `lattice_step` is `None`; non-lattice supports are allowed
    /// and can only be sampled.
    pub fn new(points: Vec<f64>, weights: Vec<f64>, lattice_step: Option<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} points and {} weights",
                points.len(),
                weights.len()
            )));
        }
        if let Some(bad) = points.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidMeasure(format!("support point {bad} is not finite")));
        }
        if let Some(bad) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidMeasure(format!("weight {bad} is not positive")));
        }
        let mut pairs: Vec<(f64, f64)> = points.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidMeasure(format!("support point {} repeated", w[0].0)));
            }
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if (total - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        let d = pairs.len();
        for i in 0..d {
            let (x, w) = pairs[i];
            let (y, v) = pairs[d - 1 - i];
            let scale = x.abs().max(1.0);
            if (x + y).abs() > 1e-12 * scale || (w - v).abs() > 1e-14 {
                return Err(Error::InvalidMeasure(format!("not symmetric: ({x}, {w}) has no mirror")));
            }
        }
        let kappa2: f64 = pairs.iter().map(|(x, w)| w * x * x).sum();
        if (kappa2 - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized { kappa2 });
        }
        let radius = pairs.iter().map(|p| p.0.abs()).fold(0.0, f64::max);
        let (points, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let lattice_step = match lattice_step {
            Some(step) => {
                if !(step > 0.0 && step.is_finite()) {
                    return Err(Error::InvalidMeasure(format!("lattice step {step} is not positive")));
                }
                if !points.iter().all(|&x| on_lattice(x, step)) {
                    return Err(Error::NotLattice);
                }
                Some(step)
            }
            None => infer_step(&points),
        };
        Ok(Self {
            points,
            weights,
            radius,
            lattice_step,
        })
    }

    /// Rescales arbitrary symmetric positive weights and points to total mass 1
    /// and unit second moment before validating.
    pub fn normalized(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let m2: f64 = points.iter().zip(&weights).map(|(x, w)| w * x * x).sum();
        if !(m2 > 0.0) {
            return Err(Error::InvalidMeasure("measure is a point mass at 0".into()));
        }
        let s = m2.sqrt();
        Self::new(points.iter().map(|x| x / s).collect(), weights, None)
    }

    /// `(delta_1 + delta_{-1}) / 2`.
    pub fn rademacher() -> Self {
        Self::new(vec![-1.0, 1.0], vec![0.5, 0.5], Some(1.0)).expect("valid measure")
    }

    /// `(1/6) delta_{sqrt 3} + (2/3) delta_0 + (1/6) delta_{-sqrt 3}`, the simplest
    /// measure whose fourth cumulant vanishes.
    pub fn three_point() -> Self {
        let r3 = 3f64.sqrt();
        Self::new(vec![-r3, 0.0, r3], vec![1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], Some(r3))
            .expect("valid measure")
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Support radius `L = max |x|`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn lattice_step(&self) -> Option<f64> {
        self.lattice_step
    }

    pub fn is_lattice(&self) -> bool {
        self.lattice_step.is_some()
    }

    /// Support points as integer multiples of the lattice step.
    pub fn lattice_units(&self) -> Result<Vec<i64>> {
        let step = self.lattice_step.ok_or(Error::NotLattice)?;
        Ok(self.points.iter().map(|x| (x / step).round() as i64).collect())
    }

    pub fn moment(&self, order: u32) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * x.powi(order as i32))
            .sum()
    }
}

fn on_lattice(x: f64, step: f64) -> bool {
    let r = x / step;
    (r - r.round()).abs() <= 1e-9 * r.abs().max(1.0)
}

fn infer_step(points: &[f64]) -> Option<f64> {
    let a = points
        .iter()
        .map(|x| x.abs())
        .filter(|&x| x > 0.0)
        .fold(f64::INFINITY, f64::min);
    (1..=64)
        .map(|k| a / k as f64)
        .find(|&step| points.iter().all(|&x| on_lattice(x, step)))
}

/// Moments `m_1..m_max` to cumulants `kappa_1..kappa_max` (index 0 holds order 1).
pub fn cumulants_from_moments(moments: &[f64]) -> Vec<f64> {
    let mut kappa: Vec<f64> = Vec::with_capacity(moments.len());
    for n in 1..=moments.len() {
        let mut k = moments[n - 1];
        let mut binom = 1.0; // C(n-1, j-1) for j = 1
        for j in 1..n {
            k -= binom * kappa[j - 1] * moments[n - j - 1];
            binom *= (n - j) as f64 / j as f64;
        }
        kappa.push(k);
    }
    kappa
}

/// Result of the cumulant analysis of `rho`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CWAnalysis {
    pub rho: RhoMeasure,
    /// `kappa_2, ..., kappa_{2k}`.
    pub cumulants: Vec<f64>,
    pub k: usize,
    /// `h^{(2k)}(0) = -kappa_{2k}`.
    pub h2k: f64,
    /// `h2k / (2k - 1)!`, the coefficient of the limiting drift `g(w) = a w^{2k-1}`.
    pub drift_scale: f64,
    /// Whether `h'(s) > 0` held on the whole check grid of `(0, 4L + 4]`.
    pub h_prime_positive: bool,
}

impl CWAnalysis {
    pub fn drift(&self) -> DriftFunction {
        DriftFunction::monomial(self.drift_scale, (2 * self.k - 1) as f64)
            .expect("positive coefficient")
    }

    pub fn limit_law(&self) -> Result<LimitLaw> {
        LimitLaw::new(self.drift())
    }

    /// `lambda = n^{-2 + 1/k}`.
    pub fn lambda(&self, n: u64) -> f64 {
        (n as f64).powf(-2.0 + 1.0 / self.k as f64)
    }

    /// `n^{-1 + 1/(2k)}`, so that `W = scale * S_n`.
    pub fn w_scale(&self, n: u64) -> f64 {
        w_scale(self.k, n)
    }

    pub fn tau1(&self) -> f64 {
        2.0 / (2 * self.k - 1) as f64
    }

    pub fn tau2(&self) -> f64 {
        1.0 + self.tau1()
    }
}

pub(crate) fn w_scale(k: usize, n: u64) -> f64 {
    (n as f64).powf(-1.0 + 1.0 / (2 * k) as f64)
}

/// Finds the order `k` of the first non-vanishing even cumulant beyond the variance.
pub fn analyze_rho(rho: &RhoMeasure, max_order: usize) -> Result<CWAnalysis> {
    if max_order < 4 || max_order % 2 == 1 {
        return Err(Error::InvalidArgument(format!(
            "max_order {max_order} must be even and at least 4"
        )));
    }
    let moments: Vec<f64> = (1..=max_order as u32).map(|i| rho.moment(i)).collect();
    let kappa = cumulants_from_moments(&moments);
    let kappa2 = kappa[1];
    if (kappa2 - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized { kappa2 });
    }
    for k in 2..=max_order / 2 {
        let lower_vanish = (3..2 * k).all(|i| kappa[i - 1].abs() <= CUMULANT_ZERO);
        if !lower_vanish {
            let i = (3..2 * k).find(|&i| kappa[i - 1].abs() > CUMULANT_ZERO).unwrap_or(3);
            return Err(Error::NoLeadingCumulant {
                max_order,
                detail: format!("kappa_{i} = {} is neither zero nor a negative leading term", kappa[i - 1]),
            });
        }
        let h2k = -kappa[2 * k - 1];
        if h2k > CUMULANT_ZERO {
            let fact: f64 = (1..2 * k).map(|i| i as f64).product();
            let h_prime_positive = check_h_prime_positive(rho);
            if !h_prime_positive {
                log::warn!("h'(s) is not positive on (0, 4L + 4]; the minimiser of h may not be unique");
            }
            return Ok(CWAnalysis {
                rho: rho.clone(),
                cumulants: kappa[1..2 * k].to_vec(),
                k,
                h2k,
                drift_scale: h2k / fact,
                h_prime_positive,
            });
        }
        if h2k < -CUMULANT_ZERO {
            return Err(Error::NoLeadingCumulant {
                max_order,
                detail: format!("kappa_{} = {} is positive", 2 * k, kappa[2 * k - 1]),
            });
        }
    }
    Err(Error::NoLeadingCumulant {
        max_order,
        detail: "all cumulants up to max_order vanish".into(),
    })
}

fn check_h_prime_positive(rho: &RhoMeasure) -> bool {
    let top = 4.0 * rho.radius() + 4.0;
    let points = 10_000;
    (1..=points).all(|i| h_prime(rho, top * i as f64 / points as f64) > 0.0)
}

/// `h(s) = s^2/2 - log E exp(s xi)`.
pub fn h_eval(rho: &RhoMeasure, s: f64) -> f64 {
    let lmgf = log_sum_exp_iter(rho.points.iter().zip(&rho.weights).map(|(x, w)| w.ln() + s * x));
    // Dividing by the stored total makes h(0) vanish exactly despite rounding in the weights.
    let total = log_sum_exp_iter(rho.weights.iter().map(|w| w.ln()));
    0.5 * s * s - (lmgf - total)
}

/// `h'(s) = s - psi_inf(s)`.
pub fn h_prime(rho: &RhoMeasure, s: f64) -> f64 {
    s - psi_phi(rho, None, s).0
}

/// `psi_n(s) = E(xi e^{xi^2/(2n) + xi s}) / E(e^{xi^2/(2n) + xi s})` and `phi_n`
/// with `xi^2` in the numerator. `n = None` drops the `xi^2/(2n)` factor.
pub fn psi_phi(rho: &RhoMeasure, n: Option<u64>, s: f64) -> (f64, f64) {
    psi_phi_raw(&rho.points, &rho.weights, n, s)
}

pub(crate) fn psi_phi_raw(points: &[f64], weights: &[f64], n: Option<u64>, s: f64) -> (f64, f64) {
    let quad = n.map_or(0.0, |n| 0.5 / n as f64);
    let expo = |x: f64, w: f64| w.ln() + quad * x * x + s * x;
    let top = points
        .iter()
        .zip(weights)
        .map(|(&x, &w)| expo(x, w))
        .fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (&x, &w) in points.iter().zip(weights) {
        let e = (expo(x, w) - top).exp();
        z += e;
        m1 += e * x;
        m2 += e * x * x;
    }
    (m1 / z, m2 / z)
}

/// `max_{|s| <= L} |psi_n(s) - psi_inf(s)|` on a uniform grid.
pub fn psi_deviation(rho: &RhoMeasure, n: u64, grid_points: usize) -> f64 {
    let l = rho.radius();
    (0..grid_points)
        .map(|i| -l + 2.0 * l * i as f64 / (grid_points - 1) as f64)
        .map(|s| (psi_phi(rho, Some(n), s).0 - psi_phi(rho, None, s).0).abs())
        .fold(0.0, f64::max)
}
