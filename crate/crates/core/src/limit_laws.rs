//! Drift functions `g` and the symmetric limit laws with density `c1 * exp(-G(y))`,
//! where `G(y) = ∫_0^y g(t) dt`.
//!
//! Tail and CDF values are never formed as `1 - cdf` on the far side. Instead the
//! Mills-type ratios `(1 - F(w)) / p(w)` and `F(w) / p(w)` are integrated directly
//! with the scaled integrand `exp(G(w) - G(y))`, which is bounded by one on the
//! integration range and cannot underflow.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Side};
use crate::quadrature::{self, Tolerance};

/// `G(R) = TRUNCATION_LEVEL` fixes the truncation radius: the neglected tail mass
/// is below `exp(-40)`.
pub const TRUNCATION_LEVEL: f64 = 40.0;

const TABLE_PANELS: usize = 2048;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftKind {
    ScaledOddMonomial,
    UserSupplied,
}

/// The function `g` driving a limit law.
///
/// `ScaledOddMonomial` is `g(y) = a * sgn(y) * |y|^p` with `a > 0`, `p >= 1`.
/// `UserSupplied` wraps arbitrary closures for `g` and `g'`; its integral is
/// computed by quadrature.
#[derive(Clone)]
pub struct DriftFunction {
    kind: DriftKind,
    a: f64,
    p: f64,
    label: String,
    custom: Option<(ScalarFn, ScalarFn)>,
}

impl fmt::Debug for DriftFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftFunction")
            .field("kind", &self.kind)
            .field("label", &self.label)
            .finish()
    }
}

impl DriftFunction {
    pub fn monomial(a: f64, p: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidDrift(format!("scale a = {a} must be positive")));
        }
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::InvalidDrift(format!("exponent p = {p} must be >= 1")));
        }
        Ok(Self {
            kind: DriftKind::ScaledOddMonomial,
            a,
            p,
            label: format!("monomial(a={a},p={p})"),
            custom: None,
        })
    }

    /// `g(y) = y`: the standard normal law.
    pub fn gaussian() -> Self {
        Self::monomial(1.0, 1.0).expect("valid parameters")
    }

    /// `g(y) = y / variance`: centred normal law with the given variance.
    pub fn normal(variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::InvalidDrift(format!("variance {variance} must be positive")));
        }
        Self::monomial(1.0 / variance, 1.0)
    }

    /// `g(y) = y^3 / 3`, the drift of the law with density proportional to `exp(-y^4/12)`.
    pub fn quartic_12() -> Self {
        Self::monomial(1.0 / 3.0, 3.0).expect("valid parameters")
    }

    pub fn user_supplied<G, D>(label: impl Into<String>, g: G, dg: D) -> Self
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            kind: DriftKind::UserSupplied,
            a: f64::NAN,
            p: f64::NAN,
            label: label.into(),
            custom: Some((Arc::new(g), Arc::new(dg))),
        }
    }

    /// Odd polynomial `sum_i coeffs[i] * y^(2i+1)` as a user-supplied drift.
    pub fn odd_polynomial(coeffs: &[f64]) -> Self {
        let c: Vec<f64> = coeffs.to_vec();
        let dc = c.clone();
        let label = format!("odd-poly{coeffs:?}");
        Self::user_supplied(
            label,
            move |y| {
                let y2 = y * y;
                c.iter().rev().fold(0.0, |acc, &ci| acc * y2 + ci) * y
            },
            move |y| {
                let y2 = y * y;
                dc.iter()
                    .enumerate()
                    .map(|(i, &ci)| ci * (2 * i + 1) as f64 * y2.powi(i as i32))
                    .sum()
            },
        )
    }

    pub fn kind(&self) -> DriftKind {
        self.kind
    }

    /// Scale `a` (NaN for user-supplied drifts).
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Exponent `p` (NaN for user-supplied drifts).
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, y: f64) -> f64 {
        match &self.custom {
            Some((g, _)) => g(y),
            None => {
                if y == 0.0 {
                    0.0
                } else if self.p == 1.0 {
                    self.a * y
                } else {
                    self.a * y.signum() * y.abs().powf(self.p)
                }
            }
        }
    }

    /// `g'(y)`; for the monomial family `g'(0) = a` when `p = 1` and `0` when `p > 1`.
    pub fn deriv(&self, y: f64) -> f64 {
        match &self.custom {
            Some((_, dg)) => dg(y),
            None => {
                if self.p == 1.0 {
                    self.a
                } else if y == 0.0 {
                    0.0
                } else {
                    self.a * self.p * y.abs().powf(self.p - 1.0)
                }
            }
        }
    }

    /// `G(y) = ∫_0^y g(t) dt`. Returns NaN if the quadrature for a user-supplied
    /// drift fails.
    pub fn integral(&self, y: f64) -> f64 {
        match &self.custom {
            Some((g, _)) => {
                let tol = Tolerance {
                    abs: 1e-300,
                    rel: 1e-14,
                    ..Tolerance::default()
                };
                quadrature::integrate(|t| g(t), 0.0, y, tol)
                    .map(|e| e.value)
                    .unwrap_or(f64::NAN)
            }
            None => {
                let q = self.p + 1.0;
                self.a * y.abs().powf(q) / q
            }
        }
    }

    /// Point `y` on the given side with `G(y) = level`.
    fn level_point(&self, side: Side, level: f64) -> Result<f64> {
        let sign = match side {
            Side::Left => -1.0,
            Side::Right => 1.0,
        };
        if level <= 0.0 {
            return Ok(0.0);
        }
        if self.custom.is_none() {
            let q = self.p + 1.0;
            return Ok(sign * (q * level / self.a).powf(1.0 / q));
        }
        let mut hi = 1.0;
        while !(self.integral(sign * hi) >= level) {
            hi *= 2.0;
            if hi > 1e8 || self.integral(sign * hi).is_nan() {
                return Err(Error::NonIntegrable {
                    side,
                    detail: format!("G does not reach {level} before |y| = {hi:e}"),
                });
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.integral(sign * mid) < level {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Ok(sign * hi)
    }
}

fn scaled_tol() -> Tolerance {
    Tolerance {
        abs: 1e-300,
        rel: 1e-14,
        max_intervals: 4000,
    }
}

/// Quadrature for the Mills-type integrals `∫ exp(G(w) - G(y)) dy`. The
/// exponent loses about `eps * G(w)` to cancellation, so the relative target is
/// widened by that much. A result whose error estimate sits at the rounding
/// floor is accepted even if the target was missed.
fn scaled_quadrature<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, gw: f64) -> f64 {
    let rel = 1e-14_f64.max(64.0 * f64::EPSILON * gw.abs());
    let tol = Tolerance {
        abs: 1e-300,
        rel,
        max_intervals: 4000,
    };
    match quadrature::integrate(f, a, b, tol) {
        Ok(e) => e.value,
        Err(Error::Quadrature { value, abs_err, .. }) if abs_err <= 100.0 * rel * value.abs() => value,
        Err(_) => f64::NAN,
    }
}

/// Serializable description of a monomial law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawRecord {
    pub kind: DriftKind,
    pub a: f64,
    pub p: f64,
    pub c1: f64,
    pub truncation_radius: f64,
}

/// Law of `Y` with density `c1 * exp(-G(y))`. Immutable after construction.
#[derive(Debug, Clone)]
pub struct LimitLaw {
    drift: DriftFunction,
    c1: f64,
    ln_c1: f64,
    radius: f64,
    left_radius: f64,
    table_y: Vec<f64>,
    table_cdf: Vec<f64>,
}

/// Normalizing constant `c1 = 1 / ∫ exp(-G)` by adaptive quadrature over the
/// truncation interval `G(y) <= 40`.
pub fn normalizing_constant(drift: &DriftFunction) -> Result<f64> {
    let right = drift.level_point(Side::Right, TRUNCATION_LEVEL)?;
    let left = drift.level_point(Side::Left, TRUNCATION_LEVEL)?;
    half_masses(drift, left, right).map(|(l, r)| 1.0 / (l + r))
}

fn half_masses(drift: &DriftFunction, left: f64, right: f64) -> Result<(f64, f64)> {
    let mass = |a: f64, b: f64, side: Side| {
        quadrature::integrate(|y| (-drift.integral(y)).exp(), a, b, scaled_tol())
            .map(|e| e.value)
            .map_err(|e| Error::NonIntegrable {
                side,
                detail: e.to_string(),
            })
    };
    Ok((mass(left, 0.0, Side::Left)?, mass(0.0, right, Side::Right)?))
}

impl LimitLaw {
    pub fn new(drift: DriftFunction) -> Result<Self> {
        if drift.kind == DriftKind::UserSupplied {
            // Only symmetric laws are supported.
            for i in 1..=200 {
                let y = i as f64 * 0.05;
                let (gp, gm) = (drift.eval(y), drift.eval(-y));
                if !(gp.is_finite() && (gp + gm).abs() <= 1e-12 * gp.abs().max(1.0)) {
                    return Err(Error::InvalidDrift(format!(
                        "{} is not odd at y = {y}",
                        drift.label
                    )));
                }
            }
        }
        let radius = drift.level_point(Side::Right, TRUNCATION_LEVEL)?;
        let left_radius = drift.level_point(Side::Left, TRUNCATION_LEVEL)?;
        let (l, r) = half_masses(&drift, left_radius, radius)?;
        let c1 = 1.0 / (l + r);
        Ok(Self::assemble(drift, c1, radius, left_radius))
    }

    fn assemble(drift: DriftFunction, c1: f64, radius: f64, left_radius: f64) -> Self {
        let width = (radius - left_radius) / TABLE_PANELS as f64;
        let mut table_y = Vec::with_capacity(TABLE_PANELS + 1);
        let mut table_cdf = Vec::with_capacity(TABLE_PANELS + 1);
        let mut acc = 0.0;
        table_y.push(left_radius);
        table_cdf.push(0.0);
        for i in 0..TABLE_PANELS {
            let a = left_radius + i as f64 * width;
            let b = if i + 1 == TABLE_PANELS { radius } else { a + width };
            acc += c1 * quadrature::panel(|y| (-drift.integral(y)).exp(), a, b);
            table_y.push(b);
            table_cdf.push(acc.min(1.0));
        }
        Self {
            drift,
            c1,
            ln_c1: c1.ln(),
            radius,
            left_radius,
            table_y,
            table_cdf,
        }
    }

    /// Law with density proportional to `exp(-y^4 / 12)`.
    pub fn quartic_12() -> Self {
        Self::new(DriftFunction::quartic_12()).expect("quartic law is integrable")
    }

    pub fn standard_normal() -> Self {
        Self::new(DriftFunction::gaussian()).expect("normal law is integrable")
    }

    pub fn from_record(record: &LawRecord) -> Result<Self> {
        if record.kind != DriftKind::ScaledOddMonomial {
            return Err(Error::InvalidDrift("only monomial laws can be restored".into()));
        }
        let drift = DriftFunction::monomial(record.a, record.p)?;
        let left = -record.truncation_radius;
        Ok(Self::assemble(drift, record.c1, record.truncation_radius, left))
    }

    pub fn to_record(&self) -> Result<LawRecord> {
        if self.drift.kind != DriftKind::ScaledOddMonomial {
            return Err(Error::InvalidDrift(format!(
                "{} has no closed-form record",
                self.drift.label
            )));
        }
        Ok(LawRecord {
            kind: self.drift.kind,
            a: self.drift.a,
            p: self.drift.p,
            c1: self.c1,
            truncation_radius: self.radius,
        })
    }

    pub fn drift(&self) -> &DriftFunction {
        &self.drift
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn truncation_radius(&self) -> f64 {
        self.radius
    }

    pub fn label(&self) -> &str {
        self.drift.label()
    }

    /// `G(y)`.
    pub fn big_g(&self, y: f64) -> f64 {
        self.drift.integral(y)
    }

    pub fn g(&self, y: f64) -> f64 {
        self.drift.eval(y)
    }

    pub fn density(&self, y: f64) -> f64 {
        (self.ln_c1 - self.drift.integral(y)).exp()
    }

    pub fn ln_density(&self, y: f64) -> f64 {
        self.ln_c1 - self.drift.integral(y)
    }

    /// `(1 - F(w)) / p(w)`.
    pub fn mills_upper(&self, w: f64) -> f64 {
        if w >= 0.0 {
            self.scaled_right_integral(w)
        } else {
            1.0 / self.density(w) - self.scaled_left_integral(w)
        }
    }

    /// `F(w) / p(w)`.
    pub fn mills_lower(&self, w: f64) -> f64 {
        if w <= 0.0 {
            self.scaled_left_integral(w)
        } else {
            1.0 / self.density(w) - self.scaled_right_integral(w)
        }
    }

    /// `∫_w^∞ exp(G(w) - G(y)) dy` for `w >= 0`.
    fn scaled_right_integral(&self, w: f64) -> f64 {
        let gw = self.drift.integral(w);
        let upper = self
            .drift
            .level_point(Side::Right, gw + TRUNCATION_LEVEL)
            .unwrap_or(f64::NAN)
            .max(self.radius);
        scaled_quadrature(|y| (gw - self.drift.integral(y)).exp(), w, upper, gw)
    }

    /// `∫_{-∞}^w exp(G(w) - G(y)) dy` for `w <= 0`.
    fn scaled_left_integral(&self, w: f64) -> f64 {
        let gw = self.drift.integral(w);
        let lower = self
            .drift
            .level_point(Side::Left, gw + TRUNCATION_LEVEL)
            .unwrap_or(f64::NAN)
            .min(self.left_radius);
        scaled_quadrature(|y| (gw - self.drift.integral(y)).exp(), lower, w, gw)
    }

    /// `P(Y >= z)`, by direct quadrature of the right tail for `z >= 0`.
    pub fn tail(&self, z: f64) -> f64 {
        if z >= 0.0 {
            (self.ln_density(z) + self.scaled_right_integral(z).ln())
                .exp()
                .clamp(0.0, 1.0)
        } else {
            (1.0 - self.cdf(z)).clamp(0.0, 1.0)
        }
    }

    /// `P(Y <= y)`, by direct quadrature of the left tail for `y <= 0`.
    pub fn cdf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            (self.ln_density(y) + self.scaled_left_integral(y).ln())
                .exp()
                .clamp(0.0, 1.0)
        } else {
            (1.0 - self.tail(y)).clamp(0.0, 1.0)
        }
    }

    /// Inverse CDF: table lookup, then Newton steps safeguarded by bisection.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::ProbabilityOutOfRange(q));
        }
        let below = self.cdf(self.left_radius);
        let above = self.tail(self.radius);
        let (mut lo, mut hi, mut y);
        if q <= below || 1.0 - q <= above {
            // Beyond the table: widen and bisect on the CDF itself.
            let (mut a, mut b) = if q <= below {
                (2.0 * self.left_radius, self.left_radius)
            } else {
                (self.radius, 2.0 * self.radius)
            };
            while self.cdf(a) > q {
                a *= 2.0;
            }
            while self.cdf(b) < q {
                b *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if self.cdf(mid) < q {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            lo = a;
            hi = b;
            y = 0.5 * (a + b);
        } else {
            let mut i = self.table_cdf.partition_point(|&c| c < q).clamp(1, TABLE_PANELS);
            let mut j = i;
            // The table and the tail quadrature can disagree near a node, so
            // the bracket is confirmed against the CDF itself.
            while i > 1 && self.cdf(self.table_y[i - 1]) > q {
                i -= 1;
            }
            while j < TABLE_PANELS && self.cdf(self.table_y[j]) < q {
                j += 1;
            }
            lo = self.table_y[i - 1];
            hi = self.table_y[j];
            let (c0, c1) = (self.table_cdf[i - 1], self.table_cdf[j]);
            let t = if c1 > c0 { ((q - c0) / (c1 - c0)).clamp(0.0, 1.0) } else { 0.5 };
            y = lo + t * (hi - lo);
        }
        for _ in 0..100 {
            let c = self.cdf(y);
            if c == q {
                break;
            }
            if c < q {
                lo = y;
            } else {
                hi = y;
            }
            let next = y - (c - q) / self.density(y);
            let prev = y;
            y = if next.is_finite() && next > lo && next < hi {
                next
            } else {
                0.5 * (lo + hi)
            };
            if (y - prev).abs() <= 1e-15 * (1.0 + y.abs()) || hi - lo <= 1e-15 * (1.0 + y.abs()) {
                break;
            }
        }
        Ok(y)
    }
}

/// Uniform evaluation grid on `[-radius, radius]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub radius: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            radius: 10.0,
            points: 1001,
        }
    }
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| -self.radius + 2.0 * self.radius * i as f64 / (n - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub drift: String,
    pub monotone_ok: bool,
    pub sign_ok: bool,
    /// `max(1, c2_grid_sup)`; every constant at least this large satisfies the growth condition on the grid.
    pub c2_est: f64,
    /// `max(1, c3_grid_sup)`.
    pub c3_est: f64,
    pub c2_grid_sup: f64,
    pub c3_grid_sup: f64,
    pub grid: GridSpec,
}

impl ConditionReport {
    pub fn all_ok(&self) -> bool {
        self.monotone_ok && self.sign_ok && self.c2_est.is_finite() && self.c3_est.is_finite()
    }
}

/// Grid checks of monotonicity, sign, growth (`c2`) and derivative (`c3`) conditions on `g`.
pub fn check_conditions(g: &DriftFunction, grid: &GridSpec) -> Result<ConditionReport> {
    if !(grid.radius >= 10.0) || grid.points < 1000 {
        return Err(Error::InvalidArgument(format!(
            "condition grid must cover [-R, R] with R >= 10 and >= 1000 points, got R = {}, {} points",
            grid.radius, grid.points
        )));
    }
    let ys = grid.values();
    let gs: Vec<f64> = ys.iter().map(|&y| g.eval(y)).collect();

    let monotone_ok = g.eval(0.0) == 0.0 && gs.windows(2).all(|w| w[1] >= w[0]);
    let sign_ok = ys
        .iter()
        .zip(&gs)
        .filter(|(y, _)| **y != 0.0)
        .all(|(y, gy)| y * gy > 0.0);

    let mut c2 = 0.0_f64;
    for (x, gx) in ys.iter().zip(&gs) {
        for (y, gy) in ys.iter().zip(&gs) {
            let r = g.eval(x + y).abs() / (gx.abs() + gy.abs() + 1.0);
            c2 = c2.max(r);
        }
    }
    let c3 = ys
        .iter()
        .zip(&gs)
        .map(|(y, gy)| g.deriv(*y).abs() * (1.0 + y.abs()) / (1.0 + gy.abs()))
        .fold(0.0_f64, f64::max);

    Ok(ConditionReport {
        drift: g.label().to_string(),
        monotone_ok,
        sign_ok,
        c2_est: c2.max(1.0),
        c3_est: c3.max(1.0),
        c2_grid_sup: c2,
        c3_grid_sup: c3,
        grid: *grid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MillsReport {
    pub law: String,
    pub points_checked: usize,
    /// Smallest relative slack `(rhs - lhs) / rhs` over all inequalities.
    pub min_slack: f64,
    pub worst_w: f64,
}

/// Checks the two-sided Mills-ratio sandwich for `w > 0` and the upper bound for `w < 0`.
/// Grid points at exactly zero are skipped.
pub fn mills_bounds_check(law: &LimitLaw, c3: f64, w_grid: &[f64]) -> Result<MillsReport> {
    let c3 = c3.max(1.0);
    let mut min_slack = f64::INFINITY;
    let mut worst_w = f64::NAN;
    let mut checked = 0;
    let mut record = |name: &str, w: f64, lhs: f64, rhs: f64| -> Result<()> {
        if !(lhs < rhs) {
            return Err(Error::BoundViolation {
                bound: name.to_string(),
                w,
                lhs,
                rhs,
            });
        }
        let slack = (rhs - lhs) / rhs.abs();
        if slack < min_slack {
            min_slack = slack;
            worst_w = w;
        }
        Ok(())
    };
    for &w in w_grid {
        if w == 0.0 {
            continue;
        }
        let gw = law.g(w).abs();
        let upper = (1.0 / gw).min(1.0 / law.c1());
        if w > 0.0 {
            let ratio = law.mills_upper(w);
            let lower = 1.0 / (c3 * (1.0 + gw));
            record("mills-lower (w > 0)", w, lower, ratio)?;
            record("mills-upper (w > 0)", w, ratio, upper)?;
        } else {
            let ratio = law.mills_lower(w);
            record("mills-upper (w < 0)", w, ratio, upper)?;
        }
        checked += 1;
    }
    Ok(MillsReport {
        law: law.label().to_string(),
        points_checked: checked,
        min_slack,
        worst_w,
    })
}
