//! Tail-ratio curves `P(W >= z) / P(Y >= z)` over theorem ranges and log-log
//! fits of their maximal relative error across `n`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cw::{self, CWAnalysis};
use crate::error::{Error, Result};
use crate::limit_laws::{DriftFunction, LimitLaw};
use crate::md::{self, MDParams, MDStationary, Phase};
use crate::numeric::{log_sum_exp, ols};

/// `coef * n^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub coef: f64,
    pub exponent: f64,
}

impl PowerLaw {
    pub fn at(&self, n: u64) -> f64 {
        self.coef * (n as f64).powf(self.exponent)
    }
}

/// Coefficients of the general range condition, each a power of `n`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenericRange {
    #[serde(skip, default = "DriftFunction::gaussian")]
    pub drift: DriftFunction,
    pub delta: PowerLaw,
    pub delta1: PowerLaw,
    pub delta2: PowerLaw,
    pub tau1: f64,
    pub tau2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "range", rename_all = "kebab-case")]
pub enum RangeSpec {
    CwCritical { k: usize },
    MdNoncritical,
    MdCritical,
    Generic(GenericRange),
}

impl RangeSpec {
    pub fn name(&self) -> &'static str {
        match self {
            RangeSpec::CwCritical { .. } => "cw-critical",
            RangeSpec::MdNoncritical => "md-noncritical",
            RangeSpec::MdCritical => "md-critical",
            RangeSpec::Generic(_) => "generic",
        }
    }

    pub fn for_md(st: &MDStationary) -> Self {
        match st.phase {
            Phase::Noncritical => RangeSpec::MdNoncritical,
            Phase::Critical => RangeSpec::MdCritical,
        }
    }

    /// Upper end of the closed range `[0, z_max(n)]`.
    pub fn z_max(&self, n: u64) -> f64 {
        let l2 = (n as f64).log2();
        match self {
            RangeSpec::CwCritical { k } => (l2 / (k * (2 * k + 2)) as f64).exp2(),
            RangeSpec::MdNoncritical => (l2 / 6.0).exp2(),
            RangeSpec::MdCritical => (l2 / 20.0).exp2(),
            RangeSpec::Generic(g) => moderate_range_boundary(
                &g.drift,
                g.delta.at(n),
                g.delta1.at(n),
                g.delta2.at(n),
                g.tau1,
                g.tau2,
            ),
        }
    }

    /// Power `q` in the relative-error bound `C n^{-r} (1 + z^q)`.
    pub fn error_power(&self) -> Option<f64> {
        match self {
            RangeSpec::CwCritical { k } => Some((2 * k + 2) as f64),
            RangeSpec::MdNoncritical => Some(3.0),
            RangeSpec::MdCritical => Some(5.0),
            RangeSpec::Generic(_) => None,
        }
    }

    /// Rate `r` in the same bound.
    pub fn error_rate(&self) -> Option<f64> {
        match self {
            RangeSpec::CwCritical { k } => Some(1.0 / *k as f64),
            RangeSpec::MdNoncritical => Some(0.5),
            RangeSpec::MdCritical => Some(0.25),
            RangeSpec::Generic(_) => None,
        }
    }
}

/// Where to evaluate an empirical tail that is a step function.
#[derive(Debug, Clone, Copy)]
pub enum Alignment<'a> {
    /// Use the uniform grid as is.
    Uniform,
    /// Move every grid point to the midpoint of the two atoms around it
    /// (ascending atom positions).
    Midpoints(&'a [f64]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioCurve {
    pub n: u64,
    pub range: String,
    pub z_max: f64,
    pub z_values: Vec<f64>,
    pub empirical_tail: Vec<f64>,
    pub limit_tail: Vec<f64>,
    pub ratio: Vec<f64>,
    pub abs_err: Vec<f64>,
    /// Points whose empirical tail is zero; they do not enter `max_abs_err`.
    pub excluded: Vec<bool>,
    pub max_abs_err: f64,
}

impl RatioCurve {
    /// `max |ratio - 1| / (1 + z^q)` over the included points.
    pub fn weighted_max_err(&self, q: f64) -> f64 {
        self.z_values
            .iter()
            .zip(&self.abs_err)
            .zip(&self.excluded)
            .filter(|(_, ex)| !**ex)
            .map(|((z, e), _)| e / (1.0 + z.powf(q)))
            .fold(0.0, f64::max)
    }

    /// CSV with columns `z,empirical,limit,ratio,abs_err`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "z,empirical,limit,ratio,abs_err")?;
        for i in 0..self.z_values.len() {
            writeln!(
                out,
                "{:?},{:?},{:?},{:?},{:?}",
                self.z_values[i], self.empirical_tail[i], self.limit_tail[i], self.ratio[i], self.abs_err[i]
            )?;
        }
        Ok(())
    }
}

fn aligned_grid(z_max: f64, grid_size: usize, alignment: Alignment<'_>) -> Vec<f64> {
    let uniform = (0..grid_size).map(|i| z_max * i as f64 / (grid_size - 1) as f64);
    let mut zs: Vec<f64> = match alignment {
        Alignment::Uniform => uniform.collect(),
        Alignment::Midpoints(atoms) => uniform
            .map(|z| {
                let i = atoms.partition_point(|&a| a <= z);
                if i == 0 || i == atoms.len() {
                    return z;
                }
                let mid = 0.5 * (atoms[i - 1] + atoms[i]);
                if mid <= z_max {
                    mid
                } else if i >= 2 && 0.5 * (atoms[i - 2] + atoms[i - 1]) >= 0.0 {
                    0.5 * (atoms[i - 2] + atoms[i - 1])
                } else {
                    z
                }
            })
            .collect(),
    };
    zs.dedup();
    zs
}

/// Relative error of `empirical_tail` against `law` on `[0, z_max(n)]`.
pub fn ratio_curve<F: Fn(f64) -> f64>(
    empirical_tail: F,
    law: &LimitLaw,
    range: &RangeSpec,
    n: u64,
    grid_size: usize,
    alignment: Alignment<'_>,
) -> Result<RatioCurve> {
    if grid_size < 20 {
        return Err(Error::InvalidArgument(format!("grid size {grid_size} is below 20")));
    }
    let z_max = range.z_max(n);
    if !(z_max > 0.0) {
        return Err(Error::InvalidArgument(format!("z_max({n}) = {z_max} is not positive")));
    }
    let z_values = aligned_grid(z_max, grid_size, alignment);
    let empirical: Vec<f64> = z_values.iter().map(|&z| empirical_tail(z)).collect();
    if let Some(w) = empirical.windows(2).find(|w| w[1] > w[0] * (1.0 + 1e-12)) {
        return Err(Error::InvalidArgument(format!(
            "empirical tail increases from {} to {}",
            w[0], w[1]
        )));
    }
    let limit: Vec<f64> = z_values.iter().map(|&z| law.tail(z)).collect();
    let ratio: Vec<f64> = empirical.iter().zip(&limit).map(|(e, l)| e / l).collect();
    let abs_err: Vec<f64> = ratio.iter().map(|r| (r - 1.0).abs()).collect();
    let excluded: Vec<bool> = empirical.iter().map(|&e| e == 0.0).collect();
    let max_abs_err = abs_err
        .iter()
        .zip(&excluded)
        .filter(|(_, ex)| !**ex)
        .map(|(e, _)| *e)
        .fold(0.0, f64::max);
    Ok(RatioCurve {
        n,
        range: range.name().to_string(),
        z_max,
        z_values,
        empirical_tail: empirical,
        limit_tail: limit,
        ratio,
        abs_err,
        excluded,
        max_abs_err,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: Vec<(u64, f64)>,
}

/// OLS on `(log n, log err)`.
pub fn fit_exponent(points: &[(u64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} points; at least 3 are needed",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0 && p.1.is_finite())) {
        return Err(Error::InvalidArgument(format!("error {} at n = {} is not positive", p.1, p.0)));
    }
    let x: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, r_squared) = ols(&x, &y);
    Ok(ScalingFit {
        slope,
        intercept,
        r_squared,
        points: points.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeCheck {
    pub within: bool,
    pub sum: f64,
    pub margin: f64,
}

/// `delta z g(z)^2 + delta1 z g(z)^{tau1 + 1} + delta2 z g(z)^{tau2} <= 1`.
pub fn moderate_range_check(
    drift: &DriftFunction,
    z: f64,
    delta: f64,
    delta1: f64,
    delta2: f64,
    tau1: f64,
    tau2: f64,
) -> Result<RangeCheck> {
    if !(z >= 0.0) {
        return Err(Error::InvalidArgument(format!("z = {z} must be >= 0")));
    }
    let sum = range_sum(drift, z, delta, delta1, delta2, tau1, tau2);
    Ok(RangeCheck {
        within: sum <= 1.0,
        sum,
        margin: 1.0 - sum,
    })
}

fn range_sum(drift: &DriftFunction, z: f64, delta: f64, delta1: f64, delta2: f64, tau1: f64, tau2: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    let g = drift.eval(z).abs();
    delta * z * g * g + delta1 * z * g.powf(tau1 + 1.0) + delta2 * z * g.powf(tau2)
}

/// Largest `z` with range sum `<= 1`, by bracketing and bisection; infinite when
/// every coefficient vanishes.
pub fn moderate_range_boundary(
    drift: &DriftFunction,
    delta: f64,
    delta1: f64,
    delta2: f64,
    tau1: f64,
    tau2: f64,
) -> f64 {
    let sum = |z: f64| range_sum(drift, z, delta, delta1, delta2, tau1, tau2);
    let mut hi = 1.0;
    while sum(hi) <= 1.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sum(mid) <= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Right tail of a lattice law given ascending atoms and their log-probabilities.
#[derive(Debug, Clone)]
pub struct AtomTail {
    atoms: Vec<f64>,
    log_suffix: Vec<f64>,
}

impl AtomTail {
    pub fn new(atoms: Vec<f64>, log_pmf: &[f64]) -> Self {
        let mut log_suffix = vec![f64::NEG_INFINITY; atoms.len() + 1];
        for i in (0..atoms.len()).rev() {
            log_suffix[i] = log_sum_exp(&[log_suffix[i + 1], log_pmf[i]]);
        }
        Self { atoms, log_suffix }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    /// `P(W >= z)`, counting atoms within `1e-12` of `z`.
    pub fn tail(&self, z: f64) -> f64 {
        let i = self.atoms.partition_point(|&a| a < z - 1e-12);
        self.log_suffix[i].exp().min(1.0)
    }
}

/// Curves and fits of one exact pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingReport {
    pub range: String,
    pub curves: Vec<RatioCurve>,
    pub fit: ScalingFit,
    /// Fit of `max |ratio - 1| / (1 + z^q)` with the range's error power `q`.
    pub weighted_fit: Option<ScalingFit>,
    pub target_slope: Option<f64>,
}

fn report(range: &RangeSpec, curves: Vec<RatioCurve>) -> Result<ScalingReport> {
    let pts: Vec<(u64, f64)> = curves.iter().map(|c| (c.n, c.max_abs_err)).collect();
    let fit = fit_exponent(&pts)?;
    let weighted_fit = match range.error_power() {
        Some(q) => {
            let w: Vec<(u64, f64)> = curves.iter().map(|c| (c.n, c.weighted_max_err(q))).collect();
            Some(fit_exponent(&w)?)
        }
        None => None,
    };
    Ok(ScalingReport {
        range: range.name().to_string(),
        curves,
        fit,
        weighted_fit,
        target_slope: range.error_rate().map(|r| -r),
    })
}

/// Ratio curve of the exact Curie-Weiss law at size `n`.
pub fn cw_curve(analysis: &CWAnalysis, law: &LimitLaw, n: u64, grid_size: usize) -> Result<RatioCurve> {
    let dist = cw::exact_magnetization_dist(&analysis.rho, n)?;
    let tail = AtomTail::new(dist.w_values(analysis.k), &dist.log_pmf);
    let range = RangeSpec::CwCritical { k: analysis.k };
    ratio_curve(|z| tail.tail(z), law, &range, n, grid_size, Alignment::Midpoints(tail.atoms()))
}

pub fn cw_scaling(analysis: &CWAnalysis, n_list: &[u64], grid_size: usize) -> Result<ScalingReport> {
    let law = analysis.limit_law()?;
    let curves = n_list
        .iter()
        .map(|&n| cw_curve(analysis, &law, n, grid_size))
        .collect::<Result<Vec<_>>>()?;
    report(&RangeSpec::CwCritical { k: analysis.k }, curves)
}

/// Ratio curve of the exact monomer-dimer law at size `n`.
pub fn md_curve(st: &MDStationary, law: &LimitLaw, n: u64, grid_size: usize) -> Result<RatioCurve> {
    let params = MDParams::new(st.J, st.h, n)?;
    let dist = md::exact_magnetization_dist(&params)?;
    let tail = AtomTail::new(dist.w_values(st), &dist.log_pmf);
    ratio_curve(
        |z| tail.tail(z),
        law,
        &RangeSpec::for_md(st),
        n,
        grid_size,
        Alignment::Midpoints(tail.atoms()),
    )
}

pub fn md_scaling(st: &MDStationary, n_list: &[u64], grid_size: usize) -> Result<ScalingReport> {
    let law = st.limit_law()?;
    let curves = n_list
        .iter()
        .map(|&n| md_curve(st, &law, n, grid_size))
        .collect::<Result<Vec<_>>>()?;
    report(&RangeSpec::for_md(st), curves)
}

/// Whether `values` decrease strictly, allowing `inversions` increases of at
/// most `slack` relative.
pub fn decreasing_with_slack(values: &[f64], inversions: usize, slack: f64) -> bool {
    let mut used = 0;
    for w in values.windows(2) {
        if w[1] >= w[0] {
            if w[1] > w[0] * (1.0 + slack) {
                return false;
            }
            used += 1;
        }
    }
    used <= inversions
}
