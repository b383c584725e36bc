use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;

use super::{w_scale, RhoMeasure};

/// Largest sum lattice the exact enumeration will allocate.
pub const MAX_STATES: u128 = 10_000_000;

/// Log-probabilities of `T = sum u_i` for i.i.d. draws from `rho`, in lattice units,
/// for `n - 1` and `n` draws. Index `t` of `log_n` holds `T = t - n U`.
#[derive(Debug, Clone)]
pub struct LatticeConvolution {
    pub n: u64,
    pub max_unit: i64,
    pub log_prev: Vec<f64>,
    pub log_n: Vec<f64>,
}

impl LatticeConvolution {
    /// `log P(T_n = t)`, `-inf` outside the lattice.
    pub fn at(&self, t: i64) -> f64 {
        lookup(&self.log_n, t + self.n as i64 * self.max_unit)
    }

    /// `log P(T_{n-1} = t)`.
    pub fn at_prev(&self, t: i64) -> f64 {
        lookup(&self.log_prev, t + (self.n as i64 - 1) * self.max_unit)
    }
}

fn lookup(v: &[f64], idx: i64) -> f64 {
    if idx < 0 || idx as usize >= v.len() {
        f64::NEG_INFINITY
    } else {
        v[idx as usize]
    }
}

fn state_count(rho: &RhoMeasure, n: u64) -> Result<(Vec<i64>, i64)> {
    let units = rho.lattice_units()?;
    let max_unit = units.iter().map(|u| u.abs()).max().unwrap_or(0);
    let states = n as u128 * 2 * max_unit as u128 + 1;
    if states > MAX_STATES {
        return Err(Error::StateSpaceOverflow {
            n,
            states,
            limit: MAX_STATES,
        });
    }
    Ok((units, max_unit))
}

pub fn log_convolution(rho: &RhoMeasure, n: u64) -> Result<LatticeConvolution> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let (units, max_unit) = state_count(rho, n)?;
    let log_w: Vec<f64> = rho.weights().iter().map(|w| w.ln()).collect();
    let mut cur = vec![0.0];
    let mut prev = Vec::new();
    let mut terms = Vec::with_capacity(units.len());
    for step in 1..=n as i64 {
        let width = (2 * step * max_unit + 1) as usize;
        let mut next = vec![f64::NEG_INFINITY; width];
        // Old index i holds T = i - (step - 1) U; new index holds T = j - step U.
        for (j, slot) in next.iter_mut().enumerate() {
            terms.clear();
            for (u, lw) in units.iter().zip(&log_w) {
                let i = j as i64 - u - max_unit;
                if i >= 0 && (i as usize) < cur.len() && cur[i as usize] > f64::NEG_INFINITY {
                    terms.push(cur[i as usize] + lw);
                }
            }
            if !terms.is_empty() {
                *slot = log_sum_exp(&terms);
            }
        }
        prev = std::mem::replace(&mut cur, next);
    }
    Ok(LatticeConvolution {
        n,
        max_unit,
        log_prev: prev,
        log_n: cur,
    })
}

/// Exact law of `S_n` under the Curie-Weiss measure, on reachable lattice points.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnetizationDist {
    pub n: u64,
    pub step: f64,
    /// Reachable values of `S_n / step`, ascending.
    pub units: Vec<i64>,
    pub log_pmf: Vec<f64>,
}

impl MagnetizationDist {
    pub fn s_values(&self) -> Vec<f64> {
        self.units.iter().map(|&t| t as f64 * self.step).collect()
    }

    /// `W = n^{-1 + 1/(2k)} S_n` for every atom.
    pub fn w_values(&self, k: usize) -> Vec<f64> {
        let scale = w_scale(k, self.n);
        self.units.iter().map(|&t| t as f64 * self.step * scale).collect()
    }

    pub fn pmf(&self) -> Vec<f64> {
        self.log_pmf.iter().map(|l| l.exp()).collect()
    }

    /// Log-probability of `S_n = t * step`.
    pub fn log_prob_units(&self, t: i64) -> f64 {
        match self.units.binary_search(&t) {
            Ok(i) => self.log_pmf[i],
            Err(_) => f64::NEG_INFINITY,
        }
    }

    /// CSV with columns `s_value,w_value,log_prob`.
    pub fn write_csv<W: Write>(&self, mut out: W, k: usize) -> Result<()> {
        writeln!(out, "s_value,w_value,log_prob")?;
        for ((s, w), lp) in self.s_values().iter().zip(self.w_values(k)).zip(&self.log_pmf) {
            writeln!(out, "{s:?},{w:?},{lp:?}")?;
        }
        Ok(())
    }

    /// Reads a CSV written by [`MagnetizationDist::write_csv`].
    pub fn read_csv<R: BufRead>(input: R, n: u64, step: f64) -> Result<Self> {
        let mut units = Vec::new();
        let mut log_pmf = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let bad = || Error::InvalidArgument(format!("malformed CSV line {}: {line}", lineno + 1));
            let mut cols = line.split(',');
            let s: f64 = cols.next().and_then(|c| c.parse().ok()).ok_or_else(bad)?;
            let lp: f64 = cols.nth(1).and_then(|c| c.parse().ok()).ok_or_else(bad)?;
            units.push((s / step).round() as i64);
            log_pmf.push(lp);
        }
        Ok(Self {
            n,
            step,
            units,
            log_pmf,
        })
    }
}

/// Convolves `n` draws of `rho` in log space, tilts by `exp(S^2/(2n))` and normalizes.
pub fn exact_magnetization_dist(rho: &RhoMeasure, n: u64) -> Result<MagnetizationDist> {
    let step = rho.lattice_step().ok_or(Error::NotLattice)?;
    let conv = log_convolution(rho, n)?;
    let offset = n as i64 * conv.max_unit;
    let mut units = Vec::new();
    let mut log_pmf = Vec::new();
    for (i, &lp) in conv.log_n.iter().enumerate() {
        if lp > f64::NEG_INFINITY {
            let t = i as i64 - offset;
            let s = t as f64 * step;
            units.push(t);
            log_pmf.push(lp + s * s / (2.0 * n as f64));
        }
    }
    let z = log_sum_exp(&log_pmf);
    for lp in &mut log_pmf {
        *lp -= z;
    }
    Ok(MagnetizationDist {
        n,
        step,
        units,
        log_pmf,
    })
}

/// `P(W >= z)` with `W = n^{-1 + 1/(2k)} S_n`; atoms within `1e-12` of `z` count.
pub fn tail_prob(dist: &MagnetizationDist, k: usize, z: f64) -> f64 {
    let terms: Vec<f64> = dist
        .w_values(k)
        .iter()
        .zip(&dist.log_pmf)
        .filter(|(w, _)| **w >= z - 1e-12)
        .map(|(_, lp)| *lp)
        .collect();
    log_sum_exp(&terms).exp().clamp(0.0, 1.0)
}
