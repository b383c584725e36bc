//! Diagnostics for the exchangeable pair `(W, W')` obtained by resampling one
//! uniformly chosen site from its conditional law.
//!
//! Given a configuration with `c_j` sites at support point `x_j`, write
//! `q_j = c_j / n`, `m_j = (S - x_j)/n` and `(psi_j, phi_j) = psi_phi(n, m_j)`. Then
//!
//! * `E(W - W' | x) / lambda = n^{1 - 1/(2k)} sum_j q_j (x_j - psi_j)`,
//! * `E((W - W')^2 | x) / (2 lambda) = sum_j q_j (x_j^2 - 2 x_j psi_j + phi_j) / 2`,
//! * `K_2 = |sum_j q_j (x_j^2 - phi_j)| / 2`.
//!
//! In exact mode `q_j` is replaced by its conditional mean given `S`, which
//! follows from the untilted convolutions of `n - 1` and `n` draws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit_laws::LimitLaw;
use crate::numeric::{ln_factorial, log_sum_exp};
use crate::stein::TiltFunctions;

use super::{log_convolution, psi_phi_raw, CWAnalysis, GlauberChain, RhoMeasure};

/// Largest number of spin-count histograms enumerated for the exact `K_2` moments.
const MAX_HISTOGRAMS: u128 = 5_000_000;

/// Per-state quantities of one retained sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub w: f64,
    /// `E(W - W' | x) / lambda`.
    pub drift: f64,
    /// `E((W - W')^2 | x) / (2 lambda)`.
    pub second_moment: f64,
    pub k2: f64,
}

impl PairSample {
    pub fn from_chain(analysis: &CWAnalysis, chain: &GlauberChain) -> Self {
        let n = chain.n() as u64;
        let q: Vec<f64> = chain.counts().iter().map(|&c| c as f64 / n as f64).collect();
        let s = chain.sum();
        let stats = site_stats(&analysis.rho, analysis.k, n, s, &q);
        PairSample {
            w: s * analysis.w_scale(n),
            drift: stats.0,
            second_moment: stats.1,
            k2: stats.2,
        }
    }
}

/// `(drift, second_moment, K_2)` for site proportions `q`.
fn site_stats(rho: &RhoMeasure, k: usize, n: u64, s: f64, q: &[f64]) -> (f64, f64, f64) {
    let nf = n as f64;
    let (mut drift, mut second, mut k2) = (0.0, 0.0, 0.0);
    for (j, &x) in rho.points().iter().enumerate() {
        if q[j] == 0.0 {
            continue;
        }
        let (psi, phi) = psi_phi_raw(rho.points(), rho.weights(), Some(n), (s - x) / nf);
        drift += q[j] * (x - psi);
        second += q[j] * 0.5 * (x * x - 2.0 * x * psi + phi);
        k2 += q[j] * (x * x - phi);
    }
    (drift * nf.powf(1.0 - 1.0 / (2 * k) as f64), second, 0.5 * k2.abs())
}

#[derive(Debug, Clone, Copy)]
pub enum PairSource<'a> {
    /// Exact conditional expectations from lattice enumeration.
    Exact,
    /// Retained chain states and the largest single-site jump seen by the chain.
    Samples { samples: &'a [PairSample], max_jump: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOptions {
    /// Exact mode: lattice atoms of smaller probability are ignored.
    pub mass_cutoff: f64,
    /// Sample mode: samples per equal-count bin.
    pub bin_size: usize,
    /// Thresholds `s` for the `K_2` ratio `E[K_2 zeta(W, s)] / E[zeta(W, s)]`.
    pub s_values: Vec<f64>,
}

impl Default for PairOptions {
    fn default() -> Self {
        Self {
            mass_cutoff: 1e-8,
            bin_size: 1000,
            s_values: vec![0.0, 0.5, 1.0, 1.5, 2.0],
        }
    }
}

/// Conditional pair moments on one atom (exact mode) or one equal-count bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairBin {
    pub w: f64,
    pub mass: f64,
    pub drift: f64,
    pub g: f64,
    /// `|E(W - W' | W)/lambda - g(W)|`.
    pub residual: f64,
    /// `n^{-1/k} (|W|^{2k+1} + 1)`.
    pub residual_envelope: f64,
    /// `|E((W - W')^2 | W)/(2 lambda) - 1|`.
    pub k1_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaRatio {
    pub s: f64,
    pub ratio: f64,
    /// `delta_1 (1 + g(s)^{tau_1})`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDiagnostics {
    pub n: u64,
    pub k: usize,
    pub lambda: f64,
    /// `2 L n^{-1 + 1/(2k)}`.
    pub delta: f64,
    pub max_step: f64,
    pub tau1: f64,
    pub tau2: f64,
    /// `max k1_dev / (1 + |g|^{tau_1})`.
    pub delta1: f64,
    /// `max residual / (1 + |g|^{tau_2})`.
    pub delta2: f64,
    /// `max residual / residual_envelope`.
    pub residual_envelope_ratio: f64,
    pub bins: Vec<PairBin>,
    pub dropped_bins: usize,
    /// Absent in exact mode when the histogram count exceeds the enumeration cap.
    pub zeta_ratios: Option<Vec<ZetaRatio>>,
}

pub fn pair_diagnostics(
    analysis: &CWAnalysis,
    n: u64,
    source: PairSource<'_>,
    opts: &PairOptions,
) -> Result<PairDiagnostics> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("pair diagnostics need n >= 2, got {n}")));
    }
    let law = analysis.limit_law()?;
    let scale = analysis.w_scale(n);
    let delta = 2.0 * analysis.rho.radius() * scale;
    let (raw, dropped, max_step, k2_points) = match source {
        PairSource::Exact => exact_bins(analysis, n, opts)?,
        PairSource::Samples { samples, max_jump } => {
            let (bins, dropped) = sample_bins(samples, opts)?;
            let pts = samples.iter().map(|s| (0.0, s.w, s.k2)).collect();
            (bins, dropped, max_jump * scale, Some(pts))
        }
    };
    let drift = analysis.drift();
    let (tau1, tau2) = (analysis.tau1(), analysis.tau2());
    let k = analysis.k;
    let nk = (n as f64).powf(-1.0 / k as f64);
    let mut bins = Vec::with_capacity(raw.len());
    let (mut delta1, mut delta2, mut env_ratio) = (0.0_f64, 0.0_f64, 0.0_f64);
    for (w, mass, d, v) in raw {
        let g = drift.eval(w);
        let residual = (d - g).abs();
        let residual_envelope = nk * (w.abs().powi(2 * k as i32 + 1) + 1.0);
        let k1_dev = (v - 1.0).abs();
        delta1 = delta1.max(k1_dev / (1.0 + g.abs().powf(tau1)));
        delta2 = delta2.max(residual / (1.0 + g.abs().powf(tau2)));
        env_ratio = env_ratio.max(residual / residual_envelope);
        bins.push(PairBin {
            w,
            mass,
            drift: d,
            g,
            residual,
            residual_envelope,
            k1_dev,
        });
    }
    let zeta_ratios = k2_points.map(|pts| zeta_ratios(&law, &pts, &opts.s_values, delta1, tau1));
    Ok(PairDiagnostics {
        n,
        k,
        lambda: analysis.lambda(n),
        delta,
        max_step,
        tau1,
        tau2,
        delta1,
        delta2,
        residual_envelope_ratio: env_ratio,
        bins,
        dropped_bins: dropped,
        zeta_ratios,
    })
}

type RawBins = Vec<(f64, f64, f64, f64)>;
/// `(log weight, W, K_2)` triples; samples carry equal weight `0`.
type K2Points = Option<Vec<(f64, f64, f64)>>;

fn exact_bins(analysis: &CWAnalysis, n: u64, opts: &PairOptions) -> Result<(RawBins, usize, f64, K2Points)> {
    let rho = &analysis.rho;
    let step = rho.lattice_step().ok_or(Error::NotLattice)?;
    let units = rho.lattice_units()?;
    let conv = log_convolution(rho, n)?;
    let scale = analysis.w_scale(n);
    let nf = n as f64;
    let offset = n as i64 * conv.max_unit;
    let mut tilted: Vec<(i64, f64)> = conv
        .log_n
        .iter()
        .enumerate()
        .filter(|(_, lp)| **lp > f64::NEG_INFINITY)
        .map(|(i, lp)| {
            let t = i as i64 - offset;
            let s = t as f64 * step;
            (t, lp + s * s / (2.0 * nf))
        })
        .collect();
    let z = log_sum_exp(&tilted.iter().map(|p| p.1).collect::<Vec<_>>());
    for p in &mut tilted {
        p.1 -= z;
    }
    let log_w: Vec<f64> = rho.weights().iter().map(|w| w.ln()).collect();
    let mut bins = Vec::new();
    let mut dropped = 0;
    for (t, lp) in tilted {
        if lp < opts.mass_cutoff.ln() {
            dropped += 1;
            continue;
        }
        let q: Vec<f64> = units
            .iter()
            .zip(&log_w)
            .map(|(u, lw)| (lw + conv.at_prev(t - u) - conv.at(t)).exp())
            .collect();
        let s = t as f64 * step;
        let (d, v, _) = site_stats(rho, analysis.k, n, s, &q);
        bins.push((s * scale, lp.exp(), d, v));
    }
    let lo = rho.points()[0];
    let hi = rho.points()[rho.points().len() - 1];
    let k2 = histogram_k2(analysis, n)?;
    Ok((bins, dropped, (hi - lo) * scale, k2))
}

/// `(log P, W, K_2)` for every spin-count histogram, or `None` past the cap.
fn histogram_k2(analysis: &CWAnalysis, n: u64) -> Result<Option<Vec<(f64, f64, f64)>>> {
    let rho = &analysis.rho;
    let d = rho.points().len();
    let count = (1..d as u128).fold(1u128, |acc, i| acc * (n as u128 + i) / i);
    if count > MAX_HISTOGRAMS {
        return Ok(None);
    }
    let scale = analysis.w_scale(n);
    let nf = n as f64;
    let log_w: Vec<f64> = rho.weights().iter().map(|w| w.ln()).collect();
    let mut out = Vec::with_capacity(count as usize);
    let mut c = vec![0u64; d];
    let mut q = vec![0.0; d];
    let mut visit = |c: &[u64]| {
        let s: f64 = c.iter().zip(rho.points()).map(|(&ci, x)| ci as f64 * x).sum();
        let mut lp = ln_factorial(n) + s * s / (2.0 * nf);
        for j in 0..d {
            lp += c[j] as f64 * log_w[j] - ln_factorial(c[j]);
            q[j] = c[j] as f64 / nf;
        }
        let (_, _, k2) = site_stats(rho, analysis.k, n, s, &q);
        out.push((lp, s * scale, k2));
    };
    compositions(n, 0, &mut c, &mut visit);
    let z = log_sum_exp(&out.iter().map(|p| p.0).collect::<Vec<_>>());
    for p in &mut out {
        p.0 -= z;
    }
    Ok(Some(out))
}

fn compositions<F: FnMut(&[u64])>(left: u64, j: usize, c: &mut Vec<u64>, visit: &mut F) {
    if j == c.len() - 1 {
        c[j] = left;
        visit(c);
        return;
    }
    for v in 0..=left {
        c[j] = v;
        compositions(left - v, j + 1, c, visit);
    }
}

fn sample_bins(samples: &[PairSample], opts: &PairOptions) -> Result<(RawBins, usize)> {
    if opts.bin_size < 100 {
        return Err(Error::InvalidArgument(format!(
            "bin size {} is below the minimum of 100 samples",
            opts.bin_size
        )));
    }
    if samples.len() < 100 {
        return Err(Error::InsufficientData(format!(
            "{} samples cannot fill one bin of 100",
            samples.len()
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.w.total_cmp(&b.w));
    let total = sorted.len() as f64;
    let mut bins = Vec::new();
    let mut dropped = 0;
    for chunk in sorted.chunks(opts.bin_size) {
        if chunk.len() < 100 {
            log::warn!("dropping a bin with {} samples (< 100)", chunk.len());
            dropped += 1;
            continue;
        }
        let m = chunk.len() as f64;
        let mean = |f: fn(&PairSample) -> f64| chunk.iter().map(f).sum::<f64>() / m;
        bins.push((mean(|s| s.w), m / total, mean(|s| s.drift), mean(|s| s.second_moment)));
    }
    Ok((bins, dropped))
}

fn zeta_ratios(
    law: &LimitLaw,
    pts: &[(f64, f64, f64)],
    s_values: &[f64],
    delta1: f64,
    tau1: f64,
) -> Vec<ZetaRatio> {
    let tilt = TiltFunctions::new(law);
    s_values
        .iter()
        .map(|&s| {
            let logs: Vec<f64> = pts.iter().map(|(lp, w, _)| lp + tilt.log_zeta(*w, s)).collect();
            let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (mut num, mut den) = (0.0, 0.0);
            for (l, (_, _, k2)) in logs.iter().zip(pts) {
                let e = (l - top).exp();
                num += e * k2;
                den += e;
            }
            let gs = law.g(s).max(0.0);
            ZetaRatio {
                s,
                ratio: num / den,
                bound: delta1 * (1.0 + gs.powf(tau1)),
            }
        })
        .collect()
}
