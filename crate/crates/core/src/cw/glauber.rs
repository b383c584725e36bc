use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::RhoMeasure;

/// Configuration-space size accepted by [`apply_sweep_exact`].
const MAX_CONFIGS: usize = 2_000_000;

/// Generator for chain `stream` of an experiment with root seed `seed`.
///
/// Every chain gets its own ChaCha stream under the same key, so chains never
/// share output and adding chains does not perturb existing ones.
pub fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Random-scan heat-bath dynamics for `CW(rho)` on `n` sites.
#[derive(Debug, Clone)]
pub struct GlauberChain {
    points: Vec<f64>,
    log_w: Vec<f64>,
    n: usize,
    spins: Vec<usize>,
    counts: Vec<u64>,
    rng: ChaCha8Rng,
    max_jump: f64,
    logits: Vec<f64>,
}

impl GlauberChain {
    /// Starts from i.i.d. draws of `rho`.
    pub fn new(rho: &RhoMeasure, n: usize, seed: u64, stream: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("chain needs n >= 2, got {n}")));
        }
        let mut rng = chain_rng(seed, stream);
        let points = rho.points().to_vec();
        let log_w: Vec<f64> = rho.weights().iter().map(|w| w.ln()).collect();
        let mut counts = vec![0u64; points.len()];
        let spins: Vec<usize> = (0..n)
            .map(|_| {
                let j = draw(&mut rng, rho.weights());
                counts[j] += 1;
                j
            })
            .collect();
        Ok(Self {
            logits: vec![0.0; points.len()],
            points,
            log_w,
            n,
            spins,
            counts,
            rng,
            max_jump: 0.0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `S_n`, recomputed from the spin counts so no rounding accumulates.
    pub fn sum(&self) -> f64 {
        self.counts.iter().zip(&self.points).map(|(&c, x)| c as f64 * x).sum()
    }

    /// Number of sites holding each support point.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn spins(&self) -> impl Iterator<Item = f64> + '_ {
        self.spins.iter().map(|&j| self.points[j])
    }

    /// Largest `|X_I - X_I'|` produced by any update so far.
    pub fn max_jump(&self) -> f64 {
        self.max_jump
    }

    /// Resamples one uniformly chosen site from its conditional law
    /// `rho(x) exp(x^2/(2n) + x m_i)` with `m_i = (S - x_i)/n`.
    pub fn step(&mut self) {
        let i = self.rng.random_range(0..self.n);
        let old = self.spins[i];
        let nf = self.n as f64;
        let mi = (self.sum() - self.points[old]) / nf;
        let mut top = f64::NEG_INFINITY;
        for (j, l) in self.logits.iter_mut().enumerate() {
            let x = self.points[j];
            *l = self.log_w[j] + x * x / (2.0 * nf) + x * mi;
            top = top.max(*l);
        }
        let mut total = 0.0;
        for l in self.logits.iter_mut() {
            *l = (*l - top).exp();
            total += *l;
        }
        let u = self.rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut new = self.logits.len() - 1;
        for (j, p) in self.logits.iter().enumerate() {
            acc += p;
            if u < acc {
                new = j;
                break;
            }
        }
        self.max_jump = self.max_jump.max((self.points[new] - self.points[old]).abs());
        self.counts[old] -= 1;
        self.counts[new] += 1;
        self.spins[i] = new;
    }

    /// `n` single-site updates.
    pub fn sweep(&mut self) {
        for _ in 0..self.n {
            self.step();
        }
    }
}

/// Heat-bath law of one site given `m_i = (S - x_i)/n`, over the support points.
pub fn conditional_law(rho: &RhoMeasure, n: usize, mi: f64) -> Vec<f64> {
    let nf = n as f64;
    let logits: Vec<f64> = rho
        .points()
        .iter()
        .zip(rho.weights())
        .map(|(x, w)| w.ln() + x * x / (2.0 * nf) + x * mi)
        .collect();
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = e.iter().sum();
    e.iter().map(|v| v / total).collect()
}

fn draw<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return j;
        }
    }
    weights.len() - 1
}

/// Stream of `S_n` values: burn-in first, then one value every `thin` sweeps.
#[derive(Debug, Clone)]
pub struct GlauberSamples {
    chain: GlauberChain,
    remaining: usize,
    thin: usize,
}

impl GlauberSamples {
    pub fn chain(&self) -> &GlauberChain {
        &self.chain
    }

    /// Advances to the next retained state and exposes the whole chain.
    pub fn advance(&mut self) -> Option<&GlauberChain> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        for _ in 0..self.thin {
            self.chain.sweep();
        }
        Some(&self.chain)
    }
}

impl Iterator for GlauberSamples {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        self.advance().map(|c| c.sum())
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

pub fn glauber_sampler(
    rho: &RhoMeasure,
    n: usize,
    seed: u64,
    burn_in_sweeps: usize,
    n_samples: usize,
    thin: usize,
) -> Result<GlauberSamples> {
    if thin == 0 {
        return Err(Error::InvalidArgument("thin must be at least 1".into()));
    }
    let mut chain = GlauberChain::new(rho, n, seed, 0)?;
    for _ in 0..burn_in_sweeps {
        chain.sweep();
    }
    Ok(GlauberSamples {
        chain,
        remaining: n_samples,
        thin,
    })
}

/// Applies one sweep (`n` random-scan updates) of the chain's transition kernel to a
/// distribution over configurations. Configuration `c` has site `i` at support
/// point `(c / d^i) % d`.
pub fn apply_sweep_exact(rho: &RhoMeasure, n: usize, probs: &[f64]) -> Result<Vec<f64>> {
    let d = rho.points().len();
    let size = d
        .checked_pow(n as u32)
        .filter(|&s| s <= MAX_CONFIGS)
        .ok_or_else(|| Error::StateSpaceOverflow {
            n: n as u64,
            states: (d as u128).saturating_pow(n as u32),
            limit: MAX_CONFIGS as u128,
        })?;
    if probs.len() != size {
        return Err(Error::InvalidArgument(format!(
            "expected {size} configuration probabilities, got {}",
            probs.len()
        )));
    }
    let points = rho.points();
    let nf = n as f64;
    let mut cur = probs.to_vec();
    for _ in 0..n {
        let mut next = vec![0.0; size];
        for (c, &p) in cur.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let s: f64 = (0..n).map(|i| points[digit(c, i, d)]).sum();
            let mut stride = 1;
            for i in 0..n {
                let old = digit(c, i, d);
                let mi = (s - points[old]) / nf;
                let cond = conditional_law(rho, n, mi);
                let base = c - old * stride;
                for (j, q) in cond.iter().enumerate() {
                    next[base + j * stride] += p * q / nf;
                }
                stride *= d;
            }
        }
        cur = next;
    }
    Ok(cur)
}

fn digit(c: usize, i: usize, d: usize) -> usize {
    (c / d.pow(i as u32)) % d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let rho = RhoMeasure::three_point();
        let a: Vec<f64> = glauber_sampler(&rho, 16, 7, 5, 50, 1).unwrap().collect();
        let b: Vec<f64> = glauber_sampler(&rho, 16, 7, 5, 50, 1).unwrap().collect();
        assert_eq!(a, b);
    }

    #[test]
    fn streams_differ() {
        let rho = RhoMeasure::rademacher();
        let mut a = GlauberChain::new(&rho, 32, 1, 0).unwrap();
        let mut b = GlauberChain::new(&rho, 32, 1, 1).unwrap();
        let (mut sa, mut sb) = (Vec::new(), Vec::new());
        for _ in 0..20 {
            a.sweep();
            b.sweep();
            sa.push(a.sum());
            sb.push(b.sum());
        }
        assert_ne!(sa, sb);
    }

    #[test]
    fn rademacher_conditional_is_logistic() {
        let rho = RhoMeasure::rademacher();
        let logistic = |x: f64| 1.0 / (1.0 + (-x).exp());
        for mi in [-0.7, 0.0, 0.25, 1.0] {
            let p = conditional_law(&rho, 10, mi);
            assert!((p[1] - logistic(2.0 * mi)).abs() < 1e-15);
        }
    }

    #[test]
    fn sweep_preserves_total_mass() {
        let rho = RhoMeasure::three_point();
        let mut probs = vec![0.0; 27];
        probs[5] = 1.0;
        let after = apply_sweep_exact(&rho, 3, &probs).unwrap();
        assert!((after.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn thin_zero_rejected() {
        assert!(glauber_sampler(&RhoMeasure::rademacher(), 8, 0, 0, 1, 0).is_err());
    }
}
