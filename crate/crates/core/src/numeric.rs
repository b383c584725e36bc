//! Log-space helpers shared by the exact enumerations.

/// `log(sum(exp(x)))` over a slice; `-inf` for an empty slice or all `-inf` entries.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    log_sum_exp_iter(xs.iter().copied())
}

pub fn log_sum_exp_iter<I: IntoIterator<Item = f64> + Clone>(xs: I) -> f64 {
    let m = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || !m.is_finite() {
        return m;
    }
    let s: f64 = xs.into_iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

/// `ln C(n, j)` via log-gamma.
pub fn ln_binomial(n: u64, j: u64) -> f64 {
    if j > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(j) - ln_factorial(n - j)
}

pub fn ln_factorial(n: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

/// Ordinary least squares of `y` on `x`: `(slope, intercept, r_squared)`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

/// Central-difference stencil for the `order`-th derivative with step `h`.
fn stencil<F: Fn(f64) -> f64>(f: &F, x: f64, order: usize, h: f64) -> f64 {
    match order {
        0 => f(x),
        1 => (f(x + h) - f(x - h)) / (2.0 * h),
        2 => (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
        3 => (f(x + 2.0 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2.0 * h)) / (2.0 * h.powi(3)),
        4 => {
            (f(x + 2.0 * h) - 4.0 * f(x + h) + 6.0 * f(x) - 4.0 * f(x - h) + f(x - 2.0 * h)) / h.powi(4)
        }
        _ => unreachable!("orders above 4 are rejected by the caller"),
    }
}

/// Derivative of order `0..=4` by Richardson extrapolation of central differences
/// (Ridders' tableau), starting from step `h0` and shrinking by 1.4 per level.
/// Returns the estimate with the smallest internal error estimate and that error.
pub fn richardson<F: Fn(f64) -> f64>(f: F, x: f64, order: usize, h0: f64) -> (f64, f64) {
    assert!(order <= 4, "derivative order {order} not supported");
    if order == 0 {
        return (f(x), 0.0);
    }
    const CON: f64 = 1.4;
    const CON2: f64 = CON * CON;
    const LEVELS: usize = 12;
    let mut table = [[0.0f64; LEVELS]; LEVELS];
    let mut h = h0;
    table[0][0] = stencil(&f, x, order, h);
    let mut best = (table[0][0], f64::INFINITY);
    for i in 1..LEVELS {
        h /= CON;
        table[0][i] = stencil(&f, x, order, h);
        let mut fac = CON2;
        for j in 1..=i {
            table[j][i] = (table[j - 1][i] * fac - table[j - 1][i - 1]) / (fac - 1.0);
            fac *= CON2;
            let err = (table[j][i] - table[j - 1][i])
                .abs()
                .max((table[j][i] - table[j - 1][i - 1]).abs());
            if err <= best.1 {
                best = (table[j][i], err);
            }
        }
        if (table[i][i] - table[i - 1][i - 1]).abs() >= 2.0 * best.1 {
            break;
        }
    }
    best
}

/// [`richardson`] over a few starting steps, keeping the smallest error estimate.
pub fn derivative<F: Fn(f64) -> f64>(f: F, x: f64, order: usize, steps: &[f64]) -> (f64, f64) {
    steps
        .iter()
        .map(|&h| richardson(&f, x, order, h))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one step")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_handles_infinities() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[-1000.0, -1000.0]);
        assert!((v - (-1000.0 + std::f64::consts::LN_2)).abs() < 1e-12);
    }

    #[test]
    fn small_binomials() {
        assert!((ln_binomial(10, 3).exp() - 120.0).abs() < 1e-9);
        assert_eq!(ln_binomial(3, 4), f64::NEG_INFINITY);
    }

    #[test]
    fn richardson_recovers_exp_derivatives() {
        for order in 1..=4 {
            let (d, err) = derivative(f64::exp, 0.3, order, &[0.05, 0.1, 0.2]);
            assert!((d - 0.3f64.exp()).abs() < 1e-9, "order {order}: {d} (err {err})");
        }
    }
}
