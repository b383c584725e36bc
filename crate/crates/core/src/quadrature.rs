//! Adaptive Gauss-Kronrod (7/15) integration on finite intervals.
//!
//! Intervals are bisected greedily, always splitting the subinterval with the
//! largest error estimate, until the summed estimate meets the tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Stopping rule for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 0.0,
            rel: 1e-13,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub abs_err: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Piece {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(centre - dx) + f(centre + dx);
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kron * half;
    let diff = ((kron - gauss) * half).abs();
    // QUADPACK-style error scaling; a floor keeps the heap ordering meaningful.
    let err = if diff == 0.0 {
        0.0
    } else {
        let scale = (200.0 * diff / value.abs().max(f64::MIN_POSITIVE)).powf(1.5);
        (value.abs() * scale.min(1.0)).max(diff * 1e-3).max(f64::EPSILON * 50.0 * value.abs())
    };
    Piece { a, b, value, err }
}

/// Integrates `f` over `[a, b]` (with `a <= b` or `a > b`).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            abs_err: 0.0,
            intervals: 0,
        });
    }
    if b < a {
        let est = integrate(f, b, a, tol)?;
        return Ok(Estimate {
            value: -est.value,
            ..est
        });
    }
    let first = kronrod(&f, a, b);
    if !first.value.is_finite() {
        return Err(Error::Quadrature {
            a,
            b,
            value: first.value,
            abs_err: f64::INFINITY,
        });
    }
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut value = first.value;
    let mut err = first.err;
    while err > tol.abs.max(tol.rel * value.abs()) {
        if heap.len() >= tol.max_intervals {
            return Err(Error::Quadrature {
                a,
                b,
                value,
                abs_err: err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            return Err(Error::Quadrature {
                a,
                b,
                value,
                abs_err: err,
            });
        }
        let left = kronrod(&f, worst.a, mid);
        let right = kronrod(&f, mid, worst.b);
        value += left.value + right.value - worst.value;
        err += left.err + right.err - worst.err;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to shed the drift of the incremental updates.
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let abs_err: f64 = heap.iter().map(|p| p.err).sum();
    if !value.is_finite() {
        return Err(Error::Quadrature {
            a,
            b,
            value,
            abs_err,
        });
    }
    Ok(Estimate {
        value,
        abs_err,
        intervals: heap.len(),
    })
}

/// Single 15-point Kronrod panel; for smooth integrands on short intervals.
pub(crate) fn panel<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    kronrod(&f, a, b).value
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let est = integrate(|x| x.powi(6) - 2.0 * x, 0.0, 2.0, Tolerance::default()).unwrap();
        assert!((est.value - (128.0 / 7.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn gaussian_mass() {
        let est = integrate(|x: f64| (-x * x / 2.0).exp(), -12.0, 12.0, Tolerance::default()).unwrap();
        let want = (2.0 * std::f64::consts::PI).sqrt();
        assert!((est.value - want).abs() / want < 1e-14);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let fwd = integrate(f64::cos, 0.0, 1.0, Tolerance::default()).unwrap();
        let back = integrate(f64::cos, 1.0, 0.0, Tolerance::default()).unwrap();
        assert_eq!(fwd.value, -back.value);
    }

    #[test]
    fn kink_needs_subdivision() {
        let est = integrate(|x: f64| x.abs().sqrt(), -1.0, 1.0, Tolerance::default()).unwrap();
        assert!((est.value - 4.0 / 3.0).abs() < 1e-11);
        assert!(est.intervals > 1);
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        assert!(integrate(|x: f64| 1.0 / x, 0.0, 1.0, Tolerance::default()).is_err());
    }
}
