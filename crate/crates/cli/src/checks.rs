use serde::Serialize;
use steinmd_core::limit_laws::{check_conditions, ConditionReport, GridSpec};
use steinmd_core::stein::{solution_bounds_check, stein_residual, BoundsReport};
use steinmd_core::{DriftFunction, Error, LimitLaw};

use crate::error::Result;

#[derive(Debug, Clone, Serialize)]
pub struct SteinRow {
    pub z: f64,
    pub max_residual: f64,
    pub worst_w: f64,
    pub residual_ok: bool,
    /// Absent for `z < 0`, where the sup-norm bounds are not stated.
    pub bounds: Option<BoundsReport>,
    pub bounds_violation: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SteinCheck {
    pub law: String,
    pub c1: f64,
    pub step: f64,
    pub tolerance: f64,
    pub rows: Vec<SteinRow>,
    pub pass: bool,
}

/// `[-5, 5]` in steps of `0.01`, without the points closer than `2 h` to `z`.
fn residual_grid(z: f64, h: f64) -> Vec<f64> {
    (-500..=500)
        .map(|i| i as f64 / 100.0)
        .filter(|&w| !(w > z - 2.0 * h && w < z + 2.0 * h))
        .collect()
}

fn bounds_grid() -> Vec<f64> {
    (0..=1000).map(|i| -8.0 + 16.0 * i as f64 / 1000.0).collect()
}

/// Stein equation residual on `[-5, 5]` and the solution bounds on `[-8, 8]` for every `z`.
pub fn stein_check(drift: DriftFunction, z_values: &[f64], h: f64, tolerance: f64) -> Result<SteinCheck> {
    let law = LimitLaw::new(drift)?;
    let mut rows = Vec::with_capacity(z_values.len());
    for &z in z_values {
        let r = stein_residual(&law, z, &residual_grid(z, h), h)?;
        let (bounds, bounds_violation) = if z >= 0.0 {
            match solution_bounds_check(&law, z, &bounds_grid()) {
                Ok(b) => (Some(b), None),
                Err(e @ Error::BoundViolation { .. }) => (None, Some(e.to_string())),
                Err(e) => return Err(e.into()),
            }
        } else {
            (None, None)
        };
        rows.push(SteinRow {
            z,
            max_residual: r.max_residual,
            worst_w: r.worst_w,
            residual_ok: r.max_residual <= tolerance,
            bounds,
            bounds_violation,
        });
    }
    let pass = rows.iter().all(|r| r.residual_ok && r.bounds_violation.is_none());
    Ok(SteinCheck {
        law: law.label().to_string(),
        c1: law.c1(),
        step: h,
        tolerance,
        rows,
        pass,
    })
}

pub fn conditions(drift: &DriftFunction, grid: &GridSpec) -> Result<ConditionReport> {
    Ok(check_conditions(drift, grid)?)
}
