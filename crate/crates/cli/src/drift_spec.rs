use steinmd_core::DriftFunction;

use crate::error::{CliError, Result};

/// Parses a drift description:
///
/// - `gaussian`: `g(y) = y`
/// - `quartic`: `g(y) = y^3/3`, density proportional to `exp(-y^4/12)`
/// - `normal:VAR`: `g(y) = y / VAR`
/// - `monomial:A:P`: `g(y) = A sign(y) |y|^P`
/// - `poly:C1,C3,...`: `g(y) = C1 y + C3 y^3 + ...`
pub fn parse_drift(spec: &str) -> Result<DriftFunction> {
    let bad = |why: &str| CliError::Config(format!("drift spec {spec:?}: {why}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("{s:?} is not a number")));
    let mut parts = spec.splitn(2, ':');
    let head = parts.next().unwrap_or_default().trim().to_ascii_lowercase();
    let rest = parts.next();
    let drift = match (head.as_str(), rest) {
        ("gaussian", None) => DriftFunction::gaussian(),
        ("quartic", None) => DriftFunction::quartic_12(),
        ("normal", Some(v)) => DriftFunction::normal(num(v)?)?,
        ("monomial", Some(r)) => {
            let (a, p) = r.split_once(':').ok_or_else(|| bad("expected monomial:A:P"))?;
            DriftFunction::monomial(num(a)?, num(p)?)?
        }
        ("poly", Some(r)) => {
            let coeffs = r.split(',').map(num).collect::<Result<Vec<f64>>>()?;
            if coeffs.iter().any(|c| !c.is_finite()) {
                return Err(bad("coefficients must be finite"));
            }
            DriftFunction::odd_polynomial(&coeffs)
        }
        _ => return Err(bad("expected gaussian, quartic, normal:VAR, monomial:A:P or poly:C1,C3,...")),
    };
    Ok(drift)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_forms() {
        assert_eq!(parse_drift("quartic").unwrap().eval(2.0), 8.0 / 3.0);
        assert_eq!(parse_drift("gaussian").unwrap().eval(-1.5), -1.5);
        assert_eq!(parse_drift("normal:4").unwrap().eval(2.0), 0.5);
        assert_eq!(parse_drift("monomial:0.5:3").unwrap().eval(-2.0), -4.0);
        let p = parse_drift("poly:1,0.5").unwrap();
        assert_eq!(p.eval(2.0), 2.0 + 4.0);
        assert_eq!(parse_drift("poly:-1").unwrap().eval(3.0), -3.0);
    }

    #[test]
    fn malformed_specs() {
        for s in ["", "cubic", "monomial:1", "monomial:-1:3", "normal:x", "poly:", "poly:1,inf", "gaussian:2"] {
            assert!(parse_drift(s).is_err(), "{s}");
        }
    }
}
