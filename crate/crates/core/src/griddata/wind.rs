use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Piecewise turbine power curve with a quadratic ramp between cut-in and
/// nominal speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveParams", into = "CurveParams")]
pub struct WindTurbineCurve {
    pub v_ci: f64,
    pub v_r: f64,
    pub v_co: f64,
    pub p_r: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveParams {
    v_ci: f64,
    v_r: f64,
    v_co: f64,
    p_r: f64,
}

impl TryFrom<CurveParams> for WindTurbineCurve {
    type Error = Error;

    fn try_from(p: CurveParams) -> Result<Self> {
        Self::new(p.v_ci, p.v_r, p.v_co, p.p_r)
    }
}

impl From<WindTurbineCurve> for CurveParams {
    fn from(c: WindTurbineCurve) -> Self {
        Self {
            v_ci: c.v_ci,
            v_r: c.v_r,
            v_co: c.v_co,
            p_r: c.p_r,
        }
    }
}

impl Default for WindTurbineCurve {
    fn default() -> Self {
        Self::new(3.0, 12.0, 25.0, 1.0).expect("default curve is valid")
    }
}

impl WindTurbineCurve {
    /// Ramp is the quadratic through `(v_ci, 0)`, `(v_r, P_r)` and
    /// `((v_ci + v_r) / 2, P_r / 4)`, i.e. `P_r ((v - v_ci) / (v_r - v_ci))^2`.
    pub fn new(v_ci: f64, v_r: f64, v_co: f64, p_r: f64) -> Result<Self> {
        if !(0.0 < v_ci && v_ci < v_r && v_r < v_co && v_co.is_finite())
            || !(p_r > 0.0 && p_r.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "wind curve needs 0 < v_ci < v_r < v_co and P_r > 0 (got {v_ci}, {v_r}, {v_co}, {p_r})"
            )));
        }
        let w2 = (v_r - v_ci).powi(2);
        let c = p_r / w2;
        Ok(Self {
            v_ci,
            v_r,
            v_co,
            p_r,
            a: c * v_ci * v_ci,
            b: -2.0 * c * v_ci,
            c,
        })
    }
}

/// Output power (kW) at wind speed `v` (m/s). Negative speeds produce nothing.
pub fn wind_power(v: f64, curve: &WindTurbineCurve) -> f64 {
    if v <= curve.v_ci || v > curve.v_co {
        0.0
    } else if v <= curve.v_r {
        curve.a + curve.b * v + curve.c * v * v
    } else {
        curve.p_r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Vector3};

    #[test]
    fn coefficients_match_interpolation_oracle() {
        let curve = WindTurbineCurve::new(3.5, 13.0, 25.0, 2.0).unwrap();
        let (a, b, m) = (3.5, 13.0, 8.25);
        let v = Matrix3::new(1.0, a, a * a, 1.0, b, b * b, 1.0, m, m * m);
        let abc = v.lu().solve(&Vector3::new(0.0, 2.0, 0.5)).unwrap();
        assert!((abc[0] - curve.a).abs() < 1e-9);
        assert!((abc[1] - curve.b).abs() < 1e-9);
        assert!((abc[2] - curve.c).abs() < 1e-9);
    }

    #[test]
    fn continuity_and_regions() {
        let c = WindTurbineCurve::default();
        assert_eq!(wind_power(0.0, &c), 0.0);
        assert!((c.a + c.b * c.v_ci + c.c * c.v_ci * c.v_ci).abs() < 1e-9);
        assert!((c.a + c.b * c.v_r + c.c * c.v_r * c.v_r - c.p_r).abs() < 1e-9);
        assert!((wind_power(c.v_r, &c) - c.p_r).abs() < 1e-9);
        assert!((wind_power(c.v_ci + 1e-9, &c)).abs() < 1e-9);
        assert!((wind_power(c.v_r + 1e-9, &c) - c.p_r).abs() < 1e-9);
        assert_eq!(wind_power(c.v_co, &c), c.p_r);
        assert_eq!(wind_power(c.v_co + 1e-9, &c), 0.0);
        assert_eq!(wind_power(-2.0, &c), 0.0);
        assert!((wind_power(7.5, &c) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn monotone_ramp_by_dense_scan() {
        let c = WindTurbineCurve::default();
        let mut prev = 0.0;
        for i in 0..=100_000 {
            let v = c.v_ci + (c.v_r - c.v_ci) * i as f64 / 100_000.0;
            let p = wind_power(v, &c);
            assert!(p >= prev - 1e-12);
            prev = p;
        }
    }

    #[test]
    fn invalid_curves_rejected() {
        assert!(WindTurbineCurve::new(0.0, 12.0, 25.0, 1.0).is_err());
        assert!(WindTurbineCurve::new(12.0, 3.0, 25.0, 1.0).is_err());
        assert!(WindTurbineCurve::new(3.0, 12.0, 10.0, 1.0).is_err());
        assert!(WindTurbineCurve::new(3.0, 12.0, 25.0, 0.0).is_err());
    }
}
