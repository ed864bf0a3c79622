//! Closed-form limits for the one-zero/one-pole family and consistency
//! checks tying the five criteria together.

use crate::error::{Error, Result};
use crate::setup::ProblemData;

/// Optimal values for a plant with a single real right-half-plane zero `z1`
/// and a single real right-half-plane pole `p1 < z1`, tracking a unit step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderLimits {
    /// The shape parameter p1 / (z1 - p1).
    pub h: f64,
    pub os: f64,
    pub ma: f64,
    pub fl: f64,
    pub pos: f64,
}

/// `(h+1)^{h+1} / h^h`, switching to log-space once direct powers overflow.
fn peak_ratio(h: f64) -> f64 {
    if h > 50.0 {
        ((h + 1.0) * (h + 1.0).ln() - h * h.ln()).exp()
    } else {
        (h + 1.0).powf(h + 1.0) / h.powf(h)
    }
}

pub fn first_order_limits(z1: f64, p1: f64) -> Result<FirstOrderLimits> {
    if !(z1 > p1 && p1 > 0.0) || !z1.is_finite() {
        return Err(Error::FirstOrderOutOfRange { z: z1, p: p1 });
    }
    let h = p1 / (z1 - p1);
    // 1 - 2^{-1/h} via expm1 to stay accurate for large h.
    let ma = 1.0 / (-((-std::f64::consts::LN_2 / h).exp_m1()));
    Ok(FirstOrderLimits {
        h,
        os: h,
        ma,
        fl: 0.5 * peak_ratio(h),
        pos: 1.0,
    })
}

/// Smallest decay rate among the real-axis plant interpolation points, or
/// infinity when every point is oscillatory.
pub fn gamma_of(pd: &ProblemData) -> f64 {
    pd.gamma
}

/// Violations of the value chain max(pos, os) <= ma <= 2 fl <= 2 ma.
///
/// The pointwise identity relating one-sided peaks to the fluctuation does
/// not transfer to optimal values and is deliberately not checked here.
pub fn check_inequality_chain(pos: f64, os: f64, ma: f64, fl: f64, tol: f64) -> Vec<String> {
    let mut violations = Vec::new();
    if pos.max(os) > ma + tol {
        violations.push(format!(
            "max(pos, os) <= ma violated: max({pos}, {os}) > {ma} + {tol}"
        ));
    }
    if ma > 2.0 * fl + tol {
        violations.push(format!("ma <= 2*fl violated: {ma} > 2*{fl} + {tol}"));
    }
    if 2.0 * fl > 2.0 * ma + tol {
        violations.push(format!("2*fl <= 2*ma violated: 2*{fl} > 2*{ma} + {tol}"));
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_shape_values() {
        let l = first_order_limits(2.0, 1.0).unwrap();
        assert_eq!(l.h, 1.0);
        assert_eq!(l.os, 1.0);
        assert!((l.ma - 2.0).abs() < 1e-14);
        assert!((l.fl - 2.0).abs() < 1e-14);
        assert_eq!(l.pos, 1.0);
    }

    #[test]
    fn half_shape_values() {
        let l = first_order_limits(3.0, 1.0).unwrap();
        assert_eq!(l.h, 0.5);
        assert_eq!(l.os, 0.5);
        assert!((l.ma - 4.0 / 3.0).abs() < 1e-14);
        let fl_direct = 1.5f64.powf(1.5) / (2.0 * 0.5f64.powf(0.5));
        assert!((l.fl - fl_direct).abs() < 1e-14);
        assert!((l.fl - 3.0 * 3.0f64.sqrt() / 4.0).abs() < 1e-12);
    }

    #[test]
    fn near_cancellation_blowup() {
        let l = first_order_limits(1.0001, 1.0).unwrap();
        assert!((l.h - 1e4).abs() / 1e4 < 1e-8);
        assert!((l.os - l.h).abs() == 0.0);
        assert!(l.ma.is_finite() && l.fl.is_finite());
        assert!(l.ma > l.h); // ma dominates the overshoot everywhere
    }

    #[test]
    fn rejects_out_of_hypothesis() {
        assert!(matches!(
            first_order_limits(1.0, 2.0),
            Err(Error::FirstOrderOutOfRange { .. })
        ));
        assert!(matches!(
            first_order_limits(2.0, -1.0),
            Err(Error::FirstOrderOutOfRange { .. })
        ));
        assert!(matches!(
            first_order_limits(2.0, 2.0),
            Err(Error::FirstOrderOutOfRange { .. })
        ));
    }

    #[test]
    fn chain_holds_across_shapes() {
        // max(1,h) <= 1/(1-2^{-1/h}) <= (h+1)^{h+1}/h^h <= 2/(1-2^{-1/h})
        for k in 0..50 {
            let h = 10f64.powf(-2.0 + 4.0 * k as f64 / 49.0);
            let z = 1.0 + 1.0 / h; // p=1 gives shape h
            let l = first_order_limits(z, 1.0).unwrap();
            let scale = l.ma.max(2.0 * l.fl);
            let tol = 1e-12 * scale;
            assert!(1.0f64.max(h) <= l.ma + tol, "h={h}");
            assert!(l.ma <= 2.0 * l.fl + tol, "h={h}");
            assert!(2.0 * l.fl <= 2.0 * l.ma + tol, "h={h}");
            assert!(check_inequality_chain(l.pos, l.os, l.ma, l.fl, tol).is_empty());
        }
    }

    #[test]
    fn peak_ratio_log_space_is_continuous() {
        // The two evaluation branches agree near the switchover.
        for h in [49.9, 50.1, 60.0] {
            let direct = (h + 1.0f64).powf(h + 1.0) / h.powf(h);
            assert!((peak_ratio(h) - direct).abs() / direct < 1e-12);
        }
    }

    #[test]
    fn chain_checker_reports_breaches() {
        let v = check_inequality_chain(1.0, 1.0, 1.0, 0.4, 1e-9);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("ma <= 2*fl"));
    }
}
