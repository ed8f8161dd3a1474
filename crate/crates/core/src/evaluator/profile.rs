//! Radial barrier profiles `f(|x|)` and the increments `f(r) - f(rho)` the
//! operator integrand is built from.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ProblemParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialProfile {
    /// `rho^{-theta}`.
    Power { theta: f64 },
    /// `rho^{-theta}` for `rho >= eps0`, constant `eps0^{-theta}` inside.
    TruncatedPower { theta: f64, eps0: f64 },
    /// `-eps rho^{theta_bar}`.
    NegativePower { eps: f64, theta_bar: f64 },
}

/// `ln |e^x - 1|` without overflow for large `x`.
pub(crate) fn ln_abs_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else if x > 0.0 {
        x.exp_m1().ln()
    } else {
        (-x.exp_m1()).ln()
    }
}

/// Sign and log-magnitude of a real number; `sign == 0` encodes zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub sign: f64,
    pub ln_abs: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog {
        sign: 0.0,
        ln_abs: f64::NEG_INFINITY,
    };

    fn new(sign: f64, ln_abs: f64) -> Self {
        if sign == 0.0 {
            Self::ZERO
        } else {
            SignedLog { sign, ln_abs }
        }
    }
}

fn sign_of(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl RadialProfile {
    pub fn value(&self, rho: f64) -> f64 {
        match *self {
            RadialProfile::Power { theta } => rho.powf(-theta),
            RadialProfile::TruncatedPower { theta, eps0 } => rho.max(eps0).powf(-theta),
            RadialProfile::NegativePower { eps, theta_bar } => -eps * rho.powf(theta_bar),
        }
    }

    /// True when the profile is constant, so its image vanishes identically.
    pub fn is_constant(&self) -> bool {
        matches!(*self, RadialProfile::Power { theta } if theta == 0.0)
    }

    /// Rejects profiles whose parameters lie outside their admissible range
    /// for the given operator parameters.
    pub fn validate(&self, params: &ProblemParams) -> Result<()> {
        let n = params.dim();
        let sp = params.sp();
        let pm1 = params.p() - 1.0;
        let bad = |msg: String| Err(Error::InadmissibleProfile(msg));
        match *self {
            RadialProfile::Power { theta } => {
                if !theta.is_finite() || theta * pm1 >= n || -theta * pm1 >= sp {
                    return bad(format!(
                        "power exponent {theta} outside ({}, {})",
                        -sp / pm1,
                        n / pm1
                    ));
                }
            }
            RadialProfile::TruncatedPower { theta, eps0 } => {
                if !(theta > 0.0 && theta.is_finite()) || theta * pm1 >= n + sp {
                    return bad(format!(
                        "truncated exponent {theta} outside (0, {})",
                        (n + sp) / pm1
                    ));
                }
                if !(eps0 > 0.0 && eps0 <= 0.5) {
                    return bad(format!("eps0 = {eps0} outside (0, 1/2]"));
                }
            }
            RadialProfile::NegativePower { eps, theta_bar } => {
                if !(eps > 0.0 && eps.is_finite()) {
                    return bad(format!("eps = {eps} must be positive"));
                }
                if !(theta_bar > 0.0 && theta_bar < 1.0) || theta_bar * pm1 >= sp {
                    return bad(format!(
                        "theta_bar = {theta_bar} outside (0, min(1, {}))",
                        sp / pm1
                    ));
                }
            }
        }
        Ok(())
    }

    /// `f(r) - f(r e^y)` in plain floating point, accurate for small `|y|`.
    pub fn increment(&self, r: f64, y: f64) -> f64 {
        let d = self.ln_increment(r, y);
        if d.sign == 0.0 {
            0.0
        } else {
            d.sign * d.ln_abs.exp()
        }
    }

    /// `f(r) - f(r e^y)` as sign and log-magnitude, safe for any `y`.
    pub fn ln_increment(&self, r: f64, y: f64) -> SignedLog {
        match *self {
            RadialProfile::Power { theta } => power_increment(theta, r.ln(), y),
            RadialProfile::TruncatedPower { theta, eps0 } => {
                let ln_r = r.ln();
                let ln_e = eps0.ln();
                let r_flat = ln_r < ln_e;
                let rho_flat = ln_r + y < ln_e;
                let step = match (r_flat, rho_flat) {
                    (false, false) => y,
                    (false, true) => ln_e - ln_r,
                    (true, false) => ln_r + y - ln_e,
                    (true, true) => 0.0,
                };
                power_increment(theta, ln_r.max(ln_e), step)
            }
            RadialProfile::NegativePower { eps, theta_bar } => {
                // -eps r^tb + eps r^tb e^{tb y} = eps r^tb expm1(tb y)
                let x = theta_bar * y;
                SignedLog::new(
                    sign_of(x),
                    eps.ln() + theta_bar * r.ln() + ln_abs_expm1(x),
                )
            }
        }
    }

    /// Exponent `k >= 0` such that `|f(r) - f(rho)|^{p-1} rho^{k}` stays
    /// bounded as `rho -> 0`.
    pub fn origin_blowup(&self, p: f64) -> f64 {
        match *self {
            RadialProfile::Power { theta } => theta.max(0.0) * (p - 1.0),
            _ => 0.0,
        }
    }

    /// Exponent `k >= 0` such that `|f(r) - f(rho)|^{p-1} rho^{-k}` stays
    /// bounded as `rho -> infinity`.
    pub fn tail_growth(&self, p: f64) -> f64 {
        match *self {
            RadialProfile::Power { theta } => (-theta).max(0.0) * (p - 1.0),
            RadialProfile::TruncatedPower { .. } => 0.0,
            RadialProfile::NegativePower { theta_bar, .. } => theta_bar * (p - 1.0),
        }
    }

    /// Radius where the profile has a kink, if any.
    pub fn kink(&self) -> Option<f64> {
        match *self {
            RadialProfile::TruncatedPower { eps0, .. } => Some(eps0),
            _ => None,
        }
    }
}

fn power_increment(theta: f64, ln_r: f64, y: f64) -> SignedLog {
    // r^{-theta} - (r e^y)^{-theta} = r^{-theta} (-expm1(-theta y))
    let x = -theta * y;
    SignedLog::new(-sign_of(x), -theta * ln_r + ln_abs_expm1(x))
}

/// `|grad f|` at radius `r`, exact.
pub fn eval_gradient_norm(profile: &RadialProfile, r: f64) -> f64 {
    match *profile {
        RadialProfile::Power { theta } => theta.abs() * r.powf(-theta - 1.0),
        RadialProfile::TruncatedPower { theta, eps0 } => {
            if r > eps0 {
                theta * r.powf(-theta - 1.0)
            } else {
                0.0
            }
        }
        RadialProfile::NegativePower { eps, theta_bar } => eps * theta_bar * r.powf(theta_bar - 1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params() -> ProblemParams {
        ProblemParams::new(2, 0.5, 2.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(eval_gradient_norm(&RadialProfile::Power { theta: 1.0 }, 2.0), 0.25);
        assert_eq!(
            eval_gradient_norm(&RadialProfile::TruncatedPower { theta: 1.0, eps0: 0.5 }, 0.25),
            0.0
        );
        assert_relative_eq!(
            eval_gradient_norm(&RadialProfile::NegativePower { eps: 0.1, theta_bar: 0.5 }, 4.0),
            0.025
        );
    }

    #[test]
    fn admissibility() {
        let pp = params();
        assert!(RadialProfile::Power { theta: 1.99 }.validate(&pp).is_ok());
        assert!(RadialProfile::Power { theta: 2.0 }.validate(&pp).is_err());
        assert!(RadialProfile::Power { theta: -0.99 }.validate(&pp).is_ok());
        assert!(RadialProfile::Power { theta: -1.0 }.validate(&pp).is_err());
        assert!(RadialProfile::TruncatedPower { theta: 1.0, eps0: 0.5 }.validate(&pp).is_ok());
        assert!(RadialProfile::TruncatedPower { theta: 1.0, eps0: 0.6 }.validate(&pp).is_err());
        assert!(RadialProfile::TruncatedPower { theta: 0.0, eps0: 0.5 }.validate(&pp).is_err());
        assert!(RadialProfile::NegativePower { eps: 1.0, theta_bar: 0.9 }.validate(&pp).is_ok());
        assert!(RadialProfile::NegativePower { eps: 1.0, theta_bar: 1.0 }.validate(&pp).is_err());
        let low_sp = ProblemParams::new(2, 0.25, 2.0, 0.0, 0.0).unwrap();
        assert!(RadialProfile::NegativePower { eps: 1.0, theta_bar: 0.6 }.validate(&low_sp).is_err());
    }

    #[test]
    fn serde_tagging() {
        let p: RadialProfile =
            serde_json::from_str(r#"{"kind":"truncated_power","theta":1.5,"eps0":0.25}"#).unwrap();
        assert_eq!(p, RadialProfile::TruncatedPower { theta: 1.5, eps0: 0.25 });
    }

    #[test]
    fn ln_abs_expm1_ranges() {
        for &x in &[-800.0, -5.0, -1e-9, 1e-9, 3.0, 29.0, 31.0, 700.0] {
            let direct = (x as f64).exp_m1().abs().ln();
            if direct.is_finite() {
                assert_relative_eq!(ln_abs_expm1(x), direct, max_relative = 1e-12);
            }
        }
        assert_relative_eq!(ln_abs_expm1(1000.0), 1000.0, max_relative = 1e-15);
    }

    proptest! {
        #[test]
        fn increment_matches_values(
            theta in 0.05f64..2.0, eps0 in 0.01f64..0.5, tb in 0.05f64..0.95,
            r in 0.01f64..10.0, y in -3.0f64..3.0,
        ) {
            let rho = r * y.exp();
            for prof in [
                RadialProfile::Power { theta },
                RadialProfile::Power { theta: -theta },
                RadialProfile::TruncatedPower { theta, eps0 },
                RadialProfile::NegativePower { eps: 0.3, theta_bar: tb },
            ] {
                let expect = prof.value(r) - prof.value(rho);
                let got = prof.increment(r, y);
                let scale = prof.value(r).abs().max(prof.value(rho).abs());
                prop_assert!((got - expect).abs() <= 1e-12 * scale, "{prof:?}: {got} vs {expect}");
            }
        }
    }
}
