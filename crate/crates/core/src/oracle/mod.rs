//! Full-dimensional estimators of `(-Delta_p)^s f(|x|)` at `x = r e_1`,
//! written without the radial reduction so they can cross-check it.
//! Nothing here reuses the evaluator's quadrature, kernel or special functions.

mod grid;
mod mc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::RadialProfile;
use crate::params::ProblemParams;

pub use grid::{grid_flap, MAX_GRID_NODES};
pub use mc::{mc_flap, mc_flap_with_window, mc_window_sensitivity, BATCHES, DEFAULT_WINDOW};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub value: f64,
    /// Batch-means standard error (Monte Carlo) or resolution bracket (grid).
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
}

fn check_inputs(profile: &RadialProfile, params: &ProblemParams, r: f64) -> Result<()> {
    profile.validate(params)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::precondition(format!("x_radius must be positive, got {r}")));
    }
    if let Some(k) = profile.kink() {
        if ((r - k) / r).abs() < 1e-9 {
            return Err(Error::precondition("x_radius sits on the profile kink"));
        }
    }
    Ok(())
}

fn jp(w: f64, p: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w.abs().powf(p - 2.0) * w
    }
}

/// `|r e_1 + rho w|` with `w_1 = w1`, without overflow.
fn distance(r: f64, rho: f64, w1: f64) -> f64 {
    let (big, small) = if rho > r { (rho, r) } else { (r, rho) };
    let u = small / big;
    big * (1.0 + 2.0 * w1 * u + u * u).max(0.0).sqrt()
}

/// Radius of the ball around the origin both oracles treat separately, as a
/// fraction of `|x|`.
const ORIGIN_BALL: f64 = 0.25;

/// Profile value, written out independently of the evaluator.
fn radial_value(profile: &RadialProfile, rho: f64) -> f64 {
    match *profile {
        RadialProfile::Power { theta } => rho.powf(-theta),
        RadialProfile::TruncatedPower { theta, eps0 } => {
            if rho < eps0 {
                eps0.powf(-theta)
            } else {
                rho.powf(-theta)
            }
        }
        RadialProfile::NegativePower { eps, theta_bar } => -eps * rho.powf(theta_bar),
    }
}

/// `(c, k)` with `f(rho) = c rho^k` on the part of the half-line containing `rho`.
fn local_power(profile: &RadialProfile, rho: f64) -> Option<(f64, f64)> {
    match *profile {
        RadialProfile::Power { theta } => Some((1.0, -theta)),
        RadialProfile::TruncatedPower { theta, eps0 } => (rho >= eps0).then_some((1.0, -theta)),
        RadialProfile::NegativePower { eps, theta_bar } => Some((-eps, theta_bar)),
    }
}

/// `J_p(f(r) - f(|x + z|)) + J_p(f(r) - f(|x - z|))` for `x = r e_1`,
/// `|z| = rho`, `z_1 = rho w1`. Accurate also when `rho << r`, where the two
/// terms nearly cancel.
fn paired_difference(profile: &RadialProfile, p: f64, r: f64, rho: f64, w1: f64) -> f64 {
    let u = rho / r;
    let q_plus = 2.0 * w1 * u + u * u;
    let q_minus = -2.0 * w1 * u + u * u;
    let rho_plus = r * (1.0 + q_plus).max(0.0).sqrt();
    let rho_minus = r * (1.0 + q_minus).max(0.0).sqrt();

    let smooth = match (local_power(profile, rho_plus), local_power(profile, rho_minus)) {
        (Some(a), Some(b)) if a == b && local_power(profile, r) == Some(a) => Some(a),
        _ => None,
    };
    let Some((c, k)) = smooth else {
        let fr = radial_value(profile, r);
        return jp(fr - radial_value(profile, rho_plus), p)
            + jp(fr - radial_value(profile, rho_minus), p);
    };

    // f(r) - f(r e^y) = -c r^k expm1(k y) with y = ln1p(q)/2.
    let scale = -c * r.powf(k);
    let y_plus = 0.5 * q_plus.ln_1p();
    let y_minus = 0.5 * q_minus.ln_1p();
    let e_plus = (k * y_plus).exp_m1();
    let e_minus = (k * y_minus).exp_m1();
    if u > 0.5 {
        return jp(scale * e_plus, p) + jp(scale * e_minus, p);
    }
    // Even part of the two increments without cancellation:
    // y+ + y- = ln1p(2 u^2 (1 - 2 w1^2) + u^4) / 2.
    let half_sum = 0.25 * k * (2.0 * u * u * (1.0 - 2.0 * w1 * w1) + u.powi(4)).ln_1p();
    let half_diff = 0.5 * k * (y_plus - y_minus);
    let sh = (0.5 * half_diff).sinh();
    let even = scale * (half_sum.exp_m1() * half_diff.cosh() + 2.0 * sh * sh);
    let odd = 0.5 * scale * (e_plus - e_minus);
    // J(odd + even) + J(even - odd)
    if even.abs() < odd.abs() {
        let beta = even / odd;
        let grow = ((p - 1.0) * beta.ln_1p()).exp_m1();
        let shrink = ((p - 1.0) * (-beta).ln_1p()).exp_m1();
        jp(odd, p) * (grow - shrink)
    } else {
        jp(even + odd, p) + jp(even - odd, p)
    }
}
