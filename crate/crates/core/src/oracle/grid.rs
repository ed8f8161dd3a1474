//! Deterministic midpoint rule for `N = 2` in polar coordinates around `x`:
//! `z = y - x = r e^v (cos phi, sin phi)`, `phi in [0, pi)` paired with `phi + pi`.
//! Radii below `window r` are covered by the leading power-law model; radii
//! above `r / window` by the substitution `w = e^{-a (v - v_hi)}`, under which
//! the decaying tail becomes a bounded integrand on `(0, 1]`.
//! The disc `|y| < r/4` is excluded there and integrated on its own polar grid
//! around the origin, with a radial substitution absorbing the profile's blow-up.

use rayon::prelude::*;

use super::{check_inputs, distance, jp, paired_difference, radial_value, OracleEstimate, ORIGIN_BALL};
use crate::error::{Error, Result};
use crate::evaluator::RadialProfile;
use crate::params::ProblemParams;

pub const MAX_GRID_NODES: usize = 4096;

struct Grid {
    profile: RadialProfile,
    p: f64,
    sp: f64,
    r: f64,
    v_lo: f64,
    v_hi: f64,
    inner_rate: f64,
    outer_rate: f64,
    f_r: f64,
    origin_rate: f64,
}

impl Grid {
    /// `int_0^pi rho^{-sp} [J(D+) + J(D-)] dphi` by the `nodes`-point midpoint rule.
    fn angular(&self, v: f64, nodes: usize) -> f64 {
        let rho = self.r * v.exp();
        let dphi = std::f64::consts::PI / nodes as f64;
        let sum: f64 = (0..nodes)
            .map(|j| {
                let w1 = ((j as f64 + 0.5) * dphi).cos();
                self.pair(rho, w1)
            })
            .sum();
        rho.powf(-self.sp) * sum * dphi
    }

    /// Both points `x +- z`, each dropped when it falls in the origin disc.
    fn pair(&self, rho: f64, w1: f64) -> f64 {
        if rho < (1.0 - ORIGIN_BALL) * self.r {
            return paired_difference(&self.profile, self.p, self.r, rho, w1);
        }
        [w1, -w1]
            .into_iter()
            .map(|w| {
                let y = distance(self.r, rho, w);
                if y < ORIGIN_BALL * self.r {
                    0.0
                } else {
                    jp(self.f_r - radial_value(&self.profile, y), self.p)
                }
            })
            .sum()
    }

    /// Integral over `|y| < r/4` with `|y| = (r/4) w^{1/c}`, midpoint in `(w, phi)`.
    fn origin_disc(&self, nodes: usize) -> f64 {
        let c = self.origin_rate;
        let r_o = ORIGIN_BALL * self.r;
        let dw = 1.0 / nodes as f64;
        let dphi = std::f64::consts::PI / nodes as f64;
        let rows: Vec<f64> = (0..nodes)
            .into_par_iter()
            .map(|i| {
                let rho = r_o * ((i as f64 + 0.5) * dw).powf(1.0 / c);
                let j = jp(self.f_r - radial_value(&self.profile, rho), self.p);
                let weight = r_o.powf(c) / c * rho.powf(2.0 - c);
                let kernel: f64 = (0..nodes)
                    .map(|k| {
                        let w1 = -((k as f64 + 0.5) * dphi).cos();
                        distance(self.r, rho, w1).powf(-2.0 - self.sp)
                    })
                    .sum();
                weight * j * kernel
            })
            .collect();
        2.0 * rows.iter().sum::<f64>() * dw * dphi
    }

    fn integral(&self, nodes: usize) -> f64 {
        let dv = (self.v_hi - self.v_lo) / nodes as f64;
        let rows: Vec<f64> = (0..nodes)
            .into_par_iter()
            .map(|i| self.angular(self.v_lo + (i as f64 + 0.5) * dv, nodes))
            .collect();
        let body: f64 = rows.iter().sum::<f64>() * dv;
        let inner = self.angular(self.v_lo, nodes) / self.inner_rate;
        let a = self.outer_rate;
        let outer: f64 = (0..nodes)
            .into_par_iter()
            .map(|i| {
                let w = (i as f64 + 0.5) / nodes as f64;
                self.angular(self.v_hi - w.ln() / a, nodes) / (a * w)
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum::<f64>()
            / nodes as f64;
        body + inner + outer + self.origin_disc(nodes)
    }
}

/// `window` is the ratio of the innermost radius to `|x|`; the grid spans
/// `ln(rho/|x|) in [ln window, -ln window]`.
pub fn grid_flap(
    profile: &RadialProfile,
    params: &ProblemParams,
    x_radius: f64,
    nodes_per_dim: usize,
    window: f64,
) -> Result<OracleEstimate> {
    check_inputs(profile, params, x_radius)?;
    if params.n() != 2 {
        return Err(Error::precondition(format!("grid oracle needs N = 2, got {}", params.n())));
    }
    if nodes_per_dim > MAX_GRID_NODES {
        return Err(Error::ResourceBound(format!(
            "nodes_per_dim = {nodes_per_dim} exceeds {MAX_GRID_NODES}"
        )));
    }
    if nodes_per_dim < 4 || nodes_per_dim % 2 != 0 {
        return Err(Error::precondition("nodes_per_dim must be even and at least 4"));
    }
    if !(window > 0.0 && window < 1.0) {
        return Err(Error::precondition(format!("window {window} outside (0, 1)")));
    }
    let samples = (nodes_per_dim * nodes_per_dim) as u64;
    if profile.is_constant() {
        return Ok(OracleEstimate { value: 0.0, stderr: 0.0, samples, seed: 0 });
    }
    let p = params.p();
    let grid = Grid {
        profile: *profile,
        p,
        sp: params.sp(),
        r: x_radius,
        v_lo: window.ln(),
        v_hi: -window.ln(),
        inner_rate: p - params.sp(),
        outer_rate: params.sp() - profile.tail_growth(p),
        f_r: radial_value(profile, x_radius),
        origin_rate: 2.0 - profile.origin_blowup(p),
    };
    let fine = grid.integral(nodes_per_dim);
    let coarse = grid.integral(nodes_per_dim / 2);
    Ok(OracleEstimate {
        value: fine,
        stderr: (fine - coarse).abs(),
        samples,
        seed: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(s: f64, p: f64) -> ProblemParams {
        ProblemParams::new(2, s, p, 0.0, 0.0).unwrap()
    }

    #[test]
    fn constant_profile_is_exactly_zero() {
        let est = grid_flap(&RadialProfile::Power { theta: 0.0 }, &pp(0.5, 2.0), 1.0, 64, 1e-4).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn refinement_shrinks_bracket() {
        let prof = RadialProfile::Power { theta: 0.5 };
        let widths: Vec<f64> = [128, 256, 512, 1024]
            .iter()
            .map(|&n| grid_flap(&prof, &pp(0.5, 2.0), 1.0, n, 1e-4).unwrap().stderr)
            .collect();
        assert!(widths.windows(2).all(|w| w[1] < w[0]), "{widths:?}");
    }

    #[test]
    fn resource_bound() {
        let prof = RadialProfile::Power { theta: 0.5 };
        assert!(matches!(
            grid_flap(&prof, &pp(0.5, 2.0), 1.0, 8192, 1e-4),
            Err(Error::ResourceBound(_))
        ));
        let three = ProblemParams::new(3, 0.5, 2.0, 0.0, 0.0).unwrap();
        assert!(grid_flap(&prof, &three, 1.0, 64, 1e-4).is_err());
    }
}
