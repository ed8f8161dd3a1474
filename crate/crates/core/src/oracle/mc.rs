//! Stratified Monte Carlo over `y in R^N`:
//! the near ball `|y - x| < h` with the pair `y <-> 2x - y`,
//! the origin ball `|y| < r/4` with the pair `y <-> -y`,
//! and the rest with a power-law proposal in `z = y - x` and the pair `z <-> -z`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{check_inputs, distance, ORIGIN_BALL, jp, paired_difference, radial_value, OracleEstimate};
use crate::error::{Error, Result};
use crate::evaluator::RadialProfile;
use crate::params::ProblemParams;

pub const BATCHES: usize = 64;
/// Near-window radius as a fraction of `|x|`.
pub const DEFAULT_WINDOW: f64 = 0.25;


pub fn mc_flap(
    profile: &RadialProfile,
    params: &ProblemParams,
    x_radius: f64,
    samples: u64,
    seed: u64,
) -> Result<OracleEstimate> {
    mc_flap_with_window(profile, params, x_radius, samples, seed, DEFAULT_WINDOW)
}

/// Estimates at windows `h` and `h/2`; their difference measures how much
/// the near-window treatment matters.
pub fn mc_window_sensitivity(
    profile: &RadialProfile,
    params: &ProblemParams,
    x_radius: f64,
    samples: u64,
    seed: u64,
    window: f64,
) -> Result<(OracleEstimate, OracleEstimate)> {
    Ok((
        mc_flap_with_window(profile, params, x_radius, samples, seed, window)?,
        mc_flap_with_window(profile, params, x_radius, samples, seed, 0.5 * window)?,
    ))
}

struct Sampler {
    profile: RadialProfile,
    n: f64,
    p: f64,
    sp: f64,
    area: f64,
    r: f64,
    f_r: f64,
    h: f64,
    r_origin: f64,
    near_rate: f64,
    origin_rate: f64,
    far_rate: f64,
    three_d: bool,
}

impl Sampler {
    fn axis_cosine(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random();
        if self.three_d {
            2.0 * u - 1.0
        } else {
            (std::f64::consts::TAU * u).cos()
        }
    }

    fn unit_open(rng: &mut ChaCha8Rng) -> f64 {
        1.0 - rng.random::<f64>()
    }

    fn near(&self, rng: &mut ChaCha8Rng) -> f64 {
        let c = self.near_rate;
        let rho = self.h * Self::unit_open(rng).powf(1.0 / c);
        let w1 = self.axis_cosine(rng);
        let weight = self.area * self.h.powf(c) / c * rho.powf(-c - self.sp);
        0.5 * weight * paired_difference(&self.profile, self.p, self.r, rho, w1)
    }

    fn origin(&self, rng: &mut ChaCha8Rng) -> f64 {
        let c = self.origin_rate;
        let rho = self.r_origin * Self::unit_open(rng).powf(1.0 / c);
        let w1 = self.axis_cosine(rng);
        let weight = self.area * self.r_origin.powf(c) / c * rho.powf(self.n - c);
        let j = jp(self.f_r - radial_value(&self.profile, rho), self.p);
        let kernel = distance(self.r, rho, -w1).powf(-self.n - self.sp)
            + distance(self.r, rho, w1).powf(-self.n - self.sp);
        0.5 * weight * j * kernel
    }

    fn far(&self, rng: &mut ChaCha8Rng) -> f64 {
        let a = self.far_rate;
        let rho = self.h * Self::unit_open(rng).powf(-1.0 / a);
        let w1 = self.axis_cosine(rng);
        let weight = self.area * self.h.powf(-a) / a * rho.powf(a - self.sp);
        let mut sum = 0.0;
        for w in [w1, -w1] {
            let y = distance(self.r, rho, w);
            if y >= self.r_origin {
                sum += jp(self.f_r - radial_value(&self.profile, y), self.p);
            }
        }
        0.5 * weight * sum
    }

    fn batch(&self, seed: u64, stream: u64, per_stratum: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut near = 0.0;
        let mut origin = 0.0;
        let mut far = 0.0;
        for _ in 0..per_stratum {
            near += self.near(&mut rng);
            origin += self.origin(&mut rng);
            far += self.far(&mut rng);
        }
        (near + origin + far) / per_stratum as f64
    }
}

pub fn mc_flap_with_window(
    profile: &RadialProfile,
    params: &ProblemParams,
    x_radius: f64,
    samples: u64,
    seed: u64,
    window: f64,
) -> Result<OracleEstimate> {
    check_inputs(profile, params, x_radius)?;
    let three_d = match params.n() {
        2 => false,
        3 => true,
        n => return Err(Error::precondition(format!("the oracle supports N = 2, 3, got {n}"))),
    };
    if !(window > 0.0 && window <= 1.0 - ORIGIN_BALL) {
        return Err(Error::precondition(format!("window {window} outside (0, 0.75]")));
    }
    let per_stratum = samples / (3 * BATCHES as u64);
    if per_stratum == 0 {
        return Err(Error::precondition(format!(
            "need at least {} samples, got {samples}",
            3 * BATCHES
        )));
    }
    let p = params.p();
    let n = params.dim();
    if profile.is_constant() {
        return Ok(OracleEstimate {
            value: 0.0,
            stderr: 0.0,
            samples: per_stratum * 3 * BATCHES as u64,
            seed,
        });
    }
    let sampler = Sampler {
        profile: *profile,
        n,
        p,
        sp: params.sp(),
        area: if three_d {
            4.0 * std::f64::consts::PI
        } else {
            std::f64::consts::TAU
        },
        r: x_radius,
        f_r: radial_value(profile, x_radius),
        h: window * x_radius,
        r_origin: ORIGIN_BALL * x_radius,
        near_rate: p - params.sp(),
        origin_rate: n - profile.origin_blowup(p),
        far_rate: params.sp() - profile.tail_growth(p),
        three_d,
    };
    let batches: Vec<f64> = (0..BATCHES as u64)
        .into_par_iter()
        .map(|b| sampler.batch(seed, b, per_stratum))
        .collect();
    let k = BATCHES as f64;
    let mean = batches.iter().sum::<f64>() / k;
    let var = batches.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let stderr = (var / k).sqrt();
    if !mean.is_finite() || !stderr.is_finite() {
        return Err(Error::EstimatorUnstable(format!(
            "batch means not finite (mean {mean}, stderr {stderr})"
        )));
    }
    Ok(OracleEstimate {
        value: mean,
        stderr,
        samples: per_stratum * 3 * BATCHES as u64,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(n: u32, s: f64, p: f64) -> ProblemParams {
        ProblemParams::new(n, s, p, 0.0, 0.0).unwrap()
    }

    #[test]
    fn constant_profile_is_zero() {
        let est = mc_flap(&RadialProfile::Power { theta: 0.0 }, &pp(2, 0.5, 2.0), 1.0, 10_000, 1).unwrap();
        assert_eq!((est.value, est.stderr), (0.0, 0.0));
    }

    #[test]
    fn seed_determinism() {
        let prof = RadialProfile::Power { theta: 0.7 };
        let a = mc_flap(&prof, &pp(3, 0.4, 2.5), 1.5, 30_000, 11).unwrap();
        let b = mc_flap(&prof, &pp(3, 0.4, 2.5), 1.5, 30_000, 11).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        let c = mc_flap(&prof, &pp(3, 0.4, 2.5), 1.5, 30_000, 12).unwrap();
        assert_ne!(a.value, c.value);
    }

    #[test]
    fn rejects_unsupported_inputs() {
        let prof = RadialProfile::Power { theta: 0.5 };
        assert!(mc_flap(&prof, &pp(4, 0.5, 2.0), 1.0, 10_000, 1).is_err());
        assert!(mc_flap(&prof, &pp(2, 0.5, 2.0), 1.0, 10, 1).is_err());
        assert!(mc_flap_with_window(&prof, &pp(2, 0.5, 2.0), 1.0, 10_000, 1, 0.9).is_err());
    }

    #[test]
    fn distance_matches_direct() {
        for &(r, rho, w) in &[(1.0f64, 0.3f64, 0.2f64), (2.0, 5.0, -0.7), (1.0, 1e200, 0.5)] {
            let direct = (r * r + 2.0 * r * rho * w + rho * rho).sqrt();
            assert!((distance(r, rho, w) / direct - 1.0).abs() < 1e-14 || !direct.is_finite());
        }
        assert!(distance(1.0, 1e200, 0.5).is_finite());
    }
}
