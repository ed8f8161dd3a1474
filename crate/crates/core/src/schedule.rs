//! Exponent-improvement iteration: starting just above `theta_zero`, a finite
//! decreasing chain of exponents `sigma_i` such that every consecutive pair
//! satisfies `(sigma_{i+1} + 1) m + t sigma_i < sigma_{i+1} (p - 1) + sp`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{classify, critical_exponents, ProblemParams, KNIFE_EDGE_TOL};

/// Iteration guard for the affine recursion of Case 3.
pub const MAX_STEPS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScheduleCase {
    /// `m = p - 1`.
    Case1,
    /// `m < p - 1` and `t theta_zero <= sp - m`.
    Case2,
    /// `m < p - 1` and `t theta_zero > sp - m`.
    Case3,
}

impl fmt::Display for ScheduleCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self {
            ScheduleCase::Case1 => "case1",
            ScheduleCase::Case2 => "case2",
            ScheduleCase::Case3 => "case3",
        };
        f.write_str(label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementSchedule {
    pub sigmas: Vec<f64>,
    pub case_label: ScheduleCase,
    /// Margin built into every Case 3 step.
    pub epsilon: Option<f64>,
    pub delta: f64,
    pub theta_target: f64,
    /// Step slack for each consecutive pair `(sigmas[i], sigmas[i+1])`.
    pub certificates: Vec<f64>,
    /// Number of applications of the affine map; the iterates are
    /// `sigmas[1..=1 + iterations]`.
    pub iterations: usize,
}

impl ImprovementSchedule {
    /// The Case 3 iterates `sigma_1, ..., sigma_n` (just `[theta_zero]` otherwise).
    pub fn iterates(&self) -> &[f64] {
        &self.sigmas[1..=1 + self.iterations]
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.sigmas.windows(2).map(|w| (w[0], w[1]))
    }
}

fn m_below_p_minus_one(params: &ProblemParams) -> bool {
    params.m() < params.p() - 1.0 - KNIFE_EDGE_TOL
}

/// `g(l) = (t l - sp + p - 1 + epsilon)/(p - 1 - m) - 1`.
pub fn g_map(params: &ProblemParams, epsilon: f64, ell: f64) -> Result<f64> {
    if !m_below_p_minus_one(params) {
        return Err(Error::precondition(format!(
            "the map needs m < p - 1, got m = {}, p = {}",
            params.m(),
            params.p()
        )));
    }
    let (p, m, t, sp) = (params.p(), params.m(), params.t(), params.sp());
    Ok((t * ell - sp + p - 1.0 + epsilon) / (p - 1.0 - m) - 1.0)
}

/// `sigma_next (p - 1) + sp - (sigma_next + 1) m - t sigma_prev`.
pub fn verify_exponent_step(params: &ProblemParams, sigma_prev: f64, sigma_next: f64) -> f64 {
    let (p, m, t) = (params.p(), params.m(), params.t());
    sigma_next * (p - 1.0) + params.sp() - (sigma_next + 1.0) * m - t * sigma_prev
}

fn require_regime(params: &ProblemParams) -> Result<()> {
    let regime = classify(params);
    if regime.in_regime {
        Ok(())
    } else {
        Err(Error::OutOfRegime(format!(
            "{params} fails {}",
            regime
                .failed_conditions
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        )))
    }
}

/// Half of the room in `epsilon < sp - m` and in
/// `t(N - sp) + m(N - sp + p - 1) + epsilon (p - 1) < N(p - 1)`.
pub fn choose_epsilon(params: &ProblemParams) -> Result<f64> {
    if !m_below_p_minus_one(params) {
        return Err(Error::precondition("epsilon is only used when m < p - 1"));
    }
    let (n, p, m, t, sp) = (params.dim(), params.p(), params.m(), params.t(), params.sp());
    let slack3 = n * (p - 1.0) - t * (n - sp) - m * (n - sp + p - 1.0);
    if !(slack3 > 0.0) {
        return Err(Error::Case3Infeasible(slack3));
    }
    if !(sp - m > 0.0) {
        return Err(Error::precondition(format!("need m < sp, got m = {m}, sp = {sp}")));
    }
    Ok((0.5 * (sp - m)).min(slack3 / (2.0 * (p - 1.0))))
}

/// Half of the room in `N(p-1) > m(N - (sp-p+1)) + t(N - sp) + delta t (p-1)`,
/// halved further until `theta_zero + delta < theta_max`.
pub fn choose_delta(params: &ProblemParams) -> Result<f64> {
    require_regime(params)?;
    let (p, t) = (params.p(), params.t());
    let mut delta = if t > 0.0 {
        params.slack() / (2.0 * t * (p - 1.0))
    } else {
        1.0
    };
    let ex = critical_exponents(params);
    while !(ex.theta_zero + delta < ex.theta_max) {
        delta *= 0.5;
    }
    Ok(delta)
}

pub fn dispatch_case(params: &ProblemParams) -> ScheduleCase {
    if !m_below_p_minus_one(params) {
        return ScheduleCase::Case1;
    }
    let ex = critical_exponents(params);
    if params.t() * ex.theta_zero <= params.sp() - params.m() {
        ScheduleCase::Case2
    } else {
        ScheduleCase::Case3
    }
}

pub fn build_schedule(params: &ProblemParams, theta_target: f64) -> Result<ImprovementSchedule> {
    require_regime(params)?;
    let ex = critical_exponents(params);
    if !(theta_target > 0.0 && theta_target <= ex.theta_zero) {
        return Err(Error::precondition(format!(
            "theta_target must lie in (0, {}], got {theta_target}",
            ex.theta_zero
        )));
    }
    let delta = choose_delta(params)?;
    let case_label = dispatch_case(params);
    let mut sigmas = vec![ex.theta_zero + delta, ex.theta_zero];
    let mut epsilon = None;
    let mut iterations = 0;

    if case_label == ScheduleCase::Case3 {
        let eps = choose_epsilon(params)?;
        epsilon = Some(eps);
        let bound = params.sp() - params.m();
        let mut sigma = ex.theta_zero;
        while params.t() * sigma > bound {
            if iterations >= MAX_STEPS {
                return Err(Error::ScheduleDiverged(MAX_STEPS));
            }
            sigma = g_map(params, eps, sigma)?;
            sigmas.push(sigma);
            iterations += 1;
        }
    }
    if theta_target < *sigmas.last().expect("non-empty") {
        sigmas.push(theta_target);
    }
    let certificates = sigmas
        .windows(2)
        .map(|w| verify_exponent_step(params, w[0], w[1]))
        .collect();
    Ok(ImprovementSchedule {
        sigmas,
        case_label,
        epsilon,
        delta,
        theta_target,
        certificates,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pp(n: u32, s: f64, p: f64, t: f64, m: f64) -> ProblemParams {
        ProblemParams::new(n, s, p, t, m).unwrap()
    }

    #[test]
    fn g_map_examples() {
        let params = pp(2, 0.5, 2.0, 1.0, 0.0);
        assert_relative_eq!(g_map(&params, 0.25, 1.0).unwrap(), 0.25);
        let params = pp(3, 0.4, 2.5, 0.7, 0.3);
        let eps = 0.1;
        let (p, m, t, sp) = (2.5, 0.3, 0.7, params.sp());
        let fixed = -(sp - m - eps) / (p - 1.0 - m - t);
        assert_relative_eq!(g_map(&params, eps, fixed).unwrap(), fixed, max_relative = 1e-12);
        let (a, b) = (1.3, -0.4);
        let diff = g_map(&params, eps, a).unwrap() - g_map(&params, eps, b).unwrap();
        assert_relative_eq!(diff, t * (a - b) / (p - 1.0 - m), max_relative = 1e-12);
        assert!(g_map(&pp(3, 0.6, 2.0, 0.1, 1.0), 0.1, 1.0).is_err());
    }

    #[test]
    fn epsilon_example() {
        let eps = choose_epsilon(&pp(2, 0.25, 2.0, 0.9, 0.2)).unwrap();
        assert_relative_eq!(eps, 0.075, max_relative = 1e-12);
    }

    #[test]
    fn delta_examples() {
        // theta_zero = 1.5, theta_max = 2: delta = 1 is halved twice.
        assert_eq!(choose_delta(&pp(3, 0.3, 2.5, 0.0, 0.1)).unwrap(), 0.25);
        assert_eq!(choose_delta(&pp(3, 0.9, 1.5, 0.0, 0.1)).unwrap(), 1.0);
        assert_relative_eq!(choose_delta(&pp(2, 0.5, 2.0, 1.0, 0.0)).unwrap(), 0.5);
        // N = 2, s = 0.5, p = 2, t = 0: delta = 1 would put sigma_0 on theta_max = 2.
        assert_eq!(choose_delta(&pp(2, 0.5, 2.0, 0.0, 0.0)).unwrap(), 0.5);
    }

    #[test]
    fn exponent_step_examples() {
        assert_relative_eq!(verify_exponent_step(&pp(2, 0.5, 2.0, 0.0, 0.0), 1.0, 0.5), 1.5);
        assert!(verify_exponent_step(&pp(2, 0.5, 2.0, 10.0, 0.0), 1.0, 0.5) < 0.0);
    }

    #[test]
    fn case_examples() {
        let s1 = build_schedule(&pp(3, 0.6, 2.0, 0.1, 1.0), 0.9).unwrap();
        assert_eq!(s1.case_label, ScheduleCase::Case1);
        assert_eq!(s1.sigmas.len(), 3);
        assert!(s1.certificates.iter().all(|c| *c > 0.0));

        let s2 = build_schedule(&pp(2, 0.5, 2.0, 0.4, 0.0), 0.5).unwrap();
        assert_eq!(s2.case_label, ScheduleCase::Case2);
        assert_eq!(s2.sigmas, vec![s2.sigmas[0], 1.0, 0.5]);

        let params = pp(2, 0.25, 2.0, 0.9, 0.0);
        let s3 = build_schedule(&params, 0.2).unwrap();
        assert_eq!(s3.case_label, ScheduleCase::Case3);
        let eps = s3.epsilon.unwrap();
        let iter = s3.iterates();
        assert!(0.9 * iter.last().unwrap() <= 0.5);
        // Independent run of the affine recursion.
        let mut sigma = 1.5;
        for w in iter.windows(2) {
            assert_eq!(w[0], sigma);
            sigma = (0.9 * sigma - 0.5 + 1.0 + eps) / 1.0 - 1.0;
            assert_relative_eq!(w[1], sigma, max_relative = 1e-14);
        }
    }

    #[test]
    fn target_equal_to_theta_zero() {
        let s = build_schedule(&pp(2, 0.5, 2.0, 0.4, 0.0), 1.0).unwrap();
        assert_eq!(s.sigmas.len(), 2);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            build_schedule(&pp(3, 0.5, 2.0, 3.0, 0.0), 0.5),
            Err(Error::OutOfRegime(_))
        ));
        assert!(matches!(
            build_schedule(&pp(2, 0.5, 2.0, 0.4, 0.0), 1.5),
            Err(Error::Precondition(_))
        ));
    }

    fn random_in_regime(rng: &mut ChaCha8Rng) -> ProblemParams {
        loop {
            let n = rng.random_range(2..=5u32);
            let s: f64 = rng.random_range(0.05..0.95);
            let p: f64 = rng.random_range(1.1..4.0);
            let m: f64 = rng.random_range(0.0..(p - 1.0_f64).max(s * p));
            let t = rng.random_range(0.0..3.0);
            let Ok(params) = ProblemParams::new(n, s, p, t, m) else { continue };
            if classify(&params).in_regime {
                return params;
            }
        }
    }

    #[test]
    fn randomized_schedules_are_sound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let params = random_in_regime(&mut rng);
            let target = 0.5 * critical_exponents(&params).theta_zero;
            let s = build_schedule(&params, target).unwrap();
            assert!(s.sigmas.windows(2).all(|w| w[1] < w[0]), "{params}");
            assert!(*s.sigmas.last().unwrap() <= target);
            assert!(s.certificates.iter().all(|c| *c > 0.0), "{params}: {:?}", s.certificates);
            if let Some(eps) = s.epsilon {
                let it = s.iterates();
                for w in it.windows(2) {
                    assert!((verify_exponent_step(&params, w[0], w[1]) - eps).abs() <= 1e-12);
                }
                if it.len() >= 3 {
                    let ratio = params.t() / (params.p() - 1.0 - params.m());
                    let d1 = it[1] - it[0];
                    for i in 1..it.len() - 1 {
                        let expect: f64 = ratio.powi(i as i32) * d1;
                        let got = it[i + 1] - it[i];
                        assert!((got - expect).abs() <= 1e-10 * expect.abs().max(1e-300), "{params}");
                    }
                }
            }
        }
    }
}
