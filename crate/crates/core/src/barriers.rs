//! Homogeneity constant `C(theta)`, its sign pattern, and numerical
//! witnesses for the barrier inequalities used in the exponent iteration and
//! in the final comparison argument.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{eval_flap, eval_gradient_norm, EvalResult, QuadratureConfig, RadialProfile};
use crate::params::{classify, critical_exponents, ProblemParams, ThetaRegion};

/// Radii at which `r^{theta(p-1)+sp} (-Delta_p)^s |x|^{-theta}` is sampled.
pub const CTHETA_RADII: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];

/// Truncation radius used for the improvement-step barriers.
pub const STEP_EPS0: f64 = 0.5;

/// Deepest rung of the dyadic `eps0` ladder, as a power of two.
pub const EPS0_LADDER_DEPTH: i32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignVerdict {
    Positive,
    Negative,
    /// `|C(theta)|` is not distinguishable from the numerical noise floor.
    Indeterminate,
}

impl SignVerdict {
    /// Whether the verdict is compatible with the sign the trichotomy assigns.
    pub fn agrees_with(self, region: ThetaRegion) -> bool {
        match self {
            SignVerdict::Indeterminate => true,
            SignVerdict::Positive => region == ThetaRegion::PositiveC,
            SignVerdict::Negative => region == ThetaRegion::NegativeC,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CthetaEstimate {
    pub theta: f64,
    pub value: f64,
    /// Largest deviation of a rescaled sample from `value`.
    pub spread: f64,
    pub r_samples: Vec<f64>,
    /// Largest rescaled quadrature error estimate over the samples.
    pub error: f64,
    /// Mean rescaled integral of the absolute integrand.
    pub magnitude: f64,
    pub verdict: SignVerdict,
    /// Set when some sample missed the quadrature tolerance.
    pub low_confidence: bool,
}

impl CthetaEstimate {
    /// Level below which `|value|` does not support a sign.
    pub fn noise_floor(&self, rel_tol: f64) -> f64 {
        3.0 * self.spread + (3.0 * self.error).max(10.0 * rel_tol * self.magnitude)
    }
}

/// Estimates `C(theta)` from the rescaled image of `|x|^{-theta}` at
/// [`CTHETA_RADII`].
pub fn estimate_ctheta(
    params: &ProblemParams,
    theta: f64,
    cfg: &QuadratureConfig,
) -> Result<CthetaEstimate> {
    if params.dim() == params.sp() {
        return Err(Error::precondition("C(theta) needs N != sp"));
    }
    let profile = RadialProfile::Power { theta };
    profile.validate(params)?;
    let radii = CTHETA_RADII.to_vec();
    if theta == 0.0 {
        return Ok(CthetaEstimate {
            theta,
            value: 0.0,
            spread: 0.0,
            r_samples: radii,
            error: 0.0,
            magnitude: 0.0,
            verdict: SignVerdict::Indeterminate,
            low_confidence: false,
        });
    }
    let decay = theta * (params.p() - 1.0) + params.sp();
    let evals: Vec<EvalResult> = radii
        .par_iter()
        .map(|&r| eval_flap(&profile, params, r, cfg))
        .collect::<Result<_>>()?;
    let rescale: Vec<f64> = radii.iter().map(|r| r.powf(decay)).collect();
    let scaled: Vec<f64> = evals.iter().zip(&rescale).map(|(e, k)| e.value * k).collect();
    let value = scaled.iter().sum::<f64>() / scaled.len() as f64;
    let spread = scaled.iter().map(|v| (v - value).abs()).fold(0.0, f64::max);
    let error = evals
        .iter()
        .zip(&rescale)
        .map(|(e, k)| e.error_estimate * k)
        .fold(0.0, f64::max);
    let magnitude = evals
        .iter()
        .zip(&rescale)
        .map(|(e, k)| e.magnitude * k)
        .sum::<f64>()
        / evals.len() as f64;
    let mut est = CthetaEstimate {
        theta,
        value,
        spread,
        r_samples: radii,
        error,
        magnitude,
        verdict: SignVerdict::Indeterminate,
        low_confidence: evals.iter().any(|e| !e.tolerance_met),
    };
    if value.abs() > est.noise_floor(cfg.rel_tol) {
        est.verdict = if value > 0.0 {
            SignVerdict::Positive
        } else {
            SignVerdict::Negative
        };
    }
    Ok(est)
}

/// Estimates `C(theta)` on every grid point, in grid order.
pub fn scan_sign_trichotomy(
    params: &ProblemParams,
    theta_grid: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Vec<CthetaEstimate>> {
    theta_grid
        .par_iter()
        .map(|&theta| estimate_ctheta(params, theta, cfg))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eps0Selection {
    pub eps0: f64,
    pub r_grid: Vec<f64>,
    /// Image of the truncated barrier on the grid; all negative.
    pub values: Vec<f64>,
    /// `(eps0, max image over the grid)` for every rung tried, in order.
    pub margin_profile: Vec<(f64, f64)>,
}

/// Logarithmic grid with `per_decade` points per decade from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let count = (decades * per_decade as f64).round().max(1.0) as usize;
    (0..=count)
        .map(|i| {
            if i == count {
                hi
            } else {
                lo * 10f64.powf(decades * i as f64 / count as f64)
            }
        })
        .collect()
}

/// Largest dyadic `eps0` for which the truncated barrier has a negative image
/// on `[1, 10^3]`, with the quadrature error counted against it.
pub fn select_eps0(params: &ProblemParams, theta: f64, cfg: &QuadratureConfig) -> Result<Eps0Selection> {
    let ex = critical_exponents(params);
    if !(params.dim() > params.sp() && theta > ex.theta_zero && theta < ex.theta_max) {
        return Err(Error::precondition(format!(
            "eps0 selection needs theta in ({}, {}), got {theta}",
            ex.theta_zero, ex.theta_max
        )));
    }
    let r_grid = log_grid(1.0, 1e3, 4);
    let mut margin_profile = Vec::new();
    for k in 1..=EPS0_LADDER_DEPTH {
        let eps0 = 2f64.powi(-k);
        let profile = RadialProfile::TruncatedPower { theta, eps0 };
        let evals: Vec<EvalResult> = r_grid
            .par_iter()
            .map(|&r| eval_flap(&profile, params, r, cfg))
            .collect::<Result<_>>()?;
        let worst = evals
            .iter()
            .map(|e| e.value + e.error_estimate)
            .fold(f64::NEG_INFINITY, f64::max);
        margin_profile.push((eps0, worst));
        if worst < 0.0 {
            return Ok(Eps0Selection {
                eps0,
                r_grid,
                values: evals.iter().map(|e| e.value).collect(),
                margin_profile,
            });
        }
    }
    Err(Error::Eps0SelectionFailed { margin_profile })
}

/// Radii at which a barrier inequality is sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusGrid {
    pub radii: Vec<f64>,
    /// Append further decades while the sampled trend points at a sign
    /// change beyond the last radius.
    pub extend: bool,
}

impl RadiusGrid {
    pub const MAX_RADIUS: f64 = 1e100;
    const BLOCK: usize = 16;
    const PER_DECADE: f64 = 4.0;

    /// `[1, 10^4]` at four points per decade, extendable.
    pub fn standard() -> Self {
        RadiusGrid {
            radii: log_grid(1.0, 1e4, 4),
            extend: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    pub profile: RadialProfile,
    /// Power of `|x|` multiplying the constant on the right-hand side.
    pub rhs_exponent: f64,
    pub rhs_constant: f64,
    pub r_grid: Vec<f64>,
    pub lhs: Vec<f64>,
    pub lhs_error: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `rhs - lhs` at each radius.
    pub margins: Vec<f64>,
    /// Smallest grid radius from which every margin exceeds the quadrature
    /// error of its left-hand side.
    pub empirical_threshold: Option<f64>,
    /// Analytic exponent gap; positive when the right-hand side decays slower.
    pub exponent_slack: f64,
    /// `max_r lhs(r) r^{decay}`: the empirical constant in the power-law bound.
    pub empirical_lhs_constant: f64,
    /// Set when the check at `eps = 1` also covers all `eps in (0, 1)`.
    pub covers_smaller_eps: Option<bool>,
}

impl BarrierReport {
    /// Whether every margin from the threshold on is positive.
    pub fn positive_beyond_threshold(&self) -> bool {
        match self.empirical_threshold {
            None => false,
            Some(t) => self
                .r_grid
                .iter()
                .zip(&self.margins)
                .filter(|(r, _)| **r >= t)
                .all(|(_, m)| *m > 0.0),
        }
    }
}

struct Sampled {
    r_grid: Vec<f64>,
    lhs: Vec<f64>,
    lhs_error: Vec<f64>,
    rhs: Vec<f64>,
}

fn sample_inequality<R: Fn(f64) -> f64 + Sync>(
    profile: &RadialProfile,
    params: &ProblemParams,
    rhs: R,
    grid: &RadiusGrid,
    cfg: &QuadratureConfig,
) -> Result<Sampled> {
    let mut out = Sampled {
        r_grid: Vec::new(),
        lhs: Vec::new(),
        lhs_error: Vec::new(),
        rhs: Vec::new(),
    };
    let mut batch = grid.radii.clone();
    loop {
        let evals: Vec<EvalResult> = batch
            .par_iter()
            .map(|&r| eval_flap(profile, params, r, cfg))
            .collect::<Result<_>>()?;
        for (r, e) in batch.iter().zip(evals) {
            out.r_grid.push(*r);
            out.lhs.push(e.value);
            out.lhs_error.push(e.error_estimate);
            out.rhs.push(rhs(*r));
        }
        if !grid.extend || !should_extend(&out) {
            return Ok(out);
        }
        let last = *out.r_grid.last().expect("grid is non-empty");
        batch = (1..=RadiusGrid::BLOCK)
            .map(|k| last * 10f64.powf(k as f64 / RadiusGrid::PER_DECADE))
            .collect();
    }
}

fn should_extend(s: &Sampled) -> bool {
    let n = s.r_grid.len();
    if n < 5 {
        return false;
    }
    let last_r = s.r_grid[n - 1];
    let (lhs, rhs, err) = (s.lhs[n - 1], s.rhs[n - 1], s.lhs_error[n - 1]);
    if !(last_r * 10.0 < RadiusGrid::MAX_RADIUS) || !(rhs > 1e-280) || lhs.abs() < 1e-280 {
        return false;
    }
    if !(lhs > 0.0 && s.lhs[n - 5] > 0.0) {
        return false;
    }
    let ratio_now = lhs / rhs;
    let ratio_before = s.lhs[n - 5] / s.rhs[n - 5];
    let positive = rhs - lhs > err;
    if positive {
        // Still positive but the left-hand side is catching up.
        ratio_now > ratio_before
    } else {
        ratio_now < ratio_before
    }
}

fn threshold(s: &Sampled) -> Option<f64> {
    let mut first = None;
    for i in (0..s.r_grid.len()).rev() {
        if s.rhs[i] - s.lhs[i] > s.lhs_error[i] {
            first = Some(s.r_grid[i]);
        } else {
            break;
        }
    }
    first
}

fn report(
    profile: RadialProfile,
    rhs_exponent: f64,
    rhs_constant: f64,
    exponent_slack: f64,
    lhs_decay: f64,
    sampled: Sampled,
    covers_smaller_eps: Option<bool>,
) -> BarrierReport {
    let empirical_threshold = threshold(&sampled);
    let margins = sampled.rhs.iter().zip(&sampled.lhs).map(|(r, l)| r - l).collect();
    let empirical_lhs_constant = sampled
        .r_grid
        .iter()
        .zip(&sampled.lhs)
        .map(|(r, l)| l * r.powf(lhs_decay))
        .fold(f64::NEG_INFINITY, f64::max);
    BarrierReport {
        profile,
        rhs_exponent,
        rhs_constant,
        r_grid: sampled.r_grid,
        lhs: sampled.lhs,
        lhs_error: sampled.lhs_error,
        rhs: sampled.rhs,
        margins,
        empirical_threshold,
        exponent_slack,
        empirical_lhs_constant,
        covers_smaller_eps,
    }
}

/// Checks `(-Delta_p)^s phi < c |x|^{-t sigma_prev} |grad phi|^m` for the
/// truncated barrier `phi` with exponent `sigma_next` and `eps0 = 1/2`.
pub fn verify_step(
    params: &ProblemParams,
    sigma_prev: f64,
    sigma_next: f64,
    rhs_constant: f64,
    cfg: &QuadratureConfig,
) -> Result<BarrierReport> {
    verify_step_on(params, sigma_prev, sigma_next, rhs_constant, &RadiusGrid::standard(), cfg)
}

pub fn verify_step_on(
    params: &ProblemParams,
    sigma_prev: f64,
    sigma_next: f64,
    rhs_constant: f64,
    grid: &RadiusGrid,
    cfg: &QuadratureConfig,
) -> Result<BarrierReport> {
    if !(sigma_next > 0.0 && sigma_next < sigma_prev) {
        return Err(Error::precondition(format!(
            "need 0 < sigma_next < sigma_prev, got ({sigma_prev}, {sigma_next})"
        )));
    }
    if !(rhs_constant > 0.0 && rhs_constant.is_finite()) {
        return Err(Error::precondition("rhs_constant must be positive"));
    }
    let profile = RadialProfile::TruncatedPower {
        theta: sigma_next,
        eps0: STEP_EPS0,
    };
    profile.validate(params)?;
    let (t, m) = (params.t(), params.m());
    let rhs_exponent = -t * sigma_prev;
    let rhs = |r: f64| rhs_constant * r.powf(rhs_exponent) * eval_gradient_norm(&profile, r).powf(m);
    let sampled = sample_inequality(&profile, params, rhs, grid, cfg)?;
    let slack = crate::schedule::verify_exponent_step(params, sigma_prev, sigma_next);
    let decay = sigma_next * (params.p() - 1.0) + params.sp();
    Ok(report(profile, rhs_exponent, rhs_constant, slack, decay, sampled, None))
}

/// `(theta_bar - 1)(p - 1 - m) + p - 1 - sp + t theta`; must be negative.
pub fn final_exponent(params: &ProblemParams, theta: f64, theta_bar: f64) -> f64 {
    let (p, m, t) = (params.p(), params.m(), params.t());
    (theta_bar - 1.0) * (p - 1.0 - m) + p - 1.0 - params.sp() + t * theta
}

/// Checks `(-Delta_p)^s phi < kappa |x|^{-t theta} |grad phi|^m` for
/// `phi = -|x|^{theta_bar}`.
pub fn verify_final_barrier(
    params: &ProblemParams,
    theta: f64,
    theta_bar: f64,
    kappa: f64,
    cfg: &QuadratureConfig,
) -> Result<BarrierReport> {
    verify_final_barrier_on(params, theta, theta_bar, kappa, 1.0, &RadiusGrid::standard(), cfg)
}

/// As [`verify_final_barrier`] for `phi = -eps |x|^{theta_bar}` on a given grid.
pub fn verify_final_barrier_on(
    params: &ProblemParams,
    theta: f64,
    theta_bar: f64,
    kappa: f64,
    eps: f64,
    grid: &RadiusGrid,
    cfg: &QuadratureConfig,
) -> Result<BarrierReport> {
    let upper = (params.sp() / (params.p() - 1.0)).min(1.0);
    if !(theta_bar > 0.0 && theta_bar < upper) {
        return Err(Error::precondition(format!(
            "theta_bar = {theta_bar} outside (0, {upper})"
        )));
    }
    if !(theta > 0.0 && kappa > 0.0) {
        return Err(Error::precondition("theta and kappa must be positive"));
    }
    let e = final_exponent(params, theta, theta_bar);
    if !(e < 0.0) {
        return Err(Error::precondition(format!(
            "exponent condition fails: (theta_bar-1)(p-1-m)+p-1-sp+t theta = {e} >= 0"
        )));
    }
    let profile = RadialProfile::NegativePower { eps, theta_bar };
    let (t, m) = (params.t(), params.m());
    let rhs_exponent = -t * theta;
    let rhs = |r: f64| kappa * r.powf(rhs_exponent) * eval_gradient_norm(&profile, r).powf(m);
    let sampled = sample_inequality(&profile, params, rhs, grid, cfg)?;
    let decay = params.sp() - theta_bar * (params.p() - 1.0);
    Ok(report(
        profile,
        rhs_exponent,
        kappa,
        -e,
        decay,
        sampled,
        Some(m <= params.p() - 1.0),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalCase {
    /// `sp > p - 1`.
    AboveEdge,
    /// `sp = p - 1`.
    OnEdge,
    /// `sp < p - 1`.
    BelowEdge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalBarrierChoice {
    pub theta: f64,
    pub theta_bar: f64,
    pub case: FinalCase,
    /// Value of the exponent condition; negative.
    pub exponent: f64,
}

/// Picks `(theta, theta_bar)` for the final barrier, taking half of the
/// available room in each constraint and capping `theta` at 1.
pub fn select_theta_bar(params: &ProblemParams) -> Result<FinalBarrierChoice> {
    let regime = classify(params);
    if !regime.in_regime {
        return Err(Error::OutOfRegime(format!(
            "{params} fails {:?}",
            regime.failed_conditions
        )));
    }
    let (p, m, t, sp) = (params.p(), params.m(), params.t(), params.sp());
    let theta_for = |room: f64| if t > 0.0 { (0.5 * room / t).min(1.0) } else { 1.0 };
    let (case, theta_bar, theta) = if params.on_knife_edge() {
        let tb = 0.5 * (sp / (p - 1.0)).min(1.0);
        (FinalCase::OnEdge, tb, theta_for((1.0 - tb) * (p - 1.0 - m)))
    } else if params.gradient_branch_open() {
        let tb = 0.5 * (sp / (p - 1.0)).min(1.0);
        (FinalCase::AboveEdge, tb, theta_for(sp - p + 1.0))
    } else {
        let tb = 0.5 * (sp - m) / (p - 1.0 - m);
        (FinalCase::BelowEdge, tb, theta_for((sp - m) - tb * (p - 1.0 - m)))
    };
    Ok(FinalBarrierChoice {
        theta,
        theta_bar,
        case,
        exponent: final_exponent(params, theta, theta_bar),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pp(n: u32, s: f64, p: f64, t: f64, m: f64) -> ProblemParams {
        ProblemParams::new(n, s, p, t, m).unwrap()
    }

    #[test]
    fn ctheta_at_zero_is_exact() {
        let e = estimate_ctheta(&pp(3, 0.4, 2.5, 0.0, 0.0), 0.0, &QuadratureConfig::default()).unwrap();
        assert_eq!((e.value, e.spread), (0.0, 0.0));
        assert_eq!(e.verdict, SignVerdict::Indeterminate);
    }

    #[test]
    fn ctheta_sign_below_zero_point() {
        let params = pp(2, 0.5, 3.0, 0.0, 0.0);
        let e = estimate_ctheta(&params, 0.1, &QuadratureConfig::default()).unwrap();
        assert_eq!(e.verdict, SignVerdict::Positive);
        assert!(e.spread <= 1e-8 * e.value.abs());
    }

    #[test]
    fn ctheta_indeterminate_at_zero_point() {
        let cfg = QuadratureConfig::default();
        let params = pp(2, 0.5, 2.0, 0.0, 0.0);
        let e = estimate_ctheta(&params, 1.0, &cfg).unwrap();
        assert_eq!(e.verdict, SignVerdict::Indeterminate);
        assert!(e.value.abs() <= e.noise_floor(cfg.rel_tol));
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1.0, 1e4, 4);
        assert_eq!(g.len(), 17);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[16], 1e4);
        assert_relative_eq!(g[4], 10.0, max_relative = 1e-14);
    }

    #[test]
    fn eps0_precondition() {
        let params = pp(2, 0.5, 2.0, 0.0, 0.0);
        let cfg = QuadratureConfig::default();
        assert!(matches!(select_eps0(&params, 1.0, &cfg), Err(Error::Precondition(_))));
        assert!(matches!(select_eps0(&params, 0.5, &cfg), Err(Error::Precondition(_))));
    }

    #[test]
    fn eps0_near_theta_max() {
        let params = pp(2, 0.5, 2.0, 0.0, 0.0);
        let cfg = QuadratureConfig::default();
        let sel = select_eps0(&params, 1.9, &cfg).unwrap();
        assert!(sel.values.iter().all(|v| *v < 0.0));
        assert_eq!(sel.margin_profile.last().unwrap().0, sel.eps0);
    }

    #[test]
    fn theta_bar_examples() {
        let c = select_theta_bar(&pp(2, 0.75, 2.0, 0.1, 0.0)).unwrap();
        assert_eq!(c.case, FinalCase::AboveEdge);
        assert_eq!(c.theta, 1.0);
        assert!(0.1 * c.theta < 0.5);
        let c = select_theta_bar(&pp(2, 0.5, 1.5, 0.05, 0.3)).unwrap();
        assert_eq!(c.case, FinalCase::AboveEdge);
        assert!(c.exponent < 0.0);
        let c = select_theta_bar(&pp(2, 0.25, 2.0, 0.1, 0.2)).unwrap();
        assert_eq!(c.case, FinalCase::BelowEdge);
        assert_relative_eq!(c.theta_bar, 0.1875, max_relative = 1e-14);
        assert!(c.theta_bar * 0.8 - 0.3 + 0.1 * c.theta < 0.0);
        let c = select_theta_bar(&pp(3, 0.5, 2.0, 0.2, 0.5)).unwrap();
        assert_eq!(c.case, FinalCase::OnEdge);
        assert!(0.2 * c.theta < (1.0 - c.theta_bar) * 0.5);
        assert!(select_theta_bar(&pp(3, 0.5, 2.0, 3.0, 0.0)).is_err());
    }

    #[test]
    fn final_barrier_rejects_bad_exponent() {
        let params = pp(2, 0.25, 2.0, 0.1, 0.2);
        let cfg = QuadratureConfig::default();
        // theta_bar close to (sp - m)/(p - 1 - m) = 0.375 with a large theta.
        let err = verify_final_barrier(&params, 1.0, 0.37, 1.0, &cfg);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn step_with_violated_exponents_has_no_threshold() {
        let params = pp(3, 0.5, 2.0, 3.0, 0.0);
        let cfg = QuadratureConfig::default();
        let rep = verify_step(&params, 2.0, 1.0, 1.0, &cfg).unwrap();
        assert!(rep.exponent_slack < 0.0);
        assert_eq!(rep.empirical_threshold, None);
        assert_eq!(rep.margins.len(), rep.r_grid.len());
    }

    #[test]
    fn step_without_source_terms_has_threshold() {
        let params = pp(2, 0.5, 2.0, 0.0, 0.0);
        let cfg = QuadratureConfig::default();
        let rep = verify_step(&params, 1.0, 0.5, 1.0, &cfg).unwrap();
        let t = rep.empirical_threshold.expect("threshold");
        assert!(rep.r_grid.contains(&t));
        assert!(rep.positive_beyond_threshold());
    }
}
