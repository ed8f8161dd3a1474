//! Evaluation of `(-Delta_p)^s f(|x|)` at a single radius.
//!
//! After the spherical reduction and the substitution `rho = r tau`,
//!
//! ```text
//! (-Delta_p)^s f(r) = r^{-sp} PV int_0^inf J_p(f(r) - f(r tau)) tau^{N-1} A(1, tau) dtau.
//! ```
//!
//! The `tau` axis is split into five regions:
//!
//! * origin `(0, eta]` and tail `[Lambda, inf)`, integrated in a variable
//!   `w = tau^{+-rate}` that maps them onto bounded intervals with a bounded
//!   integrand (evaluated in the log domain);
//! * bulk below `[eta, 1 - delta]` and bulk above `[1 + delta, Lambda]`,
//!   integrated in `y = ln tau`;
//! * the diagonal window `[1 - delta, 1 + delta]`, where the principal value
//!   is realised by pairing `1 + h` with `1 - h`. The paired integrand
//!   behaves like `h^{p-1-sp}`, which is integrable because `sp < p`.

mod profile;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ProblemParams;
use crate::quadrature::{self, Integral};
use crate::radial_reduction::{AngularKernelSpec, RadialKernel};

pub use profile::{eval_gradient_norm, RadialProfile, SignedLog};

/// Upper end of the origin region in `tau`.
const ORIGIN_EDGE: f64 = 0.25;
/// Dyadic levels used to grade the diagonal window and the mapped end regions.
const DIAGONAL_LEVELS: i32 = 24;
const END_LEVELS: i32 = 64;
/// Panel widths in `y = ln tau` for the bulk regions.
const BULK_BELOW_WIDTH: f64 = 0.25;
const BULK_ABOVE_WIDTH: f64 = 0.5;
/// Relative distance from a kink inside which evaluation is refused.
const KINK_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    /// Relative half-width of the symmetrised window around `rho = r`.
    pub delta_diag: f64,
    /// Start of the tail region, as a multiple of `r`.
    pub lambda_tail: f64,
    /// Target relative accuracy, measured against the integral of `|integrand|`.
    pub rel_tol: f64,
    /// Panel budget per region.
    pub max_panels: usize,
    /// Panel budget of the angular kernel quadrature.
    pub angular_nodes: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            delta_diag: 0.1,
            lambda_tail: 1e3,
            rel_tol: 1e-6,
            max_panels: 2000,
            angular_nodes: 256,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: String| Err(Error::InvalidParams { field, reason });
        if !(self.delta_diag > 0.0 && self.delta_diag < 1.0) {
            return bad("delta_diag", format!("must lie in (0, 1), got {}", self.delta_diag));
        }
        if !(self.lambda_tail > 10.0 && self.lambda_tail.is_finite()) {
            return bad("lambda_tail", format!("must exceed 10, got {}", self.lambda_tail));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return bad("rel_tol", format!("must lie in (0, 1), got {}", self.rel_tol));
        }
        if self.max_panels < 1 {
            return bad("max_panels", "must be positive".into());
        }
        if self.angular_nodes < AngularKernelSpec::MIN_ANGULAR_NODES {
            return bad(
                "angular_nodes",
                format!(
                    "must be at least {}, got {}",
                    AngularKernelSpec::MIN_ANGULAR_NODES,
                    self.angular_nodes
                ),
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Breakdown {
    pub origin: f64,
    pub bulk_below: f64,
    pub diagonal: f64,
    pub bulk_above: f64,
    pub tail: f64,
}

impl Breakdown {
    pub fn total(&self) -> f64 {
        self.origin + self.bulk_below + self.diagonal + self.bulk_above + self.tail
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub value: f64,
    pub error_estimate: f64,
    pub breakdown: Breakdown,
    /// Integral of the absolute integrand; the scale `rel_tol` refers to.
    pub magnitude: f64,
    pub tolerance_met: bool,
    /// Set for a truncated profile evaluated inside its plateau.
    pub inside_plateau: bool,
    pub panels: usize,
}

impl EvalResult {
    fn zero() -> Self {
        EvalResult {
            value: 0.0,
            error_estimate: 0.0,
            breakdown: Breakdown::default(),
            magnitude: 0.0,
            tolerance_met: true,
            inside_plateau: false,
            panels: 0,
        }
    }
}

fn j_p(w: f64, p: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w.signum() * w.abs().powf(p - 1.0)
    }
}

struct Setup<'a> {
    profile: &'a RadialProfile,
    kernel: &'a RadialKernel,
    r: f64,
    n: f64,
    p: f64,
    sp: f64,
}

impl Setup<'_> {
    /// `ln` of the `dy` weight: `tau^N A(1, tau)` below 1, `tau^{-sp} A(1, 1/tau)` above.
    fn ln_weight(&self, y: f64) -> f64 {
        if y < 0.0 {
            self.n * y + self.kernel.inner(y.exp_m1()).ln()
        } else {
            -self.sp * y + self.kernel.inner((-y).exp_m1()).ln()
        }
    }

    /// Integrand in `y` times `exp(-shift)`, evaluated in the log domain.
    fn scaled_integrand(&self, y: f64, shift: f64) -> f64 {
        let d = self.profile.ln_increment(self.r, y);
        if d.sign == 0.0 {
            return 0.0;
        }
        d.sign * ((self.p - 1.0) * d.ln_abs + self.ln_weight(y) - shift).exp()
    }

    /// Paired diagonal integrand `G(h) = F(1+h) K(1+h) + F(1-h) K(1-h)`.
    fn paired(&self, h: f64) -> f64 {
        let f_up = j_p(self.profile.increment(self.r, h.ln_1p()), self.p);
        let f_dn = j_p(self.profile.increment(self.r, (-h).ln_1p()), self.p);
        let mut g = 0.0;
        if f_up != 0.0 {
            g += f_up * (1.0 + h).powf(-1.0 - self.sp) * self.kernel.inner(-h / (1.0 + h));
        }
        if f_dn != 0.0 {
            g += f_dn * (1.0 - h).powf(self.n - 1.0) * self.kernel.inner(-h);
        }
        g
    }
}

/// Evaluates `(-Delta_p)^s f` at radius `r` with an a-posteriori error bound.
pub fn eval_flap(
    profile: &RadialProfile,
    params: &ProblemParams,
    r: f64,
    cfg: &QuadratureConfig,
) -> Result<EvalResult> {
    cfg.validate()?;
    profile.validate(params)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::precondition(format!("radius must be positive, got {r}")));
    }
    if profile.is_constant() {
        return Ok(EvalResult::zero());
    }
    let kink_tau = profile.kink().map(|k| k / r);
    if let Some(kt) = kink_tau {
        if (kt - 1.0).abs() <= KINK_GUARD {
            return Err(Error::precondition(format!(
                "radius {r} coincides with the truncation radius"
            )));
        }
    }
    let inside_plateau = matches!(kink_tau, Some(kt) if kt > 1.0);

    let spec = AngularKernelSpec::new(params.n(), params.dim() + params.sp(), cfg.angular_nodes)?;
    let kernel = RadialKernel::shared(spec);
    let setup = Setup {
        profile,
        kernel: &kernel,
        r,
        n: params.dim(),
        p: params.p(),
        sp: params.sp(),
    };

    let delta = cfg.delta_diag;
    let eta = ORIGIN_EDGE.min(0.5 * (1.0 - delta));
    let lambda = cfg.lambda_tail;
    let tol = cfg.rel_tol;
    let budget = cfg.max_panels;
    let ln_kink = kink_tau.map(f64::ln);

    // Origin: w = tau^{rate}, dy = dw / (rate w).
    let rate0 = setup.n - profile.origin_blowup(setup.p);
    let origin = mapped_end(
        |w| {
            let y = w.ln() / rate0;
            setup.scaled_integrand(y, rate0 * y) / rate0
        },
        (rate0 * eta.ln()).exp(),
        ln_kink.filter(|&lk| lk < eta.ln()).map(|lk| (rate0 * lk).exp()),
        tol,
        budget,
    );

    // Tail: w = tau^{-rate}, dy = -dw / (rate w).
    let rate_inf = setup.sp - profile.tail_growth(setup.p);
    let tail = mapped_end(
        |w| {
            let y = -w.ln() / rate_inf;
            setup.scaled_integrand(y, -rate_inf * y) / rate_inf
        },
        (-rate_inf * lambda.ln()).exp(),
        ln_kink
            .filter(|&lk| lk > lambda.ln())
            .map(|lk| (-rate_inf * lk).exp()),
        tol,
        budget,
    );

    let extra: Vec<f64> = ln_kink.into_iter().collect();
    let below_breaks = quadrature::with_breaks(
        quadrature::uniform(eta.ln(), (-delta).ln_1p(), BULK_BELOW_WIDTH),
        &extra,
    );
    let bulk_below = quadrature::integrate(
        |y| setup.scaled_integrand(y, 0.0),
        &below_breaks,
        tol,
        budget,
    );
    let above_breaks = quadrature::with_breaks(
        quadrature::uniform(delta.ln_1p(), lambda.ln(), BULK_ABOVE_WIDTH),
        &extra,
    );
    let bulk_above = quadrature::integrate(
        |y| setup.scaled_integrand(y, 0.0),
        &above_breaks,
        tol,
        budget,
    );

    let diagonal = diagonal_window(&setup, delta, kink_tau, tol, budget);

    let scale = r.powf(-setup.sp);
    let regions = [origin, bulk_below, diagonal, bulk_above, tail];
    let breakdown = Breakdown {
        origin: scale * origin.value,
        bulk_below: scale * bulk_below.value,
        diagonal: scale * diagonal.value,
        bulk_above: scale * bulk_above.value,
        tail: scale * tail.value,
    };
    let value = breakdown.total();
    let error_estimate = scale * regions.iter().map(|g| g.error).sum::<f64>();
    let magnitude = scale * regions.iter().map(|g| g.abs_value).sum::<f64>();
    if !value.is_finite() || !error_estimate.is_finite() {
        return Err(Error::EstimatorUnstable(format!(
            "non-finite quadrature result at r = {r} for {profile:?}"
        )));
    }
    Ok(EvalResult {
        value,
        error_estimate,
        breakdown,
        magnitude,
        tolerance_met: regions.iter().all(|g| g.converged)
            && error_estimate <= tol * magnitude.max(f64::MIN_POSITIVE),
        inside_plateau,
        panels: regions.iter().map(|g| g.panels).sum(),
    })
}

/// Integrates a bounded mapped integrand over `(0, w0]`, grading dyadically
/// towards 0 and bounding the skipped sliver `(0, w_min]` by `|S(w_min)| w_min`.
fn mapped_end<F: Fn(f64) -> f64>(
    f: F,
    w0: f64,
    kink: Option<f64>,
    tol: f64,
    budget: usize,
) -> Integral {
    let mut breaks: Vec<f64> = (0..=END_LEVELS).rev().map(|k| w0 * 2f64.powi(-k)).collect();
    breaks = quadrature::with_breaks(breaks, &kink.into_iter().collect::<Vec<_>>());
    let w_min = breaks[0];
    let mut out = quadrature::integrate(&f, &breaks, tol, budget.max(2 * breaks.len()));
    let sliver = f(w_min).abs() * w_min;
    out.error += sliver;
    out.abs_value += sliver;
    out
}

fn diagonal_window(
    setup: &Setup<'_>,
    delta: f64,
    kink_tau: Option<f64>,
    tol: f64,
    budget: usize,
) -> Integral {
    let mut breaks: Vec<f64> = (0..=DIAGONAL_LEVELS)
        .rev()
        .map(|k| delta * 2f64.powi(-k))
        .collect();
    if let Some(kt) = kink_tau {
        breaks = quadrature::with_breaks(breaks, &[(kt - 1.0).abs()]);
    }
    let h_min = breaks[0];
    let mut out = quadrature::integrate(
        |h| setup.paired(h),
        &breaks,
        tol,
        budget.max(2 * breaks.len()),
    );
    // Endpoint piece on (0, h_min] from the model G(h) ~ c h^beta.
    let beta = setup.p - 1.0 - setup.sp;
    let g1 = setup.paired(h_min);
    let g2 = setup.paired(0.5 * h_min);
    let c1 = g1 / h_min.powf(beta);
    let c2 = g2 / (0.5 * h_min).powf(beta);
    let mass = h_min.powf(beta + 1.0) / (beta + 1.0);
    out.value += c1 * mass;
    out.abs_value += c1.abs() * mass;
    out.error += (c1 - c2).abs() * mass + 1e-14 * c1.abs() * mass;
    out
}
