//! Parameter tuple `(N, s, p, t, m)`, the critical exponents derived from it,
//! and classification against the Liouville theorem's hypotheses.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used to detect the knife edge `sp = p - 1`.
///
/// Products such as `s * p` carry a rounding error of a few ulps, so the
/// equality test is made at this scale rather than bit-exactly.
pub const KNIFE_EDGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ProblemParams {
    n: u32,
    s: f64,
    p: f64,
    t: f64,
    m: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawParams {
    n: u32,
    s: f64,
    p: f64,
    t: f64,
    m: f64,
}

impl TryFrom<RawParams> for ProblemParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ProblemParams::new(raw.n, raw.s, raw.p, raw.t, raw.m)
    }
}

impl From<ProblemParams> for RawParams {
    fn from(p: ProblemParams) -> Self {
        RawParams {
            n: p.n,
            s: p.s,
            p: p.p,
            t: p.t,
            m: p.m,
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParams {
        field,
        reason: reason.into(),
    }
}

impl ProblemParams {
    /// Builds a parameter tuple, rejecting anything outside
    /// `N >= 2`, `0 < s < 1 < p`, `t >= 0`, `m >= 0`.
    ///
    /// `N > sp` is deliberately not required here; [`classify`] reports it.
    pub fn new(n: u32, s: f64, p: f64, t: f64, m: f64) -> Result<Self> {
        if n < 2 {
            return Err(invalid("n", format!("dimension must be >= 2, got {n}")));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(invalid("s", format!("must lie in (0, 1), got {s}")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(invalid("p", format!("must be finite and > 1, got {p}")));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid("t", format!("must be finite and >= 0, got {t}")));
        }
        if !(m >= 0.0 && m.is_finite()) {
            return Err(invalid("m", format!("must be finite and >= 0, got {m}")));
        }
        Ok(ProblemParams { n, s, p, t, m })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn dim(&self) -> f64 {
        f64::from(self.n)
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn sp(&self) -> f64 {
        self.s * self.p
    }

    pub fn with_t(&self, t: f64) -> Result<Self> {
        Self::new(self.n, self.s, self.p, t, self.m)
    }

    pub fn with_m(&self, m: f64) -> Result<Self> {
        Self::new(self.n, self.s, self.p, self.t, m)
    }

    /// `N(p-1) - t(N-sp) - m(N-(sp-p+1))`, positive exactly when the
    /// subcriticality condition holds.
    pub fn slack(&self) -> f64 {
        let n = self.dim();
        let sp = self.sp();
        n * (self.p - 1.0) - self.t * (n - sp) - self.m * (n - (sp - self.p + 1.0))
    }

    /// Whether `sp/(p-1) > 1`, the branch in which `m <= p - 1` is allowed.
    pub fn gradient_branch_open(&self) -> bool {
        self.sp() - (self.p - 1.0) > KNIFE_EDGE_TOL
    }

    pub fn on_knife_edge(&self) -> bool {
        (self.sp() - (self.p - 1.0)).abs() <= KNIFE_EDGE_TOL
    }

    pub fn m_condition_holds(&self) -> bool {
        if self.gradient_branch_open() {
            self.m <= self.p - 1.0
        } else {
            self.m < self.sp()
        }
    }
}

impl fmt::Display for ProblemParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(N={}, s={}, p={}, t={}, m={})",
            self.n, self.s, self.p, self.t, self.m
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalExponents {
    /// `(N - sp)/(p - 1)`, the nontrivial zero of `C(theta)`.
    pub theta_zero: f64,
    /// `N/(p - 1)`, the origin-integrability limit.
    pub theta_max: f64,
    /// `sp/(p - 1)`, the growth limit for negative exponents.
    pub theta_grad: f64,
    /// `sp - p + 1`.
    pub hamilton_shift: f64,
}

pub fn critical_exponents(params: &ProblemParams) -> CriticalExponents {
    let n = params.dim();
    let sp = params.sp();
    let pm1 = params.p() - 1.0;
    CriticalExponents {
        theta_zero: (n - sp) / pm1,
        theta_max: n / pm1,
        theta_grad: sp / pm1,
        hamilton_shift: sp - params.p() + 1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `N >= 2`. Always satisfied by a constructed [`ProblemParams`].
    Dimension,
    /// `N > sp`.
    DimensionAboveSp,
    /// `m <= p-1` when `sp/(p-1) > 1`, otherwise `m < sp`.
    MCondition,
    /// `t(N-sp) + m(N-(sp-p+1)) < N(p-1)`.
    Subcriticality,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self {
            Condition::Dimension => "dimension",
            Condition::DimensionAboveSp => "N>sp",
            Condition::MCondition => "m-condition",
            Condition::Subcriticality => "subcriticality",
        };
        f.write_str(label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub in_regime: bool,
    pub failed_conditions: Vec<Condition>,
    /// Signed; reported also when out of regime.
    pub slack: f64,
}

pub fn classify(params: &ProblemParams) -> RegimeReport {
    let mut failed = Vec::new();
    if params.n() < 2 {
        failed.push(Condition::Dimension);
    }
    if !(params.dim() > params.sp()) {
        failed.push(Condition::DimensionAboveSp);
    }
    if !params.m_condition_holds() {
        failed.push(Condition::MCondition);
    }
    let slack = params.slack();
    if !(slack > 0.0) {
        failed.push(Condition::Subcriticality);
    }
    RegimeReport {
        in_regime: failed.is_empty(),
        failed_conditions: failed,
        slack,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaRegion {
    /// `theta = 0` or `theta = theta_zero`: `C(theta) = 0`.
    ZeroPoint,
    PositiveC,
    NegativeC,
    /// Outside `(-sp/(p-1), N/(p-1))`, where `C` is undefined.
    OutsideAdmissible,
}

/// Which sign `C(theta)` has according to the trichotomy for `|x|^{-theta}`.
///
/// The positive region is `min(-theta_zero, 0) < -theta < max(-theta_zero, 0)`,
/// which for `N > sp` is the interval `(0, theta_zero)`.
pub fn classify_theta(params: &ProblemParams, theta: f64) -> ThetaRegion {
    let ex = critical_exponents(params);
    if !(theta > -ex.theta_grad && theta < ex.theta_max) {
        return ThetaRegion::OutsideAdmissible;
    }
    if theta == 0.0 || theta == ex.theta_zero {
        return ThetaRegion::ZeroPoint;
    }
    let lo = (-ex.theta_zero).min(0.0);
    let hi = (-ex.theta_zero).max(0.0);
    if lo < -theta && -theta < hi {
        ThetaRegion::PositiveC
    } else {
        ThetaRegion::NegativeC
    }
}
