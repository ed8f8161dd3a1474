//! Numerical evaluation of the fractional p-Laplacian on radial power-type
//! barriers, with checks of the sign of its homogeneity constant, barrier
//! inequalities and the exponent-improvement schedule for the Liouville
//! problem `(-Delta_p)^s u >= u^t |grad u|^m`.

mod error;

pub mod barriers;
pub mod evaluator;
pub mod oracle;
pub mod params;
pub mod quadrature;
pub mod radial_reduction;
pub mod schedule;
pub mod special;

pub use error::{Error, Result};
pub use params::{
    classify, classify_theta, critical_exponents, Condition, CriticalExponents, ProblemParams,
    RegimeReport, ThetaRegion,
};
pub use radial_reduction::{angular_kernel, diagonal_asymptote, AngularKernelSpec, RadialKernel};
pub use evaluator::{eval_flap, eval_gradient_norm, EvalResult, QuadratureConfig, RadialProfile};
pub use barriers::{
    estimate_ctheta, scan_sign_trichotomy, select_eps0, select_theta_bar, verify_final_barrier,
    verify_step, BarrierReport, CthetaEstimate, SignVerdict,
};
pub use schedule::{
    build_schedule, choose_delta, choose_epsilon, g_map, verify_exponent_step, ImprovementSchedule,
    ScheduleCase,
};
pub use oracle::{grid_flap, mc_flap, OracleEstimate};
