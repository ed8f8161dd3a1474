//! The full pipeline run by `fplap report` and the document it produces.

use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::Result;
use fplap_core::barriers::{
    scan_sign_trichotomy, select_theta_bar, verify_final_barrier_on, verify_step_on, BarrierReport,
    CthetaEstimate, FinalBarrierChoice,
};
use fplap_core::oracle::{grid_flap, mc_flap, OracleEstimate};
use fplap_core::{
    build_schedule, classify, classify_theta, critical_exponents, eval_flap, CriticalExponents,
    ImprovementSchedule, ProblemParams, RadialProfile, RegimeReport, ThetaRegion,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub operation: &'static str,
    pub config_digest: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Section<T> {
    pub status: Status,
    pub reason: Option<String>,
    pub body: Option<T>,
}

impl<T> Section<T> {
    fn ok(body: T) -> Self {
        Section { status: Status::Ok, reason: None, body: Some(body) }
    }

    fn skipped(reason: impl Into<String>) -> Self {
        Section { status: Status::Skipped, reason: Some(reason.into()), body: None }
    }

    fn failed(reason: impl Into<String>) -> Self {
        Section { status: Status::Failed, reason: Some(reason.into()), body: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CthetaRow {
    #[serde(flatten)]
    pub estimate: CthetaEstimate,
    pub region: ThetaRegion,
    pub agrees: bool,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleSection {
    pub target: FinalBarrierChoice,
    pub schedule: ImprovementSchedule,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Serialize)]
pub struct BarrierRow {
    pub label: String,
    pub sigma_prev: Option<f64>,
    pub sigma_next: Option<f64>,
    pub report: BarrierReport,
    pub passed: bool,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Serialize)]
pub struct BarrierSection {
    pub steps_total: usize,
    pub steps_checked: usize,
    pub rows: Vec<BarrierRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleRow {
    pub profile: RadialProfile,
    pub r: f64,
    pub eval_value: f64,
    pub eval_error: f64,
    pub mc: OracleEstimate,
    pub grid: Option<OracleEstimate>,
    pub agrees: bool,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdicts {
    pub ctheta_mismatches: usize,
    pub certificate_failures: usize,
    pub barrier_failures: usize,
    pub oracle_disagreements: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: Tool,
    /// Seconds since the Unix epoch; zero under `--fixed-clock`.
    pub generated_unix_s: u64,
    pub config: RunConfig,
    pub config_digest: String,
    pub regime: RegimeReport,
    pub exponents: CriticalExponents,
    pub ctheta: Vec<CthetaRow>,
    pub schedule: Section<ScheduleSection>,
    pub barriers: Section<BarrierSection>,
    pub oracle: Section<Vec<OracleRow>>,
    pub verdicts: Verdicts,
    /// Wall-clock milliseconds per stage; zero under `--fixed-clock`.
    pub timings_ms: BTreeMap<&'static str, f64>,
}

pub fn config_digest(config: &RunConfig) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

struct Clock {
    fixed: bool,
    timings: BTreeMap<&'static str, f64>,
}

impl Clock {
    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        let ms = if self.fixed { 0.0 } else { start.elapsed().as_secs_f64() * 1e3 };
        self.timings.insert(stage, ms);
        out
    }
}

pub fn ctheta_rows(config: &RunConfig, digest: &str) -> Result<Vec<CthetaRow>> {
    let thetas = config.theta_points();
    let estimates = scan_sign_trichotomy(&config.params, &thetas, &config.quadrature)?;
    Ok(estimates
        .into_iter()
        .map(|estimate| {
            let region = classify_theta(&config.params, estimate.theta);
            CthetaRow {
                agrees: estimate.verdict.agrees_with(region),
                region,
                estimate,
                provenance: Provenance {
                    operation: "estimate_ctheta",
                    config_digest: digest.to_string(),
                },
            }
        })
        .collect())
}

/// Exponent target for the schedule: the final barrier's `theta`, capped at
/// `theta_zero`.
pub fn schedule_target(params: &ProblemParams) -> fplap_core::Result<(FinalBarrierChoice, f64)> {
    let choice = select_theta_bar(params)?;
    Ok((choice, choice.theta.min(critical_exponents(params).theta_zero)))
}

pub fn oracle_rows(config: &RunConfig, digest: &str, theta_bar: f64) -> Result<Vec<OracleRow>> {
    let params = &config.params;
    let ex = critical_exponents(params);
    let r = 2.0;
    let profiles = [
        RadialProfile::Power { theta: 0.5 * ex.theta_zero },
        RadialProfile::TruncatedPower { theta: ex.theta_zero, eps0: 0.5 },
        RadialProfile::NegativePower { eps: 1.0, theta_bar },
    ];
    let mut rows = Vec::new();
    for (i, profile) in profiles.into_iter().enumerate() {
        let e = eval_flap(&profile, params, r, &config.quadrature)?;
        let mc = mc_flap(&profile, params, r, config.oracle.samples, config.seed.wrapping_add(i as u64))?;
        let grid = if params.n() == 2 {
            Some(grid_flap(&profile, params, r, config.oracle.grid_nodes, 1e-4)?)
        } else {
            None
        };
        let close = |est: &OracleEstimate| {
            (est.value - e.value).abs() <= 3.0 * (est.stderr + e.error_estimate)
        };
        rows.push(OracleRow {
            profile,
            r,
            eval_value: e.value,
            eval_error: e.error_estimate,
            agrees: close(&mc) && grid.as_ref().is_none_or(close),
            mc,
            grid,
            provenance: Provenance {
                operation: "eval_flap vs mc_flap/grid_flap",
                config_digest: digest.to_string(),
            },
        });
    }
    Ok(rows)
}

pub fn barrier_row(label: String, sigmas: Option<(f64, f64)>, report: BarrierReport, op: &'static str, digest: &str) -> BarrierRow {
    let passed = report.positive_beyond_threshold();
    BarrierRow {
        label,
        sigma_prev: sigmas.map(|s| s.0),
        sigma_next: sigmas.map(|s| s.1),
        report,
        passed,
        provenance: Provenance {
            operation: op,
            config_digest: digest.to_string(),
        },
    }
}

pub fn run(config: &RunConfig, fixed_clock: bool) -> Result<Report> {
    let digest = config_digest(config)?;
    let params = &config.params;
    let mut clock = Clock { fixed: fixed_clock, timings: BTreeMap::new() };

    let regime = classify(params);
    let exponents = critical_exponents(params);
    let ctheta = clock.time("ctheta", || ctheta_rows(config, &digest))?;

    let planned = if regime.in_regime {
        Some(
            schedule_target(params)
                .and_then(|(choice, target)| Ok((choice, build_schedule(params, target)?))),
        )
    } else {
        None
    };

    let (schedule, barriers) = match planned {
        None => (
            Section::skipped("parameters outside the theorem's hypotheses"),
            Section::skipped("parameters outside the theorem's hypotheses"),
        ),
        Some(Err(e)) => (Section::failed(e.to_string()), Section::skipped("no schedule to check")),
        Some(Ok((choice, schedule))) => {
            let grid = config.radius_grid();
            let pairs: Vec<(f64, f64)> = schedule.pairs().collect();
            let checked = pairs.len().min(config.pipeline.max_barrier_steps);
            let rows = clock.time("barriers", || -> Result<Vec<BarrierRow>> {
                let mut rows = Vec::new();
                for (i, &(prev, next)) in pairs.iter().take(checked).enumerate() {
                    let report = verify_step_on(params, prev, next, 1.0, &grid, &config.quadrature)?;
                    rows.push(barrier_row(format!("step_{i}"), Some((prev, next)), report, "verify_step", &digest));
                }
                let report = verify_final_barrier_on(params, choice.theta, choice.theta_bar, 1.0, 1.0, &grid, &config.quadrature)?;
                rows.push(barrier_row("final".into(), None, report, "verify_final_barrier", &digest));
                Ok(rows)
            })?;
            (
                Section::ok(ScheduleSection {
                    target: choice,
                    schedule,
                    provenance: Provenance { operation: "build_schedule", config_digest: digest.clone() },
                }),
                Section::ok(BarrierSection { steps_total: pairs.len(), steps_checked: checked, rows }),
            )
        }
    };
    finish(config, digest, regime, exponents, ctheta, schedule, barriers, clock, fixed_clock)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    config: &RunConfig,
    digest: String,
    regime: RegimeReport,
    exponents: CriticalExponents,
    ctheta: Vec<CthetaRow>,
    schedule: Section<ScheduleSection>,
    barriers: Section<BarrierSection>,
    mut clock: Clock,
    fixed_clock: bool,
) -> Result<Report> {
    let params = &config.params;
    let oracle = if !matches!(params.n(), 2 | 3) {
        Section::skipped("the oracle covers N = 2 and N = 3 only")
    } else if !(exponents.theta_zero > 0.0) {
        Section::skipped("no positive exponent below theta_zero to sample")
    } else {
        let theta_bar = match &schedule.body {
            Some(s) => s.target.theta_bar,
            None => 0.5 * (params.sp() / (params.p() - 1.0)).min(1.0),
        };
        Section::ok(clock.time("oracle", || oracle_rows(config, &digest, theta_bar))?)
    };

    let certificate_failures = match (&schedule.status, &schedule.body) {
        (Status::Failed, _) => 1,
        (_, Some(s)) => s.schedule.certificates.iter().filter(|c| !(**c > 0.0)).count(),
        _ => 0,
    };
    let barrier_failures = barriers
        .body
        .as_ref()
        .map_or(0, |b| b.rows.iter().filter(|r| !r.passed).count());
    let oracle_disagreements = oracle
        .body
        .as_ref()
        .map_or(0, |rows| rows.iter().filter(|r| !r.agrees).count());
    let ctheta_mismatches = ctheta.iter().filter(|r| !r.agrees).count();
    let verdicts = Verdicts {
        passed: ctheta_mismatches + certificate_failures + barrier_failures + oracle_disagreements == 0,
        ctheta_mismatches,
        certificate_failures,
        barrier_failures,
        oracle_disagreements,
    };
    let generated_unix_s = if fixed_clock {
        0
    } else {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs())
    };
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        tool: Tool {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        },
        generated_unix_s,
        config: config.clone(),
        config_digest: digest,
        regime,
        exponents,
        ctheta,
        schedule,
        barriers,
        oracle,
        verdicts,
        timings_ms: clock.timings,
    })
}
