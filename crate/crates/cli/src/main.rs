mod config;
mod output;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use fplap_core::barriers::{select_theta_bar, verify_final_barrier_on, verify_step_on};
use fplap_core::{build_schedule, classify, critical_exponents, eval_flap, RadialProfile};

use config::{GridSpec, Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "fplap", version, about = "Fractional p-Laplacian barrier and exponent checks")]
struct Cli {
    /// JSON run configuration; every field can be overridden by a flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for JSON and CSV output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Zero every timestamp and timing so reports are byte-reproducible.
    #[arg(long, global = true)]
    fixed_clock: bool,
    #[command(flatten)]
    flags: ParamFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ParamFlags {
    /// Space dimension.
    #[arg(long, global = true)]
    n: Option<u32>,
    #[arg(long, global = true)]
    s: Option<f64>,
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true)]
    t: Option<f64>,
    #[arg(long, global = true)]
    m: Option<f64>,
    #[arg(long, global = true)]
    rel_tol: Option<f64>,
    #[arg(long, global = true)]
    delta_diag: Option<f64>,
    #[arg(long, global = true)]
    lambda_tail: Option<f64>,
    #[arg(long, global = true)]
    max_panels: Option<usize>,
    #[arg(long, global = true)]
    angular_nodes: Option<usize>,
    /// Exponent grid as `min:max:count[:log]`.
    #[arg(long, global = true, allow_hyphen_values = true, value_parser = GridSpec::parse)]
    theta_grid: Option<GridSpec>,
    /// Starting radius grid as `min:max:count[:log]`.
    #[arg(long, global = true, allow_hyphen_values = true, value_parser = GridSpec::parse)]
    r_grid: Option<GridSpec>,
    #[arg(long, global = true)]
    oracle_samples: Option<u64>,
    #[arg(long, global = true)]
    grid_nodes: Option<usize>,
    #[arg(long, global = true)]
    max_barrier_steps: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the hypotheses of the Liouville theorem.
    Classify,
    /// Print the critical exponents.
    Exponents,
    /// Scan the sign of the homogeneity constant over the exponent grid.
    Ctheta,
    /// Evaluate the operator on one radial profile at one radius.
    Eval {
        /// Profile as JSON, e.g. '{"kind":"power","theta":0.5}'.
        #[arg(long, value_parser = parse_profile)]
        profile: RadialProfile,
        #[arg(long)]
        r: f64,
    },
    /// Build the exponent-improvement schedule.
    Schedule {
        #[arg(long)]
        theta_target: Option<f64>,
    },
    /// Check one schedule step as a barrier inequality.
    VerifyBarrier {
        #[arg(long)]
        sigma_prev: f64,
        #[arg(long)]
        sigma_next: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
    },
    /// Check the final negative-power barrier.
    VerifyFinal {
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        theta_bar: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
    },
    /// Cross-check the evaluator against the full-dimensional estimators.
    OracleCheck,
    /// Run the whole pipeline and write report.json with CSV side files.
    Report,
}

fn parse_profile(text: &str) -> Result<RadialProfile, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}

/// Whether every verification verdict held.
type Verified = bool;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn overrides(cli: &Cli) -> Overrides {
    let f = &cli.flags;
    Overrides {
        n: f.n,
        s: f.s,
        p: f.p,
        t: f.t,
        m: f.m,
        rel_tol: f.rel_tol,
        delta_diag: f.delta_diag,
        lambda_tail: f.lambda_tail,
        max_panels: f.max_panels,
        angular_nodes: f.angular_nodes,
        theta_grid: f.theta_grid,
        r_grid: f.r_grid,
        oracle_samples: f.oracle_samples,
        grid_nodes: f.grid_nodes,
        max_barrier_steps: f.max_barrier_steps,
        seed: cli.seed,
        out: cli.out.clone(),
    }
}

fn out_dir(config: &RunConfig) -> Option<&Path> {
    config.output_dir.as_deref()
}

fn run(cli: &Cli) -> Result<Verified> {
    let config = RunConfig::load(cli.config.as_deref(), &overrides(cli))?;
    let params = &config.params;
    let cfg = &config.quadrature;
    let digest = report::config_digest(&config)?;
    match &cli.command {
        Command::Classify => {
            let regime = classify(params);
            eprintln!("{params}: in_regime = {}", regime.in_regime);
            output::emit_json(out_dir(&config), "classify.json", &regime)?;
            Ok(true)
        }
        Command::Exponents => {
            output::emit_json(out_dir(&config), "exponents.json", &critical_exponents(params))?;
            Ok(true)
        }
        Command::Ctheta => {
            let rows = report::ctheta_rows(&config, &digest)?;
            if let Some(dir) = out_dir(&config) {
                output::write_ctheta_csv(dir, &rows)?;
            }
            output::emit_json(out_dir(&config), "ctheta.json", &rows)?;
            Ok(rows.iter().all(|r| r.agrees))
        }
        Command::Eval { profile, r } => {
            let res = eval_flap(profile, params, *r, cfg)?;
            output::emit_json(out_dir(&config), "eval.json", &res)?;
            Ok(true)
        }
        Command::Schedule { theta_target } => {
            let target = match theta_target {
                Some(t) => *t,
                None => report::schedule_target(params)?.1,
            };
            let schedule = build_schedule(params, target)?;
            eprint!("{}", output::certificate_table(&schedule));
            if let Some(dir) = out_dir(&config) {
                output::write_schedule_csv(dir, &schedule)?;
            }
            output::emit_json(out_dir(&config), "schedule.json", &schedule)?;
            Ok(schedule.certificates.iter().all(|c| *c > 0.0))
        }
        Command::VerifyBarrier { sigma_prev, sigma_next, c } => {
            let rep = verify_step_on(params, *sigma_prev, *sigma_next, *c, &config.radius_grid(), cfg)?;
            if let Some(dir) = out_dir(&config) {
                output::write_margins_csv(dir, &[(None, &rep)])?;
            }
            let passed = rep.positive_beyond_threshold();
            output::emit_json(out_dir(&config), "barrier.json", &rep)?;
            Ok(passed)
        }
        Command::VerifyFinal { theta, theta_bar, kappa, eps } => {
            let (theta, theta_bar) = match (theta, theta_bar) {
                (Some(a), Some(b)) => (*a, *b),
                _ => {
                    let choice = select_theta_bar(params)?;
                    (theta.unwrap_or(choice.theta), theta_bar.unwrap_or(choice.theta_bar))
                }
            };
            let rep = verify_final_barrier_on(params, theta, theta_bar, *kappa, *eps, &config.radius_grid(), cfg)?;
            if let Some(dir) = out_dir(&config) {
                output::write_margins_csv(dir, &[(None, &rep)])?;
            }
            let passed = rep.positive_beyond_threshold();
            output::emit_json(out_dir(&config), "final_barrier.json", &rep)?;
            Ok(passed)
        }
        Command::OracleCheck => {
            let choice = select_theta_bar(params).ok();
            let theta_bar = choice.map_or(0.5 * (params.sp() / (params.p() - 1.0)).min(1.0), |c| c.theta_bar);
            let rows = report::oracle_rows(&config, &digest, theta_bar)?;
            match out_dir(&config) {
                Some(dir) => output::write_oracle_csv(&dir.join("oracle.csv"), &rows)?,
                None => output::print_oracle_csv(&rows)?,
            }
            Ok(rows.iter().all(|r| r.agrees))
        }
        Command::Report => {
            let rep = report::run(&config, cli.fixed_clock)?;
            let dir = config
                .output_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("fplap-report"));
            output::write_report(&dir, &rep).with_context(|| format!("writing {}", dir.display()))?;
            eprintln!(
                "{}: in_regime = {}, passed = {}, report in {}",
                params,
                rep.regime.in_regime,
                rep.verdicts.passed,
                dir.display()
            );
            Ok(rep.verdicts.passed)
        }
    }
}
