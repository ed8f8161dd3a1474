//! JSON and CSV writers. Every file is produced from already-computed values
//! in a fixed order so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use fplap_core::barriers::BarrierReport;
use fplap_core::ImprovementSchedule;
use serde::Serialize;

use crate::report::{CthetaRow, OracleRow, Report};

/// Shortest round-trip decimal form, scientific when that is shorter.
fn num(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&x).unwrap_or_else(|_| x.to_string())
    } else {
        x.to_string()
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

/// Prints `value` as JSON and, when a directory is given, also writes it there.
pub fn emit_json<T: Serialize>(dir: Option<&Path>, name: &str, value: &T) -> Result<()> {
    let text = to_json(value)?;
    if let Some(dir) = dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join(name), &text)?;
    }
    std::io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

pub fn write_ctheta_csv(dir: &Path, rows: &[CthetaRow]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("ctheta.csv"))?;
    w.write_record(["theta", "value", "spread", "verdict"])?;
    for row in rows {
        let e = &row.estimate;
        w.write_record([
            num(e.theta),
            num(e.value),
            num(e.spread),
            serde_json::to_value(e.verdict)?.as_str().unwrap_or_default().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One block of rows per report; a leading `barrier` column appears only
/// when several reports share the file.
pub fn write_margins_csv(dir: &Path, reports: &[(Option<&str>, &BarrierReport)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let labelled = reports.iter().any(|(label, _)| label.is_some());
    let mut w = csv::Writer::from_path(dir.join("margins.csv"))?;
    let mut header = vec!["r", "lhs", "rhs", "margin"];
    if labelled {
        header.insert(0, "barrier");
    }
    w.write_record(&header)?;
    for (label, rep) in reports {
        for i in 0..rep.r_grid.len() {
            let mut record = vec![
                num(rep.r_grid[i]),
                num(rep.lhs[i]),
                num(rep.rhs[i]),
                num(rep.margins[i]),
            ];
            if labelled {
                record.insert(0, label.unwrap_or_default().to_string());
            }
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Row `i` carries `sigma_i` and the slack of the step `sigma_i -> sigma_{i+1}`.
pub fn write_schedule_csv(dir: &Path, schedule: &ImprovementSchedule) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("schedule.csv"))?;
    w.write_record(["i", "sigma", "slack", "case"])?;
    for (i, sigma) in schedule.sigmas.iter().enumerate() {
        let slack = schedule.certificates.get(i).map_or(String::new(), |c| num(*c));
        w.write_record([i.to_string(), num(*sigma), slack, schedule.case_label.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn certificate_table(schedule: &ImprovementSchedule) -> String {
    let mut out = format!(
        "{} schedule, {} exponents, delta = {:.6e}{}\n{:>6}  {:>22}  {:>22}\n",
        schedule.case_label,
        schedule.sigmas.len(),
        schedule.delta,
        schedule.epsilon.map_or(String::new(), |e| format!(", epsilon = {e:.6e}")),
        "i",
        "sigma",
        "slack"
    );
    for (i, sigma) in schedule.sigmas.iter().enumerate() {
        let slack = schedule.certificates.get(i).map_or(String::from("-"), |c| format!("{c:.15e}"));
        let _ = writeln!(out, "{i:>6}  {sigma:>22.15e}  {slack:>22}");
    }
    out
}

const ORACLE_HEADER: [&str; 9] = [
    "profile", "r", "eval", "eval_error", "mc", "mc_stderr", "grid", "grid_bracket", "agrees",
];

fn oracle_records(rows: &[OracleRow]) -> Result<Vec<Vec<String>>> {
    rows.iter()
        .map(|row| {
            Ok(vec![
                serde_json::to_string(&row.profile)?,
                num(row.r),
                num(row.eval_value),
                num(row.eval_error),
                num(row.mc.value),
                num(row.mc.stderr),
                row.grid.map_or(String::new(), |g| num(g.value)),
                row.grid.map_or(String::new(), |g| num(g.stderr)),
                row.agrees.to_string(),
            ])
        })
        .collect()
}

pub fn write_oracle_csv(path: &Path, rows: &[OracleRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ORACLE_HEADER)?;
    for record in oracle_records(rows)? {
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn print_oracle_csv(rows: &[OracleRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(std::io::stdout());
    w.write_record(ORACLE_HEADER)?;
    for record in oracle_records(rows)? {
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report(dir: &Path, report: &Report) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), to_json(report)?)?;
    write_ctheta_csv(dir, &report.ctheta)?;
    if let Some(section) = &report.schedule.body {
        write_schedule_csv(dir, &section.schedule)?;
    }
    if let Some(section) = &report.barriers.body {
        let reports: Vec<(Option<&str>, &BarrierReport)> = section
            .rows
            .iter()
            .map(|row| (Some(row.label.as_str()), &row.report))
            .collect();
        write_margins_csv(dir, &reports)?;
    }
    if let Some(rows) = &report.oracle.body {
        write_oracle_csv(&dir.join("oracle.csv"), rows)?;
    }
    Ok(())
}
