//! Command implementations behind the `nes-etc` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::analysis::{build_report, StabilityReport};
use crate::dither::rational_from_f64;
use crate::error::{Error, Result};
use crate::parallel;
use crate::scenario::{fmt_f64, load_scenario_file, write_run_outputs, RunSummary};
use crate::sim::{run, Mode, ScenarioConfig};
use crate::trigger::inter_event_stats;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_SIMULATION: i32 = 4;

/// Process exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. } | Error::Validation { .. } => EXIT_INPUT,
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_SIMULATION,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOverrides {
    pub mode: Option<Mode>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
}

pub fn cmd_run(scenario: &Path, out_dir: &Path, overrides: RunOverrides) -> Result<RunSummary> {
    let mut file = load_scenario_file(scenario)?;
    if let Some(mode) = overrides.mode {
        file.mode = mode;
    }
    if let Some(dt) = overrides.dt {
        file.dt = dt;
    }
    if let Some(t_final) = overrides.t_final {
        file.t_final = t_final;
    }
    let config = file.into_config()?;
    let traj = run(&config)?;
    let summary = RunSummary::new(&traj, file.config_hash())?;
    write_run_outputs(out_dir, &traj, &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    OmegaScale,
    SigmaScale,
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "omega_scale" => Ok(SweepParam::OmegaScale),
            "sigma_scale" => Ok(SweepParam::SigmaScale),
            other => Err(format!("unknown sweep parameter `{other}` (expected omega_scale or sigma_scale)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub final_residual: Option<f64>,
    pub event_counts: [usize; 2],
    pub min_gap: [Option<f64>; 2],
}

pub fn parse_values(csv: &str) -> Result<Vec<f64>> {
    csv.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| Error::validation("values", format!("`{s}`: {e}")))
        })
        .collect()
}

/// Scenario variant for one sweep value.
pub fn sweep_config(base: &ScenarioConfig, param: SweepParam, value: f64) -> Result<ScenarioConfig> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::validation("values", format!("scale must be positive, got {value}")));
    }
    let mut config = base.clone();
    match param {
        SweepParam::OmegaScale => {
            let factor = rational_from_f64(value)
                .ok_or_else(|| Error::validation("values", format!("{value} has no rational form")))?;
            config.dither = base
                .dither
                .with_frequency_scale(factor)
                .map_err(|e| Error::validation("values", e.to_string()))?;
        }
        SweepParam::SigmaScale => {
            config.policy = base
                .policy
                .scaled(value)
                .map_err(|e| Error::validation("values", e.to_string()))?;
        }
    }
    config.validate()?;
    Ok(config)
}

pub fn sweep(base: &ScenarioConfig, param: SweepParam, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::validation("values", "at least one value is required"));
    }
    let configs = values
        .iter()
        .map(|&v| sweep_config(base, param, v))
        .collect::<Result<Vec<_>>>()?;
    let rows = parallel::map(&configs, |config| -> Result<SweepRow> {
        let traj = run(config)?;
        let s = [inter_event_stats(&traj.event_logs[0])?, inter_event_stats(&traj.event_logs[1])?];
        Ok(SweepRow {
            value: 0.0,
            final_residual: traj.theta_star().map(|ts| (traj.final_theta_hat() - ts).norm()),
            event_counts: [s[0].count, s[1].count],
            min_gap: [s[0].min_gap, s[1].min_gap],
        })
    });
    rows.into_iter()
        .zip(values)
        .map(|(row, &value)| row.map(|r| SweepRow { value, ..r }))
        .collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("value,final_residual,event_count_1,event_count_2,min_gap_1,min_gap_2\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(r.value),
            opt(r.final_residual),
            r.event_counts[0],
            r.event_counts[1],
            opt(r.min_gap[0]),
            opt(r.min_gap[1]),
        );
    }
    out
}

pub fn cmd_sweep(scenario: &Path, param: SweepParam, values: &[f64], out_dir: &Path) -> Result<Vec<SweepRow>> {
    let config = load_scenario_file(scenario)?.into_config()?;
    let rows = sweep(&config, param, values)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let path = out_dir.join("sweep.csv");
    fs::write(&path, sweep_csv(&rows)).map_err(|e| Error::io(&path, e))?;
    Ok(rows)
}

pub fn cmd_report(scenario: &Path) -> Result<StabilityReport> {
    let config = load_scenario_file(scenario)?.into_config()?;
    build_report(&config)
}
