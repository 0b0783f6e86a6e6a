//! Scenario files, run summaries and CSV export.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{build_report, StabilityReport};
use crate::dither::{DitherPlan, Rational};
use crate::error::{Error, Result};
use crate::game::{PlayerPayoff, QuadraticGame};
use crate::sim::{Integrator, Mode, ScenarioConfig, Trajectory};
use crate::trigger::{inter_event_stats, TriggerPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    pub total_demand: f64,
    pub price_sensitivity: f64,
    pub m1: f64,
    pub m2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameSpec {
    Market(MarketSpec),
    Players([PlayerPayoff; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DitherSpec {
    pub amplitudes: [f64; 2],
    /// `[numerator, denominator]` per player.
    pub frequencies: [[i64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerSpec {
    pub sigma: [f64; 2],
}

fn default_stride() -> usize {
    1
}

/// On-disk scenario layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub game: GameSpec,
    pub dither: DitherSpec,
    pub trigger: TriggerSpec,
    pub gains: [f64; 2],
    pub theta_hat0: [f64; 2],
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub baseline_h: Option<f64>,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub continuous_control: bool,
}

impl ScenarioFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })
    }

    pub fn into_config(&self) -> Result<ScenarioConfig> {
        let game = match &self.game {
            GameSpec::Market(m) => {
                QuadraticGame::duopoly_from_market(m.total_demand, m.price_sensitivity, m.m1, m.m2)
                    .map_err(|e| Error::validation("game.market", e.to_string()))?
            }
            GameSpec::Players([p1, p2]) => QuadraticGame::new(*p1, *p2).map_err(|e| match e {
                Error::Validation { field, reason } => Error::validation(format!("game.players.{field}"), reason),
                other => other,
            })?,
        };
        let freqs = self.dither.frequencies.iter().map(|[n, d]| {
            if *d == 0 {
                Err(Error::validation("dither.frequencies", "zero denominator"))
            } else {
                Ok(Rational::new(*n, *d))
            }
        });
        let freqs: Vec<Rational> = freqs.collect::<Result<_>>()?;
        let dither = DitherPlan::new(self.dither.amplitudes, [freqs[0], freqs[1]]).map_err(|e| {
            let field = if e.to_string().contains("amplitude") {
                "dither.amplitudes"
            } else {
                "dither.frequencies"
            };
            Error::validation(field, e.to_string())
        })?;
        let policy =
            TriggerPolicy::new(self.trigger.sigma).map_err(|e| Error::validation("trigger.sigma", e.to_string()))?;
        let config = ScenarioConfig {
            game,
            dither,
            policy,
            gains: self.gains,
            theta_hat0: self.theta_hat0,
            dt: self.dt,
            t_final: self.t_final,
            mode: self.mode,
            baseline_h: self.baseline_h,
            record_stride: self.record_stride,
            integrator: self.integrator,
            continuous_control: self.continuous_control,
        };
        config.validate()?;
        Ok(config)
    }

    /// SHA-256 of the canonical JSON rendering.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("scenario serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

pub fn load_scenario_file(path: &Path) -> Result<ScenarioFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ScenarioFile::parse(&text, &path.display().to_string())
}

/// Reads, parses and validates a scenario.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    load_scenario_file(path)?.into_config()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub final_theta: [f64; 2],
    pub final_theta_hat: [f64; 2],
    /// `‖θ̂(t_final) − θ*‖`.
    pub final_residual: Option<f64>,
    pub event_counts: [usize; 2],
    pub min_gap: [Option<f64>; 2],
    pub mean_gap: [Option<f64>; 2],
    pub max_overshoot: [f64; 2],
    pub time_scale: f64,
    pub stability: Option<StabilityReport>,
    pub config_hash: String,
}

impl RunSummary {
    pub fn new(traj: &Trajectory, config_hash: String) -> Result<Self> {
        let s0 = inter_event_stats(&traj.event_logs[0])?;
        let s1 = inter_event_stats(&traj.event_logs[1])?;
        let final_residual = traj.theta_star().map(|ts| (traj.final_theta_hat() - ts).norm());
        Ok(Self {
            mode: traj.meta.mode,
            final_theta: traj.last.theta,
            final_theta_hat: traj.last.theta_hat,
            final_residual,
            event_counts: [s0.count, s1.count],
            min_gap: [s0.min_gap, s1.min_gap],
            mean_gap: [s0.mean_gap, s1.mean_gap],
            max_overshoot: traj.max_overshoot,
            time_scale: traj.time_scale,
            stability: build_report(&traj.meta).ok(),
            config_hash,
        })
    }
}

/// 17 significant digits, `.` separator, independent of locale.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub const TRAJECTORY_COLUMNS: [&str; 13] = [
    "t", "theta1", "theta2", "theta_hat1", "theta_hat2", "g_hat1", "g_hat2", "e1", "e2", "u1", "u2", "J1", "J2",
];

/// Trajectory table; `theta_tilde1,theta_tilde2` are appended when `θ*` exists.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let theta_star = traj.theta_star();
    let mut out = TRAJECTORY_COLUMNS.join(",");
    if theta_star.is_some() {
        out.push_str(",theta_tilde1,theta_tilde2");
    }
    out.push('\n');
    for s in &traj.samples {
        let row = [
            s.t,
            s.theta[0],
            s.theta[1],
            s.theta_hat[0],
            s.theta_hat[1],
            s.g_hat[0],
            s.g_hat[1],
            s.e[0],
            s.e[1],
            s.u[0],
            s.u[1],
            s.j[0],
            s.j[1],
        ];
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&fmt_f64(v));
        }
        if let Some(ts) = theta_star {
            let _ = write!(
                out,
                ",{},{}",
                fmt_f64(s.theta_hat[0] - ts[0]),
                fmt_f64(s.theta_hat[1] - ts[1])
            );
        }
        out.push('\n');
    }
    out
}

pub fn events_csv(times: &[f64]) -> String {
    let mut out = String::from("t\n");
    for t in times {
        out.push_str(&fmt_f64(*t));
        out.push('\n');
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `trajectory.csv`, `events_p1.csv`, `events_p2.csv` and `summary.json`.
pub fn write_run_outputs(out_dir: &Path, traj: &Trajectory, summary: &RunSummary) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write(&out_dir.join("trajectory.csv"), &trajectory_csv(traj))?;
    write(&out_dir.join("events_p1.csv"), &events_csv(&traj.event_logs[0]))?;
    write(&out_dir.join("events_p2.csv"), &events_csv(&traj.event_logs[1]))?;
    let json = serde_json::to_string_pretty(summary).expect("summary serializes");
    write(&out_dir.join("summary.json"), &json)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BENCH: &str = include_str!("../scenarios/benchmark.json");

    #[test]
    fn bundled_benchmark_loads() {
        let f = ScenarioFile::parse(BENCH, "benchmark.json").unwrap();
        let c = f.into_config().unwrap();
        assert_eq!(c.dither.amplitudes(), [0.075, 0.050]);
        assert_eq!(c.gains, [2.0, 5.0]);
        assert_eq!(c.dither.frequencies(), [Rational::from_integer(27), Rational::from_integer(22)]);
        assert_eq!(c.policy.sigma(), [0.85, 0.95]);
        assert_eq!(c.theta_hat0, [50.0, 110.0 / 3.0]);
        assert_eq!(c.mode, Mode::Full);
    }

    #[test]
    fn sigma_out_of_range_names_field() {
        let text = BENCH.replace("[0.85, 0.95]", "[1.5, 0.95]");
        let err = ScenarioFile::parse(&text, "x").unwrap().into_config().unwrap_err();
        match err {
            Error::Validation { field, .. } => assert_eq!(field, "trigger.sigma"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn equal_frequencies_name_field() {
        let text = BENCH.replace("[22, 1]", "[27, 1]");
        let err = ScenarioFile::parse(&text, "x").unwrap().into_config().unwrap_err();
        match err {
            Error::Validation { field, .. } => assert_eq!(field, "dither.frequencies"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(
            ScenarioFile::parse("{ \"game\": ", "x"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            ScenarioFile::parse(&BENCH.replace("\"dt\"", "\"dtt\""), "x"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ScenarioFile::parse(BENCH, "a").unwrap();
        let b = ScenarioFile::parse(&BENCH.replace("    ", "  "), "b").unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
        let c = ScenarioFile::parse(&BENCH.replace("0.001", "0.002"), "c").unwrap();
        assert_ne!(a.config_hash(), c.config_hash());
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.5), "-2.5000000000000000e0");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
