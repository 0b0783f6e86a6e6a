//! Closed-loop integration: event-triggered extremum seeking, its average
//! system, and the periodic sampled-data baseline.
//!
//! Every step follows trigger-then-integrate: measure at `t_n`, let each
//! player decide independently whether to rebroadcast, then advance the
//! integrators over `[t_n, t_n + dt]` with the held control.

use serde::{Deserialize, Serialize};

use crate::dither::DitherPlan;
use crate::error::{Error, Result};
use crate::game::{hurwitz_check, ActionPair, QuadraticGame};
use crate::linalg::{diag, Mat2, Vec2};
use crate::trigger::{EventMonitor, TriggerPolicy};

/// Any state magnitude above this is reported as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Full,
    Average,
    Periodic,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "full" => Ok(Mode::Full),
            "average" => Ok(Mode::Average),
            "periodic" => Ok(Mode::Periodic),
            other => Err(format!("unknown mode `{other}` (expected full, average or periodic)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Euler,
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub game: QuadraticGame,
    pub dither: DitherPlan,
    pub policy: TriggerPolicy,
    pub gains: [f64; 2],
    pub theta_hat0: [f64; 2],
    pub dt: f64,
    pub t_final: f64,
    pub mode: Mode,
    pub baseline_h: Option<f64>,
    pub record_stride: usize,
    pub integrator: Integrator,
    /// Refresh the control from the live gradient estimate every step
    /// (`e ≡ 0`) instead of using the trigger.
    pub continuous_control: bool,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::validation("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::validation(
                "t_final",
                format!("must be non-negative, got {}", self.t_final),
            ));
        }
        if self.record_stride == 0 {
            return Err(Error::validation("record_stride", "must be at least 1"));
        }
        for (i, k) in self.gains.iter().enumerate() {
            if !(*k > 0.0 && k.is_finite()) {
                return Err(Error::validation(
                    "gains",
                    format!("K_{} must be positive, got {k}", i + 1),
                ));
            }
        }
        if self.theta_hat0.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("theta_hat0", "must be finite"));
        }
        if !hurwitz_check(&self.kh()) {
            return Err(Error::validation("gains", "K*H is not Hurwitz for this game"));
        }
        if self.mode == Mode::Periodic {
            match self.baseline_h {
                Some(h) if h >= self.dt && h.is_finite() => {}
                Some(h) => {
                    return Err(Error::validation(
                        "baseline_h",
                        format!("must be at least dt = {}, got {h}", self.dt),
                    ))
                }
                None => return Err(Error::validation("baseline_h", "required in periodic mode")),
            }
        }
        if self.mode == Mode::Average && self.game.is_singular() {
            return Err(Error::SingularHessian {
                det: self.game.pseudo_hessian().determinant(),
            });
        }
        Ok(())
    }

    pub fn gain_matrix(&self) -> Mat2 {
        diag(Vec2::from(self.gains))
    }

    pub fn gain_vec(&self) -> Vec2 {
        Vec2::from(self.gains)
    }

    /// `K·H` (drives `θ̃`).
    pub fn kh(&self) -> Mat2 {
        self.gain_matrix() * self.game.pseudo_hessian()
    }

    /// `H·K` (drives `Ĝ` in the average system).
    pub fn hk(&self) -> Mat2 {
        self.game.pseudo_hessian() * self.gain_matrix()
    }

    pub fn steps(&self) -> u64 {
        (self.t_final / self.dt).round() as u64
    }

    pub fn theta_star(&self) -> Option<Vec2> {
        self.game.nash_equilibrium().ok().map(ActionPair::to_vec)
    }
}

/// Measured quantities at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub theta: Vec2,
    pub y: Vec2,
    pub g_hat: Vec2,
}

/// `θ = θ̂ + S(t)`, `y_i = J_i(θ)`, `Ĝ_i = M_i(t) y_i`.
pub fn measure(game: &QuadraticGame, dither: &DitherPlan, theta_hat: Vec2, t: f64) -> Measurement {
    let theta = theta_hat + dither.probe_vec(t);
    let y = game.payoff_vec(theta);
    let g_hat = dither.demod_vec(t).component_mul(&y);
    Measurement { theta, y, g_hat }
}

/// One recorded row of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub theta: [f64; 2],
    pub theta_hat: [f64; 2],
    pub g_hat: [f64; 2],
    pub e: [f64; 2],
    pub u: [f64; 2],
    pub j: [f64; 2],
}

/// State of the full (or periodic) loop at `t = step · dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopState {
    pub step: u64,
    pub t: f64,
    pub theta_hat: Vec2,
    pub monitors: [EventMonitor; 2],
    pub u_held: Vec2,
}

impl ClosedLoopState {
    pub fn initial(config: &ScenarioConfig) -> Self {
        let theta_hat = Vec2::from(config.theta_hat0);
        let m = measure(&config.game, &config.dither, theta_hat, 0.0);
        let monitors = [EventMonitor::new(0, m.g_hat[0]), EventMonitor::new(1, m.g_hat[1])];
        let u_held = config.gain_vec().component_mul(&m.g_hat);
        Self {
            step: 0,
            t: 0.0,
            theta_hat,
            monitors,
            u_held,
        }
    }

    pub fn held(&self) -> Vec2 {
        Vec2::new(self.monitors[0].held_gradient(), self.monitors[1].held_gradient())
    }
}

/// State of the average loop at scaled time `t̄ = step · ω dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct AverageState {
    pub step: u64,
    pub t_bar: f64,
    pub g_av: Vec2,
    pub monitors: [EventMonitor; 2],
}

impl AverageState {
    /// `Ĝ_av(0) = H θ̃(0)`.
    pub fn initial(config: &ScenarioConfig) -> Result<Self> {
        let theta_star = config.game.nash_equilibrium()?.to_vec();
        let g_av = config.game.pseudo_hessian() * (Vec2::from(config.theta_hat0) - theta_star);
        Ok(Self {
            step: 0,
            t_bar: 0.0,
            g_av,
            monitors: [EventMonitor::new(0, g_av[0]), EventMonitor::new(1, g_av[1])],
        })
    }

    pub fn held(&self) -> Vec2 {
        Vec2::new(self.monitors[0].held_gradient(), self.monitors[1].held_gradient())
    }
}

/// What happened at the trigger stage of one step.
#[derive(Debug, Clone, Copy, Default)]
struct SyncOutcome {
    fired: [bool; 2],
    /// `|e| − σ|Ĝ|` just before a firing, zero otherwise.
    overshoot: [f64; 2],
}

fn check_finite(t: f64, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_LIMIT) {
        Ok(())
    } else {
        Err(Error::NumericOverflow {
            t,
            limit: DIVERGENCE_LIMIT,
        })
    }
}

fn apply_trigger(
    monitors: &mut [EventMonitor; 2],
    config: &ScenarioConfig,
    step: u64,
    t: f64,
    g: Vec2,
    periodic_due: bool,
) -> Result<SyncOutcome> {
    let mut out = SyncOutcome::default();
    if step == 0 {
        return Ok(out);
    }
    for (i, monitor) in monitors.iter_mut().enumerate() {
        if config.continuous_control {
            monitor.refresh(g[i]);
            continue;
        }
        let fire = match config.mode {
            Mode::Periodic => periodic_due,
            Mode::Full | Mode::Average => {
                let e = monitor.deviation(g[i]);
                let fire = config.policy.should_trigger(i, g[i], e);
                if fire {
                    out.overshoot[i] = -config.policy.margin(i, g[i], e);
                }
                fire
            }
        };
        if fire {
            monitor.on_trigger(t, g[i])?;
            out.fired[i] = true;
        }
    }
    Ok(out)
}

fn periodic_due(config: &ScenarioConfig, step: u64, updates_so_far: usize) -> bool {
    let h = config.baseline_h.unwrap_or(config.dt);
    let next = (updates_so_far as f64 + 1.0) * h;
    step as f64 * config.dt >= next - 1e-9 * config.dt
}

/// Trigger stage of the full loop at the state's current time.
fn sync_full(state: &mut ClosedLoopState, config: &ScenarioConfig) -> Result<(Measurement, SyncOutcome)> {
    let m = measure(&config.game, &config.dither, state.theta_hat, state.t);
    check_finite(state.t, m.g_hat.as_slice())?;
    let due = config.mode == Mode::Periodic
        && periodic_due(config, state.step, state.monitors[0].event_times().len() - 1);
    let out = apply_trigger(&mut state.monitors, config, state.step, state.t, m.g_hat, due)?;
    state.u_held = config.gain_vec().component_mul(&state.held());
    Ok((m, out))
}

/// Integration stage of the full loop over one `dt`.
fn advance_full(state: &mut ClosedLoopState, config: &ScenarioConfig) -> Result<()> {
    let dt = config.dt;
    let k = config.gain_vec();
    let t = state.t;
    let next = match (config.integrator, config.continuous_control) {
        // Under zero-order hold the right-hand side is constant over the step,
        // so every Runge–Kutta stage coincides with the Euler slope.
        (Integrator::Euler, _) | (Integrator::Rk4, false) => state.theta_hat + dt * state.u_held,
        (Integrator::Rk4, true) => {
            let f = |s: f64, th: Vec2| k.component_mul(&measure(&config.game, &config.dither, th, s).g_hat);
            rk4(t, state.theta_hat, dt, f)
        }
    };
    state.step += 1;
    state.t = state.step as f64 * dt;
    state.theta_hat = next;
    check_finite(state.t, state.theta_hat.as_slice())
}

fn rk4(t: f64, x: Vec2, h: f64, f: impl Fn(f64, Vec2) -> Vec2) -> Vec2 {
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
    let k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
    let k4 = f(t + h, x + h * k3);
    x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// One trigger-then-integrate step of the full event-triggered loop.
pub fn step_full(state: &ClosedLoopState, config: &ScenarioConfig) -> Result<ClosedLoopState> {
    let mut next = state.clone();
    sync_full(&mut next, config)?;
    advance_full(&mut next, config)?;
    Ok(next)
}

fn sync_average(state: &mut AverageState, config: &ScenarioConfig) -> Result<SyncOutcome> {
    check_finite(state.t_bar, state.g_av.as_slice())?;
    apply_trigger(&mut state.monitors, config, state.step, state.t_bar, state.g_av, false)
}

fn advance_average(state: &mut AverageState, config: &ScenarioConfig, omega: f64) -> Result<()> {
    let dt_bar = omega * config.dt;
    let hk = config.hk() / omega;
    let next = if config.continuous_control {
        match config.integrator {
            Integrator::Euler => state.g_av + dt_bar * hk * state.g_av,
            Integrator::Rk4 => rk4(state.t_bar, state.g_av, dt_bar, |_, g| hk * g),
        }
    } else {
        // Ĝ_av + e_av is the held vector, constant between events.
        state.g_av + dt_bar * hk * state.held()
    };
    state.step += 1;
    state.t_bar = state.step as f64 * dt_bar;
    state.g_av = next;
    check_finite(state.t_bar, state.g_av.as_slice())
}

/// One step of the average loop in scaled time, step `dt̄ = ω·dt`.
pub fn step_average(state: &AverageState, config: &ScenarioConfig) -> Result<AverageState> {
    let omega = config.dither.base_frequency();
    let mut next = state.clone();
    sync_average(&mut next, config)?;
    advance_average(&mut next, config, omega)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub event_logs: [Vec<f64>; 2],
    pub meta: ScenarioConfig,
    /// Factor between sample time and physical time: sample `t = time_scale · t_phys`.
    /// `1` for the full and periodic loops, `ω` for the average loop.
    pub time_scale: f64,
    /// The sample at `t_final`, recorded regardless of stride.
    pub last: Sample,
    /// Largest pre-firing violation `|e_i| − σ_i|Ĝ_i|` per player.
    pub max_overshoot: [f64; 2],
}

impl Trajectory {
    pub fn theta_star(&self) -> Option<Vec2> {
        self.meta.theta_star()
    }

    pub fn event_counts(&self) -> [usize; 2] {
        [self.event_logs[0].len(), self.event_logs[1].len()]
    }

    /// Control updates after initialization.
    pub fn update_counts(&self) -> [usize; 2] {
        [self.event_logs[0].len() - 1, self.event_logs[1].len() - 1]
    }

    /// `θ̂ − θ*` per sample, when `θ*` exists.
    pub fn theta_tilde(&self) -> Option<Vec<Vec2>> {
        let ts = self.theta_star()?;
        Some(self.samples.iter().map(|s| Vec2::from(s.theta_hat) - ts).collect())
    }

    pub fn final_theta_hat(&self) -> Vec2 {
        Vec2::from(self.last.theta_hat)
    }

    pub fn final_theta(&self) -> Vec2 {
        Vec2::from(self.last.theta)
    }

    pub fn physical_time(&self, sample_t: f64) -> f64 {
        sample_t / self.time_scale
    }
}

struct Recorder {
    stride: u64,
    samples: Vec<Sample>,
    max_overshoot: [f64; 2],
}

impl Recorder {
    fn new(config: &ScenarioConfig) -> Self {
        let n = config.steps() / config.record_stride as u64 + 1;
        Self {
            stride: config.record_stride as u64,
            samples: Vec::with_capacity(n.min(1 << 24) as usize),
            max_overshoot: [0.0; 2],
        }
    }

    fn push(&mut self, step: u64, sample: Sample, out: SyncOutcome) {
        for i in 0..2 {
            self.max_overshoot[i] = self.max_overshoot[i].max(out.overshoot[i]);
        }
        if step.is_multiple_of(self.stride) {
            self.samples.push(sample);
        }
    }
}

fn full_sample(state: &ClosedLoopState, m: &Measurement, game: &QuadraticGame) -> Sample {
    let held = state.held();
    let (j1, j2) = game.payoff(m.theta.into());
    Sample {
        t: state.t,
        theta: m.theta.into(),
        theta_hat: state.theta_hat.into(),
        g_hat: m.g_hat.into(),
        e: (held - m.g_hat).into(),
        u: state.u_held.into(),
        j: [j1, j2],
    }
}

fn run_full(config: &ScenarioConfig) -> Result<Trajectory> {
    let n = config.steps();
    let mut state = ClosedLoopState::initial(config);
    let mut rec = Recorder::new(config);
    let mut last = None;
    for step in 0..=n {
        let (m, out) = sync_full(&mut state, config)?;
        let sample = full_sample(&state, &m, &config.game);
        rec.push(step, sample, out);
        if step == n {
            last = Some(sample);
            break;
        }
        advance_full(&mut state, config)?;
    }
    let [m0, m1] = state.monitors;
    Ok(Trajectory {
        samples: rec.samples,
        event_logs: [m0.into_event_times(), m1.into_event_times()],
        meta: config.clone(),
        time_scale: 1.0,
        last: last.expect("loop runs at least once"),
        max_overshoot: rec.max_overshoot,
    })
}

fn run_average(config: &ScenarioConfig) -> Result<Trajectory> {
    let omega = config.dither.base_frequency();
    let h = config.game.pseudo_hessian();
    let h_inv = h.try_inverse().ok_or(Error::SingularHessian { det: h.determinant() })?;
    let theta_star = config.game.nash_equilibrium()?.to_vec();
    let k = config.gain_vec();
    let n = config.steps();
    let mut state = AverageState::initial(config)?;
    let mut rec = Recorder::new(config);
    let mut last = None;
    for step in 0..=n {
        let out = sync_average(&mut state, config)?;
        let theta = theta_star + h_inv * state.g_av;
        let held = state.held();
        let (j1, j2) = config.game.payoff(theta.into());
        let sample = Sample {
            t: state.t_bar,
            theta: theta.into(),
            theta_hat: theta.into(),
            g_hat: state.g_av.into(),
            e: (held - state.g_av).into(),
            u: k.component_mul(&held).into(),
            j: [j1, j2],
        };
        rec.push(step, sample, out);
        if step == n {
            last = Some(sample);
            break;
        }
        advance_average(&mut state, config, omega)?;
    }
    let [m0, m1] = state.monitors;
    Ok(Trajectory {
        samples: rec.samples,
        event_logs: [m0.into_event_times(), m1.into_event_times()],
        meta: config.clone(),
        time_scale: omega,
        last: last.expect("loop runs at least once"),
        max_overshoot: rec.max_overshoot,
    })
}

/// Integrates `config` from 0 to `t_final` in its configured mode.
/// Deterministic: a given config always yields the same trajectory.
pub fn run(config: &ScenarioConfig) -> Result<Trajectory> {
    config.validate()?;
    match config.mode {
        Mode::Full | Mode::Periodic => run_full(config),
        Mode::Average => run_average(config),
    }
}

/// The same loop with the control refreshed on the fixed grid `κh`.
pub fn periodic_baseline(config: &ScenarioConfig, h: f64) -> Result<Trajectory> {
    let cfg = ScenarioConfig {
        mode: Mode::Periodic,
        baseline_h: Some(h),
        continuous_control: false,
        ..config.clone()
    };
    run(&cfg)
}
