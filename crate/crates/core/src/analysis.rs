//! Stability quantities for the average loop and numerical checks of the
//! convergence, averaging and decomposition claims.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dither::Rational;
use crate::error::{Error, Result};
use crate::expansion::GradientExpansion;
use crate::game::{hurwitz_check, QuadraticGame};
use crate::dither::DitherPlan;
use crate::linalg::{from_rows, spectral_norm, sym_eigenvalues, to_rows, Mat2, Vec2};
use crate::parallel;
use crate::sim::{self, Mode, ScenarioConfig, Trajectory};
use crate::trigger::min_inter_event_time;

/// Solves `(HK)ᵀP + P(HK) = −Q` for symmetric `P`.
///
/// With `A = HK` and `P = [[p₁₁, p₁₂], [p₁₂, p₂₂]]` the three independent
/// entries of the equation are linear in `(p₁₁, p₁₂, p₂₂)`.
pub fn solve_lyapunov(h: &Mat2, k: &Mat2, q: &Mat2) -> Result<Mat2> {
    let a = h * k;
    if !hurwitz_check(&a) {
        return Err(Error::NotHurwitz);
    }
    if (q[(0, 1)] - q[(1, 0)]).abs() > 1e-12 * q.amax() || sym_eigenvalues(q).0 <= 0.0 {
        return Err(Error::InvalidParameters("Q must be symmetric positive definite".into()));
    }
    let (a11, a12, a21, a22) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    #[rustfmt::skip]
    let m = Matrix3::new(
        2.0 * a11, 2.0 * a21,  0.0,
        a12,       a11 + a22,  a21,
        0.0,       2.0 * a12,  2.0 * a22,
    );
    let rhs = Vector3::new(-q[(0, 0)], -q[(0, 1)], -q[(1, 1)]);
    let x = m.lu().solve(&rhs).ok_or(Error::NotHurwitz)?;
    Ok(Mat2::new(x[0], x[1], x[1], x[2]))
}

/// `‖(HK)ᵀP + PHK + Q‖`.
pub fn lyapunov_residual(h: &Mat2, k: &Mat2, p: &Mat2, q: &Mat2) -> f64 {
    let a = h * k;
    spectral_norm(&(a.transpose() * p + p * a + q))
}

/// `λ_min(Q) / (2‖PHK‖)`.
pub fn sigma_bar_max(p: &Mat2, q: &Mat2, h: &Mat2, k: &Mat2) -> f64 {
    sym_eigenvalues(q).0 / (2.0 * spectral_norm(&(p * h * k)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub p: [[f64; 2]; 2],
    pub q: [[f64; 2]; 2],
    /// `λ_min(Q)/λ_max(P)`.
    pub alpha: f64,
    pub sigma_bar: f64,
    pub sigma_bar_max: f64,
    pub sigma_bar_admissible: bool,
    /// `σ̄/σ̄_max` when admissible.
    pub sigma_hat: Option<f64>,
    /// `α(1 − σ̂)`, decay rate of `V_av` in unscaled time.
    pub v_decay_rate: Option<f64>,
    pub m_theta: f64,
    pub hk_norm: f64,
    pub tau_star: f64,
    pub lyapunov_residual: f64,
}

impl StabilityReport {
    pub fn p_matrix(&self) -> Mat2 {
        from_rows(self.p)
    }

    pub fn q_matrix(&self) -> Mat2 {
        from_rows(self.q)
    }
}

pub fn build_report(config: &ScenarioConfig) -> Result<StabilityReport> {
    build_report_with_q(config, &Mat2::identity())
}

pub fn build_report_with_q(config: &ScenarioConfig, q: &Mat2) -> Result<StabilityReport> {
    let h = config.game.pseudo_hessian();
    let k = config.gain_matrix();
    let p = solve_lyapunov(&h, &k, q)?;
    let (p_min, p_max) = sym_eigenvalues(&p);
    let (q_min, _) = sym_eigenvalues(q);
    let h_inv = h.try_inverse().ok_or(Error::SingularHessian { det: h.determinant() })?;
    let sigma_bar = config.policy.sigma_bar();
    let sbm = sigma_bar_max(&p, q, &h, &k);
    let admissible = sigma_bar < sbm;
    let alpha = q_min / p_max;
    let sigma_hat = admissible.then(|| sigma_bar / sbm);
    let hk_norm = spectral_norm(&(h * k));
    Ok(StabilityReport {
        p: to_rows(&p),
        q: to_rows(q),
        alpha,
        sigma_bar,
        sigma_bar_max: sbm,
        sigma_bar_admissible: admissible,
        sigma_hat,
        v_decay_rate: sigma_hat.map(|s| alpha * (1.0 - s)),
        m_theta: (p_max / p_min).sqrt() * spectral_norm(&h_inv) * spectral_norm(&h),
        hk_norm,
        tau_star: min_inter_event_time(sigma_bar, hk_norm)?,
        lyapunov_residual: lyapunov_residual(&h, &k, &p, q),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayTarget {
    /// `‖θ − θ*‖`.
    ThetaErr,
    /// `‖Ĝ‖`.
    GNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Exponential rate `m`.
    pub m: f64,
    /// Amplitude `M̄`.
    pub m_bar: f64,
    pub floor: f64,
    /// End of the fitted transient window.
    pub t_window: f64,
}

impl DecayFit {
    pub fn envelope(&self, t: f64) -> f64 {
        self.m_bar * (-self.m * t).exp() + self.floor
    }
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Fits `r(t) ≈ M̄ e^{−mt} + floor`.
///
/// The floor is the median of the last 10% of samples. The fit is a
/// least-squares line through `ln(r − floor)` over `[0, t₉₀]`, where `t₉₀` is
/// the first time `r` drops to ten times the floor.
pub fn decay_fit_series(times: &[f64], residuals: &[f64]) -> Result<DecayFit> {
    let n = times.len();
    if n != residuals.len() || n < 3 {
        return Err(Error::NotConverged("need at least three samples".into()));
    }
    if residuals.iter().any(|r| !r.is_finite()) {
        return Err(Error::NotConverged("non-finite residual".into()));
    }
    let tail_len = (n / 10).max(1);
    let floor = median(&mut residuals[n - tail_len..].to_vec());
    if floor.is_nan() || floor >= 0.1 * residuals[0] {
        return Err(Error::NotConverged(format!(
            "final residual {floor} is not below 10% of initial {}",
            residuals[0]
        )));
    }
    let end = residuals
        .iter()
        .position(|&r| r <= 10.0 * floor)
        .unwrap_or(n - 1);
    let (mut sx, mut sy, mut sxx, mut sxy, mut cnt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..=end {
        let d = residuals[i] - floor;
        if d > 0.0 {
            let y = d.ln();
            sx += times[i];
            sy += y;
            sxx += times[i] * times[i];
            sxy += times[i] * y;
            cnt += 1.0;
        }
    }
    let denom = cnt * sxx - sx * sx;
    if cnt < 2.0 || denom <= 0.0 {
        return Err(Error::NotConverged("transient window too short to fit".into()));
    }
    let slope = (cnt * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / cnt;
    Ok(DecayFit {
        m: -slope,
        m_bar: intercept.exp(),
        floor,
        t_window: times[end],
    })
}

pub fn residual_series(traj: &Trajectory, target: DecayTarget) -> Result<(Vec<f64>, Vec<f64>)> {
    let times = traj.samples.iter().map(|s| traj.physical_time(s.t)).collect();
    let values = match target {
        DecayTarget::ThetaErr => {
            let ts = traj.theta_star().ok_or(Error::SingularHessian {
                det: traj.meta.game.pseudo_hessian().determinant(),
            })?;
            traj.samples.iter().map(|s| (Vec2::from(s.theta) - ts).norm()).collect()
        }
        DecayTarget::GNorm => traj.samples.iter().map(|s| Vec2::from(s.g_hat).norm()).collect(),
    };
    Ok((times, values))
}

pub fn decay_fit(traj: &Trajectory, target: DecayTarget) -> Result<DecayFit> {
    let (t, r) = residual_series(traj, target)?;
    decay_fit_series(&t, &r)
}

pub const AVERAGING_SCALES: [i64; 3] = [1, 2, 4];

/// Sup-norm gap between the full-loop `θ̃(t)` and the average-loop
/// `θ̃_av(t)` with both dither frequencies multiplied by each scale.
pub fn averaging_gap(config: &ScenarioConfig) -> Result<Vec<(f64, f64)>> {
    averaging_gap_with_scales(config, &AVERAGING_SCALES.map(Rational::from_integer))
}

pub fn averaging_gap_with_scales(config: &ScenarioConfig, scales: &[Rational]) -> Result<Vec<(f64, f64)>> {
    let mut jobs = Vec::with_capacity(scales.len() * 2);
    for &s in scales {
        let dither = config.dither.with_frequency_scale(s)?;
        for mode in [Mode::Full, Mode::Average] {
            jobs.push(ScenarioConfig {
                dither,
                mode,
                ..config.clone()
            });
        }
    }
    let mut runs = parallel::map(&jobs, sim::run).into_iter();
    let mut out = Vec::with_capacity(scales.len());
    for &s in scales {
        let full = runs.next().expect("one full run per scale")?;
        let avg = runs.next().expect("one average run per scale")?;
        let a = full.theta_tilde().ok_or(Error::SingularHessian { det: 0.0 })?;
        let b = avg.theta_tilde().ok_or(Error::SingularHessian { det: 0.0 })?;
        let gap = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        out.push((crate::dither::ratio_to_f64(s), gap));
    }
    Ok(out)
}

/// Difference between `Ĝ` computed directly from the payoff and from the
/// harmonic expansion, at `θ = θ* + θ̃ + S(t)`.
pub fn gradient_decomposition_residual(
    game: &QuadraticGame,
    dither: &DitherPlan,
    theta_tilde: Vec2,
    t: f64,
) -> Result<Vec2> {
    let expansion = GradientExpansion::new(game, dither)?;
    decomposition_residual_with(&expansion, game, dither, theta_tilde, t)
}

pub fn decomposition_residual_with(
    expansion: &GradientExpansion,
    game: &QuadraticGame,
    dither: &DitherPlan,
    theta_tilde: Vec2,
    t: f64,
) -> Result<Vec2> {
    let ts = game.nash_equilibrium()?.to_vec();
    let direct = sim::measure(game, dither, ts + theta_tilde, t).g_hat;
    Ok(direct - expansion.eval(theta_tilde, t))
}

/// Outcome of checking `V_av = Ĝ_avᵀPĜ_av` against its decay bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCheck {
    pub event_pairs: usize,
    pub contraction_violations: usize,
    pub samples: usize,
    pub envelope_violations: usize,
}

impl LyapunovCheck {
    pub fn envelope_fraction(&self) -> f64 {
        if self.samples == 0 {
            1.0
        } else {
            1.0 - self.envelope_violations as f64 / self.samples as f64
        }
    }
}

/// Checks, on an average-loop trajectory recorded at every step,
/// `V(t̄_{κ+1}) ≤ exp(−α(1−σ̂)(t̄_{κ+1}−t̄_κ)/ω) V(t̄_κ)` over consecutive
/// joint event times and `V(t̄) ≤ exp(−α(1−σ̂)t̄/ω) V(0)` at every sample.
pub fn lyapunov_check(traj: &Trajectory, report: &StabilityReport) -> Result<LyapunovCheck> {
    if traj.meta.mode != Mode::Average || traj.meta.record_stride != 1 {
        return Err(Error::InvalidParameters(
            "Lyapunov check needs an average-mode trajectory with record_stride = 1".into(),
        ));
    }
    let rate = report.v_decay_rate.ok_or_else(|| {
        Error::InvalidParameters(format!(
            "sigma_bar = {} is not below sigma_bar_max = {}",
            report.sigma_bar, report.sigma_bar_max
        ))
    })? / traj.time_scale;
    let p = report.p_matrix();
    let v: Vec<f64> = traj
        .samples
        .iter()
        .map(|s| {
            let g = Vec2::from(s.g_hat);
            g.dot(&(p * g))
        })
        .collect();
    let dt_bar = traj.meta.dt * traj.time_scale;
    let index = |t: f64| (t / dt_bar).round() as usize;

    let mut events: Vec<usize> = traj.event_logs.iter().flatten().map(|&t| index(t)).collect();
    events.sort_unstable();
    events.dedup();
    let tol = |x: f64| x * (1.0 + 1e-12) + 1e-300;

    let times: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let mut contraction_violations = 0;
    for w in events.windows(2) {
        let (a, b) = (w[0], w[1]);
        let bound = (-rate * (times[b] - times[a])).exp() * v[a];
        if v[b] > tol(bound) {
            contraction_violations += 1;
        }
    }
    let envelope_violations = v
        .iter()
        .zip(&times)
        .filter(|(vi, t)| **vi > tol((-rate * **t).exp() * v[0]))
        .count();
    Ok(LyapunovCheck {
        event_pairs: events.len().saturating_sub(1),
        contraction_violations,
        samples: v.len(),
        envelope_violations,
    })
}

/// Largest uniform factor in `{1, 0.99, 0.98, …}` that brings `σ̄` below
/// `σ̄_max`, with the scaled config.
pub fn admissible_sigma_scale(config: &ScenarioConfig) -> Result<(f64, ScenarioConfig)> {
    let base = build_report(config)?;
    for k in 0..100 {
        let factor = 1.0 - k as f64 / 100.0;
        if base.sigma_bar * factor < base.sigma_bar_max {
            let cfg = ScenarioConfig {
                policy: config.policy.scaled(factor)?,
                ..config.clone()
            };
            return Ok((factor, cfg));
        }
    }
    Err(Error::InvalidParameters("no admissible sigma scale found".into()))
}

/// Per-player minimum inter-event gap of a trajectory, in its own time base.
pub fn min_gaps(traj: &Trajectory) -> [Option<f64>; 2] {
    traj.event_logs.clone().map(|log| {
        log.windows(2)
            .map(|w| w[1] - w[0])
            .fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.min(g))))
    })
}
