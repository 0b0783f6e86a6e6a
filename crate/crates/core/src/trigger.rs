//! Per-player static event triggering with zero-order hold.
//!
//! Player `i` rebroadcasts its gradient estimate when
//! `σ_i |Ĝ_i(t)| − |e_i(t)| < 0`, where `e_i = Ĝ_i(t_κ) − Ĝ_i(t)` is the
//! drift from the last broadcast value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerPolicy {
    sigma: [f64; 2],
}

impl TriggerPolicy {
    pub fn new(sigma: [f64; 2]) -> Result<Self> {
        for (i, s) in sigma.iter().enumerate() {
            if !(*s > 0.0 && *s < 1.0) {
                return Err(Error::InvalidPolicy(format!(
                    "sigma_{} must lie in (0, 1), got {s}",
                    i + 1
                )));
            }
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> [f64; 2] {
        self.sigma
    }

    /// `σ̄ = max(σ_1, σ_2)`.
    pub fn sigma_bar(&self) -> f64 {
        self.sigma[0].max(self.sigma[1])
    }

    /// Both thresholds multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new([self.sigma[0] * factor, self.sigma[1] * factor])
    }

    /// Static condition for player `i`: fires iff `σ_i|g| − |e| < 0`.
    pub fn should_trigger(&self, i: usize, g_now: f64, e_now: f64) -> bool {
        self.sigma[i] * g_now.abs() - e_now.abs() < 0.0
    }

    /// Slack of the condition; negative means the trigger would fire.
    pub fn margin(&self, i: usize, g_now: f64, e_now: f64) -> f64 {
        self.sigma[i] * g_now.abs() - e_now.abs()
    }
}

/// Held broadcast value and event log for one player.
#[derive(Debug, Clone, PartialEq)]
pub struct EventMonitor {
    player: usize,
    held_gradient: f64,
    event_times: Vec<f64>,
}

impl EventMonitor {
    /// Starts the log with the mandatory event at `t = 0`.
    pub fn new(player: usize, initial_gradient: f64) -> Self {
        Self {
            player,
            held_gradient: initial_gradient,
            event_times: vec![0.0],
        }
    }

    pub fn player(&self) -> usize {
        self.player
    }

    pub fn held_gradient(&self) -> f64 {
        self.held_gradient
    }

    pub fn event_times(&self) -> &[f64] {
        &self.event_times
    }

    pub fn last_event(&self) -> f64 {
        *self.event_times.last().expect("monitor always holds t = 0")
    }

    pub fn into_event_times(self) -> Vec<f64> {
        self.event_times
    }

    /// `e = Ĝ(t_κ) − Ĝ(t)`.
    pub fn deviation(&self, g_now: f64) -> f64 {
        self.held_gradient - g_now
    }

    /// Records an event at `t` and latches `g_now`.
    pub fn on_trigger(&mut self, t: f64, g_now: f64) -> Result<()> {
        let last = self.last_event();
        if t.is_nan() || t <= last {
            return Err(Error::NonMonotoneTime { t, last });
        }
        self.held_gradient = g_now;
        self.event_times.push(t);
        Ok(())
    }

    /// Replaces the held value without logging an event.
    pub(crate) fn refresh(&mut self, g_now: f64) {
        self.held_gradient = g_now;
    }
}

/// Guaranteed minimum inter-event time
/// `τ* = ∫₀¹ dξ / (b₀ + b₁ξ + b₂ξ²)` with `b₀ = ‖HK‖/σ̄`, `b₁ = 2‖HK‖`,
/// `b₂ = σ̄‖HK‖`.
///
/// The coefficients satisfy `b₁² = 4b₀b₂`, so the denominator is the perfect
/// square `(‖HK‖/σ̄)(1 + σ̄ξ)²` and the integral evaluates to
/// `σ̄ / (‖HK‖(1 + σ̄))`. This is the time for `φ = √(p/q)·‖e‖/‖Ĝ‖`, with
/// `q = σ̄/2` and `p = 1/(2σ̄)`, to grow from 0 to 1 at its worst-case rate.
pub fn min_inter_event_time(sigma_bar: f64, hk_norm: f64) -> Result<f64> {
    if !(sigma_bar > 0.0 && sigma_bar <= 1.0) {
        return Err(Error::InvalidParameters(format!(
            "sigma_bar must lie in (0, 1], got {sigma_bar}"
        )));
    }
    if !(hk_norm > 0.0 && hk_norm.is_finite()) {
        return Err(Error::InvalidParameters(format!(
            "||HK|| must be positive, got {hk_norm}"
        )));
    }
    Ok(sigma_bar / (hk_norm * (1.0 + sigma_bar)))
}

/// Coefficients `(b₀, b₁, b₂)` of the comparison denominator.
pub fn inter_event_coefficients(sigma_bar: f64, hk_norm: f64) -> (f64, f64, f64) {
    (hk_norm / sigma_bar, 2.0 * hk_norm, sigma_bar * hk_norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterEventStats {
    pub count: usize,
    pub min_gap: Option<f64>,
    pub mean_gap: Option<f64>,
}

pub fn inter_event_stats(event_times: &[f64]) -> Result<InterEventStats> {
    if event_times.is_empty() {
        return Err(Error::EmptyLog);
    }
    let gaps: Vec<f64> = event_times.windows(2).map(|w| w[1] - w[0]).collect();
    if gaps.is_empty() {
        return Ok(InterEventStats {
            count: event_times.len(),
            min_gap: None,
            mean_gap: None,
        });
    }
    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    Ok(InterEventStats {
        count: event_times.len(),
        min_gap: Some(min_gap),
        mean_gap: Some(mean_gap),
    })
}
