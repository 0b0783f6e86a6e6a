//! Event-triggered extremum seeking for Nash equilibria of two-player
//! quadratic games.
//!
//! Each player probes its action with a sinusoid, demodulates its own
//! measured payoff into a gradient estimate and only refreshes its
//! zero-order-held control when a static relative-error trigger fires.
//! The crate simulates the closed loop, its average system and a periodic
//! sampled baseline, and computes the Lyapunov quantities that bound decay
//! rate and inter-event time.

pub mod analysis;
pub mod cli;
pub mod dither;
pub mod error;
pub mod expansion;
pub mod game;
pub mod linalg;
pub mod parallel;
pub mod scenario;
pub mod sim;
pub mod trigger;

pub use analysis::{build_report, StabilityReport};
pub use dither::{DitherPlan, Rational};
pub use error::{Error, Result};
pub use game::{ActionPair, PlayerPayoff, QuadraticGame};
pub use scenario::{load_scenario, RunSummary, ScenarioFile};
pub use sim::{run, Integrator, Mode, ScenarioConfig, Trajectory};
pub use trigger::{EventMonitor, TriggerPolicy};
