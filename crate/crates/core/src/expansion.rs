//! Harmonic expansion of the demodulated gradient estimate.
//!
//! With `θ = θ* + θ̃ + S(t)`, each `Ĝ_i = M_i(t) J_i(θ)` splits into a part
//! linear in `θ̃` with periodic coefficients `𝓗_ij(t)`, a quadratic ripple
//! `M_i(t)·½ θ̃ᵀA_iθ̃`, and a `θ̃`-independent forcing `δ_i(t)`. The
//! coefficients are built here as finite trigonometric sums by repeated
//! product-to-sum reduction, so they can be evaluated and averaged without
//! going through the payoff.

use num_rational::Ratio;

use crate::dither::{ratio_to_f64, DitherPlan, Rational};
use crate::error::Result;
use crate::game::QuadraticGame;
use crate::linalg::{Mat2, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Wave {
    Cos,
    Sin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Term {
    amp: f64,
    wave: Wave,
    freq: Rational,
}

/// `Σ amp·cos(ν t)` / `amp·sin(ν t)` with non-negative rational `ν`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrigSeries {
    terms: Vec<Term>,
}

impl TrigSeries {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::cos(c, Rational::from_integer(0))
    }

    pub fn cos(amp: f64, freq: Rational) -> Self {
        let mut s = Self { terms: Vec::new() };
        s.push(amp, Wave::Cos, freq);
        s
    }

    pub fn sin(amp: f64, freq: Rational) -> Self {
        let mut s = Self { terms: Vec::new() };
        s.push(amp, Wave::Sin, freq);
        s
    }

    fn push(&mut self, amp: f64, wave: Wave, freq: Rational) {
        let zero = Rational::from_integer(0);
        let (amp, freq) = if freq < zero {
            match wave {
                Wave::Cos => (amp, -freq),
                Wave::Sin => (-amp, -freq),
            }
        } else {
            (amp, freq)
        };
        if amp == 0.0 || (wave == Wave::Sin && freq == zero) {
            return;
        }
        match self.terms.iter().position(|t| t.wave == wave && t.freq == freq) {
            Some(k) => {
                self.terms[k].amp += amp;
                if self.terms[k].amp == 0.0 {
                    self.terms.swap_remove(k);
                }
            }
            None => self.terms.push(Term { amp, wave, freq }),
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = Self::zero();
        for t in &self.terms {
            out.push(c * t.amp, t.wave, t.freq);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for t in &other.terms {
            out.push(t.amp, t.wave, t.freq);
        }
        out
    }

    /// Product, reduced with
    /// `sin a sin b = ½[cos(a−b) − cos(a+b)]`,
    /// `cos a cos b = ½[cos(a−b) + cos(a+b)]`,
    /// `sin a cos b = ½[sin(a+b) + sin(a−b)]`.
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for x in &self.terms {
            for y in &other.terms {
                let c = 0.5 * x.amp * y.amp;
                let (sum, diff) = (x.freq + y.freq, x.freq - y.freq);
                match (x.wave, y.wave) {
                    (Wave::Sin, Wave::Sin) => {
                        out.push(c, Wave::Cos, diff);
                        out.push(-c, Wave::Cos, sum);
                    }
                    (Wave::Cos, Wave::Cos) => {
                        out.push(c, Wave::Cos, diff);
                        out.push(c, Wave::Cos, sum);
                    }
                    (Wave::Sin, Wave::Cos) => {
                        out.push(c, Wave::Sin, sum);
                        out.push(c, Wave::Sin, diff);
                    }
                    (Wave::Cos, Wave::Sin) => {
                        out.push(c, Wave::Sin, sum);
                        out.push(-c, Wave::Sin, diff);
                    }
                }
            }
        }
        out
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| {
                let arg = ratio_to_f64(term.freq) * t;
                match term.wave {
                    Wave::Cos => term.amp * arg.cos(),
                    Wave::Sin => term.amp * arg.sin(),
                }
            })
            .sum()
    }

    /// Exact mean over any common period of the harmonics.
    pub fn mean(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.wave == Wave::Cos && t.freq == Ratio::from_integer(0))
            .map(|t| t.amp)
            .sum()
    }
}

/// The split `Ĝ_i = Σ_j 𝓗_ij(t) θ̃_j + M_i(t)·½θ̃ᵀA_iθ̃ + δ_i(t)`.
#[derive(Debug, Clone)]
pub struct GradientExpansion {
    /// `𝓗_ij(t)`.
    pub linear: [[TrigSeries; 2]; 2],
    /// `M_i(t)`, the coefficient of the quadratic ripple.
    pub ripple: [TrigSeries; 2],
    /// `A_i`, the full Hessian of `J_i` in `(θ_1, θ_2)`.
    pub quad_forms: [Mat2; 2],
    /// `δ_i(t)`.
    pub forcing: [TrigSeries; 2],
}

impl GradientExpansion {
    pub fn new(game: &QuadraticGame, dither: &DitherPlan) -> Result<Self> {
        let ts = game.nash_equilibrium()?;
        let (t1, t2) = (ts.theta1, ts.theta2);
        let (p1, p2) = (&game.p1, &game.p2);

        let quad_forms = [
            Mat2::new(p1.own_quad, p1.cross, p1.cross, p1.other_quad),
            Mat2::new(p2.other_quad, p2.cross, p2.cross, p2.own_quad),
        ];
        // Full gradients at θ*, ordered (∂/∂θ_1, ∂/∂θ_2).
        let grads = [
            Vec2::new(p1.own_derivative(t1, t2), p1.other_derivative(t1, t2)),
            Vec2::new(p2.other_derivative(t2, t1), p2.own_derivative(t2, t1)),
        ];
        let (j1, j2) = game.payoff(ts);
        let values = [j1, j2];

        let freqs = dither.frequencies();
        let amps = dither.amplitudes();
        let probes: [TrigSeries; 2] = [0, 1].map(|k| TrigSeries::sin(amps[k], freqs[k]));
        let demods: [TrigSeries; 2] = [0, 1].map(|i| {
            if amps[i] == 0.0 {
                TrigSeries::zero()
            } else {
                TrigSeries::sin(2.0 / amps[i], freqs[i])
            }
        });

        let linear = [0, 1].map(|i| {
            [0, 1].map(|j| {
                let a = &quad_forms[i];
                let inner = TrigSeries::constant(grads[i][j])
                    .add(&probes[0].scale(a[(j, 0)]))
                    .add(&probes[1].scale(a[(j, 1)]));
                demods[i].mul(&inner)
            })
        });

        let forcing = [0, 1].map(|i| {
            let a = &quad_forms[i];
            let mut inner = TrigSeries::constant(values[i])
                .add(&probes[0].scale(grads[i][0]))
                .add(&probes[1].scale(grads[i][1]));
            for j in 0..2 {
                for k in 0..2 {
                    inner = inner.add(&probes[j].mul(&probes[k]).scale(0.5 * a[(j, k)]));
                }
            }
            demods[i].mul(&inner)
        });

        Ok(Self {
            linear,
            ripple: demods,
            quad_forms,
            forcing,
        })
    }

    /// `𝓗(t)` as a matrix.
    pub fn linear_at(&self, t: f64) -> Mat2 {
        Mat2::new(
            self.linear[0][0].eval(t),
            self.linear[0][1].eval(t),
            self.linear[1][0].eval(t),
            self.linear[1][1].eval(t),
        )
    }

    /// Exact period mean of `𝓗(t)`.
    pub fn linear_mean(&self) -> Mat2 {
        Mat2::new(
            self.linear[0][0].mean(),
            self.linear[0][1].mean(),
            self.linear[1][0].mean(),
            self.linear[1][1].mean(),
        )
    }

    pub fn eval(&self, theta_tilde: Vec2, t: f64) -> Vec2 {
        let lin = self.linear_at(t) * theta_tilde;
        Vec2::from_fn(|i, _| {
            let q = 0.5 * theta_tilde.dot(&(self.quad_forms[i] * theta_tilde));
            lin[i] + self.ripple[i].eval(t) * q + self.forcing[i].eval(t)
        })
    }
}
