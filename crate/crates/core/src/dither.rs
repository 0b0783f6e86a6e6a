//! Sinusoidal probing and demodulation.

use std::f64::consts::TAU;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vec2;

pub type Rational = Ratio<i64>;

/// Probe amplitudes and exact rational frequencies (rad/s) for both players.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DitherPlan {
    amplitudes: [f64; 2],
    frequencies: [Rational; 2],
}

impl DitherPlan {
    pub fn new(amplitudes: [f64; 2], frequencies: [Rational; 2]) -> Result<Self> {
        for (i, a) in amplitudes.iter().enumerate() {
            if !(*a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidDither(format!(
                    "amplitude a_{} must be positive, got {a}",
                    i + 1
                )));
            }
        }
        Self::check_frequencies(frequencies)?;
        Ok(Self {
            amplitudes,
            frequencies,
        })
    }

    /// A plan with the probes switched off: `S_i ≡ 0` and `M_i ≡ 0`.
    /// Only meaningful for checking fixed points of the loop.
    pub fn silent(frequencies: [Rational; 2]) -> Result<Self> {
        Self::check_frequencies(frequencies)?;
        Ok(Self {
            amplitudes: [0.0, 0.0],
            frequencies,
        })
    }

    fn check_frequencies(frequencies: [Rational; 2]) -> Result<()> {
        for (i, w) in frequencies.iter().enumerate() {
            if *w <= Rational::from_integer(0) {
                return Err(Error::InvalidDither(format!(
                    "frequency omega_{} must be positive, got {w}",
                    i + 1
                )));
            }
        }
        if frequencies[0] == frequencies[1] {
            return Err(Error::InvalidDither(format!(
                "frequencies must be distinct, both are {}",
                frequencies[0]
            )));
        }
        Ok(())
    }

    pub fn amplitudes(&self) -> [f64; 2] {
        self.amplitudes
    }

    pub fn frequencies(&self) -> [Rational; 2] {
        self.frequencies
    }

    pub fn amplitude(&self, i: usize) -> f64 {
        self.amplitudes[i]
    }

    pub fn frequency(&self, i: usize) -> f64 {
        ratio_to_f64(self.frequencies[i])
    }

    /// `‖(a_1, a_2)‖`.
    pub fn a_norm(&self) -> f64 {
        self.amplitudes[0].hypot(self.amplitudes[1])
    }

    /// Same amplitudes, both frequencies multiplied by `factor`.
    pub fn with_frequency_scale(&self, factor: Rational) -> Result<Self> {
        let frequencies = [self.frequencies[0] * factor, self.frequencies[1] * factor];
        Self::check_frequencies(frequencies)?;
        Ok(Self {
            amplitudes: self.amplitudes,
            frequencies,
        })
    }

    /// `S_i(t) = a_i sin(ω_i t)`, `i ∈ {0, 1}`.
    pub fn probe(&self, i: usize, t: f64) -> f64 {
        self.amplitudes[i] * (self.frequency(i) * t).sin()
    }

    /// `M_i(t) = (2/a_i) sin(ω_i t)`.
    pub fn demod(&self, i: usize, t: f64) -> f64 {
        let a = self.amplitudes[i];
        if a == 0.0 {
            return 0.0;
        }
        2.0 / a * (self.frequency(i) * t).sin()
    }

    pub fn probe_vec(&self, t: f64) -> Vec2 {
        Vec2::new(self.probe(0, t), self.probe(1, t))
    }

    pub fn demod_vec(&self, t: f64) -> Vec2 {
        Vec2::new(self.demod(0, t), self.demod(1, t))
    }

    /// `LCM{1/ω_1, 1/ω_2}` as an exact rational.
    pub fn period_multiple(&self) -> Rational {
        // Ratio keeps numerator/denominator reduced with a positive denominator.
        let [w1, w2] = self.frequencies;
        let num = w1.denom().lcm(w2.denom());
        let den = w1.numer().gcd(w2.numer());
        Rational::new(num, den)
    }

    /// Common period `T = 2π · LCM{1/ω_1, 1/ω_2}`.
    pub fn common_period(&self) -> f64 {
        TAU * ratio_to_f64(self.period_multiple())
    }

    /// `ω = 2π/T`.
    pub fn base_frequency(&self) -> f64 {
        base_frequency(self.common_period())
    }
}

pub fn base_frequency(period: f64) -> f64 {
    TAU / period
}

pub fn ratio_to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Closest rational with denominator at most 10⁶.
pub fn rational_from_f64(x: f64) -> Option<Rational> {
    Rational::approximate_float(x)
}
