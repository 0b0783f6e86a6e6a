//! Two-player quadratic games.
//!
//! Each player's payoff is a concave quadratic in its own action:
//!
//! ```text
//! J_i(θ) = q_ii/2 θ_i² + q_jj/2 θ_j² + c_ij θ_1 θ_2 + h_ii θ_i + h_ij θ_j + c_i
//! ```
//!
//! Only the own-action rows of the second derivatives enter the pseudo-Hessian
//! `H`, so the coefficients are stored per player.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Vec2};

/// Relative determinant threshold below which `H` is treated as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Payoff coefficients of one player, expressed relative to that player:
/// `own` refers to the player's own action, `other` to the opponent's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlayerPayoff {
    pub own_quad: f64,
    pub other_quad: f64,
    pub cross: f64,
    pub lin_own: f64,
    pub lin_other: f64,
    pub offset: f64,
}

impl PlayerPayoff {
    pub fn new(
        own_quad: f64,
        other_quad: f64,
        cross: f64,
        lin_own: f64,
        lin_other: f64,
        offset: f64,
    ) -> Self {
        Self {
            own_quad,
            other_quad,
            cross,
            lin_own,
            lin_other,
            offset,
        }
    }

    fn coefficients(&self) -> [f64; 6] {
        [
            self.own_quad,
            self.other_quad,
            self.cross,
            self.lin_own,
            self.lin_other,
            self.offset,
        ]
    }

    /// Payoff at (own action, opponent action).
    pub fn eval(&self, own: f64, other: f64) -> f64 {
        0.5 * self.own_quad * own * own
            + 0.5 * self.other_quad * other * other
            + self.cross * own * other
            + self.lin_own * own
            + self.lin_other * other
            + self.offset
    }

    /// Derivative of the payoff with respect to the player's own action.
    pub fn own_derivative(&self, own: f64, other: f64) -> f64 {
        self.own_quad * own + self.cross * other + self.lin_own
    }

    /// Derivative with respect to the opponent's action.
    pub fn other_derivative(&self, own: f64, other: f64) -> f64 {
        self.other_quad * other + self.cross * own + self.lin_other
    }

    pub fn is_strictly_concave(&self) -> bool {
        self.own_quad < 0.0
    }
}

/// A pair of actions `θ = (θ_1, θ_2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionPair {
    pub theta1: f64,
    pub theta2: f64,
}

impl ActionPair {
    pub fn new(theta1: f64, theta2: f64) -> Self {
        Self { theta1, theta2 }
    }

    pub fn to_vec(self) -> Vec2 {
        Vec2::new(self.theta1, self.theta2)
    }

    pub fn is_finite(&self) -> bool {
        self.theta1.is_finite() && self.theta2.is_finite()
    }
}

impl From<Vec2> for ActionPair {
    fn from(v: Vec2) -> Self {
        Self::new(v[0], v[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticGame {
    pub p1: PlayerPayoff,
    pub p2: PlayerPayoff,
}

impl QuadraticGame {
    /// Builds a game, rejecting non-finite coefficients and payoffs that are
    /// not strictly concave in the player's own action.
    pub fn new(p1: PlayerPayoff, p2: PlayerPayoff) -> Result<Self> {
        for (name, p) in [("p1", &p1), ("p2", &p2)] {
            if p.coefficients().iter().any(|c| !c.is_finite()) {
                return Err(Error::validation(name, "coefficients must be finite"));
            }
            if !p.is_strictly_concave() {
                return Err(Error::validation(
                    format!("{name}.own_quad"),
                    format!("must be negative, got {}", p.own_quad),
                ));
            }
        }
        Ok(Self { p1, p2 })
    }

    /// `(J_1(θ), J_2(θ))`.
    pub fn payoff(&self, theta: ActionPair) -> (f64, f64) {
        let ActionPair { theta1, theta2 } = theta;
        (self.p1.eval(theta1, theta2), self.p2.eval(theta2, theta1))
    }

    pub fn payoff_vec(&self, theta: Vec2) -> Vec2 {
        let (j1, j2) = self.payoff(theta.into());
        Vec2::new(j1, j2)
    }

    /// `H = [[H¹₁₁, H¹₁₂], [H²₂₁, H²₂₂]]`.
    pub fn pseudo_hessian(&self) -> Mat2 {
        Mat2::new(self.p1.own_quad, self.p1.cross, self.p2.cross, self.p2.own_quad)
    }

    /// `h = [h¹₁, h²₂]`.
    pub fn offset_vec(&self) -> Vec2 {
        Vec2::new(self.p1.lin_own, self.p2.lin_own)
    }

    /// `(∂J_1/∂θ_1, ∂J_2/∂θ_2) = Hθ + h`.
    pub fn pseudo_gradient(&self, theta: ActionPair) -> Vec2 {
        self.pseudo_hessian() * theta.to_vec() + self.offset_vec()
    }

    pub fn is_singular(&self) -> bool {
        let h = self.pseudo_hessian();
        let scale = h.amax();
        scale == 0.0 || h.determinant().abs() <= SINGULAR_TOL * scale * scale
    }

    /// `θ* = −H⁻¹h`.
    pub fn nash_equilibrium(&self) -> Result<ActionPair> {
        let h = self.pseudo_hessian();
        if self.is_singular() {
            return Err(Error::SingularHessian {
                det: h.determinant(),
            });
        }
        let inv = h.try_inverse().ok_or(Error::SingularHessian {
            det: h.determinant(),
        })?;
        Ok((-(inv * self.offset_vec())).into())
    }

    /// Duopoly with linear demand split. Player `i` prices at `u_i` with unit
    /// cost `m_i` and sells `s_1 = S_d/2 + (u_2 − u_1)/(2p)`, `s_2 = S_d − s_1`;
    /// the payoff is the profit `(u_i − m_i) s_i`.
    pub fn duopoly_from_market(total_demand: f64, price_sensitivity: f64, m1: f64, m2: f64) -> Result<Self> {
        if price_sensitivity <= 0.0 || !price_sensitivity.is_finite() {
            return Err(Error::InvalidMarket(format!(
                "price sensitivity p must be positive, got {price_sensitivity}"
            )));
        }
        if !total_demand.is_finite() || !m1.is_finite() || !m2.is_finite() {
            return Err(Error::InvalidMarket("parameters must be finite".into()));
        }
        let p = price_sensitivity;
        let player = |m: f64| PlayerPayoff {
            own_quad: -1.0 / p,
            other_quad: 0.0,
            cross: 1.0 / (2.0 * p),
            lin_own: total_demand / 2.0 + m / (2.0 * p),
            lin_other: -m / (2.0 * p),
            offset: -m * total_demand / 2.0,
        };
        Self::new(player(m1), player(m2))
    }
}

/// True iff both eigenvalues of `m` have negative real part.
pub fn hurwitz_check(m: &Mat2) -> bool {
    m.trace() < 0.0 && m.determinant() > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn benchmark() -> QuadraticGame {
        QuadraticGame::duopoly_from_market(100.0, 0.20, 30.0, 10.0).unwrap()
    }

    fn market_profit(theta: ActionPair, sd: f64, p: f64, m1: f64, m2: f64) -> (f64, f64) {
        let s1 = sd / 2.0 + (theta.theta2 - theta.theta1) / (2.0 * p);
        let s2 = sd - s1;
        ((theta.theta1 - m1) * s1, (theta.theta2 - m2) * s2)
    }

    #[test]
    fn benchmark_coefficients() {
        let g = benchmark();
        assert_eq!(g.pseudo_hessian(), Mat2::new(-5.0, 2.5, 2.5, -5.0));
        assert_eq!(g.offset_vec(), Vec2::new(125.0, 75.0));
        assert_eq!(g.payoff(ActionPair::new(0.0, 0.0)), (-1500.0, -500.0));
        assert_eq!(g.pseudo_gradient(ActionPair::new(0.0, 0.0)), Vec2::new(125.0, 75.0));
        assert!(g.p1.own_quad < 0.0 && g.p2.own_quad < 0.0);
    }

    #[test]
    fn mapping_matches_profit_expression() {
        let g = benchmark();
        for &(a, b) in &[(0.0, 0.0), (43.0, 36.0), (-7.5, 120.25), (50.0, 110.0 / 3.0)] {
            let th = ActionPair::new(a, b);
            let (j1, j2) = g.payoff(th);
            let (r1, r2) = market_profit(th, 100.0, 0.2, 30.0, 10.0);
            assert_abs_diff_eq!(j1, r1, epsilon = 1e-9);
            assert_abs_diff_eq!(j2, r2, epsilon = 1e-9);
        }
    }

    #[test]
    fn benchmark_nash() {
        let ne = benchmark().nash_equilibrium().unwrap();
        assert_abs_diff_eq!(ne.theta1, 43.3333, epsilon = 1e-3);
        assert_abs_diff_eq!(ne.theta2, 36.6667, epsilon = 1e-3);
        let g = benchmark().pseudo_gradient(ne);
        assert!(g.norm() < 1e-9);
    }

    #[test]
    fn payoff_at_nash_is_reported_value() {
        // Closed form: (130/3 − 30)(50 − 25/3) and (110/3 − 10)(50 + 25/3).
        let g = benchmark();
        let (j1, j2) = g.payoff(g.nash_equilibrium().unwrap());
        assert_abs_diff_eq!(j1, 4000.0 / 9.0, epsilon = 1e-9);
        assert_abs_diff_eq!(j2, 16000.0 / 9.0, epsilon = 1e-9);
    }

    #[test]
    fn constant_game() {
        let c = PlayerPayoff::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let g = QuadraticGame { p1: c, p2: c };
        assert_eq!(g.payoff(ActionPair::new(3.0, -8.0)), (1.0, 1.0));
        assert!(matches!(g.nash_equilibrium(), Err(Error::SingularHessian { .. })));
    }

    #[test]
    fn simple_equilibria() {
        let g = QuadraticGame::new(
            PlayerPayoff::new(-1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
            PlayerPayoff::new(-1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        )
        .unwrap();
        assert_eq!(g.nash_equilibrium().unwrap(), ActionPair::new(0.0, 0.0));

        let g = QuadraticGame::new(
            PlayerPayoff::new(-2.0, 0.0, 0.0, 2.0, 0.0, 0.0),
            PlayerPayoff::new(-4.0, 0.0, 0.0, 4.0, 0.0, 0.0),
        )
        .unwrap();
        let ne = g.nash_equilibrium().unwrap();
        assert_abs_diff_eq!(ne.theta1, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ne.theta2, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn symmetric_market_gives_symmetric_equilibrium() {
        let g = QuadraticGame::duopoly_from_market(80.0, 0.5, 12.0, 12.0).unwrap();
        let ne = g.nash_equilibrium().unwrap();
        assert_abs_diff_eq!(ne.theta1, ne.theta2, epsilon = 1e-12);
    }

    #[test]
    fn market_rejects_nonpositive_sensitivity() {
        assert!(matches!(
            QuadraticGame::duopoly_from_market(100.0, 0.0, 30.0, 10.0),
            Err(Error::InvalidMarket(_))
        ));
        assert!(QuadraticGame::duopoly_from_market(100.0, -1.0, 30.0, 10.0).is_err());
    }

    #[test]
    fn rejects_convex_own_payoff() {
        let err = QuadraticGame::new(
            PlayerPayoff::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
            PlayerPayoff::new(-1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        )
        .unwrap_err();
        assert!(err.to_string().contains("p1.own_quad"));
    }

    #[test]
    fn hurwitz() {
        assert!(hurwitz_check(&-Mat2::identity()));
        assert!(!hurwitz_check(&Mat2::new(0.0, 1.0, 0.0, 0.0)));
        let kh = Mat2::from_diagonal(&Vec2::new(2.0, 5.0)) * benchmark().pseudo_hessian();
        assert_eq!(kh.trace(), -35.0);
        assert_abs_diff_eq!(kh.determinant(), 187.5, epsilon = 1e-12);
        assert!(hurwitz_check(&kh));
    }
}
