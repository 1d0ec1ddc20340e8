//! The ratio change of variable ζ = h₁/h₂ and the associated hat transform
//! ĝ = (g/h₂)∘ζ⁻¹, under which continuation values become affine and the
//! boundary vector field takes its compact form.

use crate::diffusion::DiffusionModel;
use crate::error::Result;
use crate::numerics;
use crate::payoff::TechnologyPayoffs;

/// Transform utilities bound to a model/payoff pair.
#[derive(Debug, Clone)]
pub struct TransformCache {
    model: DiffusionModel,
    payoffs: TechnologyPayoffs,
}

impl TransformCache {
    pub fn new(model: DiffusionModel, payoffs: TechnologyPayoffs) -> Self {
        Self { model, payoffs }
    }

    /// ζ(x) = h₁(x)/h₂(x), strictly increasing onto (0, ∞).
    pub fn zeta(&self, x: f64) -> f64 {
        (self.model.h1().log_value(x) - self.model.h2().log_value(x)).exp()
    }

    /// ζ′(x) = γS′(x)/h₂²(x).
    pub fn zeta_deriv(&self, x: f64) -> f64 {
        self.zeta(x) * (self.model.h1().log_deriv(x) - self.model.h2().log_deriv(x))
    }

    /// Monotone inverse of ζ.
    pub fn zeta_inv(&self, y: f64) -> Result<f64> {
        let (lo, hi) = self.model.state_interval();
        let mut a = if lo > 0.0 { (lo + 1.0) * 0.5 } else { 1.0 };
        // bracket by geometric expansion in both directions
        let mut b = a;
        let mut k = 0;
        while self.zeta(a) > y {
            a = if lo > 0.0 { 0.5 * (a + lo) } else { a * 0.25 };
            k += 1;
            if k > 2000 {
                return Err(crate::error::Error::Bracketing {
                    what: "zeta inverse",
                    detail: format!("cannot bracket y = {y} from below"),
                });
            }
        }
        k = 0;
        while self.zeta(b) < y {
            b = if hi.is_finite() { 0.5 * (b + hi) } else { b * 4.0 };
            k += 1;
            if k > 2000 {
                return Err(crate::error::Error::Bracketing {
                    what: "zeta inverse",
                    detail: format!("cannot bracket y = {y} from above"),
                });
            }
        }
        numerics::bisect_root(
            |x| self.zeta(x) - y,
            a,
            b,
            1e-14 * b.abs().max(1.0),
            300,
            "zeta inverse",
        )
    }

    /// R̂ at the transformed point ζ(x), evaluated directly in state space.
    pub fn r_hat_at_state(&self, x: f64) -> f64 {
        self.payoffs.r_payoff().value(x) / self.model.h2().value(x)
    }

    /// R̂′(ζ(x)) = [R′(x)h₂(x) − R(x)h₂′(x)] / (γS′(x)).
    pub fn r_hat_deriv_at_state(&self, x: f64) -> f64 {
        let r = self.payoffs.r_payoff();
        let h2 = self.model.h2();
        (r.deriv(x) * h2.value(x) - r.value(x) * h2.deriv(x))
            / (self.model.gamma() * self.model.scale_deriv(x))
    }

    /// R̂″(ζ(x)) = 2L(x)h₂³(x) / (σ²(x)γ²S′(x)²); shares the sign of
    /// ℒR − rR.
    pub fn r_hat_second_at_state(&self, x: f64) -> f64 {
        let l = self.payoffs.drift_term_l(&self.model, x);
        let h2 = self.model.h2().value(x);
        let gs = self.model.gamma() * self.model.scale_deriv(x);
        2.0 * l * h2 * h2 * h2 / (self.model.vol2(x) * gs * gs)
    }

    /// Ĝ at the transformed point ζ(m).
    pub fn g_hat_at_state(&self, m: f64) -> f64 {
        self.payoffs.bargain_g(m) / self.model.h2().value(m)
    }

    /// R̂(y) for an arbitrary transformed point (inverts ζ).
    pub fn r_hat(&self, y: f64) -> Result<f64> {
        Ok(self.r_hat_at_state(self.zeta_inv(y)?))
    }

    /// R̂′(y) for an arbitrary transformed point.
    pub fn r_hat_deriv(&self, y: f64) -> Result<f64> {
        Ok(self.r_hat_deriv_at_state(self.zeta_inv(y)?))
    }

    /// Ĝ(z) for an arbitrary transformed point.
    pub fn g_hat(&self, z: f64) -> Result<f64> {
        Ok(self.g_hat_at_state(self.zeta_inv(z)?))
    }

    /// η(z, y) = (Ĝ(z) − R̂(y))/(z − y) − R̂′(y) on transformed coordinates.
    pub fn eta(&self, z: f64, y: f64) -> Result<f64> {
        let x = self.zeta_inv(y)?;
        let m = self.zeta_inv(z)?;
        Ok(self.eta_states(m, x))
    }

    /// η evaluated at state coordinates (m, x) with m > x, avoiding any
    /// inverse solve.
    pub fn eta_states(&self, m: f64, x: f64) -> f64 {
        let z = self.zeta(m);
        let y = self.zeta(x);
        (self.g_hat_at_state(m) - self.r_hat_at_state(x)) / (z - y) - self.r_hat_deriv_at_state(x)
    }
}
