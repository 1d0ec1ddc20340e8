//! The piecewise value surface W(x, m) assembled from the free boundary:
//! coefficient functions A, B, C, the four-region evaluator, the initial
//! value V̄, and region-wise analytic partial derivatives.

use crate::boundary::FreeBoundary;
use crate::error::{Error, Result};
use crate::numerics;
use crate::transform::TransformCache;
use crate::Instance;

/// Which side of the kink half-line m = m̲ a one-sided m-derivative refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// The four regions of the state space 𝒥 = {m ≥ x}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// m ≥ m̲ and x_R ≤ x ≤ b(m): stop immediately.
    Stop,
    /// m ≥ m̲ and x < x_R.
    LeftOfStop,
    /// m ≥ m̲ and b(m) < x ≤ m.
    RightOfStop,
    /// m < m̲.
    BelowMlow,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::Stop => "stop",
            Region::LeftOfStop => "left_of_stop",
            Region::RightOfStop => "right_of_stop",
            Region::BelowMlow => "below_mlow",
        }
    }
}

/// Value surface bound to a solved boundary.
#[derive(Debug, Clone)]
pub struct ValueSurface {
    inst: Instance,
    boundary: FreeBoundary,
    transform: TransformCache,
}

impl ValueSurface {
    pub fn new(inst: Instance, boundary: FreeBoundary) -> Self {
        let transform = TransformCache::new(inst.model.clone(), inst.payoffs.clone());
        Self {
            inst,
            boundary,
            transform,
        }
    }

    pub fn instance(&self) -> &Instance {
        &self.inst
    }

    pub fn boundary(&self) -> &FreeBoundary {
        &self.boundary
    }

    pub fn m_low(&self) -> f64 {
        self.boundary.m_low()
    }

    fn check_point(&self, x: f64, m: f64) -> Result<()> {
        self.inst.model.check_state(x)?;
        if !(m >= x) {
            return Err(Error::BadPoint {
                x,
                m,
                constraint: "m >= x",
            });
        }
        Ok(())
    }

    /// Region classification with half-open interface conventions:
    /// x = b(m) belongs to Stop, m = m̲ uses the m ≥ m̲ formulas.
    pub fn region(&self, x: f64, m: f64) -> Result<Region> {
        self.check_point(x, m)?;
        let m_low = self.boundary.m_low();
        if m < m_low {
            return Ok(Region::BelowMlow);
        }
        let x_r = self.inst.payoffs.x_r();
        if x < x_r {
            return Ok(Region::LeftOfStop);
        }
        let b = self.boundary.eval_extrapolated(m);
        if x <= b {
            Ok(Region::Stop)
        } else {
            Ok(Region::RightOfStop)
        }
    }

    /// A(m) = (1 − F(m))/(γS′(b)) · [R′(b)h₂(b) − R(b)h₂′(b)], m ≥ m̲.
    pub fn coefficient_a(&self, m: f64) -> Result<f64> {
        let b = self.boundary.eval(m)?;
        Ok(self.coefficient_a_at(m, b))
    }

    fn coefficient_a_at(&self, m: f64, b: f64) -> f64 {
        // equals (1 − F(m))·R̂′(ζ(b))
        self.inst.law.survival(m) * self.transform.r_hat_deriv_at_state(b)
    }

    /// Same coefficient assembled from the raw Wronskian form; retained as
    /// an independent route for cross-checks.
    pub fn coefficient_a_raw(&self, m: f64) -> Result<f64> {
        let b = self.boundary.eval(m)?;
        let model = &self.inst.model;
        let r = self.inst.payoffs.r_payoff();
        let h2 = model.h2();
        Ok(self.inst.law.survival(m) / (model.gamma() * model.scale_deriv(b))
            * (r.deriv(b) * h2.value(b) - r.value(b) * h2.deriv(b)))
    }

    /// B(m) = −(1 − F(m))/(γS′(b)) · [R′(b)h₁(b) − R(b)h₁′(b)], m ≥ m̲.
    pub fn coefficient_b(&self, m: f64) -> Result<f64> {
        let b = self.boundary.eval(m)?;
        Ok(self.coefficient_b_at(m, b))
    }

    fn coefficient_b_at(&self, m: f64, b: f64) -> f64 {
        let model = &self.inst.model;
        let r = self.inst.payoffs.r_payoff();
        let h1 = model.h1();
        -self.inst.law.survival(m) / (model.gamma() * model.scale_deriv(b))
            * (r.deriv(b) * h1.value(b) - r.value(b) * h1.deriv(b))
    }

    /// C(m) = (1 − F(m̲))·R(x_R)/h₁(x_R) + ∫_m^{m̲} f(y)G(y)/h₁(y) dy, m ≤ m̲.
    pub fn coefficient_c(&self, m: f64) -> Result<f64> {
        let m_low = self.boundary.m_low();
        if m > m_low * (1.0 + 1e-12) {
            return Err(Error::BadPoint {
                x: f64::NAN,
                m,
                constraint: "m <= m_low for coefficient C",
            });
        }
        let x_r = self.inst.payoffs.x_r();
        let anchor = self.inst.law.survival(m_low) * self.inst.payoffs.r_payoff().value(x_r)
            / self.inst.model.h1().value(x_r);
        if m >= m_low {
            return Ok(anchor);
        }
        let law = &self.inst.law;
        let payoffs = &self.inst.payoffs;
        let model = &self.inst.model;
        let integrand = |y: f64| law.density(y) * payoffs.bargain_g(y) / model.h1().value(y);
        // subdivide at the kinks of G (via V_U, V_R)
        let mut cuts = vec![m, m_low];
        for k in [payoffs.x_u(), payoffs.x_r()] {
            if k > m && k < m_low {
                cuts.push(k);
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut total = anchor;
        for w in cuts.windows(2) {
            total += numerics::integrate_adaptive(integrand, w[0], w[1], 1e-10, 1e-14)?;
        }
        Ok(total)
    }

    /// W(x, m) over the four regions.
    pub fn value(&self, x: f64, m: f64) -> Result<f64> {
        let region = self.region(x, m)?;
        self.value_in_region(x, m, region)
    }

    /// W evaluated with a caller-chosen region formula; used by the
    /// continuity checks at interfaces.
    pub fn value_in_region(&self, x: f64, m: f64, region: Region) -> Result<f64> {
        let payoffs = &self.inst.payoffs;
        let model = &self.inst.model;
        match region {
            Region::Stop => Ok(self.inst.law.survival(m) * payoffs.r_payoff().value(x)),
            Region::LeftOfStop => {
                let x_r = payoffs.x_r();
                Ok(self.inst.law.survival(m)
                    * model.h1_ratio(x, x_r)
                    * payoffs.r_payoff().value(x_r))
            }
            Region::RightOfStop => {
                let b = self.boundary.eval_extrapolated(m);
                Ok(self.coefficient_a_at(m, b) * model.h1().value(x)
                    + self.coefficient_b_at(m, b) * model.h2().value(x))
            }
            Region::BelowMlow => Ok(self.coefficient_c(m)? * model.h1().value(x)),
        }
    }

    /// V̄(x) = W(x, x) + F(x)G(x).
    pub fn initial_value(&self, x: f64) -> Result<f64> {
        Ok(self.value(x, x)? + self.inst.law.cdf(x) * self.inst.payoffs.bargain_g(x))
    }

    /// A′(m) in the closed form that avoids b′(m):
    /// A′ = f(m)[R(b)h₂(m) − G(m)h₂(b)]/D(b, m).
    pub fn coefficient_a_deriv(&self, m: f64) -> Result<f64> {
        let b = self.boundary.eval_extrapolated(m);
        let model = &self.inst.model;
        let h1 = model.h1();
        let h2 = model.h2();
        let d = h1.value(m) * h2.value(b) - h1.value(b) * h2.value(m);
        Ok(self.inst.law.density(m)
            * (self.inst.payoffs.r_payoff().value(b) * h2.value(m)
                - self.inst.payoffs.bargain_g(m) * h2.value(b))
            / d)
    }

    /// B′(m) = −f(m)[R(b)h₁(m) − G(m)h₁(b)]/D(b, m).
    pub fn coefficient_b_deriv(&self, m: f64) -> Result<f64> {
        let b = self.boundary.eval_extrapolated(m);
        let model = &self.inst.model;
        let h1 = model.h1();
        let h2 = model.h2();
        let d = h1.value(m) * h2.value(b) - h1.value(b) * h2.value(m);
        Ok(-self.inst.law.density(m)
            * (self.inst.payoffs.r_payoff().value(b) * h1.value(m)
                - self.inst.payoffs.bargain_g(m) * h1.value(b))
            / d)
    }

    /// Region-wise analytic ∂W/∂m. At m = m̲ the `side` argument selects
    /// the regime; elsewhere both sides agree.
    pub fn partial_m(&self, x: f64, m: f64, side: Side) -> Result<f64> {
        self.check_point(x, m)?;
        let m_low = self.boundary.m_low();
        let at_kink = (m - m_low).abs() <= 1e-14 * (1.0 + m_low);
        let below = m < m_low || (at_kink && side == Side::Left);
        let model = &self.inst.model;
        let payoffs = &self.inst.payoffs;
        let f_m = self.inst.law.density(m);
        if below {
            // C′(m)h₁(x) = −f(m)G(m)h₁(x)/h₁(m)
            return Ok(-f_m * payoffs.bargain_g(m) * model.h1_ratio(x, m));
        }
        let x_r = payoffs.x_r();
        if x < x_r {
            return Ok(-f_m * model.h1_ratio(x, x_r) * payoffs.r_payoff().value(x_r));
        }
        let b = self.boundary.eval_extrapolated(m);
        if x <= b {
            return Ok(-f_m * payoffs.r_payoff().value(x));
        }
        Ok(self.coefficient_a_deriv(m)? * model.h1().value(x)
            + self.coefficient_b_deriv(m)? * model.h2().value(x))
    }

    /// Region-wise analytic ∂W/∂x.
    pub fn partial_x(&self, x: f64, m: f64) -> Result<f64> {
        let region = self.region(x, m)?;
        let model = &self.inst.model;
        let payoffs = &self.inst.payoffs;
        Ok(match region {
            Region::Stop => self.inst.law.survival(m) * payoffs.r_payoff().deriv(x),
            Region::LeftOfStop => {
                let x_r = payoffs.x_r();
                self.inst.law.survival(m)
                    * model.h1_ratio(x, x_r)
                    * model.h1().log_deriv(x)
                    * payoffs.r_payoff().value(x_r)
            }
            Region::RightOfStop => {
                let b = self.boundary.eval_extrapolated(m);
                self.coefficient_a_at(m, b) * model.h1().deriv(x)
                    + self.coefficient_b_at(m, b) * model.h2().deriv(x)
            }
            Region::BelowMlow => self.coefficient_c(m)? * model.h1().deriv(x),
        })
    }

    /// Region-wise analytic ∂²W/∂x²; feeds the PDE-residual checks.
    pub fn partial_xx(&self, x: f64, m: f64) -> Result<f64> {
        let region = self.region(x, m)?;
        let model = &self.inst.model;
        let payoffs = &self.inst.payoffs;
        Ok(match region {
            Region::Stop => self.inst.law.survival(m) * payoffs.r_payoff().second_deriv(x),
            Region::LeftOfStop => {
                let x_r = payoffs.x_r();
                self.inst.law.survival(m) * model.h1_ratio(x, x_r) / model.h1().value(x)
                    * model.h1().second_deriv(x)
                    * payoffs.r_payoff().value(x_r)
            }
            Region::RightOfStop => {
                let b = self.boundary.eval_extrapolated(m);
                self.coefficient_a_at(m, b) * model.h1().second_deriv(x)
                    + self.coefficient_b_at(m, b) * model.h2().second_deriv(x)
            }
            Region::BelowMlow => self.coefficient_c(m)? * model.h1().second_deriv(x),
        })
    }
}
