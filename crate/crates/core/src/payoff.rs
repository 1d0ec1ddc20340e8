//! Technology payoffs and their stand-alone stopping solutions: R, U, the
//! thresholds x_R and x_U, and the bargaining split (G, P) of the
//! breakthrough surplus.

use std::sync::Arc;

use crate::diffusion::{Curve, DiffusionModel, LinearCurve};
use crate::error::{Error, Result};
use crate::numerics;

/// How the surplus V_U − V_R is split between the decision maker and a
/// successful developer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bargaining {
    /// G = ½(V_U + V_R), P = ½(V_U − V_R).
    #[default]
    Nash,
    /// Ḡ = (2V_U + V_R)/3, P̲ = (V_U − V_R)/6.
    Shapley,
}

/// Value function of the stand-alone problem sup E[e^{−rτ} payoff(X_τ)]:
/// `h₁(x)/h₁(x*)·payoff(x*)` below the threshold x*, the payoff itself above.
#[derive(Clone)]
pub struct StandaloneSolution {
    threshold: f64,
    payoff: Arc<dyn Curve>,
    h1: Arc<dyn Curve>,
    payoff_at_threshold: f64,
    log_h1_at_threshold: f64,
}

impl std::fmt::Debug for StandaloneSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StandaloneSolution")
            .field("threshold", &self.threshold)
            .field("payoff_at_threshold", &self.payoff_at_threshold)
            .finish()
    }
}

impl StandaloneSolution {
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn value(&self, x: f64) -> f64 {
        if x < self.threshold {
            (self.h1.log_value(x) - self.log_h1_at_threshold).exp() * self.payoff_at_threshold
        } else {
            self.payoff.value(x)
        }
    }

    /// Right derivative at the threshold kink (both one-sided derivatives
    /// coincide there by smooth fit, but the stopped branch is used).
    pub fn deriv(&self, x: f64) -> f64 {
        if x < self.threshold {
            self.value(x) * self.h1.log_deriv(x)
        } else {
            self.payoff.deriv(x)
        }
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        if x < self.threshold {
            let ratio = (self.h1.log_value(x) - self.log_h1_at_threshold).exp();
            ratio * self.payoff_at_threshold * self.h1.second_deriv(x) / self.h1.value(x)
        } else {
            self.payoff.second_deriv(x)
        }
    }
}

/// Solve the stand-alone stopping problem for a payoff satisfying the
/// single-sign-change condition: the threshold is the root of
/// g(x) = payoff′(x)h₁(x) − payoff(x)h₁′(x) on (x₀, β), found by bisection
/// after geometric bracket expansion from x₀.
pub fn solve_standalone(
    model: &DiffusionModel,
    payoff: Arc<dyn Curve>,
    x0: f64,
) -> Result<StandaloneSolution> {
    model.check_state(x0)?;
    // same root as g, with the positive factor h1 divided out
    let h1 = model.h1().clone();
    let g = {
        let h1 = h1.clone();
        let payoff = payoff.clone();
        move |x: f64| payoff.deriv(x) - payoff.value(x) * h1.log_deriv(x)
    };
    let start = x0 * (1.0 + 1e-9);
    let (lo, hi) = if g(start) <= 0.0 {
        // the crossing sits within rounding distance of x0 (degenerate
        // continuation gap, e.g. vanishing volatility)
        let lo = x0 * (1.0 - 1e-6);
        if !(g(lo) > 0.0) {
            return Err(Error::Bracketing {
                what: "standalone threshold",
                detail: "payoff appears to violate the single sign-change condition".into(),
            });
        }
        (lo, start)
    } else {
        numerics::expand_bracket_up(&g, start, 1.5, 400, "standalone threshold").map_err(|_| {
            Error::Bracketing {
                what: "standalone threshold",
                detail: "payoff appears to violate the single sign-change condition".into(),
            }
        })?
    };
    let scale = if hi.is_finite() { hi } else { 1.0 };
    let threshold = numerics::bisect_root(&g, lo, hi, 1e-12 * scale.max(1.0), 400, "standalone threshold")?;
    let payoff_at_threshold = payoff.value(threshold);
    if !(payoff_at_threshold > 0.0) {
        return Err(Error::Solver(format!(
            "stand-alone payoff at threshold {threshold} is {payoff_at_threshold}, expected > 0"
        )));
    }
    Ok(StandaloneSolution {
        threshold,
        log_h1_at_threshold: h1.log_value(threshold),
        payoff,
        h1,
        payoff_at_threshold,
    })
}

/// The two available technologies and everything derived from them:
/// stand-alone payoff R(x) = x − I with threshold x_R, breakthrough payoff
/// U(x) = κx − I with threshold x_U, the value functions V_R and V_U, and
/// the bargaining functions G and P.
#[derive(Clone)]
pub struct TechnologyPayoffs {
    investment_cost: f64,
    kappa: f64,
    r_payoff: Arc<dyn Curve>,
    v_r: StandaloneSolution,
    v_u: StandaloneSolution,
    x0_r: f64,
    bargaining: Bargaining,
    /// cached monotone grid of (x, P(x)) used to bracket P⁻¹
    surplus_grid: Arc<Vec<(f64, f64)>>,
}

impl std::fmt::Debug for TechnologyPayoffs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TechnologyPayoffs")
            .field("investment_cost", &self.investment_cost)
            .field("kappa", &self.kappa)
            .field("x_r", &self.v_r.threshold())
            .field("x_u", &self.v_u.threshold())
            .field("x0_r", &self.x0_r)
            .field("bargaining", &self.bargaining)
            .finish()
    }
}

impl TechnologyPayoffs {
    /// Linear technology family on a model satisfying μ < r.
    pub fn linear(
        model: &DiffusionModel,
        investment_cost: f64,
        kappa: f64,
        bargaining: Bargaining,
    ) -> Result<Self> {
        if !(investment_cost > 0.0) || !investment_cost.is_finite() {
            return Err(Error::invalid(
                "I",
                format!("investment cost must be > 0, got {investment_cost}"),
            ));
        }
        if !(kappa > 1.0) || !kappa.is_finite() {
            return Err(Error::invalid(
                "kappa",
                format!("technology multiplier must be > 1, got {kappa}"),
            ));
        }
        let r_payoff: Arc<dyn Curve> = Arc::new(LinearCurve {
            slope: 1.0,
            intercept: -investment_cost,
        });
        let u_payoff: Arc<dyn Curve> = Arc::new(LinearCurve {
            slope: kappa,
            intercept: -investment_cost,
        });
        // sign-change points of LR − rR and LU − rU for the linear family
        let (mu_of, r_rate) = model
            .gbm_params()
            .map(|p| (p.mu, p.r))
            .unwrap_or_else(|| (model.drift(1.0), model.r()));
        let x0_r = r_rate * investment_cost / (r_rate - mu_of);
        let x0_u = x0_r / kappa;
        let v_r = solve_standalone(model, r_payoff.clone(), x0_r)?;
        let v_u = solve_standalone(model, u_payoff, x0_u)?;
        Self::assemble(model, investment_cost, kappa, r_payoff, v_r, v_u, x0_r, bargaining)
    }

    /// Custom payoff pair. Only the single-sign-change condition is checked
    /// (on a grid); integrability and growth conditions are the caller's
    /// obligation.
    pub fn custom(
        model: &DiffusionModel,
        r_payoff: Arc<dyn Curve>,
        u_payoff: Arc<dyn Curve>,
        x0_r: f64,
        x0_u: f64,
        bargaining: Bargaining,
    ) -> Result<Self> {
        for (x0, payoff, name) in [(x0_r, &r_payoff, "R"), (x0_u, &u_payoff, "U")] {
            let drift_term = |x: f64| {
                model.generator_from_derivs(x, payoff.deriv(x), payoff.second_deriv(x))
                    - model.r() * payoff.value(x)
            };
            for k in 1..=40 {
                let below = x0 * (k as f64) / 41.0;
                let above = x0 * (1.0 + k as f64);
                if model.contains(below) && drift_term(below) < 0.0 {
                    return Err(Error::invalid(
                        "payoff",
                        format!("L{name} − r{name} changes sign below x0 at x = {below}"),
                    ));
                }
                if model.contains(above) && drift_term(above) > 0.0 {
                    return Err(Error::invalid(
                        "payoff",
                        format!("L{name} − r{name} changes sign above x0 at x = {above}"),
                    ));
                }
            }
        }
        let v_r = solve_standalone(model, r_payoff.clone(), x0_r)?;
        let v_u = solve_standalone(model, u_payoff, x0_u)?;
        Self::assemble(model, f64::NAN, f64::NAN, r_payoff, v_r, v_u, x0_r, bargaining)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        model: &DiffusionModel,
        investment_cost: f64,
        kappa: f64,
        r_payoff: Arc<dyn Curve>,
        v_r: StandaloneSolution,
        v_u: StandaloneSolution,
        x0_r: f64,
        bargaining: Bargaining,
    ) -> Result<Self> {
        if !(v_u.threshold() < v_r.threshold()) {
            return Err(Error::Solver(format!(
                "expected x_U < x_R, got x_U = {}, x_R = {}",
                v_u.threshold(),
                v_r.threshold()
            )));
        }
        // smooth fit at x_R: R'(x_R) h1(x_R) = R(x_R) h1'(x_R)
        let x_r = v_r.threshold();
        let sf = r_payoff.deriv(x_r) - r_payoff.value(x_r) * model.h1().log_deriv(x_r);
        if sf.abs() > 1e-9 * r_payoff.deriv(x_r).abs().max(1e-300) {
            return Err(Error::Solver(format!("smooth fit violated at x_R: residual {sf}")));
        }
        let mut this = Self {
            investment_cost,
            kappa,
            r_payoff,
            v_r,
            v_u,
            x0_r,
            bargaining,
            surplus_grid: Arc::new(Vec::new()),
        };
        this.surplus_grid = Arc::new(this.build_surplus_grid(model)?);
        Ok(this)
    }

    fn build_surplus_grid(&self, model: &DiffusionModel) -> Result<Vec<(f64, f64)>> {
        // log-spaced grid wide enough to bracket P over (0, huge)
        let x_r = self.x_r();
        let lo = (x_r * 1e-8).max(model.state_interval().0 * (1.0 + 1e-12));
        let hi = x_r * 1e8;
        let n = 1024;
        let log_lo = lo.ln();
        let step = (hi.ln() - log_lo) / (n - 1) as f64;
        let mut grid = Vec::with_capacity(n);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..n {
            let x = (log_lo + step * i as f64).exp();
            let p = self.bargain_p(x);
            if !(p > prev) {
                return Err(Error::Solver(format!(
                    "surplus share P not strictly increasing near x = {x}"
                )));
            }
            prev = p;
            grid.push((x, p));
        }
        Ok(grid)
    }

    pub fn investment_cost(&self) -> f64 {
        self.investment_cost
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn bargaining(&self) -> Bargaining {
        self.bargaining
    }

    /// Stand-alone investment threshold x_R.
    pub fn x_r(&self) -> f64 {
        self.v_r.threshold()
    }

    /// Breakthrough-technology threshold x_U.
    pub fn x_u(&self) -> f64 {
        self.v_u.threshold()
    }

    /// Sign-change point of ℒR − rR.
    pub fn x0_r(&self) -> f64 {
        self.x0_r
    }

    pub fn r_payoff(&self) -> &Arc<dyn Curve> {
        &self.r_payoff
    }

    pub fn v_r(&self, x: f64) -> f64 {
        self.v_r.value(x)
    }

    pub fn v_u(&self, x: f64) -> f64 {
        self.v_u.value(x)
    }

    pub fn v_r_solution(&self) -> &StandaloneSolution {
        &self.v_r
    }

    pub fn v_u_solution(&self) -> &StandaloneSolution {
        &self.v_u
    }

    /// Nash split: G = ½(V_U + V_R), P = ½(V_U − V_R).
    pub fn nash_split(&self, x: f64) -> (f64, f64) {
        let vu = self.v_u.value(x);
        let vr = self.v_r.value(x);
        (0.5 * (vu + vr), 0.5 * (vu - vr))
    }

    /// Shapley split: Ḡ = (2V_U + V_R)/3, P̲ = (V_U − V_R)/6.
    pub fn shapley_split(&self, x: f64) -> (f64, f64) {
        let vu = self.v_u.value(x);
        let vr = self.v_r.value(x);
        ((2.0 * vu + vr) / 3.0, (vu - vr) / 6.0)
    }

    /// Continuation payoff G under the selected bargaining rule.
    pub fn bargain_g(&self, x: f64) -> f64 {
        match self.bargaining {
            Bargaining::Nash => self.nash_split(x).0,
            Bargaining::Shapley => self.shapley_split(x).0,
        }
    }

    /// Developer share P under the selected bargaining rule.
    pub fn bargain_p(&self, x: f64) -> f64 {
        match self.bargaining {
            Bargaining::Nash => self.nash_split(x).1,
            Bargaining::Shapley => self.shapley_split(x).1,
        }
    }

    /// P′(x) from the piecewise derivative of V_U − V_R; the right
    /// derivative is used at the kinks x_U and x_R.
    pub fn bargain_p_deriv(&self, x: f64) -> f64 {
        let d = self.v_u.deriv(x) - self.v_r.deriv(x);
        match self.bargaining {
            Bargaining::Nash => 0.5 * d,
            Bargaining::Shapley => d / 6.0,
        }
    }

    /// ℒG − rG under the selected rule, defined away from the kinks; used
    /// by the invariant checks (must be ≤ 0).
    pub fn bargain_g_drift_term(&self, model: &DiffusionModel, x: f64) -> f64 {
        let part = |s: &StandaloneSolution| {
            model.generator_from_derivs(x, s.deriv(x), s.second_deriv(x)) - model.r() * s.value(x)
        };
        let (wu, wr) = match self.bargaining {
            Bargaining::Nash => (0.5, 0.5),
            Bargaining::Shapley => (2.0 / 3.0, 1.0 / 3.0),
        };
        wu * part(&self.v_u) + wr * part(&self.v_r)
    }

    /// Monotone inverse of P: the x with P(x) = z, by bisection on a
    /// bracket taken from the cached grid (grown geometrically outside it).
    pub fn invert_bargain_p(&self, z: f64) -> Result<f64> {
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::invalid("z", format!("P is inverted on (0, ∞), got {z}")));
        }
        let grid = &self.surplus_grid;
        let idx = grid.partition_point(|&(_, p)| p < z);
        let (mut lo, mut hi);
        if idx == 0 {
            hi = grid[0].0;
            lo = hi;
            while self.bargain_p(lo) > z {
                lo *= 0.5;
                if lo < 1e-300 {
                    return Err(Error::Bracketing {
                        what: "P inverse",
                        detail: format!("cannot bracket z = {z} from below"),
                    });
                }
            }
        } else if idx == grid.len() {
            lo = grid[grid.len() - 1].0;
            hi = lo;
            while self.bargain_p(hi) < z {
                hi *= 2.0;
                if !hi.is_finite() {
                    return Err(Error::Bracketing {
                        what: "P inverse",
                        detail: format!("cannot bracket z = {z} from above"),
                    });
                }
            }
        } else {
            lo = grid[idx - 1].0;
            hi = grid[idx].0;
        }
        numerics::bisect_root(
            |x| self.bargain_p(x) - z,
            lo,
            hi,
            1e-13 * hi.max(1.0),
            200,
            "P inverse",
        )
    }

    /// L(x) = ℒR(x) − rR(x); strictly negative beyond the sign-change point.
    pub fn drift_term_l(&self, model: &DiffusionModel, x: f64) -> f64 {
        model.generator_from_derivs(x, self.r_payoff.deriv(x), self.r_payoff.second_deriv(x))
            - model.r() * self.r_payoff.value(x)
    }
}
