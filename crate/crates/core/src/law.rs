//! The developer-cost law and the induced law of the breakthrough threshold
//! Y = P⁻¹(Z): cdf F, density f = P′·f_Z∘P, and breakthrough rate
//! H = f/(1 − F).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics;
use crate::payoff::TechnologyPayoffs;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const SQRT_2PI: f64 = 2.506628274631000502415765284811;

type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Law of the development cost Z on (0, ∞).
#[derive(Clone)]
pub enum CostLaw {
    Exponential { rate: f64 },
    LogNormal { location: f64, scale: f64 },
    Custom { density: DensityFn, cdf: DensityFn },
}

impl std::fmt::Debug for CostLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CostLaw::Exponential { rate } => write!(f, "Exponential(rate={rate})"),
            CostLaw::LogNormal { location, scale } => {
                write!(f, "LogNormal(location={location}, scale={scale})")
            }
            CostLaw::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl CostLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            CostLaw::Exponential { rate } => {
                if !(*rate > 0.0) || !rate.is_finite() {
                    return Err(Error::invalid("rate", format!("must be > 0, got {rate}")));
                }
            }
            CostLaw::LogNormal { location, scale } => {
                if !(*scale > 0.0) || !scale.is_finite() || !location.is_finite() {
                    return Err(Error::invalid(
                        "lognormal",
                        format!("need finite location and scale > 0, got ({location}, {scale})"),
                    ));
                }
            }
            CostLaw::Custom { .. } => {}
        }
        Ok(())
    }

    pub fn density(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        match self {
            CostLaw::Exponential { rate } => rate * (-rate * z).exp(),
            CostLaw::LogNormal { location, scale } => {
                let u = (z.ln() - location) / scale;
                (-0.5 * u * u).exp() / (z * scale * SQRT_2PI)
            }
            CostLaw::Custom { density, .. } => density(z),
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        match self {
            CostLaw::Exponential { rate } => -(-rate * z).exp_m1(),
            CostLaw::LogNormal { location, scale } => {
                let u = (z.ln() - location) / (scale * SQRT_2);
                0.5 * libm::erfc(-u)
            }
            CostLaw::Custom { cdf, .. } => cdf(z),
        }
    }

    /// Survival 1 − F_Z, computed in a tail-stable form.
    pub fn survival(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 1.0;
        }
        match self {
            CostLaw::Exponential { rate } => (-rate * z).exp(),
            CostLaw::LogNormal { location, scale } => {
                let u = (z.ln() - location) / (scale * SQRT_2);
                0.5 * libm::erfc(u)
            }
            CostLaw::Custom { cdf, .. } => 1.0 - cdf(z),
        }
    }

    /// Hazard rate f_Z/(1 − F_Z).
    pub fn hazard(&self, z: f64) -> f64 {
        self.density(z) / self.survival(z)
    }

    /// Quantile by monotone bisection on the cdf (closed form for the
    /// exponential family).
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0 < p && p < 1.0) {
            return Err(Error::invalid("p", format!("quantile needs p in (0,1), got {p}")));
        }
        if let CostLaw::Exponential { rate } = self {
            return Ok(-(-p).ln_1p() / rate);
        }
        let f = |z: f64| self.cdf(z) - p;
        let (lo, hi) = numerics::expand_bracket_up(f, 1e-12, 4.0, 400, "cost quantile")?;
        numerics::bisect_root(f, lo, hi, 1e-12 * hi.max(1.0), 300, "cost quantile")
    }

    /// Draw a cost, consuming the given RNG.
    pub fn sample(&self, rng: &mut impl rand::Rng) -> f64 {
        use rand_distr::Distribution;
        match self {
            CostLaw::Exponential { rate } => {
                rand_distr::Exp::new(*rate).expect("validated rate").sample(rng)
            }
            CostLaw::LogNormal { location, scale } => rand_distr::LogNormal::new(*location, *scale)
                .expect("validated lognormal")
                .sample(rng),
            CostLaw::Custom { cdf, .. } => {
                // inverse-cdf sampling
                let u: f64 = rng.random();
                let f = |z: f64| cdf(z) - u;
                let (lo, hi) =
                    numerics::expand_bracket_up(f, 1e-12, 4.0, 400, "custom cost sample").unwrap();
                numerics::bisect_root(f, lo, hi, 1e-10 * hi.max(1.0), 200, "custom cost sample")
                    .unwrap()
            }
        }
    }
}

/// True iff the hazard of `a` strictly exceeds the hazard of `b` at every
/// grid point, i.e. `b` dominates `a` in the hazard-rate order.
pub fn hazard_order_dominates(a: &CostLaw, b: &CostLaw, grid: &[f64]) -> bool {
    !grid.is_empty() && grid.iter().all(|&z| a.hazard(z) > b.hazard(z))
}

/// Law of the breakthrough threshold Y = P⁻¹(Z).
#[derive(Debug, Clone)]
pub struct ThresholdLaw {
    costs: CostLaw,
    payoffs: TechnologyPayoffs,
}

impl ThresholdLaw {
    /// Composes the cost law with the (validated strictly increasing)
    /// surplus share P of the payoff structure.
    pub fn from_costs(costs: CostLaw, payoffs: &TechnologyPayoffs) -> Result<Self> {
        costs.validate()?;
        Ok(Self {
            costs,
            payoffs: payoffs.clone(),
        })
    }

    pub fn costs(&self) -> &CostLaw {
        &self.costs
    }

    /// F(m) = F_Z(P(m)).
    pub fn cdf(&self, m: f64) -> f64 {
        self.costs.cdf(self.payoffs.bargain_p(m))
    }

    /// 1 − F(m), tail-stable.
    pub fn survival(&self, m: f64) -> f64 {
        self.costs.survival(self.payoffs.bargain_p(m))
    }

    /// f(m) = P′(m)·f_Z(P(m)); right derivative of P at its kinks.
    pub fn density(&self, m: f64) -> f64 {
        self.payoffs.bargain_p_deriv(m) * self.costs.density(self.payoffs.bargain_p(m))
    }

    /// Breakthrough rate H(m) = f(m)/(1 − F(m)).
    pub fn hazard(&self, m: f64) -> f64 {
        self.payoffs.bargain_p_deriv(m) * self.costs.hazard(self.payoffs.bargain_p(m))
    }

    /// State level m with F(m) = p.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        let z = self.costs.quantile(p)?;
        self.payoffs.invert_bargain_p(z)
    }

    /// Draw a threshold Y = P⁻¹(Z).
    pub fn sample(&self, rng: &mut impl rand::Rng) -> Result<f64> {
        let z = self.costs.sample(rng);
        self.payoffs.invert_bargain_p(z)
    }
}
