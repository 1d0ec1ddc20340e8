//! Comparative statics: boundary ordering under hazard-rate ordering of the
//! cost laws and under dominance of the breakthrough payoff.

use crate::boundary::{self, FreeBoundary, SolverConfig};
use crate::error::Result;
use crate::law::{hazard_order_dominates, CostLaw, ThresholdLaw};
use crate::payoff::TechnologyPayoffs;
use crate::{DiffusionModel, Instance};

/// Outcome of a two-instance comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// The predicted strict ordering holds pointwise with margin.
    OrderingHolds,
    /// The two boundaries agree within solver tolerance.
    EqualWithinTolerance,
    /// A precondition failed; no ordering is asserted.
    Inconclusive,
    /// Preconditions held but the predicted ordering was violated.
    Violated,
}

/// Comparison artifacts: the two endpoints, a common-domain grid of both
/// boundaries, and the verdict.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub verdict: Verdict,
    pub m_low_1: f64,
    pub m_low_2: f64,
    /// Rows (m, b₁(m), b₂(m)) on the common comparison grid.
    pub grid: Vec<(f64, f64, f64)>,
    pub margin: f64,
    pub detail: String,
}

fn comparison_grid(b1: &FreeBoundary, b2: &FreeBoundary) -> Vec<(f64, f64, f64)> {
    // 200 log-spaced points from max(m̲₁, m̲₂) to 0.9·horizon
    let lo = b1.m_low().max(b2.m_low());
    let hi = 0.9 * b1.horizon().min(b2.horizon());
    let n = 200;
    let step = (hi.ln() - lo.ln()) / (n - 1) as f64;
    (0..n)
        .map(|i| {
            let m = (lo.ln() + step * i as f64).exp().clamp(lo, hi);
            (m, b1.eval_extrapolated(m), b2.eval_extrapolated(m))
        })
        .collect()
}

fn equal_within(b1: &FreeBoundary, b2: &FreeBoundary, grid: &[(f64, f64, f64)], tol: f64) -> bool {
    (b1.m_low() - b2.m_low()).abs() <= tol
        && grid.iter().all(|&(_, v1, v2)| (v1 - v2).abs() <= tol)
}

/// Boundary ordering when `costs2` dominates `costs1` in the hazard-rate
/// order: the endpoint drops (m̲₁ > m̲₂) and the dominated boundary lies
/// below (b₂ > b₁) on the common domain. The hazard precondition is
/// verified on a cost grid; failure marks the report inconclusive.
pub fn compare_cost_laws(
    costs1: CostLaw,
    costs2: CostLaw,
    model: &DiffusionModel,
    payoffs: &TechnologyPayoffs,
    cfg: &SolverConfig,
) -> Result<ComparisonReport> {
    let b1 = solve_with_costs(model, payoffs, costs1.clone(), cfg)?;
    let b2 = solve_with_costs(model, payoffs, costs2.clone(), cfg)?;
    let margin = 1e-7 * payoffs.x_r();
    let grid = comparison_grid(&b1, &b2);

    // hazard grid in cost space, spanning the bulk of both laws
    let z_hi = costs1.quantile(1.0 - 1e-6)?.max(costs2.quantile(1.0 - 1e-6)?);
    let zs: Vec<f64> = (1..=200).map(|i| z_hi * i as f64 / 200.0).collect();
    // which direction of hazard-rate dominance holds, if any
    let two_dominates_one = hazard_order_dominates(&costs1, &costs2, &zs);
    let one_dominates_two = hazard_order_dominates(&costs2, &costs1, &zs);
    if !two_dominates_one && !one_dominates_two {
        let verdict = if equal_within(&b1, &b2, &grid, margin) {
            Verdict::EqualWithinTolerance
        } else {
            Verdict::Inconclusive
        };
        return Ok(ComparisonReport {
            verdict,
            m_low_1: b1.m_low(),
            m_low_2: b2.m_low(),
            grid,
            margin,
            detail: "hazard-rate dominance precondition not satisfied on the grid".into(),
        });
    }

    // dominated law: lower endpoint, higher boundary
    let ordered = if two_dominates_one {
        b1.m_low() > b2.m_low() + margin && grid.iter().all(|&(_, v1, v2)| v2 > v1 + margin)
    } else {
        b2.m_low() > b1.m_low() + margin && grid.iter().all(|&(_, v1, v2)| v1 > v2 + margin)
    };
    let verdict = if ordered {
        Verdict::OrderingHolds
    } else if equal_within(&b1, &b2, &grid, margin) {
        Verdict::EqualWithinTolerance
    } else {
        Verdict::Violated
    };
    let direction = if two_dominates_one {
        "law 2 dominates law 1"
    } else {
        "law 1 dominates law 2 (reversed ordering applies)"
    };
    Ok(ComparisonReport {
        verdict,
        m_low_1: b1.m_low(),
        m_low_2: b2.m_low(),
        grid,
        margin,
        detail: format!("{direction}; m_low_1={}, m_low_2={}", b1.m_low(), b2.m_low()),
    })
}

fn solve_with_costs(
    model: &DiffusionModel,
    payoffs: &TechnologyPayoffs,
    costs: CostLaw,
    cfg: &SolverConfig,
) -> Result<FreeBoundary> {
    let law = ThresholdLaw::from_costs(costs, payoffs)?;
    let inst = Instance {
        model: model.clone(),
        payoffs: payoffs.clone(),
        law,
    };
    boundary::find_endpoint(&inst, cfg)
}

/// Boundary ordering when the breakthrough payoff improves from κ₁ to
/// κ₂ > κ₁ (linear family, so U₂ > U₁ and U₂′ > U₁′) under a cost law with
/// the monotone hazard-rate property: the endpoint rises (m̲₂ > m̲₁) and
/// the improved boundary lies below (b₁ > b₂).
pub fn compare_payoffs(
    kappa1: f64,
    kappa2: f64,
    model: &DiffusionModel,
    investment_cost: f64,
    bargaining: crate::payoff::Bargaining,
    costs: CostLaw,
    cfg: &SolverConfig,
) -> Result<ComparisonReport> {
    let payoffs1 = TechnologyPayoffs::linear(model, investment_cost, kappa1, bargaining)?;
    let payoffs2 = TechnologyPayoffs::linear(model, investment_cost, kappa2, bargaining)?;
    let margin = 1e-7 * payoffs1.x_r();

    // preconditions: κ₂ > κ₁ > 1 and MHRP for the cost law
    let mut precondition_ok = kappa2 > kappa1 && kappa1 > 1.0;
    let z_hi = costs.quantile(1.0 - 1e-6)?;
    let mut prev = f64::NEG_INFINITY;
    for i in 1..=200 {
        let z = z_hi * i as f64 / 200.0;
        let h = costs.hazard(z);
        if h < prev * (1.0 - 1e-9) {
            precondition_ok = false;
            break;
        }
        prev = h;
    }

    let b1 = solve_with_costs(model, &payoffs1, costs.clone(), cfg)?;
    let b2 = solve_with_costs(model, &payoffs2, costs.clone(), cfg)?;
    let grid = comparison_grid(&b1, &b2);

    if !precondition_ok {
        let verdict = if equal_within(&b1, &b2, &grid, margin) {
            Verdict::EqualWithinTolerance
        } else {
            Verdict::Inconclusive
        };
        return Ok(ComparisonReport {
            verdict,
            m_low_1: b1.m_low(),
            m_low_2: b2.m_low(),
            grid,
            margin,
            detail: "payoff dominance or MHRP precondition not satisfied".into(),
        });
    }

    let ordered = b2.m_low() > b1.m_low() + margin
        && grid.iter().all(|&(_, v1, v2)| v1 > v2 + margin);
    let verdict = if ordered {
        Verdict::OrderingHolds
    } else if equal_within(&b1, &b2, &grid, margin) {
        Verdict::EqualWithinTolerance
    } else {
        Verdict::Violated
    };
    Ok(ComparisonReport {
        verdict,
        m_low_1: b1.m_low(),
        m_low_2: b2.m_low(),
        grid,
        margin,
        detail: format!("m_low_1={}, m_low_2={}", b1.m_low(), b2.m_low()),
    })
}
