//! The invariant suite behind `maxstop check` and the acceptance tests:
//! pasting conditions at the boundary, the reflection condition on the
//! diagonal, PDE residuals, bounds, sign structure, and (at the full
//! level) Monte Carlo agreement.
//!
//! The m-derivatives of the coefficient functions are taken by central
//! finite differences of their closed forms along the stored boundary, so
//! the smooth-fit and reflection checks genuinely test that the grid
//! solves the boundary ODE rather than replaying the identities used to
//! build the surface.

use rand::Rng;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::Result;
use crate::sim::{self, SimConfig, StoppingPolicy};
use crate::value::{Region, Side, ValueSurface};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckLevel {
    Fast,
    Full,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Worst observed residual (meaning depends on the check).
    pub worst: f64,
    pub tol: f64,
    pub detail: String,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckReport {
    pub level: CheckLevel,
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
}

impl CheckReport {
    pub fn failed_names(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }
}

fn outcome(name: &str, worst: f64, tol: f64, detail: impl Into<String>) -> CheckOutcome {
    CheckOutcome {
        name: name.to_string(),
        passed: worst.is_finite() && worst <= tol,
        worst,
        tol,
        detail: detail.into(),
    }
}

/// FD step for m-differentiation of the coefficient functions. Wider than
/// the state-direction step: it has to dominate the interpolation jitter
/// of b(m) between grid nodes.
fn coeff_fd_step(m: f64) -> f64 {
    1e-4 * (1.0 + m)
}

/// 100 sample maxima strictly inside the boundary domain.
fn sample_ms(surface: &ValueSurface, n: usize) -> Vec<f64> {
    let m_low = surface.m_low();
    let hi = 0.9 * surface.boundary().horizon();
    (0..n)
        .map(|i| {
            let t = (i as f64 + 0.7) / n as f64;
            // log spacing concentrates samples near the endpoint
            (m_low.ln() + t * (hi.ln() - m_low.ln())).exp().max(m_low + 3.0 * coeff_fd_step(m_low))
        })
        .collect()
}

fn coefficient_derivs_fd(surface: &ValueSurface, m: f64) -> Result<(f64, f64)> {
    // five-point stencil: the boundary interpolant is only piecewise smooth,
    // so a higher-order formula buys headroom over both truncation and the
    // interpolation jitter
    let h = coeff_fd_step(m);
    let five = |f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        Ok((-f(m + 2.0 * h)? + 8.0 * f(m + h)? - 8.0 * f(m - h)? + f(m - 2.0 * h)?) / (12.0 * h))
    };
    let a = five(&|v| surface.coefficient_a(v))?;
    let b = five(&|v| surface.coefficient_b(v))?;
    Ok((a, b))
}

/// Horizontal smooth fit at the boundary: A h₁′(b) + B h₂′(b) = (1−F)R′(b).
pub fn check_smooth_fit(surface: &ValueSurface, samples: &[f64]) -> CheckOutcome {
    let inst = surface.instance();
    let mut worst: f64 = 0.0;
    for &m in samples {
        let res = (|| -> Result<f64> {
            let b = surface.boundary().eval(m)?;
            let lhs = surface.coefficient_a(m)? * inst.model.h1().deriv(b)
                + surface.coefficient_b(m)? * inst.model.h2().deriv(b);
            let rhs = inst.law.survival(m) * inst.payoffs.r_payoff().deriv(b);
            Ok((lhs - rhs).abs() / rhs.abs().max(1e-300))
        })();
        worst = worst.max(res.unwrap_or(f64::INFINITY));
    }
    outcome(
        "smooth_fit_horizontal",
        worst,
        1e-6,
        format!("{} sampled maxima", samples.len()),
    )
}

/// Vertical smooth fit at the boundary: dA/dm·h₁(b) + dB/dm·h₂(b) =
/// −f(m)R(b(m)), with the coefficient derivatives taken numerically.
pub fn check_smooth_fit_vertical(surface: &ValueSurface, samples: &[f64]) -> CheckOutcome {
    let inst = surface.instance();
    let mut worst: f64 = 0.0;
    for &m in samples {
        let res = (|| -> Result<f64> {
            let b = surface.boundary().eval(m)?;
            let (da, db) = coefficient_derivs_fd(surface, m)?;
            let t1 = da * inst.model.h1().value(b);
            let t2 = db * inst.model.h2().value(b);
            let rhs = -inst.law.density(m) * inst.payoffs.r_payoff().value(b);
            let scale = t1.abs().max(t2.abs()).max(rhs.abs()).max(1e-300);
            Ok((t1 + t2 - rhs).abs() / scale)
        })();
        worst = worst.max(res.unwrap_or(f64::INFINITY));
    }
    outcome(
        "smooth_fit_vertical",
        worst,
        1e-6,
        format!("{} sampled maxima", samples.len()),
    )
}

/// Reflection condition on the diagonal: dA/dm·h₁(m) + dB/dm·h₂(m) =
/// −f(m)G(m) for m > m̲, and dC/dm = −f(m)G(m)/h₁(m) below m̲.
pub fn check_neumann(surface: &ValueSurface, samples: &[f64]) -> CheckOutcome {
    let inst = surface.instance();
    let mut worst: f64 = 0.0;
    for &m in samples {
        let res = (|| -> Result<f64> {
            let (da, db) = coefficient_derivs_fd(surface, m)?;
            let t1 = da * inst.model.h1().value(m);
            let t2 = db * inst.model.h2().value(m);
            let rhs = -inst.law.density(m) * inst.payoffs.bargain_g(m);
            let scale = t1.abs().max(t2.abs()).max(rhs.abs()).max(1e-300);
            Ok((t1 + t2 - rhs).abs() / scale)
        })();
        worst = worst.max(res.unwrap_or(f64::INFINITY));
    }
    // below the endpoint the reflection condition pins C′
    let m_low = surface.m_low();
    for i in 1..=20 {
        let m = m_low * i as f64 / 21.0;
        if !inst.model.contains(m) {
            continue;
        }
        let h = 1e-6 * (1.0 + m);
        let res = (|| -> Result<f64> {
            let dc = (surface.coefficient_c((m + h).min(m_low))?
                - surface.coefficient_c(m - h)?)
                / ((m + h).min(m_low) - (m - h));
            let rhs = -inst.law.density(m) * inst.payoffs.bargain_g(m) / inst.model.h1().value(m);
            Ok((dc - rhs).abs() / rhs.abs().max(1e-300))
        })();
        worst = worst.max(res.unwrap_or(f64::INFINITY));
    }
    outcome("neumann", worst, 1e-6, format!("{} diagonal samples", samples.len()))
}

/// PDE residual ℒW − rW: zero (relatively) on the continuation region,
/// nonpositive on the stopping region.
pub fn check_pde_residual(surface: &ValueSurface, seed: u64, n: usize) -> CheckOutcome {
    let inst = surface.instance();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let m_low = surface.m_low();
    let hi = 0.9 * surface.boundary().horizon();
    let mut worst: f64 = 0.0;
    let mut n_cont = 0usize;
    let mut sign_violation: f64 = 0.0;
    while n_cont < n {
        let m = (rng.random::<f64>() * (hi.ln() - (0.2 * m_low).ln()) + (0.2 * m_low).ln()).exp();
        let x = (rng.random::<f64>() * (m.ln() - (0.05 * m_low).ln()) + (0.05 * m_low).ln()).exp();
        if x >= m {
            continue;
        }
        let Ok(region) = surface.region(x, m) else {
            continue;
        };
        let (Ok(w), Ok(dx), Ok(dxx)) = (
            surface.value(x, m),
            surface.partial_x(x, m),
            surface.partial_xx(x, m),
        ) else {
            worst = f64::INFINITY;
            break;
        };
        let lw = inst.model.generator_from_derivs(x, dx, dxx);
        let resid = lw - inst.model.r() * w;
        let scale = lw.abs().max((inst.model.r() * w).abs()).max(1e-300);
        if region == Region::Stop {
            // interior stopping points: residual must be nonpositive
            sign_violation = sign_violation.max(resid / scale);
        } else {
            worst = worst.max(resid.abs() / scale);
            n_cont += 1;
        }
    }
    let worst = worst.max(sign_violation);
    outcome("pde_residual", worst, 1e-7, format!("{n_cont} continuation points"))
}

/// Continuity of W across the region interfaces.
pub fn check_value_matching(surface: &ValueSurface, samples: &[f64]) -> CheckOutcome {
    let inst = surface.instance();
    let x_r = inst.payoffs.x_r();
    let mut worst: f64 = 0.0;
    let mut push = |a: Result<f64>, b: Result<f64>| {
        let r = match (a, b) {
            (Ok(a), Ok(b)) => (a - b).abs() / a.abs().max(b.abs()).max(1e-300),
            _ => f64::INFINITY,
        };
        worst = worst.max(r);
    };
    for &m in samples {
        let b = match surface.boundary().eval(m) {
            Ok(v) => v,
            Err(_) => continue,
        };
        // boundary x = b(m): stopping vs continuation branch
        push(
            surface.value_in_region(b, m, Region::Stop),
            surface.value_in_region(b, m, Region::RightOfStop),
        );
        // x = x_R: left continuation vs stopping branch
        push(
            surface.value_in_region(x_r, m, Region::LeftOfStop),
            surface.value_in_region(x_r, m, Region::Stop),
        );
    }
    // m = m̲ row: the below-endpoint solution must paste with the three
    // m ≥ m̲ branches (triple point included)
    let m_low = surface.m_low();
    for i in 1..=30 {
        let x = m_low * i as f64 / 31.0;
        if !inst.model.contains(x) {
            continue;
        }
        let above = if x < x_r {
            surface.value_in_region(x, m_low, Region::LeftOfStop)
        } else if x <= surface.boundary().eval_extrapolated(m_low) {
            surface.value_in_region(x, m_low, Region::Stop)
        } else {
            surface.value_in_region(x, m_low, Region::RightOfStop)
        };
        push(surface.value_in_region(x, m_low, Region::BelowMlow), above);
    }
    outcome("value_matching", worst, 1e-8, "interface continuity")
}

/// (1−F(m))·max(R(x), 0) ≤ W(x, m) < (1−F(m))·G(x) at random points,
/// strict on the continuation region.
pub fn check_bounds(surface: &ValueSurface, seed: u64, n: usize) -> CheckOutcome {
    let inst = surface.instance();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let m_low = surface.m_low();
    let hi = surface.boundary().horizon();
    let mut worst: f64 = 0.0;
    let mut done = 0usize;
    while done < n {
        let m = (rng.random::<f64>() * (hi.ln() - (0.1 * m_low).ln()) + (0.1 * m_low).ln()).exp();
        let x = (rng.random::<f64>() * (m.ln() - (0.02 * m_low).ln()) + (0.02 * m_low).ln()).exp();
        if x > m {
            continue;
        }
        let Ok(w) = surface.value(x, m) else {
            worst = f64::INFINITY;
            break;
        };
        let surv = inst.law.survival(m);
        let lower = surv * inst.payoffs.r_payoff().value(x).max(0.0);
        let upper = surv * inst.payoffs.bargain_g(x);
        let scale = upper.abs().max(1e-300);
        worst = worst.max((lower - w) / scale).max((w - upper) / scale);
        // strictness of the upper bound and positivity
        if w <= 0.0 {
            worst = f64::INFINITY;
        }
        if w >= upper {
            worst = worst.max((w - upper) / scale + 1e-12);
        }
        done += 1;
    }
    outcome("bounds", worst, 1e-12, format!("{n} random points"))
}

/// Sign structure of the analytic partials, including the kink in m at m̲.
pub fn check_partial_signs(surface: &ValueSurface, seed: u64) -> CheckOutcome {
    let inst = surface.instance();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let m_low = surface.m_low();
    let hi = 0.9 * surface.boundary().horizon();
    let mut worst: f64 = 0.0;
    for _ in 0..400 {
        let m = (rng.random::<f64>() * (hi.ln() - (0.2 * m_low).ln()) + (0.2 * m_low).ln()).exp();
        let x = (rng.random::<f64>() * (m.ln() - (0.05 * m_low).ln()) + (0.05 * m_low).ln()).exp();
        if x > m {
            continue;
        }
        // skip the kink half-line itself
        if (m - m_low).abs() < 1e-9 * (1.0 + m_low) {
            continue;
        }
        let (Ok(dm), Ok(dx)) = (
            surface.partial_m(x, m, Side::Right),
            surface.partial_x(x, m),
        ) else {
            worst = f64::INFINITY;
            break;
        };
        if dm >= 0.0 {
            worst = worst.max(dm);
        }
        if dx <= 0.0 {
            worst = worst.max(-dx);
        }
    }
    // kink: ∂W/∂m jumps up across m = m̲ for x < m̲
    for i in 1..=20 {
        let x = m_low * i as f64 / 21.0;
        if !inst.model.contains(x) {
            continue;
        }
        match (
            surface.partial_m(x, m_low, Side::Right),
            surface.partial_m(x, m_low, Side::Left),
        ) {
            (Ok(right), Ok(left)) => {
                if x < surface.instance().payoffs.x_r().min(m_low) && right <= left {
                    worst = worst.max(left - right);
                }
            }
            _ => worst = f64::INFINITY,
        }
    }
    outcome("partial_signs", worst, 0.0, "monotonicity and kink signs")
}

/// Positivity of W and of the coefficient functions.
pub fn check_positivity(surface: &ValueSurface, samples: &[f64]) -> CheckOutcome {
    let m_low = surface.m_low();
    let mut worst: f64 = 0.0;
    for &m in samples {
        match (surface.coefficient_a(m), surface.coefficient_b(m)) {
            (Ok(a), Ok(b)) => {
                if a <= 0.0 {
                    worst = worst.max(-a + 1e-300);
                }
                // B vanishes at the endpoint and is positive beyond it
                if m > m_low * (1.0 + 1e-6) && b <= 0.0 {
                    worst = worst.max(-b + 1e-300);
                }
            }
            _ => worst = f64::INFINITY,
        }
    }
    for i in 1..=20 {
        let m = m_low * i as f64 / 20.0;
        match surface.coefficient_c(m) {
            Ok(c) => {
                if c <= 0.0 {
                    worst = worst.max(-c + 1e-300);
                }
            }
            Err(_) => worst = f64::INFINITY,
        }
    }
    outcome("coefficient_positivity", worst, 0.0, "A, B, C > 0")
}

/// Endpoint identities: b(m̲) = x_R, B(m̲) = 0, C(m̲) = A(m̲).
pub fn check_endpoint(surface: &ValueSurface) -> CheckOutcome {
    let inst = surface.instance();
    let m_low = surface.m_low();
    let x_r = inst.payoffs.x_r();
    let mut worst: f64 = 0.0;
    let mut detail = String::new();
    match surface.boundary().eval(m_low) {
        Ok(b0) => {
            let r = (b0 - x_r).abs() / x_r;
            detail.push_str(&format!("b(m_low)-x_R rel {r:.2e}; "));
            worst = worst.max(r / 10.0); // b(m̲)=x_R to 1e−7 per the contract
        }
        Err(_) => worst = f64::INFINITY,
    }
    match surface.coefficient_b(m_low) {
        Ok(b) => {
            let a = surface.coefficient_a(m_low).unwrap_or(f64::NAN);
            let r = b.abs() / a.abs().max(1e-300);
            detail.push_str(&format!("B(m_low) rel {r:.2e}; "));
            worst = worst.max(r);
        }
        Err(_) => worst = f64::INFINITY,
    }
    match (surface.coefficient_c(m_low), surface.coefficient_a(m_low)) {
        (Ok(c), Ok(a)) => {
            let r = (c - a).abs() / a.abs().max(1e-300);
            detail.push_str(&format!("C(m_low)-A(m_low) rel {r:.2e}"));
            worst = worst.max(r);
        }
        _ => worst = f64::INFINITY,
    }
    outcome("endpoint", worst, 1e-8, detail)
}

/// Geometry of the stored boundary: strictly increasing, x_R ≤ b(m) < m,
/// and strictly inside the band where the field is positive.
pub fn check_boundary_band(surface: &ValueSurface) -> CheckOutcome {
    let inst = surface.instance();
    let (ms, bs) = surface.boundary().grid();
    let x_r = inst.payoffs.x_r();
    let mut worst: f64 = 0.0;
    let mut prev = f64::NEG_INFINITY;
    for (i, (&m, &b)) in ms.iter().zip(bs).enumerate() {
        if !(b >= x_r * (1.0 - 1e-12) && b < m) {
            worst = f64::INFINITY;
            break;
        }
        if i > 0 && b <= prev {
            worst = worst.max(prev - b + 1e-300);
        }
        prev = b;
        if i % (ms.len() / 64).max(1) == 0 && i > 0 {
            match crate::boundary::vector_field(inst, b, m) {
                Ok(e) => {
                    if e <= 0.0 {
                        worst = worst.max(-e + 1e-300);
                    }
                }
                Err(_) => worst = f64::INFINITY,
            }
        }
    }
    outcome("boundary_band", worst, 0.0, format!("{} grid nodes", ms.len()))
}

/// Agreement of the raw and transformed assemblies of the vector field.
pub fn check_field_forms(surface: &ValueSurface, seed: u64) -> CheckOutcome {
    let inst = surface.instance();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let x_r = inst.payoffs.x_r();
    let hi = 0.9 * surface.boundary().horizon();
    let transform =
        crate::transform::TransformCache::new(inst.model.clone(), inst.payoffs.clone());
    let mut worst: f64 = 0.0;
    let mut n = 0;
    while n < 200 {
        let x = x_r + rng.random::<f64>() * (hi * 0.5 - x_r);
        let m = x * (1.0 + rng.random::<f64>() * 2.0) + 1e-3;
        if m >= hi {
            continue;
        }
        // only where both forms are well-conditioned
        if (transform.zeta(m) - transform.zeta(x)).abs() < 1e-6 {
            continue;
        }
        match (
            crate::boundary::vector_field(inst, x, m),
            crate::boundary::vector_field_raw(inst, x, m),
        ) {
            (Ok(a), Ok(b)) => {
                worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1e-300));
                n += 1;
            }
            _ => {
                worst = f64::INFINITY;
                break;
            }
        }
    }
    outcome("field_forms_agree", worst, 1e-8, "raw vs transformed at 200 points")
}

/// Fast-level suite.
pub fn run_fast_checks(surface: &ValueSurface, seed: u64) -> Vec<CheckOutcome> {
    let samples = sample_ms(surface, 100);
    vec![
        check_endpoint(surface),
        check_boundary_band(surface),
        check_smooth_fit(surface, &samples),
        check_smooth_fit_vertical(surface, &samples),
        check_neumann(surface, &samples),
        check_pde_residual(surface, seed ^ 0x1, 1000),
        check_value_matching(surface, &samples),
        check_bounds(surface, seed ^ 0x2, 10_000),
        check_partial_signs(surface, seed ^ 0x3),
        check_positivity(surface, &samples),
        check_field_forms(surface, seed ^ 0x4),
    ]
}

/// Full-level suite: the fast checks plus Monte Carlo agreement of the
/// stopped value with W and of the game value with V̄.
pub fn run_checks(
    surface: &ValueSurface,
    level: CheckLevel,
    seed: u64,
    sim_cfg: Option<&SimConfig>,
) -> Result<CheckReport> {
    let mut checks = run_fast_checks(surface, seed);
    if level == CheckLevel::Full {
        let inst = surface.instance();
        let m_low = surface.m_low();
        let x_r = inst.payoffs.x_r();
        let base = sim_cfg.cloned().unwrap_or_else(|| {
            SimConfig::new(
                50_000,
                1e-3,
                SimConfig::default_t_max(inst.model.r()),
                seed,
                (x_r, x_r),
            )
        });
        // stopped value vs the analytic surface at three representative starts
        let starts = [
            (0.8 * x_r, m_low * 1.1),
            (0.5 * (x_r + m_low), 0.5 * (x_r + m_low)),
            (m_low * 1.2 * 0.98, m_low * 1.2),
        ];
        let mut worst: f64 = 0.0;
        let mut detail = String::new();
        for (x, m) in starts {
            let mut cfg = base.clone();
            cfg.start = (x, m);
            let mc = sim::simulate_stopped_value(inst, surface.boundary(), &cfg)?;
            let w = surface.value(x, m)?;
            let sigmas = (mc.estimate - w).abs() / mc.std_error.max(1e-12);
            detail.push_str(&format!("({x:.3},{m:.3}): {sigmas:.2}σ; "));
            worst = worst.max(sigmas);
        }
        checks.push(outcome("mc_stopped_value", worst, 3.0, detail));

        let mut cfg = base.clone();
        cfg.start = (0.9 * x_r, 0.9 * x_r);
        let mc = sim::simulate_game_value(inst, StoppingPolicy::Boundary(surface.boundary()), &cfg)?;
        let vbar = surface.initial_value(0.9 * x_r)?;
        let sigmas = (mc.estimate - vbar).abs() / mc.std_error.max(1e-12);
        checks.push(outcome(
            "mc_game_value",
            sigmas,
            3.0,
            format!("V-bar({:.3}) = {vbar:.6}, MC = {:.6}", 0.9 * x_r, mc.estimate),
        ));

        // pathwise change-of-variables accounting for the maximum integral
        let mut cfg = base.clone();
        cfg.n_paths = base.n_paths.min(64);
        cfg.t_max = base.t_max.min(50.0);
        cfg.start = (x_r, x_r);
        let rep = sim::maximum_integral_check(inst, &cfg)?;
        checks.push(outcome(
            "maximum_integral",
            rep.max_rel_discrepancy,
            0.05,
            format!(
                "mean {:.2e} over {} paths at dt = {:.0e}",
                rep.mean_rel_discrepancy, rep.n_paths, cfg.dt
            ),
        ));
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(CheckReport {
        level,
        passed,
        checks,
    })
}
