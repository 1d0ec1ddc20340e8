//! The free boundary: the singular ODE b′(m) = E(b(m), m), the null curve
//! m_x on which E vanishes, trajectory classification, and the shooting
//! search for the unique endpoint m̲ with b(m̲) = x_R.

use crate::error::{Error, Result};
use crate::numerics::{self, MonotoneCubic};
use crate::transform::TransformCache;
use crate::Instance;

/// Tolerances and knobs for the boundary solver.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Relative tolerance of the embedded Runge-Kutta pair.
    pub rel_tol: f64,
    /// Absolute tolerance of the embedded Runge-Kutta pair.
    pub abs_tol: f64,
    /// Diagonal-proximity threshold: a trajectory with m − b < ε·(1+m) is
    /// classified as absorbed at the diagonal.
    pub eps_diag_coeff: f64,
    /// Endpoint bisection tolerance, relative to x_R.
    pub bisect_tol_coeff: f64,
    /// Bisection iteration cap.
    pub max_bisect_iter: usize,
    /// Explicit truncation horizon; `None` selects it from the tail mass.
    pub horizon: Option<f64>,
    /// Tail mass 1 − F(horizon) used to choose the default horizon.
    pub horizon_tail_mass: f64,
    /// Doubling the horizon is repeated until m̲ moves by less than this
    /// (relative to x_R).
    pub horizon_stability_coeff: f64,
    /// Cap on horizon doublings.
    pub max_horizon_doublings: usize,
    /// Minimum number of grid nodes on the surviving trajectory (caps the
    /// integrator step at (horizon − m̲)/n).
    pub min_grid_nodes: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            eps_diag_coeff: 1e-9,
            bisect_tol_coeff: 1e-8,
            max_bisect_iter: 200,
            horizon: None,
            horizon_tail_mass: 1e-6,
            horizon_stability_coeff: 1e-6,
            max_horizon_doublings: 3,
            min_grid_nodes: 4096,
        }
    }
}

impl SolverConfig {
    /// All tolerances halved; used by the numerical-stability checks.
    pub fn halved(&self) -> Self {
        Self {
            rel_tol: 0.5 * self.rel_tol,
            abs_tol: 0.5 * self.abs_tol,
            eps_diag_coeff: 0.5 * self.eps_diag_coeff,
            bisect_tol_coeff: 0.5 * self.bisect_tol_coeff,
            ..self.clone()
        }
    }
}

/// Outcome of integrating b′ = E(b, m) from (x_R, m₀).
#[derive(Debug, Clone)]
pub enum Classification {
    /// Absorbed at the diagonal m = b (class ℐ⁻).
    HitsDiagonal { m_exit: f64 },
    /// Crossed the null curve, i.e. E ≤ 0 (class ℐ⁺).
    HitsNullCurve { m_exit: f64 },
    /// Survived inside the open band up to the horizon (class ℐ⁰).
    ReachesHorizon(Trajectory),
}

/// Accepted integration nodes (m, b) with the field value at each node.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub ms: Vec<f64>,
    pub bs: Vec<f64>,
    pub slopes: Vec<f64>,
}

struct FieldCtx<'a> {
    inst: &'a Instance,
    transform: TransformCache,
    x_r: f64,
}

impl<'a> FieldCtx<'a> {
    fn new(inst: &'a Instance) -> Self {
        Self {
            inst,
            transform: TransformCache::new(inst.model.clone(), inst.payoffs.clone()),
            x_r: inst.payoffs.x_r(),
        }
    }

    fn check_domain(&self, x: f64, m: f64) -> Result<()> {
        self.inst.model.check_state(x)?;
        let (lo, hi) = self.inst.model.state_interval();
        if !(m < hi) {
            return Err(Error::OutOfDomain { value: m, lo, hi });
        }
        if !(x >= self.x_r) {
            return Err(Error::BadPoint {
                x,
                m,
                constraint: "x >= x_R",
            });
        }
        if !(m > x) {
            return Err(Error::BadPoint {
                x,
                m,
                constraint: "m > x",
            });
        }
        Ok(())
    }

    /// E via the transformed representation; NaN outside the domain so the
    /// step controller can retreat.
    fn field_unchecked(&self, x: f64, m: f64) -> f64 {
        if !(m > x) || !(x >= self.x_r * (1.0 - 1e-12)) || x <= 0.0 {
            return f64::NAN;
        }
        let model = &self.inst.model;
        let l = self.inst.payoffs.drift_term_l(model, x);
        let coeff = -self.inst.law.hazard(m) * model.vol2(x) * model.gamma()
            * model.scale_deriv(x)
            / (2.0 * l * model.h2().value(x));
        coeff * self.transform.eta_states(m, x)
    }
}

/// The boundary vector field E(x, m) in its transformed form.
pub fn vector_field(inst: &Instance, x: f64, m: f64) -> Result<f64> {
    let ctx = FieldCtx::new(inst);
    ctx.check_domain(x, m)?;
    let v = ctx.field_unchecked(x, m);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteField { x, m })
    }
}

/// E(x, m) assembled directly from its raw definition (the Wronskian form
/// with D(x, m) = h₁(m)h₂(x) − h₁(x)h₂(m)); kept as an independent route
/// for cross-checks.
pub fn vector_field_raw(inst: &Instance, x: f64, m: f64) -> Result<f64> {
    let ctx = FieldCtx::new(inst);
    ctx.check_domain(x, m)?;
    let model = &inst.model;
    let h1 = model.h1();
    let h2 = model.h2();
    let r = inst.payoffs.r_payoff();
    let g_m = inst.payoffs.bargain_g(m);
    let d = h1.value(m) * h2.value(x) - h1.value(x) * h2.value(m);
    let l = inst.payoffs.drift_term_l(model, x);
    let gs = model.gamma() * model.scale_deriv(x);
    let bracket = gs / d * (r.value(x) * h2.value(m) - g_m * h2.value(x))
        + r.deriv(x) * h2.value(x)
        - r.value(x) * h2.deriv(x);
    let v = inst.law.hazard(m) * model.vol2(x) / (2.0 * l * h2.value(x)) * bracket;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteField { x, m })
    }
}

/// The null curve m_x: the unique m > x with E(x, m) = 0, located through
/// the sign change of η.
pub fn null_curve_m_x(inst: &Instance, x: f64) -> Result<f64> {
    let ctx = FieldCtx::new(inst);
    inst.model.check_state(x)?;
    if !(x >= ctx.x_r * (1.0 - 1e-12)) {
        return Err(Error::BadPoint {
            x,
            m: f64::NAN,
            constraint: "x >= x_R",
        });
    }
    let eta = |m: f64| ctx.transform.eta_states(m, x);
    let start = x * (1.0 + 1e-8);
    if !(eta(start) > 0.0) {
        return Err(Error::Bracketing {
            what: "null curve",
            detail: format!("eta not positive near the diagonal at x = {x}; model may violate the bargaining assumptions"),
        });
    }
    let (lo, hi) = numerics::expand_bracket_up(eta, start, 1.5, 400, "null curve")?;
    numerics::bisect_root(eta, lo, hi, 1e-13 * hi, 300, "null curve")
}

fn eps_diag(cfg: &SolverConfig, m: f64) -> f64 {
    cfg.eps_diag_coeff * (1.0 + m)
}

fn classify_inner(
    ctx: &FieldCtx,
    cfg: &SolverConfig,
    m0: f64,
    horizon: f64,
    keep_grid: bool,
) -> Result<Classification> {
    let x_r = ctx.x_r;
    let mut m = m0;
    let mut b = x_r;
    let mut traj = Trajectory::default();
    let h_max = (horizon - m0) / cfg.min_grid_nodes.max(2) as f64;

    let mut slope = ctx.field_unchecked(b, m);
    if !slope.is_finite() {
        return Err(Error::NonFiniteField { x: b, m });
    }
    if slope <= 0.0 {
        return Ok(Classification::HitsNullCurve { m_exit: m });
    }
    if keep_grid {
        traj.ms.push(m);
        traj.bs.push(b);
        traj.slopes.push(slope);
    }

    let f = |mm: f64, bb: f64| ctx.field_unchecked(bb, mm);
    let mut h = h_max.min(0.25 * (m - b) / slope.max(1.0));
    loop {
        let d = m - b;
        if d < eps_diag(cfg, m) {
            return Ok(Classification::HitsDiagonal { m_exit: m });
        }
        if m >= horizon * (1.0 - 1e-13) {
            return Ok(Classification::ReachesHorizon(traj));
        }
        // step clamps: at most a quarter of the distance to the diagonal,
        // both in m and in the predicted b increment
        let h_clamp = (0.25 * d) / slope.max(1.0);
        h = h.min(h_clamp).min(h_max).min(horizon - m);
        if h < 1e-14 * (1.0 + m) {
            if d < (1e3 * eps_diag(cfg, m)).max(1e-3 * (1.0 + m)) {
                return Ok(Classification::HitsDiagonal { m_exit: m });
            }
            return Err(Error::Solver(format!(
                "step underflow away from the diagonal at (m={m}, b={b})"
            )));
        }
        match numerics::dopri5_step(f, m, b, h) {
            None => {
                // a stage left the admissible band; retreat
                h *= 0.5;
                continue;
            }
            Some((b_new, err)) => {
                let tol = cfg.abs_tol + cfg.rel_tol * b.abs().max(b_new.abs());
                if err <= tol && b_new < m + h {
                    m += h;
                    b = b_new;
                    slope = ctx.field_unchecked(b, m);
                    if !slope.is_finite() {
                        if m - b < (1e3 * eps_diag(cfg, m)).max(1e-3 * (1.0 + m)) {
                            return Ok(Classification::HitsDiagonal { m_exit: m });
                        }
                        return Err(Error::NonFiniteField { x: b, m });
                    }
                    if keep_grid {
                        traj.ms.push(m);
                        traj.bs.push(b);
                        traj.slopes.push(slope);
                    }
                    if slope <= 0.0 {
                        return Ok(Classification::HitsNullCurve { m_exit: m });
                    }
                    let grow = if err > 0.0 {
                        (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0)
                    } else {
                        5.0
                    };
                    h *= grow;
                } else {
                    let shrink = if err > 0.0 {
                        (0.9 * (tol / err).powf(0.2)).clamp(0.1, 0.9)
                    } else {
                        0.5
                    };
                    h *= shrink;
                }
            }
        }
    }
}

/// Integrate b′ = E(b, m) with b(m₀) = x_R and classify the trajectory.
pub fn classify_trajectory(
    inst: &Instance,
    cfg: &SolverConfig,
    m0: f64,
    horizon: f64,
) -> Result<Classification> {
    let ctx = FieldCtx::new(inst);
    if !(m0 > ctx.x_r) {
        return Err(Error::BadPoint {
            x: ctx.x_r,
            m: m0,
            constraint: "m0 > x_R",
        });
    }
    if !(horizon > m0) {
        return Err(Error::HorizonTooSmall {
            horizon,
            detail: format!("horizon must exceed the initial point m0 = {m0}"),
        });
    }
    classify_inner(&ctx, cfg, m0, horizon, true)
}

/// The solved free boundary b: [m̲, horizon] → [x_R, ∞).
#[derive(Debug, Clone)]
pub struct FreeBoundary {
    m_low: f64,
    x_r: f64,
    m_x_r: f64,
    horizon: f64,
    i0_width: f64,
    bracket_width: f64,
    iterations: usize,
    horizon_stable: bool,
    interp: MonotoneCubic,
}

impl FreeBoundary {
    /// Endpoint m̲ of the stopping region; b(m̲) = x_R.
    pub fn m_low(&self) -> f64 {
        self.m_low
    }

    pub fn x_r(&self) -> f64 {
        self.x_r
    }

    /// Null-curve ordinate at x_R, the upper end of the shooting bracket.
    pub fn m_x_r(&self) -> f64 {
        self.m_x_r
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Width of the numerical ℐ⁰ interval at this horizon; the truncation
    /// uncertainty on m̲.
    pub fn i0_width(&self) -> f64 {
        self.i0_width
    }

    /// Final bisection bracket width for each ℐ⁰ edge.
    pub fn bracket_width(&self) -> f64 {
        self.bracket_width
    }

    /// Number of trajectory classifications performed.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Whether doubling the horizon left m̲ within the stability tolerance.
    pub fn horizon_stable(&self) -> bool {
        self.horizon_stable
    }

    pub fn grid(&self) -> (&[f64], &[f64]) {
        self.interp.nodes()
    }

    /// b(m) for m in [m̲, horizon].
    pub fn eval(&self, m: f64) -> Result<f64> {
        if m < self.m_low || m > self.horizon * (1.0 + 1e-12) {
            return Err(Error::OutOfDomain {
                value: m,
                lo: self.m_low,
                hi: self.horizon,
            });
        }
        Ok(self.interp.eval(m.min(self.interp.x_max())))
    }

    pub fn eval_deriv(&self, m: f64) -> Result<f64> {
        if m < self.m_low || m > self.horizon * (1.0 + 1e-12) {
            return Err(Error::OutOfDomain {
                value: m,
                lo: self.m_low,
                hi: self.horizon,
            });
        }
        Ok(self.interp.eval_deriv(m.min(self.interp.x_max())))
    }

    /// Rebuild a boundary from a stored grid (e.g. a boundary CSV), with
    /// node slopes when available (the CSV's field column); solver
    /// metadata is absent.
    pub fn from_grid(x_r: f64, ms: Vec<f64>, bs: Vec<f64>, slopes: Option<Vec<f64>>) -> Result<Self> {
        if ms.len() < 2 || ms.len() != bs.len() {
            return Err(Error::Solver("boundary grid needs >= 2 (m, b) rows".into()));
        }
        let m_low = ms[0];
        let horizon = *ms.last().unwrap();
        let interp = match slopes {
            Some(s) if s.len() == ms.len() && s.iter().all(|v| v.is_finite()) => {
                MonotoneCubic::with_slopes(ms, bs, s)?
            }
            _ => MonotoneCubic::from_points(ms, bs)?,
        };
        Ok(FreeBoundary {
            m_low,
            x_r,
            m_x_r: f64::NAN,
            horizon,
            i0_width: f64::NAN,
            bracket_width: f64::NAN,
            iterations: 0,
            horizon_stable: false,
            interp,
        })
    }

    /// Total evaluator used by the simulators: x_R below m̲ (where the
    /// stopping region is empty anyway the caller gates on m ≥ m̲), the
    /// interpolant on the grid, and a linear continuation capped strictly
    /// below the diagonal beyond the horizon.
    pub fn eval_extrapolated(&self, m: f64) -> f64 {
        if m <= self.m_low {
            return self.x_r;
        }
        let x_max = self.interp.x_max();
        if m <= x_max {
            return self.interp.eval(m);
        }
        let b_end = self.interp.eval(x_max);
        let slope = self.interp.eval_deriv(x_max).max(0.0);
        (b_end + slope * (m - x_max)).min(m * (1.0 - 1e-9))
    }
}

#[allow(clippy::too_many_arguments)]
fn build_boundary(
    traj: &Trajectory,
    m_low: f64,
    x_r: f64,
    m_x_r: f64,
    horizon: f64,
    i0_width: f64,
    bracket_width: f64,
    iterations: usize,
) -> Result<FreeBoundary> {
    if traj.ms.len() < 2 {
        return Err(Error::Solver("surviving trajectory has fewer than 2 nodes".into()));
    }
    for i in 0..traj.ms.len() {
        let (m, b) = (traj.ms[i], traj.bs[i]);
        if !(b >= x_r * (1.0 - 1e-12) && b < m) {
            return Err(Error::Solver(format!(
                "trajectory node ({m}, {b}) violates x_R <= b < m"
            )));
        }
        if i > 0 && !(b > traj.bs[i - 1]) {
            return Err(Error::Solver(format!(
                "boundary not strictly increasing at node {i} (m = {m})"
            )));
        }
    }
    let interp = MonotoneCubic::with_slopes(traj.ms.clone(), traj.bs.clone(), traj.slopes.clone())?;
    Ok(FreeBoundary {
        m_low,
        x_r,
        m_x_r,
        horizon,
        i0_width,
        bracket_width,
        iterations,
        horizon_stable: false,
    interp,
    })
}

struct EdgeSearch {
    e_minus: f64,
    e_plus: f64,
    bracket_width: f64,
    iterations: usize,
}

/// Locate both edges of the surviving interval ℐ⁰ at a fixed horizon.
/// Bisection continues past `tol` to floating-point exhaustion (subject to
/// the iteration cap): the tail of the value surface is exponentially
/// sensitive to m̲, so the edges are pinned as precisely as the
/// classification allows.
fn bisect_edges(ctx: &FieldCtx, cfg: &SolverConfig, horizon: f64, tol: f64) -> Result<EdgeSearch> {
    let x_r = ctx.x_r;
    let m_x_r = null_curve_m_x(ctx.inst, x_r)?;
    if !(horizon > m_x_r) {
        return Err(Error::HorizonTooSmall {
            horizon,
            detail: format!("horizon must exceed m_(x_R) = {m_x_r}"),
        });
    }
    let mut iterations = 0usize;
    let mut run = |diag_edge: bool| -> Result<(f64, f64)> {
        let (mut lo, mut hi) = (x_r, m_x_r);
        let mut iters = 0;
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || iters >= cfg.max_bisect_iter {
                break;
            }
            iters += 1;
            iterations += 1;
            let c = classify_inner(ctx, cfg, mid, horizon, false)?;
            let go_up = if diag_edge {
                matches!(c, Classification::HitsDiagonal { .. })
            } else {
                !matches!(c, Classification::HitsNullCurve { .. })
            };
            if go_up {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if hi - lo > tol {
            return Err(Error::Solver(format!(
                "endpoint bisection did not reach tolerance {tol:e} in {} iterations (bracket {:e})",
                cfg.max_bisect_iter,
                hi - lo
            )));
        }
        Ok((0.5 * (lo + hi), hi - lo))
    };
    let (e_minus, w1) = run(true)?;
    let (e_plus, w2) = run(false)?;
    Ok(EdgeSearch {
        e_minus,
        e_plus,
        bracket_width: w1.max(w2),
        iterations,
    })
}

/// Shooting with bisection at a fixed horizon: trajectories absorbed at
/// the diagonal push the endpoint estimate up, trajectories crossing the
/// null curve pull it down. m̲ is the midpoint of the ℐ⁰ interval and the
/// boundary grid is the surviving trajectory started there.
pub fn find_endpoint_with_horizon(
    inst: &Instance,
    cfg: &SolverConfig,
    horizon: f64,
    tol: f64,
) -> Result<FreeBoundary> {
    let ctx = FieldCtx::new(inst);
    let edges = bisect_edges(&ctx, cfg, horizon, tol)?;
    let m_low = 0.5 * (edges.e_minus + edges.e_plus);
    let m_x_r = null_curve_m_x(inst, ctx.x_r)?;
    match classify_inner(&ctx, cfg, m_low, horizon, true)? {
        Classification::ReachesHorizon(t) => build_boundary(
            &t,
            m_low,
            ctx.x_r,
            m_x_r,
            horizon,
            (edges.e_plus - edges.e_minus).max(0.0),
            edges.bracket_width,
            edges.iterations + 1,
        ),
        _ => Err(Error::HorizonTooSmall {
            horizon,
            detail: format!(
                "no trajectory from the collapsed bracket [{}, {}] survives to the horizon; \
                 the shooting resolution is exhausted at this horizon",
                edges.e_minus, edges.e_plus
            ),
        }),
    }
}

/// Full endpoint search with automatic horizon selection.
///
/// The bisection horizon starts where the threshold law leaves
/// `horizon_tail_mass` in the tail and is doubled until the endpoint
/// stabilizes (or the cap is reached); each doubling sharpens m̲ because
/// the surviving interval shrinks. The boundary grid itself is integrated
/// from the final m̲ at the largest horizon a trajectory survives to: at
/// distant horizons the interval collapses below the floating-point
/// resolution of the initial condition, so the grid horizon may be
/// shorter than the bisection horizon.
pub fn find_endpoint(inst: &Instance, cfg: &SolverConfig) -> Result<FreeBoundary> {
    let ctx = FieldCtx::new(inst);
    let x_r = ctx.x_r;
    let tol = cfg.bisect_tol_coeff * x_r;
    let m_x_r = null_curve_m_x(inst, x_r)?;

    if let Some(h) = cfg.horizon {
        // explicit horizons are taken as-is
        let mut fb = find_endpoint_with_horizon(inst, cfg, h, tol)?;
        fb.horizon_stable = true;
        return Ok(fb);
    }

    let h0 = inst
        .law
        .quantile(1.0 - cfg.horizon_tail_mass)?
        .max(2.0 * m_x_r);
    let mut horizons = vec![h0];
    let mut edges = bisect_edges(&ctx, cfg, h0, tol)?;
    let mut iterations = edges.iterations;
    let mut m_low = 0.5 * (edges.e_minus + edges.e_plus);
    let mut stable = false;
    for _ in 0..cfg.max_horizon_doublings {
        let h = horizons.last().unwrap() * 2.0;
        let next = match bisect_edges(&ctx, cfg, h, tol) {
            Ok(e) => e,
            // past the resolution limit nothing is gained by going further
            Err(Error::Solver(_)) | Err(Error::HorizonTooSmall { .. }) => break,
            Err(e) => return Err(e),
        };
        iterations += next.iterations;
        let next_m_low = 0.5 * (next.e_minus + next.e_plus);
        let shift = (next_m_low - m_low).abs();
        horizons.push(h);
        edges = next;
        m_low = next_m_low;
        if shift <= cfg.horizon_stability_coeff * x_r {
            stable = true;
            break;
        }
    }

    // final grid: the largest horizon the midpoint trajectory survives to
    for (k, &h) in horizons.iter().enumerate().rev() {
        iterations += 1;
        if let Classification::ReachesHorizon(t) = classify_inner(&ctx, cfg, m_low, h, true)? {
            let mut fb = build_boundary(
                &t,
                m_low,
                x_r,
                m_x_r,
                h,
                (edges.e_plus - edges.e_minus).max(0.0),
                edges.bracket_width,
                iterations,
            )?;
            fb.horizon_stable = stable || k + 1 < horizons.len();
            return Ok(fb);
        }
    }
    Err(Error::HorizonTooSmall {
        horizon: h0,
        detail: "no trajectory from the refined endpoint survives to any attempted horizon".into(),
    })
}
