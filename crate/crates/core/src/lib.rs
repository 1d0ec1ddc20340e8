// Negated comparisons like `!(a >= b)` are used deliberately throughout:
// they reject NaN, which a refactor to `a < b` would silently let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! maxstop: invest-or-wait timing under breakthrough risk.
//!
//! The library solves a two-dimensional optimal stopping problem for a
//! diffusion X and its running maximum M. The decision maker can lock in a
//! stand-alone payoff R(X) at any time, or keep waiting for a breakthrough
//! that pays G(X) and arrives when X first exceeds an unknown threshold
//! drawn from a known law. The optimal rule is a free boundary x = b(m):
//! invest once the maximum has reached an endpoint m̲ and X falls back to
//! b(M).
//!
//! The crate computes the boundary by shooting on a singular ODE, assembles
//! the piecewise value surface W(x, m) and the initial value V̄(x), and
//! cross-checks everything against Monte Carlo and finite-difference
//! oracles. See the `cli` binary (`maxstop`) for a config-driven front end.

pub mod boundary;
pub mod check;
pub mod compare;
pub mod config;
pub mod diffusion;
pub mod error;
pub mod law;
pub mod numerics;
pub mod payoff;
pub mod sim;
pub mod transform;
pub mod value;

pub use boundary::{FreeBoundary, SolverConfig};
pub use diffusion::{DiffusionModel, GbmParams};
pub use error::{Error, Result};
pub use law::{CostLaw, ThresholdLaw};
pub use payoff::{Bargaining, TechnologyPayoffs};
pub use sim::{SimConfig, SimResult};
pub use value::ValueSurface;

/// A fully specified problem instance: diffusion, payoffs, threshold law.
#[derive(Debug, Clone)]
pub struct Instance {
    pub model: DiffusionModel,
    pub payoffs: TechnologyPayoffs,
    pub law: ThresholdLaw,
}
