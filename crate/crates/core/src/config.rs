//! Config-file schema and instance assembly. A problem is a single JSON
//! document with sections `model`, `payoffs`, `costs`, and optional
//! `solver` and `sim` overrides. Unknown keys are errors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boundary::SolverConfig;
use crate::diffusion::{DiffusionModel, GbmParams};
use crate::error::{Error, Result};
use crate::law::{CostLaw, ThresholdLaw};
use crate::payoff::{Bargaining, TechnologyPayoffs};
use crate::sim::SimConfig;
use crate::Instance;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    Gbm { mu: f64, sigma: f64, r: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffConfig {
    #[serde(rename = "I")]
    pub investment_cost: f64,
    pub kappa: f64,
    #[serde(default)]
    pub bargaining: Bargaining,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum CostConfig {
    Exponential { rate: f64 },
    Lognormal { location: f64, scale: f64 },
}

impl CostConfig {
    pub fn to_law(&self) -> CostLaw {
        match *self {
            CostConfig::Exponential { rate } => CostLaw::Exponential { rate },
            CostConfig::Lognormal { location, scale } => CostLaw::LogNormal { location, scale },
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub eps_diag: Option<f64>,
    pub bisect_tol: Option<f64>,
    pub max_bisect_iter: Option<usize>,
    pub horizon: Option<f64>,
    pub horizon_tail_mass: Option<f64>,
    pub max_horizon_doublings: Option<usize>,
    pub min_grid_nodes: Option<usize>,
}

impl SolverSection {
    pub fn to_solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::default();
        if let Some(v) = self.rel_tol {
            cfg.rel_tol = v;
        }
        if let Some(v) = self.abs_tol {
            cfg.abs_tol = v;
        }
        if let Some(v) = self.eps_diag {
            cfg.eps_diag_coeff = v;
        }
        if let Some(v) = self.bisect_tol {
            cfg.bisect_tol_coeff = v;
        }
        if let Some(v) = self.max_bisect_iter {
            cfg.max_bisect_iter = v;
        }
        cfg.horizon = self.horizon;
        if let Some(v) = self.horizon_tail_mass {
            cfg.horizon_tail_mass = v;
        }
        if let Some(v) = self.max_horizon_doublings {
            cfg.max_horizon_doublings = v;
        }
        if let Some(v) = self.min_grid_nodes {
            cfg.min_grid_nodes = v;
        }
        cfg
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub n_paths: u64,
    pub dt: f64,
    pub t_max: Option<f64>,
    pub seed: u64,
    pub start: Option<[f64; 2]>,
    pub value_floor_rel: Option<f64>,
    pub bridge: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub model: ModelConfig,
    pub payoffs: PayoffConfig,
    pub costs: CostConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sim: Option<SimSection>,
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn build_model(&self) -> Result<DiffusionModel> {
        match self.model {
            ModelConfig::Gbm { mu, sigma, r } => DiffusionModel::gbm(GbmParams { mu, sigma, r }),
        }
    }

    pub fn build_instance(&self) -> Result<Instance> {
        let model = self.build_model()?;
        let payoffs = TechnologyPayoffs::linear(
            &model,
            self.payoffs.investment_cost,
            self.payoffs.kappa,
            self.payoffs.bargaining,
        )?;
        let law = ThresholdLaw::from_costs(self.costs.to_law(), &payoffs)?;
        Ok(Instance {
            model,
            payoffs,
            law,
        })
    }

    pub fn solver_config(&self) -> SolverConfig {
        self.solver.to_solver_config()
    }

    /// Simulation config assembled from the `sim` section; `seed_override`
    /// wins over the file, the default start is the diagonal point (x_R, x_R).
    pub fn sim_config(&self, inst: &Instance, seed_override: Option<u64>) -> Result<SimConfig> {
        let section = self
            .sim
            .as_ref()
            .ok_or_else(|| Error::Config("config has no `sim` section".into()))?;
        let x_r = inst.payoffs.x_r();
        let start = section.start.map(|[x, m]| (x, m)).unwrap_or((x_r, x_r));
        let mut cfg = SimConfig::new(
            section.n_paths,
            section.dt,
            section
                .t_max
                .unwrap_or_else(|| SimConfig::default_t_max(inst.model.r())),
            seed_override.unwrap_or(section.seed),
            start,
        );
        if let Some(v) = section.value_floor_rel {
            cfg.value_floor_rel = v;
        }
        if let Some(v) = section.bridge {
            cfg.bridge = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN: &str = r#"{
        "model": {"model": "gbm", "mu": 0.0, "sigma": 0.31622776601683794, "r": 0.05},
        "payoffs": {"I": 1.0, "kappa": 2.0},
        "costs": {"family": "exponential", "rate": 1.0}
    }"#;

    #[test]
    fn parses_reference_config() {
        let cfg = ProblemConfig::from_json(GOLDEN).unwrap();
        let inst = cfg.build_instance().unwrap();
        assert!((inst.payoffs.x_r() - 2.618033988749895).abs() < 1e-9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = GOLDEN.replace("\"kappa\": 2.0", "\"kappa\": 2.0, \"kapa\": 3.0");
        assert!(ProblemConfig::from_json(&text).is_err());
    }

    #[test]
    fn invalid_parameters_are_rejected_on_build() {
        let text = GOLDEN.replace("\"mu\": 0.0", "\"mu\": 0.08");
        let cfg = ProblemConfig::from_json(&text).unwrap();
        let err = cfg.build_instance().unwrap_err();
        assert!(err.to_string().contains("mu"), "{err}");
        let text = GOLDEN.replace("\"kappa\": 2.0", "\"kappa\": 1.0");
        let cfg = ProblemConfig::from_json(&text).unwrap();
        let err = cfg.build_instance().unwrap_err();
        assert!(err.to_string().contains("kappa"), "{err}");
    }

    #[test]
    fn bargaining_selector_parses() {
        let text = GOLDEN.replace(
            "\"kappa\": 2.0",
            "\"kappa\": 2.0, \"bargaining\": \"shapley\"",
        );
        let cfg = ProblemConfig::from_json(&text).unwrap();
        assert_eq!(cfg.payoffs.bargaining, Bargaining::Shapley);
    }
}
