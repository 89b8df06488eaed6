use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{LimitState, SolverConfig};
use crate::problems::{ConstantLsf, LinearLsf, QuadraticLsf};
use crate::randfield::{BarConfig, BarProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mc,
    Ce,
    Ice,
    Icered,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mc => "mc",
            Method::Ce => "ce",
            Method::Ice => "ice",
            Method::Icered => "icered",
        }
    }
}

fn default_quadratic_beta() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemSpec {
    Linear {
        d: usize,
        beta: f64,
    },
    Quadratic {
        d: usize,
        #[serde(default = "default_quadratic_beta")]
        beta: f64,
        kappa: f64,
    },
    Bar(BarConfig),
    Constant {
        d: usize,
        value: f64,
    },
}

/// A built problem, kept concrete so the bar's KL data stays reachable.
pub enum Problem {
    Linear(LinearLsf),
    Quadratic(QuadraticLsf),
    Bar(Box<BarProblem>),
    Constant(ConstantLsf),
}

impl Problem {
    pub fn as_limit_state(&self) -> &dyn LimitState {
        match self {
            Problem::Linear(p) => p,
            Problem::Quadratic(p) => p,
            Problem::Bar(p) => p.as_ref(),
            Problem::Constant(p) => p,
        }
    }
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Problem> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        match self {
            ProblemSpec::Linear { d, beta } => {
                if *d < 1 {
                    return bad("linear problem needs d >= 1".into());
                }
                Ok(Problem::Linear(LinearLsf { dim: *d, beta: *beta }))
            }
            ProblemSpec::Quadratic { d, beta, kappa } => {
                if *d < 2 || !(*kappa >= 0.0) {
                    return bad("quadratic problem needs d >= 2 and kappa >= 0".into());
                }
                Ok(Problem::Quadratic(QuadraticLsf { dim: *d, beta: *beta, kappa: *kappa }))
            }
            ProblemSpec::Bar(cfg) => Ok(Problem::Bar(Box::new(BarProblem::new(cfg.clone())?))),
            ProblemSpec::Constant { d, value } => {
                if *d < 1 {
                    return bad("constant problem needs d >= 1".into());
                }
                Ok(Problem::Constant(ConstantLsf { dim: *d, value: *value }))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Plain Monte Carlo sample count; defaults to `solver.n_per_level`.
    #[serde(default)]
    pub mc_samples: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_method() -> Method {
    Method::Icered
}

fn default_runs() -> usize {
    1
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::InvalidConfig(format!("config parse error at line {}, column {}: {e}", e.line(), e.column()))
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.runs < 1 {
            return Err(Error::InvalidConfig("runs must be at least 1".into()));
        }
        if self.mc_samples == Some(0) {
            return Err(Error::InvalidConfig("mc_samples must be at least 1".into()));
        }
        Ok(())
    }
}
