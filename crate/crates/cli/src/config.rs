//! JSON run configuration.
//!
//! ```json
//! {
//!   "payout": { "expr": "x1 + x2", "domain": [[0, 1], [0, 2]] },
//!   "marginals": [
//!     { "kind": "uniform", "a": 0, "b": 1 },
//!     { "kind": "discrete", "atoms": [[0, 0.5], [2, 0.5]] }
//!   ],
//!   "spectral": { "kind": "es", "m0": 0.25 },
//!   "solver": { "kind": "auto" },
//!   "discretization": 64,
//!   "seed": 0
//! }
//! ```
//!
//! Omitted fields take the defaults of [`RunConfig`]. The payout domain
//! defaults to the hull of the marginal supports and variable names to
//! `x1, …, xd`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use specrisk::marginals::{DiscreteMarginal, Marginal, Parametric, PiecewiseLinearQuantile};
use specrisk::multirisk::{BaselineMeasure, Curve, PointCloud, VectorPayout};
use specrisk::payout::{Monotonicity, Partition, Payout, Sign, SignStructure};
use specrisk::spectral::SpectralFunction;
use specrisk::stability::Perturbation;
use specrisk::{Marginal64, SpectralFunction64};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub payout: PayoutSpec,
    pub marginals: Vec<MarginalSpec>,
    #[serde(default = "default_spectral")]
    pub spectral: SpectralSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    /// Run the comonotone formula even when the hypotheses fail.
    #[serde(default)]
    pub override_compatibility: bool,
    /// Variable names forced onto the `−` side; the rest are `+`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition_minus: Option<Vec<String>>,
    /// Atoms per marginal when a discrete problem is needed.
    #[serde(default = "default_discretization")]
    pub discretization: usize,
    #[serde(default = "default_grid")]
    pub grid_per_axis: usize,
    /// Block size `n` for the twist probe on a `2n`-variable payout.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twist_block: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multirisk: Option<MultiriskSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

fn default_spectral() -> SpectralSpec {
    SpectralSpec::Constant { value: 1.0 }
}

fn default_discretization() -> usize {
    64
}

fn default_grid() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoutSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    /// Components of a vector payout.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exprs: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<[f64; 2]>>,
    /// Declared sign structure; skips numeric classification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signs: Option<DeclaredSigns>,
    /// Treat every interaction as `+` (e.g. a convex function of a sum).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub supermodular: bool,
}

/// Sign codes `++ + 0 - -- mixed`; monotonicity labels as in check reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredSigns {
    pub sigma: Vec<Vec<String>>,
    pub monotonicity: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarginalSpec {
    /// `[location, weight]` pairs.
    Discrete { atoms: Vec<[f64; 2]> },
    Empirical { samples: Vec<f64> },
    Dirac { x: f64 },
    Uniform { a: f64, b: f64 },
    TruncatedNormal { mean: f64, sd: f64, lo: f64, hi: f64 },
    Triangular { a: f64, mode: f64, b: f64 },
    TruncatedGumbel { loc: f64, scale: f64, lo: f64, hi: f64 },
    /// `[level, value]` knots of a piecewise-linear quantile function.
    QuantileKnots { knots: Vec<[f64; 2]> },
    /// Two-column CSV of `location,weight`.
    Csv { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectralSpec {
    Es { m0: f64 },
    Constant { value: f64 },
    /// `[level, value]` steps starting at level 0.
    PiecewiseConstant { steps: Vec<[f64; 2]> },
    PiecewiseLinear { knots: Vec<[f64; 2]> },
    /// `level,value` samples fitted by a nondecreasing step function.
    SamplesCsv { path: String, pieces: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverSpec {
    #[default]
    Auto,
    Comonotone,
    Lp,
    Entropic { epsilon: f64 },
    Partial { m0: f64 },
}

impl SolverSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SolverSpec::Auto => "auto",
            SolverSpec::Comonotone => "comonotone",
            SolverSpec::Lp => "lp",
            SolverSpec::Entropic { .. } => "entropic",
            SolverSpec::Partial { .. } => "partial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySpec {
    pub perturbation: Perturbation,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_override: Option<f64>,
}

fn default_trials() -> usize {
    100
}

fn default_p() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiriskSpec {
    pub baseline: BaselineSpec,
    /// Also probe the Jacobian of a square payout.
    #[serde(default)]
    pub invertibility: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaselineSpec {
    Curve { components: Vec<SpectralSpec> },
    PointCloud { points: Vec<Vec<f64>>, weights: Vec<f64> },
}

fn pairs(v: &[[f64; 2]]) -> Vec<(f64, f64)> {
    v.iter().map(|p| (p[0], p[1])).collect()
}

impl MarginalSpec {
    pub fn build(&self) -> Result<Marginal64, CliError> {
        Ok(match self {
            MarginalSpec::Discrete { atoms } => Marginal::Discrete(DiscreteMarginal::new(pairs(atoms))?),
            MarginalSpec::Empirical { samples } => Marginal::Discrete(DiscreteMarginal::empirical(samples)?),
            MarginalSpec::Dirac { x } => Marginal::dirac(*x),
            MarginalSpec::Uniform { a, b } => Marginal::uniform(*a, *b)?,
            &MarginalSpec::TruncatedNormal { mean, sd, lo, hi } => {
                Marginal::parametric(Parametric::TruncatedNormal { mean, sd, lo, hi })?
            }
            &MarginalSpec::Triangular { a, mode, b } => {
                Marginal::parametric(Parametric::Triangular { a, mode, b })?
            }
            &MarginalSpec::TruncatedGumbel { loc, scale, lo, hi } => {
                Marginal::parametric(Parametric::TruncatedGumbel { loc, scale, lo, hi })?
            }
            MarginalSpec::QuantileKnots { knots } => {
                Marginal::PiecewiseLinearQuantile(PiecewiseLinearQuantile::new(pairs(knots))?)
            }
            MarginalSpec::Csv { path } => Marginal::Discrete(DiscreteMarginal::from_csv_path(path)?),
        })
    }
}

impl SpectralSpec {
    pub fn build(&self) -> Result<SpectralFunction64, CliError> {
        Ok(match self {
            SpectralSpec::Es { m0 } => SpectralFunction::expected_shortfall(*m0)?,
            SpectralSpec::Constant { value } => SpectralFunction::constant(*value)?,
            SpectralSpec::PiecewiseConstant { steps } => SpectralFunction::piecewise_constant(pairs(steps))?,
            SpectralSpec::PiecewiseLinear { knots } => SpectralFunction::piecewise_linear(pairs(knots))?,
            SpectralSpec::SamplesCsv { path, pieces } => {
                let file = std::fs::File::open(path)?;
                SpectralFunction::samples_from_csv(file, *pieces)?
            }
        })
    }

    /// The level of an expected shortfall.
    pub fn es_level(&self) -> Option<f64> {
        match self {
            SpectralSpec::Es { m0 } => Some(*m0),
            _ => None,
        }
    }
}

impl RunConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn arity(&self) -> usize {
        self.marginals.len()
    }

    /// Structural checks that do not need the solvers.
    pub fn validate(&self) -> Result<(), CliError> {
        let d = self.arity();
        if d == 0 {
            return Err(CliError::Config("at least one marginal is required".into()));
        }
        let p = &self.payout;
        match (&p.expr, &p.exprs) {
            (None, None) => return Err(CliError::Config("payout needs `expr` or `exprs`".into())),
            (Some(_), Some(_)) => {
                return Err(CliError::Config("payout takes `expr` or `exprs`, not both".into()))
            }
            _ => {}
        }
        if let Some(names) = &p.names {
            if names.len() != d {
                return Err(CliError::Config(format!(
                    "{} variable names for {d} marginals",
                    names.len()
                )));
            }
        }
        if let Some(domain) = &p.domain {
            if domain.len() != d {
                return Err(CliError::Config(format!(
                    "domain has {} intervals for {d} marginals",
                    domain.len()
                )));
            }
        }
        if let Some(sig) = &p.signs {
            if sig.sigma.len() != d || sig.sigma.iter().any(|r| r.len() != d) || sig.monotonicity.len() != d {
                return Err(CliError::Config(format!("declared signs must be {d}x{d} with {d} monotonicity labels")));
            }
        }
        if self.discretization == 0 {
            return Err(CliError::Config("discretization must be at least 1".into()));
        }
        if self.grid_per_axis < 3 {
            return Err(CliError::Config("grid_per_axis must be at least 3".into()));
        }
        if let Some(minus) = &self.partition_minus {
            let names = self.names();
            for v in minus {
                if !names.contains(v) {
                    return Err(CliError::Config(format!("partition names unknown variable `{v}`")));
                }
            }
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.payout
            .names
            .clone()
            .unwrap_or_else(|| (1..=self.arity()).map(|i| format!("x{i}")).collect())
    }

    pub fn build_marginals(&self) -> Result<Vec<Marginal64>, CliError> {
        self.marginals.iter().map(MarginalSpec::build).collect()
    }

    pub fn build_alpha(&self) -> Result<SpectralFunction64, CliError> {
        self.spectral.build()
    }

    /// The declared domain, or the hull of the marginal supports.
    pub fn domain(&self, marginals: &[Marginal64]) -> Vec<(f64, f64)> {
        match &self.payout.domain {
            Some(d) => pairs(d),
            None => marginals.iter().map(|m| m.support()).collect(),
        }
    }

    pub fn build_payout(&self, marginals: &[Marginal64]) -> Result<Payout, CliError> {
        let expr = self
            .payout
            .expr
            .as_deref()
            .ok_or_else(|| CliError::Config("this command needs a scalar payout `expr`".into()))?;
        Ok(Payout::parse_named(expr, self.names(), self.domain(marginals))?)
    }

    pub fn build_vector_payout(&self, marginals: &[Marginal64]) -> Result<VectorPayout, CliError> {
        let exprs = self
            .payout
            .exprs
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs vector payout `exprs`".into()))?;
        let domain = self.domain(marginals);
        let comps = exprs
            .iter()
            .map(|e| Payout::parse_named(e, self.names(), domain.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(VectorPayout::new(comps)?)
    }

    pub fn declared_signs(&self) -> Result<Option<SignStructure>, CliError> {
        let Some(sig) = &self.payout.signs else {
            return Ok(None);
        };
        let sigma = sig
            .sigma
            .iter()
            .map(|row| {
                row.iter()
                    .map(|s| Sign::parse(s).ok_or_else(|| CliError::Config(format!("unknown sign code `{s}`"))))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mono = sig
            .monotonicity
            .iter()
            .map(|s| {
                Monotonicity::parse(s).ok_or_else(|| CliError::Config(format!("unknown monotonicity `{s}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Some(SignStructure::declared(sigma, mono)?))
    }

    pub fn partition(&self) -> Result<Option<Partition>, CliError> {
        let Some(minus) = self.partition_minus.as_ref() else {
            return Ok(None);
        };
        let names = self.names();
        let idx: Vec<usize> = minus
            .iter()
            .filter_map(|v| names.iter().position(|n| n == v).map(|i| i + 1))
            .collect();
        Ok(Some(Partition::with_minus(self.arity(), &idx)?))
    }

    pub fn build_baseline(&self) -> Result<BaselineMeasure<f64>, CliError> {
        let spec = self
            .multirisk
            .as_ref()
            .ok_or_else(|| CliError::Config("multirisk command needs a `multirisk` section".into()))?;
        Ok(match &spec.baseline {
            BaselineSpec::Curve { components } => BaselineMeasure::Curve(Curve::new(
                components.iter().map(SpectralSpec::build).collect::<Result<Vec<_>, _>>()?,
            )?),
            BaselineSpec::PointCloud { points, weights } => {
                BaselineMeasure::PointCloud(PointCloud::new(points.clone(), weights.clone())?)
            }
        })
    }
}
