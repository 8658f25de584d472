//! TOML run configuration. List-valued grid keys expand to the cartesian
//! product of experiment specs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use shang::{ExperimentSpec, MethodSpec, NoiseShape, ProblemSpec, Regime};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    #[serde(default)]
    pub quiet: bool,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    pub shang: Option<ShangTable>,
    pub shangpp: Option<ShangPlusPlusTable>,
    #[serde(rename = "shangpp-dl")]
    pub shangpp_dl: Option<DlTable>,
    pub snag: Option<SnagTable>,
    pub sgd: Option<SgdTable>,
    pub shb: Option<MomentumTable>,
    pub nag: Option<MomentumTable>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    #[default]
    Fd,
    Quadratic,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default)]
    pub problem: ProblemKind,
    pub exponent: Option<OneOrMany<u32>>,
    pub eigenvalues: Option<OneOrMany<Vec<f64>>>,
    pub center: Option<Vec<f64>>,
    pub sigma: Option<OneOrMany<f64>>,
    pub averaging: Option<OneOrMany<usize>>,
    pub shape: Option<String>,
    pub methods: OneOrMany<String>,
    pub n_runs: Option<usize>,
    pub n_iters: Option<usize>,
    pub x0: Option<Vec<f64>>,
    pub record_every: Option<usize>,
    pub budget: Option<u64>,
    #[serde(default)]
    pub precision: Precision,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub sigmas: Vec<f64>,
    /// Noise level the frozen hyperparameters are computed for.
    #[serde(default)]
    pub tune_sigma: f64,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShangTable {
    pub regime: Option<String>,
    pub alpha: Option<f64>,
    pub design_sigma: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShangPlusPlusTable {
    pub regime: Option<String>,
    pub m: Option<f64>,
    pub alpha_tilde: Option<f64>,
    pub design_sigma: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DlTable {
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub m: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnagTable {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub mu: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdTable {
    pub lr: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentumTable {
    pub lr: Option<f64>,
    pub momentum: Option<f64>,
}

/// Methods that run without any explicit hyperparameter.
const ALL_METHODS: [&str; 5] = ["shang", "shangpp", "sgd", "shb", "nag"];
const DEFAULT_MOMENTUM: f64 = 0.9;

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    parse(&text).with_context(|| format!("invalid config {}", path.display()))
}

pub fn parse(text: &str) -> Result<RunConfig> {
    Ok(toml::from_str(text)?)
}

fn parse_regime(name: &Option<String>) -> Result<Option<Regime>> {
    match name.as_deref() {
        None => Ok(None),
        Some("strongly-convex") | Some("strongly_convex") => Ok(Some(Regime::StronglyConvex)),
        Some("convex") => Ok(Some(Regime::Convex)),
        Some(other) => bail!("unknown regime \"{other}\" (expected strongly-convex or convex)"),
    }
}

fn required(value: Option<f64>, method: &str, key: &str) -> Result<f64> {
    value.with_context(|| format!("method {method} requires [{method}].{key}"))
}

impl RunConfig {
    pub fn methods(&self) -> Result<Vec<MethodSpec>> {
        let mut names: Vec<String> = Vec::new();
        for name in self.experiment.methods.values() {
            if name == "all" {
                names.extend(ALL_METHODS.iter().map(|s| s.to_string()));
            } else {
                names.push(name);
            }
        }
        if names.is_empty() {
            bail!("no methods specified");
        }
        let mut seen = Vec::new();
        names.retain(|n| {
            let fresh = !seen.contains(n);
            seen.push(n.clone());
            fresh
        });
        names.iter().map(|n| self.method(n)).collect()
    }

    fn method(&self, name: &str) -> Result<MethodSpec> {
        Ok(match name {
            "shang" => {
                let t = self.shang.clone().unwrap_or_default();
                MethodSpec::Shang {
                    regime: parse_regime(&t.regime)?,
                    alpha: t.alpha,
                    design_sigma: t.design_sigma,
                }
            }
            "shangpp" => {
                let t = self.shangpp.clone().unwrap_or_default();
                MethodSpec::ShangPlusPlus {
                    regime: parse_regime(&t.regime)?,
                    m: t.m.unwrap_or(1.0),
                    alpha_tilde: t.alpha_tilde,
                    design_sigma: t.design_sigma,
                }
            }
            "shangpp-dl" => {
                let t = self.shangpp_dl.clone().unwrap_or_default();
                MethodSpec::ShangPlusPlusDl {
                    alpha: required(t.alpha, name, "alpha")?,
                    gamma: required(t.gamma, name, "gamma")?,
                    m: t.m.unwrap_or(1.0),
                }
            }
            "snag" => {
                let t = self.snag.clone().unwrap_or_default();
                MethodSpec::Snag {
                    alpha: required(t.alpha, name, "alpha")?,
                    beta: required(t.beta, name, "beta")?,
                    gamma: required(t.gamma, name, "gamma")?,
                    mu: required(t.mu, name, "mu")?,
                }
            }
            "sgd" => MethodSpec::Sgd {
                lr: self.sgd.clone().unwrap_or_default().lr,
            },
            "shb" => {
                let t = self.shb.clone().unwrap_or_default();
                MethodSpec::Shb {
                    lr: t.lr,
                    momentum: t.momentum.unwrap_or(DEFAULT_MOMENTUM),
                }
            }
            "nag" => {
                let t = self.nag.clone().unwrap_or_default();
                MethodSpec::Nag {
                    lr: t.lr,
                    momentum: t.momentum.unwrap_or(DEFAULT_MOMENTUM),
                }
            }
            other => bail!(
                "unknown method \"{other}\" (expected all, shang, shangpp, shangpp-dl, snag, sgd, shb or nag)"
            ),
        })
    }

    fn problems(&self) -> Result<Vec<ProblemSpec>> {
        let e = &self.experiment;
        match e.problem {
            ProblemKind::Fd => {
                if e.eigenvalues.is_some() || e.center.is_some() {
                    bail!("eigenvalues and center only apply to problem = \"quadratic\"");
                }
                let exponents = e.exponent.clone().map(|x| x.values()).unwrap_or_else(|| vec![4]);
                Ok(exponents.into_iter().map(|exponent| ProblemSpec::Fd { exponent }).collect())
            }
            ProblemKind::Quadratic => {
                if e.exponent.is_some() {
                    bail!("exponent only applies to problem = \"fd\"");
                }
                let grid = e
                    .eigenvalues
                    .clone()
                    .context("problem = \"quadratic\" requires experiment.eigenvalues")?
                    .values();
                Ok(grid
                    .into_iter()
                    .map(|eigenvalues| ProblemSpec::Quadratic {
                        center: e.center.clone().unwrap_or_else(|| vec![0.0; eigenvalues.len()]),
                        eigenvalues,
                    })
                    .collect())
            }
        }
    }

    fn shape(&self) -> Result<NoiseShape> {
        match self.experiment.shape.as_deref() {
            None | Some("elementwise") => Ok(NoiseShape::Elementwise),
            Some("scalar") => Ok(NoiseShape::ScalarFactor),
            Some(other) => bail!("unknown noise shape \"{other}\" (expected scalar or elementwise)"),
        }
    }

    /// Every spec of the grid, validated. `seed` overrides any seed in the
    /// file.
    pub fn specs(&self, seed: u64) -> Result<Vec<ExperimentSpec>> {
        let e = &self.experiment;
        let methods = self.methods()?;
        let sigmas = e.sigma.clone().map(|s| s.values()).unwrap_or_else(|| vec![0.0]);
        let averagings = e.averaging.clone().map(|k| k.values()).unwrap_or_else(|| vec![1]);
        let shape = self.shape()?;
        let mut specs = Vec::new();
        for problem in self.problems()? {
            for method in &methods {
                for &sigma in &sigmas {
                    for &averaging in &averagings {
                        let mut spec = ExperimentSpec::new(problem.clone(), method.clone());
                        spec.sigma = sigma;
                        spec.averaging = averaging;
                        spec.shape = shape;
                        spec.base_seed = seed;
                        if let Some(v) = e.n_runs {
                            spec.n_runs = v;
                        }
                        if let Some(v) = e.n_iters {
                            spec.n_iters = v;
                        }
                        if let Some(v) = &e.x0 {
                            spec.x0 = v.clone();
                        }
                        if let Some(v) = e.record_every {
                            spec.record_every = v;
                        }
                        if let Some(v) = e.budget {
                            spec.budget = v;
                        }
                        spec.validate().with_context(|| {
                            format!(
                                "invalid experiment: method {}, problem {}, sigma {sigma}",
                                method.label(),
                                problem.label()
                            )
                        })?;
                        specs.push(spec);
                    }
                }
            }
        }
        let mut names = BTreeMap::new();
        for spec in &specs {
            let name = csv_name(spec);
            if names.insert(name.clone(), ()).is_some() {
                bail!("two experiments map to the same output file {name}; remove duplicate grid values");
            }
        }
        Ok(specs)
    }
}

/// Output file for one (method, problem, sigma) cell.
pub fn csv_name(spec: &ExperimentSpec) -> String {
    let mut name = format!("{}_{}_sigma{}", spec.method.label(), spec.problem.label(), spec.sigma);
    if spec.averaging != 1 {
        name.push_str(&format!("_K{}", spec.averaging));
    }
    if spec.shape == NoiseShape::ScalarFactor {
        name.push_str("_scalar");
    }
    name.push_str(".csv");
    name
}
