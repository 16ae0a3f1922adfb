use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use extcontrol::meta::{McmcConfig, MuPrior, PriorSpec, SigmaPrior};
use extcontrol::pipeline::{Method, DEFAULT_ML_DRAWS};
use extcontrol::prediction::DEFAULT_PRIOR_VARIANCE;
use extcontrol::sim::{ScenarioSpec, DEFAULT_TOTAL_STUDIES};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::{Cli, Command, CommonArgs, FileConfig, MethodArg, SigmaPriorArg};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_N_REFERENCE: usize = 6;

/// Where `predict` gets its meta-analytic inputs.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaSource {
    References(PathBuf),
    Draws(PathBuf),
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Task {
    Meta {
        input: PathBuf,
    },
    Predict {
        source: MetaSource,
        trt_ec_loghr: f64,
        trt_ec_se: f64,
    },
    Simulate {
        scenario: ScenarioSpec,
        n_reference: usize,
        total_studies: usize,
    },
    Loo {
        ic_ec: PathBuf,
        trt_ec: PathBuf,
        trt_ic: PathBuf,
    },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Meta { .. } => "meta",
            Task::Predict { .. } => "predict",
            Task::Simulate { .. } => "simulate",
            Task::Loo { .. } => "loo",
        }
    }
}

/// Fully resolved run settings. Everything serialized here feeds the config
/// hash; the output directory and thread cap do not change results and are
/// left out.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub task: Task,
    pub seed: u64,
    pub method: Method,
    pub alpha: f64,
    pub prior_variance: f64,
    pub exclude: Vec<String>,
    #[serde(skip)]
    pub out_dir: PathBuf,
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl RunConfig {
    /// SHA-256 of the canonical JSON form of the resolved settings.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

fn read_file_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.with_context(|| format!("missing required setting --{flag} (flag or config file)"))
}

fn resolve_sigma_prior(c: &CommonArgs, f: &FileConfig) -> Result<SigmaPrior> {
    let family = c.sigma_prior.or(f.sigma_prior).unwrap_or(SigmaPriorArg::HalfCauchy);
    let hc = (c.hc_location.or(f.hc_location), c.hc_scale.or(f.hc_scale));
    let un = (c.uniform_lower.or(f.uniform_lower), c.uniform_upper.or(f.uniform_upper));
    let ga = (c.gamma_shape.or(f.gamma_shape), c.gamma_rate.or(f.gamma_rate));
    let stray = match family {
        SigmaPriorArg::HalfCauchy => un.0.or(un.1).or(ga.0).or(ga.1).is_some(),
        SigmaPriorArg::Uniform => hc.0.or(hc.1).or(ga.0).or(ga.1).is_some(),
        SigmaPriorArg::InvGamma => hc.0.or(hc.1).or(un.0).or(un.1).is_some(),
    };
    if stray {
        bail!("hyperparameters given for a sigma prior family other than the selected one");
    }
    let prior = match family {
        SigmaPriorArg::HalfCauchy => {
            let SigmaPrior::HalfCauchy { location, scale } = SigmaPrior::half_cauchy_default() else {
                unreachable!()
            };
            SigmaPrior::HalfCauchy {
                location: hc.0.unwrap_or(location),
                scale: hc.1.unwrap_or(scale),
            }
        }
        SigmaPriorArg::Uniform => {
            let SigmaPrior::Uniform { lower, upper } = SigmaPrior::uniform_default() else {
                unreachable!()
            };
            SigmaPrior::Uniform {
                lower: un.0.unwrap_or(lower),
                upper: un.1.unwrap_or(upper),
            }
        }
        SigmaPriorArg::InvGamma => {
            let SigmaPrior::GammaOnPrecision { shape, rate } = SigmaPrior::gamma_default() else {
                unreachable!()
            };
            SigmaPrior::GammaOnPrecision {
                shape: ga.0.unwrap_or(shape),
                rate: ga.1.unwrap_or(rate),
            }
        }
    };
    Ok(prior)
}

fn resolve_method(c: &CommonArgs, f: &FileConfig) -> Result<Method> {
    match c.method.or(f.method).unwrap_or(MethodArg::Bayes) {
        MethodArg::Ml => Ok(Method::Ml {
            n_draws: c.ml_draws.or(f.ml_draws).unwrap_or(DEFAULT_ML_DRAWS),
        }),
        MethodArg::Bayes => {
            let defaults = PriorSpec::default();
            let priors = PriorSpec {
                mu: MuPrior {
                    mean: c.mu_prior_mean.or(f.mu_prior_mean).unwrap_or(defaults.mu.mean),
                    variance: c.mu_prior_variance.or(f.mu_prior_variance).unwrap_or(defaults.mu.variance),
                },
                sigma: resolve_sigma_prior(c, f)?,
            };
            priors.validate()?;
            let d = McmcConfig::default();
            let mcmc = McmcConfig {
                chains: c.chains.or(f.chains).unwrap_or(d.chains),
                warmup: c.warmup.or(f.warmup).unwrap_or(d.warmup),
                draws: c.draws.or(f.draws).unwrap_or(d.draws),
            };
            mcmc.validate()?;
            Ok(Method::Bayes { priors, mcmc })
        }
    }
}

fn resolve_scenario(id: Option<String>, file: Option<PathBuf>) -> Result<ScenarioSpec> {
    let spec = match (id, file) {
        (Some(id), None) => ScenarioSpec::builtin(&id)
            .with_context(|| format!("unknown scenario '{id}' (built-in: S1..S6)"))?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading scenario file {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing scenario file {}", path.display()))?
        }
        (Some(_), Some(_)) => bail!("give either --scenario or --scenario-file, not both"),
        (None, None) => bail!("missing required setting --scenario or --scenario-file"),
    };
    spec.validate()?;
    Ok(spec)
}

/// Merge flags over config-file entries over defaults.
pub fn resolve(cli: Cli) -> Result<RunConfig> {
    let Cli { command, common: c } = cli;
    let f = match &c.config {
        Some(path) => read_file_config(path)?,
        None => FileConfig::default(),
    };

    let task = match command {
        Command::Meta(a) => Task::Meta {
            input: require(a.input.or(f.input.clone()), "input")?,
        },
        Command::Predict(a) => {
            let (input, draws) = if a.input.is_some() || a.meta_draws.is_some() {
                (a.input, a.meta_draws)
            } else {
                (f.input.clone(), f.meta_draws.clone())
            };
            let source = match (input, draws) {
                (Some(p), None) => MetaSource::References(p),
                (None, Some(p)) => MetaSource::Draws(p),
                (Some(_), Some(_)) => bail!("give either --input or --meta-draws, not both"),
                (None, None) => bail!("missing required setting --input or --meta-draws"),
            };
            Task::Predict {
                source,
                trt_ec_loghr: require(a.trt_ec_loghr.or(f.trt_ec_loghr), "trt-ec-loghr")?,
                trt_ec_se: require(a.trt_ec_se.or(f.trt_ec_se), "trt-ec-se")?,
            }
        }
        Command::Simulate(a) => {
            let (id, file) = if a.scenario.is_some() || a.scenario_file.is_some() {
                (a.scenario, a.scenario_file)
            } else {
                (f.scenario.clone(), f.scenario_file.clone())
            };
            Task::Simulate {
                scenario: resolve_scenario(id, file)?,
                n_reference: a.n_reference.or(f.n_reference).unwrap_or(DEFAULT_N_REFERENCE),
                total_studies: a.total.or(f.total).unwrap_or(DEFAULT_TOTAL_STUDIES),
            }
        }
        Command::Loo(a) => Task::Loo {
            ic_ec: require(a.ic_ec.or(f.ic_ec.clone()), "ic-ec")?,
            trt_ec: require(a.trt_ec.or(f.trt_ec.clone()), "trt-ec")?,
            trt_ic: require(a.trt_ic.or(f.trt_ic.clone()), "trt-ic")?,
        },
    };

    let method = resolve_method(&c, &f)?;
    if matches!(task, Task::Predict { source: MetaSource::Draws(_), .. }) && matches!(method, Method::Ml { .. }) {
        bail!("--meta-draws holds Bayesian posterior draws; use --method bayes or pass --input");
    }
    let alpha = c.alpha.or(f.alpha).unwrap_or(DEFAULT_ALPHA);
    if !(alpha > 0.0 && alpha < 1.0) {
        bail!("--alpha must lie in (0, 1), got {alpha}");
    }
    let prior_variance = c.prior_variance.or(f.prior_variance).unwrap_or(DEFAULT_PRIOR_VARIANCE);
    if !(prior_variance > 0.0 && prior_variance.is_finite()) {
        bail!("--prior-variance must be positive, got {prior_variance}");
    }
    let exclude = if c.exclude.is_empty() { f.exclude.clone().unwrap_or_default() } else { c.exclude.clone() };
    if !exclude.is_empty() && matches!(task, Task::Simulate { .. }) {
        bail!("--exclude applies to reference-study inputs, not to simulate");
    }
    let threads = c.threads.or(f.threads);
    if threads == Some(0) {
        bail!("--threads must be at least 1");
    }

    Ok(RunConfig {
        task,
        seed: c.seed.or(f.seed).unwrap_or(DEFAULT_SEED),
        method,
        alpha,
        prior_variance,
        exclude,
        out_dir: c.out_dir.or(f.out_dir).unwrap_or_else(|| PathBuf::from(".")),
        threads,
    })
}
