use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

/// Adjust single-arm external-control log hazard ratios with a meta-analysis
/// of reference studies.
#[derive(Debug, Parser)]
#[command(name = "extcontrol", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the meta-analysis of IC-vs-EC log HRs from reference studies.
    Meta(MetaArgs),
    /// Adjust a new single-arm study's TRT-vs-EC estimate.
    Predict(PredictArgs),
    /// Run a simulation scenario and report operating characteristics.
    Simulate(SimulateArgs),
    /// Leave-one-out cross-validation over reference studies.
    Loo(LooArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Bayes,
    Ml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaPriorArg {
    HalfCauchy,
    Uniform,
    InvGamma,
}

/// Settings shared by every subcommand. All are optional on the command line
/// so that a config file can supply them.
#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// TOML config file; explicit flags take precedence over its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "EXTCONTROL_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// Random seed [default: 1].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Estimation backend [default: bayes].
    #[arg(long, global = true, value_enum)]
    pub method: Option<MethodArg>,
    /// Prior family for the between-study SD [default: half-cauchy].
    #[arg(long, global = true, value_enum)]
    pub sigma_prior: Option<SigmaPriorArg>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub hc_location: Option<f64>,
    #[arg(long, global = true)]
    pub hc_scale: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub uniform_lower: Option<f64>,
    #[arg(long, global = true)]
    pub uniform_upper: Option<f64>,
    /// Shape of the gamma prior on the precision 1/sigma^2.
    #[arg(long, global = true)]
    pub gamma_shape: Option<f64>,
    /// Rate of the gamma prior on the precision 1/sigma^2.
    #[arg(long, global = true)]
    pub gamma_rate: Option<f64>,
    /// Normal prior mean for mu [default: 0].
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub mu_prior_mean: Option<f64>,
    /// Normal prior variance for mu [default: 100].
    #[arg(long, global = true)]
    pub mu_prior_variance: Option<f64>,
    /// Prior variance for the new study's TRT-vs-EC log HR [default: 100].
    #[arg(long, global = true)]
    pub prior_variance: Option<f64>,
    /// MCMC chains [default: 4].
    #[arg(long, global = true)]
    pub chains: Option<usize>,
    /// MCMC warmup iterations per chain [default: 1000].
    #[arg(long, global = true)]
    pub warmup: Option<usize>,
    /// MCMC kept draws per chain [default: 2500].
    #[arg(long, global = true)]
    pub draws: Option<usize>,
    /// Predictive draws for the ML backend [default: 10000].
    #[arg(long, global = true)]
    pub ml_draws: Option<usize>,
    /// Interval level is 1 - alpha [default: 0.05].
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Worker thread cap; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Study labels to drop from reference inputs (repeatable).
    #[arg(long, global = true, value_delimiter = ',')]
    pub exclude: Vec<String>,
}

#[derive(Debug, Default, Args)]
pub struct MetaArgs {
    /// Reference studies CSV with header `study,loghr,se`.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
pub struct PredictArgs {
    /// Reference studies CSV; the meta-analysis is fitted first.
    #[arg(long, conflicts_with = "meta_draws")]
    pub input: Option<PathBuf>,
    /// Posterior draws CSV written by `meta` (Bayesian backend only).
    #[arg(long)]
    pub meta_draws: Option<PathBuf>,
    /// New study's TRT-vs-EC log HR.
    #[arg(long, allow_hyphen_values = true)]
    pub trt_ec_loghr: Option<f64>,
    /// Standard error of the TRT-vs-EC log HR.
    #[arg(long)]
    pub trt_ec_se: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct SimulateArgs {
    /// Built-in scenario id (S1..S6).
    #[arg(long, conflicts_with = "scenario_file")]
    pub scenario: Option<String>,
    /// TOML scenario definition.
    #[arg(long)]
    pub scenario_file: Option<PathBuf>,
    /// Reference studies per replication [default: 6].
    #[arg(long)]
    pub n_reference: Option<usize>,
    /// Total simulated studies, split into replications [default: 3500].
    #[arg(long)]
    pub total: Option<usize>,
}

#[derive(Debug, Default, Args)]
pub struct LooArgs {
    /// IC-vs-EC estimates per reference study.
    #[arg(long)]
    pub ic_ec: Option<PathBuf>,
    /// TRT-vs-EC estimates per reference study.
    #[arg(long)]
    pub trt_ec: Option<PathBuf>,
    /// TRT-vs-IC estimates per reference study.
    #[arg(long)]
    pub trt_ic: Option<PathBuf>,
}

/// Config file contents: the same keys as the long flags, in snake_case.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub method: Option<MethodArg>,
    pub sigma_prior: Option<SigmaPriorArg>,
    pub hc_location: Option<f64>,
    pub hc_scale: Option<f64>,
    pub uniform_lower: Option<f64>,
    pub uniform_upper: Option<f64>,
    pub gamma_shape: Option<f64>,
    pub gamma_rate: Option<f64>,
    pub mu_prior_mean: Option<f64>,
    pub mu_prior_variance: Option<f64>,
    pub prior_variance: Option<f64>,
    pub chains: Option<usize>,
    pub warmup: Option<usize>,
    pub draws: Option<usize>,
    pub ml_draws: Option<usize>,
    pub alpha: Option<f64>,
    pub threads: Option<usize>,
    pub exclude: Option<Vec<String>>,
    pub input: Option<PathBuf>,
    pub meta_draws: Option<PathBuf>,
    pub trt_ec_loghr: Option<f64>,
    pub trt_ec_se: Option<f64>,
    pub scenario: Option<String>,
    pub scenario_file: Option<PathBuf>,
    pub n_reference: Option<usize>,
    pub total: Option<usize>,
    pub ic_ec: Option<PathBuf>,
    pub trt_ec: Option<PathBuf>,
    pub trt_ic: Option<PathBuf>,
}
