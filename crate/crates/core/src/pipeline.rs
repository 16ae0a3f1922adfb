//! Fit the meta-analysis on reference studies and adjust a new study's
//! estimate, with either estimation backend.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::meta::{fit_bayes, fit_ml, McmcConfig, PriorSpec, ReferenceSet};
use crate::prediction::{predict_bayes, predict_ml, AdjustedPrediction, NewStudyEstimate};
use crate::rng::{derive_seed, stream};

/// Number of predictive draws used by the ML backend unless overridden.
pub const DEFAULT_ML_DRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum Method {
    Bayes { priors: PriorSpec, mcmc: McmcConfig },
    Ml { n_draws: usize },
}

impl Method {
    pub fn bayes(priors: PriorSpec) -> Self {
        Method::Bayes {
            priors,
            mcmc: McmcConfig::default(),
        }
    }

    pub fn ml() -> Self {
        Method::Ml {
            n_draws: DEFAULT_ML_DRAWS,
        }
    }

    /// Short human-readable descriptor, e.g. `bayes/half_cauchy`.
    pub fn describe(&self) -> String {
        match self {
            Method::Ml { .. } => "ml".to_string(),
            Method::Bayes { priors, .. } => {
                let family = match priors.sigma {
                    crate::meta::SigmaPrior::HalfCauchy { .. } => "half_cauchy",
                    crate::meta::SigmaPrior::Uniform { .. } => "uniform",
                    crate::meta::SigmaPrior::GammaOnPrecision { .. } => "gamma_on_precision",
                };
                format!("bayes/{family}")
            }
        }
    }
}

/// Outcome of one fit-and-predict pass.
#[derive(Debug, Clone)]
pub struct Adjustment {
    pub prediction: AdjustedPrediction,
    /// Convergence warning from the Bayesian fit, if any.
    pub warning: Option<String>,
}

/// Fit `refs` with `method` and predict the adjusted log HR of `new_study`.
///
/// The meta fit and the predictive draws use separate streams derived from
/// `seed`.
pub fn adjust_new_study(
    refs: &ReferenceSet,
    new_study: &NewStudyEstimate,
    method: &Method,
    prior_variance: f64,
    seed: u64,
) -> Result<Adjustment> {
    let mut predict_rng = stream(derive_seed(seed, 1));
    match method {
        Method::Bayes { priors, mcmc } => {
            let draws = fit_bayes(refs, priors, mcmc, derive_seed(seed, 0))?;
            let prediction = predict_bayes(new_study, &draws, prior_variance, refs.len(), &mut predict_rng)?;
            Ok(Adjustment {
                prediction,
                warning: draws.warning,
            })
        }
        Method::Ml { n_draws } => {
            let fit = fit_ml(refs)?;
            let prediction = predict_ml(new_study, &fit, *n_draws, &mut predict_rng)?;
            Ok(Adjustment {
                prediction,
                warning: None,
            })
        }
    }
}
