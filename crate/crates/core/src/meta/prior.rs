use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normal prior on the mean bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuPrior {
    pub mean: f64,
    pub variance: f64,
}

/// Prior on the between-study standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SigmaPrior {
    /// Half-Cauchy on sigma, truncated to sigma >= 0.
    HalfCauchy { location: f64, scale: f64 },
    /// Uniform on sigma over `[lower, upper]`.
    Uniform { lower: f64, upper: f64 },
    /// Gamma(shape, rate) on the precision `1 / sigma^2`.
    GammaOnPrecision { shape: f64, rate: f64 },
}

impl SigmaPrior {
    pub const fn half_cauchy_default() -> Self {
        SigmaPrior::HalfCauchy {
            location: 0.0,
            scale: 25.0,
        }
    }

    pub const fn uniform_default() -> Self {
        SigmaPrior::Uniform {
            lower: 0.0,
            upper: 100.0,
        }
    }

    pub const fn gamma_default() -> Self {
        SigmaPrior::GammaOnPrecision {
            shape: 0.001,
            rate: 0.001,
        }
    }

    /// Unnormalized log prior density of `log sigma`, including the Jacobian
    /// of the `sigma -> log sigma` transform.
    pub fn log_density_log_sigma(&self, log_sigma: f64) -> f64 {
        let sigma = log_sigma.exp();
        match *self {
            SigmaPrior::HalfCauchy { location, scale } => {
                let z = (sigma - location) / scale;
                -(z * z).ln_1p() + log_sigma
            }
            SigmaPrior::Uniform { lower, upper } => {
                if sigma >= lower && sigma <= upper {
                    log_sigma
                } else {
                    f64::NEG_INFINITY
                }
            }
            SigmaPrior::GammaOnPrecision { shape, rate } => {
                // tau = sigma^-2; p(log sigma) ∝ tau^shape * exp(-rate * tau)
                let log_tau = -2.0 * log_sigma;
                shape * log_tau - rate * log_tau.exp()
            }
        }
    }

    /// Whether `sigma` lies in the prior's support.
    pub fn supports(&self, sigma: f64) -> bool {
        match *self {
            SigmaPrior::Uniform { lower, upper } => sigma >= lower && sigma <= upper,
            _ => sigma > 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPrior(m));
        match *self {
            SigmaPrior::HalfCauchy { location, scale } => {
                if !location.is_finite() || !(scale > 0.0) || !scale.is_finite() {
                    return bad(format!("half-Cauchy needs finite location and scale > 0, got ({location}, {scale})"));
                }
            }
            SigmaPrior::Uniform { lower, upper } => {
                if !(lower >= 0.0) || !(upper > lower) || !upper.is_finite() || !(upper > 0.0) {
                    return bad(format!("uniform needs 0 <= lower < upper < inf, got ({lower}, {upper})"));
                }
            }
            SigmaPrior::GammaOnPrecision { shape, rate } => {
                if !(shape > 0.0) || !(rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
                    return bad(format!("gamma needs shape > 0 and rate > 0, got ({shape}, {rate})"));
                }
            }
        }
        Ok(())
    }
}

/// Priors for the Bayesian meta-analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub mu: MuPrior,
    pub sigma: SigmaPrior,
}

impl Default for PriorSpec {
    /// `mu ~ N(0, 100)` and `sigma ~ half-Cauchy(0, 25)`.
    fn default() -> Self {
        Self {
            mu: MuPrior {
                mean: 0.0,
                variance: 100.0,
            },
            sigma: SigmaPrior::half_cauchy_default(),
        }
    }
}

impl PriorSpec {
    pub fn with_sigma(sigma: SigmaPrior) -> Self {
        Self {
            sigma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.mean.is_finite() || !(self.mu.variance > 0.0) || !self.mu.variance.is_finite() {
            return Err(Error::InvalidPrior(format!(
                "normal prior on mu needs finite mean and variance > 0, got ({}, {})",
                self.mu.mean, self.mu.variance
            )));
        }
        self.sigma.validate()
    }

    /// Unnormalized log prior of `(mu, log sigma)`.
    pub fn log_density(&self, mu: f64, log_sigma: f64) -> f64 {
        let r = mu - self.mu.mean;
        -0.5 * r * r / self.mu.variance + self.sigma.log_density_log_sigma(log_sigma)
    }
}
