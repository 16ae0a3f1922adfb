//! Adaptive random-walk Metropolis sampler for the meta-analytic posterior.
//!
//! The chain runs on `(mu, log sigma)` with one Gaussian random-walk update
//! per coordinate. During warmup each coordinate's log step size follows a
//! Robbins-Monro recursion toward a 0.44 acceptance rate; adaptation is frozen
//! for the kept draws.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{loglik_unchecked, PriorSpec, ReferenceSet};
use crate::diagnostics::{rhat_ess, ConvergenceDiagnostics};
use crate::error::{domain, Result};
use crate::rng::{substream, StreamRng};
use crate::stats::DrawSummary;

/// Chains whose split-R-hat exceeds this are flagged as unconverged.
pub const RHAT_THRESHOLD: f64 = 1.05;

const TARGET_ACCEPT: f64 = 0.44;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub chains: usize,
    pub warmup: usize,
    /// Kept draws per chain.
    pub draws: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            warmup: 1000,
            draws: 2500,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains < 2 || self.warmup < 500 || self.draws < 1000 {
            return Err(domain(format!(
                "MCMC needs chains >= 2, warmup >= 500 and draws >= 1000 per chain, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Posterior draws of `(mu, sigma)`, chain-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub n_chains: usize,
    pub n_warmup: usize,
    pub n_kept: usize,
    pub rhat_mu: f64,
    pub rhat_sigma: f64,
    pub ess_mu: f64,
    pub ess_sigma: f64,
    /// Per-chain acceptance rates of the `(mu, log sigma)` updates.
    pub acceptance: Vec<[f64; 2]>,
    /// Set when convergence diagnostics fail; draws are still returned.
    pub warning: Option<String>,
}

impl PosteriorDraws {
    /// Wrap externally supplied draws (e.g. read back from disk).
    ///
    /// Diagnostics are computed when the draws split into at least two
    /// chains of ten or more; otherwise they are NaN.
    pub fn from_draws(mu: Vec<f64>, sigma: Vec<f64>, n_chains: usize) -> Result<Self> {
        if mu.is_empty() || mu.len() != sigma.len() {
            return Err(domain("mu and sigma draws must be non-empty and of equal length"));
        }
        if sigma.iter().any(|s| !(*s >= 0.0)) || mu.iter().any(|m| !m.is_finite()) {
            return Err(domain("draws must be finite with sigma >= 0"));
        }
        let n_chains = n_chains.max(1);
        if !mu.len().is_multiple_of(n_chains) {
            return Err(domain("draw count is not a multiple of the chain count"));
        }
        let n_kept = mu.len() / n_chains;
        let mut out = Self {
            mu,
            sigma,
            n_chains,
            n_warmup: 0,
            n_kept,
            rhat_mu: f64::NAN,
            rhat_sigma: f64::NAN,
            ess_mu: f64::NAN,
            ess_sigma: f64::NAN,
            acceptance: Vec::new(),
            warning: None,
        };
        if n_chains >= 2 && n_kept >= 10 {
            out.attach_diagnostics()?;
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn mu_chains(&self) -> Vec<&[f64]> {
        self.mu.chunks(self.n_kept).collect()
    }

    pub fn sigma_chains(&self) -> Vec<&[f64]> {
        self.sigma.chunks(self.n_kept).collect()
    }

    pub fn mu_summary(&self, alpha: f64) -> DrawSummary {
        DrawSummary::from_draws(&self.mu, alpha)
    }

    pub fn sigma_summary(&self, alpha: f64) -> DrawSummary {
        DrawSummary::from_draws(&self.sigma, alpha)
    }

    pub fn converged(&self) -> bool {
        self.warning.is_none()
    }

    /// Monte Carlo standard error of the posterior mean of mu.
    pub fn mu_mcse(&self) -> f64 {
        crate::stats::std_dev(&self.mu) / self.ess_mu.sqrt()
    }

    fn attach_diagnostics(&mut self) -> Result<()> {
        let dm: ConvergenceDiagnostics = rhat_ess(&self.mu_chains())?;
        // sigma diagnostics on the log scale the sampler moves on
        let log_sigma: Vec<Vec<f64>> = self
            .sigma_chains()
            .iter()
            .map(|c| c.iter().map(|s| s.max(f64::MIN_POSITIVE).ln()).collect())
            .collect();
        let ds = rhat_ess(&log_sigma)?;
        self.rhat_mu = dm.rhat;
        self.ess_mu = dm.ess;
        self.rhat_sigma = ds.rhat;
        self.ess_sigma = ds.ess;
        self.warning = match (dm.is_converged(RHAT_THRESHOLD), ds.is_converged(RHAT_THRESHOLD)) {
            (true, true) => None,
            _ => Some(format!(
                "chains did not converge: rhat_mu={:.4}, rhat_sigma={:.4} (threshold {RHAT_THRESHOLD})",
                dm.rhat, ds.rhat
            )),
        };
        Ok(())
    }
}

struct Target<'a> {
    data: &'a ReferenceSet,
    priors: &'a PriorSpec,
}

impl Target<'_> {
    fn log_post(&self, mu: f64, log_sigma: f64) -> f64 {
        let prior = self.priors.log_density(mu, log_sigma);
        if !prior.is_finite() {
            return f64::NEG_INFINITY;
        }
        let ll = loglik_unchecked(mu, (2.0 * log_sigma).exp(), self.data);
        if ll.is_nan() {
            return f64::NEG_INFINITY;
        }
        prior + ll
    }
}

struct ChainOutput {
    mu: Vec<f64>,
    sigma: Vec<f64>,
    acceptance: [f64; 2],
}

fn initial_log_sigma(priors: &PriorSpec, chain: usize, n_chains: usize) -> f64 {
    let spread = if n_chains > 1 {
        -2.0 + 3.0 * chain as f64 / (n_chains - 1) as f64
    } else {
        -2.0
    };
    if priors.sigma.supports(spread.exp()) {
        return spread;
    }
    match priors.sigma {
        super::SigmaPrior::Uniform { lower, upper } => {
            let frac = (chain + 1) as f64 / (n_chains + 1) as f64;
            (lower + (upper - lower) * frac).ln()
        }
        _ => spread,
    }
}

fn run_chain(
    target: &Target<'_>,
    config: &McmcConfig,
    mut state: [f64; 2],
    mut log_step: [f64; 2],
    rng: &mut StreamRng,
) -> ChainOutput {
    let mut lp = target.log_post(state[0], state[1]);
    let mut mu = Vec::with_capacity(config.draws);
    let mut sigma = Vec::with_capacity(config.draws);
    let mut accepted = [0usize; 2];

    for iter in 0..config.warmup + config.draws {
        let adapting = iter < config.warmup;
        let gain = ((iter + 1) as f64).powf(-0.6);
        for k in 0..2 {
            let z: f64 = rng.sample(StandardNormal);
            let mut proposal = state;
            proposal[k] += log_step[k].exp() * z;
            let lp_new = target.log_post(proposal[0], proposal[1]);
            let log_ratio = lp_new - lp;
            let accept_prob = if log_ratio >= 0.0 { 1.0 } else { log_ratio.exp() };
            let u: f64 = rng.random();
            if u < accept_prob {
                state = proposal;
                lp = lp_new;
                if !adapting {
                    accepted[k] += 1;
                }
            }
            if adapting {
                log_step[k] += gain * (accept_prob - TARGET_ACCEPT);
            }
        }
        if !adapting {
            mu.push(state[0]);
            sigma.push(state[1].exp());
        }
    }
    let kept = config.draws.max(1) as f64;
    ChainOutput {
        mu,
        sigma,
        acceptance: [accepted[0] as f64 / kept, accepted[1] as f64 / kept],
    }
}

/// Sample the posterior of `(mu, sigma)` given reference studies and priors.
///
/// Chains run in parallel, each on its own substream of `seed`, so output is
/// identical regardless of thread scheduling. Failed convergence checks set
/// [`PosteriorDraws::warning`] rather than returning an error.
pub fn fit_bayes(
    data: &ReferenceSet,
    priors: &PriorSpec,
    config: &McmcConfig,
    seed: u64,
) -> Result<PosteriorDraws> {
    priors.validate()?;
    config.validate()?;
    if data.is_empty() {
        return Err(domain("reference set is empty"));
    }

    let target = Target { data, priors };
    let mu0 = data.weighted_mean(0.0);
    let precision: f64 = data.studies().iter().map(|s| 1.0 / s.variance()).sum();
    let init_step = [(2.4 / precision.sqrt()).ln(), 0.0];

    let outputs: Vec<ChainOutput> = (0..config.chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, c as u64);
            let state = [mu0, initial_log_sigma(priors, c, config.chains)];
            run_chain(&target, config, state, init_step, &mut rng)
        })
        .collect();

    let mut mu = Vec::with_capacity(config.chains * config.draws);
    let mut sigma = Vec::with_capacity(config.chains * config.draws);
    let mut acceptance = Vec::with_capacity(config.chains);
    for out in outputs {
        mu.extend(out.mu);
        sigma.extend(out.sigma);
        acceptance.push(out.acceptance);
    }

    let mut draws = PosteriorDraws {
        mu,
        sigma,
        n_chains: config.chains,
        n_warmup: config.warmup,
        n_kept: config.draws,
        rhat_mu: f64::NAN,
        rhat_sigma: f64::NAN,
        ess_mu: f64::NAN,
        ess_sigma: f64::NAN,
        acceptance,
        warning: None,
    };
    draws.attach_diagnostics()?;
    Ok(draws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meta::{MuPrior, SigmaPrior};
    use crate::stats::{mean, median};

    fn data5() -> ReferenceSet {
        ReferenceSet::from_slices(&[-0.45, -0.1, -0.3, 0.15, -0.6], &[0.12, 0.15, 0.1, 0.2, 0.14]).unwrap()
    }

    #[test]
    fn deterministic_given_seed() {
        let d = data5();
        let a = fit_bayes(&d, &PriorSpec::default(), &McmcConfig::default(), 42).unwrap();
        let b = fit_bayes(&d, &PriorSpec::default(), &McmcConfig::default(), 42).unwrap();
        assert_eq!(a.mu, b.mu);
        assert_eq!(a.sigma, b.sigma);
        let c = fit_bayes(&d, &PriorSpec::default(), &McmcConfig::default(), 43).unwrap();
        assert_ne!(a.mu, c.mu);
    }

    #[test]
    fn converges_on_moderate_data() {
        let d = data5();
        let draws = fit_bayes(&d, &PriorSpec::default(), &McmcConfig::default(), 1).unwrap();
        assert!(draws.converged(), "{:?}", draws.warning);
        assert_eq!(draws.len(), 4 * 2500);
        assert!(draws.sigma.iter().all(|s| *s >= 0.0));
        assert!(draws.rhat_mu.is_finite() && draws.rhat_sigma.is_finite());
        for a in &draws.acceptance {
            assert!(a[0] > 0.2 && a[0] < 0.7, "{a:?}");
        }
    }

    #[test]
    fn symmetric_data_centers_mu_at_zero() {
        let d = ReferenceSet::from_slices(&[-0.4, 0.4], &[0.2, 0.2]).unwrap();
        let draws = fit_bayes(&d, &PriorSpec::default(), &McmcConfig::default(), 3).unwrap();
        let m = mean(&draws.mu);
        assert!(m.abs() < 3.0 * draws.mu_mcse(), "mean {m}, mcse {}", draws.mu_mcse());
    }

    #[test]
    fn single_study_is_allowed() {
        let d = ReferenceSet::from_slices(&[-0.2], &[0.1]).unwrap();
        let draws = fit_bayes(&d, &PriorSpec::default(), &McmcConfig::default(), 3).unwrap();
        assert_eq!(draws.len(), 10_000);
    }

    #[test]
    fn gamma_prior_pulls_sigma_toward_zero() {
        let d = data5();
        let cfg = McmcConfig::default();
        let hc = fit_bayes(&d, &PriorSpec::with_sigma(SigmaPrior::half_cauchy_default()), &cfg, 9).unwrap();
        let ga = fit_bayes(&d, &PriorSpec::with_sigma(SigmaPrior::gamma_default()), &cfg, 9).unwrap();
        assert!(median(&ga.sigma) <= median(&hc.sigma));
    }

    #[test]
    fn invalid_inputs_rejected() {
        let d = data5();
        let bad_cfg = McmcConfig {
            chains: 1,
            ..McmcConfig::default()
        };
        assert!(fit_bayes(&d, &PriorSpec::default(), &bad_cfg, 1).is_err());
        let bad_prior = PriorSpec {
            mu: MuPrior { mean: 0.0, variance: -1.0 },
            sigma: SigmaPrior::half_cauchy_default(),
        };
        assert!(fit_bayes(&d, &bad_prior, &McmcConfig::default(), 1).is_err());
    }

    #[test]
    fn from_draws_validates() {
        assert!(PosteriorDraws::from_draws(vec![], vec![], 1).is_err());
        assert!(PosteriorDraws::from_draws(vec![0.0], vec![-1.0], 1).is_err());
        let p = PosteriorDraws::from_draws(vec![0.0; 40], vec![0.0; 40], 2).unwrap();
        assert_eq!(p.n_kept, 20);
    }
}
