//! Adjusted treatment effect for a new single-arm study.
//!
//! The treatment-vs-internal-control log hazard ratio of the new study is
//! obtained draw by draw as
//! `trt_ic = trt_ec - ic_ec`, where `trt_ec` comes from the new study's own
//! external-control analysis and `ic_ec` is predicted from the meta-analysis
//! of reference studies.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::meta::{MlFit, PosteriorDraws};
use crate::stats::{quantiles, total_cmp_sort};

/// Default variance of the normal prior on the new study's TRT-vs-EC log HR.
pub const DEFAULT_PRIOR_VARIANCE: f64 = 100.0;

/// The new study's treatment-vs-external-control estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewStudyEstimate {
    pub loghr_trt_ec: f64,
    pub variance: f64,
}

impl NewStudyEstimate {
    pub fn new(loghr_trt_ec: f64, variance: f64) -> Result<Self> {
        if !loghr_trt_ec.is_finite() {
            return Err(domain("new-study log HR must be finite"));
        }
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(domain(format!("new-study variance must be positive, got {variance}")));
        }
        Ok(Self {
            loghr_trt_ec,
            variance,
        })
    }

    pub fn from_se(loghr_trt_ec: f64, se: f64) -> Result<Self> {
        Self::new(loghr_trt_ec, se * se)
    }

    /// Conjugate normal posterior `(mean, variance)` under a `N(0, prior_variance)` prior.
    pub fn posterior_moments(&self, prior_variance: f64) -> (f64, f64) {
        let shrink = prior_variance / (prior_variance + self.variance);
        (self.loghr_trt_ec * shrink, self.variance * shrink)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Bayes,
    Ml,
}

/// Draws of the adjusted log HR together with the component draws that
/// produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedPrediction {
    /// Adjusted treatment-vs-internal-control draws.
    pub draws: Vec<f64>,
    pub trt_ec: Vec<f64>,
    pub ic_ec: Vec<f64>,
    pub backend: Backend,
    pub n_reference: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionSummary {
    pub alpha: f64,
    pub median: f64,
    pub cri_lower: f64,
    pub cri_upper: f64,
    pub prob_negative: f64,
    /// Upper credible limit below zero.
    pub significant_one_sided: bool,
}

fn check_prior_variance(prior_variance: f64) -> Result<()> {
    if !(prior_variance > 0.0) || !prior_variance.is_finite() {
        return Err(domain(format!("prior variance must be positive, got {prior_variance}")));
    }
    Ok(())
}

/// Sample the conjugate normal posterior of the new study's TRT-vs-EC log HR.
pub fn draw_trt_ec_posterior<R: Rng + ?Sized>(
    new_study: &NewStudyEstimate,
    prior_variance: f64,
    n_draws: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_prior_variance(prior_variance)?;
    if n_draws == 0 {
        return Err(domain("n_draws must be at least 1"));
    }
    let (m, v) = new_study.posterior_moments(prior_variance);
    let sd = v.sqrt();
    Ok((0..n_draws)
        .map(|_| m + sd * rng.sample::<f64, _>(StandardNormal))
        .collect())
}

/// Bayesian adjustment: one output draw per meta-analytic posterior draw.
pub fn predict_bayes<R: Rng + ?Sized>(
    new_study: &NewStudyEstimate,
    meta: &PosteriorDraws,
    prior_variance: f64,
    n_reference: usize,
    rng: &mut R,
) -> Result<AdjustedPrediction> {
    check_prior_variance(prior_variance)?;
    if meta.is_empty() {
        return Err(domain("meta-analytic posterior has no draws"));
    }
    let (m, v) = new_study.posterior_moments(prior_variance);
    let sd = v.sqrt();
    let n = meta.len();
    let mut trt_ec = Vec::with_capacity(n);
    let mut ic_ec = Vec::with_capacity(n);
    let mut draws = Vec::with_capacity(n);
    for (&mu, &sigma) in meta.mu.iter().zip(&meta.sigma) {
        let a = m + sd * rng.sample::<f64, _>(StandardNormal);
        let b = mu + sigma * rng.sample::<f64, _>(StandardNormal);
        trt_ec.push(a);
        ic_ec.push(b);
        draws.push(a - b);
    }
    Ok(AdjustedPrediction {
        draws,
        trt_ec,
        ic_ec,
        backend: Backend::Bayes,
        n_reference,
    })
}

/// Maximum-likelihood adjustment with a Student-t predictive for the new
/// study's IC-vs-EC log HR: location `mu_hat`, scale
/// `sigma_hat * sqrt(1 + 1/n)`, `n - 1` degrees of freedom.
pub fn predict_ml<R: Rng + ?Sized>(
    new_study: &NewStudyEstimate,
    fit: &MlFit,
    n_draws: usize,
    rng: &mut R,
) -> Result<AdjustedPrediction> {
    if fit.n < 2 {
        return Err(domain(format!("t predictive needs at least 2 reference studies, got {}", fit.n)));
    }
    if n_draws == 0 {
        return Err(domain("n_draws must be at least 1"));
    }
    let n = fit.n as f64;
    let scale = fit.sigma_hat * (1.0 + 1.0 / n).sqrt();
    let t = StudentT::new(n - 1.0).map_err(|e| domain(e.to_string()))?;
    let sd = new_study.variance.sqrt();

    let trt_ec: Vec<f64> = (0..n_draws)
        .map(|_| new_study.loghr_trt_ec + sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let ic_ec: Vec<f64> = (0..n_draws)
        .map(|_| fit.mu_hat + scale * t.sample(rng))
        .collect();
    let draws = trt_ec.iter().zip(&ic_ec).map(|(a, b)| a - b).collect();
    Ok(AdjustedPrediction {
        draws,
        trt_ec,
        ic_ec,
        backend: Backend::Ml,
        n_reference: fit.n,
    })
}

/// Median, central `1 - alpha` interval, and one-sided decision for a set of draws.
pub fn summarize_draws(draws: &[f64], alpha: f64) -> Result<PredictionSummary> {
    if draws.is_empty() {
        return Err(domain("cannot summarize zero draws"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut sorted = draws.to_vec();
    total_cmp_sort(&mut sorted);
    let q = quantiles(&sorted, &[0.5, alpha / 2.0, 1.0 - alpha / 2.0]);
    let negatives = sorted.partition_point(|x| *x < 0.0);
    Ok(PredictionSummary {
        alpha,
        median: q[0],
        cri_lower: q[1],
        cri_upper: q[2],
        prob_negative: negatives as f64 / sorted.len() as f64,
        significant_one_sided: q[2] < 0.0,
    })
}

pub fn summarize(pred: &AdjustedPrediction, alpha: f64) -> Result<PredictionSummary> {
    summarize_draws(&pred.draws, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::stats::{mean, median, variance};

    fn degenerate_meta(mu: f64, sigma: f64, n: usize) -> PosteriorDraws {
        PosteriorDraws::from_draws(vec![mu; n], vec![sigma; n], 1).unwrap()
    }

    #[test]
    fn conjugate_moments_by_hand() {
        let ns = NewStudyEstimate::new(0.7f64.ln(), 0.04).unwrap();
        let (m, v) = ns.posterior_moments(100.0);
        assert!((m - (-0.356_532)).abs() < 1e-6, "{m}");
        assert!((v - 0.039_984).abs() < 1e-6, "{v}");

        let draws = draw_trt_ec_posterior(&ns, 100.0, 100_000, &mut stream(1)).unwrap();
        assert!((mean(&draws) - m).abs() < 4.0 * (v / 1e5).sqrt());
    }

    #[test]
    fn vanishing_variance_collapses_draws() {
        let ns = NewStudyEstimate::new(-0.3, 1e-12).unwrap();
        let draws = draw_trt_ec_posterior(&ns, 100.0, 1000, &mut stream(2)).unwrap();
        assert!(draws.iter().all(|d| (d + 0.3).abs() < 1e-5));
    }

    #[test]
    fn zero_estimate_is_symmetric() {
        let ns = NewStudyEstimate::new(0.0, 0.1).unwrap();
        let draws = draw_trt_ec_posterior(&ns, 100.0, 100_000, &mut stream(3)).unwrap();
        let s = summarize_draws(&draws, 0.05).unwrap();
        assert!((s.prob_negative - 0.5).abs() < 0.01);
        assert!(s.median.abs() < 0.01);
    }

    #[test]
    fn input_validation() {
        assert!(NewStudyEstimate::new(0.0, 0.0).is_err());
        assert!(NewStudyEstimate::new(f64::NAN, 1.0).is_err());
        let ns = NewStudyEstimate::new(0.0, 0.1).unwrap();
        assert!(draw_trt_ec_posterior(&ns, 100.0, 0, &mut stream(1)).is_err());
        assert!(draw_trt_ec_posterior(&ns, 0.0, 10, &mut stream(1)).is_err());
    }

    #[test]
    fn zero_bias_meta_passes_through() {
        let ns = NewStudyEstimate::new(-0.357, 0.04).unwrap();
        let meta = degenerate_meta(0.0, 0.0, 20_000);
        let pred = predict_bayes(&ns, &meta, 100.0, 5, &mut stream(4)).unwrap();
        let direct = draw_trt_ec_posterior(&ns, 100.0, 20_000, &mut stream(5)).unwrap();
        let se = 1.2533 * 0.2 / (20_000f64).sqrt();
        assert!((median(&pred.draws) - median(&direct)).abs() < 3.0 * se * 2f64.sqrt());
    }

    #[test]
    fn fixed_bias_shifts_deterministically() {
        let ns = NewStudyEstimate::new(-0.4, 1e-12).unwrap();
        let meta = degenerate_meta(-0.25, 0.0, 1000);
        let pred = predict_bayes(&ns, &meta, 100.0, 5, &mut stream(6)).unwrap();
        // prior shrinkage of order 1e-14 only
        assert!(pred.draws.iter().all(|d| (d - (-0.4 + 0.25)).abs() < 1e-5));
    }

    #[test]
    fn between_study_variance_adds() {
        let ns = NewStudyEstimate::new(0.1, 0.05).unwrap();
        let s = 0.3;
        let meta = degenerate_meta(0.0, s, 100_000);
        let pred = predict_bayes(&ns, &meta, 100.0, 5, &mut stream(7)).unwrap();
        let expected = ns.posterior_moments(100.0).1 + s * s;
        let v = variance(&pred.draws);
        assert!((v / expected - 1.0).abs() < 0.1, "{v} vs {expected}");
    }

    #[test]
    fn ml_degenerate_scales() {
        let ns = NewStudyEstimate::new(-0.5, 1e-12).unwrap();
        let fit = MlFit {
            mu_hat: 0.1,
            sigma_hat: 0.0,
            n: 5,
            loglik: 0.0,
        };
        let pred = predict_ml(&ns, &fit, 1000, &mut stream(8)).unwrap();
        assert!(pred.draws.iter().all(|d| (d + 0.6).abs() < 1e-5));
    }

    #[test]
    fn ml_needs_two_studies() {
        let ns = NewStudyEstimate::new(-0.5, 0.1).unwrap();
        let fit = MlFit {
            mu_hat: 0.1,
            sigma_hat: 0.1,
            n: 1,
            loglik: 0.0,
        };
        assert!(predict_ml(&ns, &fit, 10, &mut stream(8)).is_err());
    }

    #[test]
    fn summarize_hand_countable() {
        let s = summarize_draws(&[-1.0, 0.0, 1.0], 0.5).unwrap();
        assert_eq!((s.median, s.cri_lower, s.cri_upper), (0.0, -0.5, 0.5));
        assert!((s.prob_negative - 1.0 / 3.0).abs() < 1e-15);
        assert!(!s.significant_one_sided);

        let s = summarize_draws(&[-0.2; 7], 0.05).unwrap();
        assert_eq!((s.median, s.cri_lower, s.cri_upper), (-0.2, -0.2, -0.2));
        assert!(s.significant_one_sided);
        assert!(summarize_draws(&[], 0.05).is_err());
        assert!(summarize_draws(&[1.0], 1.0).is_err());
    }
}
