//! Normal-normal meta-analysis of internal-versus-external-control log hazard
//! ratios across reference studies.
//!
//! Each reference study contributes an estimate `y_j` with standard error
//! `s_j`. Marginally `y_j ~ N(mu, sigma^2 + s_j^2)`, where `mu` is the mean
//! bias of the external controls and `sigma` the between-study standard
//! deviation of that bias.

mod bayes;
mod ml;
mod prior;

pub use bayes::{fit_bayes, McmcConfig, PosteriorDraws, RHAT_THRESHOLD};
pub use ml::{fit_ml, profile_sigma_interval, MlFit};
pub use prior::{MuPrior, PriorSpec, SigmaPrior};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// One study's estimated log hazard ratio and its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHREstimate {
    pub label: String,
    pub estimate: f64,
    pub se: f64,
}

impl LogHREstimate {
    pub fn new(label: impl Into<String>, estimate: f64, se: f64) -> Result<Self> {
        let label = label.into();
        if !estimate.is_finite() {
            return Err(domain(format!("study {label}: estimate must be finite")));
        }
        if !(se > 0.0) || !se.is_finite() {
            return Err(domain(format!("study {label}: standard error must be positive, got {se}")));
        }
        Ok(Self { label, estimate, se })
    }

    pub fn variance(&self) -> f64 {
        self.se * self.se
    }
}

/// Ordered set of reference studies with unique labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    studies: Vec<LogHREstimate>,
}

impl ReferenceSet {
    pub fn new(studies: Vec<LogHREstimate>) -> Result<Self> {
        if studies.is_empty() {
            return Err(domain("reference set is empty"));
        }
        let mut seen = HashSet::new();
        for s in &studies {
            if !seen.insert(s.label.as_str()) {
                return Err(domain(format!("duplicate study label {:?}", s.label)));
            }
        }
        Ok(Self { studies })
    }

    /// Build from parallel slices, labelling studies `S1`, `S2`, ...
    pub fn from_slices(estimates: &[f64], ses: &[f64]) -> Result<Self> {
        if estimates.len() != ses.len() {
            return Err(domain("estimates and standard errors differ in length"));
        }
        let studies = estimates
            .iter()
            .zip(ses)
            .enumerate()
            .map(|(i, (&y, &s))| LogHREstimate::new(format!("S{}", i + 1), y, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(studies)
    }

    pub fn studies(&self) -> &[LogHREstimate] {
        &self.studies
    }

    pub fn len(&self) -> usize {
        self.studies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.studies.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<&LogHREstimate> {
        self.studies.iter().find(|s| s.label == label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.studies.iter().map(|s| s.label.as_str())
    }

    /// Copy of the set without the listed labels. Fails if nothing remains.
    pub fn excluding<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        let kept = self
            .studies
            .iter()
            .filter(|s| !labels.iter().any(|l| l.as_ref() == s.label))
            .cloned()
            .collect();
        Self::new(kept)
    }

    /// Copy with every estimate shifted by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            studies: self
                .studies
                .iter()
                .map(|s| LogHREstimate {
                    estimate: s.estimate + c,
                    ..s.clone()
                })
                .collect(),
        }
    }

    /// Precision-weighted mean with weights `1 / (sigma^2 + s_j^2)`.
    ///
    /// This is the exact maximizer of the marginal likelihood in `mu` for a
    /// fixed `sigma`.
    pub fn weighted_mean(&self, sigma: f64) -> f64 {
        let s2 = sigma * sigma;
        let (num, den) = self.studies.iter().fold((0.0, 0.0), |(n, d), st| {
            let w = 1.0 / (s2 + st.variance());
            (n + w * st.estimate, d + w)
        });
        num / den
    }
}

/// Marginal log-likelihood of `(mu, sigma)`: the proper Gaussian log-density
/// of the estimates under `y_j ~ N(mu, sigma^2 + s_j^2)`.
pub fn marginal_loglik(mu: f64, sigma: f64, data: &ReferenceSet) -> Result<f64> {
    if !(sigma >= 0.0) {
        return Err(domain(format!("sigma must be non-negative, got {sigma}")));
    }
    if data.is_empty() {
        return Err(domain("reference set is empty"));
    }
    Ok(loglik_unchecked(mu, sigma * sigma, data))
}

pub(crate) fn loglik_unchecked(mu: f64, sigma2: f64, data: &ReferenceSet) -> f64 {
    data.studies
        .iter()
        .map(|s| {
            let v = sigma2 + s.variance();
            let r = s.estimate - mu;
            -0.5 * (LN_2PI + v.ln()) - 0.5 * r * r / v
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loglik_single_study_unit_variance() {
        let d = ReferenceSet::from_slices(&[0.3], &[1.0]).unwrap();
        let v = marginal_loglik(0.3, 0.0, &d).unwrap();
        assert!((v - (-0.918_938_533_204_672_7)).abs() < 1e-12);
    }

    #[test]
    fn loglik_two_studies_by_hand() {
        let d = ReferenceSet::from_slices(&[0.0, 1.0], &[1.0, 1.0]).unwrap();
        let v = marginal_loglik(0.5, 0.0, &d).unwrap();
        assert!((v - (-2.0 * 0.918_938_533_204_672_7 - 0.25)).abs() < 1e-12);
        assert!((v - (-2.08788)).abs() < 1e-5);
    }

    #[test]
    fn negative_sigma_rejected() {
        let d = ReferenceSet::from_slices(&[0.0], &[1.0]).unwrap();
        assert!(marginal_loglik(0.0, -0.1, &d).is_err());
    }

    #[test]
    fn reference_set_validation() {
        assert!(ReferenceSet::new(vec![]).is_err());
        let a = LogHREstimate::new("A", 0.1, 0.2).unwrap();
        assert!(ReferenceSet::new(vec![a.clone(), a]).is_err());
        assert!(LogHREstimate::new("B", 0.1, 0.0).is_err());
        assert!(LogHREstimate::new("B", f64::NAN, 0.1).is_err());
    }

    #[test]
    fn weighted_mean_maximizes_in_mu() {
        let d = ReferenceSet::from_slices(&[-0.3, 0.1, 0.5, 0.2], &[0.2, 0.3, 0.25, 0.4]).unwrap();
        for &sigma in &[0.0, 0.1, 0.7] {
            let m = d.weighted_mean(sigma);
            // closed-form root of the score in mu
            let score: f64 = d
                .studies()
                .iter()
                .map(|s| (s.estimate - m) / (sigma * sigma + s.variance()))
                .sum();
            assert!(score.abs() < 1e-8);
            let at = marginal_loglik(m, sigma, &d).unwrap();
            for dm in [-0.5, -0.1, -1e-3, 1e-3, 0.1, 0.5] {
                assert!(marginal_loglik(m + dm, sigma, &d).unwrap() < at);
            }
        }
    }

    #[test]
    fn exclusion_drops_labels() {
        let d = ReferenceSet::from_slices(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]).unwrap();
        let e = d.excluding(&["S2"]).unwrap();
        assert_eq!(e.labels().collect::<Vec<_>>(), vec!["S1", "S3"]);
        assert!(d.excluding(&["S1", "S2", "S3"]).is_err());
    }
}
