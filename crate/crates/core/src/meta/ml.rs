use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{loglik_unchecked, ReferenceSet};
use crate::error::{domain, Error, Result};

/// Smallest sigma explored; optima below it are reported as exactly zero.
const SIGMA_FLOOR: f64 = 1e-10;
const SCAN_POINTS: usize = 400;
const BISECT_ITERS: usize = 200;

/// Maximum-likelihood estimate of the meta-analytic parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlFit {
    pub mu_hat: f64,
    /// Between-study SD; zero when the maximum sits on the boundary.
    pub sigma_hat: f64,
    /// Number of reference studies.
    pub n: usize,
    pub loglik: f64,
}

impl MlFit {
    /// Standard error of `mu_hat` from the observed information at `sigma_hat`.
    pub fn mu_se(&self, data: &ReferenceSet) -> f64 {
        let s2 = self.sigma_hat * self.sigma_hat;
        let info: f64 = data.studies().iter().map(|s| 1.0 / (s2 + s.variance())).sum();
        info.sqrt().recip()
    }

    /// Wald interval for mu at level `1 - alpha`.
    pub fn mu_interval(&self, data: &ReferenceSet, alpha: f64) -> Result<(f64, f64)> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(domain(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let half = Normal::standard().inverse_cdf(1.0 - alpha / 2.0) * self.mu_se(data);
        Ok((self.mu_hat - half, self.mu_hat + half))
    }
}

/// Profile log-likelihood with mu at its closed-form maximizer.
fn profile(data: &ReferenceSet, sigma2: f64) -> (f64, f64) {
    let mu = data.weighted_mean(sigma2.sqrt());
    (loglik_unchecked(mu, sigma2, data), mu)
}

/// Derivative of the profile log-likelihood with respect to sigma^2.
///
/// The mu-derivative vanishes at the profiled mu, so only the explicit
/// sigma^2 dependence contributes.
fn profile_score(data: &ReferenceSet, sigma2: f64) -> f64 {
    let mu = data.weighted_mean(sigma2.sqrt());
    0.5 * data
        .studies()
        .iter()
        .map(|s| {
            let w = 1.0 / (sigma2 + s.variance());
            let r = s.estimate - mu;
            w * w * r * r - w
        })
        .sum::<f64>()
}

fn sigma_upper_bound(data: &ReferenceSet) -> f64 {
    let (lo, hi) = data
        .studies()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s.estimate), hi.max(s.estimate))
        });
    let max_se = data.studies().iter().map(|s| s.se).fold(0.0, f64::max);
    10.0 * (hi - lo + max_se) + 1.0
}

/// Maximum-likelihood fit of `(mu, sigma)` over `R x [0, inf)`.
///
/// Works in `(mu, log sigma)`: mu is profiled out exactly, the profile is
/// scanned on a log-sigma grid and the maximizing bracket is refined by
/// bisection on the profile score. Boundary maxima are reported as
/// `sigma_hat = 0`.
pub fn fit_ml(data: &ReferenceSet) -> Result<MlFit> {
    let n = data.len();
    if n < 2 {
        return Err(domain(format!("maximum likelihood needs at least 2 studies, got {n}")));
    }

    let lo = SIGMA_FLOOR.ln();
    let hi = sigma_upper_bound(data).ln();
    let grid: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (SCAN_POINTS - 1) as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&t| profile(data, (2.0 * t).exp()).0).collect();
    let best = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty grid");

    let (ll0, mu0) = profile(data, 0.0);
    let boundary = MlFit {
        mu_hat: mu0,
        sigma_hat: 0.0,
        n,
        loglik: ll0,
    };

    if best == SCAN_POINTS - 1 {
        let sigma = grid[best].exp();
        return Err(Error::NonConvergence {
            iterations: SCAN_POINTS,
            mu: data.weighted_mean(sigma),
            sigma,
        });
    }
    let score0 = profile_score(data, 0.0);
    // Near sigma = 0 the profile is flat to rounding, so a boundary optimum
    // can lose the scan by an ulp.
    let noise = 1e-12 * ll0.abs().max(1.0);
    if score0 <= 0.0 && (best == 0 || ll0 >= values[best] - noise) {
        return Ok(boundary);
    }

    // The profile increases to the left of its maximum and decreases to the
    // right, so the score changes sign inside the bracket.
    let left = if best == 0 { 0.0 } else { (2.0 * grid[best - 1]).exp() };
    let right = (2.0 * grid[best + 1]).exp();
    let (mut a, mut b) = (left, right);
    if !(profile_score(data, a) > 0.0 && profile_score(data, b) < 0.0) {
        let sigma = grid[best].exp();
        return Err(Error::NonConvergence {
            iterations: 0,
            mu: data.weighted_mean(sigma),
            sigma,
        });
    }
    for _ in 0..BISECT_ITERS {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if profile_score(data, m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let sigma2 = 0.5 * (a + b);
    let (ll, mu) = profile(data, sigma2);
    let sigma = sigma2.sqrt();
    if ll0 > ll || sigma < SIGMA_FLOOR {
        return Ok(boundary);
    }
    Ok(MlFit {
        mu_hat: mu,
        sigma_hat: sigma,
        n,
        loglik: ll,
    })
}

/// Profile-likelihood interval for sigma at level `1 - alpha`.
///
/// Contains every sigma whose profile deviance from the maximum is below the
/// chi-square(1) critical value; the lower limit is 0 when the boundary is
/// inside that region.
pub fn profile_sigma_interval(data: &ReferenceSet, fit: &MlFit, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let z = Normal::standard().inverse_cdf(1.0 - alpha / 2.0);
    let cutoff = fit.loglik - 0.5 * z * z;
    let inside = |sigma: f64| profile(data, sigma * sigma).0 >= cutoff;

    let bisect = |mut inner: f64, mut outer: f64| {
        for _ in 0..BISECT_ITERS {
            let m = 0.5 * (inner + outer);
            if m == inner || m == outer {
                break;
            }
            if inside(m) {
                inner = m;
            } else {
                outer = m;
            }
        }
        0.5 * (inner + outer)
    };

    let lower = if inside(0.0) { 0.0 } else { bisect(fit.sigma_hat, 0.0) };
    let mut outer = fit.sigma_hat.max(1e-3) * 2.0;
    let mut guard = 0;
    while inside(outer) {
        outer *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(domain("profile likelihood for sigma does not decay"));
        }
    }
    let upper = bisect(fit.sigma_hat, outer);
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn needs_two_studies() {
        let d = ReferenceSet::from_slices(&[0.1], &[0.2]).unwrap();
        assert!(fit_ml(&d).is_err());
    }

    #[test]
    fn tiny_se_gives_population_sd() {
        let d = ReferenceSet::from_slices(&[0.0, 1.0], &[1e-6, 1e-6]).unwrap();
        let fit = fit_ml(&d).unwrap();
        assert!((fit.mu_hat - 0.5).abs() < 1e-6);
        assert!((fit.sigma_hat - 0.5).abs() < 1e-6);
    }

    #[test]
    fn zero_spread_hits_boundary() {
        let d = ReferenceSet::from_slices(&[0.2, 0.2, 0.2], &[0.3, 0.3, 0.3]).unwrap();
        let fit = fit_ml(&d).unwrap();
        assert_eq!(fit.sigma_hat, 0.0);
        assert!((fit.mu_hat - 0.2).abs() < 1e-12);
    }

    #[test]
    fn wald_interval_for_mu() {
        // Boundary fit: se = 0.1 / sqrt(2), half-width 1.959964 * se.
        let d = ReferenceSet::from_slices(&[-0.3, -0.2], &[0.1, 0.1]).unwrap();
        let (lo, hi) = fit_ml(&d).unwrap().mu_interval(&d, 0.05).unwrap();
        assert!((hi - lo - 2.0 * 1.959963984540054 * 0.1 / 2f64.sqrt()).abs() < 1e-12);
        assert!((0.5 * (lo + hi) + 0.25).abs() < 1e-12);
    }

    #[test]
    fn flat_profile_near_zero_is_boundary() {
        let d = ReferenceSet::from_slices(&[-0.3, -0.2], &[0.1, 0.1]).unwrap();
        let fit = fit_ml(&d).unwrap();
        assert_eq!(fit.sigma_hat, 0.0);
        assert!((fit.mu_hat + 0.25).abs() < 1e-12);
    }

    #[test]
    fn location_equivariance() {
        let d = ReferenceSet::from_slices(&[-0.3, -0.1, 0.0, 0.1, 0.2, 0.4], &[0.1; 6]).unwrap();
        let a = fit_ml(&d).unwrap();
        let b = fit_ml(&d.shifted(1.7)).unwrap();
        assert!((b.mu_hat - a.mu_hat - 1.7).abs() < 1e-9);
        assert!((b.sigma_hat - a.sigma_hat).abs() < 1e-9);
    }

    #[test]
    fn profile_interval_brackets_estimate() {
        let d = ReferenceSet::from_slices(&[-0.6, -0.1, 0.0, 0.3, 0.5], &[0.1; 5]).unwrap();
        let fit = fit_ml(&d).unwrap();
        let (lo, hi) = profile_sigma_interval(&d, &fit, 0.05).unwrap();
        assert!(lo < fit.sigma_hat && fit.sigma_hat < hi, "{lo} {} {hi}", fit.sigma_hat);
        let target = fit.loglik - 0.5 * 1.959_963_984_540_054f64.powi(2);
        assert!((profile(&d, hi * hi).0 - target).abs() < 1e-8);
    }
}
