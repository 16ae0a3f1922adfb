//! Split-R-hat and effective sample size for multi-chain MCMC output.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::stats::{mean, variance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDiagnostics {
    /// Split potential scale reduction. `+inf` when chains are individually
    /// constant but disagree, NaN when every draw is identical.
    pub rhat: f64,
    /// Effective sample size summed over chains; NaN for constant input.
    pub ess: f64,
}

impl ConvergenceDiagnostics {
    pub fn is_converged(&self, threshold: f64) -> bool {
        self.rhat.is_finite() && self.rhat <= threshold
    }
}

/// Split-R-hat and autocorrelation-based ESS (Geyer initial monotone
/// sequence on the multi-chain autocorrelation estimate).
///
/// Requires at least two chains of equal length with ten or more draws.
pub fn rhat_ess<C: AsRef<[f64]>>(chains: &[C]) -> Result<ConvergenceDiagnostics> {
    if chains.len() < 2 {
        return Err(domain(format!("need at least 2 chains, got {}", chains.len())));
    }
    let len = chains[0].as_ref().len();
    if len < 10 {
        return Err(domain(format!("need at least 10 draws per chain, got {len}")));
    }
    if chains.iter().any(|c| c.as_ref().len() != len) {
        return Err(domain("chains differ in length"));
    }
    if chains.iter().flat_map(|c| c.as_ref()).any(|x| !x.is_finite()) {
        return Err(domain("chains contain non-finite draws"));
    }

    // Split every chain in half, dropping the middle draw of odd lengths.
    let half = len / 2;
    let split: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| {
            let c = c.as_ref();
            [&c[..half], &c[len - half..]]
        })
        .collect();

    let m = split.len() as f64;
    let n = half as f64;
    let means: Vec<f64> = split.iter().map(|c| mean(c)).collect();
    let vars: Vec<f64> = split.iter().map(|c| variance(c)).collect();
    let w = mean(&vars);
    let b_over_n = variance(&means);
    let var_plus = (n - 1.0) / n * w + b_over_n;

    if w == 0.0 {
        let rhat = if b_over_n == 0.0 { f64::NAN } else { f64::INFINITY };
        return Ok(ConvergenceDiagnostics { rhat, ess: f64::NAN });
    }
    let rhat = (var_plus / w).sqrt();

    // Biased per-chain autocovariance at lag t.
    let autocov = |t: usize| -> f64 {
        let acc: f64 = split
            .iter()
            .zip(&means)
            .map(|(c, &mu)| {
                c[..half - t]
                    .iter()
                    .zip(&c[t..])
                    .map(|(a, b)| (a - mu) * (b - mu))
                    .sum::<f64>()
                    / n
            })
            .sum();
        acc / m
    };
    let rho = |t: usize| 1.0 - (w - autocov(t)) / var_plus;

    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < half {
        let pair = rho(t) + rho(t + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        t += 2;
    }
    let ess = m * n / tau;
    Ok(ConvergenceDiagnostics { rhat, ess })
}
