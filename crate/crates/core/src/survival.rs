//! Exponential survival data and two-arm Cox proportional-hazards fits.
//!
//! Samples carry no censoring indicator: every observation is an event, so
//! the sample size of an arm equals its event count.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

const COX_MAX_ITER: usize = 50;
const COX_SCORE_TOL: f64 = 1e-8;

/// Exponential rate whose median equals `median`.
pub fn rate_from_median(median: f64) -> Result<f64> {
    if !(median > 0.0) || !median.is_finite() {
        return Err(domain(format!("median survival must be positive, got {median}")));
    }
    Ok(std::f64::consts::LN_2 / median)
}

/// One simulated arm: median survival time and number of events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmSpec {
    pub median_survival: f64,
    pub n_events: usize,
}

impl ArmSpec {
    pub fn new(median_survival: f64, n_events: usize) -> Result<Self> {
        rate_from_median(median_survival)?;
        if n_events < 2 {
            return Err(domain(format!("an arm needs at least 2 events, got {n_events}")));
        }
        Ok(Self {
            median_survival,
            n_events,
        })
    }
}

/// Draw `n_events` i.i.d. exponential event times for an arm.
pub fn simulate_arm<R: Rng + ?Sized>(spec: &ArmSpec, rng: &mut R) -> Vec<f64> {
    let rate = rate_from_median(spec.median_survival).expect("ArmSpec validated at construction");
    let exp = Exp::new(rate).expect("positive rate");
    (0..spec.n_events).map(|_| exp.sample(rng)).collect()
}

/// Event times with a binary arm label (0 = comparator, 1 = index arm).
#[derive(Debug, Clone, PartialEq)]
pub struct TwoArmSample {
    times: Vec<f64>,
    group: Vec<u8>,
}

impl TwoArmSample {
    pub fn new(times: Vec<f64>, group: Vec<u8>) -> Result<Self> {
        if times.len() != group.len() {
            return Err(domain(format!(
                "times ({}) and group ({}) lengths differ",
                times.len(),
                group.len()
            )));
        }
        if let Some(t) = times.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
            return Err(domain(format!("event times must be positive and finite, got {t}")));
        }
        if group.iter().any(|&g| g > 1) {
            return Err(domain("group labels must be 0 or 1"));
        }
        let n1 = group.iter().filter(|&&g| g == 1).count();
        if n1 == 0 || n1 == group.len() {
            return Err(domain("both groups need at least one observation"));
        }
        Ok(Self { times, group })
    }

    /// Stack an index arm and a comparator arm.
    pub fn from_arms(index: &[f64], comparator: &[f64]) -> Result<Self> {
        let mut times = Vec::with_capacity(index.len() + comparator.len());
        times.extend_from_slice(comparator);
        times.extend_from_slice(index);
        let mut group = vec![0u8; comparator.len()];
        group.resize(comparator.len() + index.len(), 1);
        Self::new(times, group)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn group(&self) -> &[u8] {
        &self.group
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// The same sample with the arm labels swapped.
    pub fn swapped(&self) -> Self {
        Self {
            times: self.times.clone(),
            group: self.group.iter().map(|g| 1 - g).collect(),
        }
    }
}

/// Result of a two-arm Cox fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    /// Log hazard ratio of the index arm versus the comparator.
    pub loghr: f64,
    /// Inverse-information standard error at the maximum.
    pub se: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Distinct event time with at-risk and event counts per arm.
#[derive(Debug, Clone, Copy)]
struct RiskStep {
    at_risk: [f64; 2],
    events: [f64; 2],
}

/// Collapse a sample into risk-set counts at each distinct event time.
fn risk_steps(sample: &TwoArmSample) -> Vec<RiskStep> {
    let mut order: Vec<usize> = (0..sample.len()).collect();
    order.sort_by(|&a, &b| sample.times[a].total_cmp(&sample.times[b]));

    let mut remaining = [0.0f64; 2];
    for &g in &sample.group {
        remaining[g as usize] += 1.0;
    }

    let mut steps = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let t = sample.times[order[i]];
        let mut events = [0.0f64; 2];
        let mut j = i;
        while j < order.len() && sample.times[order[j]] == t {
            events[sample.group[order[j]] as usize] += 1.0;
            j += 1;
        }
        steps.push(RiskStep {
            at_risk: remaining,
            events,
        });
        remaining[0] -= events[0];
        remaining[1] -= events[1];
        i = j;
    }
    steps
}

/// Breslow log partial likelihood, score and information at `beta`.
fn breslow_terms(steps: &[RiskStep], beta: f64) -> (f64, f64, f64) {
    let e = beta.exp();
    let (mut ll, mut score, mut info) = (0.0, 0.0, 0.0);
    for s in steps {
        let d = s.events[0] + s.events[1];
        let denom = s.at_risk[0] + s.at_risk[1] * e;
        let p1 = s.at_risk[1] * e / denom;
        ll += beta * s.events[1] - d * denom.ln();
        score += s.events[1] - d * p1;
        info += d * p1 * (1.0 - p1);
    }
    (ll, score, info)
}

/// Direction in which the partial likelihood increases without bound, if any.
///
/// Returns +1 when every event occurring while index-arm subjects are at risk
/// is an index-arm event, -1 for the mirrored comparator condition.
fn separation(steps: &[RiskStep]) -> Option<f64> {
    let up = steps
        .iter()
        .all(|s| s.at_risk[1] == 0.0 || s.events[0] == 0.0);
    let down = steps
        .iter()
        .all(|s| s.at_risk[0] == 0.0 || s.events[1] == 0.0);
    match (up, down) {
        (true, false) => Some(1.0),
        (false, true) => Some(-1.0),
        _ => None,
    }
}

/// Fit a Cox model with a single binary arm covariate.
///
/// Newton-Raphson with step halving on the Breslow partial likelihood.
/// Completely separated samples are reported with `converged == false` and
/// an infinite log hazard ratio instead of an arbitrary large iterate.
pub fn fit_cox_two_arm(sample: &TwoArmSample) -> CoxFit {
    let steps = risk_steps(sample);

    if let Some(dir) = separation(&steps) {
        return CoxFit {
            loghr: dir * f64::INFINITY,
            se: f64::INFINITY,
            converged: false,
            iterations: 0,
        };
    }

    let mut beta = 0.0;
    let (mut ll, mut score, mut info) = breslow_terms(&steps, beta);
    for iter in 0..COX_MAX_ITER {
        if score.abs() < COX_SCORE_TOL {
            return CoxFit {
                loghr: beta,
                se: info.sqrt().recip(),
                converged: info > 0.0,
                iterations: iter,
            };
        }
        let mut step = score / info;
        let mut halvings = 0;
        loop {
            let candidate = beta + step;
            let next = breslow_terms(&steps, candidate);
            // tolerate rounding noise in the partial likelihood near the optimum
            if next.0 >= ll - 1e-12 * ll.abs().max(1.0) || halvings >= 30 {
                beta = candidate;
                (ll, score, info) = next;
                break;
            }
            step *= 0.5;
            halvings += 1;
        }
    }

    let converged = score.abs() < COX_SCORE_TOL && info > 0.0;
    CoxFit {
        loghr: beta,
        se: info.sqrt().recip(),
        converged,
        iterations: COX_MAX_ITER,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn tiny() -> TwoArmSample {
        TwoArmSample::new(vec![1.0, 2.0, 1.5, 3.0], vec![0, 0, 1, 1]).unwrap()
    }

    #[test]
    fn rate_from_median_values() {
        assert!((rate_from_median(24.0).unwrap() - 0.028881132523331).abs() < 1e-12);
        assert!((rate_from_median(std::f64::consts::LN_2).unwrap() - 1.0).abs() < 1e-15);
        assert!(rate_from_median(0.0).is_err());
        assert!(rate_from_median(-3.0).is_err());
    }

    #[test]
    fn arm_spec_rejects_single_event() {
        assert!(ArmSpec::new(12.0, 1).is_err());
        assert!(ArmSpec::new(12.0, 2).is_ok());
    }

    #[test]
    fn simulate_arm_median_and_mean() {
        let mut rng = stream(11);
        let draws = simulate_arm(&ArmSpec::new(24.0, 100_000).unwrap(), &mut rng);
        let med = crate::stats::median(&draws);
        assert!((med - 24.0).abs() < 0.3, "median {med}");

        let draws = simulate_arm(&ArmSpec::new(1.0, 100_000).unwrap(), &mut rng);
        let m = crate::stats::mean(&draws);
        assert!((m - 1.0 / std::f64::consts::LN_2).abs() < 0.02, "mean {m}");
    }

    #[test]
    fn simulate_arm_is_deterministic() {
        let spec = ArmSpec::new(10.0, 50).unwrap();
        assert_eq!(
            simulate_arm(&spec, &mut stream(3)),
            simulate_arm(&spec, &mut stream(3))
        );
    }

    #[test]
    fn sample_validation() {
        assert!(TwoArmSample::new(vec![1.0, 2.0], vec![0]).is_err());
        assert!(TwoArmSample::new(vec![1.0, 2.0], vec![0, 0]).is_err());
        assert!(TwoArmSample::new(vec![1.0, 0.0], vec![0, 1]).is_err());
        assert!(TwoArmSample::new(vec![1.0, 2.0], vec![0, 2]).is_err());
    }

    #[test]
    fn tiny_example_matches_frozen_oracle() {
        // Reference maximizer from an independent dense grid + Brent search.
        let fit = fit_cox_two_arm(&tiny());
        assert!(fit.converged);
        assert!((fit.loghr - (-0.940_613_648_976_410_5)).abs() < 1e-6, "{}", fit.loghr);
        assert!((fit.se - 1.240_258).abs() < 1e-4, "{}", fit.se);
    }

    #[test]
    fn swapped_labels_negate_loghr() {
        let s = tiny();
        let a = fit_cox_two_arm(&s);
        let b = fit_cox_two_arm(&s.swapped());
        assert!((a.loghr + b.loghr).abs() < 1e-9);
        assert!((a.se - b.se).abs() < 1e-9);
    }

    #[test]
    fn separation_is_flagged() {
        let s = TwoArmSample::new(vec![1.0, 2.0, 3.0, 4.0], vec![1, 1, 0, 0]).unwrap();
        let fit = fit_cox_two_arm(&s);
        assert!(!fit.converged);
        assert_eq!(fit.loghr, f64::INFINITY);
        let fit = fit_cox_two_arm(&s.swapped());
        assert!(!fit.converged);
        assert_eq!(fit.loghr, f64::NEG_INFINITY);
    }

    #[test]
    fn ties_do_not_crash() {
        let s = TwoArmSample::new(vec![1.0, 1.0, 2.0, 2.0, 3.0, 1.0], vec![0, 1, 0, 1, 0, 1]).unwrap();
        let fit = fit_cox_two_arm(&s);
        assert!(fit.converged);
        assert!(fit.loghr.is_finite() && fit.se > 0.0);
    }

    #[test]
    fn large_sample_recovers_median_ratio() {
        let mut rng = stream(2024);
        let arm24 = simulate_arm(&ArmSpec::new(24.0, 5000).unwrap(), &mut rng);
        let arm15 = simulate_arm(&ArmSpec::new(15.0, 5000).unwrap(), &mut rng);
        // HR of the 24-month arm against the 15-month arm is 15/24.
        let fit = fit_cox_two_arm(&TwoArmSample::from_arms(&arm24, &arm15).unwrap());
        assert!((fit.loghr - (15.0f64 / 24.0).ln()).abs() < 0.06, "{}", fit.loghr);
    }
}
