use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{generate_study, ScenarioSpec, StudyParams};
use crate::error::{domain, Result};
use crate::meta::{LogHREstimate, ReferenceSet};
use crate::pipeline::{adjust_new_study, Method};
use crate::prediction::{summarize, NewStudyEstimate, DEFAULT_PRIOR_VARIANCE};
use crate::rng::{derive_seed, substream};
use crate::stats::{mean, median};
use crate::survival::{fit_cox_two_arm, simulate_arm, ArmSpec, CoxFit, TwoArmSample};

pub const DEFAULT_TOTAL_STUDIES: usize = 3_500;
pub const MIN_REFERENCE: usize = 4;
pub const MAX_REFERENCE: usize = 9;

const DATA_TAG: u64 = 0x0053_5455_4459;
const FIT_TAG: u64 = 0x0046_4954;

/// The three pairwise Cox fits of one simulated study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyEstimates {
    pub trt_ic: CoxFit,
    pub trt_ec: CoxFit,
    pub ic_ec: CoxFit,
}

impl StudyEstimates {
    pub fn converged(&self) -> bool {
        self.trt_ic.converged && self.trt_ec.converged && self.ic_ec.converged
    }
}

/// Simulate the three arms of a study once and fit all three pairwise Cox
/// models on the shared samples.
pub fn simulate_study<R: rand::Rng + ?Sized>(params: &StudyParams, rng: &mut R) -> Result<StudyEstimates> {
    let trt = simulate_arm(&ArmSpec::new(params.median_trt, params.n_trt)?, rng);
    let ic = simulate_arm(&ArmSpec::new(params.median_ic, params.n_ic)?, rng);
    let ec = simulate_arm(&ArmSpec::new(params.median_ec, params.n_ec)?, rng);
    Ok(StudyEstimates {
        trt_ic: fit_cox_two_arm(&TwoArmSample::from_arms(&trt, &ic)?),
        trt_ec: fit_cox_two_arm(&TwoArmSample::from_arms(&trt, &ec)?),
        ic_ec: fit_cox_two_arm(&TwoArmSample::from_arms(&ic, &ec)?),
    })
}

/// Settings of a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_reference: usize,
    pub total_studies: usize,
    pub method: Method,
    pub alpha: f64,
    pub prior_variance: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(n_reference: usize, total_studies: usize, method: Method, seed: u64) -> Self {
        Self {
            n_reference,
            total_studies,
            method,
            alpha: 0.05,
            prior_variance: DEFAULT_PRIOR_VARIANCE,
            seed,
        }
    }

    /// Configuration with exactly `replications` replications.
    pub fn with_replications(n_reference: usize, replications: usize, method: Method, seed: u64) -> Self {
        Self::new(n_reference, replications * (n_reference + 1), method, seed)
    }

    pub fn n_replications(&self) -> usize {
        self.total_studies / (self.n_reference + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_REFERENCE..=MAX_REFERENCE).contains(&self.n_reference) {
            return Err(domain(format!(
                "n_reference must lie in [{MIN_REFERENCE}, {MAX_REFERENCE}], got {}",
                self.n_reference
            )));
        }
        if self.total_studies < self.n_reference + 1 {
            return Err(domain(format!(
                "total_studies ({}) must be at least n_reference + 1 ({})",
                self.total_studies,
                self.n_reference + 1
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicationStatus {
    Ok,
    SkippedCox,
    SkippedMcmc,
    SkippedFit,
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub status: ReplicationStatus,
    pub true_loghr: f64,
    pub loghr_trt_ec: f64,
    pub se_trt_ec: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    pub bias: f64,
    pub covered: bool,
    pub rejected: bool,
    pub message: Option<String>,
}

impl ReplicationRecord {
    pub fn is_ok(&self) -> bool {
        self.status == ReplicationStatus::Ok
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    fn skipped(replication: usize, status: ReplicationStatus, true_loghr: f64, message: String) -> Self {
        Self {
            replication,
            status,
            true_loghr,
            loghr_trt_ec: f64::NAN,
            se_trt_ec: f64::NAN,
            median: f64::NAN,
            lower: f64::NAN,
            upper: f64::NAN,
            bias: f64::NAN,
            covered: false,
            rejected: false,
            message: Some(message),
        }
    }
}

/// Aggregate bias, coverage and rejection rate of a scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingCharacteristics {
    pub scenario: String,
    pub n_reference: usize,
    pub method: String,
    pub n_replications: usize,
    pub n_completed: usize,
    pub n_skipped: usize,
    pub bias_samples: Vec<f64>,
    pub median_bias: f64,
    pub mean_bias: f64,
    pub coverage_rate: f64,
    pub rejection_rate: f64,
    pub median_interval_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutcome {
    pub characteristics: OperatingCharacteristics,
    pub replications: Vec<ReplicationRecord>,
}

/// Generate and fit study `index` of the run's study pool.
///
/// Studies are keyed by their pool index only, so every method and every
/// reference-set size sees the same simulated data for a given seed.
fn pool_study(scenario: &ScenarioSpec, seed: u64, index: usize) -> Result<(StudyParams, StudyEstimates)> {
    let mut rng = substream(derive_seed(seed, DATA_TAG), index as u64);
    let params = generate_study(scenario, &mut rng);
    let est = simulate_study(&params, &mut rng)?;
    Ok((params, est))
}

fn run_replication(scenario: &ScenarioSpec, config: &SimConfig, rep: usize) -> Result<ReplicationRecord> {
    let n = config.n_reference;
    let first = rep * (n + 1);
    let studies = (first..first + n + 1)
        .map(|i| pool_study(scenario, config.seed, i))
        .collect::<Result<Vec<_>>>()?;
    let (new_params, new_est) = studies[n];
    let truth = new_params.true_loghr_trt_ic;

    if let Some(i) = studies.iter().position(|(_, e)| !e.converged()) {
        return Ok(ReplicationRecord::skipped(
            rep,
            ReplicationStatus::SkippedCox,
            truth,
            format!("Cox fit did not converge for study {}", first + i),
        ));
    }

    let refs = ReferenceSet::new(
        studies[..n]
            .iter()
            .enumerate()
            .map(|(i, (_, e))| LogHREstimate::new(format!("study{}", first + i), e.ic_ec.loghr, e.ic_ec.se))
            .collect::<Result<Vec<_>>>()?,
    )?;
    let new_study = NewStudyEstimate::from_se(new_est.trt_ec.loghr, new_est.trt_ec.se)?;

    let fit_seed = derive_seed(derive_seed(config.seed, FIT_TAG), rep as u64);
    let adj = match adjust_new_study(&refs, &new_study, &config.method, config.prior_variance, fit_seed) {
        Ok(a) => a,
        Err(e) => {
            return Ok(ReplicationRecord::skipped(rep, ReplicationStatus::SkippedFit, truth, e.to_string()));
        }
    };
    if let Some(w) = adj.warning {
        return Ok(ReplicationRecord::skipped(rep, ReplicationStatus::SkippedMcmc, truth, w));
    }
    let s = summarize(&adj.prediction, config.alpha)?;
    Ok(ReplicationRecord {
        replication: rep,
        status: ReplicationStatus::Ok,
        true_loghr: truth,
        loghr_trt_ec: new_study.loghr_trt_ec,
        se_trt_ec: new_est.trt_ec.se,
        median: s.median,
        lower: s.cri_lower,
        upper: s.cri_upper,
        bias: s.median - truth,
        covered: s.cri_lower <= truth && truth <= s.cri_upper,
        rejected: s.significant_one_sided,
        message: None,
    })
}

fn aggregate(scenario: &ScenarioSpec, config: &SimConfig, records: &[ReplicationRecord]) -> OperatingCharacteristics {
    let ok: Vec<&ReplicationRecord> = records.iter().filter(|r| r.is_ok()).collect();
    let n_completed = ok.len();
    let bias_samples: Vec<f64> = ok.iter().map(|r| r.bias).collect();
    let widths: Vec<f64> = ok.iter().map(|r| r.width()).collect();
    let rate = |count: usize| {
        if n_completed == 0 {
            f64::NAN
        } else {
            count as f64 / n_completed as f64
        }
    };
    let (summ_median, summ_mean, summ_width) = if n_completed == 0 {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (median(&bias_samples), mean(&bias_samples), median(&widths))
    };
    OperatingCharacteristics {
        scenario: scenario.id.clone(),
        n_reference: config.n_reference,
        method: config.method.describe(),
        n_replications: records.len(),
        n_completed,
        n_skipped: records.len() - n_completed,
        median_bias: summ_median,
        mean_bias: summ_mean,
        coverage_rate: rate(ok.iter().filter(|r| r.covered).count()),
        rejection_rate: rate(ok.iter().filter(|r| r.rejected).count()),
        median_interval_width: summ_width,
        bias_samples,
    }
}

/// Run `floor(total_studies / (n_reference + 1))` replications of a scenario.
///
/// Each replication uses `n_reference` consecutive pool studies as the
/// reference set and the next one as the new single-arm study. Replications
/// run in parallel on independent substreams; failed ones are counted in
/// `n_skipped` and excluded from the rates.
pub fn run_scenario(scenario: &ScenarioSpec, config: &SimConfig) -> Result<SimulationOutcome> {
    scenario.validate()?;
    config.validate()?;
    let replications = (0..config.n_replications())
        .into_par_iter()
        .map(|rep| run_replication(scenario, config, rep))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationOutcome {
        characteristics: aggregate(scenario, config, &replications),
        replications,
    })
}

/// Run several estimation methods on identical simulated data.
pub fn compare_methods(
    scenario: &ScenarioSpec,
    base: &SimConfig,
    methods: &[Method],
) -> Result<Vec<SimulationOutcome>> {
    methods
        .iter()
        .map(|m| run_scenario(scenario, &SimConfig { method: *m, ..*base }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn null_study_estimates_near_zero() {
        let params = StudyParams {
            median_trt: 20.0,
            median_ic: 20.0,
            median_ec: 20.0,
            n_trt: 3000,
            n_ic: 3000,
            n_ec: 3000,
            true_loghr_trt_ic: 0.0,
        };
        let est = simulate_study(&params, &mut stream(10)).unwrap();
        for f in [est.trt_ic, est.trt_ec, est.ic_ec] {
            assert!(f.converged && f.loghr.abs() < 3.0 * f.se, "{f:?}");
        }
    }

    #[test]
    fn three_estimates_approximately_consistent() {
        let params = StudyParams {
            median_trt: 24.0,
            median_ic: 15.0,
            median_ec: 12.0,
            n_trt: 1000,
            n_ic: 1000,
            n_ec: 1000,
            true_loghr_trt_ic: (15.0f64 / 24.0).ln(),
        };
        let mut rng = stream(11);
        let gaps: Vec<f64> = (0..50)
            .map(|_| {
                let e = simulate_study(&params, &mut rng).unwrap();
                (e.trt_ic.loghr - (e.trt_ec.loghr - e.ic_ec.loghr)).abs()
            })
            .collect();
        assert!(mean(&gaps) < 0.05, "{}", mean(&gaps));
    }

    #[test]
    fn study_simulation_reproducible() {
        let s = ScenarioSpec::builtin("S3").unwrap();
        let a = pool_study(&s, 5, 17).unwrap();
        let b = pool_study(&s, 5, 17).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replication_accounting() {
        let s = ScenarioSpec::builtin("S1").unwrap();
        let cfg = SimConfig::new(6, 75, Method::ml(), 3);
        let out = run_scenario(&s, &cfg).unwrap();
        assert_eq!(out.characteristics.n_replications, 10);
        assert_eq!(out.replications.len(), 10);
        assert!(out.characteristics.n_replications * 7 <= 75);
        let c = &out.characteristics;
        assert!((0.0..=1.0).contains(&c.coverage_rate));
        assert!((0.0..=1.0).contains(&c.rejection_rate));
        assert_eq!(c.n_completed + c.n_skipped, c.n_replications);
    }

    #[test]
    fn config_validation() {
        let s = ScenarioSpec::builtin("S1").unwrap();
        assert!(run_scenario(&s, &SimConfig::new(3, 100, Method::ml(), 1)).is_err());
        assert!(run_scenario(&s, &SimConfig::new(10, 100, Method::ml(), 1)).is_err());
        assert!(run_scenario(&s, &SimConfig::new(6, 6, Method::ml(), 1)).is_err());
    }
}
