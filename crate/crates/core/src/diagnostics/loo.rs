use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{domain, Result};
use crate::meta::{LogHREstimate, ReferenceSet};
use crate::pipeline::{adjust_new_study, Method};
use crate::prediction::{summarize, NewStudyEstimate, DEFAULT_PRIOR_VARIANCE};
use crate::rng::derive_seed;
use crate::stats::{std_dev, total_cmp_sort};

/// Prediction of one held-out reference study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooRecord {
    pub held_out_label: String,
    /// Trial-based TRT-vs-IC log HR of the held-out study.
    pub observed: f64,
    /// Posterior median of the adjusted TRT-vs-IC log HR.
    pub predicted_adjusted: f64,
    /// The held-out study's TRT-vs-EC estimate.
    pub predicted_unadjusted: f64,
    /// Standard deviation of the adjusted draws.
    pub sd_adjusted: f64,
    pub residual_adjusted: f64,
    pub residual_unadjusted: f64,
    pub warning: Option<String>,
}

/// Sorted standardized residuals against normal plotting-position quantiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QQData {
    pub sample: Vec<f64>,
    pub theoretical: Vec<f64>,
}

/// Stable, platform-independent hash of a study label (FNV-1a).
fn label_key(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn aligned<'a>(set: &'a ReferenceSet, label: &str, name: &str) -> Result<&'a LogHREstimate> {
    set.get(label)
        .ok_or_else(|| domain(format!("study {label:?} missing from {name} set")))
}

/// Leave-one-out cross-validation over reference studies.
///
/// For each study the meta-analysis is refit on the remaining `ic_ec`
/// entries, the study's `trt_ec` entry is adjusted, and the result is
/// compared against its `trt_ic` entry. Sets are aligned by label; records
/// follow the order of `ic_ec`. Each fold's stream is keyed by the held-out
/// label, so reordering the input only reorders the output.
pub fn loo_cross_validate(
    ic_ec: &ReferenceSet,
    trt_ec: &ReferenceSet,
    trt_ic: &ReferenceSet,
    method: &Method,
    seed: u64,
) -> Result<Vec<LooRecord>> {
    let n = ic_ec.len();
    if n < 3 {
        return Err(domain(format!("leave-one-out needs at least 3 studies, got {n}")));
    }
    if trt_ec.len() != n || trt_ic.len() != n {
        return Err(domain("ic_ec, trt_ec and trt_ic sets differ in length"));
    }
    for label in ic_ec.labels() {
        aligned(trt_ec, label, "trt_ec")?;
        aligned(trt_ic, label, "trt_ic")?;
    }

    let mut training_order: Vec<&LogHREstimate> = ic_ec.studies().iter().collect();
    training_order.sort_by(|a, b| a.label.cmp(&b.label));

    ic_ec
        .studies()
        .par_iter()
        .map(|held| {
            let label = held.label.as_str();
            let training = ReferenceSet::new(
                training_order
                    .iter()
                    .filter(|s| s.label != label)
                    .map(|s| (*s).clone())
                    .collect(),
            )?;
            let ec = aligned(trt_ec, label, "trt_ec")?;
            let ic = aligned(trt_ic, label, "trt_ic")?;
            let new_study = NewStudyEstimate::from_se(ec.estimate, ec.se)?;
            let fold_seed = derive_seed(seed, label_key(label));
            let adj = adjust_new_study(&training, &new_study, method, DEFAULT_PRIOR_VARIANCE, fold_seed)?;
            let summary = summarize(&adj.prediction, 0.05)?;
            let sd = std_dev(&adj.prediction.draws);
            Ok(LooRecord {
                held_out_label: label.to_string(),
                observed: ic.estimate,
                predicted_adjusted: summary.median,
                predicted_unadjusted: ec.estimate,
                sd_adjusted: sd,
                residual_adjusted: (ic.estimate - summary.median) / sd,
                residual_unadjusted: (ic.estimate - ec.estimate) / sd,
                warning: adj.warning,
            })
        })
        .collect()
}

/// QQ data with plotting positions `(i - 0.5) / n`.
pub fn qq_data(residuals: &[f64]) -> Result<QQData> {
    let n = residuals.len();
    if n < 2 {
        return Err(domain(format!("QQ data needs at least 2 residuals, got {n}")));
    }
    if residuals.iter().any(|r| !r.is_finite()) {
        return Err(domain("residuals must be finite"));
    }
    let mut sample = residuals.to_vec();
    total_cmp_sort(&mut sample);
    let normal = Normal::standard();
    let theoretical = (1..=n)
        .map(|i| normal.inverse_cdf((i as f64 - 0.5) / n as f64))
        .collect();
    Ok(QQData {
        sample,
        theoretical,
    })
}
