//! Adjustment of single-arm external-control treatment effects using a
//! meta-analysis of historical reference studies.
//!
//! Reference studies pair a trial's internal control arm with an external
//! control arm built from real-world data. Their internal-vs-external log
//! hazard ratios feed a normal-normal meta-analysis ([`meta`]) estimating the
//! mean bias `mu` and between-study SD `sigma` of external controls. The
//! treatment-vs-external-control estimate of a new single-arm study is then
//! corrected for that bias and variability ([`prediction`]).
//!
//! [`sim`] reproduces simulation studies of bias, coverage and power with
//! exponential survival data and Cox fits ([`survival`]); [`diagnostics`]
//! provides leave-one-out model checking and MCMC convergence summaries.
//!
//! ```
//! use extcontrol::meta::{fit_ml, ReferenceSet};
//! use extcontrol::prediction::{predict_ml, summarize, NewStudyEstimate};
//! use extcontrol::rng::stream;
//!
//! let refs = ReferenceSet::from_slices(&[-0.3, -0.1, -0.25, 0.05], &[0.15, 0.2, 0.12, 0.18])?;
//! let fit = fit_ml(&refs)?;
//! let new_study = NewStudyEstimate::from_se(0.7f64.ln(), 0.2)?;
//! let pred = predict_ml(&new_study, &fit, 10_000, &mut stream(1))?;
//! let summary = summarize(&pred, 0.05)?;
//! assert!(summary.median > 0.7f64.ln());
//! # Ok::<(), extcontrol::Error>(())
//! ```

// Negated comparisons are used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod meta;
pub mod pipeline;
pub mod prediction;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod survival;

pub use error::{Error, Result};
