//! Study-parameter generators for the six built-in simulation scenarios and
//! user-defined variants.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Lognormal generator with median `median` and log-scale SD `cv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalSpec {
    pub median: f64,
    pub cv: f64,
}

impl LognormalSpec {
    pub const fn new(median: f64, cv: f64) -> Self {
        Self { median, cv }
    }

    pub const fn fixed(median: f64) -> Self {
        Self { median, cv: 0.0 }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.median > 0.0) || !self.median.is_finite() {
            return Err(domain(format!("{what}: median must be positive, got {}", self.median)));
        }
        if !(self.cv >= 0.0) || !self.cv.is_finite() {
            return Err(domain(format!("{what}: cv must be non-negative, got {}", self.cv)));
        }
        Ok(())
    }
}

/// `exp(N(ln median, cv^2))`; exactly `median` when `cv == 0`.
pub fn draw_lognormal<R: Rng + ?Sized>(spec: &LognormalSpec, rng: &mut R) -> f64 {
    if spec.cv == 0.0 {
        return spec.median;
    }
    let z: f64 = rng.sample(StandardNormal);
    (spec.median.ln() + spec.cv * z).exp()
}

/// Lognormal event count rounded half-to-even and clamped at 2.
pub fn draw_event_count<R: Rng + ?Sized>(spec: &LognormalSpec, rng: &mut R) -> usize {
    let x = draw_lognormal(spec, rng).round_ties_even();
    if x < 2.0 {
        2
    } else {
        x as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmTriple<T> {
    pub trt: T,
    pub ic: T,
    pub ec: T,
}

/// Generators for one simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: String,
    pub survival: ArmTriple<LognormalSpec>,
    pub events: ArmTriple<LognormalSpec>,
    /// Fixed TRT-vs-IC hazard ratio; the TRT median is then `ic / fixed_hr`.
    #[serde(default)]
    pub fixed_hr: Option<f64>,
    /// One event-count draw shared by both randomized arms.
    #[serde(default)]
    pub shared_rct_events: bool,
}

/// Parameters of one simulated study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyParams {
    pub median_trt: f64,
    pub median_ic: f64,
    pub median_ec: f64,
    pub n_trt: usize,
    pub n_ic: usize,
    pub n_ec: usize,
    pub true_loghr_trt_ic: f64,
}

impl StudyParams {
    /// True IC-vs-EC log HR of exponential arms.
    pub fn true_loghr_ic_ec(&self) -> f64 {
        (self.median_ec / self.median_ic).ln()
    }

    pub fn true_loghr_trt_ec(&self) -> f64 {
        (self.median_ec / self.median_trt).ln()
    }
}

pub const BUILTIN_IDS: [&str; 6] = ["S1", "S2", "S3", "S4", "S5", "S6"];

impl ScenarioSpec {
    /// Built-in scenario by id (`S1` to `S6`, case-insensitive).
    pub fn builtin(id: &str) -> Option<Self> {
        let ln = LognormalSpec::new;
        let fixed = LognormalSpec::fixed;
        let triple = |trt, ic, ec| ArmTriple { trt, ic, ec };
        let spec = match id.to_ascii_uppercase().as_str() {
            "S1" => Self {
                id: "S1".into(),
                survival: triple(fixed(24.0), fixed(15.0), fixed(12.0)),
                events: triple(fixed(100.0), fixed(70.0), fixed(50.0)),
                fixed_hr: None,
                shared_rct_events: false,
            },
            "S2" => Self {
                id: "S2".into(),
                survival: triple(fixed(24.0), fixed(24.0), fixed(18.0)),
                events: triple(ln(250.0, 0.2), ln(250.0, 0.2), ln(250.0, 0.2)),
                fixed_hr: None,
                shared_rct_events: false,
            },
            "S3" => Self {
                id: "S3".into(),
                survival: triple(ln(24.0, 0.4), ln(24.0, 0.2), ln(18.0, 0.2)),
                events: triple(ln(250.0, 0.2), ln(250.0, 0.2), ln(250.0, 0.2)),
                fixed_hr: None,
                shared_rct_events: false,
            },
            "S4" => Self {
                id: "S4".into(),
                survival: triple(ln(24.0, 0.2), ln(24.0, 0.2), ln(18.0, 0.2)),
                events: triple(ln(150.0, 0.2), ln(150.0, 0.2), ln(250.0, 0.2)),
                fixed_hr: Some(1.0),
                shared_rct_events: true,
            },
            "S5" => Self {
                id: "S5".into(),
                survival: triple(ln(48.0, 0.2), ln(24.0, 0.2), ln(18.0, 0.2)),
                events: triple(ln(150.0, 0.2), ln(150.0, 0.2), ln(250.0, 0.2)),
                fixed_hr: Some(0.5),
                shared_rct_events: true,
            },
            "S6" => Self {
                id: "S6".into(),
                survival: triple(ln(35.0, 0.4), ln(24.0, 0.2), ln(18.0, 0.2)),
                events: triple(ln(250.0, 0.2), ln(250.0, 0.2), ln(250.0, 0.2)),
                fixed_hr: None,
                shared_rct_events: true,
            },
            _ => return None,
        };
        Some(spec)
    }

    pub fn all_builtin() -> Vec<Self> {
        BUILTIN_IDS
            .iter()
            .map(|id| Self::builtin(id).expect("built-in id"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.survival.trt.validate("TRT survival")?;
        self.survival.ic.validate("IC survival")?;
        self.survival.ec.validate("EC survival")?;
        self.events.trt.validate("TRT events")?;
        self.events.ic.validate("IC events")?;
        self.events.ec.validate("EC events")?;
        if let Some(hr) = self.fixed_hr {
            if !(hr > 0.0) || !hr.is_finite() {
                return Err(domain(format!("fixed hazard ratio must be positive, got {hr}")));
            }
        }
        if self.shared_rct_events && self.events.trt != self.events.ic {
            return Err(domain("shared randomized event counts need identical TRT and IC event specs"));
        }
        Ok(())
    }
}

/// Draw one study's medians and event counts.
///
/// Draw order is fixed (IC median, TRT median unless tied to IC, EC median,
/// then RCT and EC event counts) so a given stream always yields the same
/// study.
pub fn generate_study<R: Rng + ?Sized>(scenario: &ScenarioSpec, rng: &mut R) -> StudyParams {
    let median_ic = draw_lognormal(&scenario.survival.ic, rng);
    let median_trt = match scenario.fixed_hr {
        Some(hr) => median_ic / hr,
        None => draw_lognormal(&scenario.survival.trt, rng),
    };
    let median_ec = draw_lognormal(&scenario.survival.ec, rng);

    let (n_trt, n_ic) = if scenario.shared_rct_events {
        let n = draw_event_count(&scenario.events.ic, rng);
        (n, n)
    } else {
        let n_trt = draw_event_count(&scenario.events.trt, rng);
        let n_ic = draw_event_count(&scenario.events.ic, rng);
        (n_trt, n_ic)
    };
    let n_ec = draw_event_count(&scenario.events.ec, rng);

    let true_loghr_trt_ic = match scenario.fixed_hr {
        Some(hr) => hr.ln(),
        None => (median_ic / median_trt).ln(),
    };
    StudyParams {
        median_trt,
        median_ic,
        median_ec,
        n_trt,
        n_ic,
        n_ec,
        true_loghr_trt_ic,
    }
}
