use anyhow::{Context, Result};
use extcontrol::diagnostics::{loo_cross_validate, qq_data};
use extcontrol::meta::{fit_bayes, fit_ml, profile_sigma_interval, ReferenceSet};
use extcontrol::pipeline::{adjust_new_study, Method};
use extcontrol::prediction::{predict_bayes, summarize, Backend, NewStudyEstimate, PredictionSummary};
use extcontrol::rng::{derive_seed, stream};
use extcontrol::sim::{run_scenario, SimConfig};
use extcontrol::stats::DrawSummary;
use serde::Serialize;

use crate::config::{MetaSource, RunConfig, Task};
use crate::input::{read_meta_draws, read_references};
use crate::output::{announce, OutputDir};

fn warn(context: &str, warning: &Option<String>) {
    if let Some(w) = warning {
        eprintln!("warning: {context}: {w}");
    }
}

#[derive(Serialize)]
struct Interval {
    lower: f64,
    upper: f64,
}

#[derive(Serialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
enum MetaResult {
    Ml {
        n_studies: usize,
        labels: Vec<String>,
        mu_hat: f64,
        mu_se: f64,
        mu_interval: Interval,
        sigma_hat: f64,
        sigma_interval: Interval,
        loglik: f64,
    },
    Bayes {
        n_studies: usize,
        labels: Vec<String>,
        alpha: f64,
        mu: DrawSummary,
        sigma: DrawSummary,
        diagnostics: BayesDiagnostics,
    },
}

#[derive(Serialize)]
struct BayesDiagnostics {
    chains: usize,
    warmup: usize,
    draws_per_chain: usize,
    rhat_mu: f64,
    rhat_sigma: f64,
    ess_mu: f64,
    ess_sigma: f64,
    acceptance_mu: Vec<f64>,
    acceptance_log_sigma: Vec<f64>,
    converged: bool,
    warning: Option<String>,
}

#[derive(Serialize)]
struct DrawRow {
    chain: usize,
    draw: usize,
    mu: f64,
    sigma: f64,
}

fn labels(refs: &ReferenceSet) -> Vec<String> {
    refs.labels().map(str::to_string).collect()
}

fn run_meta(cfg: &RunConfig, out: &OutputDir, refs: &ReferenceSet) -> Result<()> {
    match &cfg.method {
        Method::Ml { .. } => {
            let fit = fit_ml(refs).context("maximum-likelihood fit")?;
            let (ml, mu_hi) = fit.mu_interval(refs, cfg.alpha)?;
            let (sl, sh) = profile_sigma_interval(refs, &fit, cfg.alpha)?;
            let result = MetaResult::Ml {
                n_studies: refs.len(),
                labels: labels(refs),
                mu_hat: fit.mu_hat,
                mu_se: fit.mu_se(refs),
                mu_interval: Interval { lower: ml, upper: mu_hi },
                sigma_hat: fit.sigma_hat,
                sigma_interval: Interval { lower: sl, upper: sh },
                loglik: fit.loglik,
            };
            announce(&out.write_json("meta_summary.json", &result)?);
        }
        Method::Bayes { priors, mcmc } => {
            let post = fit_bayes(refs, priors, mcmc, cfg.seed).context("Bayesian fit")?;
            warn("meta", &post.warning);
            let result = MetaResult::Bayes {
                n_studies: refs.len(),
                labels: labels(refs),
                alpha: cfg.alpha,
                mu: post.mu_summary(cfg.alpha),
                sigma: post.sigma_summary(cfg.alpha),
                diagnostics: BayesDiagnostics {
                    chains: post.n_chains,
                    warmup: post.n_warmup,
                    draws_per_chain: post.n_kept,
                    rhat_mu: post.rhat_mu,
                    rhat_sigma: post.rhat_sigma,
                    ess_mu: post.ess_mu,
                    ess_sigma: post.ess_sigma,
                    acceptance_mu: post.acceptance.iter().map(|a| a[0]).collect(),
                    acceptance_log_sigma: post.acceptance.iter().map(|a| a[1]).collect(),
                    converged: post.converged(),
                    warning: post.warning.clone(),
                },
            };
            announce(&out.write_json("meta_summary.json", &result)?);
            let rows = post.mu.iter().zip(&post.sigma).enumerate().map(|(i, (&mu, &sigma))| DrawRow {
                chain: i / post.n_kept,
                draw: i % post.n_kept,
                mu,
                sigma,
            });
            announce(&out.write_csv("meta_draws.csv", rows)?);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct NewStudy {
    loghr_trt_ec: f64,
    se_trt_ec: f64,
}

#[derive(Serialize)]
struct PredictResult {
    backend: Backend,
    /// Unknown when adjusting from a stored posterior.
    n_reference: Option<usize>,
    n_draws: usize,
    new_study: NewStudy,
    summary: PredictionSummary,
    warning: Option<String>,
}

#[derive(Serialize)]
struct PredictionRow {
    draw: usize,
    trt_ec: f64,
    ic_ec: f64,
    trt_ic: f64,
}

fn run_predict(cfg: &RunConfig, out: &OutputDir, source: &MetaSource, loghr: f64, se: f64) -> Result<()> {
    let new_study = NewStudyEstimate::from_se(loghr, se).context("new study estimate")?;
    let (pred, n_reference, warning) = match source {
        MetaSource::References(path) => {
            let refs = read_references(path, &cfg.exclude)?;
            let adj = adjust_new_study(&refs, &new_study, &cfg.method, cfg.prior_variance, cfg.seed)?;
            (adj.prediction, Some(refs.len()), adj.warning)
        }
        MetaSource::Draws(path) => {
            let post = read_meta_draws(path)?;
            let mut rng = stream(derive_seed(cfg.seed, 1));
            let pred = predict_bayes(&new_study, &post, cfg.prior_variance, 0, &mut rng)?;
            (pred, None, None)
        }
    };
    warn("predict", &warning);
    let result = PredictResult {
        backend: pred.backend,
        n_reference,
        n_draws: pred.draws.len(),
        new_study: NewStudy {
            loghr_trt_ec: loghr,
            se_trt_ec: se,
        },
        summary: summarize(&pred, cfg.alpha)?,
        warning,
    };
    let rows = (0..pred.draws.len()).map(|i| PredictionRow {
        draw: i,
        trt_ec: pred.trt_ec[i],
        ic_ec: pred.ic_ec[i],
        trt_ic: pred.draws[i],
    });
    announce(&out.write_csv("prediction_draws.csv", rows)?);
    announce(&out.write_json("prediction_summary.json", &result)?);
    Ok(())
}

fn run_simulate(cfg: &RunConfig, out: &OutputDir, task: &Task) -> Result<()> {
    let Task::Simulate { scenario, n_reference, total_studies } = task else {
        unreachable!()
    };
    let sim = SimConfig {
        n_reference: *n_reference,
        total_studies: *total_studies,
        method: cfg.method,
        alpha: cfg.alpha,
        prior_variance: cfg.prior_variance,
        seed: cfg.seed,
    };
    let outcome = run_scenario(scenario, &sim).with_context(|| format!("simulating scenario {}", scenario.id))?;
    let c = &outcome.characteristics;
    if c.n_skipped > 0 {
        eprintln!("note: {} of {} replications skipped", c.n_skipped, c.n_replications);
    }
    announce(&out.write_json("simulation_summary.json", c)?);
    announce(&out.write_csv("simulation_replications.csv", &outcome.replications)?);
    Ok(())
}

#[derive(Serialize)]
struct QQRow {
    residual: &'static str,
    index: usize,
    sample: f64,
    theoretical: f64,
}

fn run_loo(cfg: &RunConfig, out: &OutputDir, task: &Task) -> Result<()> {
    let Task::Loo { ic_ec, trt_ec, trt_ic } = task else {
        unreachable!()
    };
    let ic_ec = read_references(ic_ec, &cfg.exclude)?;
    let trt_ec = read_references(trt_ec, &cfg.exclude)?;
    let trt_ic = read_references(trt_ic, &cfg.exclude)?;
    let records = loo_cross_validate(&ic_ec, &trt_ec, &trt_ic, &cfg.method, cfg.seed).context("leave-one-out")?;
    for r in &records {
        warn(&format!("loo fold {}", r.held_out_label), &r.warning);
    }

    let adjusted: Vec<f64> = records.iter().map(|r| r.residual_adjusted).collect();
    let unadjusted: Vec<f64> = records.iter().map(|r| r.residual_unadjusted).collect();
    let mut rows = Vec::new();
    for (name, residuals) in [("adjusted", adjusted), ("unadjusted", unadjusted)] {
        let qq = qq_data(&residuals)?;
        rows.extend(qq.sample.iter().zip(&qq.theoretical).enumerate().map(|(i, (&s, &t))| QQRow {
            residual: name,
            index: i,
            sample: s,
            theoretical: t,
        }));
    }
    announce(&out.write_csv("loo_records.csv", &records)?);
    announce(&out.write_csv("loo_qq.csv", rows)?);
    Ok(())
}

/// Execute a resolved configuration, writing artifacts to its output directory.
pub fn execute(cfg: &RunConfig) -> Result<()> {
    let out = OutputDir::create(cfg)?;
    let run = || match &cfg.task {
        Task::Meta { input } => {
            let refs = read_references(input, &cfg.exclude)?;
            run_meta(cfg, &out, &refs)
        }
        Task::Predict { source, trt_ec_loghr, trt_ec_se } => {
            run_predict(cfg, &out, source, *trt_ec_loghr, *trt_ec_se)
        }
        task @ Task::Simulate { .. } => run_simulate(cfg, &out, task),
        task @ Task::Loo { .. } => run_loo(cfg, &out, task),
    };
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building thread pool")?
            .install(run),
        None => run(),
    }
}
