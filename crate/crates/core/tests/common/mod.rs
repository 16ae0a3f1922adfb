//! Brute-force reference computations, deliberately independent of the
//! library's solvers.

#![allow(dead_code)]

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximization of a unimodal function on `[a, b]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Breslow log partial likelihood by direct risk-set enumeration, O(n^2).
pub fn naive_partial_loglik(times: &[f64], group: &[u8], beta: f64) -> f64 {
    let mut ll = 0.0;
    for i in 0..times.len() {
        let risk: f64 = (0..times.len())
            .filter(|&j| times[j] >= times[i])
            .map(|j| (beta * group[j] as f64).exp())
            .sum();
        ll += beta * group[i] as f64 - risk.ln();
    }
    ll
}

/// Maximizer of the partial likelihood: dense grid on [-10, 10] followed by
/// golden-section refinement around the best grid cell.
pub fn cox_grid_oracle(times: &[f64], group: &[u8]) -> f64 {
    let f = |b: f64| naive_partial_loglik(times, group, b);
    let steps = 4_000;
    let h = 20.0 / steps as f64;
    let best = (0..=steps)
        .map(|i| -10.0 + h * i as f64)
        .max_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap();
    golden_max(f, best - h, best + h, 1e-11)
}

/// Marginal Gaussian log-density of the meta-analysis, written out directly.
pub fn meta_loglik(y: &[f64], se: &[f64], mu: f64, sigma: f64) -> f64 {
    y.iter()
        .zip(se)
        .map(|(yj, sj)| {
            let v = sigma * sigma + sj * sj;
            -0.5 * (2.0 * std::f64::consts::PI * v).ln() - 0.5 * (yj - mu).powi(2) / v
        })
        .sum()
}

/// 2-D grid search over mu in [-2, 2] and sigma in [0, 2] with successive
/// zooming around the best cell.
pub fn ml_grid_oracle(y: &[f64], se: &[f64]) -> (f64, f64) {
    let f = |mu: f64, sigma: f64| meta_loglik(y, se, mu, sigma);
    let (mut mu_lo, mut mu_hi, mut s_lo, mut s_hi) = (-2.0, 2.0, 0.0, 2.0);
    let k = 60;
    let mut best = (0.0, 0.0);
    while mu_hi - mu_lo > 1e-9 || s_hi - s_lo > 1e-9 {
        let mut best_val = f64::NEG_INFINITY;
        for i in 0..=k {
            let mu = mu_lo + (mu_hi - mu_lo) * i as f64 / k as f64;
            for j in 0..=k {
                let s = s_lo + (s_hi - s_lo) * j as f64 / k as f64;
                let v = f(mu, s);
                if v > best_val {
                    best_val = v;
                    best = (mu, s);
                }
            }
        }
        let dm = 2.0 * (mu_hi - mu_lo) / k as f64;
        let ds = 2.0 * (s_hi - s_lo) / k as f64;
        mu_lo = best.0 - dm;
        mu_hi = best.0 + dm;
        s_lo = (best.1 - ds).max(0.0);
        s_hi = best.1 + ds;
    }
    best
}

/// Posterior mean and SD of mu for known sigma under a normal prior.
pub fn conjugate_mu_posterior(y: &[f64], se: &[f64], sigma: f64, prior_mean: f64, prior_var: f64) -> (f64, f64) {
    let mut precision = 1.0 / prior_var;
    let mut weighted = prior_mean / prior_var;
    for (yj, sj) in y.iter().zip(se) {
        let w = 1.0 / (sigma * sigma + sj * sj);
        precision += w;
        weighted += w * yj;
    }
    (weighted / precision, precision.sqrt().recip())
}

/// Sample variance (n - 1 denominator).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}
