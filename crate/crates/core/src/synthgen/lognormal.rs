//! Discretized, truncated log-normal count distribution.
//!
//! A continuous draw `x ~ LogNormal(mu, sigma)` is rounded to the nearest
//! integer, floored at 1, and rejected above `max`. `mu` is pinned by the
//! target median; `sigma` is solved by bisection so the resulting discrete
//! mean hits the target.

use rand::Rng;

use super::SynthError;

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountDistribution {
    pub mu: f64,
    pub sigma: f64,
    pub max: usize,
    /// `cdf[k-1] = P(n <= k)` for `k` in `1..=max`.
    cdf: Vec<f64>,
}

fn pmf(mu: f64, sigma: f64, max: usize) -> Vec<f64> {
    let cdf_at = |x: f64| normal_cdf((x.ln() - mu) / sigma);
    let mut p = Vec::with_capacity(max);
    for k in 1..=max {
        let hi = cdf_at(k as f64 + 0.5);
        let lo = if k == 1 { 0.0 } else { cdf_at(k as f64 - 0.5) };
        p.push(hi - lo);
    }
    let total: f64 = p.iter().sum();
    p.iter().map(|x| x / total).collect()
}

fn mean_of(p: &[f64]) -> f64 {
    p.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).sum()
}

impl CountDistribution {
    pub fn fit(mean: f64, median: f64, max: usize) -> Result<Self, SynthError> {
        if !(median >= 1.0) || !(mean > 0.0) || max < 2 {
            return Err(SynthError::InfeasibleTargets(format!(
                "need median >= 1, mean > 0, max >= 2 (got mean {mean}, median {median}, max {max})"
            )));
        }
        if median > mean {
            return Err(SynthError::InfeasibleTargets(format!(
                "median {median} exceeds mean {mean}; a log-normal is right-skewed"
            )));
        }
        let mu = median.ln();
        let f = |s: f64| mean_of(&pmf(mu, s, max)) - mean;
        let (mut lo, mut hi) = (1e-3, 6.0);
        if f(lo) > 0.0 || f(hi) < 0.0 {
            return Err(SynthError::InfeasibleTargets(format!(
                "no sigma reaches mean {mean} with median {median} below {max}"
            )));
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let sigma = 0.5 * (lo + hi);
        Ok(Self::new(mu, sigma, max))
    }

    pub fn new(mu: f64, sigma: f64, max: usize) -> Self {
        let mut acc = 0.0;
        let cdf = pmf(mu, sigma, max)
            .into_iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self {
            mu,
            sigma,
            max,
            cdf,
        }
    }

    pub fn mean(&self) -> f64 {
        mean_of(&pmf(self.mu, self.sigma, self.max))
    }

    /// Smallest `k` with `P(n <= k) >= q`.
    pub fn quantile(&self, q: f64) -> usize {
        self.cdf.partition_point(|&c| c < q).min(self.max - 1) + 1
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen::<f64>() * self.cdf[self.max - 1];
        self.cdf.partition_point(|&c| c <= u).min(self.max - 1) + 1
    }
}
