//! Monte Carlo plumbing: seeded sub-streams and small estimators.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator for replicate `stream` under `seed`. ChaCha supports 2^64
/// independent streams per seed, so replicate `k` always sees the same
/// numbers regardless of scheduling.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A Monte Carlo point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub std_error: f64,
}

impl Estimate {
    /// True when `value` lies within `k` standard errors of the estimate.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.estimate - value).abs() <= k * self.std_error
    }
}

/// Sample mean with standard error `sd / sqrt(n)`.
pub fn mean_estimate(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Estimate {
            estimate: mean,
            std_error: f64::NAN,
        };
    }
    let ss: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
    Estimate {
        estimate: mean,
        std_error: (ss / (n - 1.0) / n).sqrt(),
    }
}

/// Unbiased sample variance with a leave-one-out jackknife standard error.
pub fn variance_estimate(values: &[f64]) -> Estimate {
    let n = values.len();
    assert!(n >= 3, "variance jackknife needs at least 3 values");
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let centered: Vec<f64> = values.iter().map(|x| x - mean).collect();
    let s1: f64 = centered.iter().sum();
    let s2: f64 = centered.iter().map(|x| x * x).sum();
    let var = (s2 - s1 * s1 / nf) / (nf - 1.0);

    // Leave-one-out variances from the running sums.
    let loo: Vec<f64> = centered
        .iter()
        .map(|&c| {
            let t1 = s1 - c;
            let t2 = s2 - c * c;
            (t2 - t1 * t1 / (nf - 1.0)) / (nf - 2.0)
        })
        .collect();
    let loo_mean = loo.iter().sum::<f64>() / nf;
    let spread: f64 = loo.iter().map(|v| (v - loo_mean) * (v - loo_mean)).sum();
    Estimate {
        estimate: var,
        std_error: ((nf - 1.0) / nf * spread).sqrt(),
    }
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let rx = ranks(x);
    let ry = ranks(y);
    pearson(&rx, &ry)
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}
