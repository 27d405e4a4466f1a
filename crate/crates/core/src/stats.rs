//! Error analysis for correlated Monte Carlo series: blocking (binning) with
//! plateau detection, and blocked jackknife for derived quantities.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMethod {
    Binning,
    Jackknife,
    /// Uncorrelated samples or exact values.
    Naive,
}

/// A Monte Carlo mean with its statistical error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    /// Effective number of independent samples, never above the raw count.
    pub n_effective: f64,
    pub method: ErrorMethod,
}

impl Estimate {
    /// An exactly known value.
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            std_error: 0.0,
            n_effective: f64::INFINITY,
            method: ErrorMethod::Naive,
        }
    }

    pub fn relative_error(&self) -> f64 {
        if self.mean == 0.0 {
            f64::INFINITY
        } else {
            (self.std_error / self.mean).abs()
        }
    }

    /// Linear rescaling `c * X`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            mean: c * self.mean,
            std_error: c.abs() * self.std_error,
            ..*self
        }
    }

    /// Number of standard errors separating the estimate from `target`.
    pub fn deviation(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Mean and standard error treating samples as independent.
pub fn naive_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    Estimate {
        mean: mean(xs),
        std_error: (variance(xs) / n).sqrt(),
        n_effective: n,
        method: ErrorMethod::Naive,
    }
}

/// One level of the blocking transformation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinLevel {
    pub bin_size: usize,
    pub n_bins: usize,
    pub std_error: f64,
    /// Statistical uncertainty of `std_error` itself.
    pub std_error_uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningAnalysis {
    pub levels: Vec<BinLevel>,
    /// Index into `levels` of the selected plateau.
    pub plateau: usize,
}

/// Fewest bins a level may have and still be considered for the plateau.
const MIN_BINS: usize = 32;

/// Runs the blocking transformation (pairwise averaging) and picks the
/// plateau: the first level whose error is not exceeded, beyond its own
/// uncertainty, by the next level. Falls back to the largest error among
/// admissible levels.
pub fn binning_analysis(xs: &[f64]) -> BinningAnalysis {
    let mut levels = Vec::new();
    let mut data = xs.to_vec();
    let mut bin_size = 1;
    while data.len() >= 2 {
        let nb = data.len();
        let se = (variance(&data) / nb as f64).sqrt();
        levels.push(BinLevel {
            bin_size,
            n_bins: nb,
            std_error: se,
            std_error_uncertainty: se / (2.0 * (nb - 1) as f64).sqrt(),
        });
        data = data.chunks_exact(2).map(|c| 0.5 * (c[0] + c[1])).collect();
        bin_size *= 2;
    }
    let admissible: Vec<usize> = (0..levels.len())
        .filter(|&i| levels[i].n_bins >= MIN_BINS)
        .collect();
    let plateau = if admissible.is_empty() {
        0
    } else {
        admissible
            .windows(2)
            .find(|w| {
                let (cur, next) = (&levels[w[0]], &levels[w[1]]);
                next.std_error - cur.std_error <= cur.std_error_uncertainty
            })
            .map(|w| {
                // the plateau value is the larger of the two neighbouring levels
                if levels[w[1]].std_error > levels[w[0]].std_error {
                    w[1]
                } else {
                    w[0]
                }
            })
            .unwrap_or_else(|| {
                *admissible
                    .iter()
                    .max_by(|&&a, &&b| levels[a].std_error.total_cmp(&levels[b].std_error))
                    .unwrap()
            })
    };
    BinningAnalysis { levels, plateau }
}

/// Mean with an autocorrelation-aware error from the binning plateau.
pub fn binned_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len();
    let m = mean(xs);
    if n < 2 {
        return Estimate {
            mean: m,
            std_error: 0.0,
            n_effective: n as f64,
            method: ErrorMethod::Binning,
        };
    }
    let analysis = binning_analysis(xs);
    let naive = analysis.levels[0].std_error;
    let se = analysis.levels[analysis.plateau].std_error.max(naive);
    let n_effective = if se > 0.0 {
        ((naive / se).powi(2) * n as f64).min(n as f64)
    } else {
        n as f64
    };
    Estimate {
        mean: m,
        std_error: se,
        n_effective,
        method: ErrorMethod::Binning,
    }
}

/// Blocked jackknife for a function of the means of several aligned series.
///
/// The series are cut into `n_blocks` contiguous blocks (trailing samples
/// that do not fill a block are dropped for the error but kept in the mean).
pub fn jackknife<F>(series: &[&[f64]], n_blocks: usize, f: F) -> Estimate
where
    F: Fn(&[f64]) -> f64,
{
    let len = series.iter().map(|s| s.len()).min().unwrap_or(0);
    let full_means: Vec<f64> = series.iter().map(|s| mean(&s[..len])).collect();
    let central = f(&full_means);
    let n_blocks = n_blocks.min(len);
    if n_blocks < 2 {
        return Estimate {
            mean: central,
            std_error: 0.0,
            n_effective: len as f64,
            method: ErrorMethod::Jackknife,
        };
    }
    let block = len / n_blocks;
    let used = block * n_blocks;
    let totals: Vec<f64> = series.iter().map(|s| s[..used].iter().sum()).collect();
    let mut replicas = Vec::with_capacity(n_blocks);
    let mut means = vec![0.0; series.len()];
    for b in 0..n_blocks {
        for (j, s) in series.iter().enumerate() {
            let block_sum: f64 = s[b * block..(b + 1) * block].iter().sum();
            means[j] = (totals[j] - block_sum) / (used - block) as f64;
        }
        replicas.push(f(&means));
    }
    let rm = mean(&replicas);
    let nb = n_blocks as f64;
    let var = (nb - 1.0) / nb * replicas.iter().map(|r| (r - rm).powi(2)).sum::<f64>();
    Estimate {
        mean: central,
        std_error: var.sqrt(),
        n_effective: len as f64,
        method: ErrorMethod::Jackknife,
    }
}

/// Combines independent estimates of the same quantity by equal weighting
/// (each chain has the same length, so equal weights are unbiased).
pub fn combine_equal(estimates: &[Estimate]) -> Option<Estimate> {
    if estimates.is_empty() {
        return None;
    }
    let k = estimates.len() as f64;
    Some(Estimate {
        mean: estimates.iter().map(|e| e.mean).sum::<f64>() / k,
        std_error: estimates.iter().map(|e| e.std_error.powi(2)).sum::<f64>().sqrt() / k,
        n_effective: estimates.iter().map(|e| e.n_effective).sum(),
        method: estimates[0].method,
    })
}
