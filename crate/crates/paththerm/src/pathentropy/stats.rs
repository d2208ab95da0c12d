//! Histograms and the statistical tests applied to path-entropy samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::par::map_indexed;

/// Tests are run at this fixed significance level.
pub const SIGNIFICANCE: f64 = 0.01;
/// Minimum sample count for the distribution-level tests.
pub const MIN_SAMPLES: usize = 10_000;
/// Both bins of a (zeta, -zeta) pair need at least this many counts to enter
/// the fluctuation-theorem fit.
pub const MIN_PAIR_COUNT: u64 = 20;
const MIN_USABLE_PAIRS: usize = 2;
/// Bootstrap resample count for confidence intervals.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("empty sample set")]
    EmptyInput,
    #[error("got {got} samples, need at least {need}")]
    TooFewSamples { got: usize, need: usize },
    #[error("samples are degenerate (all zero): no usable bins")]
    DegenerateSamples,
    #[error("only {0} usable bin pairs with >= {MIN_PAIR_COUNT} counts on both sides")]
    TooFewBinPairs(usize),
    #[error("bootstrap produced too few valid resamples ({valid}/{total})")]
    UnstableBootstrap { valid: usize, total: usize },
    #[error("samples contain non-finite values")]
    NonFinite,
}

/// Uniform-bin histogram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub left: f64,
    pub width: f64,
    pub counts: Vec<u64>,
    pub total: u64,
}

/// Bin-width selection.
#[derive(Debug, Clone, Copy)]
pub enum BinPolicy {
    /// Freedman-Diaconis width 2 IQR / n^(1/3), the default.
    FreedmanDiaconis,
    Count(usize),
    Width(f64),
}

impl Histogram {
    fn from_edges(samples: &[f64], left: f64, width: f64, bins: usize) -> Histogram {
        let mut counts = vec![0u64; bins];
        for &x in samples {
            let mut k = ((x - left) / width) as isize;
            k = k.clamp(0, bins as isize - 1);
            counts[k as usize] += 1;
        }
        Histogram {
            left,
            width,
            counts,
            total: samples.len() as u64,
        }
    }

    pub fn num_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_left(&self, k: usize) -> f64 {
        self.left + self.width * k as f64
    }

    pub fn bin_right(&self, k: usize) -> f64 {
        self.left + self.width * (k + 1) as f64
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.left + self.width * (k as f64 + 0.5)
    }

    /// CSV rows `bin_left,bin_right,count` with a header line.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bin_left,bin_right,count")?;
        for (k, &c) in self.counts.iter().enumerate() {
            writeln!(w, "{:e},{:e},{}", self.bin_left(k), self.bin_right(k), c)?;
        }
        Ok(())
    }
}

fn check_finite(samples: &[f64]) -> Result<(), StatsError> {
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// Bin the samples with uniform bins covering their range.
pub fn histogram(samples: &[f64], policy: BinPolicy) -> Result<Histogram, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    check_finite(samples)?;
    let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    if span == 0.0 {
        // All samples identical: one unit-width bin around the value.
        return Ok(Histogram::from_edges(samples, min - 0.5, 1.0, 1));
    }
    let (left, width, bins) = match policy {
        BinPolicy::FreedmanDiaconis => {
            let mut sorted = samples.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let iqr = percentile_sorted(&sorted, 0.75) - percentile_sorted(&sorted, 0.25);
            let fd = 2.0 * iqr / (samples.len() as f64).cbrt();
            let width = if fd > 0.0 { fd } else { span / 16.0 };
            let bins = ((span / width).ceil() as usize).clamp(1, 100_000);
            (min, width, bins)
        }
        BinPolicy::Count(n) => {
            let bins = n.max(1);
            (min, span / bins as f64, bins)
        }
        BinPolicy::Width(w) => {
            let width = if w > 0.0 { w } else { span / 16.0 };
            let bins = ((span / width).ceil() as usize).clamp(1, 100_000);
            (min, width, bins)
        }
    };
    // Nudge the top edge so max lands inside the last bin.
    let width = width * (1.0 + 1e-12);
    Ok(Histogram::from_edges(samples, left, width, bins))
}

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Unbiased sample variance.
pub fn variance(samples: &[f64]) -> f64 {
    let m = mean(samples);
    samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (samples.len() as f64 - 1.0)
}

fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Weighted least-squares slope (through the origin) of
/// ln(P(zeta) / P(-zeta)) against zeta; under the fluctuation theorem the
/// slope is 1.
#[derive(Debug, Clone, Serialize)]
pub struct FtFit {
    pub slope: f64,
    /// 99% bootstrap percentile interval.
    pub slope_ci: (f64, f64),
    pub n_samples: usize,
    pub n_bin_pairs: usize,
    /// (zeta, log count ratio, paired counts) per usable bin pair.
    pub bin_table: Vec<(f64, f64, u64, u64)>,
}

struct SymmetricBins {
    left: f64,
    width: f64,
    bins: usize,
}

impl SymmetricBins {
    fn new(samples: &[f64], requested: usize) -> Result<SymmetricBins, StatsError> {
        let zmax = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if zmax == 0.0 {
            return Err(StatsError::DegenerateSamples);
        }
        let mut bins = requested.max(3);
        if bins % 2 == 0 {
            // An odd count centers one bin on zero. Samples at exactly zero
            // then fall into the unpaired central bin instead of breaking
            // the (zeta, -zeta) pairing, and lattice-valued samples sit at
            // bin centers rather than on edges.
            bins += 1;
        }
        let top = zmax * (1.0 + 1e-12);
        Ok(SymmetricBins {
            left: -top,
            width: 2.0 * top / bins as f64,
            bins,
        })
    }

    /// Per-bin counts plus sums of |value|, the latter so the fit can use the
    /// empirical mean magnitude of a bin pair as its regressor. That keeps
    /// the slope unbiased when the samples concentrate on a lattice (as in
    /// unicyclic networks, where every jump adds the same log ratio).
    fn count<I: Iterator<Item = f64>>(&self, samples: I) -> (Vec<u64>, Vec<f64>) {
        let mut counts = vec![0u64; self.bins];
        let mut magnitude = vec![0.0f64; self.bins];
        for x in samples {
            let mut k = ((x - self.left) / self.width) as isize;
            k = k.clamp(0, self.bins as isize - 1);
            counts[k as usize] += 1;
            magnitude[k as usize] += x.abs();
        }
        (counts, magnitude)
    }

    /// Slope through the origin from paired-bin log ratios, or None when
    /// fewer than MIN_USABLE_PAIRS pairs qualify.
    fn slope(
        &self,
        counts: &[u64],
        magnitude: &[f64],
    ) -> Option<(f64, Vec<(f64, f64, u64, u64)>)> {
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        let mut table = Vec::new();
        // Strictly positive bins; the central zero bin has no mirror.
        for k in self.bins / 2 + 1..self.bins {
            let mirror = self.bins - 1 - k;
            let (n_pos, n_neg) = (counts[k], counts[mirror]);
            if n_pos < MIN_PAIR_COUNT || n_neg < MIN_PAIR_COUNT {
                continue;
            }
            let x = (magnitude[k] + magnitude[mirror]) / (n_pos + n_neg) as f64;
            let y = (n_pos as f64 / n_neg as f64).ln();
            // Delta-method variance of the log ratio.
            let weight = 1.0 / (1.0 / n_pos as f64 + 1.0 / n_neg as f64);
            num += weight * x * y;
            den += weight * x * x;
            table.push((x, y, n_pos, n_neg));
        }
        if table.len() < MIN_USABLE_PAIRS || den == 0.0 {
            return None;
        }
        Some((num / den, table))
    }
}

/// Fit the fluctuation-theorem slope with a bootstrap confidence interval.
/// Bins are uniform and symmetric about zero; only (zeta, -zeta) bin pairs
/// with at least [`MIN_PAIR_COUNT`] counts on both sides enter the fit.
pub fn ft_fit(
    samples: &[f64],
    bins: usize,
    resamples: usize,
    seed: u64,
) -> Result<FtFit, StatsError> {
    if samples.len() < MIN_SAMPLES {
        return Err(StatsError::TooFewSamples {
            got: samples.len(),
            need: MIN_SAMPLES,
        });
    }
    check_finite(samples)?;
    let grid = SymmetricBins::new(samples, bins)?;
    let (counts, magnitude) = grid.count(samples.iter().cloned());
    let (slope, table) = grid
        .slope(&counts, &magnitude)
        .ok_or(StatsError::TooFewBinPairs(table_len_hint(&grid, &counts)))?;

    let n = samples.len();
    let slopes: Vec<Option<f64>> = map_indexed(resamples, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        let resampled = (0..n).map(|_| samples[rng.random_range(0..n)]);
        let (counts, magnitude) = grid.count(resampled);
        grid.slope(&counts, &magnitude).map(|(s, _)| s)
    });
    let mut valid: Vec<f64> = slopes.into_iter().flatten().collect();
    if valid.len() * 2 < resamples {
        return Err(StatsError::UnstableBootstrap {
            valid: valid.len(),
            total: resamples,
        });
    }
    valid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ci = (
        percentile_sorted(&valid, SIGNIFICANCE / 2.0),
        percentile_sorted(&valid, 1.0 - SIGNIFICANCE / 2.0),
    );
    Ok(FtFit {
        slope,
        slope_ci: ci,
        n_samples: n,
        n_bin_pairs: table.len(),
        bin_table: table,
    })
}

fn table_len_hint(grid: &SymmetricBins, counts: &[u64]) -> usize {
    (grid.bins / 2 + 1..grid.bins)
        .filter(|&k| {
            counts[k] >= MIN_PAIR_COUNT && counts[grid.bins - 1 - k] >= MIN_PAIR_COUNT
        })
        .count()
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64), StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    check_finite(a)?;
    check_finite(b)?;
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n && j < m {
        let t = a[i].min(b[j]);
        while i < n && a[i] == t {
            i += 1;
        }
        while j < m && b[j] == t {
            j += 1;
        }
        let diff = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        d = d.max(diff);
    }
    let ne = (n as f64 * m as f64) / (n as f64 + m as f64);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok((d, kolmogorov_survival(lambda)))
}

/// Asymptotic Kolmogorov distribution survival function
/// Q(lambda) = 2 sum_{j>=1} (-1)^(j-1) exp(-2 j^2 lambda^2).
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Complementary series converges fast for small arguments.
        let factor = (2.0 * std::f64::consts::PI).sqrt() / lambda;
        let t = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let mut cdf = 0.0;
        for j in 0..5 {
            let k = (2 * j + 1) as f64;
            cdf += (-k * k * t).exp();
        }
        (1.0 - factor * cdf).clamp(0.0, 1.0)
    } else {
        let mut q = 0.0;
        let mut sign = 1.0;
        for j in 1..=100 {
            let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
            q += sign * term;
            if term < 1e-16 {
                break;
            }
            sign = -sign;
        }
        (2.0 * q).clamp(0.0, 1.0)
    }
}

/// Symmetry test: Kolmogorov-Smirnov statistic between the samples and their
/// negation. Symmetry is rejected when `p_value < SIGNIFICANCE`.
#[derive(Debug, Clone, Serialize)]
pub struct SymmetryTest {
    pub statistic: f64,
    pub p_value: f64,
    pub n_samples: usize,
}

impl SymmetryTest {
    pub fn rejects_symmetry(&self) -> bool {
        self.p_value < SIGNIFICANCE
    }
}

pub fn symmetry_test(samples: &[f64]) -> Result<SymmetryTest, StatsError> {
    if samples.len() < MIN_SAMPLES {
        return Err(StatsError::TooFewSamples {
            got: samples.len(),
            need: MIN_SAMPLES,
        });
    }
    let negated: Vec<f64> = samples.iter().map(|x| -x).collect();
    let (statistic, p_value) = ks_two_sample(samples, &negated)?;
    Ok(SymmetryTest {
        statistic,
        p_value,
        n_samples: samples.len(),
    })
}
