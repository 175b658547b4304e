// SPDX-License-Identifier: Apache-2.0

//! Pooled statistics of the horizontal increments between axis returns.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ensemble::{EnsembleResult, Quantiles};
use crate::error::{Error, Result};

/// Fewer pooled increments than this flag the summary as low power.
pub const MIN_EXCURSIONS: usize = 10;

/// `c(α)` of the two-sample Kolmogorov–Smirnov test at `α = 0.01`.
const KS_C_99: f64 = 1.627_6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSplitTest {
    pub walk_index: usize,
    pub n_first: usize,
    pub n_second: usize,
    /// Two-sample Kolmogorov–Smirnov distance of the first coordinate.
    pub statistic: f64,
    /// Asymptotic 99% critical value for the two sample sizes.
    pub threshold: f64,
}

impl HalfSplitTest {
    pub fn consistent(&self) -> bool {
        self.statistic < self.threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcursionSummary {
    pub count: usize,
    /// Histogram of the first coordinate of `D_k`, pooled over walks.
    pub histogram: BTreeMap<i64, u64>,
    pub positive: usize,
    pub negative: usize,
    pub mean: f64,
    pub mean_se: f64,
    /// Quantiles of `σ_k − σ_{k−1}`.
    pub sigma_gaps: Option<Quantiles>,
    /// One test per walk with at least [`MIN_EXCURSIONS`] increments.
    pub half_split: Vec<HalfSplitTest>,
    pub low_power: bool,
}

impl ExcursionSummary {
    /// `|#{D>0} − #{D<0}| / #D`.
    pub fn sign_balance(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.positive as f64 - self.negative as f64).abs() / self.count as f64
    }
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance(a: &[i64], b: &[i64]) -> f64 {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    b.sort_unstable();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut best) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    best
}

pub fn excursion_summary(r: &EnsembleResult) -> Result<ExcursionSummary> {
    let mut pooled: Vec<i64> = Vec::new();
    let mut gaps: Vec<f64> = Vec::new();
    let mut half_split = Vec::new();
    for (idx, w) in r.walks.iter().enumerate() {
        let tr = w
            .excursions
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("ensemble was run without trace recording".into()))?;
        let d: Vec<i64> = tr.d.iter().map(|x| x[0]).collect();
        gaps.extend(tr.sigma.windows(2).map(|s| (s[1] - s[0]) as f64));
        if d.len() >= MIN_EXCURSIONS {
            let (first, second) = d.split_at(d.len() / 2);
            let (n1, n2) = (first.len() as f64, second.len() as f64);
            half_split.push(HalfSplitTest {
                walk_index: idx,
                n_first: first.len(),
                n_second: second.len(),
                statistic: ks_distance(first, second),
                threshold: KS_C_99 * ((n1 + n2) / (n1 * n2)).sqrt(),
            });
        }
        pooled.extend(d);
    }
    let count = pooled.len();
    let mut histogram = BTreeMap::new();
    for &x in &pooled {
        *histogram.entry(x).or_insert(0) += 1;
    }
    let n = count as f64;
    let mean = if count > 0 { pooled.iter().map(|&x| x as f64).sum::<f64>() / n } else { 0.0 };
    let mean_se = if count > 1 {
        let var = pooled.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        f64::NAN
    };
    Ok(ExcursionSummary {
        count,
        histogram,
        positive: pooled.iter().filter(|&&x| x > 0).count(),
        negative: pooled.iter().filter(|&&x| x < 0).count(),
        mean,
        mean_se,
        sigma_gaps: (!gaps.is_empty()).then(|| Quantiles::of(&gaps)),
        half_split,
        low_power: count < MIN_EXCURSIONS,
    })
}
