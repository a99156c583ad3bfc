//! Contingency-table statistics over pairs of discrete observations.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Smallest expected cell count for which the chi-squared approximation is
/// trusted.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndependenceTest {
    pub chi2: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Observations used.
    pub n: u64,
    /// Some expected count stayed below [`MIN_EXPECTED`] after pooling rare
    /// categories, or a variable had a single category.
    pub low_power: bool,
}

/// Pearson chi-squared test of independence between the two coordinates.
///
/// While some expected cell count is below [`MIN_EXPECTED`], the rarest
/// categories of whichever variable has the smaller minimum are merged into
/// one bucket for that variable.
pub fn chi_squared_independence(pairs: &[(u64, u64)]) -> IndependenceTest {
    let n = pairs.len() as u64;
    let mut rows = Pooling::new(pairs.iter().map(|p| p.0));
    let mut cols = Pooling::new(pairs.iter().map(|p| p.1));
    while rows.distinct() >= 2 && cols.distinct() >= 2 {
        let (min_r, min_c) = (rows.min_total(), cols.min_total());
        if min_r as f64 * min_c as f64 / n as f64 >= MIN_EXPECTED {
            break;
        }
        if (min_r, cols.distinct()) < (min_c, rows.distinct()) {
            rows.pool_next();
        } else {
            cols.pool_next();
        }
    }

    let (row_map, col_map) = (rows.map(), cols.map());
    let (r, c) = (rows.distinct(), cols.distinct());
    if r < 2 || c < 2 {
        return IndependenceTest {
            chi2: 0.0,
            dof: 0,
            p_value: 1.0,
            n,
            low_power: true,
        };
    }
    let mut observed = vec![0u64; r * c];
    let mut row_tot = vec![0u64; r];
    let mut col_tot = vec![0u64; c];
    for &(a, b) in pairs {
        let (i, j) = (row_map[&a], col_map[&b]);
        observed[i * c + j] += 1;
        row_tot[i] += 1;
        col_tot[j] += 1;
    }
    let total = n as f64;
    let mut chi2 = 0.0;
    let mut min_expected = f64::INFINITY;
    for i in 0..r {
        for j in 0..c {
            let expected = row_tot[i] as f64 * col_tot[j] as f64 / total;
            min_expected = min_expected.min(expected);
            let diff = observed[i * c + j] as f64 - expected;
            chi2 += diff * diff / expected;
        }
    }
    let dof = (r - 1) * (c - 1);
    let p_value = ChiSquared::new(dof as f64)
        .map(|d| d.sf(chi2))
        .unwrap_or(f64::NAN)
        .clamp(0.0, 1.0);
    IndependenceTest {
        chi2,
        dof,
        p_value,
        n,
        low_power: min_expected < MIN_EXPECTED,
    }
}

/// Categories of one variable in ascending order of count; the first
/// `pooled` of them share a bucket.
struct Pooling {
    sorted: Vec<(u64, u64)>,
    pooled: usize,
}

impl Pooling {
    fn new(values: impl Iterator<Item = u64>) -> Self {
        let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
        for v in values {
            *counts.entry(v).or_default() += 1;
        }
        let mut sorted: Vec<(u64, u64)> = counts.into_iter().collect();
        sorted.sort_by_key(|&(k, c)| (c, k));
        Self { sorted, pooled: 0 }
    }

    fn distinct(&self) -> usize {
        self.sorted.len() - self.pooled + usize::from(self.pooled > 0)
    }

    fn bucket(&self) -> u64 {
        self.sorted[..self.pooled].iter().map(|&(_, c)| c).sum()
    }

    fn min_total(&self) -> u64 {
        let next = self.sorted.get(self.pooled).map_or(u64::MAX, |&(_, c)| c);
        if self.pooled > 0 {
            next.min(self.bucket())
        } else {
            next
        }
    }

    fn pool_next(&mut self) {
        // A bucket of one is no pooling at all; start with two.
        self.pooled = (self.pooled + 1).max(2).min(self.sorted.len());
    }

    /// Category value to cell index; the bucket, if any, is index 0.
    fn map(&self) -> BTreeMap<u64, usize> {
        let offset = usize::from(self.pooled > 0);
        let mut map: BTreeMap<u64, usize> = self.sorted[..self.pooled].iter().map(|&(k, _)| (k, 0)).collect();
        for (i, &(k, _)) in self.sorted[self.pooled..].iter().enumerate() {
            map.insert(k, i + offset);
        }
        map
    }
}

/// Plug-in mutual information of the two coordinates, in bits.
pub fn mutual_information_bits(pairs: &[(u64, u64)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let mut joint: BTreeMap<(u64, u64), u64> = BTreeMap::new();
    let mut left: BTreeMap<u64, u64> = BTreeMap::new();
    let mut right: BTreeMap<u64, u64> = BTreeMap::new();
    for &(a, b) in pairs {
        *joint.entry((a, b)).or_default() += 1;
        *left.entry(a).or_default() += 1;
        *right.entry(b).or_default() += 1;
    }
    let n = pairs.len() as f64;
    let mi: f64 = joint
        .iter()
        .map(|(&(a, b), &c)| {
            let pab = c as f64 / n;
            let pa = left[&a] as f64 / n;
            let pb = right[&b] as f64 / n;
            pab * (pab / (pa * pb)).log2()
        })
        .sum();
    mi.max(0.0)
}
