//! Statistics over control signals collected from many editing tests.
//!
//! Each signal is reduced to normalized magnitudes `|ΔS_d| / max |ΔS|`,
//! binned into a fixed-width histogram, and summarized across tests by the
//! per-bin mean and population standard deviation. The top-k dimensions of
//! each test form a set; the union over tests and the fraction of tests that
//! use each dimension (its reuse rate) show how concentrated the edits are.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::style::ControlSignal;

pub const DEFAULT_BINS: usize = 20;
pub const DEFAULT_TOP_K: usize = 50;
/// Normalized magnitudes strictly above this count as high-functional.
pub const HIGH_FUNCTIONAL_THRESHOLD: f64 = 0.6;

/// `|ΔS_d| / max_d |ΔS_d|`; an all-zero signal maps to all zeros.
pub fn normalize_abs(delta: &[f64]) -> Vec<f64> {
    let max = delta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return vec![0.0; delta.len()];
    }
    delta.iter().map(|v| v.abs() / max).collect()
}

/// Histogram of values in `[0, 1]` over `bins` equal-width bins; bin index
/// is `floor(v * bins)`, with 1.0 falling in the last bin.
pub fn histogram(values: &[f64], bins: usize) -> Result<Vec<usize>> {
    if bins == 0 {
        return Err(Error::InvalidArgument("bin count must be positive".into()));
    }
    let mut counts = vec![0; bins];
    for &v in values {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidArgument(format!("value {v} outside [0, 1]")));
        }
        counts[((v * bins as f64).floor() as usize).min(bins - 1)] += 1;
    }
    Ok(counts)
}

pub fn histogram20(values: &[f64]) -> Result<Vec<usize>> {
    histogram(values, DEFAULT_BINS)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsityReport {
    pub bins_mean: Vec<f64>,
    pub bins_std: Vec<f64>,
    pub high_functional_count: f64,
    pub tests: usize,
    /// Indices of tests whose signal was identically zero.
    pub zero_tests: Vec<usize>,
}

/// Mean histogram across tests, binned into `bins`.
pub fn mean_histogram(tests: &[ControlSignal], bins: usize) -> Result<SparsityReport> {
    let first = tests
        .first()
        .ok_or_else(|| Error::InvalidArgument("at least one test is required".into()))?;
    let dim = first.len();
    let mut per_test = Vec::with_capacity(tests.len());
    let mut high = Vec::with_capacity(tests.len());
    let mut zero_tests = Vec::new();
    for (i, t) in tests.iter().enumerate() {
        check_len(dim, t.len())?;
        if t.0.iter().all(|&v| v == 0.0) {
            zero_tests.push(i);
        }
        let v = normalize_abs(&t.0);
        high.push(v.iter().filter(|&&x| x > HIGH_FUNCTIONAL_THRESHOLD).count() as f64);
        per_test.push(histogram(&v, bins)?);
    }
    let n = tests.len() as f64;
    let mut bins_mean = vec![0.0; bins];
    let mut bins_std = vec![0.0; bins];
    for b in 0..bins {
        let mean = per_test.iter().map(|h| h[b] as f64).sum::<f64>() / n;
        let var = per_test.iter().map(|h| (h[b] as f64 - mean).powi(2)).sum::<f64>() / n;
        bins_mean[b] = mean;
        bins_std[b] = var.sqrt();
    }
    Ok(SparsityReport {
        bins_mean,
        bins_std,
        high_functional_count: high.iter().sum::<f64>() / n,
        tests: tests.len(),
        zero_tests,
    })
}

/// The `k` dimensions with the largest magnitude.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TopKSet {
    pub k: usize,
    pub dims: BTreeSet<usize>,
}

/// Top-`k` dimensions by `|ΔS_d|`, ties resolved toward the smaller index.
pub fn topk_set(delta: &[f64], k: usize) -> Result<TopKSet> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..delta.len()).collect();
    order.sort_by(|&a, &b| delta[b].abs().total_cmp(&delta[a].abs()).then(a.cmp(&b)));
    order.truncate(k);
    Ok(TopKSet {
        k,
        dims: order.into_iter().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReuseTable {
    /// Union of all sets, ascending.
    pub union_dims: Vec<usize>,
    /// Fraction of tests whose set contains each union dimension.
    pub rates: BTreeMap<usize, f64>,
    /// `membership[test][j]` is 1 when test `test` uses `union_dims[j]`.
    pub membership: Vec<Vec<u8>>,
}

/// Union of the per-test sets and the reuse rate of each member.
pub fn reuse_rates(sets: &[TopKSet]) -> Result<ReuseTable> {
    if sets.is_empty() {
        return Err(Error::InvalidArgument("at least one set is required".into()));
    }
    let union: BTreeSet<usize> = sets.iter().flat_map(|s| s.dims.iter().copied()).collect();
    let union_dims: Vec<usize> = union.into_iter().collect();
    let n = sets.len() as f64;
    let rates = union_dims
        .iter()
        .map(|d| (*d, sets.iter().filter(|s| s.dims.contains(d)).count() as f64 / n))
        .collect();
    let membership = sets
        .iter()
        .map(|s| union_dims.iter().map(|d| u8::from(s.dims.contains(d))).collect())
        .collect();
    Ok(ReuseTable {
        union_dims,
        rates,
        membership,
    })
}

impl ReuseTable {
    /// Membership matrix as CSV: header `test,d<i>...`, one row per test.
    pub fn write_membership_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<String> = std::iter::once("test".to_string())
            .chain(self.union_dims.iter().map(|d| format!("d{d}")))
            .collect();
        w.write_record(&header)?;
        for (t, row) in self.membership.iter().enumerate() {
            let rec: Vec<String> = std::iter::once(t.to_string())
                .chain(row.iter().map(u8::to_string))
                .collect();
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(dims: &[usize]) -> TopKSet {
        TopKSet {
            k: dims.len(),
            dims: dims.iter().copied().collect(),
        }
    }

    #[test]
    fn normalization() {
        let v = normalize_abs(&[0.1, -0.2, 0.4]);
        let expect = [0.25, 0.5, 1.0];
        for (a, b) in v.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(normalize_abs(&[0.0, 0.0, 0.0]), vec![0.0; 3]);
        assert_eq!(normalize_abs(&[-5.0]), vec![1.0]);
    }

    #[test]
    fn histogram_binning() {
        let h = histogram20(&[0.0, 0.049, 1.0]).unwrap();
        assert_eq!(h[0], 2);
        assert_eq!(h[19], 1);
        assert_eq!(h.iter().sum::<usize>(), 3);
        assert_eq!(histogram20(&vec![0.0; 4928]).unwrap()[0], 4928);
        let h = histogram20(&[0.6]).unwrap();
        assert_eq!(h[12], 1);
        assert!(histogram20(&[1.5]).is_err());
        assert!(histogram20(&[-0.1]).is_err());
        assert!(histogram(&[0.5], 0).is_err());
    }

    #[test]
    fn mean_and_std() {
        let same = vec![ControlSignal(vec![0.1, 0.9]); 3];
        let r = mean_histogram(&same, 20).unwrap();
        assert!(r.bins_std.iter().all(|&s| s == 0.0));

        // 10 and 20 entries in bin 0 respectively (30-dim signals, one spike)
        let mut a = vec![0.0; 30];
        a[0] = 1.0;
        for v in a.iter_mut().skip(11) {
            *v = 0.5;
        }
        let mut b = vec![0.0; 30];
        b[0] = 1.0;
        for v in b.iter_mut().skip(21) {
            *v = 0.5;
        }
        let r = mean_histogram(&[ControlSignal(a), ControlSignal(b)], 20).unwrap();
        assert_eq!(r.bins_mean[0], 15.0);
        assert_eq!(r.bins_std[0], 5.0);

        let r = mean_histogram(&[ControlSignal(vec![0.7, 0.2])], 20).unwrap();
        assert_eq!(r.high_functional_count, 1.0);
        // 0.6 itself is not high-functional
        let r = mean_histogram(&[ControlSignal(vec![0.6, 1.0])], 20).unwrap();
        assert_eq!(r.high_functional_count, 1.0);

        assert!(mean_histogram(&[ControlSignal(vec![1.0]), ControlSignal(vec![1.0, 2.0])], 20).is_err());
        assert!(mean_histogram(&[], 20).is_err());
    }

    #[test]
    fn zero_test_is_noted() {
        let r = mean_histogram(&[ControlSignal(vec![0.0, 0.0]), ControlSignal(vec![1.0, 0.0])], 20).unwrap();
        assert_eq!(r.zero_tests, vec![0]);
        assert_eq!(r.bins_mean[0], 1.5);
    }

    #[test]
    fn topk() {
        assert_eq!(topk_set(&[3.0, -1.0, 2.0], 2).unwrap().dims, [0, 2].into());
        assert_eq!(topk_set(&[1.0, 1.0, 1.0], 2).unwrap().dims, [0, 1].into());
        assert_eq!(topk_set(&[1.0, 2.0], 5).unwrap().dims, [0, 1].into());
        assert!(topk_set(&[1.0], 0).is_err());
    }

    #[test]
    fn reuse() {
        let t = reuse_rates(&[set(&[1, 2]), set(&[2, 3])]).unwrap();
        assert_eq!(t.union_dims, vec![1, 2, 3]);
        assert_eq!(t.rates[&2], 1.0);
        assert_eq!(t.rates[&1], 0.5);
        assert_eq!(t.rates[&3], 0.5);
        assert_eq!(t.membership, vec![vec![1, 1, 0], vec![0, 1, 1]]);

        let t = reuse_rates(&[set(&[4, 5]), set(&[4, 5]), set(&[4, 5])]).unwrap();
        assert!(t.rates.values().all(|&r| r == 1.0));
        assert!(reuse_rates(&[]).is_err());
    }

    #[test]
    fn membership_csv() {
        let t = reuse_rates(&[set(&[1, 2]), set(&[2, 3])]).unwrap();
        let mut buf = Vec::new();
        t.write_membership_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "test,d1,d2,d3\n0,1,1,0\n1,0,1,1\n");
    }
}
