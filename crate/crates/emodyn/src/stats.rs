//! Era-comparison statistics: Mann-Whitney U test and percent change.
//!
//! The test is two-sided. For small samples (both sizes <= 8) the p-value
//! is exact, by enumerating every assignment of the pooled observations to
//! the two groups; larger samples use the normal approximation with
//! midrank tie correction and a continuity correction.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("empty sample: {0}")]
    EmptySample(&'static str),
    #[error("percent change undefined: baseline mean is zero")]
    ZeroBaseline,
    #[error("non-finite value in sample")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    Exact,
    NormalApprox,
}

/// Mann-Whitney result. `u_statistic` is U for the first sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub u_statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
    pub method: TestMethod,
}

/// Largest per-group size for which the exact enumeration runs.
pub const EXACT_LIMIT: usize = 8;

/// Midranks of the pooled sample, in pooled order.
fn midranks(pooled: &[f64]) -> Vec<f64> {
    let n = pooled.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| pooled[a].partial_cmp(&pooled[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && pooled[idx[j]] == pooled[idx[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for k in i..j {
            ranks[idx[k]] = rank;
        }
        i = j;
    }
    ranks
}

fn u_from_ranks(ranks: &[f64], n1: usize) -> f64 {
    let r1: f64 = ranks[..n1].iter().sum();
    r1 - (n1 * (n1 + 1)) as f64 / 2.0
}

/// Two-sided Mann-Whitney U test.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    if a.is_empty() {
        return Err(StatsError::EmptySample("first sample"));
    }
    if b.is_empty() {
        return Err(StatsError::EmptySample("second sample"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n1 = a.len();
    let n2 = b.len();
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let u = u_from_ranks(&ranks, n1);

    if n1 <= EXACT_LIMIT && n2 <= EXACT_LIMIT {
        let p = exact_two_sided_p(&ranks, n1, u);
        Ok(TestResult {
            u_statistic: u,
            p_value: p,
            n1,
            n2,
            method: TestMethod::Exact,
        })
    } else {
        let p = normal_approx_p(&pooled, &ranks, n1, n2, u);
        Ok(TestResult {
            u_statistic: u,
            p_value: p,
            n1,
            n2,
            method: TestMethod::NormalApprox,
        })
    }
}

/// Exact two-sided p: the fraction of assignments of the pooled values to
/// a group of size n1 whose U is at least as far from n1*n2/2 as observed.
/// Enumerates combinations lexicographically.
fn exact_two_sided_p(ranks: &[f64], n1: usize, u_obs: f64) -> f64 {
    let n = ranks.len();
    let n2 = n - n1;
    let center = (n1 * n2) as f64 / 2.0;
    let dev_obs = (u_obs - center).abs();
    let mut extreme: u64 = 0;
    let mut total: u64 = 0;
    let mut comb: Vec<usize> = (0..n1).collect();
    loop {
        let r1: f64 = comb.iter().map(|&i| ranks[i]).sum();
        let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
        // 1e-9 slack keeps midrank arithmetic from dropping ties of
        // deviation at the boundary.
        if (u - center).abs() >= dev_obs - 1e-9 {
            extreme += 1;
        }
        total += 1;
        // next combination
        let mut i = n1;
        loop {
            if i == 0 {
                return extreme as f64 / total as f64;
            }
            i -= 1;
            if comb[i] != i + n - n1 {
                break;
            }
        }
        comb[i] += 1;
        for j in i + 1..n1 {
            comb[j] = comb[j - 1] + 1;
        }
    }
}

/// Normal approximation with midrank tie correction and continuity
/// correction.
fn normal_approx_p(pooled: &[f64], _ranks: &[f64], n1: usize, n2: usize, u: f64) -> f64 {
    let n = (n1 + n2) as f64;
    let mean = (n1 * n2) as f64 / 2.0;
    // tie term: sum over tie groups of t^3 - t
    let mut sorted = pooled.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = (n1 * n2) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        // all observations tied; no evidence against the null
        return 1.0;
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * (1.0 - normal.cdf(z))).min(1.0)
}

/// Signed percent change from a baseline mean:
/// ((new - baseline) / baseline) * 100.
pub fn percent_change(pre_mean: f64, post_mean: f64) -> Result<f64, StatsError> {
    if pre_mean == 0.0 {
        return Err(StatsError::ZeroBaseline);
    }
    Ok((post_mean - pre_mean) / pre_mean * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_give_central_u() {
        let a = [1.0, 2.0, 3.0];
        let b = [1.0, 2.0, 3.0];
        let r = mann_whitney(&a, &b).unwrap();
        assert_eq!(r.u_statistic, 4.5);
        assert_eq!(r.method, TestMethod::Exact);
    }

    #[test]
    fn disjoint_small_samples_exact_p() {
        // brute force over all C(4,2)=6 assignments gives p = 2/6
        let r = mann_whitney(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.u_statistic, 0.0);
        assert!((r.p_value - 2.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn u_symmetry() {
        let a = [1.0, 5.0, 3.0, 9.0];
        let b = [2.0, 2.0, 7.0];
        let ra = mann_whitney(&a, &b).unwrap();
        let rb = mann_whitney(&b, &a).unwrap();
        assert!((ra.u_statistic + rb.u_statistic - (a.len() * b.len()) as f64).abs() < 1e-12);
        assert!((ra.p_value - rb.p_value).abs() < 1e-12);
    }

    #[test]
    fn label_swap_preserves_two_sided_p_large() {
        let a: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let b: Vec<f64> = (0..40).map(|i| i as f64 * 0.11 + 0.5).collect();
        let ra = mann_whitney(&a, &b).unwrap();
        let rb = mann_whitney(&b, &a).unwrap();
        assert_eq!(ra.method, TestMethod::NormalApprox);
        assert!((ra.p_value - rb.p_value).abs() < 1e-12);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(matches!(
            mann_whitney(&[], &[1.0]),
            Err(StatsError::EmptySample(_))
        ));
    }

    #[test]
    fn exact_matches_brute_force_with_ties() {
        // independent oracle: bitmask enumeration over all subsets
        let a = [1.0, 2.0, 2.0, 5.0];
        let b = [2.0, 3.0, 4.0];
        let r = mann_whitney(&a, &b).unwrap();
        let oracle = brute_force_p(&a, &b);
        assert!((r.p_value - oracle).abs() < 1e-9);
    }

    /// Oracle: iterate every bitmask of the pooled indices with popcount
    /// n1 and count assignments at least as extreme.
    pub(super) fn brute_force_p(a: &[f64], b: &[f64]) -> f64 {
        let n1 = a.len();
        let n = n1 + b.len();
        let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
        let ranks = midranks(&pooled);
        let center = (n1 * b.len()) as f64 / 2.0;
        let u_obs = u_from_ranks(&ranks, n1);
        let dev_obs = (u_obs - center).abs();
        let mut extreme = 0u64;
        let mut total = 0u64;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != n1 {
                continue;
            }
            let r1: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
            let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
            if (u - center).abs() >= dev_obs - 1e-9 {
                extreme += 1;
            }
            total += 1;
        }
        extreme as f64 / total as f64
    }

    #[test]
    fn shifted_distributions_are_significant() {
        // 36 vs 84 monthly-style samples from clearly shifted distributions
        let a: Vec<f64> = (0..36).map(|i| 0.08 + 0.0001 * (i % 7) as f64).collect();
        let b: Vec<f64> = (0..84).map(|i| 0.06 + 0.0001 * (i % 9) as f64).collect();
        let r = mann_whitney(&a, &b).unwrap();
        assert!(r.p_value < 0.001);
    }

    #[test]
    fn percent_change_table_values() {
        let r = percent_change(0.0876, 0.0760).unwrap();
        assert!((r - (-13.24)).abs() < 0.01, "got {r}");
        let r = percent_change(0.0156, 0.0190).unwrap();
        assert!((r - 21.79).abs() < 0.01, "got {r}");
    }

    #[test]
    fn percent_change_identity_and_exact_rate() {
        assert_eq!(percent_change(0.42, 0.42).unwrap(), 0.0);
        let m = 0.37;
        let r = 0.125;
        assert!((percent_change(m, m * (1.0 + r)).unwrap() - 100.0 * r).abs() < 1e-9);
    }

    #[test]
    fn percent_change_zero_baseline_errors() {
        assert!(matches!(
            percent_change(0.0, 0.1),
            Err(StatsError::ZeroBaseline)
        ));
    }
}
