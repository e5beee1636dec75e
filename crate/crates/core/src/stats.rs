//! Two-sample tests and the distribution functions behind their p-values.

use std::collections::BTreeSet;
use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};

/// Which group the test found larger.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    GroupA,
    GroupB,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub df: Option<f64>,
    /// Two-sided.
    pub p_value: f64,
    pub direction: Direction,
}

impl TestResult {
    /// `**` below 0.01, `*` below 0.05.
    pub fn stars(&self) -> &'static str {
        if self.p_value < 0.01 {
            "**"
        } else if self.p_value < 0.05 {
            "*"
        } else {
            ""
        }
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

fn ln_beta(a: f64, b: f64) -> f64 {
    libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..100_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = (a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b)).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Two-sided tail probability P(|T| >= |t|) for Student's t with `df`.
fn t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Student's t CDF via the regularized incomplete beta function.
pub fn student_t_cdf(t: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) || t.is_nan() {
        return Err(Error::InvalidInput(format!(
            "student_t_cdf needs df > 0 and a number, got t={t}, df={df}"
        )));
    }
    let tail = 0.5 * t_two_sided(t, df);
    Ok(if t > 0.0 { 1.0 - tail } else { tail })
}

fn check_finite(sample: &[f64], name: &str) -> Result<()> {
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("sample {name} has non-finite values")));
    }
    Ok(())
}

fn mean_and_variance(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, ss / (n - 1.0))
}

fn direction_of(sign: f64) -> Direction {
    if sign > 0.0 {
        Direction::GroupA
    } else if sign < 0.0 {
        Direction::GroupB
    } else {
        Direction::None
    }
}

/// Welch's unequal-variance t-test, two-sided, with Welch–Satterthwaite
/// degrees of freedom.
///
/// When both samples are constant the test degenerates: equal means give
/// t = 0 and p = 1, different means give an infinite t and p = 0.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::SampleTooSmall(format!(
            "Welch's t-test needs at least 2 values per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    check_finite(a, "a")?;
    check_finite(b, "b")?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = mean_and_variance(a);
    let (mb, vb) = mean_and_variance(b);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    let diff = ma - mb;

    if se2 == 0.0 {
        return Ok(if diff == 0.0 {
            TestResult {
                statistic: 0.0,
                df: None,
                p_value: 1.0,
                direction: Direction::None,
            }
        } else {
            TestResult {
                statistic: diff.signum() * f64::INFINITY,
                df: None,
                p_value: 0.0,
                direction: direction_of(diff),
            }
        });
    }

    let t = diff / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TestResult {
        statistic: t,
        df: Some(df),
        p_value: t_two_sided(t, df),
        direction: direction_of(t),
    })
}

/// How [`mann_whitney_u_with`] obtains its p-value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MwuMethod {
    /// Exact when `n_a * n_b <= EXACT_MWU_LIMIT`, normal otherwise.
    Auto,
    Exact,
    Normal,
}

pub const EXACT_MWU_LIMIT: usize = 64;

/// Midranks (1-based) of `values`, ties sharing the mean of their positions.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Mann–Whitney U test with midranks for ties; two-sided.
///
/// The statistic is U for sample `a`, so it equals `n_a * n_b / 2` when
/// neither sample dominates. The direction names the stochastically larger
/// group.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult> {
    mann_whitney_u_with(a, b, MwuMethod::Auto)
}

pub fn mann_whitney_u_with(a: &[f64], b: &[f64], method: MwuMethod) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::SampleTooSmall(
            "Mann-Whitney U needs non-empty samples".into(),
        ));
    }
    check_finite(a, "a")?;
    check_finite(b, "b")?;
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..na].iter().sum();
    let nf = (na as f64, nb as f64);
    let u = rank_sum_a - nf.0 * (nf.0 + 1.0) / 2.0;
    let mean = nf.0 * nf.1 / 2.0;

    let exact = match method {
        MwuMethod::Exact => true,
        MwuMethod::Normal => false,
        MwuMethod::Auto => na * nb <= EXACT_MWU_LIMIT,
    };
    let p_value = if exact {
        exact_mwu_p(&ranks, na)
    } else {
        normal_mwu_p(&pooled, u, na, nb)
    };
    Ok(TestResult {
        statistic: u,
        df: None,
        p_value,
        direction: direction_of(u - mean),
    })
}

/// Normal approximation with tie-corrected variance and continuity
/// correction.
fn normal_mwu_p(pooled: &[f64], u: f64, na: usize, nb: usize) -> f64 {
    let (naf, nbf) = (na as f64, nb as f64);
    let n = naf + nbf;
    let mut sorted = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
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
    let variance = naf * nbf / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if !(variance > 0.0) {
        return 1.0;
    }
    let deviation = ((u - naf * nbf / 2.0).abs() - 0.5).max(0.0);
    let z = deviation / variance.sqrt();
    libm::erfc(z / SQRT_2).min(1.0)
}

/// Exact permutation p-value: the share of all ways to choose `na` of the
/// pooled ranks whose rank sum is at least as far from its mean as observed.
/// Ranks are doubled so that midranks become integers.
fn exact_mwu_p(ranks: &[f64], na: usize) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let observed: usize = doubled[..na].iter().sum();
    let max_sum: usize = doubled.iter().sum();
    // ways[k][s]: number of k-subsets with doubled rank sum s.
    let mut ways = vec![vec![0.0f64; max_sum + 1]; na + 1];
    ways[0][0] = 1.0;
    for &r in &doubled {
        for k in (1..=na).rev() {
            let (lower, upper) = ways.split_at_mut(k);
            let prev = &lower[k - 1];
            let cur = &mut upper[0];
            for s in (r..=max_sum).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let n = ranks.len();
    // Expected doubled rank sum of an na-subset.
    let centre = (na * (n + 1)) as i64;
    let dist = |s: usize| (s as i64 - centre).abs();
    let observed_dist = dist(observed);
    let total: f64 = ways[na].iter().sum();
    let extreme: f64 = ways[na]
        .iter()
        .enumerate()
        .filter(|&(s, _)| dist(s) >= observed_dist)
        .map(|(_, w)| w)
        .sum();
    (extreme / total).min(1.0)
}

/// Items whose count reaches the nearest-rank `q`-quantile of all counts
/// (the `ceil(q * n)`-th smallest). Never empty for non-empty input.
pub fn percentile_cutoff<K: Ord + Clone>(
    counts: impl IntoIterator<Item = (K, u64)>,
    q: f64,
) -> BTreeSet<K> {
    let items: Vec<(K, u64)> = counts.into_iter().collect();
    if items.is_empty() {
        return BTreeSet::new();
    }
    let mut sorted: Vec<u64> = items.iter().map(|(_, c)| *c).collect();
    sorted.sort_unstable();
    let n = sorted.len();
    let rank = ((q.clamp(0.0, 1.0) * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    let threshold = sorted[rank - 1];
    items
        .into_iter()
        .filter(|(_, c)| *c >= threshold)
        .map(|(k, _)| k)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welch_reference_values() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 4.0, 6.0, 8.0, 10.0];
        let r = welch_t_test(&a, &b).unwrap();
        assert!((r.statistic - -1.897367).abs() < 1e-5, "{}", r.statistic);
        assert!((r.df.unwrap() - 5.882353).abs() < 1e-5);
        assert_eq!(r.direction, Direction::GroupB);
        let s = welch_t_test(&b, &a).unwrap();
        assert_eq!(s.statistic, -r.statistic);
        assert!((s.p_value - r.p_value).abs() < 1e-15);
    }

    #[test]
    fn welch_identical_and_degenerate() {
        let a = [3.0, 1.0, 4.0, 1.0, 5.0];
        let r = welch_t_test(&a, &a).unwrap();
        assert_eq!((r.statistic, r.p_value, r.direction), (0.0, 1.0, Direction::None));
        let c = welch_t_test(&[2.0, 2.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!((c.statistic, c.p_value, c.direction), (0.0, 1.0, Direction::None));
        let d = welch_t_test(&[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!((d.p_value, d.direction), (0.0, Direction::GroupA));
        assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mwu_small_exact() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.direction, Direction::GroupB);

        let r = mann_whitney_u(&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0]).unwrap();
        assert_eq!(r.statistic, 4.5);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.direction, Direction::None);
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
    }

    #[test]
    fn mwu_rank_invariance() {
        let a: Vec<f64> = (0..20).map(|i| (i * 7 % 13) as f64).collect();
        let b: Vec<f64> = (0..15).map(|i| (i * 5 % 11) as f64 + 0.5).collect();
        let r1 = mann_whitney_u(&a, &b).unwrap();
        let scale = |v: &[f64]| v.iter().map(|x| x * 3.5).collect::<Vec<_>>();
        let r2 = mann_whitney_u(&scale(&a), &scale(&b)).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn mwu_large_samples_use_normal_branch() {
        let a: Vec<f64> = (0..40).map(f64::from).collect();
        let b: Vec<f64> = (20..60).map(f64::from).collect();
        let auto = mann_whitney_u(&a, &b).unwrap();
        let normal = mann_whitney_u_with(&a, &b, MwuMethod::Normal).unwrap();
        assert_eq!(auto, normal);
        assert!(auto.p_value < 1e-3);
    }

    #[test]
    fn t_cdf_values() {
        assert_eq!(student_t_cdf(0.0, 3.0).unwrap(), 0.5);
        let expected = 0.5 + 1f64.atan() / std::f64::consts::PI;
        assert!((student_t_cdf(1.0, 1.0).unwrap() - expected).abs() < 1e-12);
        assert!(student_t_cdf(1.0, 0.0).is_err());
        assert!(student_t_cdf(1.0, -2.0).is_err());
        for &(t, df) in &[(0.3, 2.5), (-1.7, 9.0), (4.2, 1.5), (12.0, 40.0)] {
            let sum = student_t_cdf(t, df).unwrap() + student_t_cdf(-t, df).unwrap();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn t_cdf_approaches_normal() {
        for i in 0..=80 {
            let t = -4.0 + i as f64 * 0.1;
            let diff = (student_t_cdf(t, 1e6).unwrap() - normal_cdf(t)).abs();
            assert!(diff <= 1e-4, "t={t} diff={diff}");
        }
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.959964) - 0.975).abs() < 1e-5);
        for z in [0.1, 0.7, 1.3, 2.9, 5.0] {
            assert!((normal_cdf(-z) - (1.0 - normal_cdf(z))).abs() < 1e-15);
        }
    }

    #[test]
    fn percentile_examples() {
        let counts = (1..=100u64).map(|c| (c, c));
        assert_eq!(percentile_cutoff(counts, 0.99), BTreeSet::from([99, 100]));
        let flat = (0..10).map(|i| (i, 4u64));
        assert_eq!(percentile_cutoff(flat, 0.99).len(), 10);
        assert_eq!(percentile_cutoff([("only", 3u64)], 0.99), BTreeSet::from(["only"]));
    }

    #[test]
    fn midranks_handle_ties() {
        assert_eq!(midranks(&[1.0, 2.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
    }
}
