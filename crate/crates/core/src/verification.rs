//! Combinatorial identities behind the calibration proofs, checked by
//! exhaustive enumeration, plus literal re-derivations of both p-values
//! that share no code with the analysis paths.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::substream;

/// `I_{k,tau}`: the positions of `[1, T]` kept when `tau` consecutive
/// entries are dropped after position `k` (wrapping around the end).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    members: Vec<usize>,
    pub k: usize,
    pub tau: usize,
    pub len: usize,
}

impl IndexSet {
    /// Sorted 1-based members.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// `{1..k, k+tau+1..T}` when `k <= T - tau - 1`, else `{k-T+tau+1..k}`.
pub fn index_set(k: usize, tau: usize, len: usize) -> Result<IndexSet> {
    if k == 0 || k > len {
        return Err(Error::InvalidParameter(format!("k={k} outside [1, {len}]")));
    }
    if tau >= len {
        return Err(Error::InvalidParameter(format!(
            "tau={tau} outside [0, {}]",
            len - 1
        )));
    }
    let members = if k + tau < len {
        (1..=k).chain(k + tau + 1..=len).collect()
    } else {
        (k + tau + 1 - len..=k).collect()
    };
    Ok(IndexSet {
        members,
        k,
        tau,
        len,
    })
}

/// Number of `(k, l)` with `(i, j) in I_{k,tau} x I_{l,tau}`, for every `(i, j)`,
/// row-major. The double sum over `(k, l)` factors into per-coordinate counts.
pub fn coverage_counts(len: usize, tau: usize) -> Result<Vec<u64>> {
    let mut per_index = vec![0u64; len + 1];
    for k in 1..=len {
        for &i in index_set(k, tau, len)?.members() {
            per_index[i] += 1;
        }
    }
    let mut out = Vec::with_capacity(len * len);
    for i in 1..=len {
        for j in 1..=len {
            out.push(per_index[i] * per_index[j]);
        }
    }
    Ok(out)
}

/// True iff every `(i, j)` is covered exactly `(T - tau)^2` times.
pub fn counting_identity_check(len: usize, tau: usize) -> bool {
    let target = ((len - tau.min(len)) as u64).pow(2);
    coverage_counts(len, tau).is_ok_and(|c| c.iter().all(|&n| n == target))
}

/// Upper `a`-quantile of the pairwise grid `psi*(x_i, y_j)`, where a missing
/// entry on either side contributes `-inf`:
/// the largest `q` with `#{psi* >= q} / (|x| |y|) >= a`.
///
/// The count is a step function of `q` that only jumps at achieved values,
/// so the maximum is searched over the finite grid values and `-inf`.
pub fn masked_quantile(
    x: &[Option<f64>],
    y: &[Option<f64>],
    a: f64,
    psi: impl Fn(f64, f64) -> f64,
) -> Result<f64> {
    if a == 0.0 {
        return Err(Error::QuantileAtZero);
    }
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::InvalidParameter(format!("quantile level {a} outside (0, 1]")));
    }
    let total = (x.len() * y.len()) as f64;
    let mut finite: Vec<f64> = Vec::with_capacity(x.len() * y.len());
    for xi in x.iter().flatten() {
        for yj in y.iter().flatten() {
            let v = psi(*xi, *yj);
            if v.is_nan() {
                return Err(Error::InvalidParameter("pairwise statistic produced NaN".into()));
            }
            if v > f64::NEG_INFINITY {
                finite.push(v);
            }
        }
    }
    finite.sort_by(|p, q| q.total_cmp(p));
    let mut start = 0;
    while start < finite.len() {
        let v = finite[start];
        let mut end = start;
        while end < finite.len() && finite[end] == v {
            end += 1;
        }
        if end as f64 / total >= a {
            return Ok(v);
        }
        start = end;
    }
    Ok(f64::NEG_INFINITY)
}

/// Left side of the counting lemma:
/// `(1/T^2) sum_{k,l} 1{ Q_b(x, y) > Q_a(x^k, y^l) }`, where `x^k` keeps only
/// the entries in `I_{k,tau}`.
pub fn lemma_counting_fraction(
    x: &[f64],
    y: &[f64],
    a: f64,
    b: f64,
    tau: usize,
    psi: impl Fn(f64, f64) -> f64 + Copy,
) -> Result<f64> {
    if a.is_nan() || b.is_nan() || a >= b {
        return Err(Error::InvalidParameter(format!("need a < b, got a={a}, b={b}")));
    }
    let len = x.len();
    if y.len() != len {
        return Err(Error::LengthMismatch { x: len, y: y.len() });
    }
    if len == 0 {
        return Err(Error::EmptyStream);
    }
    let full = |v: &[f64]| v.iter().copied().map(Some).collect::<Vec<_>>();
    let q_b = masked_quantile(&full(x), &full(y), b, psi)?;
    let masked = |v: &[f64], k: usize| -> Result<Vec<Option<f64>>> {
        let set = index_set(k, tau, len)?;
        Ok((1..=len)
            .map(|i| set.contains(i).then_some(v[i - 1]))
            .collect())
    };
    let xs: Vec<_> = (1..=len).map(|k| masked(x, k)).collect::<Result<_>>()?;
    let ys: Vec<_> = (1..=len).map(|l| masked(y, l)).collect::<Result<_>>()?;
    let mut count = 0u64;
    for xk in &xs {
        for yl in &ys {
            if q_b > masked_quantile(xk, yl, a, psi)? {
                count += 1;
            }
        }
    }
    Ok(count as f64 / (len * len) as f64)
}

/// Checks both clauses of the counting lemma: the fraction is at most
/// `b/(b-a) * 2 tau / T`, and exactly zero once `b >= a + 2 tau / T`.
pub fn lemma_counting_bound_check(
    x: &[f64],
    y: &[f64],
    a: f64,
    b: f64,
    tau: usize,
    psi: impl Fn(f64, f64) -> f64 + Copy,
) -> Result<bool> {
    let lhs = lemma_counting_fraction(x, y, a, b, tau, psi)?;
    let slack = 2.0 * tau as f64 / x.len() as f64;
    let bound = b / (b - a) * slack;
    let zero_clause = b < a + slack || lhs == 0.0;
    Ok(lhs <= bound && zero_clause)
}

/// Event p-value by the definition: windows `{s..s+delta}` built index by
/// index, every `(i, j)` on the `(T - delta)^2` grid compared with the window
/// at `t`. Returns `(exceed, total)`.
pub fn naive_event_counts(
    x: &[f64],
    y: &[f64],
    psi: impl Fn(&[f64], &[f64]) -> f64,
    delta: usize,
    t: usize,
) -> (u64, u64) {
    let n = x.len();
    assert!(t >= 1 && t + delta <= n, "window outside stream");
    let win = |v: &[f64], s: usize| -> Vec<f64> { (s..=s + delta).map(|p| v[p - 1]).collect() };
    let observed = psi(&win(x, t), &win(y, t));
    let m = n - delta;
    let mut exceed = 0u64;
    for i in 1..=m {
        let xi = win(x, i);
        for j in 1..=m {
            if psi(&xi, &win(y, j)) >= observed {
                exceed += 1;
            }
        }
    }
    (exceed, (m * m) as u64)
}

/// Synchronicity p-value by the definition: shift `x_[i]` has entry
/// `x_{((i - 1 + s - 1) mod T) + 1}` at position `s`. Returns `(exceed, total)`.
pub fn naive_sync_counts(
    x: &[f64],
    y: &[f64],
    psi: impl Fn(&[f64], &[f64]) -> f64,
    epsilon: f64,
) -> (u64, u64) {
    let n = x.len();
    let shift = |v: &[f64], i: usize| -> Vec<f64> { (1..=n).map(|s| v[(i - 1 + s - 1) % n]).collect() };
    let observed = psi(x, y);
    let mut exceed = 0u64;
    for i in 1..=n {
        let xi = shift(x, i);
        for j in 1..=n {
            if psi(&xi, &shift(y, j)) + epsilon >= observed {
                exceed += 1;
            }
        }
    }
    (exceed, (n * n) as u64)
}

/// Outcome of a batch of identity checks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuiteSummary {
    pub checked: usize,
    pub failures: Vec<String>,
}

impl SuiteSummary {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Counting identity for every `T <= t_max` and every `tau < T`.
pub fn run_counting_suite(t_max: usize) -> SuiteSummary {
    let mut summary = SuiteSummary::default();
    for len in 1..=t_max {
        for tau in 0..len {
            summary.checked += 1;
            if !counting_identity_check(len, tau) {
                summary.failures.push(format!("T={len} tau={tau}"));
            }
        }
    }
    summary
}

/// Counting lemma on seeded random instances: `T` in `4..=16`, random
/// `a < b`, random `tau`, and streams that alternate between continuous
/// values and small integers (to exercise ties). Instances alternate between
/// the pairwise sum and product.
pub fn run_lemma_suite(instances: usize, seed: u64) -> Result<SuiteSummary> {
    let mut summary = SuiteSummary::default();
    for index in 0..instances {
        let mut rng = substream(seed, index as u64);
        let len = rng.random_range(4..=16usize);
        let tau = rng.random_range(0..len);
        let b: f64 = 1.0 - rng.random::<f64>();
        let mut a = b * rng.random_range(0.001..1.0);
        if a >= b {
            a = 0.5 * b;
        }
        let ties = index % 2 == 1;
        let draw = |rng: &mut crate::rng::SimRng| -> Vec<f64> {
            (0..len)
                .map(|_| {
                    if ties {
                        f64::from(rng.random_range(0..4u8))
                    } else {
                        rng.random_range(-1.0..1.0)
                    }
                })
                .collect()
        };
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let ok = if index % 4 < 2 {
            lemma_counting_bound_check(&x, &y, a, b, tau, |p, q| p + q)?
        } else {
            lemma_counting_bound_check(&x, &y, a, b, tau, |p, q| p * q)?
        };
        summary.checked += 1;
        if !ok {
            summary
                .failures
                .push(format!("instance {index}: T={len} tau={tau} a={a} b={b}"));
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(k: usize, tau: usize, len: usize) -> Vec<usize> {
        index_set(k, tau, len).unwrap().members().to_vec()
    }

    #[test]
    fn index_set_examples() {
        assert_eq!(set(2, 2, 6), vec![1, 2, 5, 6]);
        assert_eq!(set(5, 2, 6), vec![2, 3, 4, 5]);
        for k in 1..6 {
            assert_eq!(set(k, 0, 6), (1..=6).collect::<Vec<_>>());
        }
        assert!(index_set(0, 1, 6).is_err());
        assert!(index_set(7, 1, 6).is_err());
        assert!(index_set(3, 6, 6).is_err());
    }

    #[test]
    fn index_set_sizes_exhaustive() {
        for len in 1..=64 {
            for tau in 0..len {
                for k in 1..=len {
                    let s = index_set(k, tau, len).unwrap();
                    assert_eq!(s.size(), len - tau, "T={len} k={k} tau={tau}");
                    assert!(s.members().windows(2).all(|w| w[0] < w[1]));
                }
            }
        }
    }

    /// Literal quadruple loop over `(k, l, i, j)`.
    fn brute_coverage(len: usize, tau: usize) -> Vec<u64> {
        let mut out = vec![0u64; len * len];
        for k in 1..=len {
            for l in 1..=len {
                let (sk, sl) = (index_set(k, tau, len).unwrap(), index_set(l, tau, len).unwrap());
                for i in 1..=len {
                    for j in 1..=len {
                        if sk.contains(i) && sl.contains(j) {
                            out[(i - 1) * len + (j - 1)] += 1;
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn counting_identity() {
        assert!(coverage_counts(5, 2).unwrap().iter().all(|&c| c == 9));
        assert!(coverage_counts(7, 0).unwrap().iter().all(|&c| c == 49));
        for len in 1..=9 {
            for tau in 0..len {
                assert_eq!(coverage_counts(len, tau).unwrap(), brute_coverage(len, tau));
            }
        }
        let s = run_counting_suite(40);
        assert!(s.passed(), "{:?}", s.failures);
        assert_eq!(s.checked, 40 * 41 / 2);
    }

    #[test]
    fn masked_quantile_examples() {
        let x = [Some(1.0), Some(2.0)];
        let y = [Some(0.0), Some(1.0)];
        let add = |p: f64, q: f64| p + q;
        assert_eq!(masked_quantile(&x, &y, 0.5, add).unwrap(), 2.0);
        assert_eq!(masked_quantile(&x, &y, 0.25, add).unwrap(), 3.0);
        assert_eq!(masked_quantile(&x, &y, 1.0, add).unwrap(), 1.0);
        let none = [None, None];
        assert_eq!(masked_quantile(&none, &y, 0.1, add).unwrap(), f64::NEG_INFINITY);
        assert_eq!(masked_quantile(&none, &none, 1.0, add).unwrap(), f64::NEG_INFINITY);
        let err = masked_quantile(&x, &y, 0.0, add).unwrap_err();
        assert_eq!(err.to_string(), "quantile undefined at a=0");
        // One missing x entry leaves two finite values out of four.
        let partial = [Some(1.0), None];
        assert_eq!(masked_quantile(&partial, &y, 0.5, add).unwrap(), 1.0);
        assert_eq!(masked_quantile(&partial, &y, 0.75, add).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn lemma_examples() {
        let x = [0.3, -0.2, 0.8, 0.1, 0.5, -0.7];
        let y = [0.4, 0.9, -0.1, 0.0, 0.6, -0.3];
        assert_eq!(lemma_counting_fraction(&x, &y, 0.2, 0.9, 1, |p, q| p + q).unwrap(), 0.0);
        for tau in 0..6 {
            assert!(lemma_counting_bound_check(&x, &y, 0.1, 0.3, tau, |p, q| p * q).unwrap());
        }
        assert_eq!(lemma_counting_fraction(&x, &y, 0.1, 0.3, 0, |p, q| p + q).unwrap(), 0.0);
        assert!(lemma_counting_fraction(&x, &y, 0.5, 0.5, 1, |p, q| p + q).is_err());
    }

    #[test]
    fn lemma_suite_passes() {
        let s = run_lemma_suite(500, 2024).unwrap();
        assert!(s.passed(), "{:?}", s.failures);
        assert_eq!(s.checked, 500);
    }

    #[test]
    fn naive_counts_small_example() {
        let sum = |a: &[f64], b: &[f64]| a[0] + b[0];
        let x = [3.0, 1.0, 2.0];
        let y = [2.0, 1.0, 0.0];
        assert_eq!(naive_event_counts(&x, &y, sum, 0, 1), (1, 9));
        assert_eq!(naive_event_counts(&x, &y, sum, 0, 3), (8, 9));
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
        assert_eq!(naive_sync_counts(&[1.0, 0.0], &[1.0, 0.0], dot, 0.0), (2, 4));
        assert_eq!(naive_sync_counts(&[1.0, 0.0], &[0.0, 1.0], dot, 0.0), (4, 4));
    }

    fn masked_stream() -> impl Strategy<Value = Vec<Option<f64>>> {
        proptest::collection::vec(proptest::option::of((0i32..5).prop_map(f64::from)), 1..8)
    }

    proptest! {
        #[test]
        fn quantile_monotone_in_level(x in masked_stream(), y in masked_stream(), a1 in 0.01f64..1.0, a2 in 0.01f64..1.0) {
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            let add = |p: f64, q: f64| p + q;
            prop_assert!(masked_quantile(&x, &y, lo, add).unwrap() >= masked_quantile(&x, &y, hi, add).unwrap());
        }

        #[test]
        fn masking_never_raises_quantile(x in masked_stream(), y in masked_stream(), a in 0.01f64..=1.0, drop in 0usize..8) {
            let mut xm = x.clone();
            let idx = drop % xm.len();
            xm[idx] = None;
            let add = |p: f64, q: f64| p + q;
            prop_assert!(masked_quantile(&xm, &y, a, add).unwrap() <= masked_quantile(&x, &y, a, add).unwrap());
        }
    }
}
