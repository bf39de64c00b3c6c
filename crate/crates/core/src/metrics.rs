//! Tie-aware evaluation metrics.
//!
//! `E_inspect` is the expected 1-based rank of the first faulty element when
//! every tie-group is shuffled uniformly at random. For the first tie-group
//! that holds a faulty element, with `t` members, `t_f` of them faulty and
//! first slot `start`:
//!
//! ```text
//! E_inspect = start + sum_{k=1}^{t - t_f} k * C(t - k - 1, t_f - 1) / C(t, t_f)
//! ```
//!
//! The sum is evaluated exactly over big rationals so that comparisons against
//! `@n` thresholds never suffer from rounding.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::model::Ranking;

/// Expected rank of the first faulty element, held exactly.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EInspect(BigRational);

impl EInspect {
    pub fn from_integer(v: u64) -> Self {
        EInspect(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn from_ratio(numer: u64, denom: u64) -> Self {
        EInspect(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn as_ratio(&self) -> &BigRational {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::INFINITY)
    }

    /// True when the value is at most `n`.
    pub fn within(&self, n: u64) -> bool {
        self.0 <= BigRational::from_integer(BigInt::from(n))
    }
}

impl fmt::Display for EInspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// C(n, r) by the multiplicative formula.
fn binomial(n: u64, r: u64) -> BigUint {
    if r > n {
        return BigUint::zero();
    }
    let r = r.min(n - r);
    let mut acc = BigUint::one();
    for i in 0..r {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Expected extra offset inside a tie-group of `t` elements of which `t_f`
/// are faulty, before the first faulty one is met.
pub fn expected_offset_in_group(t: u64, t_f: u64) -> BigRational {
    assert!(t_f >= 1 && t_f <= t, "need 1 <= t_f <= t");
    if t_f == t {
        return BigRational::zero();
    }
    // C(t-k-1, t_f-1) for k = t-t_f down to 1 walks n = t_f-1 .. t-2 upward,
    // so each binomial follows from the previous one.
    let r = t_f - 1;
    let mut numer = BigUint::zero();
    let mut c = BigUint::one(); // C(r, r)
    for n in r..=t - 2 {
        if n > r {
            c = c * n / (n - r);
        }
        let k = t - n - 1;
        numer += &c * k;
    }
    BigRational::new(BigInt::from(numer), BigInt::from(binomial(t, t_f)))
}

/// Expected rank of the first faulty element.
pub fn e_inspect<E: Clone + Ord>(ranking: &Ranking<E>, faulty: &BTreeSet<E>) -> Result<EInspect> {
    for group in ranking.groups() {
        let t_f = group.elements.iter().filter(|e| faulty.contains(e)).count() as u64;
        if t_f > 0 {
            let start = BigRational::from_integer(BigInt::from(group.start));
            let offset = expected_offset_in_group(group.len() as u64, t_f);
            return Ok(EInspect(start + offset));
        }
    }
    Err(Error::FaultNotRanked)
}

/// Number of values at most `n`.
pub fn e_inspect_at_n(values: &[EInspect], n: u64) -> usize {
    values.iter().filter(|v| v.within(n)).count()
}

/// Fraction of the universe inspected before reaching a faulty element.
pub fn exam<E: Clone + Ord>(
    ranking: &Ranking<E>,
    faulty: &BTreeSet<E>,
    universe_size: usize,
) -> Result<f64> {
    let value = e_inspect(ranking, faulty)?;
    let size = universe_size.max(ranking.len()).max(1);
    let fraction = value.0 / BigRational::from_integer(BigInt::from(size));
    Ok(fraction.to_f64().unwrap_or(1.0).clamp(0.0, 1.0))
}

/// Paired per-fault E_inspect values of two techniques.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationInput {
    pub pairs: Vec<(f64, f64)>,
    pub threshold: u64,
}

impl CorrelationInput {
    pub const DEFAULT_THRESHOLD: u64 = 100;

    pub fn new(pairs: Vec<(f64, f64)>) -> Self {
        CorrelationInput {
            pairs,
            threshold: Self::DEFAULT_THRESHOLD,
        }
    }

    /// Pairs where at least one technique ranks within the threshold.
    pub fn retained(&self) -> Vec<(f64, f64)> {
        let q = self.threshold as f64;
        self.pairs
            .iter()
            .copied()
            .filter(|&(x, y)| x <= q || y <= q)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r2: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Squared Pearson correlation of the retained pairs with its two-sided
/// t-test p-value.
pub fn r_squared(input: &CorrelationInput) -> Result<Correlation> {
    let pairs = input.retained();
    let n = pairs.len();
    if n < 3 {
        return Err(Error::UndefinedCorrelation(format!(
            "{n} pairs retained, need at least 3"
        )));
    }
    let nf = n as f64;
    let mean_x = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in &pairs {
        let (dx, dy) = (x - mean_x, y - mean_y);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    let r2 = ((sxy * sxy) / (sxx * syy)).clamp(0.0, 1.0);
    Ok(Correlation {
        r2,
        p_value: correlation_p_value(r2, n),
        n,
    })
}

fn correlation_p_value(r2: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    if r2 >= 1.0 {
        return 0.0;
    }
    let t = (r2 * df / (1.0 - r2)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    (2.0 * dist.sf(t)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{rank_elements, ScoredList};

    /// Average over every placement of `t_f` faulty elements among `t` slots
    /// of the 1-based offset of the first faulty slot.
    fn brute_force(t: u64, t_f: u64, start: u64) -> BigRational {
        let mut total = BigInt::zero();
        let mut count = BigInt::zero();
        for mask in 0u32..(1 << t) {
            if u64::from(mask.count_ones()) != t_f {
                continue;
            }
            let first = u64::from(mask.trailing_zeros());
            total += BigInt::from(start + first);
            count += 1;
        }
        BigRational::new(total, count)
    }

    fn group_ranking(t: u64, t_f: u64, start: u64) -> (Ranking<u64>, BTreeSet<u64>) {
        // `start - 1` higher-scored clean elements, then the tie-group.
        let mut entries = Vec::new();
        for i in 0..start - 1 {
            entries.push((1000 + i, 10.0 + i as f64));
        }
        for i in 0..t {
            entries.push((i, 1.0));
        }
        let list = ScoredList::new("t", entries).unwrap();
        (rank_elements(&list), (0..t_f).collect())
    }

    #[test]
    fn frozen_oracle_value() {
        assert_eq!(brute_force(4, 2, 1), BigRational::new(5.into(), 3.into()));
    }

    #[test]
    fn closed_form_matches_enumeration() {
        for start in [1, 5] {
            for t in 1..=8 {
                for t_f in 1..=t {
                    let (ranking, faulty) = group_ranking(t, t_f, start);
                    let got = e_inspect(&ranking, &faulty).unwrap();
                    assert_eq!(*got.as_ratio(), brute_force(t, t_f, start), "t={t} t_f={t_f}");
                }
            }
        }
    }

    #[test]
    fn t_f_equal_t_reduces_to_start() {
        let (ranking, faulty) = group_ranking(5, 5, 5);
        assert_eq!(e_inspect(&ranking, &faulty).unwrap(), EInspect::from_integer(5));
    }

    #[test]
    fn single_faulty_reduces_to_average_rank() {
        let (ranking, faulty) = group_ranking(3, 1, 2);
        assert_eq!(e_inspect(&ranking, &faulty).unwrap(), EInspect::from_integer(3));
    }

    #[test]
    fn large_groups_stay_exact() {
        // Expected minimum of a random t_f-subset of 1..=t is (t+1)/(t_f+1).
        let t = 10_000u64;
        let t_f = 37u64;
        let expected = BigRational::new(BigInt::from(t - t_f), BigInt::from(t_f + 1));
        assert_eq!(expected_offset_in_group(t, t_f), expected);
    }

    #[test]
    fn unranked_fault_is_an_error() {
        let (ranking, _) = group_ranking(3, 1, 1);
        let faulty = BTreeSet::from([77u64]);
        assert!(matches!(e_inspect(&ranking, &faulty), Err(Error::FaultNotRanked)));
    }

    #[test]
    fn at_n_counts() {
        let vals = [1, 2, 11].map(EInspect::from_integer);
        assert_eq!(e_inspect_at_n(&vals, 10), 2);
        assert_eq!(e_inspect_at_n(&[], 10), 0);
        assert_eq!(e_inspect_at_n(&[EInspect::from_ratio(5, 3)], 1), 0);
    }

    #[test]
    fn exam_values() {
        let (ranking, faulty) = group_ranking(1, 1, 5);
        assert!((exam(&ranking, &faulty, 100).unwrap() - 0.05).abs() < 1e-15);

        let (ranking, faulty) = group_ranking(1, 1, 1);
        assert_eq!(exam(&ranking, &faulty, 1).unwrap(), 1.0);

        let (ranking, faulty) = group_ranking(4, 4, 1);
        assert_eq!(exam(&ranking, &faulty, 50).unwrap(), 1.0 / 50.0);
    }

    #[test]
    fn perfect_linear_fit() {
        let pairs = (1..=10).map(|x| (x as f64, 2.0 * x as f64 + 1.0)).collect();
        let c = r_squared(&CorrelationInput::new(pairs)).unwrap();
        assert!((c.r2 - 1.0).abs() < 1e-12);
        assert_eq!(c.p_value, 0.0);
    }

    #[test]
    fn self_correlation_is_exactly_one() {
        let pairs = [3.0, 1.0, 4.0, 1.5, 9.0, 2.6].iter().map(|&x| (x, x)).collect();
        assert_eq!(r_squared(&CorrelationInput::new(pairs)).unwrap().r2, 1.0);
    }

    #[test]
    fn threshold_filters_pairs() {
        let input = CorrelationInput {
            pairs: vec![(1.0, 500.0), (500.0, 2.0), (300.0, 400.0), (5.0, 6.0)],
            threshold: 100,
        };
        assert_eq!(input.retained().len(), 3);
    }

    #[test]
    fn degenerate_correlation_errors() {
        let two = CorrelationInput::new(vec![(1.0, 2.0), (2.0, 3.0)]);
        assert!(r_squared(&two).is_err());
        let flat = CorrelationInput::new(vec![(1.0, 2.0), (1.0, 3.0), (1.0, 4.0)]);
        assert!(r_squared(&flat).is_err());
    }

    #[test]
    fn p_value_matches_reference() {
        // r = 0.5 on n = 10: t = sqrt(8/3) on 8 degrees of freedom;
        // two-sided p from the t distribution = 0.14111328125.
        let p = correlation_p_value(0.25, 10);
        assert!((p - 0.141_113_281_25).abs() < 1e-8, "{p}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn earlier_faulty_never_worse(t in 2u64..8, t_f in 1u64..4, extra in 1u64..6) {
                let t_f = t_f.min(t);
                let (ranking, faulty) = group_ranking(t, t_f, 1 + extra);
                let base = e_inspect(&ranking, &faulty).unwrap();
                // Element 1000 sits in an earlier singleton group.
                let mut more = faulty.clone();
                more.insert(1000);
                let better = e_inspect(&ranking, &more).unwrap();
                prop_assert!(better <= base);
            }

            #[test]
            fn at_n_monotone(vals in proptest::collection::vec((1u64..50, 1u64..5), 0..30), n in 1u64..40) {
                let vals: Vec<_> = vals.into_iter().map(|(a, b)| EInspect::from_ratio(a * b, b)).collect();
                prop_assert!(e_inspect_at_n(&vals, n) <= e_inspect_at_n(&vals, n + 1));
            }

            #[test]
            fn r2_symmetric(xs in proptest::collection::vec((0.0f64..200.0, 0.0f64..200.0), 3..40)) {
                let swapped = xs.iter().map(|&(a, b)| (b, a)).collect();
                let a = r_squared(&CorrelationInput::new(xs));
                let b = r_squared(&CorrelationInput::new(swapped));
                match (a, b) {
                    (Ok(a), Ok(b)) => {
                        prop_assert_eq!(a.r2, b.r2);
                        prop_assert!((0.0..=1.0).contains(&a.r2));
                    }
                    (Err(_), Err(_)) => {}
                    _ => prop_assert!(false, "asymmetric failure"),
                }
            }
        }
    }
}
