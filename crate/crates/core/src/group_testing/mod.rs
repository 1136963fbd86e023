//! Non-adaptive group testing: codes, disjunctness oracles and decoders.
//!
//! A test matrix `M` is applied to an unknown set of defective items with
//! boolean-OR semantics: test `i` is positive iff row `i` touches a defective.
//! [`naive_decode`] keeps every item that never appears in a negative test.
//! It returns the defective set exactly on `k`-disjunct matrices and a
//! superset with fewer than `l` extra items on `(k, l)`-list-disjunct ones.

mod concat;
mod kautz;
mod modified;
mod recursive;

pub use concat::{ConcatCodeMatrix, DRule};
pub use kautz::{build_kautz_singleton, build_kautz_singleton_with_q, KautzSingleton};
pub use modified::{
    gaussian_mixer, modified_decode, tensor_measure, vandermonde, zero_test_outcomes, VANDERMONDE_WARN_K,
};
pub use recursive::{ChildKind, GtNode, RecursiveDecode, RecursiveGTMatrix};

use itertools::Itertools;

use crate::error::{check_dim, Error, Result};
use crate::sensing::BinaryTestMatrix;

/// Default cap on the number of cases the exhaustive oracles may visit.
pub const DEFAULT_ORACLE_BUDGET: u128 = 500_000_000;

/// Positive/negative result of every test.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TestOutcomeVector {
    positive: Vec<bool>,
}

impl TestOutcomeVector {
    pub fn new(positive: Vec<bool>) -> Self {
        TestOutcomeVector { positive }
    }

    /// Boolean product `M ∨ 1_support`.
    pub fn from_support(m: &BinaryTestMatrix, support: &[usize]) -> Result<Self> {
        let mut positive = vec![false; m.rows()];
        for &j in support {
            if j >= m.cols() {
                return Err(Error::DimensionMismatch {
                    expected: m.cols(),
                    got: j + 1,
                    context: "defective index",
                });
            }
            for &i in m.column(j) {
                positive[i] = true;
            }
        }
        Ok(TestOutcomeVector { positive })
    }

    pub fn len(&self) -> usize {
        self.positive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positive.is_empty()
    }

    #[inline]
    pub fn is_positive(&self, i: usize) -> bool {
        self.positive[i]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.positive
    }
}

/// Items that appear in no negative test, in increasing order.
pub fn naive_decode(m: &BinaryTestMatrix, outcomes: &TestOutcomeVector) -> Result<Vec<usize>> {
    check_dim(m.rows(), outcomes.len(), "outcome vector length")?;
    Ok((0..m.cols())
        .filter(|&j| m.column(j).iter().all(|&i| outcomes.is_positive(i)))
        .collect())
}

fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    (0..r).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn check_budget(required: u128, budget: u128) -> Result<()> {
    if required > budget {
        Err(Error::BudgetExceeded { required, budget })
    } else {
        Ok(())
    }
}

fn union_of(bitsets: &[Vec<u64>], set: &[usize], words: usize) -> Vec<u64> {
    let mut u = vec![0u64; words];
    for &j in set {
        for (w, b) in u.iter_mut().zip(&bitsets[j]) {
            *w |= b;
        }
    }
    u
}

fn escapes(column: &[u64], union: &[u64]) -> bool {
    column.iter().zip(union).any(|(c, u)| c & !u != 0)
}

/// Exhaustive `k`-disjunctness check: for every set `S` of at most `k` columns
/// and every column `j ∉ S`, some row contains `j` and misses all of `S`.
pub fn is_disjunct(m: &BinaryTestMatrix, k: usize) -> Result<bool> {
    is_disjunct_with_budget(m, k, DEFAULT_ORACLE_BUDGET)
}

pub fn is_disjunct_with_budget(m: &BinaryTestMatrix, k: usize, budget: u128) -> Result<bool> {
    if k == 0 {
        return Err(Error::InvalidConfig("disjunctness order must be at least 1".into()));
    }
    let n = m.cols();
    let required: u128 = (0..=k.min(n)).map(|s| binomial(n, s) * (n - s) as u128).sum();
    check_budget(required, budget)?;
    let bits = m.column_bitsets();
    let words = bits.first().map_or(1, Vec::len);
    for s in 0..=k.min(n) {
        for set in (0..n).combinations(s) {
            let u = union_of(&bits, &set, words);
            let covered = (0..n).filter(|j| !set.contains(j)).any(|j| !escapes(&bits[j], &u));
            if covered {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Exhaustive `(k, l)`-list-disjunctness check: for every defective set `D`
/// with `|D| ≤ k` and every `F` disjoint from `D` with `|F| = l`, some row
/// misses all of `D` and contains a member of `F`. Under this property naive
/// decoding returns `D` plus at most `l - 1` extra items.
pub fn is_list_disjunct(m: &BinaryTestMatrix, k: usize, l: usize) -> Result<bool> {
    is_list_disjunct_with_budget(m, k, l, DEFAULT_ORACLE_BUDGET)
}

pub fn is_list_disjunct_with_budget(m: &BinaryTestMatrix, k: usize, l: usize, budget: u128) -> Result<bool> {
    if k == 0 || l == 0 {
        return Err(Error::InvalidConfig(
            "list-disjunct parameters must be at least 1".into(),
        ));
    }
    let n = m.cols();
    let required: u128 = (0..=k.min(n)).map(|s| binomial(n, s) * binomial(n - s, l)).sum();
    check_budget(required, budget)?;
    let bits = m.column_bitsets();
    let words = bits.first().map_or(1, Vec::len);
    for s in 0..=k.min(n) {
        for defective in (0..n).combinations(s) {
            let u = union_of(&bits, &defective, words);
            let mut in_d = vec![false; n];
            for &j in &defective {
                in_d[j] = true;
            }
            let separable: Vec<bool> = (0..n).map(|j| escapes(&bits[j], &u)).collect();
            let others: Vec<usize> = (0..n).filter(|&j| !in_d[j]).collect();
            for f in others.iter().copied().combinations(l) {
                if !f.iter().any(|&j| separable[j]) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use rand::Rng;

    fn outcomes(v: &[u8]) -> TestOutcomeVector {
        TestOutcomeVector::new(v.iter().map(|&b| b == 1).collect())
    }

    #[test]
    fn naive_decode_on_identity() {
        let m = BinaryTestMatrix::identity(3);
        assert_eq!(naive_decode(&m, &outcomes(&[0, 1, 0])).unwrap(), vec![1]);
    }

    #[test]
    fn naive_decode_without_negative_tests() {
        let m = BinaryTestMatrix::all_ones(1, 5);
        assert_eq!(naive_decode(&m, &outcomes(&[1])).unwrap(), vec![0, 1, 2, 3, 4]);
        assert!(naive_decode(&m, &outcomes(&[1, 0])).is_err());
    }

    fn random_binary(rows: usize, cols: usize, p: f64, seed: u64) -> BinaryTestMatrix {
        let mut rng = Seed::new(seed).rng();
        let dense: Vec<Vec<u8>> = (0..rows)
            .map(|_| (0..cols).map(|_| u8::from(rng.random_bool(p))).collect())
            .collect();
        BinaryTestMatrix::from_dense(&dense).unwrap()
    }

    #[test]
    fn singleton_recovery_on_random_one_disjunct_matrix() {
        // Draw 10×12 matrices until one passes the oracle, then recover every
        // singleton, in particular e_7.
        let m = (0..)
            .map(|s| random_binary(10, 12, 0.5, s))
            .find(|m| is_disjunct(m, 1).unwrap())
            .unwrap();
        for j in 0..12 {
            let out = TestOutcomeVector::from_support(&m, &[j]).unwrap();
            assert_eq!(naive_decode(&m, &out).unwrap(), vec![j]);
        }
        let out = TestOutcomeVector::from_support(&m, &[7]).unwrap();
        assert_eq!(naive_decode(&m, &out).unwrap(), vec![7]);
    }

    #[test]
    fn identity_is_disjunct_up_to_n_minus_one() {
        for n in 2..7 {
            let m = BinaryTestMatrix::identity(n);
            for k in 1..n {
                assert!(is_disjunct(&m, k).unwrap());
            }
        }
    }

    #[test]
    fn all_ones_row_is_not_disjunct() {
        for n in 2..6 {
            assert!(!is_disjunct(&BinaryTestMatrix::all_ones(1, n), 1).unwrap());
        }
    }

    #[test]
    fn disjunct_matrices_are_list_disjunct() {
        let m = BinaryTestMatrix::identity(4);
        for k in 1..4 {
            for l in 1..3 {
                assert!(is_list_disjunct(&m, k, l).unwrap());
            }
        }
    }

    #[test]
    fn zero_matrix_is_never_list_disjunct() {
        let m = BinaryTestMatrix::from_column_supports(3, vec![Vec::new(); 5]).unwrap();
        for k in 1..3 {
            for l in 1..3 {
                assert!(!is_list_disjunct(&m, k, l).unwrap());
            }
        }
    }

    /// Independent check: list-disjunctness holds iff naive decoding leaves
    /// fewer than `l` false positives for every defective set of size `≤ k`.
    fn list_disjunct_by_decoding(m: &BinaryTestMatrix, k: usize, l: usize) -> bool {
        (0..=k).all(|s| {
            (0..m.cols()).combinations(s).all(|d| {
                let out = TestOutcomeVector::from_support(m, &d).unwrap();
                naive_decode(m, &out).unwrap().len() < d.len() + l
            })
        })
    }

    #[test]
    fn random_bernoulli_list_disjunct_matches_decoding_oracle() {
        for seed in 0..10 {
            let m = random_binary(20, 16, 1.0 / 3.0, seed);
            assert_eq!(
                is_list_disjunct(&m, 2, 2).unwrap(),
                list_disjunct_by_decoding(&m, 2, 2),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn oracles_respect_budget() {
        let m = BinaryTestMatrix::identity(30);
        assert!(matches!(
            is_disjunct_with_budget(&m, 3, 1000),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(is_list_disjunct_with_budget(&m, 3, 3, 1000).is_err());
        assert!(is_disjunct(&m, 0).is_err());
    }
}
