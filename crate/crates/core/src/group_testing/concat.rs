//! Random concatenated codes `C_id ∘ C_r`.
//!
//! Each column draws an outer codeword of `d` symbols uniformly from `[q]`,
//! `q = 4k`; the identity inner code turns symbol `s` of block `b` into a one
//! at row `b·q + s`. Codewords are a keyed function of `(column, block)`, so
//! column universes far larger than memory are fine.

use crate::error::{Error, Result};
use crate::rng::Seed;
use crate::sensing::BinaryTestMatrix;

/// Largest column universe [`ConcatCodeMatrix::to_binary`] will materialize.
pub const MATERIALIZE_LIMIT: u64 = 1 << 22;

/// How many outer-code blocks `d` to use.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DRule {
    /// `⌈c_d·(k·log₂max(k,2) + log₂max(log_k n, 2))⌉`, the block count that
    /// makes the union bound over all recursion nodes go through.
    ProofConsistent {
        c_d: f64,
    },
    /// `⌈5·log₂max(k,2)⌉ + ⌈log₂(log_k n)/k⌉` as printed alongside the
    /// construction.
    Stated,
    /// For-all rule: per-block containment probability 1/4, union bound over
    /// all `C(n,k)²` pairs, overall failure below `2^-failure_bits`.
    ForAll {
        failure_bits: f64,
    },
    Fixed(usize),
}

impl Default for DRule {
    fn default() -> Self {
        DRule::ProofConsistent { c_d: 5.0 }
    }
}

fn log_base(k: usize, n: f64) -> f64 {
    n.log2() / (k.max(2) as f64).log2()
}

impl DRule {
    pub fn blocks(&self, k: usize, n: f64) -> usize {
        let k2 = k.max(2) as f64;
        let d = match *self {
            DRule::ProofConsistent { c_d } => (c_d * (k as f64 * k2.log2() + log_base(k, n).max(2.0).log2())).ceil(),
            DRule::Stated => (5.0 * k2.log2()).ceil() + (log_base(k, n).max(1.0).log2() / k as f64).ceil(),
            DRule::ForAll { failure_bits } => {
                let pairs_bits = 2.0 * log2_binomial(n, k);
                ((pairs_bits + failure_bits) / 2.0).ceil()
            }
            DRule::Fixed(d) => d as f64,
        };
        (d as usize).max(1)
    }
}

fn log2_binomial(n: f64, k: usize) -> f64 {
    (0..k).map(|i| ((n - i as f64) / (i + 1) as f64).max(1.0).log2()).sum()
}

/// `(q·d) × m_cols` binary matrix of the concatenated code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcatCodeMatrix {
    m_cols: u64,
    q: usize,
    d: usize,
    seed: Seed,
}

impl ConcatCodeMatrix {
    pub fn build(m_cols: u64, k: usize, d: usize, seed: Seed) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(Error::InvalidConfig(format!(
                "concatenated code needs k ≥ 1 and d ≥ 1 (k = {k}, d = {d})"
            )));
        }
        Ok(ConcatCodeMatrix {
            m_cols,
            q: 4 * k,
            d,
            seed,
        })
    }

    pub fn m_cols(&self) -> u64 {
        self.m_cols
    }

    /// Alphabet size `q = 4k`.
    pub fn q(&self) -> usize {
        self.q
    }

    /// Outer code length.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rows(&self) -> usize {
        self.q * self.d
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    /// Outer symbol of `column` in `block`.
    #[inline]
    pub fn symbol(&self, column: u64, block: usize) -> usize {
        crate::rng::below(self.seed.u64_at2(column, block as u64), self.q)
    }

    /// The row holding the one of `column` inside `block`.
    #[inline]
    pub fn row_of(&self, column: u64, block: usize) -> usize {
        block * self.q + self.symbol(column, block)
    }

    pub fn codeword(&self, column: u64) -> Vec<usize> {
        (0..self.d).map(|b| self.symbol(column, b)).collect()
    }

    /// Rows of `column`, one per block, increasing.
    pub fn column_rows(&self, column: u64) -> impl Iterator<Item = usize> + '_ {
        (0..self.d).map(move |b| self.row_of(column, b))
    }

    /// Materialized matrix over the first `m_cols` columns.
    pub fn to_binary(&self) -> Result<BinaryTestMatrix> {
        self.restrict_to(&(0..self.m_cols).collect::<Vec<_>>())
    }

    /// Materialized matrix over the listed columns, in the given order.
    pub fn restrict_to(&self, columns: &[u64]) -> Result<BinaryTestMatrix> {
        if columns.len() as u64 > MATERIALIZE_LIMIT {
            return Err(Error::InvalidConfig(format!(
                "refusing to materialize {} columns (limit {MATERIALIZE_LIMIT})",
                columns.len()
            )));
        }
        let supports = columns
            .iter()
            .map(|&c| {
                if c >= self.m_cols {
                    return Err(Error::DimensionMismatch {
                        expected: self.m_cols as usize,
                        got: c as usize + 1,
                        context: "concatenated code column",
                    });
                }
                Ok(self.column_rows(c).collect())
            })
            .collect::<Result<Vec<Vec<usize>>>>()?;
        BinaryTestMatrix::from_column_supports(self.rows(), supports)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group_testing::is_list_disjunct;
    use rand::seq::index::sample;

    #[test]
    fn small_structure() {
        let c = ConcatCodeMatrix::build(3, 1, 2, Seed::new(4)).unwrap();
        let m = c.to_binary().unwrap();
        assert_eq!((m.rows(), m.cols()), (8, 3));
        for j in 0..3 {
            let col = m.column(j);
            assert_eq!(col.len(), 2);
            assert!(col[0] < 4 && (4..8).contains(&col[1]));
        }
    }

    #[test]
    fn column_weight_is_d_and_table_matches_rows() {
        for seed in 0..5 {
            let c = ConcatCodeMatrix::build(50, 3, 7, Seed::new(seed)).unwrap();
            let m = c.to_binary().unwrap();
            for j in 0..50 {
                assert_eq!(m.column(j).len(), 7);
                let word = c.codeword(j as u64);
                for (b, &s) in word.iter().enumerate() {
                    assert!(m.get(b * c.q() + s, j));
                }
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = ConcatCodeMatrix::build(20, 2, 5, Seed::new(1)).unwrap();
        let b = ConcatCodeMatrix::build(20, 2, 5, Seed::new(1)).unwrap();
        let c = ConcatCodeMatrix::build(20, 2, 5, Seed::new(2)).unwrap();
        assert_eq!(a.to_binary().unwrap(), b.to_binary().unwrap());
        assert_ne!(a.to_binary().unwrap(), c.to_binary().unwrap());
    }

    #[test]
    fn random_column_subsets_are_usually_list_disjunct() {
        let mut ok = 0;
        for seed in 0..200u64 {
            let c = ConcatCodeMatrix::build(64, 2, 12, Seed::new(seed)).unwrap();
            let mut rng = Seed::new(10_000 + seed).rng();
            let cols: Vec<u64> = sample(&mut rng, 64, 16).into_iter().map(|c| c as u64).collect();
            let m = c.restrict_to(&cols).unwrap();
            if is_list_disjunct(&m, 2, 2).unwrap() {
                ok += 1;
            }
        }
        assert!(ok as f64 / 200.0 >= 0.9, "{ok}/200");
    }

    #[test]
    fn d_rules() {
        // k = 3, n = 3^8: 5·(3·log₂3 + log₂8) = 38.77…
        assert_eq!(DRule::default().blocks(3, 6561.0), 39);
        assert_eq!(DRule::Fixed(4).blocks(3, 6561.0), 4);
        // ⌈5·log₂3⌉ + ⌈log₂8 / 3⌉ = 8 + 1
        assert_eq!(DRule::Stated.blocks(3, 6561.0), 9);
        // C(64,2) = 2016: ⌈(2·log₂2016 + 10)/2⌉ = 16
        assert_eq!(DRule::ForAll { failure_bits: 10.0 }.blocks(2, 64.0), 16);
        assert!(ConcatCodeMatrix::build(4, 0, 1, Seed::new(0)).is_err());
    }
}
