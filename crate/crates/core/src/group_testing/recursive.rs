//! Recursive two-stage group testing matrix with a `poly(k, log n)` decoder.
//!
//! A node over a universe of `m` columns stacks three blocks: the matrix of its
//! "row" child, which sees column `i` as `i / √m`, the matrix of its "column"
//! child, which sees it as `i mod √m`, and its own concatenated code over all
//! `m` columns. Recursion stops once `m ≤ b²` with `b = max(k, 2)`. The
//! universe is padded to `b^(2^T)`; padded columns carry no signal and are
//! never returned.
//!
//! Decoding runs bottom-up: a node takes the candidate sets of its children,
//! forms all `hi·√m + lo` combinations (at most `4k²` when each child returned
//! at most `2k`), and runs naive decoding restricted to those candidates.

use super::concat::{ConcatCodeMatrix, DRule, MATERIALIZE_LIMIT};
use super::TestOutcomeVector;
use crate::error::{check_dim, Error, Result};
use crate::rng::Seed;
use crate::sensing::BinaryTestMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChildKind {
    /// Keyed on the high digits: `i / split`.
    Row,
    /// Keyed on the low digits: `i mod split`.
    Col,
}

#[derive(Clone, Debug)]
pub struct GtNode {
    pub universe: u64,
    pub depth: usize,
    pub code: ConcatCodeMatrix,
    /// `(row child, column child)` for internal nodes.
    pub children: Option<(usize, usize)>,
    /// Children's universe size `√universe` (0 at leaves).
    pub split: u64,
    pub row_offset: usize,
    /// Steps from the root to this node.
    pub path: Vec<(u64, ChildKind)>,
}

impl GtNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    /// This node's column for global column `i`.
    #[inline]
    pub fn column_of(&self, i: u64) -> u64 {
        self.path.iter().fold(i, |c, &(split, kind)| match kind {
            ChildKind::Row => c / split,
            ChildKind::Col => c % split,
        })
    }
}

#[derive(Clone, Debug)]
pub struct RecursiveGTMatrix {
    n: usize,
    k: usize,
    padded_n: u64,
    d: usize,
    nodes: Vec<GtNode>,
    root: usize,
    total_rows: usize,
}

/// Output of [`RecursiveGTMatrix::decode`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecursiveDecode {
    pub set: Vec<usize>,
    /// Membership checks performed over all nodes.
    pub candidates_evaluated: usize,
    /// Largest candidate set handed to a single node.
    pub max_node_candidates: usize,
}

impl RecursiveGTMatrix {
    pub fn build(n: usize, k: usize, d_rule: DRule, seed: Seed) -> Result<Self> {
        if n < 2 || k == 0 {
            return Err(Error::InvalidConfig(format!(
                "recursive matrix needs n ≥ 2 and k ≥ 1 (n = {n}, k = {k})"
            )));
        }
        let base = k.max(2) as u128;
        let leaf_limit = base * base;
        let padded: u128 = if (n as u128) <= leaf_limit {
            n as u128
        } else {
            let mut p = leaf_limit;
            while p < n as u128 {
                p = p.checked_mul(p).filter(|&v| v <= u128::from(u64::MAX)).ok_or_else(|| {
                    Error::InvalidConfig(format!("padded universe for n = {n}, k = {k} overflows 64 bits"))
                })?;
            }
            p
        };
        let padded_n = padded as u64;
        let d = d_rule.blocks(k, padded_n as f64);
        let mut builder = Builder {
            k,
            d,
            leaf_limit: leaf_limit as u64,
            seed,
            nodes: Vec::new(),
            rows: 0,
        };
        let root = builder.add(padded_n, 0, Vec::new())?;
        Ok(RecursiveGTMatrix {
            n,
            k,
            padded_n,
            d,
            total_rows: builder.rows,
            nodes: builder.nodes,
            root,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn padded_n(&self) -> u64 {
        self.padded_n
    }

    /// Outer code length used at every node.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn total_rows(&self) -> usize {
        self.total_rows
    }

    pub fn nodes(&self) -> &[GtNode] {
        &self.nodes
    }

    pub fn root(&self) -> &GtNode {
        &self.nodes[self.root]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Global rows containing global column `i`.
    pub fn column_rows(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let i = i as u64;
        self.nodes.iter().flat_map(move |node| {
            let c = node.column_of(i);
            node.code.column_rows(c).map(move |r| node.row_offset + r)
        })
    }

    /// Boolean outcomes for a defective set.
    pub fn outcomes_for(&self, support: &[usize]) -> Result<TestOutcomeVector> {
        let mut positive = vec![false; self.total_rows];
        for &j in support {
            if j >= self.n {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    got: j + 1,
                    context: "defective index",
                });
            }
            for r in self.column_rows(j) {
                positive[r] = true;
            }
        }
        Ok(TestOutcomeVector::new(positive))
    }

    /// Dense copy over the `n` real columns, for small instances.
    pub fn to_binary(&self) -> Result<BinaryTestMatrix> {
        if self.n as u64 > MATERIALIZE_LIMIT {
            return Err(Error::InvalidConfig(format!(
                "refusing to materialize {} columns",
                self.n
            )));
        }
        let supports = (0..self.n).map(|j| self.column_rows(j).collect()).collect();
        BinaryTestMatrix::from_column_supports(self.total_rows, supports)
    }

    #[inline]
    fn passes(&self, node: &GtNode, column: u64, outcomes: &TestOutcomeVector) -> bool {
        node.code
            .column_rows(column)
            .all(|r| outcomes.is_positive(node.row_offset + r))
    }

    /// Two-stage decoding from the outcomes of all tests (global row order).
    /// The result is a superset of the defectives; when every node's code is
    /// `(k, k)`-list-disjunct on its candidates it has at most `2k` items.
    pub fn decode(&self, outcomes: &TestOutcomeVector) -> Result<RecursiveDecode> {
        check_dim(self.total_rows, outcomes.len(), "recursive outcome vector")?;
        let mut stats = RecursiveDecode {
            set: Vec::new(),
            candidates_evaluated: 0,
            max_node_candidates: 0,
        };
        let found = self.decode_node(self.root, outcomes, &mut stats);
        stats.set = found.into_iter().map(|c| c as usize).collect();
        stats.set.sort_unstable();
        Ok(stats)
    }

    fn decode_node(&self, idx: usize, outcomes: &TestOutcomeVector, stats: &mut RecursiveDecode) -> Vec<u64> {
        let node = &self.nodes[idx];
        let limit = if idx == self.root { self.n as u64 } else { node.universe };
        let candidates: Vec<u64> = match node.children {
            None => (0..node.universe.min(limit)).collect(),
            Some((r, c)) => {
                let highs = self.decode_node(r, outcomes, stats);
                let lows = self.decode_node(c, outcomes, stats);
                let mut cands = Vec::with_capacity(highs.len() * lows.len());
                for &h in &highs {
                    for &l in &lows {
                        let i = h * node.split + l;
                        if i < limit {
                            cands.push(i);
                        }
                    }
                }
                cands
            }
        };
        stats.candidates_evaluated += candidates.len();
        stats.max_node_candidates = stats.max_node_candidates.max(candidates.len());
        candidates
            .into_iter()
            .filter(|&c| self.passes(node, c, outcomes))
            .collect()
    }

    /// Algorithm-1 decoding over every one of the `n` columns and every test.
    /// Linear in `n`; kept as a baseline for decode-time comparisons.
    pub fn full_scan_decode(&self, outcomes: &TestOutcomeVector) -> Result<Vec<usize>> {
        check_dim(self.total_rows, outcomes.len(), "recursive outcome vector")?;
        Ok((0..self.n)
            .filter(|&i| self.column_rows(i).all(|r| outcomes.is_positive(r)))
            .collect())
    }
}

struct Builder {
    k: usize,
    d: usize,
    leaf_limit: u64,
    seed: Seed,
    nodes: Vec<GtNode>,
    rows: usize,
}

impl Builder {
    // Children are laid out before their parent: rows of the row child, then
    // the column child, then the node's own code.
    fn add(&mut self, universe: u64, depth: usize, path: Vec<(u64, ChildKind)>) -> Result<usize> {
        let (children, split) = if universe <= self.leaf_limit {
            (None, 0)
        } else {
            let split = exact_sqrt(universe);
            let mut rp = path.clone();
            rp.push((split, ChildKind::Row));
            let mut cp = path.clone();
            cp.push((split, ChildKind::Col));
            let r = self.add(split, depth + 1, rp)?;
            let c = self.add(split, depth + 1, cp)?;
            (Some((r, c)), split)
        };
        let id = self.nodes.len();
        let code = ConcatCodeMatrix::build(universe, self.k, self.d, self.seed.child(id as u64))?;
        let row_offset = self.rows;
        self.rows += code.rows();
        self.nodes.push(GtNode {
            universe,
            depth,
            code,
            children,
            split,
            row_offset,
            path,
        });
        Ok(id)
    }
}

fn exact_sqrt(v: u64) -> u64 {
    let mut r = (v as f64).sqrt() as u64;
    while r * r > v {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= v {
        r += 1;
    }
    debug_assert_eq!(r * r, v);
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group_testing::naive_decode;
    use rand::seq::index::sample;

    fn build(n: usize, k: usize, seed: u64) -> RecursiveGTMatrix {
        RecursiveGTMatrix::build(n, k, DRule::default(), Seed::new(seed)).unwrap()
    }

    #[test]
    fn base_case_is_a_single_node() {
        let a = build(9, 3, 1);
        assert_eq!(a.num_nodes(), 1);
        assert_eq!(a.padded_n(), 9);
        assert_eq!(a.total_rows(), a.root().code.rows());
        // Degenerate k² > n.
        let b = build(5, 3, 1);
        assert_eq!((b.num_nodes(), b.padded_n()), (1, 5));
    }

    #[test]
    fn one_recursion_step_at_k_to_the_fourth() {
        let a = build(81, 3, 1);
        assert_eq!(a.num_nodes(), 3);
        let root = a.root();
        let (r, c) = root.children.unwrap();
        assert_eq!(a.nodes()[r].universe, 9);
        assert_eq!(a.nodes()[c].universe, 9);
        assert_eq!(
            a.total_rows(),
            root.code.rows() + a.nodes()[r].code.rows() + a.nodes()[c].code.rows()
        );
        assert_eq!(root.row_offset, a.total_rows() - root.code.rows());
    }

    #[test]
    fn padding_and_universe_sizes() {
        let a = build(100, 3, 2);
        assert_eq!(a.padded_n(), 6561);
        for node in a.nodes() {
            let expected = 6561f64.powf(0.5f64.powi(node.depth as i32)).round() as u64;
            assert_eq!(node.universe, expected);
            assert_eq!(node.is_leaf(), node.universe <= 9);
        }
        let k1 = build(10, 1, 0);
        assert_eq!(k1.padded_n(), 16);
    }

    #[test]
    fn row_count_tracks_the_d_rule() {
        let a = build(65536, 4, 3);
        assert_eq!(a.padded_n(), 65536);
        assert_eq!(a.num_nodes(), 7);
        let per_node = 16 * DRule::default().blocks(4, 65536.0);
        assert_eq!(a.total_rows(), 7 * per_node);
        // 4k·d per node over log_k n − 1 nodes.
        let log_k_n = 65536f64.log2() / 2.0;
        let expected = 16.0 * a.d() as f64 * (log_k_n - 1.0);
        let ratio = a.total_rows() as f64 / expected;
        assert!((0.5..=2.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn no_defectives_decode_to_empty() {
        let a = build(6561, 3, 4);
        let out = a.outcomes_for(&[]).unwrap();
        assert!(a.decode(&out).unwrap().set.is_empty());
    }

    #[test]
    fn base_case_equals_naive_decoding() {
        let a = build(9, 3, 5);
        let m = a.to_binary().unwrap();
        for support in [vec![], vec![2], vec![0, 8], vec![1, 4, 7]] {
            let out = a.outcomes_for(&support).unwrap();
            assert_eq!(a.decode(&out).unwrap().set, naive_decode(&m, &out).unwrap());
        }
    }

    #[test]
    fn materialized_rows_agree_with_implicit_columns() {
        let a = build(81, 2, 6);
        let m = a.to_binary().unwrap();
        assert!(m.is_consistent());
        for support in [vec![3usize], vec![10, 70]] {
            let implicit = a.outcomes_for(&support).unwrap();
            let dense = crate::group_testing::TestOutcomeVector::from_support(&m, &support).unwrap();
            assert_eq!(implicit, dense);
            let full = a.full_scan_decode(&implicit).unwrap();
            assert_eq!(full, naive_decode(&m, &implicit).unwrap());
        }
    }

    #[test]
    fn recovers_supersets_and_counts_candidates() {
        let a = build(6561, 3, 7);
        let mut rng = Seed::new(99).rng();
        for _ in 0..50 {
            let support: Vec<usize> = sample(&mut rng, 6561, 3).into_vec();
            let out = a.outcomes_for(&support).unwrap();
            let dec = a.decode(&out).unwrap();
            for j in &support {
                assert!(dec.set.contains(j));
            }
            assert!(dec.set.len() <= 6);
            assert!(dec.candidates_evaluated <= a.num_nodes() * 36);
            assert!(dec.max_node_candidates <= 36);
        }
    }

    #[test]
    fn padded_columns_are_never_returned() {
        let a = build(100, 3, 8);
        let out = TestOutcomeVector::new(vec![true; a.total_rows()]);
        let dec = a.decode(&out).unwrap();
        assert!(dec.set.iter().all(|&i| i < 100));
        assert_eq!(a.full_scan_decode(&out).unwrap().len(), 100);
    }
}
