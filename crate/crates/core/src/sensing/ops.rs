//! Matrix combinators: Hadamard product, row-direct sum, row-wise tensor product.

use super::{BinaryTestMatrix, LinearMeasurement, MatrixView, RealMatrix, SparseSignal};
use crate::error::{check_dim, Error, Result};

/// Entrywise product `a ⊙ b`.
pub fn hadamard<A: MatrixView + ?Sized>(a: &A, b: &RealMatrix) -> Result<RealMatrix> {
    check_dim(a.rows(), b.rows(), "hadamard rows")?;
    check_dim(a.cols(), b.cols(), "hadamard cols")?;
    let data = (0..b.rows())
        .flat_map(|i| (0..b.cols()).map(move |j| (i, j)))
        .map(|(i, j)| a.entry(i, j) * b.get(i, j))
        .collect();
    RealMatrix::new(b.rows(), b.cols(), data)
}

/// Maps `(block, local row)` to global rows of a row-direct sum and back.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowIndexMap {
    offsets: Vec<usize>,
}

impl RowIndexMap {
    pub fn from_block_rows(block_rows: impl IntoIterator<Item = usize>) -> Self {
        let mut offsets = vec![0];
        for r in block_rows {
            offsets.push(offsets.last().unwrap() + r);
        }
        RowIndexMap { offsets }
    }

    pub fn num_blocks(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn total_rows(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn block_range(&self, block: usize) -> std::ops::Range<usize> {
        self.offsets[block]..self.offsets[block + 1]
    }

    pub fn global(&self, block: usize, local: usize) -> usize {
        debug_assert!(local < self.offsets[block + 1] - self.offsets[block]);
        self.offsets[block] + local
    }

    /// Inverse of [`RowIndexMap::global`].
    pub fn locate(&self, global: usize) -> Option<(usize, usize)> {
        if global >= self.total_rows() {
            return None;
        }
        let block = self.offsets.partition_point(|&o| o <= global) - 1;
        Some((block, global - self.offsets[block]))
    }
}

/// Vertical concatenation `blocks[0] ⊎ blocks[1] ⊎ …` of dense matrices.
pub fn row_direct_sum(blocks: &[&RealMatrix]) -> Result<(RealMatrix, RowIndexMap)> {
    let first = blocks.first().ok_or(Error::Empty("row-direct sum of no blocks"))?;
    let cols = first.cols();
    let mut data = Vec::new();
    for b in blocks {
        check_dim(cols, b.cols(), "row-direct sum columns")?;
        data.extend_from_slice(b.data());
    }
    let map = RowIndexMap::from_block_rows(blocks.iter().map(|b| b.rows()));
    Ok((RealMatrix::new(map.total_rows(), cols, data)?, map))
}

impl BinaryTestMatrix {
    /// Vertical concatenation of binary matrices.
    pub fn row_direct_sum(blocks: &[&BinaryTestMatrix]) -> Result<(BinaryTestMatrix, RowIndexMap)> {
        let first = blocks.first().ok_or(Error::Empty("row-direct sum of no blocks"))?;
        let cols = first.cols();
        let map = RowIndexMap::from_block_rows(blocks.iter().map(|b| b.rows()));
        let mut supports = vec![Vec::new(); cols];
        for (bi, b) in blocks.iter().enumerate() {
            check_dim(cols, b.cols(), "row-direct sum columns")?;
            for (j, s) in supports.iter_mut().enumerate() {
                s.extend(b.column(j).iter().map(|&i| map.global(bi, i)));
            }
        }
        Ok((BinaryTestMatrix::from_column_supports(map.total_rows(), supports)?, map))
    }
}

/// Row-wise tensor product `a ⊗ v`: row `(i, i')`, stored at
/// `i·v.rows() + i'`, is `row_i(a) ⊙ row_{i'}(v)`.
pub fn tensor_product(a: &BinaryTestMatrix, v: &RealMatrix) -> Result<RealMatrix> {
    check_dim(a.cols(), v.cols(), "tensor product columns")?;
    let n = a.cols();
    let mut out = RealMatrix::zeros(a.rows() * v.rows(), n);
    for i in 0..a.rows() {
        for ip in 0..v.rows() {
            let r = i * v.rows() + ip;
            for &j in a.row(i) {
                out.set(r, j, v.get(ip, j));
            }
        }
    }
    Ok(out.with_seed(v.seed()))
}

/// Row-direct sum of measurement operators, evaluated block by block.
pub struct StackedOperator<'a> {
    blocks: Vec<&'a dyn LinearMeasurement>,
    map: RowIndexMap,
    cols: usize,
}

impl<'a> StackedOperator<'a> {
    pub fn new(blocks: Vec<&'a dyn LinearMeasurement>) -> Result<Self> {
        let cols = blocks.first().ok_or(Error::Empty("stack of no operators"))?.cols();
        for b in &blocks {
            check_dim(cols, b.cols(), "stacked operator columns")?;
        }
        let map = RowIndexMap::from_block_rows(blocks.iter().map(|b| b.rows()));
        Ok(StackedOperator { blocks, map, cols })
    }

    pub fn index_map(&self) -> &RowIndexMap {
        &self.map
    }
}

impl LinearMeasurement for StackedOperator<'_> {
    fn rows(&self) -> usize {
        self.map.total_rows()
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn apply(&self, x: &SparseSignal) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.rows());
        for b in &self.blocks {
            out.extend(b.apply(x)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use crate::sensing::Negated;
    use rand::Rng;

    fn m(rows: &[Vec<f64>]) -> RealMatrix {
        RealMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn hadamard_examples() {
        let id = BinaryTestMatrix::identity(2);
        let b = m(&[vec![5.0, 7.0], vec![2.0, 3.0]]);
        assert_eq!(hadamard(&id, &b).unwrap(), m(&[vec![5.0, 0.0], vec![0.0, 3.0]]));
        let ones = BinaryTestMatrix::all_ones(2, 2);
        assert_eq!(hadamard(&ones, &b).unwrap(), b);
        assert_eq!(hadamard(&RealMatrix::zeros(2, 2), &b).unwrap(), RealMatrix::zeros(2, 2));
        assert!(hadamard(&BinaryTestMatrix::identity(3), &b).is_err());
    }

    #[test]
    fn row_direct_sum_examples() {
        let a = m(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        let b = m(&[vec![7.0, 8.0, 9.0]]);
        let (s, map) = row_direct_sum(&[&a, &b]).unwrap();
        assert_eq!(s, m(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]]));
        assert_eq!(map.global(1, 0), 2);
        assert_eq!(map.locate(1), Some((0, 1)));
        assert_eq!(map.locate(3), None);
        let (single, _) = row_direct_sum(&[&a]).unwrap();
        assert_eq!(single, a);
        assert!(row_direct_sum(&[]).is_err());
        assert!(row_direct_sum(&[&a, &m(&[vec![1.0]])]).is_err());
    }

    #[test]
    fn tensor_examples() {
        let a = BinaryTestMatrix::from_dense(&[vec![1, 1]]).unwrap();
        let v = m(&[vec![1.0, 1.0], vec![1.0, 2.0]]);
        assert_eq!(tensor_product(&a, &v).unwrap(), m(&[vec![1.0, 1.0], vec![1.0, 2.0]]));
        let a = BinaryTestMatrix::from_dense(&[vec![1, 0]]).unwrap();
        assert_eq!(tensor_product(&a, &m(&[vec![3.0, 4.0]])).unwrap(), m(&[vec![3.0, 0.0]]));
        let a = BinaryTestMatrix::from_dense(&[vec![1, 0, 0, 0], vec![0, 1, 0, 0]]).unwrap();
        let v = RealMatrix::gaussian(3, 4, Seed::new(1));
        assert_eq!(tensor_product(&a, &v).unwrap().rows(), 6);
        assert!(tensor_product(&a, &RealMatrix::zeros(1, 3)).is_err());
    }

    fn random_binary(rows: usize, cols: usize, seed: u64) -> BinaryTestMatrix {
        let mut rng = Seed::new(seed).rng();
        let dense: Vec<Vec<u8>> = (0..rows)
            .map(|_| (0..cols).map(|_| u8::from(rng.random_bool(0.4))).collect())
            .collect();
        BinaryTestMatrix::from_dense(&dense).unwrap()
    }

    #[test]
    fn tensor_rows_match_direct_products() {
        for seed in 0..20 {
            let a = random_binary(5, 8, seed);
            let v = RealMatrix::gaussian(3, 8, Seed::new(100 + seed));
            let x = SparseSignal::new(RealMatrix::gaussian(1, 8, Seed::new(200 + seed)).data().to_vec(), 8).unwrap();
            let t = tensor_product(&a, &v).unwrap();
            let tx = t.mul_vec(x.entries()).unwrap();
            for i in 0..5 {
                for ip in 0..3 {
                    let direct: f64 = (0..8).map(|j| a.entry(i, j) * v.get(ip, j) * x.entries()[j]).sum();
                    assert!((tx[i * 3 + ip] - direct).abs() < 1e-12);
                }
                // Block i equals v applied to x masked to the support of row i.
                let mut masked = vec![0.0; 8];
                for &j in a.row(i) {
                    masked[j] = x.entries()[j];
                }
                let vx = v.mul_vec(&masked).unwrap();
                for ip in 0..3 {
                    assert!((tx[i * 3 + ip] - vx[ip]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn stacked_products_concatenate_exactly() {
        let a = RealMatrix::gaussian(3, 5, Seed::new(1));
        let b = RealMatrix::gaussian(2, 5, Seed::new(2));
        let x = SparseSignal::new(vec![0.5, 0.0, -1.0, 2.0, 0.0], 5).unwrap();
        let (s, _) = row_direct_sum(&[&a, &b]).unwrap();
        let mut expected = a.mul_vec(x.entries()).unwrap();
        expected.extend(b.mul_vec(x.entries()).unwrap());
        assert_eq!(s.mul_vec(x.entries()).unwrap(), expected);
        let neg = Negated(&a);
        let op = StackedOperator::new(vec![&a, &b, &neg]).unwrap();
        let y = op.apply(&x).unwrap();
        assert_eq!(&y[..5], &expected[..]);
        assert_eq!(op.index_map().block_range(2), 5..8);
        for i in 0..3 {
            assert_eq!(y[5 + i], -expected[i]);
        }
    }

    #[test]
    fn binary_row_direct_sum() {
        let a = BinaryTestMatrix::identity(3);
        let b = BinaryTestMatrix::all_ones(1, 3);
        let (s, map) = BinaryTestMatrix::row_direct_sum(&[&a, &b]).unwrap();
        assert_eq!(s.rows(), 4);
        assert_eq!(s.column(1), &[1, 3]);
        assert_eq!(map.block_range(1), 3..4);
        assert!(s.is_consistent());
    }
}
