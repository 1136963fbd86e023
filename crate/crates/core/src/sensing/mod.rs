//! Signals, sign measurements and matrices shared by every scheme.

mod io;
mod ops;

pub use io::{read_matrix, write_matrix, StoredMatrix};
pub use ops::{hadamard, row_direct_sum, tensor_product, RowIndexMap, StackedOperator};

use crate::error::{check_dim, Error, Result};
use crate::rng::Seed;

/// Tolerance used by [`SparseSignal::is_unit`].
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// A real `n`-vector together with the sparsity level `k` a scheme was
/// configured for. Exact sparsity is not enforced: the ℓ2/ℓ2 scheme accepts
/// arbitrary unit vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSignal {
    entries: Vec<f64>,
    declared_k: usize,
}

impl SparseSignal {
    pub fn new(entries: Vec<f64>, declared_k: usize) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty("signal has no coordinates"));
        }
        if declared_k == 0 || declared_k > entries.len() {
            return Err(Error::InvalidSignal(format!(
                "declared sparsity {declared_k} outside 1..={}",
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSignal("non-finite entry".into()));
        }
        Ok(SparseSignal { entries, declared_k })
    }

    /// Signal supported on `support` with the given values.
    pub fn from_support(n: usize, support: &[usize], values: &[f64], declared_k: usize) -> Result<Self> {
        check_dim(support.len(), values.len(), "support/value lengths")?;
        let mut entries = vec![0.0; n];
        for (&i, &v) in support.iter().zip(values) {
            if i >= n {
                return Err(Error::InvalidSignal(format!("index {i} out of range for n = {n}")));
            }
            entries[i] = v;
        }
        SparseSignal::new(entries, declared_k)
    }

    pub fn zeros(n: usize, declared_k: usize) -> Result<Self> {
        SparseSignal::new(vec![0.0; n], declared_k)
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn declared_k(&self) -> usize {
        self.declared_k
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    /// Nonzero coordinates in increasing index order.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied().enumerate().filter(|&(_, v)| v != 0.0)
    }

    pub fn support(&self) -> Vec<usize> {
        self.nonzeros().map(|(i, _)| i).collect()
    }

    pub fn norm2(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_exactly_sparse(&self) -> bool {
        self.nonzeros().count() <= self.declared_k
    }

    pub fn is_unit(&self) -> bool {
        (self.norm2() - 1.0).abs() <= UNIT_NORM_TOL
    }

    /// Indices of the `k` largest entries in magnitude (ties broken by index).
    pub fn head(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n()).collect();
        idx.sort_by(|&a, &b| self.entries[b].abs().total_cmp(&self.entries[a].abs()).then(a.cmp(&b)));
        idx.truncate(k.min(self.n()));
        idx.sort_unstable();
        idx
    }

    /// `‖x_tail(k)‖₂²`: the energy outside the `k` largest entries.
    pub fn tail_energy(&self, k: usize) -> f64 {
        let head = self.head(k);
        let total: f64 = self.entries.iter().map(|v| v * v).sum();
        let head_energy: f64 = head.iter().map(|&i| self.entries[i] * self.entries[i]).sum();
        (total - head_energy).max(0.0)
    }

    /// Energy of the coordinates not listed in `set`.
    pub fn energy_outside(&self, set: &[usize]) -> f64 {
        let mut inside = vec![false; self.n()];
        for &i in set {
            if i < self.n() {
                inside[i] = true;
            }
        }
        self.entries
            .iter()
            .zip(&inside)
            .filter(|(_, &m)| !m)
            .map(|(v, _)| v * v)
            .sum()
    }

    pub fn squared_distance(&self, other: &SparseSignal) -> Result<f64> {
        check_dim(self.n(), other.n(), "squared distance")?;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    pub fn negated(&self) -> SparseSignal {
        SparseSignal {
            entries: self.entries.iter().map(|v| -v).collect(),
            declared_k: self.declared_k,
        }
    }
}

/// A vector over `{+1, -1}`; there is no zero state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignVector {
    bits: Vec<i8>,
}

impl SignVector {
    pub fn new(bits: Vec<i8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b != 1 && b != -1) {
            return Err(Error::InvalidSignal(format!("sign entry {b} is not ±1")));
        }
        Ok(SignVector { bits })
    }

    /// `+1` iff `value ≥ -zero_tol`, so that an exact zero maps to `+1`.
    pub fn from_values(values: &[f64], zero_tol: f64) -> Self {
        SignVector {
            bits: values.iter().map(|&v| sign_of(v, zero_tol)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[i8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, i: usize) -> i8 {
        self.bits[i]
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> SignVector {
        SignVector {
            bits: self.bits[range].to_vec(),
        }
    }

    pub fn negated(&self) -> SignVector {
        SignVector {
            bits: self.bits.iter().map(|b| -b).collect(),
        }
    }
}

#[inline]
pub(crate) fn sign_of(v: f64, zero_tol: f64) -> i8 {
    if v >= -zero_tol {
        1
    } else {
        -1
    }
}

/// Read access to matrix entries, shared by dense real and binary matrices.
pub trait MatrixView {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn entry(&self, i: usize, j: usize) -> f64;
}

/// Anything that maps a signal to a vector of real measurements.
///
/// Implementations must be deterministic and sum each row in a fixed order.
pub trait LinearMeasurement {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &SparseSignal) -> Result<Vec<f64>>;
}

/// The one-bit channel `y = sign(Φx)` with `sign(z) = +1` for `z ≥ -zero_tol`.
pub fn sign_encode<M: LinearMeasurement + ?Sized>(phi: &M, x: &SparseSignal, zero_tol: f64) -> Result<SignVector> {
    if !(zero_tol >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "zero_tol must be nonnegative, got {zero_tol}"
        )));
    }
    let values = phi.apply(x)?;
    Ok(SignVector::from_values(&values, zero_tol))
}

/// Dense row-major real matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    seed: u64,
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim(rows * cols, data.len(), "matrix entry count")?;
        Ok(RealMatrix {
            rows,
            cols,
            data,
            seed: 0,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        RealMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
            seed: 0,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            check_dim(c, row.len(), "row length")?;
            data.extend_from_slice(row);
        }
        RealMatrix::new(r, c, data)
    }

    /// i.i.d. standard normal entries; entry `(i, j)` is the stream value at
    /// `i·cols + j`, identical to [`GaussianMatrix::entry`].
    pub fn gaussian(rows: usize, cols: usize, seed: Seed) -> Self {
        GaussianMatrix::new(rows, cols, seed).materialize()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.cols, x.len(), "matrix-vector product")?;
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `Mᵀ y` for a sign vector `y`.
    pub fn transpose_mul_signs(&self, y: &SignVector) -> Result<Vec<f64>> {
        check_dim(self.rows, y.len(), "transpose product")?;
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let s = f64::from(y.get(i));
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += s * a;
            }
        }
        Ok(out)
    }

    pub fn select_columns(&self, columns: &[usize]) -> Result<RealMatrix> {
        if let Some(&j) = columns.iter().find(|&&j| j >= self.cols) {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: j + 1,
                context: "column selection",
            });
        }
        let mut data = Vec::with_capacity(self.rows * columns.len());
        for i in 0..self.rows {
            let row = self.row(i);
            data.extend(columns.iter().map(|&j| row[j]));
        }
        Ok(RealMatrix {
            rows: self.rows,
            cols: columns.len(),
            data,
            seed: self.seed,
        })
    }

    pub fn negated(&self) -> RealMatrix {
        RealMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| -v).collect(),
            seed: self.seed,
        }
    }
}

impl MatrixView for RealMatrix {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn entry(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }
}

impl LinearMeasurement for RealMatrix {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn apply(&self, x: &SparseSignal) -> Result<Vec<f64>> {
        self.mul_vec(x.entries())
    }
}

/// Gaussian matrix whose entries are regenerated from the seed on demand.
/// Used where the dense matrix would not fit in memory; only the columns a
/// decoder asks for are ever computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GaussianMatrix {
    rows: usize,
    cols: usize,
    seed: Seed,
}

impl GaussianMatrix {
    pub fn new(rows: usize, cols: usize, seed: Seed) -> Self {
        GaussianMatrix { rows, cols, seed }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.seed.gaussian_at((i as u64) * (self.cols as u64) + j as u64)
    }

    /// Dense `rows × |columns|` restriction.
    pub fn columns(&self, columns: &[usize]) -> Result<RealMatrix> {
        if let Some(&j) = columns.iter().find(|&&j| j >= self.cols) {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: j + 1,
                context: "gaussian column selection",
            });
        }
        let mut data = Vec::with_capacity(self.rows * columns.len());
        for i in 0..self.rows {
            data.extend(columns.iter().map(|&j| self.entry(i, j)));
        }
        Ok(RealMatrix::new(self.rows, columns.len(), data)?.with_seed(self.seed.value()))
    }

    pub fn materialize(&self) -> RealMatrix {
        let data = (0..self.rows)
            .flat_map(|i| (0..self.cols).map(move |j| (i, j)))
            .map(|(i, j)| self.entry(i, j))
            .collect();
        RealMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
            seed: self.seed.value(),
        }
    }
}

impl LinearMeasurement for GaussianMatrix {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn apply(&self, x: &SparseSignal) -> Result<Vec<f64>> {
        check_dim(self.cols, x.n(), "gaussian measurement")?;
        let nz: Vec<(usize, f64)> = x.nonzeros().collect();
        Ok((0..self.rows)
            .map(|i| nz.iter().map(|&(j, v)| self.entry(i, j) * v).sum())
            .collect())
    }
}

/// 0/1 matrix stored as column and row support lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryTestMatrix {
    rows: usize,
    cols: usize,
    column_supports: Vec<Vec<usize>>,
    row_supports: Vec<Vec<usize>>,
}

impl BinaryTestMatrix {
    /// Builds the matrix from per-column row lists (any order, duplicates
    /// removed).
    pub fn from_column_supports(rows: usize, mut column_supports: Vec<Vec<usize>>) -> Result<Self> {
        let cols = column_supports.len();
        let mut row_supports = vec![Vec::new(); rows];
        for (j, col) in column_supports.iter_mut().enumerate() {
            col.sort_unstable();
            col.dedup();
            for &i in col.iter() {
                if i >= rows {
                    return Err(Error::DimensionMismatch {
                        expected: rows,
                        got: i + 1,
                        context: "row index in column support",
                    });
                }
                row_supports[i].push(j);
            }
        }
        Ok(BinaryTestMatrix {
            rows,
            cols,
            column_supports,
            row_supports,
        })
    }

    pub fn from_dense(rows: &[Vec<u8>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut cols = vec![Vec::new(); c];
        for (i, row) in rows.iter().enumerate() {
            check_dim(c, row.len(), "binary row length")?;
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => cols[j].push(i),
                    other => return Err(Error::Parse(format!("binary entry {other} is not 0/1"))),
                }
            }
        }
        BinaryTestMatrix::from_column_supports(r, cols)
    }

    pub fn identity(n: usize) -> Self {
        BinaryTestMatrix::from_column_supports(n, (0..n).map(|j| vec![j]).collect())
            .expect("identity supports are in range")
    }

    pub fn all_ones(rows: usize, cols: usize) -> Self {
        BinaryTestMatrix::from_column_supports(rows, vec![(0..rows).collect(); cols])
            .expect("all-ones supports are in range")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Rows `i` with `M[i][j] = 1`, sorted.
    pub fn column(&self, j: usize) -> &[usize] {
        &self.column_supports[j]
    }

    /// Columns `j` with `M[i][j] = 1`, sorted.
    pub fn row(&self, i: usize) -> &[usize] {
        &self.row_supports[i]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.column_supports[j].binary_search(&i).is_ok()
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        let mut out = vec![vec![0u8; self.cols]; self.rows];
        for (j, col) in self.column_supports.iter().enumerate() {
            for &i in col {
                out[i][j] = 1;
            }
        }
        out
    }

    /// Submatrix keeping the listed columns, in the given order.
    pub fn restrict_columns(&self, columns: &[usize]) -> Result<Self> {
        let supports = columns
            .iter()
            .map(|&j| {
                self.column_supports.get(j).cloned().ok_or(Error::DimensionMismatch {
                    expected: self.cols,
                    got: j + 1,
                    context: "column restriction",
                })
            })
            .collect::<Result<Vec<_>>>()?;
        BinaryTestMatrix::from_column_supports(self.rows, supports)
    }

    /// Whether the two support indices describe the same matrix.
    pub fn is_consistent(&self) -> bool {
        let from_cols: usize = self.column_supports.iter().map(Vec::len).sum();
        let from_rows: usize = self.row_supports.iter().map(Vec::len).sum();
        from_cols == from_rows
            && self
                .row_supports
                .iter()
                .enumerate()
                .all(|(i, row)| row.iter().all(|&j| self.get(i, j)))
    }

    /// Column supports as bitsets over rows (`ceil(rows/64)` words each).
    pub fn column_bitsets(&self) -> Vec<Vec<u64>> {
        let words = self.rows.div_ceil(64).max(1);
        self.column_supports
            .iter()
            .map(|col| {
                let mut bits = vec![0u64; words];
                for &i in col {
                    bits[i / 64] |= 1 << (i % 64);
                }
                bits
            })
            .collect()
    }
}

impl MatrixView for BinaryTestMatrix {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn entry(&self, i: usize, j: usize) -> f64 {
        if self.get(i, j) {
            1.0
        } else {
            0.0
        }
    }
}

impl LinearMeasurement for BinaryTestMatrix {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn apply(&self, x: &SparseSignal) -> Result<Vec<f64>> {
        check_dim(self.cols, x.n(), "binary measurement")?;
        let e = x.entries();
        Ok(self
            .row_supports
            .iter()
            .map(|row| row.iter().map(|&j| e[j]).sum())
            .collect())
    }
}

/// `-M` for any measurement operator.
pub struct Negated<'a, M: ?Sized>(pub &'a M);

impl<M: LinearMeasurement + ?Sized> LinearMeasurement for Negated<'_, M> {
    fn rows(&self) -> usize {
        self.0.rows()
    }
    fn cols(&self) -> usize {
        self.0.cols()
    }
    fn apply(&self, x: &SparseSignal) -> Result<Vec<f64>> {
        Ok(self.0.apply(x)?.into_iter().map(|v| -v).collect())
    }
}
