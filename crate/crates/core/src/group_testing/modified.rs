//! Decoding through a row-wise tensor product `A ⊗ V`.
//!
//! Block `j` of `(A ⊗ V)x` is `V` applied to `x` masked to the support of
//! row `j` of `A`. When every `k × k` submatrix of `V` is invertible and `x`
//! has at most `k` nonzeros, the block vanishes exactly when the row misses
//! `supp(x)`. Zeros are read off the pair `sign(t)`, `sign(−t)`, which are
//! both `+1` only for `t = 0`, so the sign measurements of `A ⊗ V` and
//! `−(A ⊗ V)` carry the boolean outcomes of `A`.

use super::{naive_decode, TestOutcomeVector};
use crate::error::{check_dim, Error, Result};
use crate::rng::Seed;
use crate::sensing::{BinaryTestMatrix, RealMatrix, SignVector, SparseSignal};

/// Above this many rows Vandermonde matrices are badly conditioned.
pub const VANDERMONDE_WARN_K: usize = 12;

/// `k × n` Vandermonde matrix with nodes drawn uniformly from `[1, 2]`:
/// entry `(i, j)` is `α_j^i`.
pub fn vandermonde(k: usize, n: usize, seed: Seed) -> RealMatrix {
    if k > VANDERMONDE_WARN_K {
        log::warn!("Vandermonde matrix with {k} rows is ill-conditioned; consider gaussian_mixer");
    }
    let nodes: Vec<f64> = (0..n).map(|j| 1.0 + seed.uniform_at(j as u64)).collect();
    let mut data = Vec::with_capacity(k * n);
    let mut row = vec![1.0; n];
    for _ in 0..k {
        data.extend_from_slice(&row);
        for (r, a) in row.iter_mut().zip(&nodes) {
            *r *= a;
        }
    }
    RealMatrix::new(k, n, data)
        .expect("sizes agree")
        .with_seed(seed.value())
}

/// Gaussian alternative to [`vandermonde`]; all `k × k` minors are nonzero
/// almost surely.
pub fn gaussian_mixer(k: usize, n: usize, seed: Seed) -> RealMatrix {
    RealMatrix::gaussian(k, n, seed)
}

/// `(a ⊗ v)x` computed from the nonzeros of `x` only.
pub fn tensor_measure(a: &BinaryTestMatrix, v: &RealMatrix, x: &SparseSignal) -> Result<Vec<f64>> {
    check_dim(a.cols(), v.cols(), "tensor product columns")?;
    check_dim(a.cols(), x.n(), "tensor measurement")?;
    let kv = v.rows();
    let mut out = vec![0.0; a.rows() * kv];
    for (j, xj) in x.nonzeros() {
        for &i in a.column(j) {
            for ip in 0..kv {
                out[i * kv + ip] += v.get(ip, j) * xj;
            }
        }
    }
    Ok(out)
}

/// Group-testing outcomes from paired sign measurements: test `j` is negative
/// iff all `block` measurements of its block read as zero.
pub fn zero_test_outcomes(
    tests: usize,
    block: usize,
    y_pos: &SignVector,
    y_neg: &SignVector,
) -> Result<TestOutcomeVector> {
    if block == 0 {
        return Err(Error::InvalidConfig("tensor block size must be at least 1".into()));
    }
    check_dim(tests * block, y_pos.len(), "positive sign block")?;
    check_dim(tests * block, y_neg.len(), "negated sign block")?;
    let (p, q) = (y_pos.bits(), y_neg.bits());
    let positive = (0..tests)
        .map(|j| (j * block..(j + 1) * block).any(|r| !(p[r] == 1 && q[r] == 1)))
        .collect();
    Ok(TestOutcomeVector::new(positive))
}

/// Items never seen in a test whose tensored block is entirely zero.
pub fn modified_decode(
    a: &BinaryTestMatrix,
    v: &RealMatrix,
    y_pos: &SignVector,
    y_neg: &SignVector,
) -> Result<Vec<usize>> {
    check_dim(a.cols(), v.cols(), "tensor product columns")?;
    let outcomes = zero_test_outcomes(a.rows(), v.rows(), y_pos, y_neg)?;
    naive_decode(a, &outcomes)
}
