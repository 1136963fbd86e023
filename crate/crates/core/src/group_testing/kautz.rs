//! Kautz–Singleton codes: a Reed–Solomon outer code over a prime field `F_q`
//! concatenated with the identity inner code.
//!
//! Column `j` is the polynomial whose coefficients are the base-`q` digits of
//! `j`; the block for evaluation point `α` has its one at row `α·q + p_j(α)`.
//! Two distinct polynomials of degree `< L` agree on fewer than `L` points, so
//! `k` other columns cover at most `k·(L − 1)` of a column's `q` ones and the
//! matrix is `k`-disjunct as soon as `q > k·(L − 1)`.

use crate::error::{Error, Result};
use crate::sensing::BinaryTestMatrix;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KautzSingleton {
    q: usize,
    message_len: usize,
    matrix: BinaryTestMatrix,
}

impl KautzSingleton {
    /// Field size; also the column weight.
    pub fn q(&self) -> usize {
        self.q
    }

    /// Number of base-`q` digits per column index (polynomial degree + 1).
    pub fn message_len(&self) -> usize {
        self.message_len
    }

    /// Largest `k` for which the distance argument gives `k`-disjunctness.
    pub fn guaranteed_k(&self) -> usize {
        if self.message_len <= 1 {
            self.matrix.cols().saturating_sub(1)
        } else {
            (self.q - 1) / (self.message_len - 1)
        }
    }

    pub fn matrix(&self) -> &BinaryTestMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> BinaryTestMatrix {
        self.matrix
    }
}

fn is_prime(q: usize) -> bool {
    q >= 2 && (2..).take_while(|d| d * d <= q).all(|d| !q.is_multiple_of(d))
}

fn digits_needed(n: usize, q: usize) -> usize {
    let mut len = 1;
    let mut cap = q as u128;
    while cap < n as u128 {
        cap *= q as u128;
        len += 1;
    }
    len
}

/// Smallest prime `q` with `q ≥ k·(L − 1) + 1`, where `L = ⌈log_q n⌉`.
pub fn build_kautz_singleton(n: usize, k: usize) -> Result<KautzSingleton> {
    if n < 2 || k == 0 {
        return Err(Error::InvalidConfig(format!(
            "Kautz–Singleton needs n ≥ 2 and k ≥ 1 (n = {n}, k = {k})"
        )));
    }
    let q = (2..)
        .filter(|&q| is_prime(q))
        .find(|&q| {
            let len = digits_needed(n, q);
            len <= q && q > k * (len - 1)
        })
        .expect("primes are unbounded");
    build_kautz_singleton_with_q(n, q)
}

/// Kautz–Singleton matrix over an explicit prime field size. No disjunctness
/// is implied; see [`KautzSingleton::guaranteed_k`].
pub fn build_kautz_singleton_with_q(n: usize, q: usize) -> Result<KautzSingleton> {
    if !is_prime(q) {
        return Err(Error::InvalidConfig(format!("field size {q} is not prime")));
    }
    let message_len = digits_needed(n, q);
    if message_len > q {
        return Err(Error::InvalidConfig(format!(
            "{n} columns need {message_len} digits, more than the {q} evaluation points"
        )));
    }
    let supports = (0..n)
        .map(|j| {
            let mut coeffs = Vec::with_capacity(message_len);
            let mut rest = j;
            for _ in 0..message_len {
                coeffs.push(rest % q);
                rest /= q;
            }
            (0..q)
                .map(|alpha| {
                    // Horner's rule mod q.
                    let value = coeffs.iter().rev().fold(0, |acc, &c| (acc * alpha + c) % q);
                    alpha * q + value
                })
                .collect()
        })
        .collect();
    Ok(KautzSingleton {
        q,
        message_len,
        matrix: BinaryTestMatrix::from_column_supports(q * q, supports)?,
    })
}
