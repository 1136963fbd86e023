//! Maximising `⟨c, z⟩` over `K = {‖z‖₂ ≤ 1, ‖z‖₁ ≤ √k}`.
//!
//! The maximiser is a normalised soft-threshold `S_λ(c)/‖S_λ(c)‖₂`, with `λ`
//! the smallest threshold whose output has `‖·‖₁/‖·‖₂ ≤ √k`. The ratio is
//! monotone in `λ` and on each segment between consecutive sorted `|c_i|`
//! the crossing point solves a quadratic, so one sort and one scan suffice.

use crate::error::{check_dim, Error, Result};
use crate::sensing::{GaussianMatrix, RealMatrix, SignVector, SparseSignal};

pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryProblem {
    c: Vec<f64>,
    k: usize,
    tol: f64,
}

impl RecoveryProblem {
    pub fn new(c: Vec<f64>, k: usize, tol: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("sparsity k must be at least 1".into()));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "solver tolerance must be positive, got {tol}"
            )));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("objective has non-finite coefficients".into()));
        }
        Ok(RecoveryProblem { c, k, tol })
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        self.c.iter().zip(z).map(|(a, b)| a * b).sum()
    }
}

pub fn soft_threshold(c: &[f64], lambda: f64) -> Vec<f64> {
    c.iter().map(|&v| v.signum() * (v.abs() - lambda).max(0.0)).collect()
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Smallest `λ ≥ 0` with `‖S_λ(c)‖₁ ≤ √k·‖S_λ(c)‖₂`.
pub fn threshold_level(c: &[f64], k: usize) -> f64 {
    let root_k = (k as f64).sqrt();
    let mut a: Vec<f64> = c.iter().map(|v| v.abs()).filter(|&v| v > 0.0).collect();
    if a.is_empty() || l1(&a) <= root_k * l2(&a) {
        return 0.0;
    }
    a.sort_unstable_by(|x, y| y.total_cmp(x));
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for s in 1..=a.len() {
        sum += a[s - 1];
        sum_sq += a[s - 1] * a[s - 1];
        let lower = a.get(s).copied().unwrap_or(0.0);
        let sf = s as f64;
        let num = sum - sf * lower;
        let den = (sum_sq - 2.0 * sum * lower + sf * lower * lower).max(0.0).sqrt();
        if s > k && num > root_k * den {
            let disc = (k as f64 * (sf * sum_sq - sum * sum) / (sf - k as f64)).max(0.0);
            let lambda = (sum - disc.sqrt()) / sf;
            return lambda.clamp(lower, a[s - 1]);
        }
    }
    0.0
}

/// Closed-form maximiser of `⟨c, z⟩` over `K`. Returns `0` for `c = 0`.
pub fn solve_linear_over_k(p: &RecoveryProblem) -> Vec<f64> {
    let lambda = threshold_level(&p.c, p.k);
    let mut z = soft_threshold(&p.c, lambda);
    let norm = l2(&z);
    if norm == 0.0 {
        return vec![0.0; p.c.len()];
    }
    z.iter_mut().for_each(|v| *v /= norm);
    // Rounding can leave either norm a hair above its bound.
    let root_k = (p.k as f64).sqrt();
    let n1 = l1(&z);
    if n1 > root_k {
        z.iter_mut().for_each(|v| *v *= root_k / n1);
    }
    let n2 = l2(&z);
    if n2 > 1.0 {
        z.iter_mut().for_each(|v| *v /= n2);
    }
    z
}

/// Iterative reference solver for tests.
pub mod oracle {
    use super::{l1, l2, RecoveryProblem};
    use crate::error::{Error, Result};

    pub const PROJECTION_MAX_ITER: usize = 100_000;

    /// Euclidean projection onto `{‖w‖₁ ≤ radius}` by sorting.
    pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
        if l1(v) <= radius {
            return v.to_vec();
        }
        let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
        u.sort_unstable_by(|a, b| b.total_cmp(a));
        let mut cumsum = 0.0;
        let mut theta = 0.0;
        for (i, &ui) in u.iter().enumerate() {
            cumsum += ui;
            let t = (cumsum - radius) / (i + 1) as f64;
            if ui > t {
                theta = t;
            } else {
                break;
            }
        }
        super::soft_threshold(v, theta)
    }

    pub fn project_l2_ball(v: &[f64]) -> Vec<f64> {
        let n = l2(v);
        if n <= 1.0 {
            v.to_vec()
        } else {
            v.iter().map(|x| x / n).collect()
        }
    }

    /// Projection onto `B₂ ∩ √k·B₁` by Dykstra's alternating projections.
    pub fn project_onto_k(v: &[f64], k: usize, tol: f64) -> Result<Vec<f64>> {
        let radius = (k as f64).sqrt();
        let d = v.len();
        let mut x = v.to_vec();
        let mut p = vec![0.0; d];
        let mut q = vec![0.0; d];
        for _ in 0..PROJECTION_MAX_ITER {
            let xp: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
            let y = project_l2_ball(&xp);
            for i in 0..d {
                p[i] = xp[i] - y[i];
            }
            let yq: Vec<f64> = y.iter().zip(&q).map(|(a, b)| a + b).collect();
            let next = project_l1_ball(&yq, radius);
            for i in 0..d {
                q[i] = yq[i] - next[i];
            }
            let moved = next.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let gap = next.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            x = next;
            if moved < tol && gap < tol {
                return Ok(project_l2_ball(&x));
            }
        }
        Err(Error::ProjectionDidNotConverge(PROJECTION_MAX_ITER))
    }

    /// Projected gradient ascent on `⟨c, z⟩` from `z = 0`, stopping early once
    /// an iterate stops moving.
    pub fn pgd_oracle(p: &RecoveryProblem, iters: usize, step: f64) -> Result<Vec<f64>> {
        if iters == 0 {
            return Err(Error::InvalidConfig("oracle needs at least one iteration".into()));
        }
        let c = p.c();
        let scale = l2(c);
        let mut z = vec![0.0; c.len()];
        if scale == 0.0 {
            return Ok(z);
        }
        for _ in 0..iters {
            let v: Vec<f64> = z.iter().zip(c).map(|(zi, ci)| zi + step * ci / scale).collect();
            let next = project_onto_k(&v, p.k(), 1e-12)?;
            let moved = next.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            z = next;
            if moved < 1e-13 {
                break;
            }
        }
        Ok(z)
    }
}

/// Sources of dense column restrictions.
pub trait ColumnSource {
    fn num_rows(&self) -> usize;
    fn num_cols(&self) -> usize;
    fn restrict(&self, columns: &[usize]) -> Result<RealMatrix>;
}

impl ColumnSource for RealMatrix {
    fn num_rows(&self) -> usize {
        self.rows()
    }
    fn num_cols(&self) -> usize {
        self.cols()
    }
    fn restrict(&self, columns: &[usize]) -> Result<RealMatrix> {
        self.select_columns(columns)
    }
}

impl ColumnSource for GaussianMatrix {
    fn num_rows(&self) -> usize {
        self.rows()
    }
    fn num_cols(&self) -> usize {
        self.cols()
    }
    fn restrict(&self, columns: &[usize]) -> Result<RealMatrix> {
        self.columns(columns)
    }
}

/// An `n`-vector stored by its (few) coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseEstimate {
    n: usize,
    support: Vec<usize>,
    values: Vec<f64>,
}

impl SparseEstimate {
    pub fn zero(n: usize) -> Self {
        SparseEstimate {
            n,
            support: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_signal(&self, declared_k: usize) -> Result<SparseSignal> {
        SparseSignal::from_support(self.n, &self.support, &self.values, declared_k.clamp(1, self.n))
    }

    /// `‖x̂ − x‖₂²`.
    pub fn squared_error(&self, x: &SparseSignal) -> Result<f64> {
        check_dim(self.n, x.n(), "estimate dimension")?;
        let xe = x.entries();
        let mut err: f64 = xe.iter().map(|v| v * v).sum();
        for (&i, &v) in self.support.iter().zip(&self.values) {
            err += (v - xe[i]) * (v - xe[i]) - xe[i] * xe[i];
        }
        Ok(err.max(0.0))
    }
}

/// Estimate supported on `s`: restrict `phi` to `s`, take `c = Φ_Sᵀy`, solve,
/// and place the solution back on `s`. An empty `s` yields the zero vector.
pub fn recover_on_subset<P: ColumnSource + ?Sized>(
    phi: &P,
    y: &SignVector,
    s: &[usize],
    k: usize,
    tol: f64,
) -> Result<SparseEstimate> {
    check_dim(phi.num_rows(), y.len(), "sign vector length")?;
    if s.is_empty() {
        log::warn!("empty candidate set, returning the zero estimate");
        return Ok(SparseEstimate::zero(phi.num_cols()));
    }
    let mut support = s.to_vec();
    support.sort_unstable();
    support.dedup();
    let phi_s = phi.restrict(&support)?;
    let c = phi_s.transpose_mul_signs(y)?;
    let z = solve_linear_over_k(&RecoveryProblem::new(c, k, tol)?);
    Ok(SparseEstimate {
        n: phi.num_cols(),
        support,
        values: z,
    })
}

#[cfg(test)]
mod tests {
    use super::oracle::*;
    use super::*;
    use crate::rng::Seed;
    use crate::sensing::sign_encode;
    use proptest::prelude::*;

    fn solve(c: &[f64], k: usize) -> Vec<f64> {
        solve_linear_over_k(&RecoveryProblem::new(c.to_vec(), k, DEFAULT_TOL).unwrap())
    }

    #[test]
    fn three_four_zero() {
        let z = solve(&[3.0, 4.0, 0.0], 1);
        assert_eq!(threshold_level(&[3.0, 4.0, 0.0], 1), 3.0);
        assert!((z[0]).abs() < 1e-15 && (z[1] - 1.0).abs() < 1e-15 && z[2] == 0.0);
        // Every 1-sparse unit candidate scores at most 4.
        let best = [3.0f64, 4.0, 0.0].iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert_eq!(best, 4.0);
        let p = RecoveryProblem::new(vec![3.0, 4.0, 0.0], 1, DEFAULT_TOL).unwrap();
        let o = pgd_oracle(&p, 5000, 0.5).unwrap();
        assert!((p.objective(&o) - 4.0).abs() < 1e-6);
    }

    #[test]
    fn inactive_l1_constraint() {
        let c = [1.0, -2.0, 0.5];
        let z = solve(&c, 3);
        let n = l2(&c);
        for (zi, ci) in z.iter().zip(&c) {
            assert!((zi - ci / n).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(solve(&[0.0, 0.0], 1), vec![0.0, 0.0]);
        assert_eq!(solve(&[1.0, 0.0, 0.0], 1), vec![1.0, 0.0, 0.0]);
        assert!(RecoveryProblem::new(vec![1.0], 0, 1e-9).is_err());
        assert!(RecoveryProblem::new(vec![f64::NAN], 1, 1e-9).is_err());
        assert!(RecoveryProblem::new(vec![1.0], 1, 0.0).is_err());
    }

    #[test]
    fn oracle_reduces_to_l2_ball_for_large_k() {
        let c = vec![0.3, -0.4, 1.2, 0.0, 0.1];
        let p = RecoveryProblem::new(c.clone(), 5, DEFAULT_TOL).unwrap();
        let z = pgd_oracle(&p, 2000, 0.5).unwrap();
        let n = l2(&c);
        for (zi, ci) in z.iter().zip(&c) {
            assert!((zi - ci / n).abs() < 1e-6);
        }
        let e1 = RecoveryProblem::new(vec![1.0, 0.0, 0.0], 1, DEFAULT_TOL).unwrap();
        let z = pgd_oracle(&e1, 100, 0.5).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-9 && z[1].abs() < 1e-9);
    }

    #[test]
    fn l1_projection_by_definition() {
        let v = [0.9, -0.6, 0.2];
        let w = project_l1_ball(&v, 1.0);
        assert!((l1(&w) - 1.0).abs() < 1e-12);
        // Brute-force threshold search.
        let theta = (0..=100_000)
            .map(|i| i as f64 * 1e-5)
            .min_by(|a, b| {
                (l1(&soft_threshold(&v, *a)) - 1.0)
                    .abs()
                    .total_cmp(&(l1(&soft_threshold(&v, *b)) - 1.0).abs())
            })
            .unwrap();
        for (a, b) in w.iter().zip(soft_threshold(&v, theta)) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn recover_single_index() {
        let phi = RealMatrix::gaussian(30, 5, Seed::new(2));
        for sign in [1.0, -1.0] {
            let x = SparseSignal::from_support(5, &[3], &[sign], 1).unwrap();
            let y = sign_encode(&phi, &x, 0.0).unwrap();
            let est = recover_on_subset(&phi, &y, &[3], 1, DEFAULT_TOL).unwrap();
            assert_eq!(est.support(), &[3]);
            assert_eq!(est.values(), &[sign]);
            assert!(est.squared_error(&x).unwrap() < 1e-24);
        }
        let est = recover_on_subset(&phi, &SignVector::new(vec![1; 30]).unwrap(), &[], 1, DEFAULT_TOL).unwrap();
        assert!(est.support().is_empty());
    }

    #[test]
    fn negated_measurements_negate_the_estimate() {
        let phi = GaussianMatrix::new(200, 40, Seed::new(4));
        let x = SparseSignal::from_support(40, &[1, 7, 30], &[0.6, -0.64, 0.48], 3).unwrap();
        let y = sign_encode(&phi, &x, 0.0).unwrap();
        let s = [1, 7, 30, 12];
        let a = recover_on_subset(&phi, &y, &s, 3, DEFAULT_TOL).unwrap();
        let b = recover_on_subset(&phi, &y.negated(), &s, 3, DEFAULT_TOL).unwrap();
        for (u, v) in a.values().iter().zip(b.values()) {
            assert_eq!(*u, -v);
        }
        let dense = a.to_signal(3).unwrap();
        assert!((a.squared_error(&x).unwrap() - dense.squared_distance(&x).unwrap()).abs() < 1e-12);
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, usize)> {
        (1usize..=50).prop_flat_map(|d| (prop::collection::vec(-10.0f64..10.0, d), 1usize..=10))
    }

    proptest! {
        #[test]
        fn feasible((c, k) in instance()) {
            let z = solve(&c, k);
            prop_assert!(l2(&z) <= 1.0 + 1e-12);
            prop_assert!(l1(&z) <= (k as f64).sqrt() + 1e-12);
        }

        #[test]
        fn positive_scaling_does_not_move_the_maximiser((c, k) in instance(), alpha in 0.01f64..100.0) {
            let a = solve(&c, k);
            let scaled: Vec<f64> = c.iter().map(|v| v * alpha).collect();
            let b = solve(&scaled, k);
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }

        #[test]
        fn lambda_is_bracketed((c, k) in instance()) {
            let lambda = threshold_level(&c, k);
            let root_k = (k as f64).sqrt();
            let at = soft_threshold(&c, lambda);
            if l2(&at) > 0.0 {
                prop_assert!(l1(&at) <= root_k * l2(&at) * (1.0 + 1e-9));
            }
            if lambda > 0.0 {
                let mut breaks: Vec<f64> = c.iter().map(|v| v.abs()).filter(|&v| v < lambda).collect();
                breaks.sort_unstable_by(|a, b| b.total_cmp(a));
                let next = breaks.first().copied().unwrap_or(0.0);
                let below = soft_threshold(&c, next);
                prop_assert!(l1(&below) > root_k * l2(&below) * (1.0 - 1e-9));
            }
        }

        #[test]
        fn never_loses_to_the_oracle((c, k) in instance()) {
            let p = RecoveryProblem::new(c.clone(), k, DEFAULT_TOL).unwrap();
            let z = solve_linear_over_k(&p);
            let o = pgd_oracle(&p, 400, 0.5).unwrap();
            prop_assert!(p.objective(&z) >= p.objective(&o) - 1e-6 * l2(&c));
        }
    }
}
