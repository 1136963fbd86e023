//! Hierarchical sign Count-Sketch over dyadic intervals.
//!
//! Level `l` partitions the (padded) coordinates into intervals of width
//! `2^l`, from singletons at level 0 up to two halves at the top. For each
//! level and each of `C₂Δ′` schemes `m` there is one Gaussian per coordinate;
//! an interval's value under `(l, m)` is `Σ_{j∈L} g_j x_j`. Each of `C₁`
//! repetitions `t` hashes every interval into one of `C₀k` buckets with a
//! random sign `σ`, and a measurement is the sign of a bucket's signed sum.
//!
//! A heavy interval dominates its bucket, so across repetitions the bucket
//! sign agrees with its `σ` either almost always or almost never: the
//! interval is *good* under `m`. Recovery walks down from the top level and
//! keeps intervals that are good under a clear majority of schemes.

use std::cmp::Reverse;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{check_dim, Error, Result};
use crate::rng::{below, Seed};
use crate::sensing::{LinearMeasurement, SignVector, SparseSignal};

#[derive(Clone, Debug, PartialEq)]
pub struct SketchConfig {
    pub n: usize,
    pub k: usize,
    pub c_minus1: usize,
    pub c0: usize,
    pub c1: usize,
    pub c2: usize,
    /// Survivors per level are capped at `c_cap·k`.
    pub c_cap: usize,
    pub good_hi: f64,
    pub good_lo: f64,
    pub majority: f64,
    /// Replaces the derived `Δ′` when set.
    pub delta_prime: Option<usize>,
    pub seed: Seed,
}

impl SketchConfig {
    pub fn new(n: usize, k: usize, seed: Seed) -> Self {
        SketchConfig {
            n,
            k,
            c_minus1: 1,
            c0: 32,
            c1: 24,
            c2: 6,
            c_cap: 16,
            good_hi: 0.8,
            good_lo: 0.2,
            majority: 2.0 / 3.0,
            delta_prime: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.k == 0 || self.k > self.n {
            return Err(Error::InvalidConfig(format!(
                "sketch needs n ≥ 2 and 1 ≤ k ≤ n (n = {}, k = {})",
                self.n, self.k
            )));
        }
        if [self.c_minus1, self.c0, self.c1, self.c2, self.c_cap].contains(&0) || self.delta_prime == Some(0) {
            return Err(Error::InvalidConfig("sketch constants must be positive".into()));
        }
        if !(0.0 <= self.good_lo && self.good_lo < self.good_hi && self.good_hi <= 1.0) {
            return Err(Error::InvalidConfig("need 0 ≤ good_lo < good_hi ≤ 1".into()));
        }
        if !(0.0..1.0).contains(&self.majority) {
            return Err(Error::InvalidConfig("majority fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn padded_n(&self) -> usize {
        self.n.next_power_of_two().max(2)
    }

    pub fn levels(&self) -> usize {
        self.padded_n().trailing_zeros() as usize
    }

    /// `Δ = 1/(C₋₁·k·log₂ n)`.
    pub fn delta(&self) -> f64 {
        1.0 / (self.c_minus1 * self.k * self.levels()) as f64
    }

    /// `Δ′ = ⌈log₂(1/Δ)⌉`, at least 1.
    pub fn delta_prime(&self) -> usize {
        self.delta_prime
            .unwrap_or_else(|| ((1.0 / self.delta()).log2().ceil() as usize).max(1))
    }

    /// Schemes per level, `C₂Δ′`.
    pub fn schemes(&self) -> usize {
        self.c2 * self.delta_prime()
    }

    /// Buckets per repetition, `C₀k`.
    pub fn buckets(&self) -> usize {
        self.c0 * self.k
    }

    pub fn rows_per_level(&self) -> usize {
        self.schemes() * self.c1 * self.buckets()
    }

    pub fn total_rows(&self) -> usize {
        self.levels() * self.rows_per_level()
    }

    pub fn capacity(&self) -> usize {
        self.c_cap * self.k
    }

    /// `|x_i|²` above this fraction of `‖x_tail(k)‖₂²` makes `i` heavy.
    pub fn heavy_threshold_factor(&self) -> f64 {
        1.0 / (10 * self.k) as f64
    }
}

/// The largest `C` with `P[Y² > 1/C] ≥ 1/10` for standard normal `Y`.
pub fn c_thr() -> f64 {
    let z = Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(0.95);
    1.0 / (z * z)
}

/// Coordinates `index·2^level .. (index+1)·2^level`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicInterval {
    pub level: usize,
    pub index: usize,
}

impl DyadicInterval {
    pub fn containing(level: usize, coordinate: usize) -> Self {
        DyadicInterval {
            level,
            index: coordinate >> level,
        }
    }

    pub fn len(&self) -> usize {
        1 << self.level
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coords(&self) -> std::ops::Range<usize> {
        self.index << self.level..(self.index + 1) << self.level
    }

    pub fn children(&self) -> Option<[DyadicInterval; 2]> {
        let level = self.level.checked_sub(1)?;
        Some([
            DyadicInterval {
                level,
                index: 2 * self.index,
            },
            DyadicInterval {
                level,
                index: 2 * self.index + 1,
            },
        ])
    }

    pub fn parent(&self) -> DyadicInterval {
        DyadicInterval {
            level: self.level + 1,
            index: self.index / 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SketchEnsemble {
    cfg: SketchConfig,
    gauss: Vec<Seed>,
    hash: Vec<Seed>,
}

impl SketchEnsemble {
    pub fn config(&self) -> &SketchConfig {
        &self.cfg
    }

    pub fn rows(&self) -> usize {
        self.cfg.total_rows()
    }

    #[inline]
    fn block(&self, level: usize, m: usize) -> usize {
        level * self.cfg.schemes() + m
    }

    /// Global row of bucket `q` in repetition `t` of scheme `m` at `level`.
    #[inline]
    pub fn row_index(&self, level: usize, m: usize, t: usize, q: usize) -> usize {
        (self.block(level, m) * self.cfg.c1 + t) * self.cfg.buckets() + q
    }

    /// `g_j` for scheme `m` at `level`.
    #[inline]
    pub fn gaussian(&self, level: usize, m: usize, j: usize) -> f64 {
        self.gauss[self.block(level, m)].gaussian_at(j as u64)
    }

    /// Bucket and sign of interval `a` in repetition `t` of `(level, m)`.
    #[inline]
    pub fn bucket_sign(&self, level: usize, m: usize, t: usize, a: usize) -> (usize, f64) {
        let w = self.hash[self.block(level, m)].u64_at2(t as u64, a as u64);
        let sigma = if w & 1 == 1 { 1.0 } else { -1.0 };
        (below(w, self.cfg.buckets()), sigma)
    }

    /// Interval values `Σ_{j∈L} g_j x_j` for intervals touched by `x`.
    fn interval_values(&self, level: usize, m: usize, nz: &[(usize, f64)]) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        for &(j, v) in nz {
            let a = j >> level;
            let g = self.gaussian(level, m, j) * v;
            match out.last_mut() {
                Some((last, s)) if *last == a => *s += g,
                _ => out.push((a, g)),
            }
        }
        out
    }

    fn check_signal(&self, x: &SparseSignal) -> Result<Vec<(usize, f64)>> {
        check_dim(self.cfg.n, x.n(), "sketch measurement")?;
        Ok(x.nonzeros().collect())
    }

    fn fill_block(&self, level: usize, m: usize, nz: &[(usize, f64)], out: &mut [f64]) {
        let values = self.interval_values(level, m, nz);
        let b = self.cfg.buckets();
        for t in 0..self.cfg.c1 {
            for &(a, s) in &values {
                let (q, sigma) = self.bucket_sign(level, m, t, a);
                out[t * b + q] += sigma * s;
            }
        }
    }

    /// All `rows()` measurements, level by level.
    pub fn measure(&self, x: &SparseSignal) -> Result<Vec<f64>> {
        let nz = self.check_signal(x)?;
        let per_block = self.cfg.c1 * self.cfg.buckets();
        let mut out = vec![0.0; self.rows()];
        for (block, chunk) in out.chunks_mut(per_block).enumerate() {
            let (level, m) = (block / self.cfg.schemes(), block % self.cfg.schemes());
            self.fill_block(level, m, &nz, chunk);
        }
        Ok(out)
    }

    /// The `C₁·C₀k` measurements of a single `(level, m)` block.
    pub fn measure_block(&self, level: usize, m: usize, x: &SparseSignal) -> Result<Vec<f64>> {
        if level >= self.cfg.levels() || m >= self.cfg.schemes() {
            return Err(Error::InvalidConfig(format!("no sketch block ({level}, {m})")));
        }
        let nz = self.check_signal(x)?;
        let mut out = vec![0.0; self.cfg.c1 * self.cfg.buckets()];
        self.fill_block(level, m, &nz, &mut out);
        Ok(out)
    }

    /// Agreement count between the measured signs and `σ` of interval `a`,
    /// over the repetitions of `(level, m)`. `signs` covers that block only.
    pub fn agreement(&self, level: usize, m: usize, a: usize, signs: &[i8]) -> usize {
        let b = self.cfg.buckets();
        (0..self.cfg.c1)
            .filter(|&t| {
                let (q, sigma) = self.bucket_sign(level, m, t, a);
                f64::from(signs[t * b + q]) == sigma
            })
            .count()
    }

    /// Whether a count over `C₁` repetitions is far from an even split.
    pub fn is_good_count(&self, cnt: usize) -> bool {
        let c1 = self.cfg.c1 as f64;
        let cnt = cnt as f64;
        cnt > self.cfg.good_hi * c1 || cnt < self.cfg.good_lo * c1
    }
}

impl LinearMeasurement for SketchEnsemble {
    fn rows(&self) -> usize {
        self.cfg.total_rows()
    }
    fn cols(&self) -> usize {
        self.cfg.n
    }
    fn apply(&self, x: &SparseSignal) -> Result<Vec<f64>> {
        self.measure(x)
    }
}

pub fn build_sketch(cfg: SketchConfig) -> Result<SketchEnsemble> {
    cfg.validate()?;
    let blocks = cfg.levels() * cfg.schemes();
    let gauss_root = cfg.seed.named("sketch-gaussians");
    let hash_root = cfg.seed.named("sketch-buckets");
    Ok(SketchEnsemble {
        gauss: (0..blocks as u64).map(|b| gauss_root.child(b)).collect(),
        hash: (0..blocks as u64).map(|b| hash_root.child(b)).collect(),
        cfg,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeavyRecovery {
    /// Surviving coordinates, increasing.
    pub set: Vec<usize>,
    /// Surviving interval indices per level (index 0 holds coordinates).
    pub survivors: Vec<Vec<usize>>,
    /// Levels where more than `c_cap·k` intervals passed the test.
    pub truncated_levels: Vec<usize>,
}

/// Top-down survivor search. Intervals past the last real coordinate are
/// skipped; at each level the survivors are capped at `c_cap·k`, keeping the
/// best by number of good schemes, then by total agreement margin.
pub fn recover_heavy(ensemble: &SketchEnsemble, y: &SignVector) -> Result<HeavyRecovery> {
    let cfg = ensemble.config();
    check_dim(ensemble.rows(), y.len(), "sketch sign vector")?;
    let levels = cfg.levels();
    let per_block = cfg.c1 * cfg.buckets();
    let needed = cfg.majority * cfg.schemes() as f64;
    let bits = y.bits();
    let mut survivors = vec![Vec::new(); levels];
    let mut truncated_levels = Vec::new();
    let mut candidates: Vec<usize> = (0..cfg.padded_n() >> (levels - 1)).collect();
    for level in (0..levels).rev() {
        candidates.retain(|&a| a << level < cfg.n);
        let mut scored: Vec<(usize, usize, usize)> = candidates
            .iter()
            .map(|&a| {
                let (mut good, mut margin) = (0, 0);
                for m in 0..cfg.schemes() {
                    let start = ensemble.block(level, m) * per_block;
                    let cnt = ensemble.agreement(level, m, a, &bits[start..start + per_block]);
                    if ensemble.is_good_count(cnt) {
                        good += 1;
                    }
                    margin += cnt.max(cfg.c1 - cnt);
                }
                (a, good, margin)
            })
            .filter(|&(_, good, _)| good as f64 > needed)
            .collect();
        if scored.len() > cfg.capacity() {
            truncated_levels.push(level);
            scored.sort_by_key(|&(a, good, margin)| (Reverse(good), Reverse(margin), a));
            scored.truncate(cfg.capacity());
        }
        let mut kept: Vec<usize> = scored.into_iter().map(|(a, _, _)| a).collect();
        kept.sort_unstable();
        candidates = kept.iter().flat_map(|&a| [2 * a, 2 * a + 1]).collect();
        survivors[level] = kept;
    }
    Ok(HeavyRecovery {
        set: survivors[0].clone(),
        survivors,
        truncated_levels,
    })
}
