//! End-to-end pipelines: measurement matrix, sign channel, combinatorial
//! first stage and convex second stage.
//!
//! | scheme     | stage 1                                   | stage 2            |
//! |------------|-------------------------------------------|--------------------|
//! | `l2l2`     | dyadic sign sketch, heavy hitters          | Gaussian `Φ` on `S` |
//! | `foreach`  | recursive list-disjunct `A′`, paired signs | `G₂` on `S`         |
//! | `forall`   | `A ⊗ V` with a fixed list-disjunct `A`     | `G₂` on `S`         |
//! | `support`  | Kautz–Singleton `B ⊗ V`                    | none               |
//!
//! Each pipeline is built once and then encodes and decodes any number of
//! signals, which is how the for-all sweeps reuse a single matrix draw.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::convex::{recover_on_subset, SparseEstimate, DEFAULT_TOL};
use crate::error::{check_dim, Error, Result};
use crate::group_testing::{
    build_kautz_singleton, is_list_disjunct_with_budget, modified_decode, tensor_measure, vandermonde,
    ConcatCodeMatrix, DRule, RecursiveDecode, RecursiveGTMatrix, TestOutcomeVector, DEFAULT_ORACLE_BUDGET,
};
use crate::heavy_hitters::{build_sketch, recover_heavy, SketchConfig, SketchEnsemble};
use crate::rng::Seed;
use crate::sensing::{
    BinaryTestMatrix, GaussianMatrix, LinearMeasurement, RealMatrix, SignVector, SparseSignal, StackedOperator,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    L2l2,
    Foreach,
    Forall,
    Support,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::L2l2,
        SchemeKind::Foreach,
        SchemeKind::Forall,
        SchemeKind::Support,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::L2l2 => "l2l2",
            SchemeKind::Foreach => "foreach",
            SchemeKind::Forall => "forall",
            SchemeKind::Support => "support",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "unknown scheme {s:?} (expected l2l2, foreach, forall or support)"
            ))
        })
    }
}

/// Constants of the heavy-hitter sketch; see [`SketchConfig`].
#[derive(Clone, Debug, PartialEq)]
pub struct SketchConstants {
    pub c_minus1: usize,
    pub c0: usize,
    pub c1: usize,
    pub c2: usize,
    pub c_cap: usize,
    pub delta_prime: Option<usize>,
}

impl Default for SketchConstants {
    fn default() -> Self {
        let d = SketchConfig::new(2, 1, Seed::new(0));
        SketchConstants {
            c_minus1: d.c_minus1,
            c0: d.c0,
            c1: d.c1,
            c2: d.c2,
            c_cap: d.c_cap,
            delta_prime: d.delta_prime,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeConfig {
    pub scheme: SchemeKind,
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    pub sketch: SketchConstants,
    /// Block rule for the recursive matrix.
    pub d_rule: DRule,
    /// Union-bound slack, in bits, for the for-all matrix.
    pub forall_failure_bits: f64,
    /// Multiplier of the Gaussian row budgets.
    pub c_g: f64,
    /// `C` in `‖x̂ − x‖₂² ≤ C‖x_tail(k)‖₂² + δ`.
    pub c_bound: f64,
    pub zero_tol: f64,
    pub solver_tol: f64,
    pub oracle_budget: u128,
    /// Per-trial randomness.
    pub seed: u64,
    /// Randomness of the for-all matrix `A`, fixed across trials.
    pub design_seed: u64,
}

impl SchemeConfig {
    pub fn new(scheme: SchemeKind, n: usize, k: usize, delta: f64) -> Self {
        SchemeConfig {
            scheme,
            n,
            k,
            delta,
            sketch: SketchConstants::default(),
            d_rule: DRule::default(),
            forall_failure_bits: 10.0,
            c_g: 64.0,
            c_bound: 2.0,
            zero_tol: 0.0,
            solver_tol: DEFAULT_TOL,
            oracle_budget: DEFAULT_ORACLE_BUDGET,
            seed: 0,
            design_seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.k == 0 || self.k > self.n {
            return Err(Error::InvalidConfig(format!(
                "need n ≥ 2 and 1 ≤ k ≤ n (n = {}, k = {})",
                self.n, self.k
            )));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "delta must lie in (0, 1], got {}",
                self.delta
            )));
        }
        if !(self.c_g > 0.0) || !(self.c_bound >= 0.0) || !(self.zero_tol >= 0.0) || !(self.solver_tol > 0.0) {
            return Err(Error::InvalidConfig(
                "c_g and solver_tol must be positive, C and zero_tol nonnegative".into(),
            ));
        }
        if self.scheme == SchemeKind::L2l2 {
            self.sketch_config()?.validate()?;
        }
        Ok(())
    }

    pub fn sketch_config(&self) -> Result<SketchConfig> {
        let s = &self.sketch;
        Ok(SketchConfig {
            c_minus1: s.c_minus1,
            c0: s.c0,
            c1: s.c1,
            c2: s.c2,
            c_cap: s.c_cap,
            delta_prime: s.delta_prime,
            ..SketchConfig::new(self.n, self.k, self.root().named("sketch"))
        })
    }

    /// Gaussian rows of the final stage.
    pub fn r_prime(&self) -> usize {
        let base = self.c_g * self.k as f64 / (self.delta * self.delta);
        let rows = match self.scheme {
            SchemeKind::L2l2 | SchemeKind::Foreach => base,
            SchemeKind::Forall => base * (self.n as f64 / self.k as f64).log2().max(1.0),
            SchemeKind::Support => 0.0,
        };
        rows.ceil() as usize
    }

    fn root(&self) -> Seed {
        Seed::new(self.seed)
    }

    fn g2(&self) -> GaussianMatrix {
        GaussianMatrix::new(self.r_prime(), self.n, self.root().named("g2"))
    }

    fn v(&self) -> RealMatrix {
        vandermonde(self.k, self.n, self.root().named("vandermonde"))
    }
}

/// `A′ ⊙ G₁` (or its negation) with `G₁` regenerated from its seed.
struct MaskedGaussian<'a> {
    a: &'a RecursiveGTMatrix,
    g1: Seed,
    sign: f64,
}

impl LinearMeasurement for MaskedGaussian<'_> {
    fn rows(&self) -> usize {
        self.a.total_rows()
    }
    fn cols(&self) -> usize {
        self.a.n()
    }
    fn apply(&self, x: &SparseSignal) -> Result<Vec<f64>> {
        check_dim(self.a.n(), x.n(), "masked gaussian measurement")?;
        let mut out = vec![0.0; self.a.total_rows()];
        for (j, v) in x.nonzeros() {
            for r in self.a.column_rows(j) {
                out[r] += self.sign * self.g1.gaussian_at2(r as u64, j as u64) * v;
            }
        }
        Ok(out)
    }
}

/// Result of decoding one sign vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    /// Stage-1 candidate set, increasing.
    pub stage1: Vec<usize>,
    /// Stage-2 estimate (absent for support recovery).
    pub estimate: Option<SparseEstimate>,
}

#[derive(Clone, Debug)]
pub struct L2l2Scheme {
    sketch: SketchEnsemble,
    phi: GaussianMatrix,
    k: usize,
    zero_tol: f64,
    solver_tol: f64,
}

impl L2l2Scheme {
    pub fn build(cfg: &SchemeConfig) -> Result<Self> {
        Ok(L2l2Scheme {
            sketch: build_sketch(cfg.sketch_config()?)?,
            phi: cfg.g2(),
            k: cfg.k,
            zero_tol: cfg.zero_tol,
            solver_tol: cfg.solver_tol,
        })
    }

    pub fn sketch(&self) -> &SketchEnsemble {
        &self.sketch
    }

    pub fn phi(&self) -> &GaussianMatrix {
        &self.phi
    }

    pub fn with_stage2_seed(mut self, seed: Seed) -> Self {
        self.phi = GaussianMatrix::new(self.phi.rows(), self.phi.cols(), seed);
        self
    }
}

#[derive(Clone, Debug)]
pub struct ForeachScheme {
    a: RecursiveGTMatrix,
    g1: Seed,
    g2: GaussianMatrix,
    k: usize,
    zero_tol: f64,
    solver_tol: f64,
}

impl ForeachScheme {
    pub fn build(cfg: &SchemeConfig) -> Result<Self> {
        Ok(ForeachScheme {
            a: RecursiveGTMatrix::build(cfg.n, cfg.k, cfg.d_rule, cfg.root().named("recursive"))?,
            g1: cfg.root().named("g1"),
            g2: cfg.g2(),
            k: cfg.k,
            zero_tol: cfg.zero_tol,
            solver_tol: cfg.solver_tol,
        })
    }

    pub fn matrix(&self) -> &RecursiveGTMatrix {
        &self.a
    }

    pub fn with_stage2_seed(mut self, seed: Seed) -> Self {
        self.g2 = GaussianMatrix::new(self.g2.rows(), self.g2.cols(), seed);
        self
    }

    /// Test `r` is negative iff both paired bits are `+1`.
    pub fn outcomes(&self, y: &SignVector) -> Result<TestOutcomeVector> {
        check_dim(self.measurements(), y.len(), "foreach sign vector")?;
        let rows = self.a.total_rows();
        let b = y.bits();
        Ok(TestOutcomeVector::new(
            (0..rows).map(|r| !(b[r] == 1 && b[rows + r] == 1)).collect(),
        ))
    }

    pub fn stage1(&self, y: &SignVector) -> Result<RecursiveDecode> {
        self.a.decode(&self.outcomes(y)?)
    }

    /// Linear-time stage 1 over all `n` columns, for timing comparisons.
    pub fn baseline_stage1(&self, y: &SignVector) -> Result<Vec<usize>> {
        self.a.full_scan_decode(&self.outcomes(y)?)
    }
}

/// The fixed matrix `A` of the for-all scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct ForallDesign {
    a: BinaryTestMatrix,
    /// `Some(true)` when the list-disjunct oracle accepted `A`; `None` when
    /// the check was over budget.
    verified: Option<bool>,
}

/// Redraws allowed when a for-all matrix fails verification.
pub const FORALL_MAX_DRAWS: u64 = 16;

impl ForallDesign {
    pub fn build(cfg: &SchemeConfig) -> Result<Self> {
        let d = DRule::ForAll {
            failure_bits: cfg.forall_failure_bits,
        }
        .blocks(cfg.k, cfg.n as f64);
        let root = Seed::new(cfg.design_seed).named("forall");
        for draw in 0..FORALL_MAX_DRAWS {
            let a = ConcatCodeMatrix::build(cfg.n as u64, cfg.k, d, root.child(draw))?.to_binary()?;
            match is_list_disjunct_with_budget(&a, cfg.k, cfg.k, cfg.oracle_budget) {
                Ok(true) => {
                    return Ok(ForallDesign {
                        a,
                        verified: Some(true),
                    })
                }
                Ok(false) => log::info!("for-all draw {draw} is not ({0}, {0})-list-disjunct, redrawing", cfg.k),
                Err(Error::BudgetExceeded { .. }) => return Ok(ForallDesign { a, verified: None }),
                Err(e) => return Err(e),
            }
        }
        Err(Error::InvalidConfig(format!(
            "no ({0}, {0})-list-disjunct matrix in {FORALL_MAX_DRAWS} draws; raise forall_failure_bits",
            cfg.k
        )))
    }

    /// Wraps a given matrix, checking it when the budget allows.
    pub fn from_matrix(a: BinaryTestMatrix, k: usize, budget: u128) -> Result<Self> {
        let verified = match is_list_disjunct_with_budget(&a, k, k, budget) {
            Ok(v) => Some(v),
            Err(Error::BudgetExceeded { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(ForallDesign { a, verified })
    }

    pub fn matrix(&self) -> &BinaryTestMatrix {
        &self.a
    }

    pub fn verified(&self) -> Option<bool> {
        self.verified
    }
}

#[derive(Clone, Debug)]
pub struct ForallScheme {
    design: Arc<ForallDesign>,
    v: RealMatrix,
    g2: GaussianMatrix,
    k: usize,
    zero_tol: f64,
    solver_tol: f64,
}

impl ForallScheme {
    pub fn build(cfg: &SchemeConfig, design: Arc<ForallDesign>) -> Result<Self> {
        check_dim(cfg.n, design.a.cols(), "for-all matrix columns")?;
        Ok(ForallScheme {
            design,
            v: cfg.v(),
            g2: cfg.g2(),
            k: cfg.k,
            zero_tol: cfg.zero_tol,
            solver_tol: cfg.solver_tol,
        })
    }

    pub fn design(&self) -> &ForallDesign {
        &self.design
    }

    pub fn v(&self) -> &RealMatrix {
        &self.v
    }
}

#[derive(Clone, Debug)]
pub struct SupportScheme {
    b: Arc<BinaryTestMatrix>,
    v: RealMatrix,
    zero_tol: f64,
}

impl SupportScheme {
    /// Kautz–Singleton `B` sized for `(n, k)`.
    pub fn default_matrix(cfg: &SchemeConfig) -> Result<Arc<BinaryTestMatrix>> {
        Ok(Arc::new(build_kautz_singleton(cfg.n, cfg.k)?.into_matrix()))
    }

    pub fn build(cfg: &SchemeConfig, b: Arc<BinaryTestMatrix>) -> Result<Self> {
        check_dim(cfg.n, b.cols(), "support matrix columns")?;
        Ok(SupportScheme {
            b,
            v: cfg.v(),
            zero_tol: cfg.zero_tol,
        })
    }

    pub fn matrix(&self) -> &BinaryTestMatrix {
        &self.b
    }
}

fn paired_signs(t: Vec<f64>, tail: Vec<f64>, zero_tol: f64) -> SignVector {
    let mut values = Vec::with_capacity(2 * t.len() + tail.len());
    values.extend_from_slice(&t);
    values.extend(t.iter().map(|v| -v));
    values.extend(tail);
    SignVector::from_values(&values, zero_tol)
}

fn split_pair(y: &SignVector, half: usize) -> (SignVector, SignVector, SignVector) {
    (y.slice(0..half), y.slice(half..2 * half), y.slice(2 * half..y.len()))
}

/// A built pipeline.
#[derive(Clone, Debug)]
pub enum Scheme {
    L2l2(L2l2Scheme),
    Foreach(ForeachScheme),
    Forall(ForallScheme),
    Support(SupportScheme),
}

/// Matrices that do not change between trials, built once per run.
#[derive(Clone, Debug, Default)]
pub struct SharedDesign {
    pub forall: Option<Arc<ForallDesign>>,
    pub support: Option<Arc<BinaryTestMatrix>>,
}

impl SharedDesign {
    pub fn build(cfg: &SchemeConfig) -> Result<Self> {
        Ok(match cfg.scheme {
            SchemeKind::Forall => SharedDesign {
                forall: Some(Arc::new(ForallDesign::build(cfg)?)),
                support: None,
            },
            SchemeKind::Support => SharedDesign {
                forall: None,
                support: Some(SupportScheme::default_matrix(cfg)?),
            },
            _ => SharedDesign::default(),
        })
    }

    /// Uses `m` as the group-testing matrix of the for-all or support scheme.
    pub fn from_matrix(cfg: &SchemeConfig, m: BinaryTestMatrix) -> Result<Self> {
        check_dim(cfg.n, m.cols(), "loaded matrix columns")?;
        match cfg.scheme {
            SchemeKind::Forall => Ok(SharedDesign {
                forall: Some(Arc::new(ForallDesign::from_matrix(m, cfg.k, cfg.oracle_budget)?)),
                support: None,
            }),
            SchemeKind::Support => Ok(SharedDesign {
                forall: None,
                support: Some(Arc::new(m)),
            }),
            s => Err(Error::InvalidConfig(format!(
                "scheme {s} does not take a group-testing matrix"
            ))),
        }
    }
}

impl Scheme {
    pub fn build(cfg: &SchemeConfig, shared: &SharedDesign) -> Result<Self> {
        cfg.validate()?;
        Ok(match cfg.scheme {
            SchemeKind::L2l2 => Scheme::L2l2(L2l2Scheme::build(cfg)?),
            SchemeKind::Foreach => Scheme::Foreach(ForeachScheme::build(cfg)?),
            SchemeKind::Forall => {
                let design = match &shared.forall {
                    Some(d) => Arc::clone(d),
                    None => Arc::new(ForallDesign::build(cfg)?),
                };
                Scheme::Forall(ForallScheme::build(cfg, design)?)
            }
            SchemeKind::Support => {
                let b = match &shared.support {
                    Some(b) => Arc::clone(b),
                    None => SupportScheme::default_matrix(cfg)?,
                };
                Scheme::Support(SupportScheme::build(cfg, b)?)
            }
        })
    }

    pub fn kind(&self) -> SchemeKind {
        match self {
            Scheme::L2l2(_) => SchemeKind::L2l2,
            Scheme::Foreach(_) => SchemeKind::Foreach,
            Scheme::Forall(_) => SchemeKind::Forall,
            Scheme::Support(_) => SchemeKind::Support,
        }
    }

    /// Total number of sign measurements.
    pub fn measurements(&self) -> usize {
        match self {
            Scheme::L2l2(s) => s.measurements(),
            Scheme::Foreach(s) => s.measurements(),
            Scheme::Forall(s) => 2 * s.design.a.rows() * s.v.rows() + s.g2.rows(),
            Scheme::Support(s) => 2 * s.b.rows() * s.v.rows(),
        }
    }

    pub fn encode(&self, x: &SparseSignal) -> Result<SignVector> {
        match self {
            Scheme::L2l2(s) => {
                let op = StackedOperator::new(vec![&s.sketch, &s.phi])?;
                crate::sensing::sign_encode(&op, x, s.zero_tol)
            }
            Scheme::Foreach(s) => {
                let pos = MaskedGaussian {
                    a: &s.a,
                    g1: s.g1,
                    sign: 1.0,
                };
                let neg = MaskedGaussian {
                    a: &s.a,
                    g1: s.g1,
                    sign: -1.0,
                };
                let op = StackedOperator::new(vec![&pos, &neg, &s.g2])?;
                crate::sensing::sign_encode(&op, x, s.zero_tol)
            }
            Scheme::Forall(s) => Ok(paired_signs(
                tensor_measure(&s.design.a, &s.v, x)?,
                s.g2.apply(x)?,
                s.zero_tol,
            )),
            Scheme::Support(s) => Ok(paired_signs(tensor_measure(&s.b, &s.v, x)?, Vec::new(), s.zero_tol)),
        }
    }

    pub fn decode(&self, y: &SignVector) -> Result<Decoded> {
        check_dim(self.measurements(), y.len(), "sign vector length")?;
        match self {
            Scheme::L2l2(s) => {
                let rows = s.sketch.rows();
                let heavy = recover_heavy(&s.sketch, &y.slice(0..rows))?;
                let estimate = recover_on_subset(&s.phi, &y.slice(rows..y.len()), &heavy.set, s.k, s.solver_tol)?;
                Ok(Decoded {
                    stage1: heavy.set,
                    estimate: Some(estimate),
                })
            }
            Scheme::Foreach(s) => {
                let stage1 = s.stage1(y)?.set;
                let y2 = y.slice(2 * s.a.total_rows()..y.len());
                let estimate = recover_on_subset(&s.g2, &y2, &stage1, s.k, s.solver_tol)?;
                Ok(Decoded {
                    stage1,
                    estimate: Some(estimate),
                })
            }
            Scheme::Forall(s) => {
                let (p, n, y2) = split_pair(y, s.design.a.rows() * s.v.rows());
                let stage1 = modified_decode(&s.design.a, &s.v, &p, &n)?;
                let estimate = recover_on_subset(&s.g2, &y2, &stage1, s.k, s.solver_tol)?;
                Ok(Decoded {
                    stage1,
                    estimate: Some(estimate),
                })
            }
            Scheme::Support(s) => {
                let (p, n, _) = split_pair(y, s.b.rows() * s.v.rows());
                Ok(Decoded {
                    stage1: modified_decode(&s.b, &s.v, &p, &n)?,
                    estimate: None,
                })
            }
        }
    }
}

impl L2l2Scheme {
    pub fn measurements(&self) -> usize {
        self.sketch.rows() + self.phi.rows()
    }
}

impl ForeachScheme {
    pub fn measurements(&self) -> usize {
        2 * self.a.total_rows() + self.g2.rows()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timings {
    pub build: Duration,
    pub encode: Duration,
    pub decode: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeReport {
    pub scheme: SchemeKind,
    pub measurements_used: usize,
    pub stage1: Vec<usize>,
    pub estimate: Option<SparseEstimate>,
    /// `‖x̂ − x‖₂²`, or for support recovery the size of the symmetric
    /// difference between `S` and `supp(x)`.
    pub squared_error: f64,
    /// Error bound the scheme promises for this signal.
    pub bound: f64,
    pub success: bool,
    /// Stage-1 contract: heavy set captured within capacity (`l2l2`),
    /// superset of size at most `2k` (`foreach`, `forall`), exact support
    /// (`support`).
    pub stage1_ok: bool,
    /// Verification status of the fixed group-testing matrix (`forall`).
    pub design_verified: Option<bool>,
    pub timings: Timings,
}

/// Checks the signal against the scheme's preconditions.
pub fn check_signal(cfg: &SchemeConfig, x: &SparseSignal) -> Result<()> {
    check_dim(cfg.n, x.n(), "signal dimension")?;
    let sparse = x.nonzeros().count() <= cfg.k;
    match cfg.scheme {
        SchemeKind::L2l2 if !x.is_unit() => Err(Error::InvalidSignal(format!("signal norm {} is not 1", x.norm2()))),
        SchemeKind::Foreach | SchemeKind::Forall if !(x.is_unit() && sparse) => Err(Error::InvalidSignal(format!(
            "signal must be unit-norm and {}-sparse",
            cfg.k
        ))),
        SchemeKind::Support if !sparse => Err(Error::InvalidSignal(format!("signal must be {}-sparse", cfg.k))),
        _ => Ok(()),
    }
}

/// Indices with `|x_i|² > ‖x_tail(k)‖₂²/(10k)`.
pub fn heavy_set(x: &SparseSignal, k: usize) -> Vec<usize> {
    let threshold = x.tail_energy(k) / (10 * k) as f64;
    x.nonzeros()
        .filter(|&(_, v)| v * v > threshold)
        .map(|(i, _)| i)
        .collect()
}

fn contains_all(set: &[usize], items: &[usize]) -> bool {
    items.iter().all(|i| set.binary_search(i).is_ok())
}

/// Scores a decoded result against the true signal.
pub fn evaluate(
    cfg: &SchemeConfig,
    scheme: &Scheme,
    x: &SparseSignal,
    decoded: Decoded,
    timings: Timings,
) -> Result<SchemeReport> {
    let support = x.support();
    let k = cfg.k;
    let (squared_error, bound, stage1_ok) = match scheme.kind() {
        SchemeKind::L2l2 => {
            let est = decoded.estimate.as_ref().expect("l2l2 produces an estimate");
            let capacity = cfg.sketch.c_cap * k;
            let ok = contains_all(&decoded.stage1, &heavy_set(x, k)) && decoded.stage1.len() <= capacity;
            (est.squared_error(x)?, cfg.c_bound * x.tail_energy(k) + cfg.delta, ok)
        }
        SchemeKind::Foreach | SchemeKind::Forall => {
            let est = decoded.estimate.as_ref().expect("stage 2 produces an estimate");
            let ok = contains_all(&decoded.stage1, &support) && decoded.stage1.len() <= 2 * k;
            (est.squared_error(x)?, cfg.delta, ok)
        }
        SchemeKind::Support => {
            let missed = support
                .iter()
                .filter(|i| decoded.stage1.binary_search(i).is_err())
                .count();
            let extra = decoded
                .stage1
                .iter()
                .filter(|i| support.binary_search(i).is_err())
                .count();
            ((missed + extra) as f64, 0.0, missed + extra == 0)
        }
    };
    Ok(SchemeReport {
        scheme: scheme.kind(),
        measurements_used: scheme.measurements(),
        stage1: decoded.stage1,
        estimate: decoded.estimate,
        squared_error,
        bound,
        success: squared_error <= bound,
        stage1_ok,
        design_verified: match scheme {
            Scheme::Forall(s) => s.design.verified,
            _ => None,
        },
        timings,
    })
}

/// Encode and decode `x` with an already built scheme.
pub fn run_built(cfg: &SchemeConfig, scheme: &Scheme, x: &SparseSignal, build: Duration) -> Result<SchemeReport> {
    check_signal(cfg, x)?;
    let t0 = Instant::now();
    let y = scheme.encode(x)?;
    let encode = t0.elapsed();
    let t1 = Instant::now();
    let decoded = scheme.decode(&y)?;
    let decode = t1.elapsed();
    evaluate(cfg, scheme, x, decoded, Timings { build, encode, decode })
}

/// Build, encode and decode in one go.
pub fn run_scheme(cfg: &SchemeConfig, shared: &SharedDesign, x: &SparseSignal) -> Result<SchemeReport> {
    check_signal(cfg, x)?;
    let t0 = Instant::now();
    let scheme = Scheme::build(cfg, shared)?;
    let build = t0.elapsed();
    run_built(cfg, &scheme, x, build)
}

fn run_as(kind: SchemeKind, x: &SparseSignal, cfg: &SchemeConfig) -> Result<SchemeReport> {
    let cfg = SchemeConfig {
        scheme: kind,
        ..cfg.clone()
    };
    run_scheme(&cfg, &SharedDesign::default(), x)
}

pub fn run_l2l2_foreach(x: &SparseSignal, cfg: &SchemeConfig) -> Result<SchemeReport> {
    run_as(SchemeKind::L2l2, x, cfg)
}

pub fn run_noiseless_foreach(x: &SparseSignal, cfg: &SchemeConfig) -> Result<SchemeReport> {
    run_as(SchemeKind::Foreach, x, cfg)
}

pub fn run_noiseless_forall(x: &SparseSignal, cfg: &SchemeConfig) -> Result<SchemeReport> {
    run_as(SchemeKind::Forall, x, cfg)
}

pub fn run_support_recovery(x: &SparseSignal, cfg: &SchemeConfig) -> Result<SchemeReport> {
    run_as(SchemeKind::Support, x, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: usize, j: usize, k: usize) -> SparseSignal {
        SparseSignal::from_support(n, &[j], &[1.0], k).unwrap()
    }

    #[test]
    fn scheme_names_round_trip() {
        for k in SchemeKind::ALL {
            assert_eq!(k.name().parse::<SchemeKind>().unwrap(), k);
        }
        assert!("l1".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn row_budgets() {
        let cfg = SchemeConfig::new(SchemeKind::Foreach, 6561, 3, 0.25);
        assert_eq!(cfg.r_prime(), 64 * 16 * 3);
        let cfg = SchemeConfig::new(SchemeKind::Forall, 64, 2, 0.25);
        assert_eq!(cfg.r_prime(), 64 * 16 * 2 * 5);
        assert_eq!(SchemeConfig::new(SchemeKind::Support, 27, 2, 1.0).r_prime(), 0);
    }

    #[test]
    fn invalid_configs_and_signals() {
        assert!(SchemeConfig::new(SchemeKind::Foreach, 10, 0, 0.5).validate().is_err());
        assert!(SchemeConfig::new(SchemeKind::Foreach, 10, 2, 0.0).validate().is_err());
        assert!(SchemeConfig::new(SchemeKind::Foreach, 10, 2, 1.5).validate().is_err());
        let cfg = SchemeConfig::new(SchemeKind::Foreach, 16, 1, 0.5);
        let dense = SparseSignal::new(vec![0.5; 4].into_iter().chain(vec![0.0; 12]).collect(), 1).unwrap();
        assert!(run_scheme(&cfg, &SharedDesign::default(), &dense).is_err());
        let short = SparseSignal::from_support(15, &[0], &[1.0], 1).unwrap();
        assert!(run_scheme(&cfg, &SharedDesign::default(), &short).is_err());
        let cfg = SchemeConfig::new(SchemeKind::L2l2, 16, 1, 0.5);
        let half = SparseSignal::from_support(16, &[0], &[0.5], 1).unwrap();
        assert!(run_scheme(&cfg, &SharedDesign::default(), &half).is_err());
    }

    #[test]
    fn measurement_accounting() {
        let cfg = SchemeConfig::new(SchemeKind::Foreach, 81, 2, 0.5).with_seed(3);
        let r = run_noiseless_foreach(&e(81, 5, 2), &cfg).unwrap();
        let a = RecursiveGTMatrix::build(81, 2, cfg.d_rule, Seed::new(0)).unwrap();
        assert_eq!(r.measurements_used, 2 * a.total_rows() + cfg.r_prime());

        let cfg = SchemeConfig::new(SchemeKind::Forall, 32, 2, 0.5);
        let r = run_noiseless_forall(&e(32, 7, 2), &cfg).unwrap();
        let d = ForallDesign::build(&cfg).unwrap();
        assert_eq!(r.measurements_used, 2 * d.matrix().rows() * 2 + cfg.r_prime());
        assert_eq!(r.design_verified, Some(true));

        let cfg = SchemeConfig::new(SchemeKind::Support, 27, 2, 1.0);
        let r = run_support_recovery(&e(27, 3, 2), &cfg).unwrap();
        assert_eq!(r.measurements_used, 2 * 25 * 2);

        let cfg = SchemeConfig::new(SchemeKind::L2l2, 64, 1, 0.5);
        let r = run_l2l2_foreach(&e(64, 9, 1), &cfg).unwrap();
        assert_eq!(
            r.measurements_used,
            cfg.sketch_config().unwrap().total_rows() + cfg.r_prime()
        );
    }

    #[test]
    fn encoded_length_matches_measurements() {
        for kind in SchemeKind::ALL {
            let cfg = SchemeConfig::new(kind, 64, 2, 0.5).with_seed(1);
            let s = Scheme::build(&cfg, &SharedDesign::default()).unwrap();
            let x = SparseSignal::from_support(64, &[3, 40], &[0.6, -0.8], 2).unwrap();
            assert_eq!(s.encode(&x).unwrap().len(), s.measurements(), "{kind}");
        }
    }

    #[test]
    fn paired_bits_of_disjoint_rows_are_both_plus_one() {
        let cfg = SchemeConfig::new(SchemeKind::Foreach, 81, 2, 0.5).with_seed(2);
        let Scheme::Foreach(s) = Scheme::build(&cfg, &SharedDesign::default()).unwrap() else {
            unreachable!()
        };
        let x = e(81, 17, 2);
        let y = Scheme::Foreach(s.clone()).encode(&x).unwrap();
        let rows = s.matrix().total_rows();
        let hit: Vec<usize> = s.matrix().column_rows(17).collect();
        for r in 0..rows {
            let (p, n) = (y.get(r), y.get(rows + r));
            if hit.contains(&r) {
                assert_eq!(p, -n, "row {r}");
            } else {
                assert_eq!((p, n), (1, 1), "row {r}");
            }
        }
        assert_eq!(s.outcomes(&y).unwrap(), s.matrix().outcomes_for(&[17]).unwrap());
    }

    #[test]
    fn one_hot_foreach_recovers() {
        let cfg = SchemeConfig::new(SchemeKind::Foreach, 6561, 3, 0.25).with_seed(9);
        let r = run_noiseless_foreach(&e(6561, 4000, 3), &cfg).unwrap();
        assert!(r.stage1.contains(&4000));
        assert!(r.success, "error {}", r.squared_error);
    }

    #[test]
    fn stage2_reseeding_keeps_stage1() {
        let cfg = SchemeConfig::new(SchemeKind::Foreach, 729, 2, 0.5).with_seed(4);
        let s = ForeachScheme::build(&cfg).unwrap();
        let t = s.clone().with_stage2_seed(Seed::new(12345));
        let x = SparseSignal::from_support(729, &[10, 500], &[0.8, 0.6], 2).unwrap();
        let (a, b) = (Scheme::Foreach(s), Scheme::Foreach(t));
        let da = a.decode(&a.encode(&x).unwrap()).unwrap();
        let db = b.decode(&b.encode(&x).unwrap()).unwrap();
        assert_eq!(da.stage1, db.stage1);
        assert_ne!(da.estimate, db.estimate);
    }

    #[test]
    fn forall_one_hot_is_always_found() {
        let cfg = SchemeConfig::new(SchemeKind::Forall, 32, 2, 0.5);
        let s = Scheme::build(&cfg, &SharedDesign::build(&cfg).unwrap()).unwrap();
        for j in 0..32 {
            for sign in [1.0, -1.0] {
                let x = SparseSignal::from_support(32, &[j], &[sign], 2).unwrap();
                let d = s.decode(&s.encode(&x).unwrap()).unwrap();
                assert!(d.stage1.contains(&j));
            }
        }
    }

    #[test]
    fn support_is_sign_invariant_and_empty_for_zero() {
        let cfg = SchemeConfig::new(SchemeKind::Support, 27, 2, 1.0).with_seed(6);
        let x = SparseSignal::from_support(27, &[2, 19], &[0.3, -1.7], 2).unwrap();
        let a = run_support_recovery(&x, &cfg).unwrap();
        let b = run_support_recovery(&x.negated(), &cfg).unwrap();
        assert_eq!(a.stage1, vec![2, 19]);
        assert_eq!(a.stage1, b.stage1);
        assert!(a.success && a.squared_error == 0.0);
        let zero = run_support_recovery(&SparseSignal::zeros(27, 2).unwrap(), &cfg).unwrap();
        assert!(zero.stage1.is_empty());
    }

    #[test]
    fn zero_tail_bound_is_delta() {
        let cfg = SchemeConfig::new(SchemeKind::L2l2, 256, 2, 0.3).with_seed(5);
        let x = SparseSignal::from_support(256, &[1, 200], &[0.6, 0.8], 2).unwrap();
        let r = run_l2l2_foreach(&x, &cfg).unwrap();
        assert_eq!(r.bound, 0.3);
        assert_eq!(r.success, r.squared_error <= 0.3);
    }

    #[test]
    fn heavy_set_threshold() {
        // tail = 0.01 + 0.0025, threshold for k = 1 is 0.00125.
        let x = SparseSignal::new(vec![0.99f64.sqrt(), 0.1, 0.05, 0.0], 1).unwrap();
        assert_eq!(heavy_set(&x, 1), vec![0, 1, 2]);
        // Twenty equal tail entries each hold a twentieth of the tail.
        let x = SparseSignal::new([vec![0.9], vec![0.05; 20]].concat(), 1).unwrap();
        assert_eq!(heavy_set(&x, 1), vec![0]);
    }
}
