//! Seeded Monte-Carlo trials, exhaustive sweeps, CSV output and decode-time
//! scaling reports.
//!
//! Trial `i` of a run with base seed `s` uses seed `s + i` for every random
//! choice it makes (matrices and signal), so a row can be reproduced on its
//! own. Trials run on a rayon pool whose size is capped by `ONEBIT_THREADS`;
//! rows come back in trial order regardless of scheduling.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use itertools::Itertools;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::Seed;
use crate::schemes::{run_built, run_scheme, Scheme, SchemeConfig, SchemeKind, SchemeReport, SharedDesign};
use crate::sensing::SparseSignal;

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "ONEBIT_THREADS";

/// Largest number of cases an exhaustive sweep may enumerate.
pub const EXHAUSTIVE_BUDGET: u128 = 2_000_000;

pub const CSV_HEADER: [&str; 12] = [
    "scheme",
    "n",
    "k",
    "delta",
    "seed",
    "measurements",
    "stage1_size",
    "squared_error",
    "success",
    "build_ms",
    "encode_ms",
    "decode_ms",
];

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRow {
    pub scheme: SchemeKind,
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    pub seed: u64,
    pub measurements: usize,
    pub stage1_size: usize,
    pub squared_error: f64,
    pub success: bool,
    pub build_ms: f64,
    pub encode_ms: f64,
    pub decode_ms: f64,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

impl TrialRow {
    pub fn from_report(cfg: &SchemeConfig, report: &SchemeReport, timing: bool) -> Self {
        let t = if timing { report.timings } else { Default::default() };
        TrialRow {
            scheme: report.scheme,
            n: cfg.n,
            k: cfg.k,
            delta: cfg.delta,
            seed: cfg.seed,
            measurements: report.measurements_used,
            stage1_size: report.stage1.len(),
            squared_error: report.squared_error,
            success: report.success,
            build_ms: ms(t.build),
            encode_ms: ms(t.encode),
            decode_ms: ms(t.decode),
        }
    }

    fn record(&self) -> [String; 12] {
        let real = |v: f64| format!("{v:.16e}");
        [
            self.scheme.name().to_owned(),
            self.n.to_string(),
            self.k.to_string(),
            real(self.delta),
            self.seed.to_string(),
            self.measurements.to_string(),
            self.stage1_size.to_string(),
            real(self.squared_error),
            u8::from(self.success).to_string(),
            real(self.build_ms),
            real(self.encode_ms),
            real(self.decode_ms),
        ]
    }

    fn from_record(r: &csv::StringRecord) -> Result<Self> {
        if r.len() != CSV_HEADER.len() {
            return Err(Error::Parse(format!(
                "expected {} fields, got {}",
                CSV_HEADER.len(),
                r.len()
            )));
        }
        fn field<T: FromStr>(r: &csv::StringRecord, i: usize) -> Result<T> {
            r[i].parse()
                .map_err(|_| Error::Parse(format!("bad {} value {:?}", CSV_HEADER[i], &r[i])))
        }
        let success = match &r[8] {
            "0" => false,
            "1" => true,
            other => return Err(Error::Parse(format!("bad success flag {other:?}"))),
        };
        Ok(TrialRow {
            scheme: r[0].parse()?,
            n: field(r, 1)?,
            k: field(r, 2)?,
            delta: field(r, 3)?,
            seed: field(r, 4)?,
            measurements: field(r, 5)?,
            stage1_size: field(r, 6)?,
            squared_error: field(r, 7)?,
            success,
            build_ms: field(r, 9)?,
            encode_ms: field(r, 10)?,
            decode_ms: field(r, 11)?,
        })
    }
}

pub fn write_csv<W: Write>(w: W, rows: &[TrialRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for row in rows {
        out.write_record(row.record())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<TrialRow>> {
    let mut reader = csv::Reader::from_reader(r);
    let header = reader.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse(format!("unexpected header {header:?}")));
    }
    reader.records().map(|rec| TrialRow::from_record(&rec?)).collect()
}

/// Where trial signals come from.
#[derive(Clone, Debug, PartialEq)]
pub enum SignalSpec {
    /// `±e_j` at a random coordinate.
    OneHot,
    /// `k` heavy coordinates of equal magnitude with total energy 1, plus a
    /// flat tail of energy 1/4 over the rest, scaled to unit norm.
    Planted,
    /// Random `k`-subset with Gaussian values, scaled to unit norm.
    RandomSparse,
    /// Whitespace-separated values from a file.
    File(PathBuf),
}

impl FromStr for SignalSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "onehot" => Ok(SignalSpec::OneHot),
            "planted" => Ok(SignalSpec::Planted),
            "random-sparse" => Ok(SignalSpec::RandomSparse),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(SignalSpec::File(PathBuf::from(path))),
                _ => Err(Error::InvalidConfig(format!(
                    "unknown signal {s:?} (expected onehot, planted, random-sparse or file:PATH)"
                ))),
            },
        }
    }
}

/// A [`SignalSpec`] with file contents loaded.
#[derive(Clone, Debug, PartialEq)]
pub enum SignalSource {
    OneHot,
    Planted,
    RandomSparse,
    Fixed(SparseSignal),
}

impl SignalSpec {
    pub fn load(&self, n: usize, k: usize) -> Result<SignalSource> {
        Ok(match self {
            SignalSpec::OneHot => SignalSource::OneHot,
            SignalSpec::Planted => SignalSource::Planted,
            SignalSpec::RandomSparse => SignalSource::RandomSparse,
            SignalSpec::File(path) => SignalSource::Fixed(read_signal(path, k)?).check_len(n)?,
        })
    }
}

impl SignalSource {
    fn check_len(self, n: usize) -> Result<Self> {
        if let SignalSource::Fixed(x) = &self {
            if x.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: x.n(),
                    context: "signal file length",
                });
            }
        }
        Ok(self)
    }

    pub fn generate(&self, n: usize, k: usize, seed: Seed) -> Result<SparseSignal> {
        let mut rng = seed.named("signal").rng();
        let sign = |rng: &mut rand_chacha::ChaCha8Rng| if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        match self {
            SignalSource::OneHot => {
                let j = rng.random_range(0..n);
                let s = sign(&mut rng);
                SparseSignal::from_support(n, &[j], &[s], k)
            }
            SignalSource::Planted => planted(n, k, &mut rng),
            SignalSource::RandomSparse => {
                let support = sample(&mut rng, n, k).into_vec();
                let mut values: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
                values.iter_mut().for_each(|v| *v /= norm);
                SparseSignal::from_support(n, &support, &values, k)
            }
            SignalSource::Fixed(x) => Ok(x.clone()),
        }
    }
}

fn planted(n: usize, k: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Result<SparseSignal> {
    if n <= k {
        return Err(Error::InvalidConfig("planted signals need n > k".into()));
    }
    let heavy = sample(rng, n, k).into_vec();
    let tail_value = (0.25 / (n - k) as f64).sqrt();
    let head_value = (1.0 / k as f64).sqrt();
    let mut entries: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.5) { tail_value } else { -tail_value })
        .collect();
    for &i in &heavy {
        entries[i] = if rng.random_bool(0.5) { head_value } else { -head_value };
    }
    let norm = entries.iter().map(|v| v * v).sum::<f64>().sqrt();
    entries.iter_mut().for_each(|v| *v /= norm);
    SparseSignal::new(entries, k)
}

pub fn read_signal(path: &Path, k: usize) -> Result<SparseSignal> {
    let text = std::fs::read_to_string(path)?;
    let values = text
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad signal value {t:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    SparseSignal::new(values, k)
}

/// Pool sized by `ONEBIT_THREADS` when it is set to a positive integer.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => builder = builder.num_threads(t),
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "{THREADS_ENV} must be a positive integer, got {v:?}"
                )))
            }
        }
    }
    builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

/// `trials` independent trials with seeds `base_seed, base_seed + 1, …`.
/// With `timing == false` the timing columns are zero, which makes the output
/// a pure function of the inputs.
pub fn run_trials(
    cfg: &SchemeConfig,
    source: &SignalSource,
    trials: usize,
    base_seed: u64,
    timing: bool,
) -> Result<Vec<TrialRow>> {
    cfg.validate()?;
    let shared = SharedDesign::build(cfg)?;
    run_trials_with(cfg, &shared, source, trials, base_seed, timing)
}

pub fn run_trials_with(
    cfg: &SchemeConfig,
    shared: &SharedDesign,
    source: &SignalSource,
    trials: usize,
    base_seed: u64,
    timing: bool,
) -> Result<Vec<TrialRow>> {
    thread_pool()?.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| {
                let trial = cfg.clone().with_seed(base_seed.wrapping_add(i as u64));
                let x = source.generate(cfg.n, cfg.k, Seed::new(trial.seed))?;
                let report = run_scheme(&trial, shared, &x)?;
                Ok(TrialRow::from_report(&trial, &report, timing))
            })
            .collect()
    })
}

fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    (0..r).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Number of cases [`exhaustive_rows`] would visit.
pub fn exhaustive_cases(cfg: &SchemeConfig) -> Result<u128> {
    let supports = binomial(cfg.n, cfg.k);
    match cfg.scheme {
        SchemeKind::Support => Ok(supports),
        SchemeKind::Forall => Ok(supports << cfg.k),
        s => Err(Error::InvalidConfig(format!(
            "exhaustive sweeps are defined for support and forall, not {s}"
        ))),
    }
}

/// One matrix draw (seed `cfg.seed`), every support of size `k`; for the
/// for-all scheme also every sign pattern. Magnitudes are random and drawn
/// from `cfg.seed`. Rows carry the running case index as their seed.
pub fn exhaustive_rows(cfg: &SchemeConfig, shared: &SharedDesign, timing: bool) -> Result<Vec<TrialRow>> {
    cfg.validate()?;
    let cases = exhaustive_cases(cfg)?;
    if cases > EXHAUSTIVE_BUDGET {
        return Err(Error::BudgetExceeded {
            required: cases,
            budget: EXHAUSTIVE_BUDGET,
        });
    }
    let t0 = Instant::now();
    let scheme = Scheme::build(cfg, shared)?;
    let build = t0.elapsed();
    let patterns: usize = if cfg.scheme == SchemeKind::Forall {
        1 << cfg.k
    } else {
        1
    };
    let mut rng = Seed::new(cfg.seed).named("exhaustive").rng();
    let mut cases = Vec::new();
    for support in (0..cfg.n).combinations(cfg.k) {
        for pattern in 0..patterns {
            let mut values: Vec<f64> = (0..cfg.k)
                .map(|b| {
                    let m = rng.random_range(0.1..1.0);
                    let flip = if patterns > 1 {
                        pattern >> b & 1 == 1
                    } else {
                        rng.random_bool(0.5)
                    };
                    if flip {
                        -m
                    } else {
                        m
                    }
                })
                .collect();
            if cfg.scheme == SchemeKind::Forall {
                let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
                values.iter_mut().for_each(|v| *v /= norm);
            }
            cases.push((support.clone(), values));
        }
    }
    thread_pool()?.install(|| {
        cases
            .into_par_iter()
            .enumerate()
            .map(|(i, (support, values))| {
                let x = SparseSignal::from_support(cfg.n, &support, &values, cfg.k)?;
                let report = run_built(cfg, &scheme, &x, build)?;
                let mut row = TrialRow::from_report(cfg, &report, timing);
                row.seed = i as u64;
                Ok(row)
            })
            .collect()
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub trials: usize,
    pub success_rate: f64,
    pub mean_error: f64,
    pub median_decode_ms: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_unstable_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

pub fn summarize(rows: &[TrialRow]) -> Summary {
    let n = rows.len();
    let mut decode: Vec<f64> = rows.iter().map(|r| r.decode_ms).collect();
    Summary {
        trials: n,
        success_rate: rows.iter().filter(|r| r.success).count() as f64 / n.max(1) as f64,
        mean_error: rows.iter().map(|r| r.squared_error).sum::<f64>() / n.max(1) as f64,
        median_decode_ms: median(&mut decode),
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    pub measurements: usize,
    pub median_decode_ms: f64,
    /// Median time of the full-scan stage-1 decoder (foreach only).
    pub median_baseline_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingReport {
    pub scheme: SchemeKind,
    pub k: usize,
    pub rows: Vec<ScalingRow>,
    pub exponent: f64,
    pub baseline_exponent: Option<f64>,
}

impl ScalingReport {
    /// Fitted decode-time exponent below one half.
    pub fn sublinear(&self) -> bool {
        self.exponent < 0.5
    }
}

/// Decode time against `n` on random `k`-sparse unit signals. Matrix
/// construction and encoding are excluded from the timings. For the foreach
/// scheme the same outcomes are also decoded by a full scan over all `n`
/// columns as a contrast.
pub fn scaling_report(
    template: &SchemeConfig,
    n_list: &[usize],
    trials: usize,
    base_seed: u64,
) -> Result<ScalingReport> {
    if n_list.len() < 2 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "scaling needs at least two increasing sizes".into(),
        ));
    }
    if trials == 0 {
        return Err(Error::InvalidConfig("scaling needs at least one trial per size".into()));
    }
    let mut rows = Vec::new();
    for &n in n_list {
        let cfg = SchemeConfig { n, ..template.clone() };
        cfg.validate()?;
        let shared = SharedDesign::build(&cfg)?;
        let mut decode = Vec::with_capacity(trials);
        let mut baseline = Vec::with_capacity(trials);
        let mut measurements = 0;
        for i in 0..trials {
            let trial = cfg.clone().with_seed(base_seed.wrapping_add(i as u64));
            let x = SignalSource::RandomSparse.generate(n, cfg.k, Seed::new(trial.seed))?;
            let scheme = Scheme::build(&trial, &shared)?;
            measurements = scheme.measurements();
            let y = scheme.encode(&x)?;
            let t = Instant::now();
            std::hint::black_box(scheme.decode(&y)?);
            decode.push(ms(t.elapsed()));
            if let Scheme::Foreach(s) = &scheme {
                let t = Instant::now();
                std::hint::black_box(s.baseline_stage1(&y)?);
                baseline.push(ms(t.elapsed()));
            }
        }
        rows.push(ScalingRow {
            n,
            measurements,
            median_decode_ms: median(&mut decode),
            median_baseline_ms: (!baseline.is_empty()).then(|| median(&mut baseline)),
        });
    }
    let fit = |f: &dyn Fn(&ScalingRow) -> Option<f64>| -> Option<f64> {
        let pts: Option<Vec<(f64, f64)>> = rows.iter().map(|r| f(r).map(|y| (r.n as f64, y.max(1e-9)))).collect();
        pts.map(|p| log_log_slope(&p))
    };
    Ok(ScalingReport {
        scheme: template.scheme,
        k: template.k,
        exponent: fit(&|r| Some(r.median_decode_ms)).expect("every row has a decode time"),
        baseline_exponent: fit(&|r| r.median_baseline_ms),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_laws() {
        let pts: Vec<(f64, f64)> = [10.0, 100.0, 1000.0].iter().map(|&x| (x, 3.0 * x)).collect();
        assert!((log_log_slope(&pts) - 1.0).abs() < 1e-12);
        let flat: Vec<(f64, f64)> = [10.0, 100.0, 1000.0].iter().map(|&x| (x, 2.0)).collect();
        assert!(log_log_slope(&flat).abs() < 1e-12);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&mut []).is_nan());
    }

    #[test]
    fn signal_specs() {
        assert_eq!("onehot".parse::<SignalSpec>().unwrap(), SignalSpec::OneHot);
        assert_eq!(
            "file:/tmp/x".parse::<SignalSpec>().unwrap(),
            SignalSpec::File("/tmp/x".into())
        );
        assert!("file:".parse::<SignalSpec>().is_err());
        assert!("gaussian".parse::<SignalSpec>().is_err());
    }

    #[test]
    fn generated_signals() {
        for seed in 0..20 {
            let s = Seed::new(seed);
            let x = SignalSource::OneHot.generate(50, 2, s).unwrap();
            assert_eq!(x.support().len(), 1);
            assert!(x.is_unit());
            let x = SignalSource::RandomSparse.generate(50, 3, s).unwrap();
            assert_eq!(x.support().len(), 3);
            assert!(x.is_unit());
            let x = SignalSource::Planted.generate(64, 4, s).unwrap();
            assert!(x.is_unit());
            // Heavy entries are 1/2 and the tail has norm 1/2 before scaling.
            let head = x.head(4);
            let head_energy: f64 = head.iter().map(|&i| x.entries()[i].powi(2)).sum();
            assert!((head_energy - 0.8).abs() < 1e-12);
            assert!((x.tail_energy(4) - 0.2).abs() < 1e-12);
        }
        assert_eq!(
            SignalSource::Planted.generate(64, 4, Seed::new(1)).unwrap(),
            SignalSource::Planted.generate(64, 4, Seed::new(1)).unwrap()
        );
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(read_csv(&b"a,b\n1,2\n"[..]).is_err());
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        text.push_str("support,27,2,1e0,0,100,2,0e0,7,0e0,0e0,0e0\n");
        assert!(read_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn exhaustive_cases_and_budget() {
        let cfg = SchemeConfig::new(SchemeKind::Support, 27, 2, 1.0);
        assert_eq!(exhaustive_cases(&cfg).unwrap(), 351);
        let cfg = SchemeConfig::new(SchemeKind::Forall, 64, 2, 0.25);
        assert_eq!(exhaustive_cases(&cfg).unwrap(), 2016 * 4);
        assert!(exhaustive_cases(&SchemeConfig::new(SchemeKind::Foreach, 64, 2, 0.25)).is_err());
        let big = SchemeConfig::new(SchemeKind::Support, 4096, 3, 1.0);
        assert!(matches!(
            exhaustive_rows(&big, &SharedDesign::default(), false),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
