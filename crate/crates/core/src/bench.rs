//! Timing harness for sums of random integers and Luhn checksums.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inference::Comparator;
use crate::ops::{add_rv_fft, add_rv_naive};
use crate::pmf::ProbInt;
use crate::programs::luhn::luhn_valid_prob;
use crate::programs::random_probs;

/// Largest bitwidth the quadratic engine is run at.
pub const NAIVE_MAX_BITWIDTH: u32 = 14;
/// Largest bitwidth accepted at all; the sum then has `2^27 - 1` outcomes.
pub const MAX_BITWIDTH: u32 = 26;

pub const CSV_HEADER: &str = "suite,query_kind,size,trial,engine,wall_seconds,mass_error";

/// One timed trial. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub suite: String,
    pub query_kind: String,
    /// Bitwidth or identifier length.
    pub size: u32,
    pub trial: u32,
    pub engine: String,
    pub wall_seconds: f64,
    /// `|total mass - expected total|` of the computed distribution.
    pub mass_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Fft,
    Naive,
}

impl Engine {
    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Fft => "fft",
            Engine::Naive => "naive",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fft" => Ok(Engine::Fft),
            "naive" => Ok(Engine::Naive),
            _ => Err(Error::InvalidArgument(format!("unknown engine {s:?}"))),
        }
    }
}

/// `E[X1 + X2]`, `Pr[X1 + X2 < 0]` or `Pr[X1 + X2 == 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddQuery {
    Expect,
    Lt,
    Eq,
}

impl AddQuery {
    pub fn as_str(self) -> &'static str {
        match self {
            AddQuery::Expect => "expect",
            AddQuery::Lt => "lt",
            AddQuery::Eq => "eq",
        }
    }

    fn eval(self, x: &ProbInt) -> Result<f64> {
        match self {
            AddQuery::Expect => x.expectation(),
            AddQuery::Lt => x.prob(Comparator::Lt, 0),
            AddQuery::Eq => x.prob(Comparator::Eq, 0),
        }
    }
}

impl FromStr for AddQuery {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expect" => Ok(AddQuery::Expect),
            "lt" => Ok(AddQuery::Lt),
            "eq" => Ok(AddQuery::Eq),
            _ => Err(Error::InvalidArgument(format!("unknown query {s:?}"))),
        }
    }
}

/// A record together with the query value it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Timed {
    pub record: BenchRecord,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AddBench {
    pub bitwidth_min: u32,
    pub bitwidth_max: u32,
    pub trials: u32,
    pub engines: Vec<Engine>,
    pub query: AddQuery,
    pub seed: u64,
}

impl Default for AddBench {
    fn default() -> Self {
        Self {
            bitwidth_min: 1,
            bitwidth_max: 14,
            trials: 5,
            engines: vec![Engine::Fft, Engine::Naive],
            query: AddQuery::Expect,
            seed: 42,
        }
    }
}

/// Times one query on `X1 + X2`, including building both inputs from `p1`, `p2`.
pub fn time_add(engine: Engine, query: AddQuery, p1: &[f64], p2: &[f64]) -> Result<(f64, f64, f64)> {
    let start = Instant::now();
    let x1 = ProbInt::from_probs(p1, 0)?;
    let x2 = ProbInt::from_probs(p2, 0)?;
    let sum = match engine {
        Engine::Fft => add_rv_fft(&x1, &x2)?,
        Engine::Naive => add_rv_naive(&x1, &x2)?,
    };
    let value = query.eval(&sum)?;
    let secs = start.elapsed().as_secs_f64();
    let expected = x1.total_mass() * x2.total_mass();
    Ok((value, secs, (sum.total_mass() - expected).abs()))
}

/// Runs the addition suite; `on_row` sees each row as soon as it is measured.
/// Naive rows above [`NAIVE_MAX_BITWIDTH`] are skipped.
pub fn bench_add(cfg: &AddBench, mut on_row: impl FnMut(&Timed)) -> Result<Vec<Timed>> {
    if cfg.bitwidth_min < 1 || cfg.bitwidth_min > cfg.bitwidth_max || cfg.bitwidth_max > MAX_BITWIDTH {
        return Err(Error::InvalidRange {
            lo: cfg.bitwidth_min as i64,
            hi: cfg.bitwidth_max as i64,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    for bw in cfg.bitwidth_min..=cfg.bitwidth_max {
        let n = 1usize << bw;
        for trial in 0..cfg.trials {
            let p1 = random_probs(&mut rng, n);
            let p2 = random_probs(&mut rng, n);
            for &engine in &cfg.engines {
                if engine == Engine::Naive && bw > NAIVE_MAX_BITWIDTH {
                    continue;
                }
                let (value, secs, mass_error) = time_add(engine, cfg.query, &p1, &p2)?;
                let row = Timed {
                    record: BenchRecord {
                        suite: "add".into(),
                        query_kind: cfg.query.as_str().into(),
                        size: bw,
                        trial,
                        engine: engine.as_str().into(),
                        wall_seconds: secs,
                        mass_error,
                    },
                    value,
                };
                on_row(&row);
                out.push(row);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LuhnBench {
    pub length_min: u32,
    pub length_max: u32,
    pub step: u32,
    pub trials: u32,
}

impl Default for LuhnBench {
    fn default() -> Self {
        Self {
            length_min: 1,
            length_max: 350,
            step: 50,
            trials: 3,
        }
    }
}

/// Lengths visited: `min, min + step, …` up to and including `max`.
pub fn luhn_lengths(cfg: &LuhnBench) -> Result<Vec<u32>> {
    if cfg.length_min < 1 || cfg.length_min > cfg.length_max || cfg.step < 1 {
        return Err(Error::InvalidRange {
            lo: cfg.length_min as i64,
            hi: cfg.length_max as i64,
        });
    }
    let mut v: Vec<u32> = (cfg.length_min..=cfg.length_max).step_by(cfg.step as usize).collect();
    if v.last() != Some(&cfg.length_max) {
        v.push(cfg.length_max);
    }
    Ok(v)
}

/// Times `Pr[check == 0]` over uniform digits, building the digits inside the timer.
pub fn time_luhn(length: u32) -> Result<(f64, f64, f64)> {
    let start = Instant::now();
    let digits = vec![ProbInt::uniform(0, 9)?; length as usize];
    let value = luhn_valid_prob(&digits)?;
    let secs = start.elapsed().as_secs_f64();
    let total = crate::programs::luhn::luhn_check(&digits)?.total_mass();
    Ok((value, secs, (total - 1.0).abs()))
}

pub fn bench_luhn(cfg: &LuhnBench, mut on_row: impl FnMut(&Timed)) -> Result<Vec<Timed>> {
    let mut out = Vec::new();
    for len in luhn_lengths(cfg)? {
        for trial in 0..cfg.trials {
            let (value, secs, mass_error) = time_luhn(len)?;
            let row = Timed {
                record: BenchRecord {
                    suite: "luhn".into(),
                    query_kind: "eq".into(),
                    size: len,
                    trial,
                    engine: Engine::Fft.as_str().into(),
                    wall_seconds: secs,
                    mass_error,
                },
                value,
            };
            on_row(&row);
            out.push(row);
        }
    }
    Ok(out)
}

/// Streams records as CSV with the fixed header.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(w: W) -> Self {
        Self {
            writer: csv::Writer::from_writer(w),
        }
    }

    pub fn write(&mut self, r: &BenchRecord) -> Result<()> {
        self.writer.serialize(r).map_err(|e| Error::CsvWrite(e.to_string()))
    }

    pub fn finish(mut self) -> Result<W> {
        self.writer.flush().map_err(|e| Error::CsvWrite(e.to_string()))?;
        self.writer.into_inner().map_err(|e| Error::CsvWrite(e.to_string()))
    }
}

pub fn write_csv<W: Write>(records: &[BenchRecord], w: W) -> Result<W> {
    let mut sink = CsvSink::new(w);
    for r in records {
        sink.write(r)?;
    }
    sink.finish()
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Least-squares line through `(ln x, ln y)`: returns `(slope, intercept)`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Fits `y ≈ c·x` in log space and returns `(c, worst ratio)`, where the worst
/// ratio is `max(y/(c·x), c·x/y)` over the points.
pub fn proportional_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    if xs.len() != ys.len() || xs.is_empty() {
        return None;
    }
    let logs: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| y.ln() - x.ln()).collect();
    let ln_c = logs.iter().sum::<f64>() / logs.len() as f64;
    let worst = logs.iter().map(|l| (l - ln_c).abs()).fold(0.0, f64::max);
    Some((ln_c.exp(), worst.exp()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_bitwidths_agree_across_engines() {
        for query in [AddQuery::Expect, AddQuery::Lt, AddQuery::Eq] {
            let cfg = AddBench {
                bitwidth_min: 1,
                bitwidth_max: 3,
                trials: 2,
                query,
                ..Default::default()
            };
            let rows = bench_add(&cfg, |_| {}).unwrap();
            assert_eq!(rows.len(), 12);
            for pair in rows.chunks(2) {
                assert_eq!(pair[0].record.engine, "fft");
                assert_eq!(pair[1].record.engine, "naive");
                assert!((pair[0].value - pair[1].value).abs() < 1e-10);
                assert!(pair.iter().all(|r| r.record.mass_error < 1e-12 && r.record.wall_seconds >= 0.0));
            }
        }
    }

    #[test]
    fn naive_is_capped() {
        let cfg = AddBench {
            bitwidth_min: 15,
            bitwidth_max: 15,
            trials: 1,
            ..Default::default()
        };
        let rows = bench_add(&cfg, |_| {}).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].record.engine, "fft");
        let bad = AddBench { bitwidth_min: 0, ..Default::default() };
        assert!(bench_add(&bad, |_| {}).is_err());
        let bad = AddBench { bitwidth_min: 5, bitwidth_max: 4, ..Default::default() };
        assert!(bench_add(&bad, |_| {}).is_err());
    }

    #[test]
    fn csv_is_stable_apart_from_timings() {
        let cfg = AddBench {
            bitwidth_min: 2,
            bitwidth_max: 4,
            trials: 2,
            ..Default::default()
        };
        let render = || {
            let mut rows: Vec<BenchRecord> =
                bench_add(&cfg, |_| {}).unwrap().into_iter().map(|t| t.record).collect();
            for r in &mut rows {
                r.wall_seconds = 0.0;
            }
            String::from_utf8(write_csv(&rows, Vec::new()).unwrap()).unwrap()
        };
        let a = render();
        assert_eq!(a, render());
        assert_eq!(a.lines().next(), Some(CSV_HEADER));
        assert_eq!(a.lines().count(), 1 + 3 * 2 * 2);
    }

    #[test]
    fn luhn_rows() {
        let cfg = LuhnBench {
            length_min: 1,
            length_max: 12,
            step: 5,
            trials: 1,
        };
        assert_eq!(luhn_lengths(&cfg).unwrap(), vec![1, 6, 11, 12]);
        let rows = bench_luhn(&cfg, |_| {}).unwrap();
        assert_eq!(rows.len(), 4);
        for r in rows {
            assert!((r.value - 0.1).abs() < 1e-12);
            assert!(r.record.mass_error < 1e-12);
        }
    }

    #[test]
    fn fits() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        let (s, i) = loglog_slope(&xs, &ys).unwrap();
        assert!((s - 2.0).abs() < 1e-12 && (i - 3f64.ln()).abs() < 1e-12);
        let (c, worst) = proportional_fit(&xs, &[2.0, 4.0, 8.0, 16.0]).unwrap();
        assert!((c - 2.0).abs() < 1e-12 && (worst - 1.0).abs() < 1e-12);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }
}
