use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use plint_core::autodiff::{learn_sum, LearnConfig};
use plint_core::bench::{self, AddBench, AddQuery, BenchRecord, CsvSink, Engine, LuhnBench, Timed};
use plint_core::checks::{self, GRAD_TOL, ORACLE_TOL};
use plint_core::lang::{self, LangError, QueryResult, QueryValue};
use plint_core::oracle::enumerate_program;
use plint_core::programs::digits::{expected_recombined, sum_direct, sum_with_carry};
use plint_core::programs::sudoku::{constraint_probs, exactly_one_source, Grid};
use plint_core::ProbInt;

const EXIT_USAGE: u8 = 1;
const EXIT_ENGINE: u8 = 2;
const EXIT_TOLERANCE: u8 = 3;

#[derive(Parser)]
#[command(name = "plint", version, about = "Exact inference for linear arithmetic over random integers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the queries of a program file
    Eval {
        file: PathBuf,
        /// Require every declared variable to be normalized
        #[arg(long)]
        strict: bool,
        /// Print a JSON array instead of one line per query
        #[arg(long)]
        json: bool,
    },
    /// Timing suites (CSV output)
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Randomized self-checks
    Check(CheckArgs),
    /// Demonstrations
    #[command(subcommand)]
    Demo(DemoCommand),
    /// Sudoku constraint probabilities for a random (or given) grid
    Sudoku(SudokuArgs),
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Sum of two random integers over {0..2^i - 1}
    Add(BenchAddArgs),
    /// Luhn check over uniform digits
    Luhn(BenchLuhnArgs),
}

#[derive(Args)]
struct BenchAddArgs {
    #[arg(long, default_value_t = 1)]
    bitwidth_min: u32,
    #[arg(long, default_value_t = 14)]
    bitwidth_max: u32,
    #[arg(long, default_value_t = 5)]
    trials: u32,
    /// Comma-separated subset of fft,naive
    #[arg(long, value_delimiter = ',', default_value = "fft,naive")]
    engines: Vec<String>,
    /// expect, lt or eq
    #[arg(long, default_value = "expect")]
    query: String,
    /// Write rows here instead of standard output
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct BenchLuhnArgs {
    #[arg(long, default_value_t = 1)]
    length_min: u32,
    #[arg(long, default_value_t = 350)]
    length_max: u32,
    #[arg(long, default_value_t = 50)]
    step: u32,
    #[arg(long, default_value_t = 3)]
    trials: u32,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Accepted for uniformity; the digits are uniform
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct CheckArgs {
    /// Engine against brute-force enumeration
    #[arg(long)]
    oracle: bool,
    /// Analytic gradients against finite differences
    #[arg(long)]
    grad: bool,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Largest support size of a generated variable
    #[arg(long, default_value_t = 10)]
    max_dim: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum DemoCommand {
    /// Learn digit distributions from sums of two hidden numbers
    LearnSum(LearnSumArgs),
}

#[derive(Args)]
struct LearnSumArgs {
    #[arg(long, default_value_t = 1)]
    digits: usize,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 0.5)]
    lr: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Hidden numbers as `a,b`; drawn from the seed when absent
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<i64>>,
    /// Write the loss trace here
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SudokuArgs {
    /// 4 or 9
    #[arg(long, default_value_t = 4)]
    grid: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Row-major point values instead of random cells, comma separated
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<i64>>,
}

enum Failure {
    Usage(String),
    Engine(String),
    Tolerance(String),
}

impl From<plint_core::Error> for Failure {
    fn from(e: plint_core::Error) -> Self {
        Failure::Engine(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Engine(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Eval { file, strict, json } => cmd_eval(&file, strict, json),
        Command::Bench(BenchCommand::Add(a)) => cmd_bench_add(a),
        Command::Bench(BenchCommand::Luhn(a)) => cmd_bench_luhn(a),
        Command::Check(a) => cmd_check(a),
        Command::Demo(DemoCommand::LearnSum(a)) => cmd_learn_sum(a),
        Command::Sudoku(a) => cmd_sudoku(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Engine(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_ENGINE)
        }
        Err(Failure::Tolerance(m)) => {
            eprintln!("tolerance violation: {m}");
            ExitCode::from(EXIT_TOLERANCE)
        }
    }
}

fn json_result(r: &QueryResult) -> serde_json::Value {
    match &r.value {
        QueryValue::Scalar(v) => json!({ "query": r.text, "kind": r.kind, "value": v }),
        QueryValue::Pmf { offset, masses } => {
            json!({ "query": r.text, "kind": r.kind, "offset": offset, "masses": masses })
        }
    }
}

fn cmd_eval(file: &PathBuf, strict: bool, as_json: bool) -> Result<(), Failure> {
    let src = std::fs::read_to_string(file)
        .map_err(|e| Failure::Usage(format!("{}: {e}", file.display())))?;
    let located = |e: LangError| format!("{}:{e}", file.display());
    let program = lang::parse(&src).map_err(|e| Failure::Usage(located(e)))?;
    let results = lang::evaluate(&program, strict).map_err(|e| {
        if e.is_static() {
            Failure::Usage(located(e))
        } else {
            Failure::Engine(located(e))
        }
    })?;
    let mut out = io::stdout().lock();
    if as_json {
        let arr: Vec<_> = results.iter().map(json_result).collect();
        writeln!(out, "{}", serde_json::to_string_pretty(&arr).expect("serializable"))?;
    } else {
        for r in &results {
            writeln!(out, "{r}")?;
        }
    }
    Ok(())
}

fn csv_target(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).map_err(|e| Failure::Engine(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout()),
    })
}

fn run_bench(
    csv: &Option<PathBuf>,
    run: impl FnOnce(&mut dyn FnMut(&Timed)) -> plint_core::Result<Vec<Timed>>,
) -> Result<Vec<Timed>, Failure> {
    let mut sink = CsvSink::new(csv_target(csv)?);
    let mut write_err = None;
    let rows = run(&mut |t: &Timed| {
        if write_err.is_none() {
            write_err = sink.write(&t.record).err();
        }
        let r = &t.record;
        eprintln!(
            "{} {} size={} trial={} engine={} {:.6}s",
            r.suite, r.query_kind, r.size, r.trial, r.engine, r.wall_seconds
        );
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    sink.finish()?;
    Ok(rows)
}

fn cmd_bench_add(a: BenchAddArgs) -> Result<(), Failure> {
    let engines = a
        .engines
        .iter()
        .map(|s| s.parse::<Engine>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let query: AddQuery = a.query.parse().map_err(|e: plint_core::Error| Failure::Usage(e.to_string()))?;
    if a.bitwidth_min < 1 || a.bitwidth_min > a.bitwidth_max || a.bitwidth_max > bench::MAX_BITWIDTH {
        return Err(Failure::Usage(format!(
            "bitwidths must satisfy 1 <= min <= max <= {}",
            bench::MAX_BITWIDTH
        )));
    }
    let cfg = AddBench {
        bitwidth_min: a.bitwidth_min,
        bitwidth_max: a.bitwidth_max,
        trials: a.trials,
        engines,
        query,
        seed: a.seed,
    };
    let rows = run_bench(&a.csv, |on| bench::bench_add(&cfg, on))?;
    let bad: Vec<&BenchRecord> = rows
        .iter()
        .map(|t| &t.record)
        .filter(|r| !(r.mass_error <= 1e-9))
        .collect();
    if let Some(r) = bad.first() {
        return Err(Failure::Tolerance(format!(
            "mass error {:e} at bitwidth {} ({})",
            r.mass_error, r.size, r.engine
        )));
    }
    // Both engines saw the same inputs; their answers must agree.
    for pair in rows.windows(2) {
        let (x, y) = (&pair[0], &pair[1]);
        if x.record.size == y.record.size && x.record.trial == y.record.trial && x.record.engine != y.record.engine {
            let d = (x.value - y.value).abs();
            if !(d <= 1e-10 * x.value.abs().max(1.0)) {
                return Err(Failure::Tolerance(format!(
                    "engines disagree by {d:e} at bitwidth {}",
                    x.record.size
                )));
            }
        }
    }
    Ok(())
}

fn cmd_bench_luhn(a: BenchLuhnArgs) -> Result<(), Failure> {
    let cfg = LuhnBench {
        length_min: a.length_min,
        length_max: a.length_max,
        step: a.step,
        trials: a.trials,
    };
    bench::luhn_lengths(&cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    let rows = run_bench(&a.csv, |on| bench::bench_luhn(&cfg, on))?;
    if let Some(r) = rows.iter().find(|t| !((t.value - 0.1).abs() <= 1e-9)) {
        return Err(Failure::Tolerance(format!(
            "Pr[check == 0] = {} at length {}",
            r.value, r.record.size
        )));
    }
    Ok(())
}

fn cmd_check(a: CheckArgs) -> Result<(), Failure> {
    let (oracle, grad) = if !a.oracle && !a.grad { (true, true) } else { (a.oracle, a.grad) };
    let mut failed = Vec::new();
    if oracle {
        let r = checks::with_threads(a.threads, || checks::oracle_suite(a.trials, a.seed, a.max_dim))??;
        println!(
            "oracle: {} programs, {} queries, max abs error {:e} (tolerance {:e})",
            r.programs, r.queries, r.max_abs_error, ORACLE_TOL
        );
        if !r.passed() {
            if let Some(p) = &r.worst_program {
                eprintln!("worst program:\n{p}");
            }
            failed.push("oracle");
        }
    }
    if grad {
        let r = checks::grad_suite(a.trials, a.seed)?;
        println!(
            "grad: {} trials, {} coordinates, max relative error {:e} (tolerance {:e}){}",
            r.trials,
            r.coords_checked,
            r.max_rel_error,
            GRAD_TOL,
            if r.saw_nan { ", NaN seen" } else { "" }
        );
        if !r.passed() {
            failed.push("grad");
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Tolerance(failed.join(", ")))
    }
}

fn cmd_learn_sum(a: LearnSumArgs) -> Result<(), Failure> {
    if a.digits == 0 || a.digits > 6 {
        return Err(Failure::Usage("--digits must be between 1 and 6".into()));
    }
    let top = 10i64.pow(a.digits as u32) - 1;
    let (x, y) = match a.hidden.as_deref() {
        Some(&[x, y]) => (x, y),
        Some(_) => return Err(Failure::Usage("--hidden takes exactly two numbers".into())),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            (rng.random_range(0..=top), rng.random_range(0..=top))
        }
    };
    if !(0..=top).contains(&x) || !(0..=top).contains(&y) {
        return Err(Failure::Usage(format!("hidden numbers must lie in 0..={top}")));
    }
    let cfg = LearnConfig {
        digits_per_number: a.digits,
        steps: a.steps,
        learning_rate: a.lr,
        seed: a.seed,
    };
    let out = learn_sum(&[x + y], &cfg)?;
    if let Some(path) = &a.csv {
        let mut f = File::create(path)?;
        writeln!(f, "step,loss")?;
        for (i, l) in out.losses.iter().enumerate() {
            writeln!(f, "{i},{l}")?;
        }
    }
    if out.losses.iter().any(|l| l.is_nan()) {
        return Err(Failure::Engine("loss diverged (NaN)".into()));
    }
    let digits_of = |mut v: i64| -> Vec<i64> {
        (0..a.digits)
            .map(|_| {
                let d = v % 10;
                v /= 10;
                d
            })
            .collect()
    };
    let (first, second) = out.argmax_digits();
    let recovered = first == digits_of(x) && second == digits_of(y);
    let number = |d: &[i64]| d.iter().rev().fold(0i64, |acc, &v| acc * 10 + v);
    println!("hidden: {x} + {y} = {}", x + y);
    println!("learned argmax: {} + {}", number(&first), number(&second));
    println!("final loss: {}", out.losses.last().copied().unwrap_or(f64::NAN));
    println!("final likelihood: {}", out.final_likelihoods[0]);
    println!("recovered: {recovered}");

    let direct = sum_direct(&out.first, &out.second)?.expectation()?;
    let carry = expected_recombined(&sum_with_carry(&out.first, &out.second)?)?;
    println!("E[sum] direct {direct} carry {carry}");
    if !((direct - carry).abs() <= 1e-6) {
        return Err(Failure::Tolerance(format!("encodings disagree: {direct} vs {carry}")));
    }
    Ok(())
}

fn cmd_sudoku(a: SudokuArgs) -> Result<(), Failure> {
    if a.grid != 4 && a.grid != 9 {
        return Err(Failure::Usage("--grid must be 4 or 9".into()));
    }
    let grid = match &a.values {
        Some(v) => Grid::from_values(a.grid, v).map_err(|e| Failure::Usage(e.to_string()))?,
        None => Grid::random(a.grid, a.seed)?,
    };
    let report = constraint_probs(&grid)?;
    let groups = grid.groups();
    let mut worst: f64 = 0.0;
    for (chunk, (kind, index, cells)) in report.constraints.chunks(a.grid).zip(&groups) {
        let probs: Vec<String> = chunk.iter().map(|c| format!("{:.6}", c.prob)).collect();
        println!("{kind} {index}: {}", probs.join(" "));
        if a.grid == 4 {
            let refs: Vec<&ProbInt> = cells.iter().map(|&i| grid.cell(i / a.grid, i % a.grid)).collect();
            for c in chunk {
                let p = lang::parse(&exactly_one_source(&refs, c.value))
                    .map_err(|e| Failure::Engine(e.to_string()))?;
                let oracle = enumerate_program(&p)?[0].scalar().expect("probability query");
                worst = worst.max((oracle - c.prob).abs());
            }
        }
    }
    println!("log-probability (constraints treated as independent): {}", report.log_prob);
    if a.grid == 4 {
        println!("max |engine - oracle|: {worst:e}");
        if !(worst <= 1e-9) {
            return Err(Failure::Tolerance(format!("oracle mismatch {worst:e}")));
        }
    }
    Ok(())
}
