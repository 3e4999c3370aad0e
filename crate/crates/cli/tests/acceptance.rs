//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use plint_core::autodiff::{learn_sum, LearnConfig};
use plint_core::bench::{bench_add, loglog_slope, median, proportional_fit, time_luhn, AddBench, AddQuery, Engine};
use plint_core::checks::{conv_suite, mass_suite};
use plint_core::conv::{log_conv_exp, naive_conv};
use plint_core::lang;
use plint_core::oracle::enumerate_program;
use plint_core::programs::luhn::{fixed_luhn_source, luhn_valid, luhn_valid_prob, uniform_luhn_source};
use plint_core::programs::sudoku::{constraint_probs, exactly_one_source, Grid};
use plint_core::ProbInt;

type Outcome = Result<String, String>;

fn plint(args: &[&str]) -> Result<(std::process::Output, f64), String> {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_plint"))
        .args(args)
        .output()
        .map_err(|e| format!("could not run plint: {e}"))?;
    Ok((out, start.elapsed().as_secs_f64()))
}

fn last_line(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).lines().last().unwrap_or("").to_string()
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_equivalence() -> Outcome {
    let (out, secs) = plint(&["check", "--oracle", "--trials", "200", "--max-dim", "64", "--threads", "1"])?;
    let line = last_line(&out.stdout);
    ensure(
        out.status.success() && secs <= 60.0,
        format!("{line}; {secs:.1}s (limit 60s)"),
    )
}

fn fft_vs_naive() -> Outcome {
    let start = Instant::now();
    let r = conv_suite(200, 4096, 42).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure(
        r.max_scaled_error <= 1e-9 && secs <= 120.0,
        format!(
            "{} pairs, max error / mass product {:e} (limit 1e-9); {secs:.1}s (limit 120s)",
            r.pairs, r.max_scaled_error
        ),
    )
}

fn csv_seconds(path: &Path) -> Result<Vec<(u32, String, f64)>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let size = f[2].parse().map_err(|_| format!("bad row {l}"))?;
            let secs = f[5].parse().map_err(|_| format!("bad row {l}"))?;
            Ok((size, f[4].to_string(), secs))
        })
        .collect()
}

fn desk_scale_runtime() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut worst = Vec::new();
    for (bw, limit) in [(24u32, 100.0), (20, 5.0)] {
        let csv = dir.path().join(format!("add{bw}.csv"));
        let bw_s = bw.to_string();
        let (out, _) = plint(&[
            "bench", "add", "--bitwidth-min", &bw_s, "--bitwidth-max", &bw_s, "--engines", "fft", "--query", "eq",
            "--csv", csv.to_str().unwrap(),
        ])?;
        if !out.status.success() {
            return Err(format!("bench add at bitwidth {bw} failed: {}", last_line(&out.stderr)));
        }
        let rows = csv_seconds(&csv)?;
        let max = rows.iter().map(|r| r.2).fold(0.0, f64::max);
        worst.push((bw, rows.len(), max, limit));
    }
    let ok = worst.iter().all(|&(_, n, max, limit)| n > 0 && max < limit);
    let detail = worst
        .iter()
        .map(|(bw, n, max, limit)| format!("bitwidth {bw}: slowest of {n} trials {max:.2}s (limit {limit}s)"))
        .collect::<Vec<_>>()
        .join("; ");
    ensure(ok, detail)
}

fn medians(engine: Engine, lo: u32, hi: u32, trials: u32) -> Result<Vec<(f64, f64)>, String> {
    let cfg = AddBench {
        bitwidth_min: lo,
        bitwidth_max: hi,
        trials,
        engines: vec![engine],
        query: AddQuery::Eq,
        seed: 42,
    };
    let rows = bench_add(&cfg, |_| {}).map_err(|e| e.to_string())?;
    Ok((lo..=hi)
        .map(|bw| {
            let t: Vec<f64> = rows
                .iter()
                .filter(|r| r.record.size == bw)
                .map(|r| r.record.wall_seconds)
                .collect();
            ((1u64 << bw) as f64, median(&t).unwrap())
        })
        .collect())
}

fn scaling_shape() -> Outcome {
    let fft = medians(Engine::Fft, 10, 22, 3)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = fft.iter().map(|&(n, t)| (n * n.log2(), t)).unzip();
    let (_, ratio) = proportional_fit(&xs, &ys).unwrap();

    let naive = medians(Engine::Naive, 6, 13, 5)?;
    let (nx, ny): (Vec<f64>, Vec<f64>) = naive.into_iter().unzip();
    let (slope, _) = loglog_slope(&nx, &ny).unwrap();

    let fft14 = medians(Engine::Fft, 14, 14, 3)?[0].1;
    let naive14 = medians(Engine::Naive, 14, 14, 3)?[0].1;
    let speedup = naive14 / fft14;
    ensure(
        ratio <= 3.0 && (slope - 2.0).abs() <= 0.3 && speedup >= 10.0,
        format!(
            "fft worst ratio to c*N*log N {ratio:.2} (limit 3); naive exponent {slope:.2} (2.0 +/- 0.3); \
             speedup at bitwidth 14 {speedup:.0}x (limit 10x)"
        ),
    )
}

fn luhn_correctness() -> Outcome {
    let mut worst: f64 = 0.0;
    for len in 1..=5 {
        let engine = luhn_valid_prob(&vec![ProbInt::uniform(0, 9).unwrap(); len]).map_err(|e| e.to_string())?;
        let program = lang::parse(&uniform_luhn_source(len)).map_err(|e| e.to_string())?;
        let oracle = enumerate_program(&program).map_err(|e| e.to_string())?[0]
            .scalar()
            .ok_or("not a scalar query")?;
        worst = worst.max((engine - oracle).abs());
    }
    let id = "79927398713";
    let digits: Vec<ProbInt> = id.bytes().map(|b| ProbInt::point((b - b'0') as i64)).collect();
    let fixed = luhn_valid_prob(&digits).map_err(|e| e.to_string())?;
    let program = lang::parse(&fixed_luhn_source(id).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let dsl = lang::evaluate(&program, true).map_err(|e| e.to_string())?[0].scalar().unwrap();
    let reference = luhn_valid(id).map_err(|e| e.to_string())?;
    ensure(
        worst <= 1e-9 && fixed == 1.0 && dsl == 1.0 && reference,
        format!("lengths 1-5 max |engine - oracle| {worst:e} (limit 1e-9); {id}: engine {fixed}, program {dsl}, scalar check {reference}"),
    )
}

fn luhn_scaling() -> Outcome {
    let time = |len: u32| -> Result<f64, String> {
        let t: Vec<f64> = (0..9)
            .map(|_| time_luhn(len).map(|r| r.1).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        Ok(median(&t).unwrap())
    };
    let (t50, t350) = (time(50)?, time(350)?);
    ensure(
        t350 <= 10.0 * t50,
        format!("median length 50 {:.3}ms, length 350 {:.3}ms, ratio {:.2} (limit 10)", t50 * 1e3, t350 * 1e3, t350 / t50),
    )
}

fn gradient_fidelity() -> Outcome {
    let (out, _) = plint(&["check", "--grad", "--trials", "50"])?;
    ensure(out.status.success(), last_line(&out.stdout))
}

fn learn_sum_demo() -> Outcome {
    let mut recovered = 0;
    let runs = 20;
    for seed in 0..runs {
        let hidden = if seed % 2 == 0 { 0 } else { 9 };
        let cfg = LearnConfig {
            digits_per_number: 1,
            steps: 500,
            learning_rate: 0.5,
            seed,
        };
        let out = learn_sum(&[2 * hidden], &cfg).map_err(|e| e.to_string())?;
        if out.argmax_digits() == (vec![hidden], vec![hidden]) {
            recovered += 1;
        }
    }
    let rate = recovered as f64 / runs as f64;
    ensure(
        rate >= 0.95,
        format!("{recovered}/{runs} runs recovered both digits for labels 0 and 18 (limit 95%)"),
    )
}

fn mass_conservation() -> Outcome {
    let r = mass_suite(1000, 42).map_err(|e| e.to_string())?;
    ensure(
        r.max_unary_error <= 1e-12 && r.max_add_rel_error <= 1e-9,
        format!(
            "{} inputs, unary/branch {:e} (limit 1e-12), sum relative {:e} (limit 1e-9)",
            r.inputs, r.max_unary_error, r.max_add_rel_error
        ),
    )
}

fn sudoku() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for seed in 0..5 {
        let grid = Grid::random(4, seed).map_err(|e| e.to_string())?;
        let report = constraint_probs(&grid).map_err(|e| e.to_string())?;
        for (chunk, (_, _, cells)) in report.constraints.chunks(4).zip(grid.groups()) {
            let refs: Vec<&ProbInt> = cells.iter().map(|&i| grid.cell(i / 4, i % 4)).collect();
            for c in chunk {
                let p = lang::parse(&exactly_one_source(&refs, c.value)).map_err(|e| e.to_string())?;
                let oracle = enumerate_program(&p).map_err(|e| e.to_string())?[0].scalar().unwrap();
                worst = worst.max((oracle - c.prob).abs());
                checked += 1;
            }
        }
    }
    let valid = [1, 2, 3, 4, 3, 4, 1, 2, 2, 1, 4, 3, 4, 3, 2, 1];
    let mut invalid = valid;
    invalid[1] = 1;
    let joint = |v: &[i64]| -> Result<f64, String> {
        let r = constraint_probs(&Grid::from_values(4, v).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        Ok(r.constraints.iter().map(|c| c.prob).product())
    };
    let (pv, pi) = (joint(&valid)?, joint(&invalid)?);
    ensure(
        worst <= 1e-9 && pv == 1.0 && pi == 0.0,
        format!("{checked} constraints, max |engine - oracle| {worst:e} (limit 1e-9); valid grid {pv}, invalid grid {pi}"),
    )
}

fn underflow() -> Outcome {
    let n = 64;
    let lm = vec![(1e-300f64).ln(); n];
    let logs = log_conv_exp(&lm, &lm).map_err(|e| e.to_string())?;
    let linear = naive_conv(&vec![1e-300; n], &vec![1e-300; n]).map_err(|e| e.to_string())?;
    let finite = logs.iter().all(|l| l.is_finite());
    // Entry k collects min(k + 1, 2n - 1 - k) products of 1e-600.
    let worst = logs
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let terms = (k + 1).min(2 * n - 1 - k) as f64;
            (l - (terms.ln() + 2.0 * (1e-300f64).ln())).abs()
        })
        .fold(0.0, f64::max);
    let underflowed = linear.iter().all(|&m| m == 0.0);
    ensure(
        finite && worst <= 1e-9 && underflowed,
        format!("log-domain finite {finite} (max log error {worst:e}); linear-domain all zero {underflowed}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("oracle equivalence", oracle_equivalence),
        ("fft vs naive convolution", fft_vs_naive),
        ("desk-scale runtime", desk_scale_runtime),
        ("scaling shape", scaling_shape),
        ("luhn correctness", luhn_correctness),
        ("luhn scaling", luhn_scaling),
        ("gradient fidelity", gradient_fidelity),
        ("learn-sum demo", learn_sum_demo),
        ("mass conservation", mass_conservation),
        ("sudoku constraints", sudoku),
        ("underflow", underflow),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {:>2}. {name}: {detail} [{secs:.1}s]", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
