//! Randomized self-check suites: engine against enumeration, analytic
//! gradients against finite differences, mass conservation, FFT against the
//! quadratic convolution.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{fd_check, FdOptions, LeafParam, Tape, Var};
use crate::conv::{log_conv_exp, naive_conv};
use crate::error::Result;
use crate::inference::{split, BranchSpec, Comparator, Condition};
use crate::lang::{evaluate, parse, DistSpec, QueryValue};
use crate::numeric::exp_mass;
use crate::ops::{add_rv, AtomicOp, LinearOpChain};
use crate::oracle::enumerate_program;
use crate::pmf::ProbInt;
use crate::programs::random_probs;

pub const ORACLE_TOL: f64 = 1e-10;
pub const GRAD_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub programs: usize,
    pub queries: usize,
    pub max_abs_error: f64,
    /// Source of the program with the largest error.
    pub worst_program: Option<String>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.max_abs_error <= ORACLE_TOL
    }
}

/// Largest absolute per-outcome difference between two query values.
pub fn value_distance(a: &QueryValue, b: &QueryValue) -> f64 {
    match (a, b) {
        (QueryValue::Scalar(x), QueryValue::Scalar(y)) => (x - y).abs(),
        (
            QueryValue::Pmf { offset: oa, masses: ma },
            QueryValue::Pmf { offset: ob, masses: mb },
        ) => {
            let lo = (*oa).min(*ob);
            let hi = (oa + ma.len() as i64).max(ob + mb.len() as i64);
            let at = |o: i64, m: &[f64], v: i64| {
                usize::try_from(v - o).ok().and_then(|i| m.get(i)).copied().unwrap_or(0.0)
            };
            (lo..hi)
                .map(|v| (at(*oa, ma, v) - at(*ob, mb, v)).abs())
                .fold(0.0, f64::max)
        }
        _ => f64::INFINITY,
    }
}

/// Operation a generated program is built around.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Focus {
    Shift,
    Negate,
    Scale,
    Div,
    Mod,
    Add,
    Branch,
    Any,
}

const FOCI: [Focus; 7] = [
    Focus::Shift,
    Focus::Negate,
    Focus::Scale,
    Focus::Div,
    Focus::Mod,
    Focus::Add,
    Focus::Branch,
];

struct ProgramGen<'r> {
    rng: &'r mut ChaCha8Rng,
    max_dim: usize,
    decls: String,
    lets: String,
    fresh: usize,
}

impl ProgramGen<'_> {
    fn decl(&mut self, name: &str) {
        let dim = self.rng.random_range(1..=self.max_dim);
        let offset: i64 = self.rng.random_range(-5..=5);
        let spec = match self.rng.random_range(0..10) {
            0 | 1 => DistSpec::Uniform(offset, offset + dim as i64 - 1),
            2 => DistSpec::Point(offset),
            _ => {
                let mut p = random_probs(self.rng, dim);
                if dim > 2 && self.rng.random_bool(0.3) {
                    let z = self.rng.random_range(0..dim);
                    p[z] = 0.0;
                }
                let scale = if self.rng.random_bool(0.3) {
                    self.rng.random_range(0.3..2.0)
                } else {
                    1.0
                };
                DistSpec::Pmf(
                    p.iter()
                        .enumerate()
                        .filter(|(_, &w)| w > 0.0)
                        .map(|(i, &w)| (offset + i as i64, w * scale))
                        .collect(),
                )
            }
        };
        self.decls += &format!("pint {name} ~ {spec};\n");
    }

    fn unary(&mut self, e: String, focus: Focus) -> String {
        let pick = if focus == Focus::Any || focus == Focus::Add || focus == Focus::Branch {
            *[Focus::Shift, Focus::Negate, Focus::Scale, Focus::Div, Focus::Mod]
                .choose(self.rng)
                .unwrap()
        } else {
            focus
        };
        match pick {
            Focus::Shift => {
                let k: i64 = self.rng.random_range(-20..=20);
                if k < 0 {
                    format!("({e} - {})", -k)
                } else {
                    format!("({e} + {k})")
                }
            }
            Focus::Negate => format!("-({e})"),
            Focus::Scale => format!("({e} * {})", self.rng.random_range(-4..=4)),
            Focus::Div => format!("({e} // {})", self.rng.random_range(1..=5)),
            _ => format!("({e} mod {})", self.rng.random_range(1..=7)),
        }
    }

    fn chain(&mut self, e: &str) -> String {
        let mut out = e.to_string();
        for _ in 0..self.rng.random_range(0..=2) {
            out = self.unary(out, Focus::Any);
        }
        out
    }

    fn branch(&mut self, var: &str) -> String {
        let cmp = *Comparator::ALL.choose(self.rng).unwrap();
        let rhs: i64 = self.rng.random_range(-8..=8);
        let body = |g: &mut Self| {
            if g.rng.random_bool(0.15) {
                g.rng.random_range(-9..=9i64).to_string()
            } else {
                g.chain(var)
            }
        };
        let t = body(self);
        let f = body(self);
        format!("(if ({var} {cmp} {rhs}) then {t} else {f})")
    }

    fn expr(&mut self, leaves: &[String], focus: Focus) -> String {
        let base = if leaves.len() == 1 {
            let mut var = leaves[0].clone();
            if self.rng.random_bool(0.3) {
                let name = format!("B{}", self.fresh);
                self.fresh += 1;
                let c = self.chain(&var);
                self.lets += &format!("let {name} = {c};\n");
                var = name;
            }
            if focus == Focus::Branch || (focus == Focus::Any && self.rng.random_bool(0.3)) {
                self.branch(&var)
            } else {
                var
            }
        } else {
            let cut = self.rng.random_range(1..leaves.len());
            let l = self.expr(&leaves[..cut], Focus::Any);
            let r = self.expr(&leaves[cut..], Focus::Any);
            if self.rng.random_bool(0.5) {
                format!("({l} + {r})")
            } else {
                format!("({l} - {r})")
            }
        };
        match focus {
            Focus::Any | Focus::Add | Focus::Branch => self.chain(&base),
            f => self.unary(base, f),
        }
    }
}

/// Source of a random program; its single binding `Y` is what queries refer to.
fn random_program(rng: &mut ChaCha8Rng, max_dim: usize, focus: Focus) -> String {
    let n_leaves = match focus {
        Focus::Add => 2,
        Focus::Any => rng.random_range(1..=3),
        _ => 1,
    };
    let leaves: Vec<String> = (0..n_leaves).map(|i| format!("X{i}")).collect();
    let mut g = ProgramGen {
        rng,
        max_dim,
        decls: String::new(),
        lets: String::new(),
        fresh: 0,
    };
    for l in &leaves {
        g.decl(l);
    }
    let y = g.expr(&leaves, focus);
    format!("{}{}let Y = {y};\n", g.decls, g.lets)
}

/// Generates `trials` random programs (the first few built around one
/// operation each) and compares every query against full enumeration.
pub fn oracle_suite(trials: usize, seed: u64, max_dim: usize) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport {
        programs: 0,
        queries: 0,
        max_abs_error: 0.0,
        worst_program: None,
    };
    for t in 0..trials {
        let focus = FOCI.get(t).copied().unwrap_or(Focus::Any);
        let body = random_program(&mut rng, max_dim.max(1), focus);
        let pmf_src = format!("{body}query pmf[Y];\n");
        let engine_pmf = evaluate(&parse(&pmf_src).map_err(into_engine)?, false).map_err(into_engine)?;
        let (lo, len) = match &engine_pmf[0].value {
            QueryValue::Pmf { offset, masses } => (*offset, masses.len() as i64),
            QueryValue::Scalar(_) => unreachable!("pmf query"),
        };
        let cmp = *Comparator::ALL.choose(&mut rng).unwrap();
        let rhs = rng.random_range(lo - 1..=lo + len);
        let src = format!("{pmf_src}query E[Y];\nquery Pr[Y {cmp} {rhs}];\n");
        let program = parse(&src).map_err(into_engine)?;
        let engine = evaluate(&program, false).map_err(into_engine)?;
        let oracle = enumerate_program(&program)?;
        report.programs += 1;
        for (e, o) in engine.iter().zip(&oracle) {
            report.queries += 1;
            let d = value_distance(&e.value, &o.value);
            if !(d <= report.max_abs_error) {
                report.max_abs_error = d;
                report.worst_program = Some(src.clone());
            }
        }
    }
    Ok(report)
}

fn into_engine(e: crate::lang::LangError) -> crate::Error {
    match e.kind {
        crate::lang::LangErrorKind::Engine(inner) => inner,
        other => crate::Error::InvalidArgument(format!("{}: {other}", e.span)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub trials: usize,
    pub coords_checked: usize,
    pub max_rel_error: f64,
    pub saw_nan: bool,
    /// Trial index with the largest error.
    pub worst_trial: Option<usize>,
}

impl GradReport {
    pub fn passed(&self) -> bool {
        !self.saw_nan && self.max_rel_error <= GRAD_TOL
    }
}

fn random_leaf(rng: &mut ChaCha8Rng) -> LeafParam {
    let dim = rng.random_range(2..=8);
    let offset = rng.random_range(-3..=3);
    if rng.random_bool(0.5) {
        let l = (0..dim).map(|_| rng.random_range(0.05f64..1.0).ln()).collect();
        LeafParam::raw(l, offset)
    } else {
        let l = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
        LeafParam::softmax(l, offset)
    }
}

/// Random chain of shifts, negations, scalings and bucketing ops.
fn random_chain(rng: &mut ChaCha8Rng) -> LinearOpChain {
    let mut ops = Vec::new();
    for _ in 0..rng.random_range(0..=2) {
        ops.push(match rng.random_range(0..5) {
            0 => AtomicOp::Shift(rng.random_range(-5..=5)),
            1 => AtomicOp::Negate,
            2 => AtomicOp::Scale(*[-3, -2, 2, 3].choose(rng).unwrap()),
            3 => AtomicOp::Div(rng.random_range(2..=3)),
            _ => AtomicOp::Mod(rng.random_range(3..=6)),
        });
    }
    LinearOpChain::from_ops(ops).expect("valid ops")
}

/// Random chain that keeps at least two distinct images of `lo..=hi`.
fn spreading_chain(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> LinearOpChain {
    loop {
        let chain = random_chain(rng);
        let first = chain.apply_int(lo).expect("small values");
        if (lo + 1..=hi).any(|v| chain.apply_int(v).expect("small values") != first) {
            return chain;
        }
    }
}

/// Threshold at which `Pr[x cmp t]` is neither 0 nor the full mass, if any.
fn informative_threshold(rng: &mut ChaCha8Rng, x: &ProbInt, cmp: Comparator) -> Option<i64> {
    let total = x.total_mass();
    let mut candidates: Vec<i64> = x
        .support()
        .filter(|&t| {
            let p = x.prob(cmp, t).unwrap_or(0.0);
            p > 1e-6 * total && p < total * (1.0 - 1e-6)
        })
        .collect();
    if candidates.is_empty() {
        return None;
    }
    let i = rng.random_range(0..candidates.len());
    Some(candidates.swap_remove(i))
}

/// Builds a random tape ending in an expectation, comparison or branch query.
fn random_grad_tape(rng: &mut ChaCha8Rng, kind: usize) -> Result<Option<(Tape, Var)>> {
    let mut tape = Tape::new();
    let n_leaves = rng.random_range(1..=3);
    let mut acc: Option<Var> = None;
    for _ in 0..n_leaves {
        let param = random_leaf(rng);
        let (lo, hi) = (param.offset, param.offset + param.logits.len() as i64 - 1);
        let leaf = tape.leaf(param)?;
        let v = tape.apply_chain(leaf, spreading_chain(rng, lo, hi))?;
        acc = Some(match acc {
            Some(a) => tape.add_rv(a, v)?,
            None => v,
        });
    }
    let mut x = acc.expect("at least one leaf");
    if kind == 2 {
        let cmp = *Comparator::ALL.choose(rng).unwrap();
        let dist = tape.dist(x)?.clone();
        // Every other branch trial puts all mass on one side.
        let rhs = if rng.random_bool(0.5) {
            informative_threshold(rng, &dist, cmp).unwrap_or(dist.upper() + 7)
        } else if matches!(cmp, Comparator::Lt | Comparator::Le | Comparator::Eq) {
            dist.upper() + 7
        } else {
            dist.lower() - 7
        };
        let spec = BranchSpec {
            condition: Condition::compare(cmp, rhs)?,
            true_chain: random_chain(rng),
            false_chain: random_chain(rng),
        };
        x = tape.branch(x, spec)?;
    }
    let dist = tape.dist(x)?.clone();
    let any_softmax = tape
        .leaves()
        .iter()
        .any(|l| l.parametrization == crate::autodiff::Parametrization::Softmax);
    let query = if kind == 1 || (kind == 2 && rng.random_bool(0.5)) {
        let cmp = *Comparator::ALL.choose(rng).unwrap();
        match informative_threshold(rng, &dist, cmp) {
            Some(t) => tape.prob_cmp(x, cmp, t)?,
            None => return Ok(None),
        }
    } else {
        if any_softmax && dist.as_point().is_some() {
            return Ok(None);
        }
        tape.expectation(x)?
    };
    // A coordinate the query cannot see leaves only rounding noise in the
    // difference quotient, about eps * |f| / h.
    let floor = 1e-9 * tape.scalar(query)?.abs().max(1.0);
    let grads = tape.grad(query)?;
    let blind = grads.leaves.iter().zip(tape.leaves()).any(|(g, leaf)| {
        g.wrt_param
            .iter()
            .zip(&leaf.logits)
            .any(|(d, l)| l.is_finite() && d.abs() <= floor)
    });
    if blind {
        return Ok(None);
    }
    Ok(Some((tape, query)))
}

/// Compares analytic gradients of random expectation, comparison and branch
/// queries with central differences (step `1e-5`) on every leaf coordinate.
pub fn grad_suite(trials: usize, seed: u64) -> Result<GradReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradReport {
        trials: 0,
        coords_checked: 0,
        max_rel_error: 0.0,
        saw_nan: false,
        worst_trial: None,
    };
    let mut t = 0;
    while report.trials < trials {
        let Some((tape, q)) = random_grad_tape(&mut rng, t % 3)? else {
            continue;
        };
        let r = fd_check(&tape, q, FdOptions::default())?;
        report.coords_checked += r.coords_checked;
        report.saw_nan |= r.saw_nan;
        if !(r.max_rel_error <= report.max_rel_error) {
            report.max_rel_error = r.max_rel_error;
            report.worst_trial = Some(report.trials);
        }
        report.trials += 1;
        t += 1;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassReport {
    pub inputs: usize,
    /// Largest `|total_out - total_in|` over unary ops and branches.
    pub max_unary_error: f64,
    /// Largest `|total_out - t1·t2| / (t1·t2)` over sums.
    pub max_add_rel_error: f64,
}

fn random_pint(rng: &mut ChaCha8Rng, max_dim: usize) -> Result<ProbInt> {
    let dim = rng.random_range(1..=max_dim);
    let scale = rng.random_range(0.2..3.0);
    let p: Vec<f64> = random_probs(rng, dim).into_iter().map(|x| x * scale).collect();
    ProbInt::from_probs(&p, rng.random_range(-50..=50))
}

/// Total mass before and after every unary op, a branch, and a sum.
pub fn mass_suite(inputs: usize, seed: u64) -> Result<MassReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = MassReport {
        inputs,
        max_unary_error: 0.0,
        max_add_rel_error: 0.0,
    };
    for _ in 0..inputs {
        let x = random_pint(&mut rng, 128)?;
        let total = x.total_mass();
        let k = rng.random_range(1..=9);
        let outs = [
            x.add_const(rng.random_range(-100..=100))?,
            x.neg()?,
            x.mul_const(rng.random_range(-5..=5))?,
            x.div_const(k)?,
            x.mod_const(k)?,
            x.branch(&BranchSpec {
                condition: Condition::compare(*Comparator::ALL.choose(&mut rng).unwrap(), rng.random_range(-60..=60))?,
                true_chain: random_chain(&mut rng),
                false_chain: random_chain(&mut rng).scale(rng.random_range(-2..=2)),
            })?,
        ];
        for y in &outs {
            report.max_unary_error = report.max_unary_error.max((y.total_mass() - total).abs());
        }
        let (a, b) = split(&x, &Condition::compare(Comparator::Lt, rng.random_range(-60..=60))?)?;
        let parts = a.map_or(0.0, |p| p.total_mass()) + b.map_or(0.0, |p| p.total_mass());
        report.max_unary_error = report.max_unary_error.max((parts - total).abs());

        let z = random_pint(&mut rng, 128)?;
        let expected = total * z.total_mass();
        let s = add_rv(&x, &z)?;
        report.max_add_rel_error = report
            .max_add_rel_error
            .max((s.total_mass() - expected).abs() / expected);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvReport {
    pub pairs: usize,
    /// Largest `max_k |fft_k - naive_k| / (mass product)` over the pairs.
    pub max_scaled_error: f64,
}

/// FFT convolution against the quadratic one on random pairs up to `max_len` entries.
pub fn conv_suite(pairs: usize, max_len: usize, seed: u64) -> Result<ConvReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let a = random_pint(&mut rng, max_len)?;
        let b = random_pint(&mut rng, max_len)?;
        let fast = log_conv_exp(a.log_mass(), b.log_mass())?;
        let slow = naive_conv(&a.masses(), &b.masses())?;
        let scale = a.total_mass() * b.total_mass();
        let err = fast
            .iter()
            .zip(&slow)
            .map(|(f, s)| (exp_mass(*f) - s).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err / scale);
    }
    Ok(ConvReport {
        pairs,
        max_scaled_error: worst,
    })
}

/// Runs `f` on a dedicated pool of `threads` workers (0 picks the default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| crate::Error::InvalidArgument(e.to_string()))?;
    Ok(pool.install(f))
}
