//! Brute-force reference semantics: enumerate every joint outcome of the
//! declared variables a query depends on and evaluate it with plain integers.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::{Comparator, Condition};
use crate::lang::{DistSpec, Expr, ExprKind, Program, Query, QueryKind, QueryResult, QueryValue};
use crate::numeric::CompensatedSum;
use crate::ops::AtomicOp;

pub const DEFAULT_CAP: u128 = 10_000_000;

/// Joint outcomes handled per parallel task; fixed so results do not depend on the thread count.
const CHUNK: u128 = 1 << 14;

/// Integer expression with bindings inlined and leaves numbered.
#[derive(Debug, Clone)]
enum IntExpr {
    Leaf(usize),
    Const(i64),
    Add(Box<IntExpr>, Box<IntExpr>),
    Op(AtomicOp, Box<IntExpr>),
    Branch {
        subject: Box<IntExpr>,
        condition: Condition,
        then_branch: Box<IntExpr>,
        else_branch: Box<IntExpr>,
    },
}

impl IntExpr {
    fn eval(&self, state: &[i64]) -> Result<i64> {
        match self {
            IntExpr::Leaf(i) => Ok(state[*i]),
            IntExpr::Const(c) => Ok(*c),
            IntExpr::Add(a, b) => a
                .eval(state)?
                .checked_add(b.eval(state)?)
                .ok_or(Error::IntegerOverflow("sum")),
            IntExpr::Op(op, a) => op.apply_int(a.eval(state)?),
            IntExpr::Branch {
                subject,
                condition,
                then_branch,
                else_branch,
            } => {
                if condition.eval(subject.eval(state)?)? {
                    then_branch.eval(state)
                } else {
                    else_branch.eval(state)
                }
            }
        }
    }
}

/// One enumerated variable: its outcomes and their weights.
#[derive(Debug, Clone)]
struct Leaf {
    values: Vec<i64>,
    weights: Vec<f64>,
}

fn leaf_of(spec: &DistSpec) -> Result<Leaf> {
    match spec {
        DistSpec::Uniform(lo, hi) => {
            if lo > hi {
                return Err(Error::InvalidRange { lo: *lo, hi: *hi });
            }
            let n = (*hi as i128 - *lo as i128 + 1) as u128;
            if n > DEFAULT_CAP {
                return Err(Error::StateSpaceTooLarge { states: n, cap: DEFAULT_CAP });
            }
            let w = 1.0 / n as f64;
            Ok(Leaf {
                values: (*lo..=*hi).collect(),
                weights: vec![w; n as usize],
            })
        }
        DistSpec::Point(v) => Ok(Leaf {
            values: vec![*v],
            weights: vec![1.0],
        }),
        DistSpec::Pmf(entries) => {
            let mut seen = std::collections::HashSet::new();
            for (i, &(v, w)) in entries.iter().enumerate() {
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(Error::NegativeMass { index: i, value: w });
                }
                if !seen.insert(v) {
                    return Err(Error::InvalidArgument(format!("outcome {v} listed twice")));
                }
            }
            Ok(Leaf {
                values: entries.iter().map(|e| e.0).collect(),
                weights: entries.iter().map(|e| e.1).collect(),
            })
        }
    }
}

struct Compiler<'a> {
    program: &'a Program,
    leaf_index: HashMap<&'a str, usize>,
    leaves: Vec<Leaf>,
}

impl<'a> Compiler<'a> {
    fn var(&mut self, name: &'a str) -> Result<IntExpr> {
        if let Some(&i) = self.leaf_index.get(name) {
            return Ok(IntExpr::Leaf(i));
        }
        if let Some(d) = self.program.decl(name) {
            let i = self.leaves.len();
            self.leaves.push(leaf_of(&d.dist)?);
            self.leaf_index.insert(name, i);
            return Ok(IntExpr::Leaf(i));
        }
        match self.program.binding(name) {
            Some(b) => self.compile(&b.expr),
            None => Err(Error::InvalidArgument(format!("unknown name `{name}`"))),
        }
    }

    fn compile(&mut self, e: &'a Expr) -> Result<IntExpr> {
        let unary = |this: &mut Self, op: AtomicOp, a: &'a Expr| -> Result<IntExpr> {
            op.validate()?;
            Ok(IntExpr::Op(op, Box::new(this.compile(a)?)))
        };
        match &e.kind {
            ExprKind::Var(name) => self.var(name),
            ExprKind::Int(c) => Ok(IntExpr::Const(*c)),
            ExprKind::Add(a, b) => Ok(IntExpr::Add(
                Box::new(self.compile(a)?),
                Box::new(self.compile(b)?),
            )),
            ExprKind::AddConst(a, k) => unary(self, AtomicOp::Shift(*k), a),
            ExprKind::Neg(a) => unary(self, AtomicOp::Negate, a),
            ExprKind::MulConst(a, k) => unary(self, AtomicOp::Scale(*k), a),
            ExprKind::IDiv(a, k) => unary(self, AtomicOp::Div(*k), a),
            ExprKind::Mod(a, k) => unary(self, AtomicOp::Mod(*k), a),
            ExprKind::IfThenElse {
                var,
                cmp,
                rhs,
                then_branch,
                else_branch,
            } => Ok(IntExpr::Branch {
                subject: Box::new(self.var(var)?),
                condition: Condition::compare(*cmp, *rhs)?,
                then_branch: Box::new(self.compile(then_branch)?),
                else_branch: Box::new(self.compile(else_branch)?),
            }),
        }
    }
}

#[derive(Default)]
struct Acc {
    scalar: CompensatedSum,
    buckets: BTreeMap<i64, CompensatedSum>,
}

impl Acc {
    fn merge(mut self, other: Acc) -> Acc {
        self.scalar.merge(&other.scalar);
        for (k, v) in other.buckets {
            self.buckets.entry(k).or_default().merge(&v);
        }
        self
    }
}

#[derive(Clone, Copy)]
enum Mode {
    Expect,
    Prob(Comparator, i64),
    Pmf,
}

/// Evaluates `query` by full enumeration, refusing joint spaces larger than `cap`.
pub fn enumerate_query_with_cap(program: &Program, query: &Query, cap: u128) -> Result<QueryValue> {
    let mut c = Compiler {
        program,
        leaf_index: HashMap::new(),
        leaves: Vec::new(),
    };
    let expr = c.compile(query.expr())?;
    let leaves = c.leaves;
    let mut states: u128 = 1;
    for l in &leaves {
        states = states.saturating_mul(l.values.len() as u128);
    }
    if states > cap {
        return Err(Error::StateSpaceTooLarge { states, cap });
    }
    let mode = match &query.kind {
        QueryKind::Expect(_) => Mode::Expect,
        QueryKind::Prob(_, cmp, k) => Mode::Prob(*cmp, *k),
        QueryKind::Pmf(_) => Mode::Pmf,
    };
    let chunks = states.div_ceil(CHUNK);
    let parts: Vec<Result<Acc>> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let start = ci * CHUNK;
            let end = (start + CHUNK).min(states);
            run_chunk(&expr, &leaves, mode, start, end)
        })
        .collect();
    let mut acc = Acc::default();
    for p in parts {
        acc = acc.merge(p?);
    }
    Ok(match mode {
        Mode::Expect | Mode::Prob(..) => QueryValue::Scalar(acc.scalar.value()),
        Mode::Pmf => {
            let (&lo, _) = acc.buckets.first_key_value().ok_or(Error::AllZeroMass)?;
            let (&hi, _) = acc.buckets.last_key_value().ok_or(Error::AllZeroMass)?;
            let n = crate::pmf::check_dim((hi as i128 - lo as i128 + 1) as u128)?;
            let mut masses = vec![0.0; n];
            for (k, v) in &acc.buckets {
                masses[(*k as i128 - lo as i128) as usize] = v.value();
            }
            QueryValue::Pmf { offset: lo, masses }
        }
    })
}

/// Odometer over joint outcomes `start..end` in mixed-radix order.
fn run_chunk(expr: &IntExpr, leaves: &[Leaf], mode: Mode, start: u128, end: u128) -> Result<Acc> {
    let mut digits = vec![0usize; leaves.len()];
    let mut rest = start;
    for (d, l) in digits.iter_mut().zip(leaves).rev() {
        let r = l.values.len() as u128;
        *d = (rest % r) as usize;
        rest /= r;
    }
    let mut state: Vec<i64> = digits.iter().zip(leaves).map(|(&d, l)| l.values[d]).collect();
    let mut acc = Acc::default();
    for _ in start..end {
        let w = digits
            .iter()
            .zip(leaves)
            .fold(1.0, |w, (&d, l)| w * l.weights[d]);
        if w > 0.0 {
            let v = expr.eval(&state)?;
            match mode {
                Mode::Expect => acc.scalar.add(w * v as f64),
                Mode::Prob(cmp, k) => {
                    if cmp.holds(v, k) {
                        acc.scalar.add(w);
                    }
                }
                Mode::Pmf => acc.buckets.entry(v).or_default().add(w),
            }
        }
        for (j, l) in leaves.iter().enumerate().rev() {
            digits[j] += 1;
            if digits[j] < l.values.len() {
                state[j] = l.values[digits[j]];
                break;
            }
            digits[j] = 0;
            state[j] = l.values[0];
        }
    }
    Ok(acc)
}

pub fn enumerate_query(program: &Program, query: &Query) -> Result<QueryValue> {
    enumerate_query_with_cap(program, query, DEFAULT_CAP)
}

/// Enumerates every query of `program`, in order.
pub fn enumerate_program(program: &Program) -> Result<Vec<QueryResult>> {
    program
        .queries
        .iter()
        .map(|q| {
            let kind = match q.kind {
                QueryKind::Expect(_) => "expect",
                QueryKind::Prob(..) => "prob",
                QueryKind::Pmf(_) => "pmf",
            };
            Ok(QueryResult {
                text: q.text.clone(),
                kind,
                value: enumerate_query(program, q)?,
            })
        })
        .collect()
}
