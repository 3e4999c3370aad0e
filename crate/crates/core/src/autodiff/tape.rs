use std::sync::atomic::{AtomicU64, Ordering};

use crate::conv::correlate;
use crate::error::{Error, Result};
use crate::inference::{branch_mass, prob_cmp, BranchSpec, Comparator};
use crate::numeric::{exp_mass, max_finite};
use crate::ops::{add_rv, AtomicOp, LinearOpChain};
use crate::pmf::ProbInt;

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parametrization {
    /// Parameters are the log-masses themselves.
    RawLogMass,
    /// Masses are `softmax(logits)`; always normalized.
    Softmax,
}

/// Parameters of one leaf distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafParam {
    pub logits: Vec<f64>,
    pub offset: i64,
    pub parametrization: Parametrization,
}

impl LeafParam {
    pub fn raw(log_mass: Vec<f64>, offset: i64) -> Self {
        Self {
            logits: log_mass,
            offset,
            parametrization: Parametrization::RawLogMass,
        }
    }

    pub fn softmax(logits: Vec<f64>, offset: i64) -> Self {
        Self {
            logits,
            offset,
            parametrization: Parametrization::Softmax,
        }
    }

    pub fn from_prob_int(x: &ProbInt) -> Self {
        Self::raw(x.log_mass().to_vec(), x.offset())
    }

    pub fn to_prob_int(&self) -> Result<ProbInt> {
        match self.parametrization {
            Parametrization::RawLogMass => ProbInt::from_log_mass(self.logits.clone(), self.offset),
            Parametrization::Softmax => {
                let m = max_finite(&self.logits).ok_or(Error::AllZeroMass)?;
                let z: f64 = self.logits.iter().map(|&l| exp_mass(l - m)).sum();
                let lz = m + z.ln();
                ProbInt::from_log_mass(self.logits.iter().map(|&l| l - lz).collect(), self.offset)
            }
        }
    }
}

/// Handle to a node on a specific tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    index: usize,
}

impl Var {
    pub fn index(&self) -> usize {
        self.index
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Dist(ProbInt),
    Scalar(f64),
}

#[derive(Debug, Clone)]
enum Op {
    Leaf(usize),
    AddRv(usize, usize),
    Chain(usize, LinearOpChain),
    Branch(usize, BranchSpec),
    Expect(usize),
    Prob(usize, Comparator, i64),
    Total(usize),
    NegLog(usize),
    Mean(Vec<usize>),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Value,
}

/// Append-only record of engine operations.
#[derive(Debug, Clone)]
pub struct Tape {
    id: u64,
    leaves: Vec<LeafParam>,
    leaf_nodes: Vec<usize>,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            leaves: Vec::new(),
            leaf_nodes: Vec::new(),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaves(&self) -> &[LeafParam] {
        &self.leaves
    }

    /// Leaf variables in creation order.
    pub fn leaf_vars(&self) -> Vec<Var> {
        self.leaf_nodes.iter().map(|&i| self.var(i)).collect()
    }

    fn var(&self, index: usize) -> Var {
        Var { tape: self.id, index }
    }

    /// Handle for the node at `index`, e.g. the same node on a replayed tape.
    pub fn var_at(&self, index: usize) -> Var {
        self.var(index)
    }

    fn resolve(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            return Err(Error::UnrecordedNode(v.index));
        }
        Ok(v.index)
    }

    pub fn value(&self, v: Var) -> Result<&Value> {
        Ok(&self.nodes[self.resolve(v)?].value)
    }

    pub fn dist(&self, v: Var) -> Result<&ProbInt> {
        match self.value(v)? {
            Value::Dist(d) => Ok(d),
            Value::Scalar(_) => Err(Error::NotADistribution(v.index)),
        }
    }

    pub fn scalar(&self, v: Var) -> Result<f64> {
        match self.value(v)? {
            Value::Scalar(s) => Ok(*s),
            Value::Dist(_) => Err(Error::NonScalarQuery(v.index)),
        }
    }

    fn record(&mut self, op: Op) -> Result<Var> {
        let value = self.eval(&op)?;
        self.nodes.push(Node { op, value });
        Ok(self.var(self.nodes.len() - 1))
    }

    fn dist_at(&self, i: usize) -> Result<&ProbInt> {
        match &self.nodes[i].value {
            Value::Dist(d) => Ok(d),
            Value::Scalar(_) => Err(Error::NotADistribution(i)),
        }
    }

    fn scalar_at(&self, i: usize) -> Result<f64> {
        match &self.nodes[i].value {
            Value::Scalar(s) => Ok(*s),
            Value::Dist(_) => Err(Error::NonScalarQuery(i)),
        }
    }

    fn eval(&self, op: &Op) -> Result<Value> {
        Ok(match op {
            Op::Leaf(l) => Value::Dist(self.leaves[*l].to_prob_int()?),
            Op::AddRv(a, b) => Value::Dist(add_rv(self.dist_at(*a)?, self.dist_at(*b)?)?),
            Op::Chain(a, chain) => {
                Value::Dist(chain.push_mass(&self.dist_at(*a)?.into())?.into_prob_int()?)
            }
            Op::Branch(a, spec) => {
                Value::Dist(branch_mass(&self.dist_at(*a)?.into(), spec)?.into_prob_int()?)
            }
            Op::Expect(a) => Value::Scalar(crate::inference::expectation(self.dist_at(*a)?)?),
            Op::Prob(a, cmp, rhs) => Value::Scalar(prob_cmp(self.dist_at(*a)?, *cmp, *rhs)?),
            Op::Total(a) => Value::Scalar(self.dist_at(*a)?.total_mass()),
            Op::NegLog(s) => Value::Scalar(-self.scalar_at(*s)?.ln()),
            Op::Mean(xs) => {
                if xs.is_empty() {
                    return Err(Error::InvalidArgument("mean of no scalars".into()));
                }
                let mut total = 0.0;
                for &x in xs {
                    total += self.scalar_at(x)?;
                }
                Value::Scalar(total / xs.len() as f64)
            }
        })
    }

    pub fn leaf(&mut self, param: LeafParam) -> Result<Var> {
        let value = Value::Dist(param.to_prob_int()?);
        self.leaves.push(param);
        self.nodes.push(Node {
            op: Op::Leaf(self.leaves.len() - 1),
            value,
        });
        self.leaf_nodes.push(self.nodes.len() - 1);
        Ok(self.var(self.nodes.len() - 1))
    }

    pub fn add_rv(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = (self.resolve(a)?, self.resolve(b)?);
        self.record(Op::AddRv(a, b))
    }

    pub fn apply_chain(&mut self, a: Var, chain: LinearOpChain) -> Result<Var> {
        let a = self.resolve(a)?;
        self.record(Op::Chain(a, chain))
    }

    fn atomic(&mut self, a: Var, op: AtomicOp) -> Result<Var> {
        self.apply_chain(a, LinearOpChain::from_ops(vec![op])?)
    }

    pub fn add_const(&mut self, a: Var, k: i64) -> Result<Var> {
        self.atomic(a, AtomicOp::Shift(k))
    }

    pub fn negate(&mut self, a: Var) -> Result<Var> {
        self.atomic(a, AtomicOp::Negate)
    }

    pub fn mul_const(&mut self, a: Var, k: i64) -> Result<Var> {
        self.atomic(a, AtomicOp::Scale(k))
    }

    pub fn div_const(&mut self, a: Var, k: i64) -> Result<Var> {
        self.atomic(a, AtomicOp::Div(k))
    }

    pub fn mod_const(&mut self, a: Var, k: i64) -> Result<Var> {
        self.atomic(a, AtomicOp::Mod(k))
    }

    pub fn branch(&mut self, a: Var, spec: BranchSpec) -> Result<Var> {
        let a = self.resolve(a)?;
        self.record(Op::Branch(a, spec))
    }

    pub fn expectation(&mut self, a: Var) -> Result<Var> {
        let a = self.resolve(a)?;
        self.record(Op::Expect(a))
    }

    pub fn prob_cmp(&mut self, a: Var, cmp: Comparator, rhs: i64) -> Result<Var> {
        let a = self.resolve(a)?;
        self.record(Op::Prob(a, cmp, rhs))
    }

    pub fn total_mass(&mut self, a: Var) -> Result<Var> {
        let a = self.resolve(a)?;
        self.record(Op::Total(a))
    }

    /// `-ln s` for a scalar node.
    pub fn neg_log(&mut self, s: Var) -> Result<Var> {
        let s = self.resolve(s)?;
        self.record(Op::NegLog(s))
    }

    pub fn mean(&mut self, xs: &[Var]) -> Result<Var> {
        let xs = xs.iter().map(|&x| self.resolve(x)).collect::<Result<Vec<_>>>()?;
        self.record(Op::Mean(xs))
    }

    /// Re-executes the recorded operations with new leaf parameters.
    pub fn replay(&self, leaves: &[LeafParam]) -> Result<Tape> {
        if leaves.len() != self.leaves.len() {
            return Err(Error::LeafCountMismatch {
                expected: self.leaves.len(),
                got: leaves.len(),
            });
        }
        let mut out = Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            leaves: leaves.to_vec(),
            leaf_nodes: self.leaf_nodes.clone(),
            nodes: Vec::with_capacity(self.nodes.len()),
        };
        for node in &self.nodes {
            let value = out.eval(&node.op)?;
            out.nodes.push(Node {
                op: node.op.clone(),
                value,
            });
        }
        Ok(out)
    }

    /// Gradient of the scalar `query` with respect to every leaf.
    pub fn grad(&self, query: Var) -> Result<Gradients> {
        let q = self.resolve(query)?;
        if !matches!(self.nodes[q].value, Value::Scalar(_)) {
            return Err(Error::NonScalarQuery(q));
        }
        let mut cot: Vec<Option<Cotangent>> = vec![None; q + 1];
        cot[q] = Some(Cotangent::Scalar(1.0));

        let mut leaf_mass = vec![None; self.leaves.len()];
        for i in (0..=q).rev() {
            let Some(c) = cot[i].take() else { continue };
            match (&self.nodes[i].op, c) {
                (Op::Leaf(l), Cotangent::Dist(g)) => leaf_mass[*l] = Some(g),
                (Op::AddRv(a, b), Cotangent::Dist(g)) => {
                    let (xa, xb) = (self.dist_at(*a)?, self.dist_at(*b)?);
                    let ga = correlate(&g, &scaled_masses(xb).0)?;
                    let gb = correlate(&g, &scaled_masses(xa).0)?;
                    let (sa, sb) = (scaled_masses(xa).1, scaled_masses(xb).1);
                    accumulate(&mut cot, *a, ga.into_iter().map(|v| v * sb).collect());
                    accumulate(&mut cot, *b, gb.into_iter().map(|v| v * sa).collect());
                }
                (Op::Chain(a, chain), Cotangent::Dist(g)) => {
                    let out = self.dist_at(i)?;
                    let x = self.dist_at(*a)?;
                    let back = pullback(x, out, &g, |v| chain.apply_int(v))?;
                    accumulate(&mut cot, *a, back);
                }
                (Op::Branch(a, spec), Cotangent::Dist(g)) => {
                    let out = self.dist_at(i)?;
                    let x = self.dist_at(*a)?;
                    let back = pullback(x, out, &g, |v| {
                        if spec.condition.eval(v)? {
                            spec.true_chain.apply_int(v)
                        } else {
                            spec.false_chain.apply_int(v)
                        }
                    })?;
                    accumulate(&mut cot, *a, back);
                }
                (Op::Expect(a), Cotangent::Scalar(s)) => {
                    let x = self.dist_at(*a)?;
                    let g = (0..x.dim()).map(|j| s * (x.offset() + j as i64) as f64).collect();
                    accumulate(&mut cot, *a, g);
                }
                (Op::Prob(a, cmp, rhs), Cotangent::Scalar(s)) => {
                    let x = self.dist_at(*a)?;
                    let g = (0..x.dim())
                        .map(|j| if cmp.holds(x.offset() + j as i64, *rhs) { s } else { 0.0 })
                        .collect();
                    accumulate(&mut cot, *a, g);
                }
                (Op::Total(a), Cotangent::Scalar(s)) => {
                    let dim = self.dist_at(*a)?.dim();
                    accumulate(&mut cot, *a, vec![s; dim]);
                }
                (Op::NegLog(x), Cotangent::Scalar(s)) => {
                    let v = self.scalar_at(*x)?;
                    accumulate_scalar(&mut cot, *x, -s / v);
                }
                (Op::Mean(xs), Cotangent::Scalar(s)) => {
                    let w = s / xs.len() as f64;
                    for &x in xs {
                        accumulate_scalar(&mut cot, x, w);
                    }
                }
                _ => unreachable!("cotangent kind matches node value kind"),
            }
        }

        let leaves = self
            .leaves
            .iter()
            .zip(leaf_mass)
            .zip(&self.leaf_nodes)
            .map(|((param, g), &node)| {
                let x = self.dist_at(node).expect("leaf node is a distribution");
                let wrt_mass = g.unwrap_or_else(|| vec![0.0; x.dim()]);
                let wrt_param = leaf_param_grad(param, x, &wrt_mass);
                LeafGrad {
                    var: self.var(node),
                    wrt_mass,
                    wrt_param,
                }
            })
            .collect();
        Ok(Gradients { leaves })
    }
}

#[derive(Debug, Clone)]
enum Cotangent {
    Dist(Vec<f64>),
    Scalar(f64),
}

fn accumulate(cot: &mut [Option<Cotangent>], at: usize, g: Vec<f64>) {
    match &mut cot[at] {
        Some(Cotangent::Dist(acc)) => {
            for (a, v) in acc.iter_mut().zip(g) {
                *a += v;
            }
        }
        slot => *slot = Some(Cotangent::Dist(g)),
    }
}

fn accumulate_scalar(cot: &mut [Option<Cotangent>], at: usize, s: f64) {
    match &mut cot[at] {
        Some(Cotangent::Scalar(acc)) => *acc += s,
        slot => *slot = Some(Cotangent::Scalar(s)),
    }
}

/// Masses divided by `exp(max)`, and that factor.
fn scaled_masses(x: &ProbInt) -> (Vec<f64>, f64) {
    let m = max_finite(x.log_mass()).expect("ProbInt has a finite entry");
    (x.log_mass().iter().map(|&l| exp_mass(l - m)).collect(), m.exp())
}

/// Adjoint of the pushforward by `f`: each input entry reads the cotangent
/// of the outcome it maps to.
fn pullback(
    x: &ProbInt,
    out: &ProbInt,
    g: &[f64],
    f: impl Fn(i64) -> Result<i64>,
) -> Result<Vec<f64>> {
    (0..x.dim())
        .map(|j| {
            let w = f(x.offset() + j as i64)?;
            Ok(out.index_of(w).map_or(0.0, |k| g[k]))
        })
        .collect()
}

fn leaf_param_grad(param: &LeafParam, x: &ProbInt, g: &[f64]) -> Vec<f64> {
    let masses = x.masses();
    match param.parametrization {
        Parametrization::RawLogMass => masses.iter().zip(g).map(|(p, g)| p * g).collect(),
        Parametrization::Softmax => {
            let dot: f64 = masses.iter().zip(g).map(|(p, g)| p * g).sum();
            masses.iter().zip(g).map(|(p, g)| p * (g - dot)).collect()
        }
    }
}

/// Gradient of one leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafGrad {
    pub var: Var,
    /// Derivative with respect to the linear masses.
    pub wrt_mass: Vec<f64>,
    /// Derivative with respect to the leaf parameters (log-masses or logits).
    pub wrt_param: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub leaves: Vec<LeafGrad>,
}

impl Gradients {
    pub fn get(&self, leaf: Var) -> Option<&LeafGrad> {
        self.leaves.iter().find(|g| g.var == leaf)
    }
}
