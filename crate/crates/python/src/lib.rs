//! Python bindings: probabilistic integers, their arithmetic and queries,
//! the program language, the enumeration oracle and a differentiable tape.
//!
//! Op chains are lists of `(name, k)` tuples applied left to right, with
//! names `shift`, `neg`, `scale`, `div` and `mod` (`k` may be `None` for `neg`).

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIndexError};
use pyo3::prelude::*;

use plint_core::autodiff::{self, LeafParam, Tape as CoreTape, Value, Var};
use plint_core::lang::{self, QueryResult, QueryValue};
use plint_core::ops::{AtomicOp, LinearOpChain};
use plint_core::{oracle, programs, BranchSpec, Comparator, Condition, ProbInt as CoreProbInt};

create_exception!(plint, PlintError, PyException, "Engine, parse or independence error.");

fn err(e: impl std::fmt::Display) -> PyErr {
    PlintError::new_err(e.to_string())
}

fn comparator(s: &str) -> PyResult<Comparator> {
    s.parse().map_err(err)
}

fn chain(ops: Vec<(String, Option<i64>)>) -> PyResult<LinearOpChain> {
    let ops = ops
        .into_iter()
        .map(|(name, k)| {
            let need = |k: Option<i64>| k.ok_or_else(|| err(format!("op {name:?} needs a constant")));
            Ok(match name.as_str() {
                "shift" | "add" => AtomicOp::Shift(need(k)?),
                "neg" | "negate" => AtomicOp::Negate,
                "scale" | "mul" => AtomicOp::Scale(need(k)?),
                "div" => AtomicOp::Div(need(k)?),
                "mod" => AtomicOp::Mod(need(k)?),
                other => return Err(err(format!("unknown op {other:?}"))),
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    LinearOpChain::from_ops(ops).map_err(err)
}

fn branch_spec(
    cmp: &str,
    rhs: i64,
    then_ops: Vec<(String, Option<i64>)>,
    else_ops: Vec<(String, Option<i64>)>,
) -> PyResult<BranchSpec> {
    Ok(BranchSpec {
        condition: Condition::compare(comparator(cmp)?, rhs).map_err(err)?,
        true_chain: chain(then_ops)?,
        false_chain: chain(else_ops)?,
    })
}

/// A random integer with finite support, stored as an offset and log-masses.
#[pyclass(name = "ProbInt", module = "plint", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyProbInt {
    inner: CoreProbInt,
}

impl From<CoreProbInt> for PyProbInt {
    fn from(inner: CoreProbInt) -> Self {
        Self { inner }
    }
}

#[derive(FromPyObject)]
enum Operand<'py> {
    Dist(PyRef<'py, PyProbInt>),
    Int(i64),
}

#[pymethods]
impl PyProbInt {
    #[new]
    #[pyo3(signature = (probs, offset = 0))]
    fn new(probs: Vec<f64>, offset: i64) -> PyResult<Self> {
        Ok(CoreProbInt::from_probs(&probs, offset).map_err(err)?.into())
    }

    #[staticmethod]
    #[pyo3(signature = (log_mass, offset = 0))]
    fn from_log_mass(log_mass: Vec<f64>, offset: i64) -> PyResult<Self> {
        Ok(CoreProbInt::from_log_mass(log_mass, offset).map_err(err)?.into())
    }

    /// Uniform over `lo..=hi`.
    #[staticmethod]
    fn uniform(lo: i64, hi: i64) -> PyResult<Self> {
        Ok(CoreProbInt::uniform(lo, hi).map_err(err)?.into())
    }

    #[staticmethod]
    fn point(v: i64) -> Self {
        CoreProbInt::point(v).into()
    }

    #[getter]
    fn offset(&self) -> i64 {
        self.inner.offset()
    }

    #[getter]
    fn upper(&self) -> i64 {
        self.inner.upper()
    }

    fn __len__(&self) -> usize {
        self.inner.dim()
    }

    fn masses(&self) -> Vec<f64> {
        self.inner.masses()
    }

    fn log_mass(&self) -> Vec<f64> {
        self.inner.log_mass().to_vec()
    }

    fn mass_at(&self, v: i64) -> f64 {
        self.inner.mass_at(v)
    }

    fn total_mass(&self) -> f64 {
        self.inner.total_mass()
    }

    /// `(value, mass)` pairs over the support, zeros included.
    fn items(&self) -> Vec<(i64, f64)> {
        self.inner.iter_masses().collect()
    }

    fn expectation(&self) -> PyResult<f64> {
        plint_core::expectation(&self.inner).map_err(err)
    }

    /// `Pr[X cmp rhs]` with `cmp` one of `< <= == != > >=`.
    fn prob(&self, cmp: &str, rhs: i64) -> PyResult<f64> {
        plint_core::prob_cmp(&self.inner, comparator(cmp)?, rhs).map_err(err)
    }

    fn trimmed(&self) -> Self {
        self.inner.trimmed().into()
    }

    /// Applies a chain of `(op, k)` pairs; see the module docs for op names.
    fn apply(&self, ops: Vec<(String, Option<i64>)>) -> PyResult<Self> {
        Ok(self.inner.apply(&chain(ops)?).map_err(err)?.into())
    }

    /// `if (X cmp rhs) then then_ops(X) else else_ops(X)`.
    fn branch(
        &self,
        cmp: &str,
        rhs: i64,
        then_ops: Vec<(String, Option<i64>)>,
        else_ops: Vec<(String, Option<i64>)>,
    ) -> PyResult<Self> {
        let spec = branch_spec(cmp, rhs, then_ops, else_ops)?;
        Ok(plint_core::branch(&self.inner, &spec).map_err(err)?.into())
    }

    fn __add__(&self, other: Operand<'_>) -> PyResult<Self> {
        let out = match other {
            Operand::Dist(o) => self.inner.add(&o.inner),
            Operand::Int(k) => self.inner.add_const(k),
        };
        Ok(out.map_err(err)?.into())
    }

    fn __radd__(&self, k: i64) -> PyResult<Self> {
        Ok(self.inner.add_const(k).map_err(err)?.into())
    }

    fn __sub__(&self, other: Operand<'_>) -> PyResult<Self> {
        let out = match other {
            Operand::Dist(o) => o.inner.neg().and_then(|n| self.inner.add(&n)),
            Operand::Int(k) => k
                .checked_neg()
                .ok_or_else(|| plint_core::Error::IntegerOverflow("negate"))
                .and_then(|n| self.inner.add_const(n)),
        };
        Ok(out.map_err(err)?.into())
    }

    fn __rsub__(&self, k: i64) -> PyResult<Self> {
        Ok(self.inner.neg().and_then(|n| n.add_const(k)).map_err(err)?.into())
    }

    fn __neg__(&self) -> PyResult<Self> {
        Ok(self.inner.neg().map_err(err)?.into())
    }

    fn __mul__(&self, k: i64) -> PyResult<Self> {
        Ok(self.inner.mul_const(k).map_err(err)?.into())
    }

    fn __rmul__(&self, k: i64) -> PyResult<Self> {
        self.__mul__(k)
    }

    fn __floordiv__(&self, k: i64) -> PyResult<Self> {
        Ok(self.inner.div_const(k).map_err(err)?.into())
    }

    fn __mod__(&self, k: i64) -> PyResult<Self> {
        Ok(self.inner.mod_const(k).map_err(err)?.into())
    }

    fn __repr__(&self) -> String {
        format!("ProbInt(offset={}, masses={:?})", self.inner.offset(), self.inner.masses())
    }
}

/// Sum of independent variables.
#[pyfunction]
fn add_rv(a: &PyProbInt, b: &PyProbInt) -> PyResult<PyProbInt> {
    Ok(plint_core::add_rv(&a.inner, &b.inner).map_err(err)?.into())
}

/// Sum of independent variables via quadratic linear-domain convolution.
#[pyfunction]
fn add_rv_naive(a: &PyProbInt, b: &PyProbInt) -> PyResult<PyProbInt> {
    Ok(plint_core::add_rv_naive(&a.inner, &b.inner).map_err(err)?.into())
}

/// Convolution of two log-mass vectors, returned in the log domain.
#[pyfunction]
fn log_conv_exp(a: Vec<f64>, b: Vec<f64>) -> PyResult<Vec<f64>> {
    plint_core::conv::log_conv_exp(&a, &b).map_err(err)
}

#[pyfunction]
fn naive_conv(a: Vec<f64>, b: Vec<f64>) -> PyResult<Vec<f64>> {
    plint_core::conv::naive_conv(&a, &b).map_err(err)
}

fn py_value(py: Python<'_>, v: &QueryValue) -> PyResult<Py<PyAny>> {
    Ok(match v {
        QueryValue::Scalar(s) => s.into_pyobject(py)?.into_any().unbind(),
        QueryValue::Pmf { offset, masses } => (*offset, masses.clone()).into_pyobject(py)?.into_any().unbind(),
    })
}

fn py_results(py: Python<'_>, rs: &[QueryResult]) -> PyResult<Vec<(String, String, Py<PyAny>)>> {
    rs.iter()
        .map(|r| Ok((r.text.clone(), r.kind.to_string(), py_value(py, &r.value)?)))
        .collect()
}

/// Evaluates every query of a program. Each result is `(text, kind, value)`,
/// where `value` is a float or `(offset, masses)` for `pmf` queries.
#[pyfunction]
#[pyo3(signature = (source, strict = false))]
fn evaluate(py: Python<'_>, source: &str, strict: bool) -> PyResult<Vec<(String, String, Py<PyAny>)>> {
    let rs = lang::evaluate_source(source, strict).map_err(err)?;
    py_results(py, &rs)
}

/// Same queries answered by brute-force joint enumeration.
#[pyfunction]
fn enumerate(py: Python<'_>, source: &str) -> PyResult<Vec<(String, String, Py<PyAny>)>> {
    let program = lang::parse(source).map_err(err)?;
    let rs = oracle::enumerate_program(&program).map_err(err)?;
    py_results(py, &rs)
}

/// Independence violations as `(line, column, message)`.
#[pyfunction]
fn check_independence(source: &str) -> PyResult<Vec<(usize, usize, String)>> {
    let program = lang::parse(source).map_err(err)?;
    Ok(lang::check_independence(&program)
        .into_iter()
        .map(|v| (v.span.line, v.span.col, v.message))
        .collect())
}

/// Scalar Luhn validity of a digit string.
#[pyfunction]
fn luhn_valid(id: &str) -> PyResult<bool> {
    programs::luhn::luhn_valid(id).map_err(err)
}

/// `Pr[check digit == 0]` for independent digit distributions, leftmost first.
#[pyfunction]
fn luhn_valid_prob(digits: Vec<PyRef<'_, PyProbInt>>) -> PyResult<f64> {
    let ds: Vec<CoreProbInt> = digits.iter().map(|d| d.inner.clone()).collect();
    programs::luhn::luhn_valid_prob(&ds).map_err(err)
}

/// Recording tape for reverse-mode gradients. Nodes are integer handles.
#[pyclass(name = "Tape", module = "plint", unsendable)]
pub struct PyTape {
    inner: CoreTape,
}

impl PyTape {
    fn var(&self, i: usize) -> PyResult<Var> {
        if i < self.inner.len() {
            Ok(self.inner.var_at(i))
        } else {
            Err(PyIndexError::new_err(format!("no node {i}")))
        }
    }
}

#[pymethods]
impl PyTape {
    #[new]
    fn new() -> Self {
        Self { inner: CoreTape::new() }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Leaf with raw log-masses, or softmax logits when `softmax` is set.
    #[pyo3(signature = (params, offset = 0, softmax = false))]
    fn leaf(&mut self, params: Vec<f64>, offset: i64, softmax: bool) -> PyResult<usize> {
        let p = if softmax {
            LeafParam::softmax(params, offset)
        } else {
            LeafParam::raw(params, offset)
        };
        Ok(self.inner.leaf(p).map_err(err)?.index())
    }

    fn add_rv(&mut self, a: usize, b: usize) -> PyResult<usize> {
        let (a, b) = (self.var(a)?, self.var(b)?);
        Ok(self.inner.add_rv(a, b).map_err(err)?.index())
    }

    fn apply(&mut self, a: usize, ops: Vec<(String, Option<i64>)>) -> PyResult<usize> {
        let a = self.var(a)?;
        Ok(self.inner.apply_chain(a, chain(ops)?).map_err(err)?.index())
    }

    fn branch(
        &mut self,
        a: usize,
        cmp: &str,
        rhs: i64,
        then_ops: Vec<(String, Option<i64>)>,
        else_ops: Vec<(String, Option<i64>)>,
    ) -> PyResult<usize> {
        let a = self.var(a)?;
        let spec = branch_spec(cmp, rhs, then_ops, else_ops)?;
        Ok(self.inner.branch(a, spec).map_err(err)?.index())
    }

    fn expectation(&mut self, a: usize) -> PyResult<usize> {
        let a = self.var(a)?;
        Ok(self.inner.expectation(a).map_err(err)?.index())
    }

    fn prob(&mut self, a: usize, cmp: &str, rhs: i64) -> PyResult<usize> {
        let a = self.var(a)?;
        Ok(self.inner.prob_cmp(a, comparator(cmp)?, rhs).map_err(err)?.index())
    }

    /// A float for scalar nodes, a `ProbInt` otherwise.
    fn value(&self, py: Python<'_>, a: usize) -> PyResult<Py<PyAny>> {
        Ok(match self.inner.value(self.var(a)?).map_err(err)? {
            Value::Scalar(s) => s.into_pyobject(py)?.into_any().unbind(),
            Value::Dist(d) => Py::new(py, PyProbInt::from(d.clone()))?.into_any(),
        })
    }

    /// Gradient of a scalar node: one list per leaf, in creation order.
    fn grad(&self, q: usize) -> PyResult<Vec<Vec<f64>>> {
        let g = self.inner.grad(self.var(q)?).map_err(err)?;
        Ok(g.leaves.into_iter().map(|l| l.wrt_param).collect())
    }

    /// Largest relative error between analytic and central-difference gradients.
    #[pyo3(signature = (q, step = 1e-5))]
    fn fd_check(&self, q: usize, step: f64) -> PyResult<f64> {
        let opts = autodiff::FdOptions { step, ..Default::default() };
        let r = autodiff::fd_check(&self.inner, self.var(q)?, opts).map_err(err)?;
        Ok(r.max_rel_error)
    }
}

#[pymodule]
mod plint {
    #[pymodule_export]
    use super::{
        add_rv, add_rv_naive, check_independence, enumerate, evaluate, log_conv_exp, luhn_valid, luhn_valid_prob,
        naive_conv, PlintError, PyProbInt, PyTape,
    };
}
