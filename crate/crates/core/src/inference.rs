//! Expectations, comparison probabilities and probabilistic branching.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::{exp_mass, CompensatedSum};
use crate::ops::{mix_kernel, LinearOpChain, MassVec};
use crate::pmf::ProbInt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparator {
    Lt,
    Le,
    Eq,
    Ne,
    Gt,
    Ge,
}

impl Comparator {
    pub const ALL: [Comparator; 6] = [
        Comparator::Lt,
        Comparator::Le,
        Comparator::Eq,
        Comparator::Ne,
        Comparator::Gt,
        Comparator::Ge,
    ];

    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Eq => lhs == rhs,
            Comparator::Ne => lhs != rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Ge => lhs >= rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Eq => "==",
            Comparator::Ne => "!=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Comparator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "<" | "lt" => Comparator::Lt,
            "<=" | "le" => Comparator::Le,
            "==" | "=" | "eq" => Comparator::Eq,
            "!=" | "ne" => Comparator::Ne,
            ">" | "gt" => Comparator::Gt,
            ">=" | "ge" => Comparator::Ge,
            _ => return Err(Error::InvalidArgument(format!("unknown comparator {s:?}"))),
        })
    }
}

/// The predicate `chain(x) ⋈ 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Condition {
    pub chain: LinearOpChain,
    pub comparator: Comparator,
}

impl Condition {
    pub fn new(chain: LinearOpChain, comparator: Comparator) -> Self {
        Self { chain, comparator }
    }

    /// `x ⋈ rhs`, expressed as `(x - rhs) ⋈ 0`.
    pub fn compare(comparator: Comparator, rhs: i64) -> Result<Self> {
        let shift = rhs.checked_neg().ok_or(Error::IntegerOverflow("condition"))?;
        Ok(Self::new(LinearOpChain::new().shift(shift), comparator))
    }

    pub fn eval(&self, v: i64) -> Result<bool> {
        Ok(self.comparator.holds(self.chain.apply_int(v)?, 0))
    }
}

/// `if c(x) then g_true(x) else g_false(x)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BranchSpec {
    pub condition: Condition,
    pub true_chain: LinearOpChain,
    pub false_chain: LinearOpChain,
}

/// `Σ v · m(v)` over the support; equals `E[X]` for normalized inputs.
pub fn expectation(x: &ProbInt) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    for (v, m) in x.iter_masses() {
        if m > 0.0 {
            acc.add(v as f64 * m);
        }
    }
    Ok(acc.value())
}

fn range_mass(x: &ProbInt, lo: i128, hi: i128) -> f64 {
    let first = (lo - x.offset() as i128).max(0);
    let last = (hi - x.offset() as i128).min(x.dim() as i128 - 1);
    if first > last {
        return 0.0;
    }
    let mut acc = CompensatedSum::new();
    for &l in &x.log_mass()[first as usize..=last as usize] {
        acc.add(exp_mass(l));
    }
    acc.value()
}

/// Mass of the event `X ⋈ rhs`.
pub fn prob_cmp(x: &ProbInt, comparator: Comparator, rhs: i64) -> Result<f64> {
    let r = rhs as i128;
    let (lo, hi) = (i128::MIN / 2, i128::MAX / 2);
    Ok(match comparator {
        Comparator::Eq => x.mass_at(rhs),
        Comparator::Ne => range_mass(x, lo, r - 1) + range_mass(x, r + 1, hi),
        Comparator::Lt => range_mass(x, lo, r - 1),
        Comparator::Le => range_mass(x, lo, r),
        Comparator::Gt => range_mass(x, r + 1, hi),
        Comparator::Ge => range_mass(x, r, hi),
    })
}

pub(crate) fn split_mass(x: &MassVec, condition: &Condition) -> Result<(MassVec, MassVec)> {
    let mut yes = Vec::with_capacity(x.dim());
    let mut no = Vec::with_capacity(x.dim());
    for (i, &l) in x.log_mass.iter().enumerate() {
        let taken = condition.eval(x.offset + i as i64)?;
        let (t, f) = if taken {
            (l, f64::NEG_INFINITY)
        } else {
            (f64::NEG_INFINITY, l)
        };
        yes.push(t);
        no.push(f);
    }
    let wrap = |v: Vec<f64>| MassVec {
        offset: x.offset,
        log_mass: Arc::from(v),
    };
    Ok((wrap(yes), wrap(no)))
}

/// Splits the mass of `x` by the condition indicator. Either side is `None`
/// when it carries no mass.
pub fn split(x: &ProbInt, condition: &Condition) -> Result<(Option<ProbInt>, Option<ProbInt>)> {
    let (yes, no) = split_mass(&x.into(), condition)?;
    Ok((yes.into_prob_int().ok(), no.into_prob_int().ok()))
}

pub(crate) fn branch_mass(x: &MassVec, spec: &BranchSpec) -> Result<MassVec> {
    let (yes, no) = split_mass(x, &spec.condition)?;
    let yes = if yes.has_mass() {
        Some(spec.true_chain.push_mass(&yes)?)
    } else {
        None
    };
    let no = if no.has_mass() {
        Some(spec.false_chain.push_mass(&no)?)
    } else {
        None
    };
    match (yes, no) {
        (Some(a), Some(b)) => mix_kernel(&a, &b),
        (Some(a), None) | (None, Some(a)) => Ok(a),
        (None, None) => Ok(MassVec::empty_at(x.offset)),
    }
}

/// Distribution of `if c(X) then g_true(X) else g_false(X)`.
///
/// Mass is split by the indicator, each part is pushed through its chain and
/// the parts are added; no conditional PMF is ever normalized.
pub fn branch(x: &ProbInt, spec: &BranchSpec) -> Result<ProbInt> {
    branch_mass(&x.into(), spec)?.into_prob_int()
}

impl ProbInt {
    pub fn expectation(&self) -> Result<f64> {
        expectation(self)
    }

    pub fn prob(&self, comparator: Comparator, rhs: i64) -> Result<f64> {
        prob_cmp(self, comparator, rhs)
    }

    pub fn branch(&self, spec: &BranchSpec) -> Result<ProbInt> {
        branch(self, spec)
    }
}
