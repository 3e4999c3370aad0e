//! Closed arithmetic on [`ProbInt`] values.
//!
//! Unary operations are pushforwards under a deterministic integer map. They
//! are implemented on [`MassVec`], which unlike `ProbInt` may carry no mass at
//! all; branching relies on that when one side of a condition is empty.

use std::fmt;
use std::sync::Arc;

use crate::conv::{log_conv, log_conv_exp, naive_conv};
use crate::error::{Error, Result};
use crate::numeric::{exp_mass, ln_mass, log_add_exp, log_sum_exp};
use crate::pmf::{check_dim, ProbInt};

/// One deterministic integer map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AtomicOp {
    Shift(i64),
    Negate,
    Scale(i64),
    /// Floor division by a positive constant.
    Div(i64),
    /// Mathematical modulo, result in `0..k`.
    Mod(i64),
}

impl AtomicOp {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AtomicOp::Div(k) | AtomicOp::Mod(k) if k <= 0 => Err(Error::InvalidDivisor(k)),
            _ => Ok(()),
        }
    }

    /// Integer semantics of the op; the engine and the enumeration oracle
    /// both go through this function.
    pub fn apply_int(&self, v: i64) -> Result<i64> {
        match *self {
            AtomicOp::Shift(k) => v.checked_add(k).ok_or(Error::IntegerOverflow("shift")),
            AtomicOp::Negate => v.checked_neg().ok_or(Error::IntegerOverflow("negate")),
            AtomicOp::Scale(k) => v.checked_mul(k).ok_or(Error::IntegerOverflow("scale")),
            AtomicOp::Div(k) => {
                self.validate()?;
                Ok(v.div_euclid(k))
            }
            AtomicOp::Mod(k) => {
                self.validate()?;
                Ok(v.rem_euclid(k))
            }
        }
    }

    pub fn is_injective(&self) -> bool {
        match *self {
            AtomicOp::Shift(_) | AtomicOp::Negate => true,
            AtomicOp::Scale(k) => k != 0,
            AtomicOp::Div(k) => k == 1,
            AtomicOp::Mod(_) => false,
        }
    }

    pub(crate) fn push(&self, x: &MassVec) -> Result<MassVec> {
        match *self {
            AtomicOp::Shift(k) => shift_kernel(x, k),
            AtomicOp::Negate => negate_kernel(x),
            AtomicOp::Scale(k) => scale_kernel(x, k),
            AtomicOp::Div(k) => div_kernel(x, k),
            AtomicOp::Mod(k) => mod_kernel(x, k),
        }
    }
}

impl fmt::Display for AtomicOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtomicOp::Shift(k) => write!(f, "shift({k})"),
            AtomicOp::Negate => write!(f, "negate"),
            AtomicOp::Scale(k) => write!(f, "scale({k})"),
            AtomicOp::Div(k) => write!(f, "idiv({k})"),
            AtomicOp::Mod(k) => write!(f, "imod({k})"),
        }
    }
}

/// A composition of atomic ops applied left to right.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct LinearOpChain {
    ops: Vec<AtomicOp>,
}

impl LinearOpChain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_ops(ops: Vec<AtomicOp>) -> Result<Self> {
        ops.iter().try_for_each(AtomicOp::validate)?;
        Ok(Self { ops })
    }

    pub fn ops(&self) -> &[AtomicOp] {
        &self.ops
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn push(mut self, op: AtomicOp) -> Result<Self> {
        op.validate()?;
        self.ops.push(op);
        Ok(self)
    }

    pub fn shift(mut self, k: i64) -> Self {
        self.ops.push(AtomicOp::Shift(k));
        self
    }

    pub fn negate(mut self) -> Self {
        self.ops.push(AtomicOp::Negate);
        self
    }

    pub fn scale(mut self, k: i64) -> Self {
        self.ops.push(AtomicOp::Scale(k));
        self
    }

    pub fn div(self, k: i64) -> Result<Self> {
        self.push(AtomicOp::Div(k))
    }

    pub fn rem(self, k: i64) -> Result<Self> {
        self.push(AtomicOp::Mod(k))
    }

    /// Chain that first applies `self`, then `other`.
    pub fn then(mut self, other: &LinearOpChain) -> Self {
        self.ops.extend_from_slice(&other.ops);
        self
    }

    pub fn apply_int(&self, v: i64) -> Result<i64> {
        self.ops.iter().try_fold(v, |acc, op| op.apply_int(acc))
    }

    pub fn is_injective(&self) -> bool {
        self.ops.iter().all(AtomicOp::is_injective)
    }

    pub(crate) fn push_mass(&self, x: &MassVec) -> Result<MassVec> {
        let mut cur = x.clone();
        for op in &self.ops {
            cur = op.push(&cur)?;
        }
        Ok(cur)
    }
}

impl fmt::Display for LinearOpChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, op) in self.ops.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{op}")?;
        }
        write!(f, "]")
    }
}

/// Offset log-mass vector without the nonzero-mass invariant.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct MassVec {
    pub offset: i64,
    pub log_mass: Arc<[f64]>,
}

impl MassVec {
    pub fn empty_at(offset: i64) -> Self {
        Self {
            offset,
            log_mass: Arc::from([f64::NEG_INFINITY]),
        }
    }

    pub fn dim(&self) -> usize {
        self.log_mass.len()
    }

    pub fn upper(&self) -> i64 {
        self.offset + self.dim() as i64 - 1
    }

    pub fn has_mass(&self) -> bool {
        self.log_mass.iter().any(|l| l.is_finite())
    }

    pub fn into_prob_int(self) -> Result<ProbInt> {
        if !self.has_mass() {
            return Err(Error::AllZeroMass);
        }
        Ok(ProbInt::from_parts(self.log_mass, self.offset))
    }
}

impl From<&ProbInt> for MassVec {
    fn from(x: &ProbInt) -> Self {
        Self {
            offset: x.offset(),
            log_mass: x.shared_log_mass().clone(),
        }
    }
}

fn checked_upper(offset: i64, dim: usize) -> Result<()> {
    offset
        .checked_add(dim as i64 - 1)
        .map(|_| ())
        .ok_or(Error::IntegerOverflow("support upper bound"))
}

fn shift_kernel(x: &MassVec, k: i64) -> Result<MassVec> {
    let offset = x.offset.checked_add(k).ok_or(Error::IntegerOverflow("shift"))?;
    checked_upper(offset, x.dim())?;
    Ok(MassVec {
        offset,
        log_mass: x.log_mass.clone(),
    })
}

fn negate_kernel(x: &MassVec) -> Result<MassVec> {
    let offset = x.upper().checked_neg().ok_or(Error::IntegerOverflow("negate"))?;
    Ok(MassVec {
        offset,
        log_mass: x.log_mass.iter().rev().copied().collect(),
    })
}

fn scale_kernel(x: &MassVec, k: i64) -> Result<MassVec> {
    match k {
        0 => Ok(MassVec {
            offset: 0,
            log_mass: Arc::from([log_sum_exp(x.log_mass.iter().copied())]),
        }),
        1 => Ok(x.clone()),
        k if k < 0 => {
            let pos = k.checked_neg().ok_or(Error::IntegerOverflow("scale"))?;
            scale_kernel(&negate_kernel(x)?, pos)
        }
        k => {
            let offset = x.offset.checked_mul(k).ok_or(Error::IntegerOverflow("scale"))?;
            let dim = check_dim((x.dim() as u128 - 1) * k as u128 + 1)?;
            checked_upper(offset, dim)?;
            let mut out = vec![f64::NEG_INFINITY; dim];
            for (j, &l) in x.log_mass.iter().enumerate() {
                out[j * k as usize] = l;
            }
            Ok(MassVec {
                offset,
                log_mass: out.into(),
            })
        }
    }
}

fn div_kernel(x: &MassVec, k: i64) -> Result<MassVec> {
    if k <= 0 {
        return Err(Error::InvalidDivisor(k));
    }
    if k == 1 {
        return Ok(x.clone());
    }
    // Pad the support down to a multiple of k; bucket j covers the k outcomes
    // (out_offset + j) * k ..= (out_offset + j) * k + k - 1.
    let out_offset = x.offset.div_euclid(k);
    let out_upper = x.upper().div_euclid(k);
    let out_dim = (out_upper - out_offset + 1) as usize;
    let lead = (x.offset - out_offset * k) as usize;
    let k = k as usize;
    let out = (0..out_dim)
        .map(|j| {
            let lo = (j * k).saturating_sub(lead);
            let hi = ((j + 1) * k - lead).min(x.dim());
            log_sum_exp(x.log_mass[lo..hi].iter().copied())
        })
        .collect();
    Ok(MassVec {
        offset: out_offset,
        log_mass: out,
    })
}

fn mod_kernel(x: &MassVec, k: i64) -> Result<MassVec> {
    if k <= 0 {
        return Err(Error::InvalidDivisor(k));
    }
    let k_us = check_dim(k as u128)?;
    let start = x.offset.rem_euclid(k) as usize;
    let mut maxes = vec![f64::NEG_INFINITY; k_us];
    let mut r = start;
    for &l in x.log_mass.iter() {
        if l > maxes[r] {
            maxes[r] = l;
        }
        r += 1;
        if r == k_us {
            r = 0;
        }
    }
    let mut sums = vec![crate::numeric::CompensatedSum::new(); k_us];
    let mut r = start;
    for &l in x.log_mass.iter() {
        if maxes[r].is_finite() {
            sums[r].add(exp_mass(l - maxes[r]));
        }
        r += 1;
        if r == k_us {
            r = 0;
        }
    }
    let out = maxes
        .iter()
        .zip(&sums)
        .map(|(&m, s)| if m.is_finite() { m + s.value().ln() } else { m })
        .collect();
    Ok(MassVec {
        offset: 0,
        log_mass: out,
    })
}

/// Mass-wise sum of two vectors over the union of their supports.
pub(crate) fn mix_kernel(a: &MassVec, b: &MassVec) -> Result<MassVec> {
    let lo = a.offset.min(b.offset);
    let hi = a.upper().max(b.upper());
    let dim = check_dim((hi as i128 - lo as i128 + 1) as u128)?;
    let mut out = vec![f64::NEG_INFINITY; dim];
    for v in [a, b] {
        let base = (v.offset - lo) as usize;
        for (o, &l) in out[base..base + v.dim()].iter_mut().zip(v.log_mass.iter()) {
            *o = log_add_exp(*o, l);
        }
    }
    Ok(MassVec {
        offset: lo,
        log_mass: out.into(),
    })
}

fn unary(x: &ProbInt, op: AtomicOp) -> Result<ProbInt> {
    op.push(&MassVec::from(x))?.into_prob_int()
}

/// Distribution of `X1 + X2` for independent operands.
pub fn add_rv(x1: &ProbInt, x2: &ProbInt) -> Result<ProbInt> {
    let offset = x1
        .offset()
        .checked_add(x2.offset())
        .ok_or(Error::IntegerOverflow("add_rv offset"))?;
    let log_mass = log_conv(x1.log_mass(), x2.log_mass())?;
    checked_upper(offset, log_mass.len())?;
    ProbInt::from_log_mass(log_mass, offset)
}

/// `X1 + X2` always through the FFT, whatever the operand lengths.
pub fn add_rv_fft(x1: &ProbInt, x2: &ProbInt) -> Result<ProbInt> {
    let offset = x1
        .offset()
        .checked_add(x2.offset())
        .ok_or(Error::IntegerOverflow("add_rv offset"))?;
    let log_mass = log_conv_exp(x1.log_mass(), x2.log_mass())?;
    checked_upper(offset, log_mass.len())?;
    ProbInt::from_log_mass(log_mass, offset)
}

/// `X1 + X2` through the quadratic linear-domain convolution.
pub fn add_rv_naive(x1: &ProbInt, x2: &ProbInt) -> Result<ProbInt> {
    let offset = x1
        .offset()
        .checked_add(x2.offset())
        .ok_or(Error::IntegerOverflow("add_rv offset"))?;
    let masses = naive_conv(&x1.masses(), &x2.masses())?;
    checked_upper(offset, masses.len())?;
    ProbInt::from_log_mass(masses.into_iter().map(ln_mass).collect(), offset)
}

pub fn add_const(x: &ProbInt, k: i64) -> Result<ProbInt> {
    unary(x, AtomicOp::Shift(k))
}

pub fn negate(x: &ProbInt) -> Result<ProbInt> {
    unary(x, AtomicOp::Negate)
}

/// Scales every outcome by `k`; `k = 0` collapses all mass onto 0.
pub fn mul_const(x: &ProbInt, k: i64) -> Result<ProbInt> {
    unary(x, AtomicOp::Scale(k))
}

pub fn div_const(x: &ProbInt, k: i64) -> Result<ProbInt> {
    unary(x, AtomicOp::Div(k))
}

pub fn mod_const(x: &ProbInt, k: i64) -> Result<ProbInt> {
    unary(x, AtomicOp::Mod(k))
}

pub fn apply_chain(x: &ProbInt, chain: &LinearOpChain) -> Result<ProbInt> {
    chain.push_mass(&MassVec::from(x))?.into_prob_int()
}

/// Mass-wise sum over the union support (an unweighted mixture).
pub fn mix(a: &ProbInt, b: &ProbInt) -> Result<ProbInt> {
    mix_kernel(&a.into(), &b.into())?.into_prob_int()
}

impl ProbInt {
    pub fn add(&self, other: &ProbInt) -> Result<ProbInt> {
        add_rv(self, other)
    }

    pub fn add_const(&self, k: i64) -> Result<ProbInt> {
        add_const(self, k)
    }

    pub fn neg(&self) -> Result<ProbInt> {
        negate(self)
    }

    pub fn mul_const(&self, k: i64) -> Result<ProbInt> {
        mul_const(self, k)
    }

    pub fn div_const(&self, k: i64) -> Result<ProbInt> {
        div_const(self, k)
    }

    pub fn mod_const(&self, k: i64) -> Result<ProbInt> {
        mod_const(self, k)
    }

    pub fn apply(&self, chain: &LinearOpChain) -> Result<ProbInt> {
        apply_chain(self, chain)
    }
}
