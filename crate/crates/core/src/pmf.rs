//! Offset log-mass representation of bounded integer random variables.
//!
//! A [`ProbInt`] stores `log_mass[i] = ln m(offset + i)` for the outcomes
//! `offset ..= offset + dim - 1`. Exact zeros are `-inf`. Vectors may be
//! unnormalized; [`ProbInt::check_normalized`] tests the PMF reading.

use std::fmt;
use std::ops::RangeInclusive;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, exp_mass, ln_mass, max_finite};

/// Default cap on the length of any mass vector produced by the engine.
pub const DEFAULT_MAX_DIM: usize = 1 << 26;

/// Tolerance used by strict mode.
pub const STRICT_TOL: f64 = 1e-9;

static MAX_DIM: AtomicUsize = AtomicUsize::new(DEFAULT_MAX_DIM);

pub fn max_dim() -> usize {
    MAX_DIM.load(Ordering::Relaxed)
}

/// Sets the process-wide vector length cap, returning the previous value.
pub fn set_max_dim(n: usize) -> usize {
    MAX_DIM.swap(n.max(1), Ordering::Relaxed)
}

pub(crate) fn check_dim(requested: u128) -> Result<usize> {
    let max = max_dim();
    if requested > max as u128 {
        return Err(Error::DimensionOverflow { requested, max });
    }
    Ok(requested as usize)
}

/// Summary statistics of a mass vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassStats {
    pub total_mass: f64,
    /// Largest finite log-mass entry.
    pub max_log: f64,
}

/// A bounded integer-valued random variable.
#[derive(Clone, PartialEq)]
pub struct ProbInt {
    offset: i64,
    log_mass: Arc<[f64]>,
}

impl ProbInt {
    /// Builds a value from linear masses. No renormalization takes place.
    pub fn from_probs(probs: &[f64], offset: i64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyVector);
        }
        for (index, &value) in probs.iter().enumerate() {
            if !(value >= 0.0) || value.is_infinite() {
                return Err(Error::NegativeMass { index, value });
            }
        }
        if probs.iter().all(|&p| p == 0.0) {
            return Err(Error::AllZeroMass);
        }
        check_support(offset, probs.len())?;
        Ok(Self {
            offset,
            log_mass: probs.iter().map(|&p| ln_mass(p)).collect(),
        })
    }

    /// Builds a value from natural-log masses.
    pub fn from_log_mass(log_mass: Vec<f64>, offset: i64) -> Result<Self> {
        if log_mass.is_empty() {
            return Err(Error::EmptyVector);
        }
        for (index, &value) in log_mass.iter().enumerate() {
            if value.is_nan() || value == f64::INFINITY {
                return Err(Error::InvalidLogMass { index, value });
            }
        }
        if log_mass.iter().all(|&l| l == f64::NEG_INFINITY) {
            return Err(Error::AllZeroMass);
        }
        check_support(offset, log_mass.len())?;
        Ok(Self {
            offset,
            log_mass: log_mass.into(),
        })
    }

    /// Caller guarantees the invariants (nonempty, one finite entry, no NaN).
    pub(crate) fn from_parts(log_mass: Arc<[f64]>, offset: i64) -> Self {
        debug_assert!(!log_mass.is_empty());
        debug_assert!(log_mass.iter().all(|l| !l.is_nan() && *l != f64::INFINITY));
        Self { offset, log_mass }
    }

    /// Uniform distribution over `lo ..= hi`.
    pub fn uniform(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidRange { lo, hi });
        }
        let dim = check_dim((hi as i128 - lo as i128 + 1) as u128)?;
        let l = -(dim as f64).ln();
        Ok(Self {
            offset: lo,
            log_mass: vec![l; dim].into(),
        })
    }

    /// Degenerate distribution with unit mass at `v`.
    pub fn point(v: i64) -> Self {
        Self {
            offset: v,
            log_mass: Arc::from([0.0]),
        }
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.log_mass.len()
    }

    /// Smallest representable outcome, `L(X)`.
    pub fn lower(&self) -> i64 {
        self.offset
    }

    /// Largest representable outcome, `U(X) = offset + dim - 1`.
    pub fn upper(&self) -> i64 {
        self.offset + (self.dim() as i64 - 1)
    }

    pub fn support(&self) -> RangeInclusive<i64> {
        self.lower()..=self.upper()
    }

    pub fn log_mass(&self) -> &[f64] {
        &self.log_mass
    }

    pub(crate) fn shared_log_mass(&self) -> &Arc<[f64]> {
        &self.log_mass
    }

    /// Linear masses `exp(log_mass)`.
    pub fn masses(&self) -> Vec<f64> {
        self.log_mass.iter().map(|&l| exp_mass(l)).collect()
    }

    /// Mass of outcome `v`; zero outside the support.
    pub fn mass_at(&self, v: i64) -> f64 {
        self.index_of(v).map_or(0.0, |i| exp_mass(self.log_mass[i]))
    }

    pub fn log_mass_at(&self, v: i64) -> f64 {
        self.index_of(v)
            .map_or(f64::NEG_INFINITY, |i| self.log_mass[i])
    }

    pub(crate) fn index_of(&self, v: i64) -> Option<usize> {
        let i = v as i128 - self.offset as i128;
        (i >= 0 && i < self.dim() as i128).then_some(i as usize)
    }

    /// Outcomes paired with their masses, in increasing order.
    pub fn iter_masses(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.log_mass
            .iter()
            .enumerate()
            .map(move |(i, &l)| (self.offset + i as i64, exp_mass(l)))
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.log_mass.iter().map(|&l| exp_mass(l)))
    }

    pub fn stats(&self) -> MassStats {
        MassStats {
            total_mass: self.total_mass(),
            max_log: max_finite(&self.log_mass).expect("ProbInt has a finite entry"),
        }
    }

    pub fn check_normalized(&self, tol: f64) -> bool {
        (self.total_mass() - 1.0).abs() <= tol
    }

    /// Strict-mode check: errors unless total mass is 1 within [`STRICT_TOL`].
    pub fn require_normalized(&self) -> Result<()> {
        let total = self.total_mass();
        if (total - 1.0).abs() <= STRICT_TOL {
            Ok(())
        } else {
            Err(Error::NotNormalized { total })
        }
    }

    /// Index of the only finite entry, if there is exactly one.
    pub fn single_finite_index(&self) -> Option<usize> {
        single_finite(&self.log_mass)
    }

    /// Outcome carrying all the mass, if there is exactly one.
    pub fn as_point(&self) -> Option<i64> {
        self.single_finite_index().map(|i| self.offset + i as i64)
    }

    /// Drops leading and trailing zero-mass entries.
    pub fn trimmed(&self) -> ProbInt {
        let first = self.log_mass.iter().position(|l| l.is_finite()).unwrap();
        let last = self.log_mass.iter().rposition(|l| l.is_finite()).unwrap();
        if first == 0 && last + 1 == self.dim() {
            return self.clone();
        }
        Self {
            offset: self.offset + first as i64,
            log_mass: self.log_mass[first..=last].into(),
        }
    }
}

pub(crate) fn single_finite(xs: &[f64]) -> Option<usize> {
    let mut found = None;
    for (i, x) in xs.iter().enumerate() {
        if x.is_finite() {
            if found.is_some() {
                return None;
            }
            found = Some(i);
        }
    }
    found
}

fn check_support(offset: i64, dim: usize) -> Result<()> {
    offset
        .checked_add(dim as i64 - 1)
        .map(|_| ())
        .ok_or(Error::IntegerOverflow("support upper bound"))
}

impl fmt::Debug for ProbInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProbInt")
            .field("offset", &self.offset)
            .field("masses", &self.masses())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_left() -> ProbInt {
        ProbInt::from_probs(&[0.2, 0.6, 0.15, 0.05], 0).unwrap()
    }

    #[test]
    fn from_probs_stores_logs() {
        let x = example_left();
        assert_eq!(x.dim(), 4);
        assert_eq!(x.offset(), 0);
        assert_eq!(x.upper(), 3);
        assert!((x.log_mass()[1].exp() - 0.6).abs() < 1e-16);
    }

    #[test]
    fn from_probs_degenerate_and_zero_entries() {
        let p = ProbInt::from_probs(&[1.0], 7).unwrap();
        assert_eq!(p.as_point(), Some(7));
        let z = ProbInt::from_probs(&[0.0, 0.5], 0).unwrap();
        assert_eq!(z.log_mass()[0], f64::NEG_INFINITY);
        assert_eq!(z.log_mass()[1], 0.5f64.ln());
        assert_eq!(z.as_point(), Some(1));
    }

    #[test]
    fn from_probs_errors() {
        assert_eq!(ProbInt::from_probs(&[], 0), Err(Error::EmptyVector));
        assert!(matches!(
            ProbInt::from_probs(&[0.5, -0.1], 0),
            Err(Error::NegativeMass { index: 1, .. })
        ));
        assert!(matches!(
            ProbInt::from_probs(&[f64::NAN], 0),
            Err(Error::NegativeMass { .. })
        ));
        assert_eq!(ProbInt::from_probs(&[0.0, 0.0], 0), Err(Error::AllZeroMass));
        assert_eq!(
            ProbInt::from_log_mass(vec![f64::NEG_INFINITY], 0),
            Err(Error::AllZeroMass)
        );
        assert!(ProbInt::from_log_mass(vec![f64::INFINITY], 0).is_err());
    }

    #[test]
    fn uniform_examples() {
        let u = ProbInt::uniform(0, 9).unwrap();
        assert_eq!(u.dim(), 10);
        assert!(u.masses().iter().all(|&m| (m - 0.1).abs() < 1e-15));
        assert_eq!(ProbInt::uniform(5, 5).unwrap().as_point(), Some(5));
        let v = ProbInt::uniform(-2, 1).unwrap();
        assert_eq!(v.offset(), -2);
        assert!(v.masses().iter().all(|&m| (m - 0.25).abs() < 1e-15));
        assert_eq!(
            ProbInt::uniform(3, 2),
            Err(Error::InvalidRange { lo: 3, hi: 2 })
        );
    }

    #[test]
    fn mass_at_examples() {
        assert!((example_left().mass_at(1) - 0.6).abs() < 1e-15);
        assert_eq!(ProbInt::point(7).mass_at(3), 0.0);
        assert!((ProbInt::uniform(0, 9).unwrap().mass_at(4) - 0.1).abs() < 1e-15);
        assert_eq!(example_left().mass_at(-1), 0.0);
        assert_eq!(example_left().mass_at(i64::MAX), 0.0);
    }

    #[test]
    fn normalization_checks() {
        assert!(ProbInt::uniform(0, 9).unwrap().check_normalized(1e-9));
        let mid = ProbInt::from_probs(&[0.45, 0.1, 0.25, 0.1], 0).unwrap();
        assert!(!mid.check_normalized(1e-9));
        assert!((mid.total_mass() - 0.9).abs() < 1e-15);
        assert!(mid.require_normalized().is_err());
        assert!(ProbInt::from_probs(&[0.5, 0.5], 0)
            .unwrap()
            .check_normalized(1e-9));
    }

    #[test]
    fn stats_track_max() {
        let s = example_left().stats();
        assert_eq!(s.max_log, 0.6f64.ln());
        assert!((s.total_mass - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trimmed_drops_zero_edges() {
        let x = ProbInt::from_probs(&[0.0, 0.3, 0.0, 0.7, 0.0], -2).unwrap();
        let t = x.trimmed();
        assert_eq!(t.offset(), -1);
        assert_eq!(t.dim(), 3);
    }

    #[test]
    fn dimension_cap_applies() {
        assert!(matches!(
            ProbInt::uniform(0, DEFAULT_MAX_DIM as i64),
            Err(Error::DimensionOverflow { .. })
        ));
    }

    proptest::proptest! {
        #[test]
        fn from_probs_round_trips(probs in proptest::collection::vec(0.0f64..10.0, 1..40), offset in -1000i64..1000) {
            proptest::prop_assume!(probs.iter().any(|&p| p > 0.0));
            let x = ProbInt::from_probs(&probs, offset).unwrap();
            for (i, &p) in probs.iter().enumerate() {
                let back = x.mass_at(offset + i as i64);
                let tol = if p > 0.0 { 2.0 * (1.0 + p.ln().abs()) * f64::EPSILON * p } else { 0.0 };
                proptest::prop_assert!((back - p).abs() <= tol);
            }
            proptest::prop_assert_eq!(x.mass_at(offset - 1), 0.0);
            proptest::prop_assert_eq!(x.mass_at(offset + probs.len() as i64), 0.0);
        }

        #[test]
        fn uniform_total_is_one(lo in -500i64..500, width in 0i64..2000) {
            let u = ProbInt::uniform(lo, lo + width).unwrap();
            proptest::prop_assert!((u.total_mass() - 1.0).abs() <= 1e-12);
        }
    }
}
