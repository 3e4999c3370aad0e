use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::tape::{LeafParam, Tape, Var};
use crate::error::{Error, Result};
use crate::inference::Comparator;
use crate::pmf::ProbInt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnConfig {
    pub digits_per_number: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            digits_per_number: 1,
            steps: 500,
            learning_rate: 0.5,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LearnOutcome {
    /// Digit distributions of the first number, least significant first.
    pub first: Vec<ProbInt>,
    pub second: Vec<ProbInt>,
    /// Mean negative log-likelihood before each update, plus the final value.
    pub losses: Vec<f64>,
    /// `Pr[sum = label]` per target under the final leaves.
    pub final_likelihoods: Vec<f64>,
}

impl LearnOutcome {
    fn argmax(d: &ProbInt) -> i64 {
        d.iter_masses()
            .fold((d.offset(), f64::NEG_INFINITY), |best, (v, m)| {
                if m > best.1 {
                    (v, m)
                } else {
                    best
                }
            })
            .0
    }

    /// Most likely digit of every leaf, least significant first.
    pub fn argmax_digits(&self) -> (Vec<i64>, Vec<i64>) {
        (
            self.first.iter().map(Self::argmax).collect(),
            self.second.iter().map(Self::argmax).collect(),
        )
    }
}

/// `Σ_i d_i · 10^i` for each number, then their sum.
pub fn sum_numbers_direct(tape: &mut Tape, first: &[Var], second: &[Var]) -> Result<Var> {
    let number = |tape: &mut Tape, digits: &[Var]| -> Result<Var> {
        let mut acc: Option<Var> = None;
        let mut place = 1i64;
        for &d in digits {
            let term = tape.mul_const(d, place)?;
            acc = Some(match acc {
                Some(a) => tape.add_rv(a, term)?,
                None => term,
            });
            place = place.checked_mul(10).ok_or(Error::IntegerOverflow("digit place"))?;
        }
        acc.ok_or_else(|| Error::InvalidArgument("number needs at least one digit".into()))
    };
    let a = number(tape, first)?;
    let b = number(tape, second)?;
    tape.add_rv(a, b)
}

fn build(
    logits: &[Vec<f64>],
    digits: usize,
    targets: &[i64],
) -> Result<(Tape, Var, Vec<Var>, Vec<Var>)> {
    let mut tape = Tape::new();
    let leaves = logits
        .iter()
        .map(|l| tape.leaf(LeafParam::softmax(l.clone(), 0)))
        .collect::<Result<Vec<_>>>()?;
    let sum = sum_numbers_direct(&mut tape, &leaves[..digits], &leaves[digits..])?;
    let probs = targets
        .iter()
        .map(|&t| tape.prob_cmp(sum, Comparator::Eq, t))
        .collect::<Result<Vec<_>>>()?;
    let nll = probs
        .iter()
        .map(|&p| tape.neg_log(p))
        .collect::<Result<Vec<_>>>()?;
    let loss = tape.mean(&nll)?;
    Ok((tape, loss, leaves, probs))
}

/// Fits softmax digit leaves of two `N`-digit numbers by gradient descent so
/// that their sum reproduces the target labels.
pub fn learn_sum(targets: &[i64], cfg: &LearnConfig) -> Result<LearnOutcome> {
    let n = cfg.digits_per_number;
    if n == 0 || targets.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one digit and one target".into(),
        ));
    }
    let max_number = 10i64
        .checked_pow(n as u32)
        .ok_or(Error::IntegerOverflow("digit count"))?
        - 1;
    let hi = 2 * max_number;
    if let Some(&label) = targets.iter().find(|&&t| !(0..=hi).contains(&t)) {
        return Err(Error::UnreachableLabel { label, lo: 0, hi });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, 0.1).expect("valid normal");
    let mut logits: Vec<Vec<f64>> = (0..2 * n)
        .map(|_| (0..10).map(|_| noise.sample(&mut rng)).collect())
        .collect();

    let mut losses = Vec::with_capacity(cfg.steps + 1);
    for _ in 0..cfg.steps {
        let (tape, loss, leaves, _) = build(&logits, n, targets)?;
        let value = tape.scalar(loss)?;
        if !value.is_finite() {
            return Err(Error::InvalidArgument(format!("loss diverged to {value}")));
        }
        losses.push(value);
        let grads = tape.grad(loss)?;
        for (l, leaf) in leaves.iter().enumerate() {
            let g = &grads.get(*leaf).expect("leaf gradient").wrt_param;
            for (w, d) in logits[l].iter_mut().zip(g) {
                *w -= cfg.learning_rate * d;
            }
        }
    }

    let (tape, loss, leaves, probs) = build(&logits, n, targets)?;
    losses.push(tape.scalar(loss)?);
    let dists = leaves
        .iter()
        .map(|&v| tape.dist(v).cloned())
        .collect::<Result<Vec<_>>>()?;
    let final_likelihoods = probs
        .iter()
        .map(|&p| tape.scalar(p))
        .collect::<Result<Vec<_>>>()?;
    let second = dists[n..].to_vec();
    let mut first = dists;
    first.truncate(n);
    Ok(LearnOutcome {
        first,
        second,
        losses,
        final_likelihoods,
    })
}
