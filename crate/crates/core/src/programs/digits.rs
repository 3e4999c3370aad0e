//! Adding two multi-digit numbers given per-digit distributions.

use crate::error::{Error, Result};
use crate::pmf::ProbInt;

fn check_lengths(first: &[ProbInt], second: &[ProbInt]) -> Result<()> {
    if first.is_empty() || first.len() != second.len() {
        return Err(Error::InvalidArgument(format!(
            "digit counts must be equal and positive, got {} and {}",
            first.len(),
            second.len()
        )));
    }
    Ok(())
}

/// Distribution of the full sum `Σ_i (a_i + b_i) · 10^i`, digits least significant first.
pub fn sum_direct(first: &[ProbInt], second: &[ProbInt]) -> Result<ProbInt> {
    check_lengths(first, second)?;
    let number = |digits: &[ProbInt]| -> Result<ProbInt> {
        let mut acc: Option<ProbInt> = None;
        let mut place = 1i64;
        for d in digits {
            let term = d.mul_const(place)?;
            acc = Some(match acc {
                Some(a) => a.add(&term)?,
                None => term,
            });
            place = place.checked_mul(10).ok_or(Error::IntegerOverflow("digit place"))?;
        }
        Ok(acc.expect("nonempty"))
    };
    number(first)?.add(&number(second)?)
}

/// Marginals of the result digits, least significant first, followed by the final carry.
pub fn sum_with_carry(first: &[ProbInt], second: &[ProbInt]) -> Result<Vec<ProbInt>> {
    check_lengths(first, second)?;
    let mut carry: Option<ProbInt> = None;
    let mut out = Vec::with_capacity(first.len() + 1);
    for (a, b) in first.iter().zip(second) {
        let mut s = a.add(b)?;
        if let Some(c) = &carry {
            s = s.add(c)?;
        }
        out.push(s.mod_const(10)?);
        carry = Some(s.div_const(10)?);
    }
    out.push(carry.expect("nonempty"));
    Ok(out)
}

/// `E[Σ_i r_i · 10^i]` from result-digit marginals.
pub fn expected_recombined(result_digits: &[ProbInt]) -> Result<f64> {
    let mut total = 0.0;
    let mut place = 1.0;
    for d in result_digits {
        total += place * d.expectation()?;
        place *= 10.0;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::programs::random_probs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_digits(rng: &mut ChaCha8Rng, n: usize) -> Vec<ProbInt> {
        (0..n)
            .map(|_| ProbInt::from_probs(&random_probs(rng, 10), 0).unwrap())
            .collect()
    }

    #[test]
    fn encodings_agree_in_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for n in 1..=3 {
            let a = random_digits(&mut rng, n);
            let b = random_digits(&mut rng, n);
            let direct = sum_direct(&a, &b).unwrap().expectation().unwrap();
            let carry = expected_recombined(&sum_with_carry(&a, &b).unwrap()).unwrap();
            assert!((direct - carry).abs() < 1e-6 * direct.max(1.0), "n={n}: {direct} vs {carry}");
        }
    }

    #[test]
    fn point_digits_add_exactly() {
        let digits = |v: [i64; 2]| v.iter().map(|&d| ProbInt::point(d)).collect::<Vec<_>>();
        // 47 + 85 = 132
        let a = digits([7, 4]);
        let b = digits([5, 8]);
        assert_eq!(sum_direct(&a, &b).unwrap().as_point(), Some(132));
        let r: Vec<_> = sum_with_carry(&a, &b)
            .unwrap()
            .iter()
            .map(|d| d.as_point().unwrap())
            .collect();
        assert_eq!(r, vec![2, 3, 1]);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let a = vec![ProbInt::point(1)];
        assert!(sum_direct(&a, &[]).is_err());
        assert!(sum_with_carry(&[], &[]).is_err());
    }
}
