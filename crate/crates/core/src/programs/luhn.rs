//! The Luhn check-digit scheme, both deterministic and over digit distributions.

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::inference::{BranchSpec, Comparator, Condition};
use crate::lang::DistSpec;
use crate::ops::LinearOpChain;
use crate::pmf::ProbInt;

/// Whether the digit at `index` (from the left) of an `len`-digit identifier is doubled.
pub fn is_doubled(index: usize, len: usize) -> bool {
    index % 2 == len % 2
}

/// Plain Luhn validity of a digit string, written independently of the engine.
pub fn luhn_valid(id: &str) -> Result<bool> {
    let mut sum = 0u32;
    for (pos, ch) in id.chars().rev().enumerate() {
        let d = ch
            .to_digit(10)
            .ok_or_else(|| Error::InvalidArgument(format!("not a digit: {ch:?}")))?;
        sum += if pos % 2 == 1 {
            let dd = d * 2;
            dd / 10 + dd % 10
        } else {
            d
        };
    }
    Ok(!id.is_empty() && sum % 10 == 0)
}

/// `x < 5 ? 2x : 2x - 9`, the digit sum of a doubled digit.
pub fn doubling_branch() -> Result<BranchSpec> {
    Ok(BranchSpec {
        condition: Condition::compare(Comparator::Lt, 5)?,
        true_chain: LinearOpChain::new().scale(2),
        false_chain: LinearOpChain::new().scale(2).shift(-9),
    })
}

/// Distribution of the Luhn check value `(Σ t_i) mod 10`; the identifier is valid when it is 0.
pub fn luhn_check(digits: &[ProbInt]) -> Result<ProbInt> {
    let n = digits.len();
    let double = doubling_branch()?;
    let mut check: Option<ProbInt> = None;
    for (i, d) in digits.iter().enumerate() {
        let t = if is_doubled(i, n) { d.branch(&double)? } else { d.clone() };
        let s = match check {
            Some(c) => c.add(&t)?,
            None => t,
        };
        check = Some(s.mod_const(10)?);
    }
    check.ok_or(Error::EmptyVector)
}

/// `Pr[check == 0]`.
pub fn luhn_valid_prob(digits: &[ProbInt]) -> Result<f64> {
    luhn_check(digits)?.prob(Comparator::Eq, 0)
}

/// Records the Luhn check value on a tape.
pub fn luhn_check_tape(tape: &mut Tape, digits: &[Var]) -> Result<Var> {
    let n = digits.len();
    let mut check: Option<Var> = None;
    for (i, &d) in digits.iter().enumerate() {
        let t = if is_doubled(i, n) { tape.branch(d, doubling_branch()?)? } else { d };
        let s = match check {
            Some(c) => tape.add_rv(c, t)?,
            None => t,
        };
        check = Some(tape.mod_const(s, 10)?);
    }
    check.ok_or(Error::EmptyVector)
}

/// Program text computing `Pr[check == 0]` for the given digit distributions.
pub fn luhn_source(digits: &[DistSpec]) -> String {
    let n = digits.len();
    let mut s = String::new();
    for (i, d) in digits.iter().enumerate() {
        s += &format!("pint D{i} ~ {d};\n");
    }
    for i in 0..n {
        if is_doubled(i, n) {
            s += &format!("let T{i} = if (D{i} < 5) then 2*D{i} else 2*D{i} - 9;\n");
        } else {
            s += &format!("let T{i} = D{i};\n");
        }
        if i == 0 {
            s += "let C1 = T0 mod 10;\n";
        } else {
            s += &format!("let C{} = (C{i} + T{i}) mod 10;\n", i + 1);
        }
    }
    s += &format!("let check = C{n};\nquery Pr[check == 0];\n");
    s
}

/// Luhn program over `len` independent uniform digits.
pub fn uniform_luhn_source(len: usize) -> String {
    luhn_source(&vec![DistSpec::Uniform(0, 9); len])
}

/// Luhn program for a fixed identifier, each digit a point mass.
pub fn fixed_luhn_source(id: &str) -> Result<String> {
    let digits = id
        .chars()
        .map(|c| {
            c.to_digit(10)
                .map(|d| DistSpec::Point(d as i64))
                .ok_or_else(|| Error::InvalidArgument(format!("not a digit: {c:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(luhn_source(&digits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{fd_check, FdOptions, LeafParam};
    use crate::lang::{evaluate_source, parse};
    use crate::oracle::enumerate_program;

    #[test]
    fn reference_implementation() {
        assert!(luhn_valid("79927398713").unwrap());
        assert!(!luhn_valid("79927398710").unwrap());
        assert!(luhn_valid("0").unwrap());
        assert!(luhn_valid("18").unwrap());
        assert!(luhn_valid("7a").is_err());
        assert!(luhn_valid("12x").is_err());
    }

    #[test]
    fn fixed_identifier_is_certainly_valid() {
        let id = "79927398713";
        let digits: Vec<ProbInt> =
            id.bytes().map(|b| ProbInt::point((b - b'0') as i64)).collect();
        assert_eq!(luhn_valid_prob(&digits).unwrap(), 1.0);
        let r = evaluate_source(&fixed_luhn_source(id).unwrap(), true).unwrap();
        assert_eq!(r[0].scalar(), Some(1.0));
        let p = parse(&fixed_luhn_source(id).unwrap()).unwrap();
        assert_eq!(enumerate_program(&p).unwrap()[0].scalar(), Some(1.0));
    }

    #[test]
    fn matches_reference_on_every_three_digit_identifier() {
        for v in 0..1000 {
            let id = format!("{v:03}");
            let digits: Vec<ProbInt> =
                id.bytes().map(|b| ProbInt::point((b - b'0') as i64)).collect();
            let p = luhn_valid_prob(&digits).unwrap();
            assert_eq!(p == 1.0, luhn_valid(&id).unwrap(), "{id}");
            assert!(p == 0.0 || p == 1.0);
        }
    }

    #[test]
    fn uniform_digits_match_enumeration() {
        for n in 1..=4 {
            let digits = vec![ProbInt::uniform(0, 9).unwrap(); n];
            let engine = luhn_valid_prob(&digits).unwrap();
            let p = parse(&uniform_luhn_source(n)).unwrap();
            let oracle = enumerate_program(&p).unwrap()[0].scalar().unwrap();
            assert!((engine - oracle).abs() < 1e-12, "n={n}");
            assert!((oracle - 0.1).abs() < 1e-12);
        }
    }

    fn luhn_tape(leaves: Vec<LeafParam>) -> (Tape, Var) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = leaves
            .into_iter()
            .map(|l| tape.leaf(l))
            .collect::<Result<_>>()
            .unwrap();
        let check = luhn_check_tape(&mut tape, &vars).unwrap();
        let q = tape.prob_cmp(check, Comparator::Eq, 0).unwrap();
        (tape, q)
    }

    #[test]
    fn uniform_digit_gradients() {
        let leaves = vec![LeafParam::raw(vec![0.1f64.ln(); 10], 0); 3];
        let (tape, q) = luhn_tape(leaves);
        assert!((tape.scalar(q).unwrap() - 0.1).abs() < 1e-15);
        let report = fd_check(&tape, q, FdOptions::default()).unwrap();
        assert!(!report.saw_nan);
        assert!(report.max_rel_error <= 1e-4, "{report:?}");
    }

    #[test]
    fn tape_matches_direct_and_gradients_check_out() {
        let leaves = [
            vec![0.3, -0.2, 0.1, 0.0, 0.5, -0.4, 0.2, 0.1, -0.1, 0.05],
            vec![0.2, 0.0, -0.6, 0.1, 0.9, 0.0, 0.3, -0.2, 0.4, -0.7],
            vec![-0.5, 0.4, 0.3, -0.1, 0.2, 0.0, 0.1, -0.3, 0.6, 0.2],
        ];
        let (tape, q) = luhn_tape(leaves.iter().map(|l| LeafParam::softmax(l.clone(), 0)).collect());
        let digits: Vec<ProbInt> = tape.leaves().iter().map(|l| l.to_prob_int().unwrap()).collect();
        let direct = luhn_valid_prob(&digits).unwrap();
        assert!((tape.scalar(q).unwrap() - direct).abs() < 1e-15);
        let report = fd_check(&tape, q, FdOptions::default()).unwrap();
        assert!(!report.saw_nan);
        assert!(report.max_rel_error <= 1e-4, "{report:?}");
    }
}
