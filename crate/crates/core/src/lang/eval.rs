use std::collections::HashMap;
use std::fmt;

use super::ast::{DistSpec, Expr, ExprKind, Program, QueryKind, Span};
use super::check::check_independence;
use super::{parse, LangError, LangErrorKind};
use crate::error::Error;
use crate::inference::{expectation, prob_cmp, split, Condition};
use crate::ops::mix;
use crate::pmf::{check_dim, ProbInt};

#[derive(Debug, Clone, PartialEq)]
pub enum QueryValue {
    Scalar(f64),
    Pmf { offset: i64, masses: Vec<f64> },
}

/// Twelve significant digits with trailing zeros dropped.
pub fn format_value(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    let trim = |s: String| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if !(-6..15).contains(&mag) {
        let s = format!("{v:.11e}");
        let (m, e) = s.split_once('e').expect("exponent");
        return format!("{}e{e}", trim(m.to_string()));
    }
    let decimals = (11 - mag).max(0) as usize;
    trim(format!("{v:.decimals$}"))
}

impl fmt::Display for QueryValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryValue::Scalar(v) => f.write_str(&format_value(*v)),
            QueryValue::Pmf { offset, masses } => {
                write!(f, "offset {offset} [")?;
                for (i, m) in masses.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    f.write_str(&format_value(*m))?;
                }
                write!(f, "]")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    /// Query as written in the source.
    pub text: String,
    /// One of `expect`, `prob`, `pmf`.
    pub kind: &'static str,
    pub value: QueryValue,
}

impl QueryResult {
    pub fn scalar(&self) -> Option<f64> {
        match self.value {
            QueryValue::Scalar(v) => Some(v),
            QueryValue::Pmf { .. } => None,
        }
    }
}

impl fmt::Display for QueryResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.text, self.value)
    }
}

/// Parses, checks and evaluates `source`.
pub fn evaluate_source(source: &str, strict: bool) -> Result<Vec<QueryResult>, LangError> {
    evaluate(&parse(source)?, strict)
}

/// Evaluates every query of `program`. With `strict`, each declared variable
/// must have total mass 1.
pub fn evaluate(program: &Program, strict: bool) -> Result<Vec<QueryResult>, LangError> {
    if let Some(v) = check_independence(program).into_iter().next() {
        return Err(LangError::new(LangErrorKind::Independence(v.message), v.span));
    }
    let mut env: HashMap<&str, ProbInt> = HashMap::new();
    for d in &program.declarations {
        let x = dist_to_prob_int(&d.dist).map_err(|e| LangError::engine(e, d.span))?;
        if strict {
            x.require_normalized().map_err(|e| LangError::engine(e, d.span))?;
        }
        env.insert(&d.name, x);
    }
    for b in &program.bindings {
        let x = Evaluator { env: &env, bound: None }.eval(&b.expr)?;
        env.insert(&b.name, x);
    }
    program
        .queries
        .iter()
        .map(|q| {
            let x = Evaluator { env: &env, bound: None }.eval(q.expr())?;
            let at = |e: Error| LangError::engine(e, q.span);
            let (kind, value) = match &q.kind {
                QueryKind::Expect(_) => ("expect", QueryValue::Scalar(expectation(&x).map_err(at)?)),
                QueryKind::Prob(_, cmp, k) => ("prob", QueryValue::Scalar(prob_cmp(&x, *cmp, *k).map_err(at)?)),
                QueryKind::Pmf(_) => {
                    let t = x.trimmed();
                    ("pmf", QueryValue::Pmf { offset: t.offset(), masses: t.masses() })
                }
            };
            Ok(QueryResult { text: q.text.clone(), kind, value })
        })
        .collect()
}

/// Builds the distribution a declaration denotes.
pub fn dist_to_prob_int(spec: &DistSpec) -> crate::Result<ProbInt> {
    match spec {
        DistSpec::Uniform(lo, hi) => ProbInt::uniform(*lo, *hi),
        DistSpec::Point(v) => Ok(ProbInt::point(*v)),
        DistSpec::Pmf(entries) => {
            let lo = entries.iter().map(|e| e.0).min().ok_or(Error::EmptyVector)?;
            let hi = entries.iter().map(|e| e.0).max().ok_or(Error::EmptyVector)?;
            let n = check_dim((hi as i128 - lo as i128 + 1) as u128)?;
            let mut probs = vec![0.0; n];
            let mut seen = vec![false; n];
            for &(v, w) in entries {
                let i = (v as i128 - lo as i128) as usize;
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidArgument(format!("outcome {v} listed twice")));
                }
                probs[i] = w;
            }
            ProbInt::from_probs(&probs, lo)
        }
    }
}

struct Evaluator<'a> {
    env: &'a HashMap<&'a str, ProbInt>,
    /// Inside a branch body, the conditioned variable restricted to that side.
    bound: Option<(&'a str, &'a ProbInt)>,
}

impl Evaluator<'_> {
    fn lookup(&self, name: &str, span: Span) -> Result<ProbInt, LangError> {
        if let Some((n, x)) = self.bound {
            if n == name {
                return Ok(x.clone());
            }
        }
        self.env
            .get(name)
            .cloned()
            .ok_or_else(|| LangError::new(LangErrorKind::UnknownName(name.to_string()), span))
    }

    fn eval(&self, e: &Expr) -> Result<ProbInt, LangError> {
        let at = |err: Error| LangError::engine(err, e.span);
        match &e.kind {
            ExprKind::Var(name) => self.lookup(name, e.span),
            ExprKind::Int(c) => Ok(ProbInt::point(*c)),
            ExprKind::Add(a, b) => self.eval(a)?.add(&self.eval(b)?).map_err(at),
            ExprKind::AddConst(a, k) => self.eval(a)?.add_const(*k).map_err(at),
            ExprKind::Neg(a) => self.eval(a)?.neg().map_err(at),
            ExprKind::MulConst(a, k) => self.eval(a)?.mul_const(*k).map_err(at),
            ExprKind::IDiv(a, k) => self.eval(a)?.div_const(*k).map_err(at),
            ExprKind::Mod(a, k) => self.eval(a)?.mod_const(*k).map_err(at),
            ExprKind::IfThenElse {
                var,
                cmp,
                rhs,
                then_branch,
                else_branch,
            } => {
                let x = self.lookup(var, e.span)?;
                let cond = Condition::compare(*cmp, *rhs).map_err(at)?;
                let (t, f) = split(&x, &cond).map_err(at)?;
                let mut out: Option<ProbInt> = None;
                for (part, body) in [(t, then_branch), (f, else_branch)] {
                    let Some(part) = part else { continue };
                    let sub = Evaluator {
                        env: self.env,
                        bound: Some((var, &part)),
                    };
                    let mut y = sub.eval(body)?;
                    if !body.has_vars() {
                        // A constant body still carries the mass of its side.
                        y = part.mul_const(0).and_then(|z| z.add(&y)).map_err(at)?;
                    }
                    out = Some(match out {
                        None => y,
                        Some(prev) => mix(&prev, &y).map_err(at)?,
                    });
                }
                out.ok_or_else(|| at(Error::AllZeroMass))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(src: &str) -> Vec<QueryResult> {
        evaluate_source(src, true).unwrap()
    }

    /// Luhn checksum over `n` uniform digits, written out in the language.
    fn luhn_program(n: usize) -> String {
        let mut s = String::new();
        for i in 0..n {
            s += &format!("pint D{i} ~ uniform(0, 9);\n");
        }
        s += "let C0 = 0;\n";
        for i in 0..n {
            let t = if i % 2 == n % 2 {
                format!("let T{i} = if (D{i} < 5) then 2*D{i} else 2*D{i} - 9;\n")
            } else {
                format!("let T{i} = D{i};\n")
            };
            s += &t;
            s += &format!("let C{} = (C{i} + T{i}) mod 10;\n", i + 1);
        }
        s + &format!("let check = C{n};\nquery Pr[check == 0];\n")
    }

    #[test]
    fn uniform_expectation() {
        let r = run("pint X ~ uniform(0,9); query E[X];");
        assert!((r[0].scalar().unwrap() - 4.5).abs() < 1e-12);
        assert_eq!(r[0].to_string(), "E[X] = 4.5");
        assert_eq!(r[0].kind, "expect");
    }

    #[test]
    fn value_formatting() {
        assert_eq!(format_value(0.09999999999999998), "0.1");
        assert_eq!(format_value(1.0), "1");
        assert_eq!(format_value(0.0), "0");
        assert_eq!(format_value(-2.5), "-2.5");
        assert_eq!(format_value(1234.5678), "1234.5678");
        assert_eq!(format_value(1e-300), "1e-300");
        assert_eq!(format_value(2.5e-7), "2.5e-7");
        assert_eq!(format_value(0.1775), "0.1775");
    }

    #[test]
    fn point_probability() {
        assert_eq!(run("pint X ~ point(4); query Pr[X == 4];")[0].scalar(), Some(1.0));
    }

    #[test]
    fn two_small_pmfs_sum() {
        let src = "pint X1 ~ pmf{0:0.2, 1:0.6, 2:0.15, 3:0.05};\n\
                   pint X2 ~ pmf{0:0.45, 1:0.1, 2:0.25, 3:0.1};\nquery pmf[X1 + X2];";
        // The second input carries total mass 0.9, so only lenient mode accepts it.
        assert!(evaluate_source(src, true).is_err());
        let r = evaluate_source(src, false).unwrap();
        let QueryValue::Pmf { offset, masses } = &r[0].value else { panic!() };
        assert_eq!(*offset, 0);
        let expected = [0.09, 0.29, 0.1775, 0.2075, 0.1025, 0.0275, 0.005];
        assert_eq!(masses.len(), 7);
        for (m, e) in masses.iter().zip(expected) {
            assert!((m - e).abs() < 1e-12, "{masses:?}");
        }
    }

    #[test]
    fn luhn_two_digits() {
        let p = run(&luhn_program(2))[0].scalar().unwrap();
        assert!((p - 0.1).abs() < 1e-12, "{p}");
    }

    #[test]
    fn luhn_doubling_branch() {
        let r = run("pint X ~ uniform(0,9); let V = if (X < 5) then 2*X else 2*X - 9; query pmf[V];");
        let QueryValue::Pmf { offset, masses } = &r[0].value else { panic!() };
        assert_eq!(*offset, 0);
        // Doubling with digit-sum is a permutation of 0..=9.
        assert_eq!(masses.len(), 10);
        assert!(masses.iter().all(|m| (m - 0.1).abs() < 1e-15));
    }

    #[test]
    fn constant_branch_bodies_keep_side_mass() {
        let r = run("pint X ~ uniform(0,3); let V = if (X >= 2) then 7 else (if (X == 0) then -1 else X); query pmf[V];");
        let QueryValue::Pmf { offset, masses } = &r[0].value else { panic!() };
        assert_eq!(*offset, -1);
        let expect = [0.25, 0.0, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5];
        assert_eq!(masses.len(), expect.len());
        for (m, e) in masses.iter().zip(expect) {
            assert!((m - e).abs() < 1e-15, "{masses:?}");
        }
    }

    #[test]
    fn point_programs_match_integer_arithmetic() {
        let src = "pint A ~ point(-7); pint B ~ point(3); pint F ~ point(3);\n\
                   let C = (A * 3 + -B) // 4 mod 5;\nlet D = if (C > 1) then C - 10 else C * 2;\n\
                   query pmf[D]; query E[D + 2 * F];";
        let c = ((-7i64 * 3 - 3).div_euclid(4)).rem_euclid(5);
        let d = if c > 1 { c - 10 } else { c * 2 };
        let r = run(src);
        assert_eq!(r[0].value, QueryValue::Pmf { offset: d, masses: vec![1.0] });
        assert_eq!(r[1].scalar(), Some((d + 6) as f64));
    }

    #[test]
    fn strict_mode_rejects_unnormalized() {
        let src = "pint X ~ pmf{0: 0.5, 1: 0.25};\nquery E[X];";
        let err = evaluate_source(src, true).unwrap_err();
        assert!(matches!(err.kind, LangErrorKind::Engine(Error::NotNormalized { .. })));
        assert_eq!(err.span.line, 1);
        let r = evaluate_source(src, false).unwrap();
        assert_eq!(r[0].scalar(), Some(0.25));
    }

    #[test]
    fn negative_outcomes() {
        let r = run("pint X ~ pmf{-3: 0.25, -1: 0.75}; query pmf[X]; query E[X];");
        assert_eq!(r[0].value, QueryValue::Pmf { offset: -3, masses: vec![0.25, 0.0, 0.75] });
        assert!((r[1].scalar().unwrap() + 1.5).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_locations() {
        let err = evaluate_source("pint X ~ uniform(0,9);\nquery E[X + X];", false).unwrap_err();
        assert!(matches!(err.kind, LangErrorKind::Independence(_)));
        assert_eq!((err.span.line, err.span.col), (2, 9));
        let err = evaluate_source("pint X ~ uniform(5, 1);", false).unwrap_err();
        assert!(matches!(err.kind, LangErrorKind::Engine(Error::InvalidRange { .. })));
        let err = evaluate_source("pint X ~ pmf{0: 0.5, 0: 0.5};", false).unwrap_err();
        assert_eq!(err.span.col, 1);
        let err = evaluate_source("pint X ~ pmf{0: -0.5, 1: 1.5};", false).unwrap_err();
        assert!(matches!(err.kind, LangErrorKind::Syntax(_)));
        let err = evaluate_source(
            "pint X ~ uniform(0, 1);\nlet Y = X * 2;\nlet Z = Y * 9223372036854775807;",
            false,
        )
        .unwrap_err();
        assert_eq!(err.span.line, 3);
        assert!(matches!(err.kind, LangErrorKind::Engine(_)));
    }
}
