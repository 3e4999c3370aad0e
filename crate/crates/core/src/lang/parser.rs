use std::collections::HashSet;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::{LangError, LangErrorKind};
use crate::inference::Comparator;

/// Parses program text into a [`Program`].
pub fn parse(source: &str) -> Result<Program, LangError> {
    let tokens = tokenize(source)?;
    let mut p = Parser {
        src: source,
        tokens,
        pos: 0,
        defined: HashSet::new(),
    };
    p.program()
}

/// Parses a single expression, without name resolution.
pub fn parse_expr(source: &str) -> Result<Expr, LangError> {
    let tokens = tokenize(source)?;
    let mut p = Parser {
        src: source,
        tokens,
        pos: 0,
        defined: HashSet::new(),
    };
    let e = p.expr()?;
    p.expect(Tok::Eof)?;
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    /// Names declared or bound so far.
    defined: HashSet<String>,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn at(&self, tok: &Tok) -> bool {
        &self.peek().tok == tok
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.at(tok) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error<T>(&self, expected: &str) -> Result<T, LangError> {
        let t = self.peek();
        Err(LangError::syntax(
            t.span,
            format!("expected {expected}, found {}", t.tok.describe()),
        ))
    }

    fn expect(&mut self, tok: Tok) -> Result<Token, LangError> {
        if self.at(&tok) {
            Ok(self.bump())
        } else {
            let what = match &tok {
                Tok::Eof => "end of input".to_string(),
                t => t.describe(),
            };
            self.error(&what)
        }
    }

    fn ident(&mut self) -> Result<(String, Span), LangError> {
        match &self.peek().tok {
            Tok::Ident(name) => {
                let name = name.clone();
                let span = self.bump().span;
                Ok((name, span))
            }
            _ => self.error("identifier"),
        }
    }

    fn signed_int(&mut self) -> Result<i64, LangError> {
        let span = self.peek().span;
        let neg = self.eat(&Tok::Minus);
        match self.peek().tok {
            Tok::Int(v) => {
                self.bump();
                let v = if neg { -v } else { v };
                i64::try_from(v)
                    .map_err(|_| LangError::syntax(span, format!("integer {v} out of range")))
            }
            _ => self.error("integer literal"),
        }
    }

    fn comparator(&mut self) -> Result<Comparator, LangError> {
        let c = match self.peek().tok {
            Tok::Lt => Comparator::Lt,
            Tok::Le => Comparator::Le,
            Tok::EqEq => Comparator::Eq,
            Tok::Ne => Comparator::Ne,
            Tok::Gt => Comparator::Gt,
            Tok::Ge => Comparator::Ge,
            _ => return self.error("comparison operator"),
        };
        self.bump();
        Ok(c)
    }

    fn define(&mut self, name: &str, span: Span) -> Result<(), LangError> {
        if !self.defined.insert(name.to_string()) {
            return Err(LangError::new(
                LangErrorKind::DuplicateName(name.to_string()),
                span,
            ));
        }
        Ok(())
    }

    fn check_names(&self, e: &Expr) -> Result<(), LangError> {
        let mut err = None;
        e.visit_vars(&mut |name, span| {
            if err.is_none() && !self.defined.contains(name) {
                err = Some(LangError::new(LangErrorKind::UnknownName(name.to_string()), span));
            }
        });
        err.map_or(Ok(()), Err)
    }

    fn program(&mut self) -> Result<Program, LangError> {
        let mut prog = Program::default();
        loop {
            match self.peek().tok {
                Tok::Eof => return Ok(prog),
                Tok::Pint => prog.declarations.push(self.decl()?),
                Tok::Let => prog.bindings.push(self.binding()?),
                Tok::Query => prog.queries.push(self.query()?),
                _ => return self.error("`pint`, `let` or `query`"),
            }
        }
    }

    fn decl(&mut self) -> Result<Decl, LangError> {
        let span = self.expect(Tok::Pint)?.span;
        let (name, name_span) = self.ident()?;
        self.expect(Tok::Tilde)?;
        let dist = self.dist()?;
        self.expect(Tok::Semi)?;
        self.define(&name, name_span)?;
        Ok(Decl { name, dist, span })
    }

    fn dist(&mut self) -> Result<DistSpec, LangError> {
        match self.peek().tok {
            Tok::Uniform => {
                self.bump();
                self.expect(Tok::LParen)?;
                let lo = self.signed_int()?;
                self.expect(Tok::Comma)?;
                let hi = self.signed_int()?;
                self.expect(Tok::RParen)?;
                Ok(DistSpec::Uniform(lo, hi))
            }
            Tok::Point => {
                self.bump();
                self.expect(Tok::LParen)?;
                let v = self.signed_int()?;
                self.expect(Tok::RParen)?;
                Ok(DistSpec::Point(v))
            }
            Tok::Pmf => {
                self.bump();
                self.expect(Tok::LBrace)?;
                let mut entries = Vec::new();
                loop {
                    let v = self.signed_int()?;
                    self.expect(Tok::Colon)?;
                    let span = self.peek().span;
                    let w = match self.bump().tok {
                        Tok::Float(x) => x,
                        Tok::Int(k) => k as f64,
                        _ => return Err(LangError::syntax(span, "expected a weight".into())),
                    };
                    entries.push((v, w));
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.expect(Tok::RBrace)?;
                Ok(DistSpec::Pmf(entries))
            }
            _ => self.error("`uniform`, `point` or `pmf`"),
        }
    }

    fn binding(&mut self) -> Result<Binding, LangError> {
        let span = self.expect(Tok::Let)?.span;
        let (name, name_span) = self.ident()?;
        self.expect(Tok::Assign)?;
        let expr = self.expr()?;
        self.expect(Tok::Semi)?;
        self.check_names(&expr)?;
        self.define(&name, name_span)?;
        Ok(Binding { name, expr, span })
    }

    fn query(&mut self) -> Result<Query, LangError> {
        let span = self.expect(Tok::Query)?.span;
        let start = self.peek().start;
        let kind = match self.peek().tok.clone() {
            Tok::Ident(ref s) if s == "E" => {
                self.bump();
                self.expect(Tok::LBracket)?;
                let e = self.expr()?;
                self.expect(Tok::RBracket)?;
                QueryKind::Expect(e)
            }
            Tok::Ident(ref s) if s == "Pr" => {
                self.bump();
                self.expect(Tok::LBracket)?;
                let e = self.expr()?;
                let cmp = self.comparator()?;
                let k = self.signed_int()?;
                self.expect(Tok::RBracket)?;
                QueryKind::Prob(e, cmp, k)
            }
            Tok::Pmf => {
                self.bump();
                self.expect(Tok::LBracket)?;
                let e = self.expr()?;
                self.expect(Tok::RBracket)?;
                QueryKind::Pmf(e)
            }
            _ => return self.error("`E[`, `Pr[` or `pmf[`"),
        };
        let end = self.tokens[self.pos - 1].end;
        self.expect(Tok::Semi)?;
        let q = Query {
            text: self.src[start..end].to_string(),
            kind,
            span,
        };
        self.check_names(q.expr())?;
        Ok(q)
    }

    pub(super) fn expr(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.term()?;
        loop {
            let minus = match self.peek().tok {
                Tok::Plus => false,
                Tok::Minus => true,
                _ => return Ok(lhs),
            };
            let op_span = self.bump().span;
            let rhs = self.term()?;
            let span = lhs.span;
            let kind = match (lhs.kind, rhs.kind) {
                (l, ExprKind::Int(k)) => {
                    let k = if minus {
                        k.checked_neg()
                            .ok_or_else(|| LangError::syntax(op_span, "constant overflow".into()))?
                    } else {
                        k
                    };
                    ExprKind::AddConst(Box::new(Expr::new(l, span)), k)
                }
                (ExprKind::Int(k), r) => {
                    let r = Expr::new(r, rhs.span);
                    let r = if minus {
                        Expr::new(ExprKind::Neg(Box::new(r)), op_span)
                    } else {
                        r
                    };
                    ExprKind::AddConst(Box::new(r), k)
                }
                (l, r) => {
                    let r = Expr::new(r, rhs.span);
                    let r = if minus {
                        Expr::new(ExprKind::Neg(Box::new(r)), op_span)
                    } else {
                        r
                    };
                    ExprKind::Add(Box::new(Expr::new(l, span)), Box::new(r))
                }
            };
            lhs = Expr::new(kind, span);
        }
    }

    fn term(&mut self) -> Result<Expr, LangError> {
        let span = self.peek().span;
        let leading_const = match (self.peek_at(0), self.peek_at(1), self.peek_at(2)) {
            (Tok::Int(_), Tok::Star, _) => true,
            (Tok::Minus, Tok::Int(_), Tok::Star) => true,
            _ => false,
        };
        let mut e = if leading_const {
            let k = self.signed_int()?;
            self.expect(Tok::Star)?;
            let f = self.factor()?;
            Expr::new(ExprKind::MulConst(Box::new(f), k), span)
        } else {
            self.factor()?
        };
        loop {
            let kind = match self.peek().tok {
                Tok::Star => {
                    self.bump();
                    if !matches!(self.peek().tok, Tok::Int(_) | Tok::Minus) {
                        return self.error("integer literal (only multiplication by constants is linear)");
                    }
                    ExprKind::MulConst(Box::new(e), self.signed_int()?)
                }
                Tok::SlashSlash => {
                    self.bump();
                    ExprKind::IDiv(Box::new(e), self.positive_int()?)
                }
                Tok::Mod => {
                    self.bump();
                    ExprKind::Mod(Box::new(e), self.positive_int()?)
                }
                _ => return Ok(e),
            };
            e = Expr::new(kind, span);
        }
    }

    fn positive_int(&mut self) -> Result<i64, LangError> {
        let span = self.peek().span;
        let k = self.signed_int()?;
        if k <= 0 {
            return Err(LangError::syntax(span, format!("divisor must be positive, got {k}")));
        }
        Ok(k)
    }

    fn factor(&mut self) -> Result<Expr, LangError> {
        let span = self.peek().span;
        match self.peek().tok.clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(Expr::new(ExprKind::Var(name), span))
            }
            Tok::Int(_) => Ok(Expr::new(ExprKind::Int(self.signed_int()?), span)),
            Tok::Minus => {
                if matches!(self.peek_at(1), Tok::Int(_)) {
                    return Ok(Expr::new(ExprKind::Int(self.signed_int()?), span));
                }
                self.bump();
                let inner = self.factor()?;
                Ok(Expr::new(ExprKind::Neg(Box::new(inner)), span))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::If => {
                self.bump();
                self.expect(Tok::LParen)?;
                let (var, _) = self.ident()?;
                let cmp = self.comparator()?;
                let rhs = self.signed_int()?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::Then)?;
                let then_branch = Box::new(self.expr()?);
                self.expect(Tok::Else)?;
                let else_branch = Box::new(self.expr()?);
                Ok(Expr::new(
                    ExprKind::IfThenElse {
                        var,
                        cmp,
                        rhs,
                        then_branch,
                        else_branch,
                    },
                    span,
                ))
            }
            _ => self.error("expression"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(src: &str) -> Expr {
        parse_expr(src).unwrap()
    }

    fn var(n: &str) -> Box<Expr> {
        Box::new(Expr::new(ExprKind::Var(n.into()), Span::default()))
    }

    #[test]
    fn minimal_program() {
        let p = parse("pint X ~ uniform(0,9); query E[X];").unwrap();
        assert_eq!(p.declarations.len(), 1);
        assert_eq!(p.queries.len(), 1);
        assert_eq!(p.queries[0].text, "E[X]");
        assert_eq!(p.declarations[0].dist, DistSpec::Uniform(0, 9));
    }

    #[test]
    fn luhn_branch() {
        let p = parse("pint X ~ uniform(0,9); let V = if (X < 5) then 2*X else 2*X - 9;").unwrap();
        let ExprKind::IfThenElse { var: v, cmp, rhs, then_branch, else_branch } = &p.bindings[0].expr.kind else {
            panic!("expected a branch");
        };
        assert_eq!((v.as_str(), *cmp, *rhs), ("X", Comparator::Lt, 5));
        assert_eq!(then_branch.kind, ExprKind::MulConst(var("X"), 2));
        let doubled = Box::new(Expr::new(ExprKind::MulConst(var("X"), 2), Span::default()));
        assert_eq!(else_branch.kind, ExprKind::AddConst(doubled, -9));
    }

    #[test]
    fn pmf_declaration() {
        let p = parse("pint X ~ pmf{0:0.2, 1:0.6, 2:0.15, 3:0.05};").unwrap();
        assert_eq!(
            p.declarations[0].dist,
            DistSpec::Pmf(vec![(0, 0.2), (1, 0.6), (2, 0.15), (3, 0.05)])
        );
    }

    #[test]
    fn precedence() {
        assert_eq!(
            e("-X * 2").kind,
            ExprKind::MulConst(Box::new(Expr::new(ExprKind::Neg(var("X")), Span::default())), 2)
        );
        assert_eq!(e("X + Y mod 3"), e("X + (Y mod 3)"));
        assert_eq!(e("X - Y"), e("X + -(Y)"));
        assert_eq!(e("3 + X").kind, ExprKind::AddConst(var("X"), 3));
        assert_eq!(e("X * -2").kind, ExprKind::MulConst(var("X"), -2));
        assert_eq!(e("-2 * X").kind, ExprKind::MulConst(var("X"), -2));
        assert_eq!(e("X // 2 mod 5"), e("(X // 2) mod 5"));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse("pint X ~ uniform(0,9);\nlet Y = X * X;").unwrap_err();
        assert!(matches!(err.kind, LangErrorKind::Syntax(_)));
        assert_eq!((err.span.line, err.span.col), (2, 13));
        let err = parse("pint X ~ uniform(0 9);").unwrap_err();
        assert_eq!((err.span.line, err.span.col), (1, 20));
        assert!(parse("let Y = X // 0;").is_err());
        assert!(parse("query E[X]").is_err());
    }

    #[test]
    fn name_errors() {
        let err = parse("pint X ~ point(1); pint X ~ point(2);").unwrap_err();
        assert_eq!(err.kind, LangErrorKind::DuplicateName("X".into()));
        let err = parse("pint X ~ point(1); query E[X + Z];").unwrap_err();
        assert_eq!(err.kind, LangErrorKind::UnknownName("Z".into()));
        assert_eq!(err.span.col, 32);
    }

    #[test]
    fn pretty_print_is_a_fixpoint() {
        let src = "pint X ~ pmf{-1: 0.25, 2: 1e-300, 3: 0.5};\npint Y ~ uniform(-3, 4);\n\
                   let A = if (X >= -1) then -(X) * 3 + 7 else X mod 4;\n\
                   let B = -5 + Y // 2 - A;\nquery Pr[B != -2];\nquery pmf[-B];\nquery E[2 * A - -3];";
        let p1 = parse(src).unwrap();
        let printed = p1.to_string();
        let p2 = parse(&printed).unwrap();
        assert_eq!(p1, p2, "{printed}");
        assert_eq!(p2.to_string(), printed);
    }
}
