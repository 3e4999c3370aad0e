use std::fmt;

use crate::inference::Comparator;

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

/// Spans are ignored by equality.
impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Var(String),
    Int(i64),
    Add(Box<Expr>, Box<Expr>),
    AddConst(Box<Expr>, i64),
    Neg(Box<Expr>),
    MulConst(Box<Expr>, i64),
    IDiv(Box<Expr>, i64),
    Mod(Box<Expr>, i64),
    IfThenElse {
        var: String,
        cmp: Comparator,
        rhs: i64,
        then_branch: Box<Expr>,
        else_branch: Box<Expr>,
    },
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Self { kind, span }
    }

    /// Calls `f` on every variable reference, including branch conditions.
    pub fn visit_vars<'a>(&'a self, f: &mut impl FnMut(&'a str, Span)) {
        match &self.kind {
            ExprKind::Var(name) => f(name, self.span),
            ExprKind::Int(_) => {}
            ExprKind::Add(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
            ExprKind::AddConst(a, _)
            | ExprKind::Neg(a)
            | ExprKind::MulConst(a, _)
            | ExprKind::IDiv(a, _)
            | ExprKind::Mod(a, _) => a.visit_vars(f),
            ExprKind::IfThenElse {
                var,
                then_branch,
                else_branch,
                ..
            } => {
                f(var, self.span);
                then_branch.visit_vars(f);
                else_branch.visit_vars(f);
            }
        }
    }

    pub fn has_vars(&self) -> bool {
        let mut any = false;
        self.visit_vars(&mut |_, _| any = true);
        any
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DistSpec {
    Uniform(i64, i64),
    Point(i64),
    /// Explicit `(outcome, weight)` pairs in source order.
    Pmf(Vec<(i64, f64)>),
}

#[derive(Debug, Clone)]
pub struct Decl {
    pub name: String,
    pub dist: DistSpec,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct Binding {
    pub name: String,
    pub expr: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryKind {
    Expect(Expr),
    Prob(Expr, Comparator, i64),
    Pmf(Expr),
}

#[derive(Debug, Clone)]
pub struct Query {
    pub kind: QueryKind,
    /// Query text as written, e.g. `Pr[check == 0]`.
    pub text: String,
    pub span: Span,
}

impl Query {
    pub fn expr(&self) -> &Expr {
        match &self.kind {
            QueryKind::Expect(e) | QueryKind::Prob(e, _, _) | QueryKind::Pmf(e) => e,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Program {
    pub declarations: Vec<Decl>,
    pub bindings: Vec<Binding>,
    pub queries: Vec<Query>,
}

impl Program {
    pub fn decl(&self, name: &str) -> Option<&Decl> {
        self.declarations.iter().find(|d| d.name == name)
    }

    pub fn binding(&self, name: &str) -> Option<&Binding> {
        self.bindings.iter().find(|b| b.name == name)
    }
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        let decls = |p: &Program| -> Vec<(String, DistSpec)> {
            p.declarations.iter().map(|d| (d.name.clone(), d.dist.clone())).collect()
        };
        let binds = |p: &Program| -> Vec<(String, Expr)> {
            p.bindings.iter().map(|b| (b.name.clone(), b.expr.clone())).collect()
        };
        let queries = |p: &Program| -> Vec<QueryKind> { p.queries.iter().map(|q| q.kind.clone()).collect() };
        decls(self) == decls(other) && binds(self) == binds(other) && queries(self) == queries(other)
    }
}

fn write_int(f: &mut fmt::Formatter<'_>, k: i64) -> fmt::Result {
    write!(f, "{k}")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Var(name) => f.write_str(name),
            ExprKind::Int(k) => write_int(f, *k),
            ExprKind::Add(a, b) => write!(f, "({a} + {b})"),
            ExprKind::AddConst(a, k) if *k < 0 => write!(f, "({a} - {})", (*k as i128).abs()),
            ExprKind::AddConst(a, k) => write!(f, "({a} + {k})"),
            ExprKind::Neg(a) => write!(f, "-({a})"),
            ExprKind::MulConst(a, k) => write!(f, "({a} * {k})"),
            ExprKind::IDiv(a, k) => write!(f, "({a} // {k})"),
            ExprKind::Mod(a, k) => write!(f, "({a} mod {k})"),
            ExprKind::IfThenElse {
                var,
                cmp,
                rhs,
                then_branch,
                else_branch,
            } => write!(
                f,
                "(if ({var} {cmp} {rhs}) then {then_branch} else {else_branch})"
            ),
        }
    }
}

impl fmt::Display for DistSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistSpec::Uniform(lo, hi) => write!(f, "uniform({lo}, {hi})"),
            DistSpec::Point(v) => write!(f, "point({v})"),
            DistSpec::Pmf(entries) => {
                write!(f, "pmf{{")?;
                for (i, (v, w)) in entries.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    // Debug formatting round-trips f64 exactly.
                    write!(f, "{v}: {w:?}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryKind::Expect(e) => write!(f, "E[{e}]"),
            QueryKind::Prob(e, cmp, k) => write!(f, "Pr[{e} {cmp} {k}]"),
            QueryKind::Pmf(e) => write!(f, "pmf[{e}]"),
        }
    }
}

/// Canonical source form; parsing it yields an equal program.
impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.declarations {
            writeln!(f, "pint {} ~ {};", d.name, d.dist)?;
        }
        for b in &self.bindings {
            writeln!(f, "let {} = {};", b.name, b.expr)?;
        }
        for q in &self.queries {
            writeln!(f, "query {};", q.kind)?;
        }
        Ok(())
    }
}
