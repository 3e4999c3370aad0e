use std::collections::{BTreeSet, HashMap};
use std::fmt;

use super::ast::{Expr, ExprKind, Program, Span};

/// A place where an expression would combine dependent quantities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub span: Span,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

type Leaves = BTreeSet<String>;

/// Lists every sum whose operands share a declared variable, and every branch
/// body that refers to something other than the conditioned variable.
pub fn check_independence(program: &Program) -> Vec<Violation> {
    let mut leaves: HashMap<&str, Leaves> = HashMap::new();
    for d in &program.declarations {
        leaves.insert(&d.name, Leaves::from([d.name.clone()]));
    }
    let mut out = Vec::new();
    for b in &program.bindings {
        let l = expr_leaves(&b.expr, &leaves, &mut out);
        leaves.insert(&b.name, l);
    }
    for q in &program.queries {
        expr_leaves(q.expr(), &leaves, &mut out);
    }
    out
}

fn expr_leaves(e: &Expr, env: &HashMap<&str, Leaves>, out: &mut Vec<Violation>) -> Leaves {
    match &e.kind {
        ExprKind::Var(name) => env.get(name.as_str()).cloned().unwrap_or_default(),
        ExprKind::Int(_) => Leaves::new(),
        ExprKind::Add(a, b) => {
            let la = expr_leaves(a, env, out);
            let lb = expr_leaves(b, env, out);
            let shared: Vec<&str> = la.intersection(&lb).map(String::as_str).collect();
            if !shared.is_empty() {
                out.push(Violation {
                    span: e.span,
                    message: format!(
                        "both operands of `{e}` depend on {}",
                        shared.iter().map(|s| format!("`{s}`")).collect::<Vec<_>>().join(", ")
                    ),
                });
            }
            la.union(&lb).cloned().collect()
        }
        ExprKind::AddConst(a, _)
        | ExprKind::Neg(a)
        | ExprKind::MulConst(a, _)
        | ExprKind::IDiv(a, _)
        | ExprKind::Mod(a, _) => expr_leaves(a, env, out),
        ExprKind::IfThenElse {
            var,
            then_branch,
            else_branch,
            ..
        } => {
            for body in [then_branch, else_branch] {
                body.visit_vars(&mut |name, span| {
                    if name != var {
                        out.push(Violation {
                            span,
                            message: format!(
                                "branch on `{var}` may only use `{var}`, found `{name}`"
                            ),
                        });
                    }
                });
                // Sums inside a body are checked like any other.
                expr_leaves(body, env, out);
            }
            env.get(var.as_str()).cloned().unwrap_or_default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;

    fn violations(src: &str) -> Vec<Violation> {
        check_independence(&parse(src).unwrap())
    }

    #[test]
    fn self_sum_is_flagged() {
        let v = violations("pint X ~ uniform(0,9); let Y = X + X;");
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].span.line, v[0].span.col), (1, 32));
    }

    #[test]
    fn independent_sum_is_fine() {
        assert!(violations("pint X1 ~ uniform(0,9); pint X2 ~ uniform(0,9); let Y = X1 + X2;").is_empty());
    }

    #[test]
    fn conditioning_pattern_is_fine() {
        assert!(violations("pint X ~ uniform(0,9); let V = if (X<5) then 2*X else 2*X-9;").is_empty());
        assert!(violations(
            "pint X ~ uniform(0,9); let V = if (X<5) then (if (X < 2) then 0 else X) else -X;"
        )
        .is_empty());
    }

    #[test]
    fn dependence_is_traced_through_bindings() {
        let src = "pint X ~ uniform(0,9); pint Z ~ point(1);\n\
                   let A = X * 2 + Z; let B = A mod 3;\nquery E[B + X];";
        let v = violations(src);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].span.line, 3);
        assert!(v[0].message.contains("`X`"));
        let v = violations("pint X ~ uniform(0,9); let V = if (X<5) then X else 0; query E[V + X];");
        assert_eq!(v.len(), 1);
    }

    #[test]
    fn foreign_variable_in_branch_is_flagged() {
        let v = violations("pint X ~ uniform(0,9); pint Y ~ point(0); let V = if (X<5) then X + Y else X;");
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("`Y`"));
    }
}
