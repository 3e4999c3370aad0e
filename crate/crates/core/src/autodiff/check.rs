use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tape::{Tape, Var};
use crate::error::Result;

/// Options for [`fd_check`].
#[derive(Debug, Clone, Copy)]
pub struct FdOptions {
    pub step: f64,
    /// Check at most this many coordinates per leaf, sampled with `seed`.
    pub max_coords: Option<usize>,
    pub seed: u64,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            max_coords: None,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdReport {
    /// `max |analytic - fd| / max(|fd|, 1e-8)` over the checked coordinates.
    pub max_rel_error: f64,
    pub coords_checked: usize,
    /// Leaf index and coordinate where the maximum was attained.
    pub worst: Option<(usize, usize)>,
    pub saw_nan: bool,
}

/// Compares analytic leaf gradients against central finite differences on
/// the leaf parameters. Raw parameters are perturbed without renormalizing.
pub fn fd_check(tape: &Tape, query: Var, opts: FdOptions) -> Result<FdReport> {
    let grads = tape.grad(query)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = FdReport {
        max_rel_error: 0.0,
        coords_checked: 0,
        worst: None,
        saw_nan: false,
    };
    let query_index = query.index();
    for (l, leaf) in tape.leaves().iter().enumerate() {
        let n = leaf.logits.len();
        let coords: Vec<usize> = match opts.max_coords {
            Some(m) if m < n => sample(&mut rng, n, m).into_vec(),
            _ => (0..n).collect(),
        };
        for c in coords {
            if leaf.logits[c] == f64::NEG_INFINITY {
                continue;
            }
            let eval = |delta: f64| -> Result<f64> {
                let mut params = tape.leaves().to_vec();
                params[l].logits[c] += delta;
                let replayed = tape.replay(&params)?;
                replayed.scalar(replayed.var_at(query_index))
            };
            let fd = (eval(opts.step)? - eval(-opts.step)?) / (2.0 * opts.step);
            let analytic = grads.leaves[l].wrt_param[c];
            let err = (analytic - fd).abs() / fd.abs().max(1e-8);
            report.coords_checked += 1;
            if err.is_nan() || analytic.is_nan() || fd.is_nan() {
                report.saw_nan = true;
                report.max_rel_error = f64::NAN;
                report.worst = Some((l, c));
                continue;
            }
            if !report.max_rel_error.is_nan() && err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((l, c));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::LeafParam;
    use crate::inference::{BranchSpec, Comparator, Condition};
    use crate::ops::LinearOpChain;

    #[test]
    fn linear_query_is_nearly_exact() {
        let mut tape = Tape::new();
        let x = tape.leaf(LeafParam::raw(vec![-1.2, -0.3, -2.0, -0.7], -1)).unwrap();
        let e = tape.expectation(x).unwrap();
        let r = fd_check(&tape, e, FdOptions::default()).unwrap();
        assert_eq!(r.coords_checked, 4);
        assert!(r.max_rel_error <= 1e-7, "{r:?}");
    }

    #[test]
    fn zero_probability_branch_stays_finite() {
        let mut tape = Tape::new();
        let x = tape.leaf(LeafParam::softmax(vec![0.4, -0.1, 0.3, 0.0], 0)).unwrap();
        let spec = BranchSpec {
            condition: Condition::compare(Comparator::Gt, 10).unwrap(),
            true_chain: LinearOpChain::new().scale(3),
            false_chain: LinearOpChain::new().shift(2),
        };
        let y = tape.branch(x, spec).unwrap();
        let q = tape.prob_cmp(y, Comparator::Le, 3).unwrap();
        let r = fd_check(&tape, q, FdOptions::default()).unwrap();
        assert!(!r.saw_nan);
        assert!(r.max_rel_error <= 1e-4, "{r:?}");
    }

    #[test]
    fn exact_zero_coordinates_are_skipped() {
        let mut tape = Tape::new();
        let x = tape
            .leaf(LeafParam::raw(vec![0.0, f64::NEG_INFINITY, -0.5], 0))
            .unwrap();
        let e = tape.expectation(x).unwrap();
        let r = fd_check(&tape, e, FdOptions { max_coords: Some(2), ..Default::default() }).unwrap();
        assert!(r.coords_checked <= 2);
        assert!(r.max_rel_error <= 1e-7);
    }

    #[test]
    fn invisible_leaf_has_zero_gradient() {
        // 3X mod 3 is always 0, so only the second leaf matters.
        let mut tape = Tape::new();
        let a = tape.leaf(LeafParam::softmax(vec![0.3, -0.2, 0.9], 1)).unwrap();
        let b = tape.leaf(LeafParam::softmax(vec![0.1, 0.4], 0)).unwrap();
        let a3 = tape.mul_const(a, 3).unwrap();
        let s = tape.add_rv(a3, b).unwrap();
        let m = tape.mod_const(s, 3).unwrap();
        let p = tape.prob_cmp(m, crate::inference::Comparator::Eq, 1).unwrap();
        let g = tape.grad(p).unwrap();
        for d in &g.get(a).unwrap().wrt_param {
            assert!(d.abs() <= 1e-15);
        }
        let h = 1e-5;
        for i in 0..3 {
            let mut plus = tape.leaves().to_vec();
            let mut minus = plus.clone();
            plus[0].logits[i] += h;
            minus[0].logits[i] -= h;
            let at = |leaves: &[LeafParam]| {
                let t = tape.replay(leaves).unwrap();
                t.scalar(t.var_at(p.index())).unwrap()
            };
            let fd = (at(&plus) - at(&minus)) / (2.0 * h);
            assert!(fd.abs() <= 1e-10);
        }
    }
}
