//! Translation of guarded fixpoints into guarded second-order logic:
//! a least-fixpoint membership test becomes a universal second-order
//! statement over (guarded) relations closed under the fixpoint equation.
//!
//! `[lfp X(x̄) := α ∧ φ](ā)` becomes
//! `forall2 X. (exists x̄. α ∧ φ' ∧ gneg[α](X(x̄))) | X(ā)`:
//! either some closure step is missing from X, or ā is already in X. The
//! second-order quantifier ranges over guarded relations only, which is
//! sound here because every fixpoint stage is guarded (its tuples satisfy
//! the guard atom; trivial guards confine the tuple to at most one
//! distinct element).

use super::ast::Formula;
use super::fixpoints::eliminate_simultaneous_fixpoints;
use crate::symbols::Symbols;

/// Rewrite all fixpoints to second-order quantification. Simultaneous
/// systems are first flattened to single fixpoints.
pub fn gnfp_to_gso(phi: &Formula, syms: &mut Symbols) -> Formula {
    let single = eliminate_simultaneous_fixpoints(phi, syms);
    walk(&single)
}

fn walk(phi: &Formula) -> Formula {
    match phi {
        Formula::Atom(..)
        | Formula::SecondOrderAtom(..)
        | Formula::Equality(..)
        | Formula::True
        | Formula::False => phi.clone(),
        Formula::And(ps) => Formula::And(ps.iter().map(walk).collect()),
        Formula::Or(ps) => Formula::Or(ps.iter().map(walk).collect()),
        Formula::Exists(vs, body) => Formula::Exists(vs.clone(), Box::new(walk(body))),
        Formula::GuardedNeg(alpha, body) => {
            Formula::GuardedNeg(Box::new(walk(alpha)), Box::new(walk(body)))
        }
        Formula::Lfp(comp, args) => {
            let body = walk(&comp.body);
            let closure_gap = Formula::Exists(
                comp.vars.clone(),
                Box::new(Formula::and(vec![
                    (*comp.guard).clone(),
                    body,
                    Formula::GuardedNeg(
                        comp.guard.clone(),
                        Box::new(Formula::SecondOrderAtom(comp.pred, comp.vars.clone())),
                    ),
                ])),
            );
            Formula::GsoForall(
                comp.pred,
                comp.vars.len(),
                Box::new(Formula::Or(vec![
                    closure_gap,
                    Formula::SecondOrderAtom(comp.pred, args.clone()),
                ])),
            )
        }
        Formula::SimultaneousLfp(..) => {
            unreachable!("simultaneous fixpoints are eliminated before translation")
        }
        Formula::GsoForall(p, a, body) => Formula::GsoForall(*p, *a, Box::new(walk(body))),
        Formula::GsoExists(p, a, body) => Formula::GsoExists(*p, *a, Box::new(walk(body))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    #[test]
    fn fixpoint_becomes_second_order_universal() {
        let mut s = Symbols::new();
        let f = parse(
            "lfp[X(x,y); G(x,y); R(x,y) | exists z. (G(x,z) & X(z,y))](a,b)",
            &mut s,
        )
        .unwrap();
        let g = gnfp_to_gso(&f, &mut s);
        match &g {
            Formula::GsoForall(_, 2, body) => {
                assert!(matches!(**body, Formula::Or(_)));
            }
            other => panic!("expected forall2, got {other:?}"),
        }
        // No fixpoints remain anywhere.
        fn fixpoint_free(f: &Formula) -> bool {
            match f {
                Formula::Lfp(..) | Formula::SimultaneousLfp(..) => false,
                Formula::And(ps) | Formula::Or(ps) => ps.iter().all(fixpoint_free),
                Formula::Exists(_, b) => fixpoint_free(b),
                Formula::GuardedNeg(a, b) => fixpoint_free(a) && fixpoint_free(b),
                Formula::GsoForall(_, _, b) | Formula::GsoExists(_, _, b) => fixpoint_free(b),
                _ => true,
            }
        }
        assert!(fixpoint_free(&g));
    }
}
