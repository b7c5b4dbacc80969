//! Elimination of simultaneous least fixpoints in favour of nested single
//! fixpoints, one component at a time: the discarded component is solved as
//! a single fixpoint (with the remaining predicate variables still free)
//! and substituted into the other equations. Positivity is preserved, so
//! the result stays in the same fragment.

use super::ast::{Formula, LfpComponent};
use super::normalize::simplify;
use crate::symbols::Symbols;

/// Replace every `SimultaneousLfp` node by nested single fixpoints.
pub fn eliminate_simultaneous_fixpoints(phi: &Formula, syms: &mut Symbols) -> Formula {
    let out = walk(phi, syms);
    simplify(&out, syms)
}

fn walk(phi: &Formula, syms: &mut Symbols) -> Formula {
    match phi {
        Formula::Atom(..)
        | Formula::SecondOrderAtom(..)
        | Formula::Equality(..)
        | Formula::True
        | Formula::False => phi.clone(),
        Formula::And(ps) => Formula::And(ps.iter().map(|p| walk(p, syms)).collect()),
        Formula::Or(ps) => Formula::Or(ps.iter().map(|p| walk(p, syms)).collect()),
        Formula::Exists(vs, body) => Formula::Exists(vs.clone(), Box::new(walk(body, syms))),
        Formula::GuardedNeg(alpha, body) => {
            Formula::GuardedNeg(Box::new(walk(alpha, syms)), Box::new(walk(body, syms)))
        }
        Formula::Lfp(comp, args) => Formula::Lfp(walk_component(comp, syms), args.clone()),
        Formula::SimultaneousLfp(i, system, args) => {
            let system: Vec<LfpComponent> = system
                .iter()
                .map(|c| walk_component(c, syms))
                .collect();
            flatten_system(system, *i, args.clone())
        }
        Formula::GsoForall(p, a, body) => {
            Formula::GsoForall(*p, *a, Box::new(walk(body, syms)))
        }
        Formula::GsoExists(p, a, body) => {
            Formula::GsoExists(*p, *a, Box::new(walk(body, syms)))
        }
    }
}

fn walk_component(comp: &LfpComponent, syms: &mut Symbols) -> LfpComponent {
    LfpComponent {
        pred: comp.pred,
        vars: comp.vars.clone(),
        guard: Box::new(walk(&comp.guard, syms)),
        body: Box::new(walk(&comp.body, syms)),
    }
}

/// Solve component `i` of a simultaneous system by repeatedly eliminating
/// some other component.
fn flatten_system(
    mut system: Vec<LfpComponent>,
    mut index: usize,
    args: Vec<crate::symbols::Var>,
) -> Formula {
    while system.len() > 1 {
        // Eliminate the last component, or the first if the last is the one
        // being solved for.
        let victim_pos = if index == system.len() - 1 {
            0
        } else {
            system.len() - 1
        };
        let victim = system.remove(victim_pos);
        if victim_pos < index {
            index -= 1;
        }
        for comp in system.iter_mut() {
            let v = victim.clone();
            let substituted = comp.body.replace_pred(v.pred, &|call_args| {
                Formula::Lfp(v.clone(), call_args.to_vec())
            });
            *comp.body = substituted;
        }
    }
    Formula::Lfp(system.pop().unwrap(), args)
}
