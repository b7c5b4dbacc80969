//! Fragment classification: guarded, unary-negation, and guarded-negation
//! fragments, their fixpoint extensions, and the strict normal form used by
//! the automata constructions.

use super::ast::{Formula, LfpComponent};
use super::{GuardedSignature, SyntaxError, VarSet};
use crate::symbols::PredVar;
use serde::Serialize;
use std::collections::BTreeMap;

/// Which fragments a formula belongs to, plus its width.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FragmentReport {
    /// First-order: no fixpoints and no second-order constructs.
    pub fo: bool,
    /// Guarded fragment: guarded quantification, arbitrary plain negation.
    pub gf: bool,
    /// Unary-negation fragment: free quantification, negated subformulas
    /// have at most one free variable.
    pub unf: bool,
    /// Guarded-negation fragment: free quantification, every negation
    /// guarded by an atom or equality covering the body (or unary).
    pub gnf: bool,
    /// Guarded fragment plus guarded least fixpoints.
    pub gfp: bool,
    /// Unary-negation fragment plus monadic least fixpoints.
    pub unfp: bool,
    /// Guarded-negation fragment plus guarded least fixpoints.
    pub gnfp: bool,
    /// Union-of-conjunctive-queries shape with guarded blocks.
    pub strict_normal_form: bool,
    /// Maximum number of free variables over all subformulas.
    pub width: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Quant {
    Guarded,
    Free,
}

#[derive(Clone, Copy, PartialEq)]
enum Neg {
    /// Any body may be negated (plain negation).
    Plain,
    /// Only bodies with at most one free variable.
    Unary,
    /// The guard must cover the body (or the body is unary).
    Covered,
}

#[derive(Clone, Copy, PartialEq)]
enum Fixpoints {
    None,
    /// Arity at most one; a trivial guard is fine.
    Monadic,
    /// The guard must cover the bound tuple (arity ≤ 1 may use trivial guards).
    Guarded,
}

/// Classify a formula against every fragment at once.
///
/// Fails if the formula uses relations absent from the signature or with
/// the wrong arity, or if a predicate variable occurs with inconsistent
/// arities.
pub fn classify_fragment(
    phi: &Formula,
    sig: &GuardedSignature,
) -> Result<FragmentReport, SyntaxError> {
    check_signature_use(phi, sig, &mut BTreeMap::new())?;
    Ok(FragmentReport {
        fo: is_fo(phi),
        gf: check(phi, sig, Quant::Guarded, Neg::Plain, Fixpoints::None),
        unf: check(phi, sig, Quant::Free, Neg::Unary, Fixpoints::None),
        gnf: check(phi, sig, Quant::Free, Neg::Covered, Fixpoints::None),
        gfp: check(phi, sig, Quant::Guarded, Neg::Plain, Fixpoints::Guarded),
        unfp: check(phi, sig, Quant::Free, Neg::Unary, Fixpoints::Monadic),
        gnfp: check(phi, sig, Quant::Free, Neg::Covered, Fixpoints::Guarded),
        strict_normal_form: strict_normal_form(phi, sig),
        width: phi.width(),
    })
}

fn check_signature_use(
    phi: &Formula,
    sig: &GuardedSignature,
    pred_arity: &mut BTreeMap<PredVar, usize>,
) -> Result<(), SyntaxError> {
    match phi {
        Formula::Atom(rel, args) => match sig.sigma.arity(rel) {
            None => Err(SyntaxError::UnknownRelation(rel.clone())),
            Some(a) if a != args.len() => Err(SyntaxError::Arity {
                rel: rel.clone(),
                expected: a,
                got: args.len(),
            }),
            Some(_) => Ok(()),
        },
        Formula::SecondOrderAtom(p, args) => {
            match pred_arity.insert(*p, args.len()) {
                Some(prev) if prev != args.len() => {
                    Err(SyntaxError::PredArity(format!("pred #{}", p.0)))
                }
                _ => Ok(()),
            }
        }
        Formula::Equality(..) | Formula::True | Formula::False => Ok(()),
        Formula::And(ps) | Formula::Or(ps) => ps
            .iter()
            .try_for_each(|p| check_signature_use(p, sig, pred_arity)),
        Formula::Exists(_, body) => check_signature_use(body, sig, pred_arity),
        Formula::GuardedNeg(alpha, body) => {
            check_signature_use(alpha, sig, pred_arity)?;
            check_signature_use(body, sig, pred_arity)
        }
        Formula::Lfp(comp, args) => {
            check_component(comp, args, sig, pred_arity)
        }
        Formula::SimultaneousLfp(i, system, args) => {
            for (j, comp) in system.iter().enumerate() {
                let comp_args;
                let args_ref = if j == *i {
                    args.as_slice()
                } else {
                    comp_args = comp.vars.clone();
                    comp_args.as_slice()
                };
                check_component(comp, args_ref, sig, pred_arity)?;
            }
            Ok(())
        }
        Formula::GsoForall(p, arity, body) | Formula::GsoExists(p, arity, body) => {
            let shadow = pred_arity.insert(*p, *arity);
            check_signature_use(body, sig, pred_arity)?;
            match shadow {
                Some(a) => {
                    pred_arity.insert(*p, a);
                }
                None => {
                    pred_arity.remove(p);
                }
            }
            Ok(())
        }
    }
}

fn check_component(
    comp: &LfpComponent,
    args: &[crate::symbols::Var],
    sig: &GuardedSignature,
    pred_arity: &mut BTreeMap<PredVar, usize>,
) -> Result<(), SyntaxError> {
    if args.len() != comp.vars.len() {
        return Err(SyntaxError::FixpointArity(format!("pred #{}", comp.pred.0)));
    }
    let shadow = pred_arity.insert(comp.pred, comp.vars.len());
    check_signature_use(&comp.guard, sig, pred_arity)?;
    check_signature_use(&comp.body, sig, pred_arity)?;
    match shadow {
        Some(a) => {
            pred_arity.insert(comp.pred, a);
        }
        None => {
            pred_arity.remove(&comp.pred);
        }
    }
    Ok(())
}

fn is_fo(phi: &Formula) -> bool {
    match phi {
        Formula::Atom(..) | Formula::Equality(..) | Formula::True | Formula::False => true,
        Formula::SecondOrderAtom(..)
        | Formula::Lfp(..)
        | Formula::SimultaneousLfp(..)
        | Formula::GsoForall(..)
        | Formula::GsoExists(..) => false,
        Formula::And(ps) | Formula::Or(ps) => ps.iter().all(is_fo),
        Formula::Exists(_, body) => is_fo(body),
        Formula::GuardedNeg(alpha, body) => is_fo(alpha) && is_fo(body),
    }
}

/// Can `alpha` guard the variable set `vars`? Guard atoms must come from
/// the guard sub-signature; an equality guards its two variables; `true`
/// guards at most one variable (such tuples are trivially guarded).
fn guards_set(alpha: &Formula, vars: &VarSet, sig: &GuardedSignature) -> bool {
    match alpha {
        Formula::Atom(rel, args) => {
            sig.is_guard_relation(rel) && vars.iter().all(|v| args.contains(v))
        }
        Formula::Equality(x, y) => vars.iter().all(|v| v == x || v == y),
        Formula::True => vars.len() <= 1,
        _ => false,
    }
}

fn check(
    phi: &Formula,
    sig: &GuardedSignature,
    quant: Quant,
    neg: Neg,
    fp: Fixpoints,
) -> bool {
    match phi {
        Formula::Atom(..) | Formula::Equality(..) | Formula::True | Formula::False => true,
        Formula::SecondOrderAtom(..) => fp != Fixpoints::None,
        Formula::And(ps) | Formula::Or(ps) => ps.iter().all(|p| check(p, sig, quant, neg, fp)),
        Formula::Exists(_, _) => {
            // Collapse a chain of existentials and inspect the matrix.
            let mut cur = phi;
            while let Formula::Exists(_, body) = cur {
                cur = body;
            }
            let matrix = cur;
            let matrix_ok = check(matrix, sig, quant, neg, fp);
            match quant {
                Quant::Free => matrix_ok,
                Quant::Guarded => {
                    let fv = matrix.free_vars();
                    matrix_ok && (fv.len() <= 1 || has_guard_conjunct(matrix, &fv, sig))
                }
            }
        }
        Formula::GuardedNeg(alpha, body) => {
            let body_ok = check(body, sig, quant, neg, fp);
            let guard_ok = match neg {
                Neg::Plain => true,
                Neg::Unary => body.free_vars().len() <= 1,
                Neg::Covered => {
                    let fv = body.free_vars();
                    fv.len() <= 1 || guards_set(alpha, &fv, sig)
                }
            };
            body_ok && guard_ok
        }
        Formula::Lfp(comp, _) => check_fixpoint(std::slice::from_ref(comp), sig, quant, neg, fp),
        Formula::SimultaneousLfp(_, system, _) => check_fixpoint(system, sig, quant, neg, fp),
        Formula::GsoForall(..) | Formula::GsoExists(..) => false,
    }
}

fn check_fixpoint(
    system: &[LfpComponent],
    sig: &GuardedSignature,
    quant: Quant,
    neg: Neg,
    fp: Fixpoints,
) -> bool {
    system.iter().all(|comp| {
        let vars: VarSet = comp.vars.iter().copied().collect();
        let scoped = comp
            .guard
            .free_vars()
            .union(&comp.body.free_vars())
            .all(|v| vars.contains(v));
        let guard_ok = match fp {
            Fixpoints::None => return false,
            Fixpoints::Monadic => comp.vars.len() <= 1,
            Fixpoints::Guarded => vars.len() <= 1 || guards_set(&comp.guard, &vars, sig),
        };
        scoped && guard_ok && check(&comp.body, sig, quant, neg, fp)
    })
}

/// Does some conjunct of the matrix guard the whole variable set? An
/// atomic matrix may guard itself.
fn has_guard_conjunct(matrix: &Formula, vars: &VarSet, sig: &GuardedSignature) -> bool {
    match matrix {
        Formula::And(parts) => parts.iter().any(|p| guards_set(p, vars, sig)),
        _ => guards_set(matrix, vars, sig),
    }
}

/// Strict normal form: a union of conjunctive queries whose non-atomic
/// conjuncts are guarded blocks.
///
/// Shape: `⋁ᵢ ∃x̄ᵢ. ⋀ⱼ ψᵢⱼ` where each `ψ` is an atom, an equality, a
/// predicate-variable atom, a guarded block `α ∧ φ` (the guard may be a
/// sibling conjunct covering the free variables of `φ`), a guarded
/// negation, or a guarded fixpoint whose body is again in normal form.
/// Degenerate cases (missing prefix, single disjunct or conjunct) count.
pub fn strict_normal_form(phi: &Formula, sig: &GuardedSignature) -> bool {
    nf_disjunction(phi, sig)
}

fn nf_disjunction(phi: &Formula, sig: &GuardedSignature) -> bool {
    match phi {
        Formula::Or(parts) => parts.iter().all(|p| nf_disjunct(p, sig)),
        _ => nf_disjunct(phi, sig),
    }
}

fn nf_disjunct(phi: &Formula, sig: &GuardedSignature) -> bool {
    let mut cur = phi;
    while let Formula::Exists(_, body) = cur {
        cur = body;
    }
    let conjuncts: Vec<&Formula> = match cur {
        Formula::And(parts) => parts.iter().collect(),
        other => vec![other],
    };
    conjuncts.iter().all(|c| nf_conjunct(c, &conjuncts, sig))
}

fn nf_conjunct(c: &Formula, siblings: &[&Formula], sig: &GuardedSignature) -> bool {
    match c {
        Formula::Atom(..)
        | Formula::SecondOrderAtom(..)
        | Formula::Equality(..)
        | Formula::True
        | Formula::False => true,
        Formula::GuardedNeg(alpha, body) => {
            let fv = body.free_vars();
            (fv.len() <= 1 || guards_set(alpha, &fv, sig)) && nf_disjunction(body, sig)
        }
        Formula::Lfp(comp, _) => nf_fixpoint(std::slice::from_ref(comp), sig),
        Formula::SimultaneousLfp(_, system, _) => nf_fixpoint(system, sig),
        // A nested union / existential block / conjunction must be guarded
        // by a sibling conjunct (or use at most one variable).
        Formula::Or(_) | Formula::Exists(..) | Formula::And(_) => {
            let fv = c.free_vars();
            let guarded = fv.len() <= 1
                || siblings
                    .iter()
                    .any(|s| !std::ptr::eq(*s, c) && guards_set(s, &fv, sig));
            guarded && nf_disjunction(c, sig)
        }
        Formula::GsoForall(..) | Formula::GsoExists(..) => false,
    }
}

fn nf_fixpoint(system: &[LfpComponent], sig: &GuardedSignature) -> bool {
    system.iter().all(|comp| {
        let vars: VarSet = comp.vars.iter().copied().collect();
        (vars.len() <= 1 || guards_set(&comp.guard, &vars, sig)) && nf_disjunction(&comp.body, sig)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::Symbols;
    use crate::syntax::{parse, Signature};

    fn sig() -> GuardedSignature {
        GuardedSignature::full(Signature::new([
            ("R", 2),
            ("G", 2),
            ("T", 3),
            ("P", 1),
            ("Q", 1),
        ]))
    }

    fn report(text: &str) -> FragmentReport {
        let mut s = Symbols::new();
        let f = parse(text, &mut s).unwrap();
        classify_fragment(&f, &sig()).unwrap()
    }

    #[test]
    fn guarded_block_is_gf_and_gnf() {
        let r = report("exists y. G(x,y) & P(y)");
        assert!(r.fo && r.gf && r.gnf && r.gfp && r.gnfp);
        assert_eq!(r.width, 2);
        assert!(r.strict_normal_form);
    }

    #[test]
    fn triangle_query_is_gnf_but_not_gf() {
        let r = report("exists x,y,z. R(x,y) & R(y,z) & R(z,x)");
        assert!(r.gnf && !r.gf);
        assert!(r.unf);
        assert_eq!(r.width, 3);
        assert!(r.strict_normal_form);
    }

    #[test]
    fn wide_plain_negation_is_gf_but_not_gnf() {
        let r = report("gneg[true](R(x,y))");
        assert!(r.gf && !r.gnf && !r.unf);
    }

    #[test]
    fn unary_negation_is_in_all_negation_fragments() {
        let r = report("gneg[true](P(x))");
        assert!(r.gf && r.gnf && r.unf);
    }

    #[test]
    fn guarded_negation_with_covering_guard() {
        // The negated block is answer-guarded by R(x,y), so this is GNF;
        // it is not GF because the inner matrix {x,y,z} has no covering
        // guard atom for the quantifier.
        let r = report("gneg[R(x,y)](exists z. R(x,z) & G(z,y))");
        assert!(r.gnf && !r.gf);
        assert!(!r.unf);
        // With a guard atom covering the full matrix it is GF as well.
        let g = report("gneg[R(x,y)](exists z. T(x,y,z) & G(z,y))");
        assert!(g.gnf && g.gf);
    }

    #[test]
    fn unguarded_wide_quantification_fails_gf() {
        let r = report("exists x,y. P(x) & Q(y)");
        assert!(!r.gf && r.gnf && r.unf);
    }

    #[test]
    fn guarded_fixpoint_classification() {
        // Wide fixpoint whose quantified step is covered by a ternary atom.
        let r = report("lfp[X(x,y); G(x,y); R(x,y) | exists z. T(x,y,z) & X(z,y)](a,b)");
        assert!(r.gfp && r.gnfp && !r.gf && !r.fo && !r.unfp);
        // A transitive-closure-style step has no covering guard atom, so
        // it fails GFP; GNF quantification is free, so it stays GNFP.
        let tc = report("lfp[X(x,y); G(x,y); R(x,y) | exists z. G(x,z) & X(z,y)](a,b)");
        assert!(!tc.gfp && tc.gnfp);
        let m = report("lfp[X(x); true; P(x) | exists y. R(y,x) & X(y)](a)");
        assert!(m.unfp && m.gfp && m.gnfp);
    }

    #[test]
    fn unknown_relation_is_an_error() {
        let mut s = Symbols::new();
        let f = parse("Z(x)", &mut s).unwrap();
        assert!(classify_fragment(&f, &sig()).is_err());
        let g = parse("R(x)", &mut s).unwrap();
        assert!(classify_fragment(&g, &sig()).is_err());
    }

    #[test]
    fn strict_normal_form_requires_guarded_blocks() {
        let mut s = Symbols::new();
        // A bare nested disjunction over two variables is not a guarded block.
        let f = parse("R(x,y) & exists z. (P(z) | Q(z)) & R(x,z)", &mut s).unwrap();
        // The inner block exists z ... has conjuncts guarded as follows:
        // (P(z)|Q(z)) free {z} size 1: fine; R(x,z) atom: fine. Whole formula
        // is a CQ-with-blocks, so it passes.
        assert!(strict_normal_form(&f, &sig()));
        // An unguarded binary disjunction block fails.
        let g = parse("P(x) & (R(x,y) | G(x,y))", &mut s).unwrap();
        assert!(!strict_normal_form(&g, &sig()));
        // With a covering guard sibling it passes.
        let h = parse("G(y,x) & (R(x,y) | G(x,y))", &mut s).unwrap();
        assert!(strict_normal_form(&h, &sig()));
    }
}
