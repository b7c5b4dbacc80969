//! Conversion to strict normal form (a union of conjunctive queries whose
//! non-atomic conjuncts are guarded blocks), plus a sound bottom-up
//! simplifier shared by the other transformation passes.

use super::ast::{Formula, LfpComponent};
use super::{GuardedSignature, SyntaxError};
use crate::symbols::{Symbols, Var};
use std::collections::{BTreeMap, BTreeSet};

/// How aggressively normalization may trade width for flatness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormalizeMode {
    /// Fully merge conjunctions of quantified blocks into single
    /// conjunctive queries. Width may grow up to the size of the input.
    General,
    /// Keep quantified blocks nested as guarded conjuncts, preserving
    /// width.
    WidthPreserving,
}

/// One disjunct `∃ bound. ⋀ conjuncts` of a union of conjunctive queries.
struct Cq {
    bound: Vec<Var>,
    conjuncts: Vec<Formula>,
}

impl Cq {
    fn into_formula(self) -> Formula {
        Formula::exists(self.bound, Formula::and(self.conjuncts))
    }
}

/// Normalize a formula to strict normal form.
///
/// Guards of negations and fixpoints are pushed into the normalized body,
/// so every disjunct under a guard is answer-guarded. Second-order
/// quantifiers have no such normal form and are rejected.
pub fn normalize(
    theta: &Formula,
    _sig: &GuardedSignature,
    mode: NormalizeMode,
    syms: &mut Symbols,
) -> Result<Formula, SyntaxError> {
    let disjuncts = nf(theta, mode, syms)?;
    let candidate = Formula::or(disjuncts.into_iter().map(Cq::into_formula).collect());
    Ok(simplify(&candidate, syms))
}

fn nf(phi: &Formula, mode: NormalizeMode, syms: &mut Symbols) -> Result<Vec<Cq>, SyntaxError> {
    match phi {
        Formula::Atom(..) | Formula::SecondOrderAtom(..) | Formula::Equality(..) => Ok(vec![Cq {
            bound: vec![],
            conjuncts: vec![phi.clone()],
        }]),
        Formula::True => Ok(vec![Cq {
            bound: vec![],
            conjuncts: vec![],
        }]),
        Formula::False => Ok(vec![]),
        Formula::Or(parts) => {
            let mut out = Vec::new();
            for p in parts {
                out.extend(nf(p, mode, syms)?);
            }
            Ok(out)
        }
        Formula::Exists(vars, body) => {
            let ds = nf(body, mode, syms)?;
            Ok(ds
                .into_iter()
                .map(|d| {
                    let free = Formula::exists(d.bound.clone(), Formula::and(d.conjuncts.clone()))
                        .free_vars();
                    let mut bound: Vec<Var> =
                        vars.iter().copied().filter(|v| free.contains(v)).collect();
                    bound.extend(d.bound);
                    Cq {
                        bound,
                        conjuncts: d.conjuncts,
                    }
                })
                .collect())
        }
        Formula::And(parts) => {
            let mut product: Vec<Cq> = vec![Cq {
                bound: vec![],
                conjuncts: vec![],
            }];
            for p in parts {
                let ds = nf(p, mode, syms)?;
                let mut next = Vec::new();
                for base in &product {
                    for d in &ds {
                        next.push(merge(base, d, mode, syms));
                    }
                }
                product = next;
            }
            Ok(product)
        }
        Formula::GuardedNeg(alpha, body) => {
            let pushed = push_guard(alpha, body);
            let inner = Formula::or(
                nf(&pushed, mode, syms)?
                    .into_iter()
                    .map(Cq::into_formula)
                    .collect(),
            );
            Ok(vec![Cq {
                bound: vec![],
                conjuncts: vec![Formula::GuardedNeg(alpha.clone(), Box::new(inner))],
            }])
        }
        Formula::Lfp(comp, args) => Ok(vec![Cq {
            bound: vec![],
            conjuncts: vec![Formula::Lfp(nf_component(comp, mode, syms)?, args.clone())],
        }]),
        Formula::SimultaneousLfp(i, system, args) => {
            let system = system
                .iter()
                .map(|c| nf_component(c, mode, syms))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(vec![Cq {
                bound: vec![],
                conjuncts: vec![Formula::SimultaneousLfp(*i, system, args.clone())],
            }])
        }
        Formula::GsoForall(..) | Formula::GsoExists(..) => Err(SyntaxError::Unsupported(
            "second-order quantifiers have no union-of-conjunctive-queries normal form".into(),
        )),
    }
}

fn nf_component(
    comp: &LfpComponent,
    mode: NormalizeMode,
    syms: &mut Symbols,
) -> Result<LfpComponent, SyntaxError> {
    let pushed = push_guard(&comp.guard, &comp.body);
    let body = Formula::or(
        nf(&pushed, mode, syms)?
            .into_iter()
            .map(Cq::into_formula)
            .collect(),
    );
    Ok(LfpComponent {
        pred: comp.pred,
        vars: comp.vars.clone(),
        guard: comp.guard.clone(),
        body: Box::new(body),
    })
}

/// Conjoin a non-trivial guard into a body so that each disjunct of the
/// normalized body carries the guard as a conjunct.
fn push_guard(alpha: &Formula, body: &Formula) -> Formula {
    if matches!(alpha, Formula::True) {
        body.clone()
    } else {
        Formula::and(vec![alpha.clone(), body.clone()])
    }
}

fn merge(base: &Cq, d: &Cq, mode: NormalizeMode, syms: &mut Symbols) -> Cq {
    match mode {
        NormalizeMode::General => {
            // Inline after freshening d's bound variables against everything
            // already used in the accumulated query.
            let mut used: BTreeSet<Var> = base.bound.iter().copied().collect();
            for c in &base.conjuncts {
                used.extend(c.free_vars());
            }
            let mut rename = BTreeMap::new();
            let mut new_bound = base.bound.clone();
            for v in &d.bound {
                if used.contains(v) {
                    let fresh = syms.fresh_var();
                    rename.insert(*v, fresh);
                    new_bound.push(fresh);
                } else {
                    new_bound.push(*v);
                }
            }
            let mut conjuncts = base.conjuncts.clone();
            for c in &d.conjuncts {
                conjuncts.push(if rename.is_empty() {
                    c.clone()
                } else {
                    c.substitute(&rename, syms)
                });
            }
            Cq {
                bound: new_bound,
                conjuncts,
            }
        }
        NormalizeMode::WidthPreserving => {
            // Quantified disjuncts stay nested as guarded blocks; only
            // prefix-free disjuncts are flattened in.
            let mut conjuncts = base.conjuncts.clone();
            if d.bound.is_empty() {
                conjuncts.extend(d.conjuncts.iter().cloned());
            } else {
                conjuncts.push(Cq {
                    bound: d.bound.clone(),
                    conjuncts: d.conjuncts.clone(),
                }
                .into_formula());
            }
            Cq {
                bound: base.bound.clone(),
                conjuncts,
            }
        }
    }
}

/// Bottom-up sound simplification: constant folding, flattening,
/// deduplication, trivial equalities, unfolding of non-recursive
/// fixpoints, and double-negation elimination.
pub fn simplify(f: &Formula, syms: &mut Symbols) -> Formula {
    match f {
        Formula::Atom(..) | Formula::SecondOrderAtom(..) | Formula::True | Formula::False => {
            f.clone()
        }
        Formula::Equality(x, y) => {
            if x == y {
                Formula::True
            } else {
                f.clone()
            }
        }
        Formula::And(parts) => {
            let mut seen = Vec::new();
            for p in parts {
                let p = simplify(p, syms);
                match p {
                    Formula::True => {}
                    Formula::False => return Formula::False,
                    Formula::And(inner) => {
                        for q in inner {
                            if !seen.contains(&q) {
                                seen.push(q);
                            }
                        }
                    }
                    q => {
                        if !seen.contains(&q) {
                            seen.push(q);
                        }
                    }
                }
            }
            Formula::and(seen)
        }
        Formula::Or(parts) => {
            let mut seen = Vec::new();
            for p in parts {
                let p = simplify(p, syms);
                match p {
                    Formula::False => {}
                    Formula::True => return Formula::True,
                    Formula::Or(inner) => {
                        for q in inner {
                            if !seen.contains(&q) {
                                seen.push(q);
                            }
                        }
                    }
                    q => {
                        if !seen.contains(&q) {
                            seen.push(q);
                        }
                    }
                }
            }
            Formula::or(seen)
        }
        Formula::Exists(vars, body) => {
            let body = simplify(body, syms);
            Formula::exists(vars.clone(), body)
        }
        Formula::GuardedNeg(alpha, body) => {
            let alpha_s = simplify(alpha, syms);
            let body_s = simplify(body, syms);
            match (&alpha_s, &body_s) {
                (_, Formula::False) => alpha_s,
                (_, Formula::True) => Formula::False,
                (Formula::False, _) => Formula::False,
                // ¬¬b with both negations plain.
                (Formula::True, Formula::GuardedNeg(inner_guard, inner_body))
                    if matches!(**inner_guard, Formula::True) =>
                {
                    (**inner_body).clone()
                }
                _ if alpha_s == body_s => Formula::False,
                _ => Formula::GuardedNeg(Box::new(alpha_s), Box::new(body_s)),
            }
        }
        Formula::Lfp(comp, args) => {
            let guard = simplify(&comp.guard, syms);
            let body = simplify(&comp.body, syms);
            if !body.free_pred_vars().contains(&comp.pred) {
                // Non-recursive: unfold to guard ∧ body at the arguments.
                let map: BTreeMap<Var, Var> = comp
                    .vars
                    .iter()
                    .copied()
                    .zip(args.iter().copied())
                    .collect();
                let unfolded = Formula::and(vec![guard, body]).substitute(&map, syms);
                simplify(&unfolded, syms)
            } else if matches!(body, Formula::False) {
                Formula::False
            } else {
                Formula::Lfp(
                    LfpComponent {
                        pred: comp.pred,
                        vars: comp.vars.clone(),
                        guard: Box::new(guard),
                        body: Box::new(body),
                    },
                    args.clone(),
                )
            }
        }
        Formula::SimultaneousLfp(i, system, args) => {
            let system: Vec<LfpComponent> = system
                .iter()
                .map(|c| LfpComponent {
                    pred: c.pred,
                    vars: c.vars.clone(),
                    guard: Box::new(simplify(&c.guard, syms)),
                    body: Box::new(simplify(&c.body, syms)),
                })
                .collect();
            // Drop to a single fixpoint when the other components are never
            // referenced from the applied one.
            let applied = &system[*i];
            let others: Vec<_> = system
                .iter()
                .filter(|c| c.pred != applied.pred)
                .collect();
            let reachable = others.iter().any(|c| {
                applied.body.free_pred_vars().contains(&c.pred)
            });
            if !reachable {
                simplify(&Formula::Lfp(applied.clone(), args.clone()), syms)
            } else {
                Formula::SimultaneousLfp(*i, system, args.clone())
            }
        }
        Formula::GsoForall(p, a, body) => {
            Formula::GsoForall(*p, *a, Box::new(simplify(body, syms)))
        }
        Formula::GsoExists(p, a, body) => {
            Formula::GsoExists(*p, *a, Box::new(simplify(body, syms)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{classify_fragment, parse, strict_normal_form, Signature};

    fn sig() -> GuardedSignature {
        GuardedSignature::full(Signature::new([("R", 2), ("G", 2), ("P", 1), ("Q", 1)]))
    }

    fn norm(text: &str, mode: NormalizeMode) -> (Formula, Formula, Symbols) {
        let mut s = Symbols::new();
        let f = parse(text, &mut s).unwrap();
        let n = normalize(&f, &sig(), mode, &mut s).unwrap();
        (f, n, s)
    }

    #[test]
    fn conjunction_of_blocks_merges_in_general_mode() {
        let (f, n, _s) = norm(
            "(exists y. R(x,y)) & (exists y. G(x,y))",
            NormalizeMode::General,
        );
        assert!(strict_normal_form(&n, &sig()));
        // One disjunct, two bound variables, two atoms.
        if let Formula::Exists(vars, body) = &n {
            assert_eq!(vars.len(), 2);
            assert!(matches!(**body, Formula::And(_)));
        } else {
            panic!("expected a merged query, got {n:?}");
        }
        assert!(n.width() <= f.size());
    }

    #[test]
    fn width_preserving_mode_keeps_blocks_nested() {
        let (f, n, _s) = norm(
            "(exists y. R(x,y)) & (exists y. G(x,y))",
            NormalizeMode::WidthPreserving,
        );
        assert!(strict_normal_form(&n, &sig()));
        assert_eq!(n.width(), f.width());
        assert!(matches!(n, Formula::And(_)));
    }

    #[test]
    fn disjunction_distributes_over_conjunction() {
        let (_, n, _s) = norm("(P(x) | Q(x)) & P(x)", NormalizeMode::General);
        if let Formula::Or(ds) = &n {
            assert_eq!(ds.len(), 2);
        } else {
            panic!("expected a union, got {n:?}");
        }
        assert!(strict_normal_form(&n, &sig()));
    }

    #[test]
    fn guard_is_pushed_into_negated_bodies() {
        let (_, n, s) = norm(
            "gneg[R(x,y)](exists z. G(x,z) | P(y))",
            NormalizeMode::General,
        );
        assert!(strict_normal_form(&n, &sig()));
        if let Formula::GuardedNeg(_, body) = &n {
            let printed = crate::syntax::render(body, &s);
            // Every disjunct of the pushed body mentions the guard.
            assert!(printed.matches("R(x,y)").count() >= 2, "{printed}");
        } else {
            panic!("expected guarded negation at top, got {n:?}");
        }
    }

    #[test]
    fn normalized_fixpoint_stays_classified() {
        // The step quantifier is unguarded (transitive-closure shape), so
        // the formula lives in GNFP but not GFP — before and after.
        let (f, n, _s) = norm(
            "lfp[X(x,y); G(x,y); R(x,y) | exists z. (G(x,z) & X(z,y))](a,b)",
            NormalizeMode::General,
        );
        assert!(strict_normal_form(&n, &sig()));
        let before = classify_fragment(&f, &sig()).unwrap();
        let rep = classify_fragment(&n, &sig()).unwrap();
        assert!(before.gnfp && !before.gfp);
        assert!(rep.gnfp && !rep.gfp);
    }

    #[test]
    fn simplifier_folds_constants_and_unfolds_dead_fixpoints() {
        let mut s = Symbols::new();
        let f = parse("lfp[X(x); P(x); Q(x)](z) & (true | R(x,y)) & x = x", &mut s).unwrap();
        let g = simplify(&f, &mut s);
        let printed = crate::syntax::render(&g, &s);
        assert_eq!(printed, "(P(z) & Q(z))");
    }

    #[test]
    fn double_plain_negation_cancels() {
        let mut s = Symbols::new();
        let f = parse("gneg[true](gneg[true](P(x)))", &mut s).unwrap();
        assert_eq!(simplify(&f, &mut s), parse("P(x)", &mut s).unwrap());
    }
}
