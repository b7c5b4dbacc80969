//! The formula AST and structural utilities: free variables, width,
//! substitution, positivity, and well-formedness validation.

use super::{SyntaxError, VarSet};
use crate::symbols::{PredVar, Symbols, Var};
use std::collections::{BTreeMap, BTreeSet};

/// One equation `X(x̄) := α ∧ body` of a (simultaneous) least fixpoint.
///
/// `guard` is restricted to an atom, an equality, or `true`; the guard is
/// conjoined with `body` when the fixpoint is evaluated, so every tuple in
/// the fixpoint satisfies it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LfpComponent {
    pub pred: PredVar,
    pub vars: Vec<Var>,
    pub guard: Box<Formula>,
    pub body: Box<Formula>,
}

/// Formulas of guarded fixpoint logic, plus the second-order quantifiers
/// used by the guarded-second-order translation.
///
/// Conjunction and disjunction are n-ary and kept flat by the parser (but
/// explicitly parenthesized sub-conjunctions survive as nested nodes).
/// Negation is always the guarded form `gneg[α](body)`; the trivial guard
/// `true` expresses plain negation. For a non-trivial guard the invariant
/// `free(α) ⊇ free(body)` must hold.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    /// Relation atom `R(x1,..,xn)`.
    Atom(String, Vec<Var>),
    /// Fixpoint / second-order variable atom `X(x1,..,xn)`.
    SecondOrderAtom(PredVar, Vec<Var>),
    /// `x = y`.
    Equality(Var, Var),
    True,
    False,
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Exists(Vec<Var>, Box<Formula>),
    /// `gneg[α](body)`: `α ∧ ¬body`, except that `α = true` means plain `¬body`.
    GuardedNeg(Box<Formula>, Box<Formula>),
    /// `[lfp X(x̄) := α ∧ body](args)`.
    Lfp(LfpComponent, Vec<Var>),
    /// Component `index` of a simultaneous least fixpoint system, applied to `args`.
    SimultaneousLfp(usize, Vec<LfpComponent>, Vec<Var>),
    /// Second-order universal quantifier over a predicate of the given arity.
    GsoForall(PredVar, usize, Box<Formula>),
    /// Second-order existential quantifier over a predicate of the given arity.
    GsoExists(PredVar, usize, Box<Formula>),
}

impl Formula {
    /// N-ary conjunction with the usual simplifications (empty = `true`,
    /// singleton = the conjunct, nested `And`s flattened, `false` absorbing).
    pub fn and(parts: Vec<Formula>) -> Formula {
        let mut flat = Vec::new();
        for p in parts {
            match p {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => Formula::True,
            1 => flat.pop().unwrap(),
            _ => Formula::And(flat),
        }
    }

    /// N-ary disjunction with the dual simplifications of [`Formula::and`].
    pub fn or(parts: Vec<Formula>) -> Formula {
        let mut flat = Vec::new();
        for p in parts {
            match p {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => Formula::False,
            1 => flat.pop().unwrap(),
            _ => Formula::Or(flat),
        }
    }

    /// Existential quantification, dropping variables that do not occur free
    /// in the body and collapsing empty prefixes.
    pub fn exists(vars: Vec<Var>, body: Formula) -> Formula {
        let fv = body.free_vars();
        let vars: Vec<Var> = vars.into_iter().filter(|v| fv.contains(v)).collect();
        if vars.is_empty() {
            body
        } else if let Formula::Exists(inner, b) = body {
            let mut all = vars;
            all.extend(inner);
            Formula::Exists(all, b)
        } else {
            Formula::Exists(vars, Box::new(body))
        }
    }

    /// Free first-order variables.
    pub fn free_vars(&self) -> VarSet {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out);
        out
    }

    fn collect_free(&self, out: &mut VarSet) {
        match self {
            Formula::Atom(_, vs) | Formula::SecondOrderAtom(_, vs) => out.extend(vs.iter().copied()),
            Formula::Equality(x, y) => {
                out.insert(*x);
                out.insert(*y);
            }
            Formula::True | Formula::False => {}
            Formula::And(ps) | Formula::Or(ps) => {
                for p in ps {
                    p.collect_free(out);
                }
            }
            Formula::Exists(vs, body) => {
                let mut inner = BTreeSet::new();
                body.collect_free(&mut inner);
                for v in vs {
                    inner.remove(v);
                }
                out.extend(inner);
            }
            Formula::GuardedNeg(alpha, body) => {
                alpha.collect_free(out);
                body.collect_free(out);
            }
            Formula::Lfp(comp, args) => {
                out.extend(args.iter().copied());
                let mut inner = BTreeSet::new();
                comp.guard.collect_free(&mut inner);
                comp.body.collect_free(&mut inner);
                for v in &comp.vars {
                    inner.remove(v);
                }
                out.extend(inner);
            }
            Formula::SimultaneousLfp(_, system, args) => {
                out.extend(args.iter().copied());
                for comp in system {
                    let mut inner = BTreeSet::new();
                    comp.guard.collect_free(&mut inner);
                    comp.body.collect_free(&mut inner);
                    for v in &comp.vars {
                        inner.remove(v);
                    }
                    out.extend(inner);
                }
            }
            Formula::GsoForall(_, _, body) | Formula::GsoExists(_, _, body) => body.collect_free(out),
        }
    }

    /// Free predicate (fixpoint / second-order) variables.
    pub fn free_pred_vars(&self) -> BTreeSet<PredVar> {
        let mut out = BTreeSet::new();
        self.collect_free_preds(&mut out);
        out
    }

    fn collect_free_preds(&self, out: &mut BTreeSet<PredVar>) {
        match self {
            Formula::SecondOrderAtom(p, _) => {
                out.insert(*p);
            }
            Formula::Atom(..) | Formula::Equality(..) | Formula::True | Formula::False => {}
            Formula::And(ps) | Formula::Or(ps) => {
                for p in ps {
                    p.collect_free_preds(out);
                }
            }
            Formula::Exists(_, body) => body.collect_free_preds(out),
            Formula::GuardedNeg(alpha, body) => {
                alpha.collect_free_preds(out);
                body.collect_free_preds(out);
            }
            Formula::Lfp(comp, _) => {
                let mut inner = BTreeSet::new();
                comp.guard.collect_free_preds(&mut inner);
                comp.body.collect_free_preds(&mut inner);
                inner.remove(&comp.pred);
                out.extend(inner);
            }
            Formula::SimultaneousLfp(_, system, _) => {
                let bound: BTreeSet<PredVar> = system.iter().map(|c| c.pred).collect();
                for comp in system {
                    let mut inner = BTreeSet::new();
                    comp.guard.collect_free_preds(&mut inner);
                    comp.body.collect_free_preds(&mut inner);
                    out.extend(inner.difference(&bound).copied());
                }
            }
            Formula::GsoForall(p, _, body) | Formula::GsoExists(p, _, body) => {
                let mut inner = BTreeSet::new();
                body.collect_free_preds(&mut inner);
                inner.remove(p);
                out.extend(inner);
            }
        }
    }

    /// Number of AST nodes (guards and bodies of fixpoint equations included).
    pub fn size(&self) -> usize {
        let mut n = 1;
        self.for_each_child(&mut |c| n += c.size());
        n
    }

    /// Width: the maximum number of free variables over all subformulas.
    pub fn width(&self) -> usize {
        let mut w = self.free_vars().len();
        self.for_each_child(&mut |c| w = w.max(c.width()));
        w
    }

    fn for_each_child(&self, f: &mut impl FnMut(&Formula)) {
        match self {
            Formula::Atom(..)
            | Formula::SecondOrderAtom(..)
            | Formula::Equality(..)
            | Formula::True
            | Formula::False => {}
            Formula::And(ps) | Formula::Or(ps) => ps.iter().for_each(&mut *f),
            Formula::Exists(_, body) => f(body),
            Formula::GuardedNeg(alpha, body) => {
                f(alpha);
                f(body);
            }
            Formula::Lfp(comp, _) => {
                f(&comp.guard);
                f(&comp.body);
            }
            Formula::SimultaneousLfp(_, system, _) => {
                for comp in system {
                    f(&comp.guard);
                    f(&comp.body);
                }
            }
            Formula::GsoForall(_, _, body) | Formula::GsoExists(_, _, body) => f(body),
        }
    }

    /// Does `pred` occur only positively (under an even number of negations)?
    /// Occurrences inside guards count as positive contexts but guards may
    /// not contain predicate atoms at all; validation rejects that shape.
    pub fn positive_in(&self, pred: PredVar) -> bool {
        self.polarity_ok(pred, true)
    }

    fn polarity_ok(&self, pred: PredVar, positive: bool) -> bool {
        match self {
            Formula::SecondOrderAtom(p, _) => *p != pred || positive,
            Formula::Atom(..) | Formula::Equality(..) | Formula::True | Formula::False => true,
            Formula::And(ps) | Formula::Or(ps) => ps.iter().all(|p| p.polarity_ok(pred, positive)),
            Formula::Exists(_, body) => body.polarity_ok(pred, positive),
            Formula::GuardedNeg(alpha, body) => {
                alpha.polarity_ok(pred, positive) && body.polarity_ok(pred, !positive)
            }
            Formula::Lfp(comp, _) => {
                if comp.pred == pred {
                    true
                } else {
                    comp.guard.polarity_ok(pred, positive) && comp.body.polarity_ok(pred, positive)
                }
            }
            Formula::SimultaneousLfp(_, system, _) => {
                if system.iter().any(|c| c.pred == pred) {
                    true
                } else {
                    system.iter().all(|c| {
                        c.guard.polarity_ok(pred, positive) && c.body.polarity_ok(pred, positive)
                    })
                }
            }
            Formula::GsoForall(p, _, body) | Formula::GsoExists(p, _, body) => {
                *p == pred || body.polarity_ok(pred, positive)
            }
        }
    }

    /// Is this formula admissible as a guard (an atom, an equality, or `true`)?
    pub fn is_guard_shape(&self) -> bool {
        matches!(
            self,
            Formula::Atom(..) | Formula::Equality(..) | Formula::True
        )
    }

    /// Capture-avoiding substitution of free first-order variables.
    pub fn substitute(&self, map: &BTreeMap<Var, Var>, syms: &mut Symbols) -> Formula {
        if map.is_empty() {
            return self.clone();
        }
        match self {
            Formula::Atom(r, vs) => {
                Formula::Atom(r.clone(), vs.iter().map(|v| *map.get(v).unwrap_or(v)).collect())
            }
            Formula::SecondOrderAtom(p, vs) => Formula::SecondOrderAtom(
                *p,
                vs.iter().map(|v| *map.get(v).unwrap_or(v)).collect(),
            ),
            Formula::Equality(x, y) => {
                Formula::Equality(*map.get(x).unwrap_or(x), *map.get(y).unwrap_or(y))
            }
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::And(ps) => Formula::And(ps.iter().map(|p| p.substitute(map, syms)).collect()),
            Formula::Or(ps) => Formula::Or(ps.iter().map(|p| p.substitute(map, syms)).collect()),
            Formula::Exists(vs, body) => {
                let (vs, body) = rebind(vs, body, map, syms);
                Formula::Exists(vs, Box::new(body))
            }
            Formula::GuardedNeg(alpha, body) => Formula::GuardedNeg(
                Box::new(alpha.substitute(map, syms)),
                Box::new(body.substitute(map, syms)),
            ),
            Formula::Lfp(comp, args) => Formula::Lfp(
                subst_component(comp, map, syms),
                args.iter().map(|v| *map.get(v).unwrap_or(v)).collect(),
            ),
            Formula::SimultaneousLfp(i, system, args) => Formula::SimultaneousLfp(
                *i,
                system.iter().map(|c| subst_component(c, map, syms)).collect(),
                args.iter().map(|v| *map.get(v).unwrap_or(v)).collect(),
            ),
            Formula::GsoForall(p, a, body) => {
                Formula::GsoForall(*p, *a, Box::new(body.substitute(map, syms)))
            }
            Formula::GsoExists(p, a, body) => {
                Formula::GsoExists(*p, *a, Box::new(body.substitute(map, syms)))
            }
        }
    }

    /// Replace every atom of the predicate variable `pred` by
    /// `make(args)`; binders of the same name shadow as usual.
    pub fn replace_pred(&self, pred: PredVar, make: &impl Fn(&[Var]) -> Formula) -> Formula {
        match self {
            Formula::SecondOrderAtom(p, vs) if *p == pred => make(vs),
            Formula::Atom(..)
            | Formula::SecondOrderAtom(..)
            | Formula::Equality(..)
            | Formula::True
            | Formula::False => self.clone(),
            Formula::And(ps) => {
                Formula::And(ps.iter().map(|p| p.replace_pred(pred, make)).collect())
            }
            Formula::Or(ps) => Formula::Or(ps.iter().map(|p| p.replace_pred(pred, make)).collect()),
            Formula::Exists(vs, body) => {
                Formula::Exists(vs.clone(), Box::new(body.replace_pred(pred, make)))
            }
            Formula::GuardedNeg(alpha, body) => Formula::GuardedNeg(
                Box::new(alpha.replace_pred(pred, make)),
                Box::new(body.replace_pred(pred, make)),
            ),
            Formula::Lfp(comp, args) => {
                if comp.pred == pred {
                    self.clone()
                } else {
                    Formula::Lfp(
                        LfpComponent {
                            pred: comp.pred,
                            vars: comp.vars.clone(),
                            guard: Box::new(comp.guard.replace_pred(pred, make)),
                            body: Box::new(comp.body.replace_pred(pred, make)),
                        },
                        args.clone(),
                    )
                }
            }
            Formula::SimultaneousLfp(i, system, args) => {
                if system.iter().any(|c| c.pred == pred) {
                    self.clone()
                } else {
                    Formula::SimultaneousLfp(
                        *i,
                        system
                            .iter()
                            .map(|c| LfpComponent {
                                pred: c.pred,
                                vars: c.vars.clone(),
                                guard: Box::new(c.guard.replace_pred(pred, make)),
                                body: Box::new(c.body.replace_pred(pred, make)),
                            })
                            .collect(),
                        args.clone(),
                    )
                }
            }
            Formula::GsoForall(p, a, body) => {
                if *p == pred {
                    self.clone()
                } else {
                    Formula::GsoForall(*p, *a, Box::new(body.replace_pred(pred, make)))
                }
            }
            Formula::GsoExists(p, a, body) => {
                if *p == pred {
                    self.clone()
                } else {
                    Formula::GsoExists(*p, *a, Box::new(body.replace_pred(pred, make)))
                }
            }
        }
    }

    /// Structural well-formedness: guard shapes, the guarded-negation
    /// invariant, fixpoint arities, and positivity of fixpoint variables.
    pub fn validate(&self, syms: &Symbols) -> Result<(), SyntaxError> {
        match self {
            Formula::Atom(..)
            | Formula::SecondOrderAtom(..)
            | Formula::Equality(..)
            | Formula::True
            | Formula::False => Ok(()),
            Formula::And(ps) | Formula::Or(ps) => {
                ps.iter().try_for_each(|p| p.validate(syms))
            }
            Formula::Exists(_, body) => body.validate(syms),
            Formula::GuardedNeg(alpha, body) => {
                if !alpha.is_guard_shape() {
                    return Err(SyntaxError::InvalidGuard(
                        "negation guard must be an atom, an equality, or true".into(),
                    ));
                }
                if !matches!(**alpha, Formula::True)
                    && !alpha.free_vars().is_superset(&body.free_vars())
                {
                    return Err(SyntaxError::InvalidGuard(
                        "negation guard must cover the free variables of the body".into(),
                    ));
                }
                body.validate(syms)
            }
            Formula::Lfp(comp, args) => validate_system(std::slice::from_ref(comp), args, comp, syms),
            Formula::SimultaneousLfp(i, system, args) => {
                let comp = system
                    .get(*i)
                    .ok_or(SyntaxError::FixpointIndex { index: *i, len: system.len() })?;
                validate_system(system, args, comp, syms)
            }
            Formula::GsoForall(_, _, body) | Formula::GsoExists(_, _, body) => body.validate(syms),
        }
    }
}

fn validate_system(
    system: &[LfpComponent],
    args: &[Var],
    applied: &LfpComponent,
    syms: &Symbols,
) -> Result<(), SyntaxError> {
    if args.len() != applied.vars.len() {
        return Err(SyntaxError::FixpointArity(
            syms.pred_name(applied.pred).to_string(),
        ));
    }
    for comp in system {
        if !comp.guard.is_guard_shape() {
            return Err(SyntaxError::InvalidGuard(
                "fixpoint guard must be an atom, an equality, or true".into(),
            ));
        }
        if !comp.guard.free_pred_vars().is_empty() {
            return Err(SyntaxError::InvalidGuard(
                "fixpoint guard may not mention predicate variables".into(),
            ));
        }
        for other in system {
            if !comp.body.positive_in(other.pred) {
                return Err(SyntaxError::NotInFragment(format!(
                    "fixpoint variable {} occurs negatively",
                    syms.pred_name(other.pred)
                )));
            }
        }
        comp.guard.validate(syms)?;
        comp.body.validate(syms)?;
    }
    Ok(())
}

fn subst_component(comp: &LfpComponent, map: &BTreeMap<Var, Var>, syms: &mut Symbols) -> LfpComponent {
    // The bound tuple shadows outer variables; restrict the map and rename
    // the tuple if a substitution target would be captured.
    let mut inner: BTreeMap<Var, Var> = map
        .iter()
        .filter(|(k, _)| !comp.vars.contains(k))
        .map(|(k, v)| (*k, *v))
        .collect();
    let mut vars = comp.vars.clone();
    let targets: BTreeSet<Var> = inner.values().copied().collect();
    for v in vars.iter_mut() {
        if targets.contains(v) {
            let fresh = syms.fresh_var();
            inner.insert(*v, fresh);
            *v = fresh;
        }
    }
    LfpComponent {
        pred: comp.pred,
        vars,
        guard: Box::new(comp.guard.substitute(&inner, syms)),
        body: Box::new(comp.body.substitute(&inner, syms)),
    }
}

fn rebind(
    vs: &[Var],
    body: &Formula,
    map: &BTreeMap<Var, Var>,
    syms: &mut Symbols,
) -> (Vec<Var>, Formula) {
    let mut inner: BTreeMap<Var, Var> = map
        .iter()
        .filter(|(k, _)| !vs.contains(k))
        .map(|(k, v)| (*k, *v))
        .collect();
    let mut vs = vs.to_vec();
    let targets: BTreeSet<Var> = inner.values().copied().collect();
    for v in vs.iter_mut() {
        if targets.contains(v) {
            let fresh = syms.fresh_var();
            inner.insert(*v, fresh);
            *v = fresh;
        }
    }
    (vs.clone(), body.substitute(&inner, syms))
}
