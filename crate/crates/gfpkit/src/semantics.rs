//! Finite relational structures and formula evaluation: approximant-based
//! fixpoint semantics, second-order quantification over guarded relations,
//! bounded equivalence checking, canonical structures of conjunctive
//! queries, and homomorphism tests.

use crate::par;
use crate::symbols::{PredVar, Var};
use crate::syntax::{Formula, GuardedSignature, Signature};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

/// Elements are small integers; the domain is kept sorted.
pub type Elem = u32;

/// A finite relational structure: ordered domain plus a set of facts.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationalStructure {
    pub domain: Vec<Elem>,
    pub facts: BTreeSet<(String, Vec<Elem>)>,
}

impl RelationalStructure {
    pub fn new(domain: impl IntoIterator<Item = Elem>) -> Self {
        let mut domain: Vec<Elem> = domain.into_iter().collect();
        domain.sort_unstable();
        domain.dedup();
        RelationalStructure {
            domain,
            facts: BTreeSet::new(),
        }
    }

    pub fn add_fact(&mut self, rel: &str, tuple: impl IntoIterator<Item = Elem>) {
        self.facts.insert((rel.to_string(), tuple.into_iter().collect()));
    }

    pub fn has_fact(&self, rel: &str, tuple: &[Elem]) -> bool {
        self.facts.contains(&(rel.to_string(), tuple.to_vec()))
    }

    /// Keep only the facts over the given relation names.
    pub fn reduct(&self, keep: &BTreeSet<String>) -> RelationalStructure {
        RelationalStructure {
            domain: self.domain.clone(),
            facts: self
                .facts
                .iter()
                .filter(|(r, _)| keep.contains(r))
                .cloned()
                .collect(),
        }
    }

    /// Is the tuple guarded: at most one distinct element, or some fact of
    /// the guard signature contains all its elements?
    pub fn tuple_guarded(&self, tuple: &[Elem], sig: &GuardedSignature) -> bool {
        let distinct: BTreeSet<Elem> = tuple.iter().copied().collect();
        if distinct.len() <= 1 {
            return true;
        }
        self.facts.iter().any(|(r, args)| {
            sig.is_guard_relation(r) && distinct.iter().all(|e| args.contains(e))
        })
    }

    /// All guarded tuples of the given arity, in lexicographic order.
    pub fn guarded_tuples(&self, arity: usize, sig: &GuardedSignature) -> Vec<Vec<Elem>> {
        let mut out = Vec::new();
        let mut tuple = vec![0; arity];
        collect_tuples(&self.domain, arity, &mut tuple, 0, &mut |t| {
            if self.tuple_guarded(t, sig) {
                out.push(t.to_vec());
            }
        });
        out
    }
}

fn collect_tuples(
    domain: &[Elem],
    arity: usize,
    tuple: &mut Vec<Elem>,
    pos: usize,
    f: &mut impl FnMut(&[Elem]),
) {
    if pos == arity {
        f(tuple);
        return;
    }
    for &e in domain {
        tuple[pos] = e;
        collect_tuples(domain, arity, tuple, pos + 1, f);
    }
}

/// Partial assignment of first-order variables to elements and of
/// predicate variables to relations.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Valuation {
    pub first: BTreeMap<Var, Elem>,
    pub second: BTreeMap<PredVar, BTreeSet<Vec<Elem>>>,
}

impl Valuation {
    pub fn empty() -> Self {
        Valuation::default()
    }

    pub fn of_vars(pairs: impl IntoIterator<Item = (Var, Elem)>) -> Self {
        Valuation {
            first: pairs.into_iter().collect(),
            second: BTreeMap::new(),
        }
    }
}

/// Outcome of a bounded equivalence check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EquivalenceVerdict {
    /// No difference on any structure with at most this many elements.
    EquivalentUpTo(usize),
    /// A structure and valuation on which the two formulas disagree.
    Counterexample(RelationalStructure, Valuation),
}

#[derive(Debug, Error)]
pub enum SemanticsError {
    #[error("variable #{0} is not assigned by the valuation")]
    UnboundVariable(u32),
    #[error("predicate variable #{0} is not assigned by the valuation")]
    UnboundPred(u32),
    #[error("second-order quantification over {0} guarded tuples exceeds enumeration capacity")]
    GsoCapacity(usize),
    #[error("enumeration of {0} candidate facts exceeds capacity")]
    EnumerationCapacity(usize),
    #[error("formula is not a conjunctive query: {0}")]
    NotConjunctive(String),
    #[error("structure parse error on line {line}: {msg}")]
    StructureParse { line: usize, msg: String },
}

struct Evaluator<'a> {
    a: &'a RelationalStructure,
    sig: &'a GuardedSignature,
    /// Fixpoint sets for closed fixpoint systems, keyed by the system.
    /// Only valid when the equations use no outer first-order variables
    /// and no outer predicate variables.
    lfp_cache: HashMap<Vec<crate::syntax::LfpComponent>, Vec<BTreeSet<Vec<Elem>>>>,
}

/// Evaluate a formula on a structure under a valuation. Least fixpoints
/// iterate approximants to stability; second-order quantifiers range over
/// guarded relations.
pub fn evaluate(
    phi: &Formula,
    a: &RelationalStructure,
    val: &Valuation,
    sig: &GuardedSignature,
) -> Result<bool, SemanticsError> {
    let mut ev = Evaluator {
        a,
        sig,
        lfp_cache: HashMap::new(),
    };
    let mut val = val.clone();
    ev.eval(phi, &mut val)
}

impl<'a> Evaluator<'a> {
    fn eval(&mut self, phi: &Formula, val: &mut Valuation) -> Result<bool, SemanticsError> {
        match phi {
            Formula::Atom(rel, args) => {
                let tuple = self.tuple(args, val)?;
                Ok(self.a.has_fact(rel, &tuple))
            }
            Formula::SecondOrderAtom(p, args) => {
                let tuple = self.tuple(args, val)?;
                match val.second.get(p) {
                    Some(set) => Ok(set.contains(&tuple)),
                    None => Err(SemanticsError::UnboundPred(p.0)),
                }
            }
            Formula::Equality(x, y) => {
                let ex = self.elem(*x, val)?;
                let ey = self.elem(*y, val)?;
                Ok(ex == ey)
            }
            Formula::True => Ok(true),
            Formula::False => Ok(false),
            Formula::And(ps) => {
                for p in ps {
                    if !self.eval(p, val)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Formula::Or(ps) => {
                for p in ps {
                    if self.eval(p, val)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Formula::Exists(vars, body) => self.eval_exists(vars, body, val),
            Formula::GuardedNeg(alpha, body) => {
                Ok(self.eval(alpha, val)? && !self.eval(body, val)?)
            }
            Formula::Lfp(comp, args) => {
                let system = vec![comp.clone()];
                let sets = self.fixpoint(&system, val)?;
                let tuple = self.tuple(args, val)?;
                Ok(sets[0].contains(&tuple))
            }
            Formula::SimultaneousLfp(i, system, args) => {
                let sets = self.fixpoint(system, val)?;
                let tuple = self.tuple(args, val)?;
                Ok(sets[*i].contains(&tuple))
            }
            Formula::GsoForall(p, arity, body) => {
                let subsets = self.guarded_relations(*arity)?;
                for set in subsets {
                    let shadow = val.second.insert(*p, set);
                    let holds = self.eval(body, val)?;
                    restore_pred(val, *p, shadow);
                    if !holds {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Formula::GsoExists(p, arity, body) => {
                let subsets = self.guarded_relations(*arity)?;
                for set in subsets {
                    let shadow = val.second.insert(*p, set);
                    let holds = self.eval(body, val)?;
                    restore_pred(val, *p, shadow);
                    if holds {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }

    fn eval_exists(
        &mut self,
        vars: &[Var],
        body: &Formula,
        val: &mut Valuation,
    ) -> Result<bool, SemanticsError> {
        if vars.is_empty() {
            return self.eval(body, val);
        }
        let (v, rest) = (vars[0], &vars[1..]);
        let domain = self.a.domain.clone();
        for e in domain {
            let shadow = val.first.insert(v, e);
            let holds = self.eval_exists(rest, body, val)?;
            restore_var(val, v, shadow);
            if holds {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn fixpoint(
        &mut self,
        system: &[crate::syntax::LfpComponent],
        val: &mut Valuation,
    ) -> Result<Vec<BTreeSet<Vec<Elem>>>, SemanticsError> {
        let closed = system.iter().all(|c| {
            let mut fv = c.guard.free_vars();
            fv.extend(c.body.free_vars());
            fv.iter().all(|v| c.vars.contains(v)) && {
                let mut fp = c.guard.free_pred_vars();
                fp.extend(c.body.free_pred_vars());
                fp.iter().all(|p| system.iter().any(|d| d.pred == *p))
            }
        });
        if closed {
            if let Some(sets) = self.lfp_cache.get(system) {
                return Ok(sets.clone());
            }
        }
        let mut sets: Vec<BTreeSet<Vec<Elem>>> = vec![BTreeSet::new(); system.len()];
        loop {
            let mut next = Vec::with_capacity(system.len());
            for comp in system {
                for (d, s) in system.iter().zip(sets.iter()) {
                    val.second.insert(d.pred, s.clone());
                }
                let mut grown = BTreeSet::new();
                let mut tuple = vec![0; comp.vars.len()];
                let mut result: Result<(), SemanticsError> = Ok(());
                let domain = self.a.domain.clone();
                collect_tuples(&domain, comp.vars.len(), &mut tuple, 0, &mut |t| {
                    if result.is_err() {
                        return;
                    }
                    let shadows: Vec<_> = comp
                        .vars
                        .iter()
                        .zip(t.iter())
                        .map(|(v, e)| (v, val.first.insert(*v, *e)))
                        .collect();
                    let holds = (|| {
                        Ok::<bool, SemanticsError>(
                            self.eval(&comp.guard, val)? && self.eval(&comp.body, val)?,
                        )
                    })();
                    for (v, shadow) in shadows.into_iter().rev() {
                        restore_var(val, *v, shadow);
                    }
                    match holds {
                        Ok(true) => {
                            grown.insert(t.to_vec());
                        }
                        Ok(false) => {}
                        Err(e) => result = Err(e),
                    }
                });
                for d in system {
                    val.second.remove(&d.pred);
                }
                result?;
                next.push(grown);
            }
            if next == sets {
                break;
            }
            sets = next;
        }
        if closed {
            self.lfp_cache.insert(system.to_vec(), sets.clone());
        }
        Ok(sets)
    }

    fn tuple(&self, args: &[Var], val: &Valuation) -> Result<Vec<Elem>, SemanticsError> {
        args.iter().map(|v| self.elem(*v, val)).collect()
    }

    fn elem(&self, v: Var, val: &Valuation) -> Result<Elem, SemanticsError> {
        val.first
            .get(&v)
            .copied()
            .ok_or(SemanticsError::UnboundVariable(v.0))
    }

    /// All relations of guarded tuples of the given arity.
    fn guarded_relations(
        &self,
        arity: usize,
    ) -> Result<Vec<BTreeSet<Vec<Elem>>>, SemanticsError> {
        let tuples = self.a.guarded_tuples(arity, self.sig);
        if tuples.len() > 20 {
            return Err(SemanticsError::GsoCapacity(tuples.len()));
        }
        let mut out = Vec::with_capacity(1 << tuples.len());
        for mask in 0u32..(1 << tuples.len()) {
            let set: BTreeSet<Vec<Elem>> = tuples
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, t)| t.clone())
                .collect();
            out.push(set);
        }
        Ok(out)
    }
}

fn restore_var(val: &mut Valuation, v: Var, shadow: Option<Elem>) {
    match shadow {
        Some(e) => {
            val.first.insert(v, e);
        }
        None => {
            val.first.remove(&v);
        }
    }
}

fn restore_pred(val: &mut Valuation, p: PredVar, shadow: Option<BTreeSet<Vec<Elem>>>) {
    match shadow {
        Some(s) => {
            val.second.insert(p, s);
        }
        None => {
            val.second.remove(&p);
        }
    }
}

/// Every structure over the signature with the fixed domain `0..size`,
/// enumerated by fact-subset bitmask (deterministic order).
pub fn enumerate_structures(
    sig: &Signature,
    size: usize,
) -> Result<Vec<RelationalStructure>, SemanticsError> {
    let domain: Vec<Elem> = (0..size as Elem).collect();
    let mut candidates: Vec<(String, Vec<Elem>)> = Vec::new();
    for (rel, &arity) in &sig.relations {
        let mut tuple = vec![0; arity];
        collect_tuples(&domain, arity, &mut tuple, 0, &mut |t| {
            candidates.push((rel.clone(), t.to_vec()));
        });
    }
    if candidates.len() > 24 {
        return Err(SemanticsError::EnumerationCapacity(candidates.len()));
    }
    let mut out = Vec::with_capacity(1 << candidates.len());
    for mask in 0u64..(1u64 << candidates.len()) {
        let mut a = RelationalStructure::new(domain.iter().copied());
        for (i, fact) in candidates.iter().enumerate() {
            if mask & (1 << i) != 0 {
                a.facts.insert(fact.clone());
            }
        }
        out.push(a);
    }
    Ok(out)
}

/// Is this structure the lexicographically least among its isomorphic
/// copies under domain permutations?
pub fn is_canonical(a: &RelationalStructure) -> bool {
    let perms = permutations(a.domain.len());
    for perm in &perms {
        let mapped: BTreeSet<(String, Vec<Elem>)> = a
            .facts
            .iter()
            .map(|(r, args)| {
                (
                    r.clone(),
                    args.iter().map(|e| perm[*e as usize]).collect(),
                )
            })
            .collect();
        if mapped < a.facts {
            return false;
        }
    }
    true
}

fn permutations(n: usize) -> Vec<Vec<Elem>> {
    let mut out = Vec::new();
    let mut items: Vec<Elem> = (0..n as Elem).collect();
    permute(&mut items, 0, &mut out);
    out
}

fn permute(items: &mut Vec<Elem>, k: usize, out: &mut Vec<Vec<Elem>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, out);
        items.swap(k, i);
    }
}

/// Structures with 1..=max elements, one representative per isomorphism
/// class, in deterministic (size, fact-set) order.
pub fn canonical_structures(
    sig: &Signature,
    max: usize,
) -> Result<Vec<RelationalStructure>, SemanticsError> {
    let mut out = Vec::new();
    for size in 1..=max {
        out.extend(
            enumerate_structures(sig, size)?
                .into_iter()
                .filter(is_canonical),
        );
    }
    Ok(out)
}

/// Compare two formulas on every structure with at most `n` elements (one
/// per isomorphism class) under every valuation of their free variables.
pub fn equivalent_up_to(
    phi: &Formula,
    psi: &Formula,
    sig: &GuardedSignature,
    n: usize,
) -> Result<EquivalenceVerdict, SemanticsError> {
    let mut free: Vec<Var> = phi.free_vars().union(&psi.free_vars()).copied().collect();
    free.sort_unstable();
    let structures = canonical_structures(&sig.sigma, n)?;
    let found = par::find_map_first(structures, |a| {
        let mut assignment = vec![0; free.len()];
        let mut hit: Option<Result<(RelationalStructure, Valuation), SemanticsError>> = None;
        visit_valuations(&a.domain, &free, &mut assignment, 0, &mut |vals| {
            if hit.is_some() {
                return;
            }
            let val = Valuation::of_vars(free.iter().copied().zip(vals.iter().copied()));
            match (
                evaluate(phi, a, &val, sig),
                evaluate(psi, a, &val, sig),
            ) {
                (Ok(x), Ok(y)) => {
                    if x != y {
                        hit = Some(Ok((a.clone(), val)));
                    }
                }
                (Err(e), _) | (_, Err(e)) => hit = Some(Err(e)),
            }
        });
        hit
    });
    match found {
        None => Ok(EquivalenceVerdict::EquivalentUpTo(n)),
        Some(Ok((a, val))) => Ok(EquivalenceVerdict::Counterexample(a, val)),
        Some(Err(e)) => Err(e),
    }
}

fn visit_valuations(
    domain: &[Elem],
    free: &[Var],
    assignment: &mut Vec<Elem>,
    pos: usize,
    f: &mut impl FnMut(&[Elem]),
) {
    if pos == free.len() {
        f(assignment);
        return;
    }
    for &e in domain {
        assignment[pos] = e;
        visit_valuations(domain, free, assignment, pos + 1, f);
    }
}

/// The canonical structure of a conjunctive query: one element per
/// variable (merged along equalities), one fact per atom. Returns the
/// structure together with the valuation of the free variables.
pub fn canonical_structure(
    q: &Formula,
) -> Result<(RelationalStructure, Valuation), SemanticsError> {
    let mut atoms: Vec<(String, Vec<Var>)> = Vec::new();
    let mut equalities: Vec<(Var, Var)> = Vec::new();
    let mut vars: Vec<Var> = Vec::new();
    collect_cq(q, &mut atoms, &mut equalities, &mut vars)?;
    for v in q.free_vars() {
        if !vars.contains(&v) {
            vars.push(v);
        }
    }
    // Union-find over variables for the equalities.
    let mut parent: BTreeMap<Var, Var> = vars.iter().map(|v| (*v, *v)).collect();
    fn find(parent: &mut BTreeMap<Var, Var>, v: Var) -> Var {
        let p = parent[&v];
        if p == v {
            v
        } else {
            let r = find(parent, p);
            parent.insert(v, r);
            r
        }
    }
    for (x, y) in equalities {
        let rx = find(&mut parent, x);
        let ry = find(&mut parent, y);
        if rx != ry {
            parent.insert(rx, ry);
        }
    }
    let mut elem_of: BTreeMap<Var, Elem> = BTreeMap::new();
    let mut next = 0;
    for v in &vars {
        let root = find(&mut parent, *v);
        let e = *elem_of.entry(root).or_insert_with(|| {
            let e = next;
            next += 1;
            e
        });
        elem_of.insert(*v, e);
    }
    let mut a = RelationalStructure::new(0..next);
    for (rel, args) in atoms {
        let tuple: Vec<Elem> = args.iter().map(|v| elem_of[v]).collect();
        a.facts.insert((rel, tuple));
    }
    let val = Valuation::of_vars(q.free_vars().into_iter().map(|v| (v, elem_of[&v])));
    Ok((a, val))
}

fn collect_cq(
    q: &Formula,
    atoms: &mut Vec<(String, Vec<Var>)>,
    equalities: &mut Vec<(Var, Var)>,
    vars: &mut Vec<Var>,
) -> Result<(), SemanticsError> {
    match q {
        Formula::Atom(rel, args) => {
            for v in args {
                if !vars.contains(v) {
                    vars.push(*v);
                }
            }
            atoms.push((rel.clone(), args.clone()));
            Ok(())
        }
        Formula::Equality(x, y) => {
            for v in [x, y] {
                if !vars.contains(v) {
                    vars.push(*v);
                }
            }
            equalities.push((*x, *y));
            Ok(())
        }
        Formula::True => Ok(()),
        Formula::And(ps) => ps
            .iter()
            .try_for_each(|p| collect_cq(p, atoms, equalities, vars)),
        Formula::Exists(_, body) => collect_cq(body, atoms, equalities, vars),
        other => Err(SemanticsError::NotConjunctive(format!(
            "unsupported connective {other:?}"
        ))),
    }
}

/// Are the two structures isomorphic? Tries every domain bijection, so
/// this is only for desk-scale inputs.
pub fn isomorphic(a: &RelationalStructure, b: &RelationalStructure) -> bool {
    if a.domain.len() != b.domain.len() || a.facts.len() != b.facts.len() {
        return false;
    }
    let perms = permutations(a.domain.len());
    perms.iter().any(|perm| {
        a.facts.iter().all(|(rel, args)| {
            let mapped: Vec<Elem> = args.iter().map(|e| perm[*e as usize]).collect();
            b.has_fact(rel, &mapped)
        })
    })
}

/// Does a homomorphism from `a` to `b` exist (preserving all facts)?
pub fn homomorphism_exists(a: &RelationalStructure, b: &RelationalStructure) -> bool {
    let elems: Vec<Elem> = a.domain.clone();
    let facts: Vec<&(String, Vec<Elem>)> = a.facts.iter().collect();
    let mut image: BTreeMap<Elem, Elem> = BTreeMap::new();
    extend_hom(&elems, 0, &facts, b, &mut image)
}

fn extend_hom(
    elems: &[Elem],
    pos: usize,
    facts: &[&(String, Vec<Elem>)],
    b: &RelationalStructure,
    image: &mut BTreeMap<Elem, Elem>,
) -> bool {
    if pos == elems.len() {
        return true;
    }
    let e = elems[pos];
    for &target in &b.domain {
        image.insert(e, target);
        let consistent = facts.iter().all(|(rel, args)| {
            match args.iter().map(|x| image.get(x).copied()).collect::<Option<Vec<_>>>() {
                Some(mapped) => b.has_fact(rel, &mapped),
                None => true, // not fully mapped yet
            }
        });
        if consistent && extend_hom(elems, pos + 1, facts, b, image) {
            return true;
        }
        image.remove(&e);
    }
    false
}

/// Parse a structure file: a `domain a b c` line followed by fact lines
/// `R a b`. `#` starts a comment. Returns the structure and the element
/// names in id order.
pub fn parse_structure(
    text: &str,
) -> Result<(RelationalStructure, Vec<String>), SemanticsError> {
    let mut names: Vec<String> = Vec::new();
    let mut ids: BTreeMap<String, Elem> = BTreeMap::new();
    let mut facts: BTreeSet<(String, Vec<Elem>)> = BTreeSet::new();
    let mut saw_domain = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let head = parts.next().unwrap();
        if head == "domain" {
            if saw_domain {
                return Err(SemanticsError::StructureParse {
                    line: lineno + 1,
                    msg: "duplicate domain line".into(),
                });
            }
            saw_domain = true;
            for name in parts {
                if ids.contains_key(name) {
                    return Err(SemanticsError::StructureParse {
                        line: lineno + 1,
                        msg: format!("duplicate element {name}"),
                    });
                }
                ids.insert(name.to_string(), names.len() as Elem);
                names.push(name.to_string());
            }
        } else {
            if !saw_domain {
                return Err(SemanticsError::StructureParse {
                    line: lineno + 1,
                    msg: "facts before the domain line".into(),
                });
            }
            let mut tuple = Vec::new();
            for name in parts {
                match ids.get(name) {
                    Some(&e) => tuple.push(e),
                    None => {
                        return Err(SemanticsError::StructureParse {
                            line: lineno + 1,
                            msg: format!("unknown element {name}"),
                        })
                    }
                }
            }
            facts.insert((head.to_string(), tuple));
        }
    }
    if !saw_domain {
        return Err(SemanticsError::StructureParse {
            line: 0,
            msg: "missing domain line".into(),
        });
    }
    let mut a = RelationalStructure::new(0..names.len() as Elem);
    a.facts = facts;
    Ok((a, names))
}

/// Render a structure in the file format accepted by [`parse_structure`].
pub fn render_structure(a: &RelationalStructure, names: Option<&[String]>) -> String {
    let name_of = |e: Elem| -> String {
        match names {
            Some(ns) if (e as usize) < ns.len() => ns[e as usize].clone(),
            _ => format!("e{e}"),
        }
    };
    let mut out = String::from("domain");
    for &e in &a.domain {
        out.push(' ');
        out.push_str(&name_of(e));
    }
    out.push('\n');
    for (rel, args) in &a.facts {
        out.push_str(rel);
        for &e in args {
            out.push(' ');
            out.push_str(&name_of(e));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::Symbols;
    use crate::syntax::parse;

    fn sig() -> GuardedSignature {
        GuardedSignature::full(Signature::new([("R", 2), ("P", 1), ("Q", 1)]))
    }

    fn path3() -> RelationalStructure {
        // 0 -R-> 1 -R-> 2, P(0), Q(2)
        let mut a = RelationalStructure::new(0..3);
        a.add_fact("R", [0, 1]);
        a.add_fact("R", [1, 2]);
        a.add_fact("P", [0]);
        a.add_fact("Q", [2]);
        a
    }

    #[test]
    fn evaluates_atoms_and_connectives() {
        let mut s = Symbols::new();
        let a = path3();
        let x = s.var("x");
        let f = parse("exists y. R(x,y) & Q(y)", &mut s).unwrap();
        let val = Valuation::of_vars([(x, 1)]);
        assert!(evaluate(&f, &a, &val, &sig()).unwrap());
        let val0 = Valuation::of_vars([(x, 0)]);
        assert!(!evaluate(&f, &a, &val0, &sig()).unwrap());
    }

    #[test]
    fn lfp_computes_reachability() {
        let mut s = Symbols::new();
        let a = path3();
        // Elements reachable from a P-element along R.
        let f = parse(
            "lfp[X(x); true; P(x) | exists y. (R(y,x) & X(y))](z)",
            &mut s,
        )
        .unwrap();
        let z = s.var("z");
        for (e, expect) in [(0, true), (1, true), (2, true)] {
            let val = Valuation::of_vars([(z, e)]);
            assert_eq!(evaluate(&f, &a, &val, &sig()).unwrap(), expect, "element {e}");
        }
        // Drop the P fact: nothing is reachable.
        let mut b = a.clone();
        b.facts.remove(&("P".to_string(), vec![0]));
        let val = Valuation::of_vars([(z, 2)]);
        assert!(!evaluate(&f, &b, &val, &sig()).unwrap());
    }

    #[test]
    fn simultaneous_lfp_alternates() {
        let mut s = Symbols::new();
        // Even/odd distance from a P-element along R edges.
        let f = parse(
            "lfp{0}[E(x); true; P(x) | exists y. (R(y,x) & O(y)) ; O(x); true; exists y. (R(y,x) & E(y))](z)",
            &mut s,
        )
        .unwrap();
        let a = path3();
        let z = s.var("z");
        for (e, expect) in [(0, true), (1, false), (2, true)] {
            let val = Valuation::of_vars([(z, e)]);
            assert_eq!(evaluate(&f, &a, &val, &sig()).unwrap(), expect, "element {e}");
        }
    }

    #[test]
    fn gso_forall_matches_lfp() {
        let mut s = Symbols::new();
        let lfp = parse(
            "lfp[X(x); P(x); P(x) | exists y. (R(y,x) & X(y) & P(x))](z)",
            &mut s,
        )
        .unwrap();
        let gso = crate::syntax::gnfp_to_gso(&lfp, &mut s);
        let mut a = RelationalStructure::new(0..2);
        a.add_fact("P", [0]);
        a.add_fact("P", [1]);
        a.add_fact("R", [0, 1]);
        let z = s.var("z");
        for e in [0, 1] {
            let val = Valuation::of_vars([(z, e)]);
            assert_eq!(
                evaluate(&lfp, &a, &val, &sig()).unwrap(),
                evaluate(&gso, &a, &val, &sig()).unwrap(),
                "element {e}"
            );
        }
    }

    #[test]
    fn equivalence_finds_asymmetry() {
        let mut s = Symbols::new();
        let f = parse("exists y. R(x,y)", &mut s).unwrap();
        let g = parse("exists y. R(y,x)", &mut s).unwrap();
        match equivalent_up_to(&f, &g, &sig(), 2).unwrap() {
            EquivalenceVerdict::Counterexample(a, val) => {
                assert!(!a.facts.is_empty() || !val.first.is_empty());
            }
            other => panic!("expected counterexample, got {other:?}"),
        }
        let h = parse("exists z. R(x,z)", &mut s).unwrap();
        assert_eq!(
            equivalent_up_to(&f, &h, &sig(), 2).unwrap(),
            EquivalenceVerdict::EquivalentUpTo(2)
        );
    }

    #[test]
    fn canonical_structure_and_homomorphism_agree_with_evaluation() {
        let mut s = Symbols::new();
        let q = parse("exists x,y,z. R(x,y) & R(y,z)", &mut s).unwrap();
        let (cq, _val) = canonical_structure(&q).unwrap();
        assert_eq!(cq.domain.len(), 3);
        let a = path3();
        assert!(homomorphism_exists(&cq, &a));
        assert!(evaluate(&q, &a, &Valuation::empty(), &sig()).unwrap());
        // A single loop also satisfies the query via a non-injective hom.
        let mut looped = RelationalStructure::new(0..1);
        looped.add_fact("R", [0, 0]);
        assert!(homomorphism_exists(&cq, &looped));
        assert!(evaluate(&q, &looped, &Valuation::empty(), &sig()).unwrap());
        // No homomorphism into an R-free structure.
        let empty = RelationalStructure::new(0..2);
        assert!(!homomorphism_exists(&cq, &empty));
    }

    #[test]
    fn equalities_merge_canonical_elements() {
        let mut s = Symbols::new();
        let q = parse("exists x,y. R(x,y) & x = y", &mut s).unwrap();
        let (cq, _) = canonical_structure(&q).unwrap();
        assert_eq!(cq.domain.len(), 1);
        assert!(cq.has_fact("R", &[0, 0]));
    }

    #[test]
    fn structure_file_round_trip() {
        let text = "# demo\ndomain a b c\nR a b\nR b c\nP a\n";
        let (a, names) = parse_structure(text).unwrap();
        assert_eq!(a.domain.len(), 3);
        assert!(a.has_fact("R", &[0, 1]));
        let rendered = render_structure(&a, Some(&names));
        let (b, _) = parse_structure(&rendered).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn canonical_enumeration_prunes_isomorphic_copies() {
        let sig = Signature::new([("P", 1)]);
        // Size 2: subsets of {P(0), P(1)}: canonical are {}, {P0}, {P0,P1}.
        let all = enumerate_structures(&sig, 2).unwrap();
        assert_eq!(all.len(), 4);
        let canon: Vec<_> = all.into_iter().filter(is_canonical).collect();
        assert_eq!(canon.len(), 3);
    }
}
