//! Modal μ-calculus formulas over the propositional code alphabet, and
//! translations between formulas and automata.
//!
//! `mu_to_automaton` compiles a closed formula into an alternating
//! automaton whose states are subformula occurrences; it never emits up
//! moves, so acceptance is exact even on regular codes.
//!
//! `automaton_to_mu` converts a nondeterministic μ-automaton into a
//! single formula: one equation per state (a disjunction over labels of
//! the demand-set choices, each demand becoming a diamond), bound in a
//! vectorial fixpoint ordered by priority — least priorities innermost,
//! odd priorities as μ, even as ν — and flattened by Gauss elimination.

use super::{
    AMove, AutomataError, MuAutomaton, Owner, StateId, TwoWayAlternatingMuAutomaton,
};
use crate::syntax::Signature;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MuFormula {
    Prop(String),
    Not(Box<MuFormula>),
    Var(String),
    /// Empty conjunction is truth.
    And(Vec<MuFormula>),
    /// Empty disjunction is falsity.
    Or(Vec<MuFormula>),
    Diamond(String, Box<MuFormula>),
    Box(String, Box<MuFormula>),
    Mu(String, Box<MuFormula>),
    Nu(String, Box<MuFormula>),
}

pub fn mu_true() -> MuFormula {
    MuFormula::And(Vec::new())
}

pub fn mu_false() -> MuFormula {
    MuFormula::Or(Vec::new())
}

/// Conjunction with unit/absorption/flattening.
pub fn and_of(parts: impl IntoIterator<Item = MuFormula>) -> MuFormula {
    let mut out = Vec::new();
    for p in parts {
        match p {
            MuFormula::And(inner) => out.extend(inner),
            MuFormula::Or(inner) if inner.is_empty() => return mu_false(),
            other => out.push(other),
        }
    }
    if out.len() == 1 {
        out.pop().unwrap()
    } else {
        MuFormula::And(out)
    }
}

/// Disjunction with unit/absorption/flattening.
pub fn or_of(parts: impl IntoIterator<Item = MuFormula>) -> MuFormula {
    let mut out = Vec::new();
    for p in parts {
        match p {
            MuFormula::Or(inner) => out.extend(inner),
            MuFormula::And(inner) if inner.is_empty() => return mu_true(),
            other => out.push(other),
        }
    }
    if out.len() == 1 {
        out.pop().unwrap()
    } else {
        MuFormula::Or(out)
    }
}

pub fn diamond(action: impl Into<String>, body: MuFormula) -> MuFormula {
    if body == mu_false() {
        return mu_false();
    }
    MuFormula::Diamond(action.into(), Box::new(body))
}

pub fn box_of(action: impl Into<String>, body: MuFormula) -> MuFormula {
    if body == mu_true() {
        return mu_true();
    }
    MuFormula::Box(action.into(), Box::new(body))
}

impl MuFormula {
    pub fn size(&self) -> usize {
        match self {
            MuFormula::Prop(_) | MuFormula::Var(_) => 1,
            MuFormula::Not(p) => 1 + p.size(),
            MuFormula::And(ps) | MuFormula::Or(ps) => {
                1 + ps.iter().map(|p| p.size()).sum::<usize>()
            }
            MuFormula::Diamond(_, p)
            | MuFormula::Box(_, p)
            | MuFormula::Mu(_, p)
            | MuFormula::Nu(_, p) => 1 + p.size(),
        }
    }

    pub fn props(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |f| {
            if let MuFormula::Prop(p) = f {
                out.insert(p.clone());
            }
        });
        out
    }

    pub fn actions(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |f| match f {
            MuFormula::Diamond(a, _) | MuFormula::Box(a, _) => {
                out.insert(a.clone());
            }
            _ => {}
        });
        out
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        fn go(f: &MuFormula, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
            match f {
                MuFormula::Var(x) => {
                    if !bound.iter().any(|b| b == x) {
                        out.insert(x.clone());
                    }
                }
                MuFormula::Prop(_) => {}
                MuFormula::Not(p) => go(p, bound, out),
                MuFormula::And(ps) | MuFormula::Or(ps) => {
                    for p in ps {
                        go(p, bound, out);
                    }
                }
                MuFormula::Diamond(_, p) | MuFormula::Box(_, p) => go(p, bound, out),
                MuFormula::Mu(x, p) | MuFormula::Nu(x, p) => {
                    bound.push(x.clone());
                    go(p, bound, out);
                    bound.pop();
                }
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    fn walk(&self, f: &mut impl FnMut(&MuFormula)) {
        f(self);
        match self {
            MuFormula::Prop(_) | MuFormula::Var(_) => {}
            MuFormula::Not(p)
            | MuFormula::Diamond(_, p)
            | MuFormula::Box(_, p)
            | MuFormula::Mu(_, p)
            | MuFormula::Nu(_, p) => p.walk(f),
            MuFormula::And(ps) | MuFormula::Or(ps) => {
                for p in ps {
                    p.walk(f);
                }
            }
        }
    }
}

impl fmt::Display for MuFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MuFormula::Prop(p) => write!(f, "{p}"),
            MuFormula::Var(x) => write!(f, "{x}"),
            MuFormula::Not(p) => write!(f, "~{p}"),
            MuFormula::And(ps) if ps.is_empty() => write!(f, "true"),
            MuFormula::Or(ps) if ps.is_empty() => write!(f, "false"),
            MuFormula::And(ps) => {
                write!(f, "(")?;
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        write!(f, " & ")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ")")
            }
            MuFormula::Or(ps) => {
                write!(f, "(")?;
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        write!(f, " | ")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ")")
            }
            MuFormula::Diamond(a, p) => write!(f, "<{a}>{p}"),
            MuFormula::Box(a, p) => write!(f, "[{a}]{p}"),
            MuFormula::Mu(x, p) => write!(f, "mu {x}. {p}"),
            MuFormula::Nu(x, p) => write!(f, "nu {x}. {p}"),
        }
    }
}

/// Every fixpoint variable must occur under an even number of negations
/// relative to its binder.
pub fn check_positive(phi: &MuFormula) -> Result<(), AutomataError> {
    fn go(
        f: &MuFormula,
        parity: bool,
        env: &mut Vec<(String, bool)>,
    ) -> Result<(), AutomataError> {
        match f {
            MuFormula::Prop(_) => Ok(()),
            MuFormula::Var(x) => {
                if let Some((_, bound_parity)) = env.iter().rev().find(|(y, _)| y == x) {
                    if *bound_parity != parity {
                        return Err(AutomataError::Malformed(format!(
                            "fixpoint variable {x} occurs negatively"
                        )));
                    }
                }
                Ok(())
            }
            MuFormula::Not(p) => go(p, !parity, env),
            MuFormula::And(ps) | MuFormula::Or(ps) => {
                for p in ps {
                    go(p, parity, env)?;
                }
                Ok(())
            }
            MuFormula::Diamond(_, p) | MuFormula::Box(_, p) => go(p, parity, env),
            MuFormula::Mu(x, p) | MuFormula::Nu(x, p) => {
                env.push((x.clone(), parity));
                let r = go(p, parity, env);
                env.pop();
                r
            }
        }
    }
    go(phi, true, &mut Vec::new())
}

/// Negation normal form: negations pushed to propositions, binders and
/// modalities dualized. Assumes positivity (checked by the callers).
pub fn nnf(phi: &MuFormula) -> MuFormula {
    fn pos(f: &MuFormula) -> MuFormula {
        match f {
            MuFormula::Prop(_) | MuFormula::Var(_) => f.clone(),
            MuFormula::Not(p) => neg(p),
            MuFormula::And(ps) => and_of(ps.iter().map(pos)),
            MuFormula::Or(ps) => or_of(ps.iter().map(pos)),
            MuFormula::Diamond(a, p) => diamond(a.clone(), pos(p)),
            MuFormula::Box(a, p) => box_of(a.clone(), pos(p)),
            MuFormula::Mu(x, p) => MuFormula::Mu(x.clone(), Box::new(pos(p))),
            MuFormula::Nu(x, p) => MuFormula::Nu(x.clone(), Box::new(pos(p))),
        }
    }
    fn neg(f: &MuFormula) -> MuFormula {
        match f {
            MuFormula::Prop(p) => MuFormula::Not(Box::new(MuFormula::Prop(p.clone()))),
            // Dualizing the binder keeps positive occurrences positive.
            MuFormula::Var(x) => MuFormula::Var(x.clone()),
            MuFormula::Not(p) => pos(p),
            MuFormula::And(ps) => or_of(ps.iter().map(neg)),
            MuFormula::Or(ps) => and_of(ps.iter().map(neg)),
            MuFormula::Diamond(a, p) => box_of(a.clone(), neg(p)),
            MuFormula::Box(a, p) => diamond(a.clone(), neg(p)),
            MuFormula::Mu(x, p) => MuFormula::Nu(x.clone(), Box::new(neg(p))),
            MuFormula::Nu(x, p) => MuFormula::Mu(x.clone(), Box::new(neg(p))),
        }
    }
    pos(phi)
}

/// Capture-avoiding substitution of a closed-or-independent formula for a
/// free variable. Rebuilding goes through the smart constructors, so the
/// result is re-simplified on the way up.
pub fn substitute_var(phi: &MuFormula, x: &str, value: &MuFormula) -> MuFormula {
    match phi {
        MuFormula::Var(y) if y == x => value.clone(),
        MuFormula::Prop(_) | MuFormula::Var(_) => phi.clone(),
        MuFormula::Not(p) => MuFormula::Not(Box::new(substitute_var(p, x, value))),
        MuFormula::And(ps) => and_of(ps.iter().map(|p| substitute_var(p, x, value))),
        MuFormula::Or(ps) => or_of(ps.iter().map(|p| substitute_var(p, x, value))),
        MuFormula::Diamond(a, p) => diamond(a.clone(), substitute_var(p, x, value)),
        MuFormula::Box(a, p) => box_of(a.clone(), substitute_var(p, x, value)),
        MuFormula::Mu(y, _) | MuFormula::Nu(y, _) if y == x => phi.clone(),
        MuFormula::Mu(y, p) => MuFormula::Mu(y.clone(), Box::new(substitute_var(p, x, value))),
        MuFormula::Nu(y, p) => MuFormula::Nu(y.clone(), Box::new(substitute_var(p, x, value))),
    }
}

fn max_binder_depth(phi: &MuFormula) -> usize {
    match phi {
        MuFormula::Prop(_) | MuFormula::Var(_) => 0,
        MuFormula::Not(p) | MuFormula::Diamond(_, p) | MuFormula::Box(_, p) => {
            max_binder_depth(p)
        }
        MuFormula::And(ps) | MuFormula::Or(ps) => {
            ps.iter().map(max_binder_depth).max().unwrap_or(0)
        }
        MuFormula::Mu(_, p) | MuFormula::Nu(_, p) => 1 + max_binder_depth(p),
    }
}

/// Guess code-alphabet metadata from prop and action spellings; only used
/// when no explicit signature is supplied. The label set itself carries
/// the semantics, so this affects bookkeeping, not acceptance.
fn derive_code_meta(props: &BTreeSet<String>, actions: &BTreeSet<String>) -> (Signature, usize) {
    let mut m = 0usize;
    let mut rels: BTreeMap<String, usize> = BTreeMap::new();
    for a in actions {
        if let Ok(rho) = super::parse_action(a) {
            for (i, j) in rho {
                m = m.max(i).max(j);
            }
        }
    }
    for p in props {
        if let Some(rest) = p.strip_prefix('D') {
            if let Ok(n) = rest.parse::<usize>() {
                m = m.max(n);
                continue;
            }
        }
        let parts: Vec<&str> = p.split('_').collect();
        let mut k = parts.len();
        while k > 1 && parts[k - 1].parse::<usize>().is_ok() {
            k -= 1;
        }
        if k < parts.len() {
            let rel = parts[..k].join("_");
            if rel.is_empty() {
                continue;
            }
            let arity = parts.len() - k;
            for idx in &parts[k..] {
                m = m.max(idx.parse::<usize>().unwrap_or(0));
            }
            let slot = rels.entry(rel).or_insert(arity);
            *slot = (*slot).max(arity);
        }
    }
    (Signature::new(rels), m)
}

/// Compile a closed μ-formula into an alternating automaton over the
/// label alphabet of all subsets of the formula's propositions.
pub fn mu_to_automaton(phi: &MuFormula) -> Result<TwoWayAlternatingMuAutomaton, AutomataError> {
    let free = phi.free_vars();
    if !free.is_empty() {
        return Err(AutomataError::Malformed(format!(
            "formula has free fixpoint variables: {free:?}"
        )));
    }
    check_positive(phi)?;
    let phi = nnf(phi);
    let props: Vec<String> = phi.props().into_iter().collect();
    let actions: Vec<String> = phi.actions().into_iter().collect();
    if props.len() > 14 {
        return Err(AutomataError::Capacity(format!(
            "{} propositions would need {} labels",
            props.len(),
            1usize << props.len()
        )));
    }
    let mut labels: Vec<super::Label> = (0..(1usize << props.len()))
        .map(|mask| {
            props
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, p)| p.clone())
                .collect()
        })
        .collect();
    labels.sort();
    let (sigma, m) = derive_code_meta(&phi.props(), &phi.actions());
    build_from_nnf(&phi, sigma, m, props, actions, labels)
}

/// Like `mu_to_automaton`, but over the full code alphabet of
/// `(sigma, m)`; the formula may only mention code props and actions.
pub fn mu_to_automaton_over(
    phi: &MuFormula,
    sigma: &Signature,
    m: usize,
) -> Result<TwoWayAlternatingMuAutomaton, AutomataError> {
    let free = phi.free_vars();
    if !free.is_empty() {
        return Err(AutomataError::Malformed(format!(
            "formula has free fixpoint variables: {free:?}"
        )));
    }
    check_positive(phi)?;
    let phi = nnf(phi);
    let props = super::code_props(sigma, m);
    let actions = super::code_action_names(m);
    for p in phi.props() {
        if !props.contains(&p) {
            return Err(AutomataError::OutOfAlphabet(format!(
                "proposition {p} is not in the code alphabet"
            )));
        }
    }
    for a in phi.actions() {
        if !actions.contains(&a) {
            return Err(AutomataError::OutOfAlphabet(format!(
                "action {a} is not in the code alphabet"
            )));
        }
    }
    let labels = super::code_label_universe(sigma, m)?;
    build_from_nnf(&phi, sigma.clone(), m, props, actions, labels)
}

fn build_from_nnf(
    phi: &MuFormula,
    sigma: Signature,
    m: usize,
    props: Vec<String>,
    actions: Vec<String>,
    labels: Vec<super::Label>,
) -> Result<TwoWayAlternatingMuAutomaton, AutomataError> {
    if phi.size().saturating_mul(labels.len()) > 4_000_000 {
        return Err(AutomataError::Capacity(format!(
            "{} subformulas over {} labels is beyond the transition budget",
            phi.size(),
            labels.len()
        )));
    }
    let mut a = TwoWayAlternatingMuAutomaton {
        sigma,
        m,
        props,
        actions,
        labels,
        owners: Vec::new(),
        priorities: Vec::new(),
        initial: 0,
        delta: BTreeMap::new(),
    };
    // Accepting sink: Adam owns it and has no moves. Rejecting sink: Eve
    // owns it and has no moves.
    let tt = a.add_state(Owner::Adam, 0);
    let ff = a.add_state(Owner::Eve, 0);
    let depth_max = max_binder_depth(phi);
    let action_idx: HashMap<String, usize> = a
        .actions
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();

    struct Ctx<'x> {
        a: &'x mut TwoWayAlternatingMuAutomaton,
        tt: StateId,
        ff: StateId,
        depth_max: usize,
        action_idx: &'x HashMap<String, usize>,
    }

    fn insert_everywhere(a: &mut TwoWayAlternatingMuAutomaton, q: StateId, moves: Vec<AMove>) {
        for l in 0..a.labels.len() {
            a.delta.insert((q, l), moves.clone());
        }
    }

    fn go(
        ctx: &mut Ctx,
        f: &MuFormula,
        bdepth: usize,
        env: &mut Vec<(String, StateId)>,
    ) -> Result<StateId, AutomataError> {
        match f {
            MuFormula::Prop(p) => {
                let q = ctx.a.add_state(Owner::Eve, 0);
                for l in 0..ctx.a.labels.len() {
                    let hit = ctx.a.labels[l].contains(p);
                    let tgt = if hit { ctx.tt } else { ctx.ff };
                    ctx.a.delta.insert((q, l), vec![AMove::stay(tgt)]);
                }
                Ok(q)
            }
            MuFormula::Not(inner) => match inner.as_ref() {
                MuFormula::Prop(p) => {
                    let q = ctx.a.add_state(Owner::Eve, 0);
                    for l in 0..ctx.a.labels.len() {
                        let hit = ctx.a.labels[l].contains(p);
                        let tgt = if hit { ctx.ff } else { ctx.tt };
                        ctx.a.delta.insert((q, l), vec![AMove::stay(tgt)]);
                    }
                    Ok(q)
                }
                _ => Err(AutomataError::Malformed(
                    "negation below NNF reached the builder".into(),
                )),
            },
            MuFormula::And(ps) => {
                if ps.is_empty() {
                    return Ok(ctx.tt);
                }
                let q = ctx.a.add_state(Owner::Adam, 0);
                let mut moves = Vec::with_capacity(ps.len());
                for p in ps {
                    moves.push(AMove::stay(go(ctx, p, bdepth, env)?));
                }
                insert_everywhere(ctx.a, q, moves);
                Ok(q)
            }
            MuFormula::Or(ps) => {
                if ps.is_empty() {
                    return Ok(ctx.ff);
                }
                let q = ctx.a.add_state(Owner::Eve, 0);
                let mut moves = Vec::with_capacity(ps.len());
                for p in ps {
                    moves.push(AMove::stay(go(ctx, p, bdepth, env)?));
                }
                insert_everywhere(ctx.a, q, moves);
                Ok(q)
            }
            MuFormula::Diamond(act, p) => {
                let ai = *ctx.action_idx.get(act).ok_or_else(|| {
                    AutomataError::OutOfAlphabet(format!("action {act} not in alphabet"))
                })?;
                let q = ctx.a.add_state(Owner::Eve, 0);
                let c = go(ctx, p, bdepth, env)?;
                insert_everywhere(ctx.a, q, vec![AMove::down(ai, c)]);
                Ok(q)
            }
            MuFormula::Box(act, p) => {
                let ai = *ctx.action_idx.get(act).ok_or_else(|| {
                    AutomataError::OutOfAlphabet(format!("action {act} not in alphabet"))
                })?;
                let q = ctx.a.add_state(Owner::Adam, 0);
                let c = go(ctx, p, bdepth, env)?;
                insert_everywhere(ctx.a, q, vec![AMove::down(ai, c)]);
                Ok(q)
            }
            MuFormula::Mu(x, p) | MuFormula::Nu(x, p) => {
                let level = bdepth + 1;
                let base = 2 * (ctx.depth_max - level);
                let priority = if matches!(f, MuFormula::Mu(..)) {
                    base + 1
                } else {
                    base + 2
                };
                let q = ctx.a.add_state(Owner::Eve, priority);
                env.push((x.clone(), q));
                let body = go(ctx, p, level, env);
                env.pop();
                insert_everywhere(ctx.a, q, vec![AMove::stay(body?)]);
                Ok(q)
            }
            MuFormula::Var(x) => {
                let binder = env
                    .iter()
                    .rev()
                    .find(|(y, _)| y == x)
                    .map(|(_, q)| *q)
                    .ok_or_else(|| {
                        AutomataError::Malformed(format!("unbound fixpoint variable {x}"))
                    })?;
                let q = ctx.a.add_state(Owner::Eve, 0);
                insert_everywhere(ctx.a, q, vec![AMove::stay(binder)]);
                Ok(q)
            }
        }
    }

    let mut ctx = Ctx {
        a: &mut a,
        tt,
        ff,
        depth_max,
        action_idx: &action_idx,
    };
    let initial = go(&mut ctx, phi, 0, &mut Vec::new())?;
    a.initial = initial;
    Ok(a)
}

/// One defining formula per automaton state: a disjunction over labels of
/// the exact label test conjoined with the demand-set choices.
fn state_equations(m: &MuAutomaton) -> Vec<MuFormula> {
    let var = |q: StateId| MuFormula::Var(format!("X{q}"));
    (0..m.state_count())
        .map(|q| {
            let mut branches = Vec::new();
            for (li, label) in m.labels.iter().enumerate() {
                let Some(sets) = m.delta.get(&(q, li)) else {
                    continue;
                };
                let label_test = and_of(m.props.iter().map(|p| {
                    if label.contains(p) {
                        MuFormula::Prop(p.clone())
                    } else {
                        MuFormula::Not(Box::new(MuFormula::Prop(p.clone())))
                    }
                }));
                let choice = or_of(sets.iter().map(|s| {
                    and_of(
                        s.iter()
                            .map(|&(act, r)| diamond(m.actions[act].clone(), var(r))),
                    )
                }));
                branches.push(and_of([label_test, choice]));
            }
            or_of(branches)
        })
        .collect()
}

/// Flatten a nondeterministic μ-automaton into a single μ-formula over
/// its propositional alphabet.
pub fn automaton_to_mu(m: &MuAutomaton) -> Result<MuFormula, AutomataError> {
    let n = m.state_count();
    if m.initial >= n {
        return Err(AutomataError::Malformed(
            "initial state out of range".into(),
        ));
    }
    let equations = state_equations(m);
    // Only states the initial one depends on participate.
    let mut needed = BTreeSet::new();
    let mut stack = vec![m.initial];
    while let Some(q) = stack.pop() {
        if !needed.insert(q) {
            continue;
        }
        for ((src, _), sets) in &m.delta {
            if *src != q {
                continue;
            }
            for s in sets {
                for &(_, r) in s {
                    if !needed.contains(&r) {
                        stack.push(r);
                    }
                }
            }
        }
    }
    let mut order: Vec<StateId> = needed.iter().copied().collect();
    order.sort_by_key(|&q| (m.priorities[q], q));

    const SIZE_CAP: usize = 400_000;
    let mut solutions: Vec<Option<MuFormula>> = vec![None; n];
    let mut partial: Vec<Option<MuFormula>> = vec![None; n];
    for (pos, &q) in order.iter().enumerate() {
        let mut d = equations[q].clone();
        for &p in &order[..pos] {
            let name = format!("X{p}");
            if d.free_vars().contains(&name) {
                d = substitute_var(&d, &name, partial[p].as_ref().unwrap());
            }
            if d.size() > SIZE_CAP {
                return Err(AutomataError::Capacity(format!(
                    "flattened formula exceeded {SIZE_CAP} nodes"
                )));
            }
        }
        let name = format!("X{q}");
        let bound = if d.free_vars().contains(&name) {
            if m.priorities[q] % 2 == 1 {
                MuFormula::Mu(name, Box::new(d))
            } else {
                MuFormula::Nu(name, Box::new(d))
            }
        } else {
            d
        };
        partial[q] = Some(bound);
    }
    // Close each component by plugging in the (closed) solutions of the
    // later components, from the outermost inwards.
    for (pos, &q) in order.iter().enumerate().rev() {
        let mut s = partial[q].clone().unwrap();
        for &r in &order[pos + 1..] {
            let name = format!("X{r}");
            if s.free_vars().contains(&name) {
                s = substitute_var(&s, &name, solutions[r].as_ref().unwrap());
            }
            if s.size() > SIZE_CAP {
                return Err(AutomataError::Capacity(format!(
                    "flattened formula exceeded {SIZE_CAP} nodes"
                )));
            }
        }
        solutions[q] = Some(s);
    }
    Ok(solutions[m.initial].clone().unwrap())
}

#[cfg(test)]
mod tests {
    use super::super::{accepts, mu_accepts};
    use super::*;
    use crate::codes::{EdgeMap, NodeLabel, TreeCode};

    fn sig_p() -> Signature {
        Signature::new([("P", 1)])
    }

    fn two_node_code() -> TreeCode {
        let mut t = TreeCode::new(1, sig_p());
        let root = t.add_node(NodeLabel::new(0));
        let child = t.add_node(NodeLabel::with_facts(1, [("P", vec![1])]));
        t.add_edge(root, child, EdgeMap::new());
        t
    }

    /// One D0 node with a self-loop along the empty map.
    fn loop_code() -> TreeCode {
        let mut t = TreeCode::new(1, sig_p());
        let v = t.add_node(NodeLabel::new(0));
        t.add_edge(v, v, EdgeMap::new());
        t.regular = true;
        t
    }

    #[test]
    fn nnf_dualizes_binders_and_modalities() {
        let phi = MuFormula::Not(Box::new(MuFormula::Mu(
            "X".into(),
            Box::new(or_of([
                MuFormula::Prop("P_1".into()),
                diamond("rho", MuFormula::Var("X".into())),
            ])),
        )));
        let expect = MuFormula::Nu(
            "X".into(),
            Box::new(and_of([
                MuFormula::Not(Box::new(MuFormula::Prop("P_1".into()))),
                box_of("rho", MuFormula::Var("X".into())),
            ])),
        );
        assert_eq!(nnf(&phi), expect);
    }

    #[test]
    fn negative_occurrences_are_rejected() {
        let phi = MuFormula::Mu(
            "X".into(),
            Box::new(MuFormula::Not(Box::new(MuFormula::Var("X".into())))),
        );
        assert!(check_positive(&phi).is_err());
        assert!(mu_to_automaton(&phi).is_err());
    }

    #[test]
    fn propositions_and_diamonds_check_the_code() {
        let t = two_node_code();
        let phi = diamond("rho", MuFormula::Prop("P_1".into()));
        let a = mu_to_automaton_over(&phi, &sig_p(), 1).unwrap();
        assert!(accepts(&a, &t, t.root).unwrap());
        assert!(!accepts(&a, &t, 1).unwrap());
        let rooted = MuFormula::Prop("D0".into());
        let a2 = mu_to_automaton_over(&rooted, &sig_p(), 1).unwrap();
        assert!(accepts(&a2, &t, t.root).unwrap());
        assert!(!accepts(&a2, &t, 1).unwrap());
    }

    #[test]
    fn least_and_greatest_fixpoints_differ_on_the_infinite_path() {
        let t = loop_code();
        let nu_loop = MuFormula::Nu(
            "X".into(),
            Box::new(diamond("rho", MuFormula::Var("X".into()))),
        );
        let mu_loop = MuFormula::Mu(
            "X".into(),
            Box::new(diamond("rho", MuFormula::Var("X".into()))),
        );
        let a_nu = mu_to_automaton_over(&nu_loop, &sig_p(), 1).unwrap();
        let a_mu = mu_to_automaton_over(&mu_loop, &sig_p(), 1).unwrap();
        assert!(accepts(&a_nu, &t, t.root).unwrap());
        assert!(!accepts(&a_mu, &t, t.root).unwrap());
    }

    #[test]
    fn boxes_quantify_over_all_children() {
        // Root with two children: one P-child, one bare. <rho>P_1 holds,
        // [rho]P_1 fails, [rho'] over an absent action holds vacuously.
        let mut t = TreeCode::new(1, sig_p());
        let root = t.add_node(NodeLabel::new(0));
        let good = t.add_node(NodeLabel::with_facts(1, [("P", vec![1])]));
        let bare = t.add_node(NodeLabel::new(1));
        t.add_edge(root, good, EdgeMap::new());
        t.add_edge(root, bare, EdgeMap::new());
        let dia = diamond("rho", MuFormula::Prop("P_1".into()));
        let boxed = MuFormula::Box("rho".into(), Box::new(MuFormula::Prop("P_1".into())));
        let vacuous = MuFormula::Box(
            "rho_1to1".into(),
            Box::new(MuFormula::Or(Vec::new())),
        );
        let sig = sig_p();
        assert!(accepts(&mu_to_automaton_over(&dia, &sig, 1).unwrap(), &t, root).unwrap());
        assert!(!accepts(&mu_to_automaton_over(&boxed, &sig, 1).unwrap(), &t, root).unwrap());
        assert!(accepts(&mu_to_automaton_over(&vacuous, &sig, 1).unwrap(), &t, root).unwrap());
    }

    #[test]
    fn flattening_a_demand_automaton_preserves_acceptance() {
        let sigma = sig_p();
        let labels = super::super::code_label_universe(&sigma, 1).unwrap();
        let actions = super::super::code_action_names(1);
        let empty_act = actions.iter().position(|s| s == "rho").unwrap();
        let root_l = labels
            .iter()
            .position(|l| l == &super::super::Label::from(["D0".to_string()]))
            .unwrap();
        let child_l = labels
            .iter()
            .position(|l| l == &super::super::Label::from(["D1".to_string(), "P_1".to_string()]))
            .unwrap();
        let mut delta = std::collections::BTreeMap::new();
        delta.insert((0usize, root_l), vec![vec![(empty_act, 1usize)]]);
        delta.insert((1usize, child_l), vec![Vec::new()]);
        let m = MuAutomaton {
            sigma: sigma.clone(),
            m: 1,
            props: super::super::code_props(&sigma, 1),
            actions,
            labels,
            priorities: vec![1, 1],
            initial: 0,
            delta,
        };
        let phi = automaton_to_mu(&m).unwrap();
        let a = mu_to_automaton_over(&phi, &sigma, 1).unwrap();
        let good = two_node_code();
        let mut bare = TreeCode::new(1, sig_p());
        let r = bare.add_node(NodeLabel::new(0));
        let c = bare.add_node(NodeLabel::new(1));
        bare.add_edge(r, c, EdgeMap::new());
        for (code, start) in [(&good, good.root), (&bare, bare.root)] {
            assert_eq!(
                mu_accepts(&m, code, start).unwrap(),
                accepts(&a, code, start).unwrap(),
                "flattened formula disagrees with the automaton"
            );
        }
    }

    #[test]
    fn flattening_agrees_with_the_automaton_on_random_codes() {
        // Random two-state μ-automata over the (P/1, m=1) code alphabet,
        // cross-checked against their flattened formulas on finite codes
        // and on the loop code.
        let sigma = sig_p();
        let labels = super::super::code_label_universe(&sigma, 1).unwrap();
        let actions = super::super::code_action_names(1);
        let n_actions = actions.len();
        let mut seed = 0x2468_ace1_u64;
        let mut rand = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            seed
        };
        for round in 0..12 {
            let n_states = 2 + (rand() % 2) as usize;
            let mut delta = std::collections::BTreeMap::new();
            for q in 0..n_states {
                for li in 0..labels.len() {
                    if rand() % 3 == 0 {
                        continue;
                    }
                    let n_sets = (rand() % 2 + 1) as usize;
                    let mut sets = Vec::new();
                    for _ in 0..n_sets {
                        let n_demands = (rand() % 3) as usize;
                        let mut s = Vec::new();
                        for _ in 0..n_demands {
                            s.push((
                                (rand() as usize) % n_actions,
                                (rand() as usize) % n_states,
                            ));
                        }
                        sets.push(s);
                    }
                    delta.insert((q, li), sets);
                }
            }
            let m = MuAutomaton {
                sigma: sigma.clone(),
                m: 1,
                props: super::super::code_props(&sigma, 1),
                actions: actions.clone(),
                labels: labels.clone(),
                priorities: (0..n_states).map(|q| 1 + (q % 2)).collect(),
                initial: 0,
                delta,
            };
            let phi = match automaton_to_mu(&m) {
                Ok(p) => p,
                Err(AutomataError::Capacity(_)) => continue,
                Err(e) => panic!("unexpected error: {e}"),
            };
            let a = match mu_to_automaton_over(&phi, &sigma, 1) {
                Ok(a) => a,
                Err(AutomataError::Capacity(_)) => continue,
                Err(e) => panic!("unexpected error: {e}"),
            };
            let mut chain = TreeCode::new(1, sigma.clone());
            let r = chain.add_node(NodeLabel::new(0));
            let c1 = chain.add_node(NodeLabel::with_facts(1, [("P", vec![1])]));
            let c2 = chain.add_node(NodeLabel::new(1));
            let c3 = chain.add_node(NodeLabel::with_facts(1, [("P", vec![1])]));
            chain.add_edge(r, c1, EdgeMap::new());
            chain.add_edge(r, c2, EdgeMap::new());
            chain.add_edge(c1, c3, EdgeMap::from([(1, 1)]));
            for code in [&two_node_code(), &chain, &loop_code()] {
                assert_eq!(
                    mu_accepts(&m, code, code.root).unwrap(),
                    accepts(&a, code, code.root).unwrap(),
                    "round {round}: formula {phi} disagrees with its automaton"
                );
            }
        }
    }
}
