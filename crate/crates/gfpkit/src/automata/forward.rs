//! The formula automaton: compiles a strict-normal-form sentence into a
//! two-way alternating automaton that accepts exactly the consistent codes
//! whose decoding satisfies the sentence.
//!
//! The automaton plays a proof game directly on the code. A claim about a
//! union of conjunctive queries is owned by a prover (Eve for positive
//! claims, Adam under an odd number of guarded negations): the prover
//! picks a disjunct, binds its variables to active names of the current
//! node one at a time, navigates along edges (bindings are transported
//! through the edge maps, so a binding always denotes a fixed element of
//! the decoding), discharges atomic conjuncts against the current label,
//! and splits the remaining conjunct set in two, letting the opponent
//! audit either half. Guarded negations flip the roles; fixpoint atoms
//! unfold their defining system. Infinite play is resolved by parity:
//! exploration states make a stalling prover lose, and unfolding states
//! carry priorities ordered by fixpoint nesting depth so that a play that
//! regenerates a least fixpoint forever is lost by whoever is proving
//! membership.
//!
//! Bindings live inside single nodes: a conjunct is discharged where all
//! its variables are simultaneously active. This is complete because an
//! element's occurrences form a connected subtree of the code and fact
//! sets agree along edges on shared names, so a satisfying assignment can
//! always be exhibited by walking the code, binding each variable while
//! inside its region, and splitting conjuncts at branching points. Blocks
//! of the top-level sentence only ever need to move downward (their
//! witnesses hang below the root); spawned subclaims start mid-tree and
//! may also move up.

use super::{
    code_action_universe, AMove, AutomataError, Owner, TwoWayAlternatingMuAutomaton,
};
use crate::codes::NodeLabel;
use crate::symbols::{PredVar, Var};
use crate::syntax::{strict_normal_form, Formula, GuardedSignature, LfpComponent, Signature};
use std::collections::{BTreeMap, HashMap};

const STATE_CAP: usize = 50_000;
const ENTRY_CAP: usize = 4_000_000;

/// Build the automaton for a sentence in strict normal form over `sigma`,
/// running on codes of width `m`.
pub fn forward_automaton(
    phi: &Formula,
    sigma: &Signature,
    m: usize,
) -> Result<TwoWayAlternatingMuAutomaton, AutomataError> {
    if phi.width() > m {
        return Err(AutomataError::SignatureMismatch(format!(
            "formula width {} exceeds the code width {m}",
            phi.width()
        )));
    }
    if !strict_normal_form(phi, &GuardedSignature::full(sigma.clone())) {
        return Err(AutomataError::Malformed(
            "formula is not in strict normal form".into(),
        ));
    }
    forward_core(phi, sigma, m)
}

/// The construction itself, without the width precondition: the proof
/// game is sound and complete for any code width that can hold the
/// signature's facts, even below the formula width (wider joins are then
/// unrealizable in the decoding and the game correctly fails them). The
/// pipeline uses this to synthesize witnesses over narrower alphabets.
pub(crate) fn forward_core(
    phi: &Formula,
    sigma: &Signature,
    m: usize,
) -> Result<TwoWayAlternatingMuAutomaton, AutomataError> {
    if !phi.free_vars().is_empty() {
        return Err(AutomataError::Malformed(
            "formula must be a sentence".into(),
        ));
    }
    if !phi.free_pred_vars().is_empty() {
        return Err(AutomataError::Malformed(
            "sentence has free fixpoint variables".into(),
        ));
    }
    let mut compiler = Compiler {
        prog: Program::default(),
    };
    let top = compiler.compile_disj(phi, &[], &BTreeMap::new(), 0, false, true)?;
    let prog = compiler.prog;

    let mut a = TwoWayAlternatingMuAutomaton::over_code_alphabet(sigma, m)?;
    let parsed: Vec<NodeLabel> = a
        .labels
        .iter()
        .map(|l| super::parse_label(l, sigma))
        .collect::<Result<_, _>>()?;
    let maps = code_action_universe(m);

    let mut builder = Builder {
        prog: &prog,
        parsed: &parsed,
        maps: &maps,
        index: HashMap::new(),
        states: Vec::new(),
        work: Vec::new(),
        aut: &mut a,
    };
    let initial = builder.intern(builder.prog.spawn(top, Vec::new()))?;
    while let Some(sid) = builder.work.pop() {
        let st = builder.states[sid].clone();
        for li in 0..parsed.len() {
            let moves = builder.moves_for(&st, li)?;
            if !moves.is_empty() {
                builder.aut.delta.insert((sid, li), moves);
            }
        }
        if builder.aut.delta.len() > ENTRY_CAP {
            return Err(AutomataError::Capacity(format!(
                "formula automaton exceeds {ENTRY_CAP} transition entries"
            )));
        }
    }
    a.initial = initial;
    Ok(a)
}

type Slot = usize;

#[derive(Debug)]
enum Guard {
    Top,
    Fact(String, Vec<Slot>),
    Eq(Slot, Slot),
}

#[derive(Debug)]
enum Conj {
    Fact(String, Vec<Slot>),
    Eq(Slot, Slot),
    Truth,
    Never,
    Call { sys: usize, comp: usize, args: Vec<Slot> },
    GNeg { guard: Guard, body: usize, params: Vec<Slot> },
    Sub { body: usize, params: Vec<Slot> },
}

impl Conj {
    fn slots(&self) -> Vec<Slot> {
        let mut v = match self {
            Conj::Fact(_, s) => s.clone(),
            Conj::Eq(a, b) => vec![*a, *b],
            Conj::Truth | Conj::Never => vec![],
            Conj::Call { args, .. } => args.clone(),
            Conj::GNeg { guard, params, .. } => {
                let mut v = params.clone();
                match guard {
                    Guard::Top => {}
                    Guard::Fact(_, s) => v.extend(s),
                    Guard::Eq(a, b) => v.extend([*a, *b]),
                }
                v
            }
            Conj::Sub { params, .. } => params.clone(),
        };
        v.sort_unstable();
        v.dedup();
        v
    }
}

#[derive(Debug)]
struct Block {
    pol: bool,
    mobile: bool,
    nslots: usize,
    conjuncts: Vec<Conj>,
    /// Per-conjunct bitmask of the slots it mentions.
    slot_mask: Vec<u64>,
}

impl Block {
    fn live_slots(&self, r: u32) -> u64 {
        let mut live = 0u64;
        for (ci, sm) in self.slot_mask.iter().enumerate() {
            if r & (1 << ci) != 0 {
                live |= sm;
            }
        }
        live
    }
}

#[derive(Debug)]
struct Disj {
    pol: bool,
    block_ids: Vec<usize>,
}

#[derive(Debug)]
struct Comp {
    body: usize,
}

#[derive(Debug)]
struct System {
    level: usize,
    pol: bool,
    comps: Vec<Comp>,
}

#[derive(Debug, Default)]
struct Program {
    disjs: Vec<Disj>,
    blocks: Vec<Block>,
    systems: Vec<System>,
    dmax: usize,
}

/// Game states. `beta` has one entry per block slot; entries outside the
/// variables of the remaining conjuncts are kept at `None` so that states
/// differing only in dead bindings coincide.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
enum St {
    Disj(usize, Vec<usize>),
    Block { b: usize, r: u32, beta: Vec<Option<usize>> },
    Split { b: usize, take: u32, rest: u32, beta: Vec<Option<usize>> },
    Call { sys: usize, comp: usize, names: Vec<usize> },
    Done { pos: bool },
}

impl Program {
    fn spawn(&self, disj: usize, names: Vec<usize>) -> St {
        let d = &self.disjs[disj];
        if d.block_ids.len() == 1 {
            self.block_entry(d.block_ids[0], &names)
        } else {
            St::Disj(disj, names)
        }
    }

    fn block_entry(&self, b: usize, names: &[usize]) -> St {
        let blk = &self.blocks[b];
        let r: u32 = if blk.conjuncts.len() >= 32 {
            unreachable!("conjunct count checked at compile time")
        } else {
            (1u32 << blk.conjuncts.len()) - 1
        };
        if r == 0 {
            return St::Done { pos: blk.pol };
        }
        let mut beta = vec![None; blk.nslots];
        for (i, &n) in names.iter().enumerate() {
            beta[i] = Some(n);
        }
        self.prune(b, r, &mut beta);
        St::Block { b, r, beta }
    }

    /// Clear bindings of slots not used by any remaining conjunct.
    fn prune(&self, b: usize, r: u32, beta: &mut [Option<usize>]) {
        let live = self.blocks[b].live_slots(r);
        for (s, entry) in beta.iter_mut().enumerate() {
            if live & (1 << s) == 0 {
                *entry = None;
            }
        }
    }

    fn advance(&self, b: usize, r: u32, ci: usize, beta: &[Option<usize>]) -> St {
        let r2 = r & !(1u32 << ci);
        if r2 == 0 {
            St::Done {
                pos: self.blocks[b].pol,
            }
        } else {
            let mut beta = beta.to_vec();
            self.prune(b, r2, &mut beta);
            St::Block { b, r: r2, beta }
        }
    }
}

struct Compiler {
    prog: Program,
}

type PredEnv = BTreeMap<PredVar, (usize, usize)>;

impl Compiler {
    fn compile_disj(
        &mut self,
        f: &Formula,
        params: &[Var],
        env: &PredEnv,
        level: usize,
        mobile: bool,
        pol: bool,
    ) -> Result<usize, AutomataError> {
        let parts: Vec<&Formula> = match f {
            Formula::Or(ps) => ps.iter().collect(),
            other => vec![other],
        };
        let mut block_ids = Vec::with_capacity(parts.len());
        for p in parts {
            block_ids.push(self.compile_block(p, params, env, level, mobile, pol)?);
        }
        self.prog.disjs.push(Disj { pol, block_ids });
        Ok(self.prog.disjs.len() - 1)
    }

    fn compile_block(
        &mut self,
        f: &Formula,
        params: &[Var],
        env: &PredEnv,
        level: usize,
        mobile: bool,
        pol: bool,
    ) -> Result<usize, AutomataError> {
        let mut scope: BTreeMap<Var, Slot> = BTreeMap::new();
        for (i, v) in params.iter().enumerate() {
            scope.insert(*v, i);
        }
        let mut nslots = params.len();
        let mut cur = f;
        while let Formula::Exists(vs, body) = cur {
            for v in vs {
                scope.insert(*v, nslots);
                nslots += 1;
            }
            cur = body;
        }
        let conj_forms: Vec<&Formula> = match cur {
            Formula::And(ps) => ps.iter().collect(),
            other => vec![other],
        };
        if conj_forms.len() >= 32 {
            return Err(AutomataError::Capacity(
                "more than 31 conjuncts in one block".into(),
            ));
        }
        if nslots >= 64 {
            return Err(AutomataError::Capacity(
                "more than 63 variables in one block".into(),
            ));
        }
        let mut conjuncts = Vec::with_capacity(conj_forms.len());
        for c in conj_forms {
            conjuncts.push(self.compile_conjunct(c, &scope, env, level, pol)?);
        }
        let slot_mask = conjuncts
            .iter()
            .map(|c| c.slots().iter().fold(0u64, |m, s| m | (1 << s)))
            .collect();
        self.prog.blocks.push(Block {
            pol,
            mobile,
            nslots,
            conjuncts,
            slot_mask,
        });
        Ok(self.prog.blocks.len() - 1)
    }

    fn compile_conjunct(
        &mut self,
        c: &Formula,
        scope: &BTreeMap<Var, Slot>,
        env: &PredEnv,
        level: usize,
        pol: bool,
    ) -> Result<Conj, AutomataError> {
        let slots_of = |vars: &[Var]| -> Result<Vec<Slot>, AutomataError> {
            vars.iter()
                .map(|v| {
                    scope.get(v).copied().ok_or_else(|| {
                        AutomataError::Malformed("variable used outside its scope".into())
                    })
                })
                .collect()
        };
        Ok(match c {
            Formula::Atom(rel, args) => Conj::Fact(rel.clone(), slots_of(args)?),
            Formula::Equality(x, y) => {
                let s = slots_of(&[*x, *y])?;
                Conj::Eq(s[0], s[1])
            }
            Formula::True => Conj::Truth,
            Formula::False => Conj::Never,
            Formula::SecondOrderAtom(p, args) => {
                let &(sys, comp) = env.get(p).ok_or_else(|| {
                    AutomataError::Malformed("unbound fixpoint variable".into())
                })?;
                Conj::Call {
                    sys,
                    comp,
                    args: slots_of(args)?,
                }
            }
            Formula::GuardedNeg(alpha, body) => {
                let guard = match &**alpha {
                    Formula::True => Guard::Top,
                    Formula::Atom(rel, args) => Guard::Fact(rel.clone(), slots_of(args)?),
                    Formula::Equality(x, y) => {
                        let s = slots_of(&[*x, *y])?;
                        Guard::Eq(s[0], s[1])
                    }
                    _ => {
                        return Err(AutomataError::Malformed(
                            "negation guard must be an atom, an equality, or true".into(),
                        ))
                    }
                };
                let bps: Vec<Var> = body.free_vars().into_iter().collect();
                let params = slots_of(&bps)?;
                let did = self.compile_disj(body, &bps, env, level, true, !pol)?;
                Conj::GNeg {
                    guard,
                    body: did,
                    params,
                }
            }
            Formula::Lfp(comp, args) => {
                let sys = self.compile_system(std::slice::from_ref(comp), env, level + 1, pol)?;
                Conj::Call {
                    sys,
                    comp: 0,
                    args: slots_of(args)?,
                }
            }
            Formula::SimultaneousLfp(i, system, args) => {
                if *i >= system.len() {
                    return Err(AutomataError::Malformed(
                        "fixpoint component index out of range".into(),
                    ));
                }
                let sys = self.compile_system(system, env, level + 1, pol)?;
                Conj::Call {
                    sys,
                    comp: *i,
                    args: slots_of(args)?,
                }
            }
            Formula::Or(_) | Formula::Exists(..) | Formula::And(_) => {
                let fps: Vec<Var> = c.free_vars().into_iter().collect();
                let params = slots_of(&fps)?;
                let did = self.compile_disj(c, &fps, env, level, true, pol)?;
                Conj::Sub { body: did, params }
            }
            Formula::GsoForall(..) | Formula::GsoExists(..) => {
                return Err(AutomataError::Malformed(
                    "second-order quantifiers are not part of the normal form".into(),
                ))
            }
        })
    }

    fn compile_system(
        &mut self,
        comps: &[LfpComponent],
        env: &PredEnv,
        level: usize,
        pol: bool,
    ) -> Result<usize, AutomataError> {
        let sysid = self.prog.systems.len();
        self.prog.systems.push(System {
            level,
            pol,
            comps: Vec::new(),
        });
        self.prog.dmax = self.prog.dmax.max(level);
        let mut env2 = env.clone();
        for (i, c) in comps.iter().enumerate() {
            env2.insert(c.pred, (sysid, i));
        }
        for c in comps {
            let unfold = Formula::and(vec![(*c.guard).clone(), (*c.body).clone()]);
            let body = self.compile_disj(&unfold, &c.vars, &env2, level, true, pol)?;
            self.prog.systems[sysid].comps.push(Comp { body });
        }
        Ok(sysid)
    }
}

struct Builder<'a> {
    prog: &'a Program,
    parsed: &'a [NodeLabel],
    maps: &'a [crate::codes::EdgeMap],
    index: HashMap<St, usize>,
    states: Vec<St>,
    work: Vec<usize>,
    aut: &'a mut TwoWayAlternatingMuAutomaton,
}

impl<'a> Builder<'a> {
    fn intern(&mut self, st: St) -> Result<usize, AutomataError> {
        if let Some(&id) = self.index.get(&st) {
            return Ok(id);
        }
        if self.states.len() >= STATE_CAP {
            return Err(AutomataError::Capacity(format!(
                "formula automaton exceeds {STATE_CAP} states"
            )));
        }
        let (owner, priority) = self.rank(&st);
        let id = self.aut.add_state(owner, priority);
        debug_assert_eq!(id, self.states.len());
        self.states.push(st.clone());
        self.index.insert(st, id);
        self.work.push(id);
        Ok(id)
    }

    /// Owner and priority of a state. Provers own their exploration;
    /// auditors own split choices and the finished sink (where being
    /// stuck loses). Exploration priorities punish a stalling prover;
    /// unfolding priorities are ordered by fixpoint nesting so the
    /// outermost fixpoint regenerated forever decides the play.
    fn rank(&self, st: &St) -> (Owner, usize) {
        let prover = |pos: bool| if pos { Owner::Eve } else { Owner::Adam };
        let explore = |pos: bool| usize::from(pos);
        match st {
            St::Done { pos } => (prover(!pos), 0),
            St::Disj(d, _) => {
                let pol = self.prog.disjs[*d].pol;
                (prover(pol), explore(pol))
            }
            St::Block { b, .. } => {
                let pol = self.prog.blocks[*b].pol;
                (prover(pol), explore(pol))
            }
            St::Split { b, .. } => {
                let pol = self.prog.blocks[*b].pol;
                (prover(!pol), explore(pol))
            }
            St::Call { sys, .. } => {
                let s = &self.prog.systems[*sys];
                let base = 2 * (self.prog.dmax - s.level + 1);
                (prover(s.pol), base + usize::from(s.pol))
            }
        }
    }

    fn moves_for(&mut self, st: &St, li: usize) -> Result<Vec<AMove>, AutomataError> {
        let tau = &self.parsed[li];
        let mut out = Vec::new();
        match st {
            St::Done { .. } => {}
            St::Disj(d, names) => {
                for b in self.prog.disjs[*d].block_ids.clone() {
                    let t = self.intern(self.prog.block_entry(b, names))?;
                    out.push(AMove::stay(t));
                }
            }
            St::Call { sys, comp, names } => {
                let body = self.prog.systems[*sys].comps[*comp].body;
                let t = self.intern(self.prog.spawn(body, names.clone()))?;
                out.push(AMove::stay(t));
            }
            St::Split { b, take, rest, beta } => {
                for part in [*take, *rest] {
                    let mut nb = beta.clone();
                    self.prog.prune(*b, part, &mut nb);
                    let t = self.intern(St::Block {
                        b: *b,
                        r: part,
                        beta: nb,
                    })?;
                    out.push(AMove::stay(t));
                }
            }
            St::Block { b, r, beta } => {
                let blk = &self.prog.blocks[*b];
                // Bind an unbound variable of a remaining conjunct.
                let live = blk.live_slots(*r);
                for s in 0..blk.nslots {
                    if live & (1 << s) != 0 && beta[s].is_none() {
                        for name in 1..=tau.n {
                            let mut nb = beta.clone();
                            nb[s] = Some(name);
                            let t = self.intern(St::Block {
                                b: *b,
                                r: *r,
                                beta: nb,
                            })?;
                            out.push(AMove::stay(t));
                        }
                    }
                }
                // Discharge a conjunct against the current label.
                for ci in 0..blk.conjuncts.len() {
                    if r & (1 << ci) == 0 {
                        continue;
                    }
                    let bound = |slots: &[Slot]| slots.iter().all(|&s| beta[s].is_some());
                    let names = |slots: &[Slot]| -> Vec<usize> {
                        slots.iter().map(|&s| beta[s].unwrap()).collect()
                    };
                    let solo = *r == 1u32 << ci;
                    match &self.prog.blocks[*b].conjuncts[ci] {
                        Conj::Fact(rel, slots) => {
                            if bound(slots) && tau.has_fact(rel, &names(slots)) {
                                let t = self.intern(self.prog.advance(*b, *r, ci, beta))?;
                                out.push(AMove::stay(t));
                            }
                        }
                        Conj::Eq(s1, s2) => {
                            if beta[*s1].is_some() && beta[*s1] == beta[*s2] {
                                let t = self.intern(self.prog.advance(*b, *r, ci, beta))?;
                                out.push(AMove::stay(t));
                            }
                        }
                        Conj::Truth => {
                            let t = self.intern(self.prog.advance(*b, *r, ci, beta))?;
                            out.push(AMove::stay(t));
                        }
                        Conj::Never => {}
                        Conj::Call { sys, comp, args } => {
                            if solo && bound(args) {
                                let t = self.intern(St::Call {
                                    sys: *sys,
                                    comp: *comp,
                                    names: names(args),
                                })?;
                                out.push(AMove::stay(t));
                            }
                        }
                        Conj::GNeg { guard, body, params } => {
                            let guard_ok = match guard {
                                Guard::Top => true,
                                Guard::Fact(rel, slots) => {
                                    bound(slots) && tau.has_fact(rel, &names(slots))
                                }
                                Guard::Eq(s1, s2) => {
                                    beta[*s1].is_some() && beta[*s1] == beta[*s2]
                                }
                            };
                            if solo && bound(params) && guard_ok {
                                let t =
                                    self.intern(self.prog.spawn(*body, names(params)))?;
                                out.push(AMove::stay(t));
                            }
                        }
                        Conj::Sub { body, params } => {
                            if solo && bound(params) {
                                let t =
                                    self.intern(self.prog.spawn(*body, names(params)))?;
                                out.push(AMove::stay(t));
                            }
                        }
                    }
                }
                // Split the remaining conjuncts; the opponent audits a half.
                // Variables shared between the halves must already be bound,
                // otherwise the halves could witness them by different
                // elements.
                if r.count_ones() >= 2 {
                    let low = r & r.wrapping_neg();
                    let mut take = *r;
                    loop {
                        take = (take - 1) & r;
                        if take == 0 {
                            break;
                        }
                        if take & low == 0 || take == *r {
                            continue;
                        }
                        let rest = r ^ take;
                        let shared = blk.live_slots(take) & blk.live_slots(rest);
                        let interface_bound = (0..blk.nslots)
                            .all(|s| shared & (1 << s) == 0 || beta[s].is_some());
                        if !interface_bound {
                            continue;
                        }
                        let t = self.intern(St::Split {
                            b: *b,
                            take,
                            rest,
                            beta: beta.clone(),
                        })?;
                        out.push(AMove::stay(t));
                    }
                }
                // Navigate, carrying the bindings through the edge map.
                let mobile = blk.mobile;
                for (ai, rho) in self.maps.iter().enumerate() {
                    if beta
                        .iter()
                        .flatten()
                        .all(|v| rho.contains_key(v))
                    {
                        let nb: Vec<Option<usize>> =
                            beta.iter().map(|o| o.map(|v| rho[&v])).collect();
                        let t = self.intern(St::Block {
                            b: *b,
                            r: *r,
                            beta: nb,
                        })?;
                        out.push(AMove::down(ai, t));
                    }
                    if mobile {
                        let inv: BTreeMap<usize, usize> =
                            rho.iter().map(|(&x, &y)| (y, x)).collect();
                        if beta.iter().flatten().all(|v| inv.contains_key(v)) {
                            let nb: Vec<Option<usize>> =
                                beta.iter().map(|o| o.map(|v| inv[&v])).collect();
                            let t = self.intern(St::Block {
                                b: *b,
                                r: *r,
                                beta: nb,
                            })?;
                            out.push(AMove::up(ai, t));
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::super::accepts;
    use super::*;
    use crate::codes::{check_consistency, decode, EdgeMap, TreeCode};
    use crate::semantics::{evaluate, Valuation};
    use crate::symbols::Symbols;
    use crate::syntax::parse;

    fn sigma_rp() -> Signature {
        Signature::new([("R", 2), ("P", 1)])
    }

    /// Small consistent width-2 fixtures over {R, P}.
    fn fixtures() -> Vec<TreeCode> {
        let sigma = sigma_rp();
        let mut out = Vec::new();

        // Root only: the empty structure.
        let mut empty = TreeCode::new(2, sigma.clone());
        empty.add_node(NodeLabel::new(0));
        out.push(empty);

        // A chain a -R-> b -R-> c with P(c); b shared across bags.
        let mut chain = TreeCode::new(2, sigma.clone());
        let r = chain.add_node(NodeLabel::new(0));
        let ab = chain.add_node(NodeLabel::with_facts(2, [("R", vec![1, 2])]));
        let bc = chain.add_node(NodeLabel::with_facts(
            2,
            [("R", vec![1, 2]), ("P", vec![2])],
        ));
        chain.add_edge(r, ab, EdgeMap::new());
        chain.add_edge(ab, bc, EdgeMap::from([(2, 1)]));
        out.push(chain);

        // A 2-cycle a -R-> b -R-> a, no P.
        let mut cyc = TreeCode::new(2, sigma.clone());
        let r = cyc.add_node(NodeLabel::new(0));
        let v = cyc.add_node(NodeLabel::with_facts(
            2,
            [("R", vec![1, 2]), ("R", vec![2, 1])],
        ));
        cyc.add_edge(r, v, EdgeMap::new());
        out.push(cyc);

        // A self-loop reachable from a P-element: P(a), R(a,b), R(b,b).
        // The loop fact is recorded at both bags holding b.
        let mut lasso = TreeCode::new(2, sigma.clone());
        let r = lasso.add_node(NodeLabel::new(0));
        let ab = lasso.add_node(NodeLabel::with_facts(
            2,
            [("R", vec![1, 2]), ("P", vec![1]), ("R", vec![2, 2])],
        ));
        let bb = lasso.add_node(NodeLabel::with_facts(
            1,
            [("R", vec![1, 1])],
        ));
        lasso.add_edge(r, ab, EdgeMap::new());
        lasso.add_edge(ab, bb, EdgeMap::from([(2, 1)]));
        out.push(lasso);

        // Two disconnected elements: P(a) in one branch, b isolated.
        let mut split = TreeCode::new(2, sigma.clone());
        let r = split.add_node(NodeLabel::new(0));
        let pa = split.add_node(NodeLabel::with_facts(1, [("P", vec![1])]));
        let lone = split.add_node(NodeLabel::new(1));
        split.add_edge(r, pa, EdgeMap::new());
        split.add_edge(r, lone, EdgeMap::new());
        out.push(split);

        for t in &out {
            assert!(
                check_consistency(t).unwrap().consistent,
                "fixture not consistent"
            );
        }
        out
    }

    fn agree(phi_text: &str, sigma: &Signature, m: usize, codes: &[TreeCode]) {
        let mut syms = Symbols::new();
        let phi = parse(phi_text, &mut syms).unwrap();
        let a = forward_automaton(&phi, sigma, m).unwrap();
        let gsig = GuardedSignature::full(sigma.clone());
        for t in codes {
            let expected =
                evaluate(&phi, &decode(t).unwrap(), &Valuation::empty(), &gsig).unwrap();
            let got = accepts(&a, t, t.root).unwrap();
            assert_eq!(got, expected, "disagreement for {phi_text} on {t:?}");
        }
    }

    #[test]
    fn false_rejects_and_true_accepts_every_fixture() {
        let sigma = sigma_rp();
        let f = forward_automaton(&Formula::False, &sigma, 2).unwrap();
        let t = forward_automaton(&Formula::True, &sigma, 2).unwrap();
        for code in fixtures() {
            assert!(!accepts(&f, &code, code.root).unwrap());
            assert!(accepts(&t, &code, code.root).unwrap());
        }
    }

    #[test]
    fn existential_facts_match_the_decoded_structure() {
        let sigma = sigma_rp();
        let codes = fixtures();
        agree("exists x. P(x)", &sigma, 2, &codes);
        agree("exists x,y. R(x,y)", &sigma, 2, &codes);
        agree("exists x,y. R(x,y) & P(y)", &sigma, 2, &codes);
        agree("exists x,y. R(x,y) & R(y,x)", &sigma, 2, &codes);
        agree("exists x. R(x,x)", &sigma, 2, &codes);
    }

    #[test]
    fn guarded_negation_and_plain_negation_agree_with_the_oracle() {
        let sigma = sigma_rp();
        let codes = fixtures();
        agree("gneg[true](exists x. P(x))", &sigma, 2, &codes);
        agree(
            "exists x,y. R(x,y) & gneg[R(x,y)](P(x))",
            &sigma,
            2,
            &codes,
        );
        agree(
            "gneg[true](exists x,y. R(x,y) & gneg[R(x,y)](P(x)))",
            &sigma,
            2,
            &codes,
        );
    }

    #[test]
    fn reachability_fixpoint_agrees_with_the_oracle() {
        let sigma = sigma_rp();
        let codes = fixtures();
        // Some P-element reaches an R-self-loop.
        agree(
            "exists s. P(s) & lfp[X(x); true; R(x,x) | (exists y. R(x,y) & X(y))](s)",
            &sigma,
            2,
            &codes,
        );
        // Everything with P is on an R-edge (negated fixpoint-free check).
        agree(
            "gneg[true](exists x. P(x) & gneg[P(x)](exists y. R(x,y)))",
            &sigma,
            2,
            &codes,
        );
    }

    #[test]
    fn the_triangle_query_needs_a_three_wide_bag() {
        let sigma = Signature::new([("R", 2)]);
        let mut syms = Symbols::new();
        let tri = parse("exists x,y,z. R(x,y) & R(y,z) & R(z,x)", &mut syms).unwrap();
        let a = forward_automaton(&tri, &sigma, 3).unwrap();

        // One bag holding a full triangle.
        let mut one_bag = TreeCode::new(3, sigma.clone());
        let r = one_bag.add_node(NodeLabel::new(0));
        let v = one_bag.add_node(NodeLabel::with_facts(
            3,
            [("R", vec![1, 2]), ("R", vec![2, 3]), ("R", vec![3, 1])],
        ));
        one_bag.add_edge(r, v, EdgeMap::new());
        assert!(check_consistency(&one_bag).unwrap().consistent);
        let dec = decode(&one_bag).unwrap();
        let gsig = GuardedSignature::full(sigma.clone());
        assert!(evaluate(&tri, &dec, &Valuation::empty(), &gsig).unwrap());
        assert!(accepts(&a, &one_bag, one_bag.root).unwrap());

        // An unrolled path a->b->c->d carries no triangle.
        let mut path = TreeCode::new(3, sigma.clone());
        let r = path.add_node(NodeLabel::new(0));
        let ab = path.add_node(NodeLabel::with_facts(2, [("R", vec![1, 2])]));
        let bc = path.add_node(NodeLabel::with_facts(2, [("R", vec![1, 2])]));
        let cd = path.add_node(NodeLabel::with_facts(2, [("R", vec![1, 2])]));
        path.add_edge(r, ab, EdgeMap::new());
        path.add_edge(ab, bc, EdgeMap::from([(2, 1)]));
        path.add_edge(bc, cd, EdgeMap::from([(2, 1)]));
        assert!(check_consistency(&path).unwrap().consistent);
        assert!(!accepts(&a, &path, path.root).unwrap());
    }

    #[test]
    fn width_overflow_and_shape_violations_are_reported() {
        let sigma = sigma_rp();
        let mut syms = Symbols::new();
        let wide = parse("exists x,y,z. R(x,y) & R(y,z)", &mut syms).unwrap();
        assert!(matches!(
            forward_automaton(&wide, &sigma, 2),
            Err(AutomataError::SignatureMismatch(_))
        ));
        let loose = parse("exists x,y. P(x) & (R(x,y) | R(y,x))", &mut syms).unwrap();
        assert!(matches!(
            forward_automaton(&loose, &sigma, 2),
            Err(AutomataError::Malformed(_))
        ));
        let open = parse("P(x)", &mut syms).unwrap();
        assert!(matches!(
            forward_automaton(&open, &sigma, 2),
            Err(AutomataError::Malformed(_))
        ));
    }
}
