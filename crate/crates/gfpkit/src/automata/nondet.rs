//! Nondeterminization of one-way alternating automata whose universal
//! branching is local.
//!
//! Supported shape: no up moves, down moves only at Eve-owned states, and
//! per (state, label) an acyclic stay-closure. The positive boolean
//! structure spanned by stays (Eve = disjunction, Adam = conjunction,
//! stuck Eve = false, stuck Adam = true) is expanded into disjunctive
//! normal form, each down move contributing one demand. Each expanded
//! demand records the maximum priority seen along its stay segment, and
//! target states are copied per such maximum: the copy sequence of a run
//! then reproduces the original sequence of segment maxima up to a
//! one-step shift, so the parities of the two limsups agree. Automata
//! outside the supported shape are reported as a capacity error, never
//! mistranslated.

use super::{AutomataError, Dir, MuAutomaton, Owner, StateId, TwoWayAlternatingMuAutomaton};
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// One conjunction of demands; the usize is the stay-segment maximum.
type Clause = BTreeSet<(usize, StateId, usize)>;
type Dnf = Vec<Clause>;

const CLAUSE_CAP: usize = 4096;
const STATE_CAP: usize = 50_000;

fn cross(a: &Dnf, b: &Dnf) -> Result<Dnf, AutomataError> {
    if a.len().saturating_mul(b.len()) > CLAUSE_CAP {
        return Err(AutomataError::Capacity(format!(
            "demand DNF exceeded {CLAUSE_CAP} clauses"
        )));
    }
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            let mut c = x.clone();
            c.extend(y.iter().cloned());
            out.push(c);
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn expand(
    a: &TwoWayAlternatingMuAutomaton,
    q: StateId,
    label: usize,
    current_max: usize,
    path: &mut Vec<StateId>,
    memo: &mut HashMap<(StateId, usize), Dnf>,
) -> Result<Dnf, AutomataError> {
    let cm = current_max.max(a.priorities[q]);
    if let Some(hit) = memo.get(&(q, cm)) {
        return Ok(hit.clone());
    }
    if path.contains(&q) {
        return Err(AutomataError::Capacity(format!(
            "unsupported alternation shape: stay cycle through state {q}"
        )));
    }
    path.push(q);
    let moves = a.moves(q, label);
    let result = (|| {
        if moves.is_empty() {
            // Stuck Adam accepts, stuck Eve rejects.
            return Ok(match a.owners[q] {
                Owner::Adam => vec![Clause::new()],
                Owner::Eve => Vec::new(),
            });
        }
        let mut parts: Vec<Dnf> = Vec::with_capacity(moves.len());
        for mv in moves {
            match mv.dir {
                Dir::Up => {
                    return Err(AutomataError::Capacity(
                        "unsupported alternation shape: up move".into(),
                    ));
                }
                Dir::Down => {
                    if a.owners[q] == Owner::Adam {
                        return Err(AutomataError::Capacity(
                            "unsupported alternation shape: universal down branching".into(),
                        ));
                    }
                    let act = mv.action.ok_or_else(|| {
                        AutomataError::Malformed("down move without an action".into())
                    })?;
                    parts.push(vec![Clause::from([(act, mv.target, cm)])]);
                }
                Dir::Stay => {
                    parts.push(expand(a, mv.target, label, cm, path, memo)?);
                }
            }
        }
        match a.owners[q] {
            Owner::Eve => {
                let mut out: Dnf = parts.into_iter().flatten().collect();
                out.sort();
                out.dedup();
                if out.len() > CLAUSE_CAP {
                    return Err(AutomataError::Capacity(format!(
                        "demand DNF exceeded {CLAUSE_CAP} clauses"
                    )));
                }
                Ok(out)
            }
            Owner::Adam => {
                let mut out: Dnf = vec![Clause::new()];
                for p in &parts {
                    out = cross(&out, p)?;
                }
                Ok(out)
            }
        }
    })();
    path.pop();
    let dnf = result?;
    memo.insert((q, cm), dnf.clone());
    Ok(dnf)
}

/// Convert a one-way alternating automaton with local universal branching
/// into an equivalent nondeterministic μ-automaton.
pub fn nondeterminize(a: &TwoWayAlternatingMuAutomaton) -> Result<MuAutomaton, AutomataError> {
    if a.state_count() == 0 || a.initial >= a.state_count() {
        return Err(AutomataError::Malformed(
            "initial state out of range".into(),
        ));
    }
    let mut out = MuAutomaton {
        sigma: a.sigma.clone(),
        m: a.m,
        props: a.props.clone(),
        actions: a.actions.clone(),
        labels: a.labels.clone(),
        priorities: Vec::new(),
        initial: 0,
        delta: BTreeMap::new(),
    };
    // Copies of original states, one per incoming segment maximum.
    fn intern(
        copy_of: &mut BTreeMap<(StateId, usize), StateId>,
        out: &mut MuAutomaton,
        worklist: &mut Vec<((StateId, usize), StateId)>,
        key: (StateId, usize),
    ) -> Result<StateId, AutomataError> {
        if let Some(&c) = copy_of.get(&key) {
            return Ok(c);
        }
        if out.priorities.len() >= STATE_CAP {
            return Err(AutomataError::Capacity(format!(
                "nondeterminization exceeded {STATE_CAP} states"
            )));
        }
        let c = out.priorities.len();
        out.priorities.push(key.1);
        copy_of.insert(key, c);
        worklist.push((key, c));
        Ok(c)
    }
    let mut copy_of: BTreeMap<(StateId, usize), StateId> = BTreeMap::new();
    let mut worklist: Vec<((StateId, usize), StateId)> = Vec::new();
    let start_key = (a.initial, a.priorities[a.initial]);
    out.initial = intern(&mut copy_of, &mut out, &mut worklist, start_key)?;
    let mut cursor = 0;
    while cursor < worklist.len() {
        let ((q, _), here) = worklist[cursor];
        cursor += 1;
        for li in 0..a.labels.len() {
            let mut memo = HashMap::new();
            let dnf = expand(a, q, li, 0, &mut Vec::new(), &mut memo)?;
            if dnf.is_empty() {
                continue;
            }
            let mut sets = Vec::with_capacity(dnf.len());
            for clause in dnf {
                let mut set = Vec::with_capacity(clause.len());
                for (act, r, segmax) in clause {
                    set.push((act, intern(&mut copy_of, &mut out, &mut worklist, (r, segmax))?));
                }
                sets.push(set);
            }
            out.delta.insert((here, li), sets);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::mu::{
        and_of, diamond, mu_to_automaton_over, or_of, MuFormula,
    };
    use super::super::{accepts, mu_accepts};
    use super::*;
    use crate::codes::{EdgeMap, NodeLabel, TreeCode};
    use crate::syntax::Signature;

    fn sig_p() -> Signature {
        Signature::new([("P", 1)])
    }

    fn sample_codes() -> Vec<TreeCode> {
        let sigma = sig_p();
        let mut two = TreeCode::new(1, sigma.clone());
        let r = two.add_node(NodeLabel::new(0));
        let c = two.add_node(NodeLabel::with_facts(1, [("P", vec![1])]));
        two.add_edge(r, c, EdgeMap::new());

        let mut chain = TreeCode::new(1, sigma.clone());
        let r = chain.add_node(NodeLabel::new(0));
        let c1 = chain.add_node(NodeLabel::with_facts(1, [("P", vec![1])]));
        let c2 = chain.add_node(NodeLabel::new(1));
        let c3 = chain.add_node(NodeLabel::with_facts(1, [("P", vec![1])]));
        chain.add_edge(r, c1, EdgeMap::new());
        chain.add_edge(r, c2, EdgeMap::new());
        chain.add_edge(c1, c3, EdgeMap::from([(1, 1)]));

        let mut lasso = TreeCode::new(1, sigma.clone());
        let r = lasso.add_node(NodeLabel::new(0));
        let v = lasso.add_node(NodeLabel::new(1));
        lasso.add_edge(r, v, EdgeMap::new());
        lasso.add_edge(v, v, EdgeMap::from([(1, 1)]));
        lasso.regular = true;

        let mut noloop = TreeCode::new(1, sigma.clone());
        let r = noloop.add_node(NodeLabel::new(0));
        let v = noloop.add_node(NodeLabel::with_facts(1, [("P", vec![1])]));
        noloop.add_edge(r, v, EdgeMap::new());

        vec![two, chain, lasso, noloop]
    }

    #[test]
    fn fixpoint_loops_keep_their_parity() {
        let sigma = sig_p();
        let mut looped = TreeCode::new(1, sigma.clone());
        let v = looped.add_node(NodeLabel::new(0));
        looped.add_edge(v, v, EdgeMap::new());
        looped.regular = true;
        let nu_loop = MuFormula::Nu(
            "X".into(),
            Box::new(diamond("rho", MuFormula::Var("X".into()))),
        );
        let mu_loop = MuFormula::Mu(
            "X".into(),
            Box::new(diamond("rho", MuFormula::Var("X".into()))),
        );
        let a_nu = mu_to_automaton_over(&nu_loop, &sigma, 1).unwrap();
        let a_mu = mu_to_automaton_over(&mu_loop, &sigma, 1).unwrap();
        let m_nu = nondeterminize(&a_nu).unwrap();
        let m_mu = nondeterminize(&a_mu).unwrap();
        assert!(mu_accepts(&m_nu, &looped, looped.root).unwrap());
        assert!(!mu_accepts(&m_mu, &looped, looped.root).unwrap());
    }

    #[test]
    fn universal_branching_is_reported_not_mistranslated() {
        let phi = MuFormula::Box("rho".into(), Box::new(MuFormula::Prop("P_1".into())));
        let a = mu_to_automaton_over(&phi, &sig_p(), 1).unwrap();
        assert!(matches!(
            nondeterminize(&a),
            Err(AutomataError::Capacity(_))
        ));
    }

    #[test]
    fn nondeterminization_preserves_acceptance_on_random_formulas() {
        let sigma = sig_p();
        let codes = sample_codes();
        let mut seed = 0x1357_9bdf_u64;
        let mut rand = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            seed
        };
        fn gen(rand: &mut impl FnMut() -> u64, depth: usize, bound: &mut Vec<String>) -> MuFormula {
            let pick = if depth == 0 { rand() % 2 } else { rand() % 8 };
            match pick {
                0 => MuFormula::Prop(if rand() % 2 == 0 {
                    "P_1".into()
                } else {
                    "D0".into()
                }),
                1 => {
                    if bound.is_empty() {
                        MuFormula::Prop("D1".into())
                    } else {
                        MuFormula::Var(bound[(rand() as usize) % bound.len()].clone())
                    }
                }
                2 | 3 => {
                    let k = 2;
                    let parts: Vec<MuFormula> =
                        (0..k).map(|_| gen(rand, depth - 1, bound)).collect();
                    if pick == 2 {
                        and_of(parts)
                    } else {
                        or_of(parts)
                    }
                }
                4 | 5 => {
                    let act = if rand() % 2 == 0 { "rho" } else { "rho_1to1" };
                    diamond(act, gen(rand, depth - 1, bound))
                }
                _ => {
                    let name = format!("V{}", bound.len());
                    bound.push(name.clone());
                    let body = gen(rand, depth - 1, bound);
                    bound.pop();
                    if pick == 6 {
                        MuFormula::Mu(name, Box::new(body))
                    } else {
                        MuFormula::Nu(name, Box::new(body))
                    }
                }
            }
        }
        let mut rounds = 0;
        for _ in 0..40 {
            let phi = gen(&mut rand, 4, &mut Vec::new());
            let a = mu_to_automaton_over(&phi, &sigma, 1).unwrap();
            let m = match nondeterminize(&a) {
                Ok(m) => m,
                Err(AutomataError::Capacity(_)) => continue,
                Err(e) => panic!("unexpected error: {e}"),
            };
            for code in &codes {
                assert_eq!(
                    accepts(&a, code, code.root).unwrap(),
                    mu_accepts(&m, code, code.root).unwrap(),
                    "disagreement on formula {phi}"
                );
            }
            rounds += 1;
        }
        assert!(rounds >= 20, "only {rounds} formulas were checked");
    }
}
