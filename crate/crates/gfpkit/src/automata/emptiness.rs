//! Emptiness of nondeterministic μ-automata.
//!
//! Over arbitrary trees the automaton itself is the arena: Eve picks a
//! label and a demand set for the current state, Adam picks a demand to
//! follow. Eve wins the parity game from the initial state exactly when
//! some tree is accepted, and her positional strategy folds into a
//! regular tree code witness: one node per surviving state, one child
//! edge per demand of the chosen set. The witness is re-validated with
//! the acceptance game before being returned.

use super::parity::{solve_parity_game, ParityGame};
use super::{mu_accepts, AutomataError, MuAutomaton, Owner, StateId};
use crate::codes::TreeCode;
use std::collections::BTreeMap;

#[derive(Clone, Debug)]
pub enum EmptinessResult {
    Empty,
    /// A regular tree code accepted by the automaton.
    Witness(TreeCode),
}

pub fn emptiness(m: &MuAutomaton) -> Result<EmptinessResult, AutomataError> {
    let n = m.state_count();
    if m.initial >= n {
        return Err(AutomataError::Malformed(
            "initial state out of range".into(),
        ));
    }
    let pmin = m.priorities.iter().copied().min().unwrap_or(0);
    let mut game = ParityGame::default();
    for q in 0..n {
        game.add_position(Owner::Eve, m.priorities[q]);
    }
    // Choice positions follow the state block; remember their origin.
    let mut choice_info: Vec<(StateId, usize, usize)> = Vec::new();
    for ((q, li), sets) in &m.delta {
        for (si, set) in sets.iter().enumerate() {
            let pos = game.add_position(Owner::Adam, pmin);
            choice_info.push((*q, *li, si));
            game.edges[*q].push(pos);
            for &(_, r) in set {
                game.add_edge(pos, r);
            }
        }
    }
    game.initial = m.initial;
    let sol = solve_parity_game(&game)?;
    if !sol.eve_wins[m.initial] {
        return Ok(EmptinessResult::Empty);
    }

    // Fold the strategy into a code: breadth-first over the states Eve's
    // choices reach.
    let mut t = TreeCode::new(m.m, m.sigma.clone());
    t.regular = true;
    let mut node_of: BTreeMap<StateId, usize> = BTreeMap::new();
    let mut queue = vec![m.initial];
    // First pass: allocate nodes with their chosen labels.
    let mut chosen: BTreeMap<StateId, (usize, usize)> = BTreeMap::new();
    while let Some(q) = queue.pop() {
        if node_of.contains_key(&q) {
            continue;
        }
        let pick = sol.strategy[q].ok_or_else(|| {
            AutomataError::Malformed(format!(
                "internal: no strategy at winning state {q} during witness synthesis"
            ))
        })?;
        let (_, li, si) = choice_info[pick - n];
        let label = super::parse_label(&m.labels[li], &m.sigma)?;
        node_of.insert(q, t.add_node(label));
        chosen.insert(q, (li, si));
        for &(_, r) in &m.delta[&(q, li)][si] {
            if !node_of.contains_key(&r) {
                queue.push(r);
            }
        }
    }
    // Second pass: edges, one per distinct demand.
    for (&q, &(li, si)) in &chosen {
        let mut seen = BTreeMap::new();
        for &(act, r) in &m.delta[&(q, li)][si] {
            seen.insert((act, r), ());
        }
        for (act, r) in seen.into_keys() {
            let rho = super::parse_action(&m.actions[act])?;
            t.add_edge(node_of[&q], node_of[&r], rho);
        }
    }
    t.root = node_of[&m.initial];
    if !mu_accepts(m, &t, t.root)? {
        return Err(AutomataError::Malformed(
            "internal: synthesized witness failed re-validation".into(),
        ));
    }
    Ok(EmptinessResult::Witness(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::Signature;

    fn sig_p() -> Signature {
        Signature::new([("P", 1)])
    }

    fn base(priorities: Vec<usize>) -> MuAutomaton {
        let sigma = sig_p();
        MuAutomaton {
            sigma: sigma.clone(),
            m: 1,
            props: super::super::code_props(&sigma, 1),
            actions: super::super::code_action_names(1),
            labels: super::super::code_label_universe(&sigma, 1).unwrap(),
            priorities,
            initial: 0,
            delta: BTreeMap::new(),
        }
    }

    #[test]
    fn no_transitions_means_empty() {
        let m = base(vec![1]);
        assert!(matches!(emptiness(&m).unwrap(), EmptinessResult::Empty));
    }

    #[test]
    fn a_demand_for_a_p_child_yields_a_checked_witness() {
        let mut m = base(vec![1, 1]);
        let labels = m.labels.clone();
        let empty_act = m.actions.iter().position(|s| s == "rho").unwrap();
        let root_l = labels
            .iter()
            .position(|l| l == &super::super::Label::from(["D0".to_string()]))
            .unwrap();
        let child_l = labels
            .iter()
            .position(|l| l == &super::super::Label::from(["D1".to_string(), "P_1".to_string()]))
            .unwrap();
        m.delta.insert((0, root_l), vec![vec![(empty_act, 1)]]);
        m.delta.insert((1, child_l), vec![Vec::new()]);
        match emptiness(&m).unwrap() {
            EmptinessResult::Witness(t) => {
                assert_eq!(t.labels.len(), 2);
                assert!(super::super::mu_accepts(&m, &t, t.root).unwrap());
            }
            EmptinessResult::Empty => panic!("expected a witness"),
        }
    }

    #[test]
    fn an_odd_self_demand_is_empty_but_an_even_one_loops_forever() {
        for (priority, expect_witness) in [(1usize, false), (2usize, true)] {
            let mut m = base(vec![priority]);
            let empty_act = m.actions.iter().position(|s| s == "rho").unwrap();
            let root_l = m
                .labels
                .iter()
                .position(|l| l == &super::super::Label::from(["D0".to_string()]))
                .unwrap();
            m.delta.insert((0, root_l), vec![vec![(empty_act, 0)]]);
            let got = emptiness(&m).unwrap();
            match (expect_witness, got) {
                (false, EmptinessResult::Empty) => {}
                (true, EmptinessResult::Witness(t)) => {
                    assert!(t.regular);
                    assert!(super::super::mu_accepts(&m, &t, t.root).unwrap());
                }
                (want, got) => panic!("priority {priority}: want witness={want}, got {got:?}"),
            }
        }
    }
}
