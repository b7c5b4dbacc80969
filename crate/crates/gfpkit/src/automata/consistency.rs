//! An alternating automaton that accepts exactly the consistent codes
//! over a given alphabet.
//!
//! Adam sweeps down the tree looking for a violation: an edge map that
//! leaves the active names of either endpoint, or a fact whose shared
//! names are not matched across an edge (checked in both directions, the
//! backward direction via an up move). Fact indices beyond the active
//! names cannot occur at all, because such labels are outside the
//! alphabet. Every state has priority 0, so a violation-free infinite
//! sweep is accepting.

use super::{AMove, AutomataError, Owner, StateId, TwoWayAlternatingMuAutomaton};
use crate::codes::build_alphabet;
use crate::syntax::Signature;
use std::collections::BTreeMap;

pub fn consistency_automaton(
    sigma: &Signature,
    m: usize,
) -> Result<TwoWayAlternatingMuAutomaton, AutomataError> {
    let mut a = TwoWayAlternatingMuAutomaton::over_code_alphabet(sigma, m)?;
    let alpha = build_alphabet(sigma, m);
    // Aligned with `a.labels` and `a.actions` respectively.
    let parsed = alpha.node_labels()?;
    let actions = alpha.edge_maps();

    let tt = a.add_state(Owner::Adam, 0);
    let ff = a.add_state(Owner::Eve, 0);
    let q_root = a.add_state(Owner::Eve, 0);
    let q_sweep = a.add_state(Owner::Adam, 0);
    a.initial = q_root;
    let conv: Vec<StateId> = (0..actions.len())
        .map(|_| a.add_state(Owner::Adam, 0))
        .collect();
    let expect: BTreeMap<(String, Vec<usize>), StateId> = alpha
        .fact_predicates()
        .into_iter()
        .map(|f| (f, a.add_state(Owner::Eve, 0)))
        .collect();

    // Expectation states: Eve survives exactly when the label carries the
    // fact.
    for (fact, &q) in &expect {
        for (li, lbl) in parsed.iter().enumerate() {
            if lbl.has_fact(&fact.0, &fact.1) {
                a.delta.insert((q, li), vec![AMove::stay(tt)]);
            }
        }
    }
    // The start node must be labelled D0.
    for (li, lbl) in parsed.iter().enumerate() {
        if lbl.n == 0 {
            a.delta.insert((q_root, li), vec![AMove::stay(q_sweep)]);
        }
    }
    // Challenge states at the target end of a ρ-edge: the map must land in
    // the active names, and every target fact over shared names must be
    // matched back at the source.
    for (ai, rho) in actions.iter().enumerate() {
        let inverse: BTreeMap<usize, usize> = rho.iter().map(|(&i, &j)| (j, i)).collect();
        for (li, lbl) in parsed.iter().enumerate() {
            let mut moves = Vec::new();
            if rho.values().any(|&j| j > lbl.n) {
                moves.push(AMove::stay(ff));
            }
            for (rel, seq) in &lbl.facts {
                if seq.iter().all(|j| inverse.contains_key(j)) {
                    let mapped: Vec<usize> = seq.iter().map(|j| inverse[j]).collect();
                    moves.push(AMove::up(ai, expect[&(rel.clone(), mapped)]));
                }
            }
            if !moves.is_empty() {
                a.delta.insert((conv[ai], li), moves);
            }
        }
    }
    // The sweep: keep descending, or descend into a challenge.
    for (li, lbl) in parsed.iter().enumerate() {
        let mut moves = Vec::new();
        for (ai, rho) in actions.iter().enumerate() {
            moves.push(AMove::down(ai, q_sweep));
            moves.push(AMove::down(ai, conv[ai]));
            if rho.keys().any(|&i| i > lbl.n) {
                moves.push(AMove::down(ai, ff));
            }
            for (rel, seq) in &lbl.facts {
                if seq.iter().all(|i| rho.contains_key(i)) {
                    let mapped: Vec<usize> = seq.iter().map(|i| rho[i]).collect();
                    moves.push(AMove::down(ai, expect[&(rel.clone(), mapped)]));
                }
            }
        }
        a.delta.insert((q_sweep, li), moves);
    }
    Ok(a)
}
