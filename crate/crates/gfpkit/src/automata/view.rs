//! The guarded-view automaton.
//!
//! Given an automaton A over the code alphabet of (σ, m), build A' over
//! the same alphabet such that A' accepts a consistent code T exactly
//! when A accepts the code of the strictly guarded unravelling of
//! decode(T) with respect to a comparison signature σ′ and guard set σ_g.
//! A' augments each state of A with a view: a subset I of the current
//! node's names, of size at most width(σ′), standing for the guarded set
//! the simulated run of A currently sits on.
//!
//! In select mode the next simulated move of A is chosen by reading the
//! label restricted to σ′ and I (shared names renamed ascending); the
//! carried names become the new view. In move mode the automaton
//! navigates T freely (edges whose map covers the view, in both
//! directions) until it expands the view to a strictly guarded superset
//! and switches back to select mode. Move-mode states take priority 1
//! for Eve and 0 for Adam, so the controlling player cannot win by
//! delaying the simulation forever; select-mode states keep their A
//! priority.

use super::{AMove, AutomataError, Dir, Owner, TwoWayAlternatingMuAutomaton};
use crate::codes::{trivially_or_strictly_guarded, NodeLabel};
use crate::syntax::GuardedSignature;
use std::collections::{BTreeMap, BTreeSet};

const STATE_CAP: usize = 200_000;

pub fn view_automaton(
    a: &TwoWayAlternatingMuAutomaton,
    sig: &GuardedSignature,
) -> Result<TwoWayAlternatingMuAutomaton, AutomataError> {
    let m = a.m;
    let k = sig.sigma.width();
    if k > m {
        return Err(AutomataError::SignatureMismatch(format!(
            "comparison width {k} exceeds the code width {m}"
        )));
    }
    for (rel, &arity) in &sig.sigma.relations {
        if a.sigma.arity(rel) != Some(arity) {
            return Err(AutomataError::SignatureMismatch(format!(
                "comparison relation {rel}/{arity} is not part of the automaton signature"
            )));
        }
    }
    // The construction reads off arbitrary restrictions and navigation
    // maps, so it needs the full code alphabet.
    if a.labels != super::code_label_universe(&a.sigma, m)?
        || a.actions != super::code_action_names(m)
    {
        return Err(AutomataError::SignatureMismatch(
            "view construction requires an automaton over the full code alphabet".into(),
        ));
    }

    let parsed: Vec<NodeLabel> = a
        .labels
        .iter()
        .map(|l| super::parse_label(l, &a.sigma))
        .collect::<Result<_, _>>()?;
    let maps = super::code_action_universe(m);

    // Views: subsets of {1..m} of size at most k, in mask order.
    let mut views: Vec<BTreeSet<usize>> = Vec::new();
    for mask in 0u64..(1 << m) {
        if mask.count_ones() as usize <= k {
            views.push(
                (1..=m)
                    .filter(|i| mask & (1 << (i - 1)) != 0)
                    .collect(),
            );
        }
    }
    let view_index: BTreeMap<BTreeSet<usize>, usize> = views
        .iter()
        .enumerate()
        .map(|(i, v)| (v.clone(), i))
        .collect();
    let empty_view = view_index[&BTreeSet::new()];

    let n_states = a
        .state_count()
        .saturating_mul(views.len())
        .saturating_mul(2);
    if n_states > STATE_CAP {
        return Err(AutomataError::Capacity(format!(
            "view automaton would need {n_states} states"
        )));
    }
    const SELECT: usize = 0;
    const MOVE: usize = 1;
    let id = |q: usize, vi: usize, mode: usize| (q * views.len() + vi) * 2 + mode;

    let mut out = TwoWayAlternatingMuAutomaton {
        sigma: a.sigma.clone(),
        m,
        props: a.props.clone(),
        actions: a.actions.clone(),
        labels: a.labels.clone(),
        owners: Vec::with_capacity(n_states),
        priorities: Vec::with_capacity(n_states),
        initial: 0,
        delta: BTreeMap::new(),
    };
    for q in 0..a.state_count() {
        for _vi in 0..views.len() {
            // Select, then move, matching `id`.
            out.owners.push(a.owners[q]);
            out.priorities.push(a.priorities[q]);
            out.owners.push(a.owners[q]);
            out.priorities
                .push(if a.owners[q] == Owner::Eve { 1 } else { 0 });
        }
    }
    out.initial = id(a.initial, empty_view, SELECT);

    // The label of the restriction to (σ′, I), if I fits the node:
    // σ′-facts with all names in I, renamed ascending into {1..|I|}.
    let label_idx = a.label_index();
    let restricted: Vec<Vec<Option<usize>>> = views
        .iter()
        .map(|i_set| {
            let asc: Vec<usize> = i_set.iter().copied().collect();
            let pos: BTreeMap<usize, usize> =
                asc.iter().enumerate().map(|(p, &name)| (name, p + 1)).collect();
            parsed
                .iter()
                .map(|tau| {
                    if i_set.iter().any(|&i| i > tau.n) {
                        return None;
                    }
                    let facts: BTreeSet<(String, Vec<usize>)> = tau
                        .facts
                        .iter()
                        .filter(|(rel, seq)| {
                            sig.sigma.contains(rel) && seq.iter().all(|j| pos.contains_key(j))
                        })
                        .map(|(rel, seq)| {
                            (rel.clone(), seq.iter().map(|j| pos[j]).collect())
                        })
                        .collect();
                    let label = NodeLabel {
                        n: i_set.len(),
                        facts,
                    };
                    label_idx.get(&super::render_label(&label)).copied()
                })
                .collect()
        })
        .collect();

    for q in 0..a.state_count() {
        for (vi, i_set) in views.iter().enumerate() {
            let asc: Vec<usize> = i_set.iter().copied().collect();
            for li in 0..a.labels.len() {
                // Select mode: read the restricted label, pick A's move,
                // carry the shared names into the view.
                if let Some(rli) = restricted[vi][li] {
                    let mut moves = Vec::new();
                    for mv in a.moves(q, rli) {
                        let carried: Option<BTreeSet<usize>> = match mv.dir {
                            Dir::Stay => Some(i_set.clone()),
                            Dir::Down => {
                                let rho = &maps[mv.action.expect("down move has an action")];
                                if rho.keys().all(|&i| i <= asc.len()) {
                                    Some(rho.keys().map(|&i| asc[i - 1]).collect())
                                } else {
                                    None
                                }
                            }
                            Dir::Up => {
                                let rho = &maps[mv.action.expect("up move has an action")];
                                if rho.values().all(|&j| j <= asc.len()) {
                                    Some(rho.values().map(|&j| asc[j - 1]).collect())
                                } else {
                                    None
                                }
                            }
                        };
                        if let Some(c) = carried {
                            moves.push(AMove::stay(id(mv.target, view_index[&c], MOVE)));
                        }
                    }
                    if !moves.is_empty() {
                        out.delta.insert((id(q, vi, SELECT), li), moves);
                    }
                }
                // Move mode: navigate along edges covering the view, or
                // expand to a strictly guarded superset and reselect.
                let mut moves = Vec::new();
                for (ai, rho) in maps.iter().enumerate() {
                    if i_set.iter().all(|i| rho.contains_key(i)) {
                        let target: BTreeSet<usize> = i_set.iter().map(|i| rho[i]).collect();
                        moves.push(AMove::down(ai, id(q, view_index[&target], MOVE)));
                    }
                    if i_set.iter().all(|i| rho.values().any(|v| v == i)) {
                        let inverse: BTreeMap<usize, usize> =
                            rho.iter().map(|(&x, &y)| (y, x)).collect();
                        let target: BTreeSet<usize> =
                            i_set.iter().map(|i| inverse[i]).collect();
                        moves.push(AMove::up(ai, id(q, view_index[&target], MOVE)));
                    }
                }
                let tau = &parsed[li];
                for (vi2, bigger) in views.iter().enumerate() {
                    if i_set.is_subset(bigger)
                        && bigger.iter().all(|&i| i <= tau.n)
                        && trivially_or_strictly_guarded(bigger, tau, sig)
                    {
                        moves.push(AMove::stay(id(q, vi2, SELECT)));
                    }
                }
                if !moves.is_empty() {
                    out.delta.insert((id(q, vi, MOVE), li), moves);
                }
            }
        }
    }
    Ok(out)
}
