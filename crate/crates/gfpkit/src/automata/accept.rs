//! Acceptance of tree codes, reduced to finite parity games.
//!
//! Three regimes:
//! - finite codes: the game runs on (state, node) pairs; parents are
//!   unique, so up moves are exact;
//! - regular codes and one-way automata (no up moves): the product over
//!   node types is exact as well;
//! - regular codes with up moves: positions carry a bounded stack of
//!   parent edges. While the stack is the full path from the unfolding
//!   root, up moves are exact; once frames have been dropped, the moving
//!   player resolves the ambiguity by picking any matching parent edge.
//!   The stack depth defaults to the automaton diameter and is validated
//!   against deep unfoldings by the test suite.

use super::parity::{solve_parity_game, ParityGame};
use super::{
    action_of, AutomataError, MuAutomaton, Owner, StateId, TwoWayAlternatingMuAutomaton,
};
use crate::codes::{NodeId, TreeCode};
use std::collections::HashMap;
use std::hash::Hash;

#[derive(Clone, Copy, Debug)]
pub struct AcceptOptions {
    /// Parent-context depth for two-way runs on regular codes.
    /// `None` uses the automaton diameter (at least 1).
    pub stack_cap: Option<usize>,
    /// Hard bound on game positions before giving up with a capacity
    /// error.
    pub position_cap: usize,
}

impl Default for AcceptOptions {
    fn default() -> Self {
        AcceptOptions {
            stack_cap: None,
            position_cap: 1_500_000,
        }
    }
}

/// Per-code tables shared by the game builders.
struct CodeView {
    label_of: Vec<usize>,
    /// Action index of each edge, if its map is in the automaton alphabet.
    edge_action: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    parents: Vec<Vec<usize>>,
}

fn view_code(
    t: &TreeCode,
    labels: &[super::Label],
    actions: &[String],
) -> Result<CodeView, AutomataError> {
    t.structural_check()?;
    let label_idx: HashMap<&super::Label, usize> =
        labels.iter().enumerate().map(|(i, l)| (l, i)).collect();
    let action_idx: HashMap<&str, usize> = actions
        .iter()
        .enumerate()
        .map(|(i, a)| (a.as_str(), i))
        .collect();
    let mut label_of = Vec::with_capacity(t.labels.len());
    for (v, label) in t.labels.iter().enumerate() {
        let rendered = super::render_label(label);
        match label_idx.get(&rendered) {
            Some(&i) => label_of.push(i),
            None => {
                return Err(AutomataError::OutOfAlphabet(format!(
                    "label of node {v} ({rendered:?}) is outside the automaton alphabet"
                )));
            }
        }
    }
    let mut edge_action = Vec::with_capacity(t.edges.len());
    let mut children = vec![Vec::new(); t.labels.len()];
    let mut parents = vec![Vec::new(); t.labels.len()];
    for (ei, e) in t.edges.iter().enumerate() {
        edge_action.push(action_idx.get(action_of(&e.rho).as_str()).copied());
        children[e.src].push(ei);
        parents[e.dst].push(ei);
    }
    Ok(CodeView {
        label_of,
        edge_action,
        children,
        parents,
    })
}

/// Deduplicating position table: returns the game index of `p`, adding a
/// fresh position (and queueing it for expansion) the first time.
fn intern<P: Clone + Eq + Hash>(
    map: &mut HashMap<P, usize>,
    game: &mut ParityGame,
    worklist: &mut Vec<(P, usize)>,
    owner: Owner,
    priority: usize,
    p: P,
) -> usize {
    if let Some(&i) = map.get(&p) {
        return i;
    }
    let i = game.add_position(owner, priority);
    map.insert(p.clone(), i);
    worklist.push((p, i));
    i
}

/// Does Eve win the acceptance game of a two-way alternating automaton
/// on the tree code `t`, starting in the initial state at node `v0`?
pub fn accepts(
    a: &TwoWayAlternatingMuAutomaton,
    t: &TreeCode,
    v0: NodeId,
) -> Result<bool, AutomataError> {
    accepts_with(a, t, v0, AcceptOptions::default())
}

pub fn accepts_with(
    a: &TwoWayAlternatingMuAutomaton,
    t: &TreeCode,
    v0: NodeId,
    opts: AcceptOptions,
) -> Result<bool, AutomataError> {
    if v0 >= t.labels.len() {
        return Err(AutomataError::Malformed(format!(
            "start node {v0} out of range"
        )));
    }
    let view = view_code(t, &a.labels, &a.actions)?;
    let has_up = a
        .delta
        .values()
        .any(|moves| moves.iter().any(|mv| mv.dir == super::Dir::Up));
    if !t.regular || !has_up {
        flat_two_way_game(a, t, v0, &view, !t.regular, opts.position_cap)
    } else {
        stacked_two_way_game(a, t, v0, &view, opts)
    }
}

/// The exact product game, used for finite codes (unique parents) and
/// for automata without up moves (where parents never matter).
fn flat_two_way_game(
    a: &TwoWayAlternatingMuAutomaton,
    t: &TreeCode,
    v0: NodeId,
    view: &CodeView,
    finite: bool,
    position_cap: usize,
) -> Result<bool, AutomataError> {
    // For finite codes every non-root node has exactly one parent edge.
    let parent_edge: Vec<Option<usize>> = (0..t.labels.len())
        .map(|v| view.parents[v].first().copied())
        .collect();
    let mut game = ParityGame::default();
    let mut index: HashMap<(StateId, NodeId), usize> = HashMap::new();
    let mut worklist: Vec<((StateId, NodeId), usize)> = Vec::new();
    let add = |map: &mut HashMap<(StateId, NodeId), usize>,
               game: &mut ParityGame,
               wl: &mut Vec<((StateId, NodeId), usize)>,
               q: StateId,
               v: NodeId| {
        intern(map, game, wl, a.owners[q], a.priorities[q], (q, v))
    };
    let start = add(&mut index, &mut game, &mut worklist, a.initial, v0);
    let mut cursor = 0;
    while cursor < worklist.len() {
        if game.len() > position_cap {
            return Err(AutomataError::Capacity(format!(
                "acceptance game exceeded {position_cap} positions"
            )));
        }
        let ((q, v), here) = worklist[cursor];
        cursor += 1;
        let mut succs = Vec::new();
        for mv in a.moves(q, view.label_of[v]) {
            match mv.dir {
                super::Dir::Stay => {
                    succs.push(add(&mut index, &mut game, &mut worklist, mv.target, v));
                }
                super::Dir::Down => {
                    for &ei in &view.children[v] {
                        if view.edge_action[ei] == mv.action {
                            let w = t.edges[ei].dst;
                            succs.push(add(&mut index, &mut game, &mut worklist, mv.target, w));
                        }
                    }
                }
                super::Dir::Up => {
                    if finite {
                        if let Some(ei) = parent_edge[v] {
                            if view.edge_action[ei] == mv.action {
                                let w = t.edges[ei].src;
                                succs.push(add(
                                    &mut index,
                                    &mut game,
                                    &mut worklist,
                                    mv.target,
                                    w,
                                ));
                            }
                        }
                    }
                    // Regular codes only reach this builder when the
                    // automaton has no up moves at all.
                }
            }
        }
        succs.sort_unstable();
        succs.dedup();
        game.edges[here] = succs;
    }
    game.initial = start;
    Ok(solve_parity_game(&game)?.eve_wins[start])
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct StackPos {
    q: StateId,
    v: NodeId,
    stack: Vec<u32>,
    exact: bool,
}

/// The bounded parent-context game for two-way runs on regular codes.
fn stacked_two_way_game(
    a: &TwoWayAlternatingMuAutomaton,
    t: &TreeCode,
    v0: NodeId,
    view: &CodeView,
    opts: AcceptOptions,
) -> Result<bool, AutomataError> {
    let cap = opts.stack_cap.unwrap_or_else(|| a.diameter().max(1));
    let mut game = ParityGame::default();
    let mut index: HashMap<StackPos, usize> = HashMap::new();
    let mut worklist: Vec<(StackPos, usize)> = Vec::new();
    let add = |map: &mut HashMap<StackPos, usize>,
               game: &mut ParityGame,
               wl: &mut Vec<(StackPos, usize)>,
               p: StackPos| {
        intern(map, game, wl, a.owners[p.q], a.priorities[p.q], p)
    };
    let start_pos = StackPos {
        q: a.initial,
        v: v0,
        stack: Vec::new(),
        // An empty stack is the full path only when the run starts at the
        // root of the unfolding.
        exact: v0 == t.root,
    };
    let start = add(&mut index, &mut game, &mut worklist, start_pos);
    let mut cursor = 0;
    while cursor < worklist.len() {
        if game.len() > opts.position_cap {
            return Err(AutomataError::Capacity(format!(
                "acceptance game exceeded {} positions (parent-context depth {cap})",
                opts.position_cap
            )));
        }
        let (pos, here) = worklist[cursor].clone();
        cursor += 1;
        let mut succs = Vec::new();
        for mv in a.moves(pos.q, view.label_of[pos.v]) {
            match mv.dir {
                super::Dir::Stay => {
                    succs.push(add(
                        &mut index,
                        &mut game,
                        &mut worklist,
                        StackPos {
                            q: mv.target,
                            ..pos.clone()
                        },
                    ));
                }
                super::Dir::Down => {
                    for &ei in &view.children[pos.v] {
                        if view.edge_action[ei] != mv.action {
                            continue;
                        }
                        let mut stack = pos.stack.clone();
                        let mut exact = pos.exact;
                        stack.push(ei as u32);
                        if stack.len() > cap {
                            stack.remove(0);
                            exact = false;
                        }
                        succs.push(add(
                            &mut index,
                            &mut game,
                            &mut worklist,
                            StackPos {
                                q: mv.target,
                                v: t.edges[ei].dst,
                                stack,
                                exact,
                            },
                        ));
                    }
                }
                super::Dir::Up => {
                    if let Some(&top) = pos.stack.last() {
                        let ei = top as usize;
                        if view.edge_action[ei] == mv.action {
                            let mut stack = pos.stack.clone();
                            stack.pop();
                            succs.push(add(
                                &mut index,
                                &mut game,
                                &mut worklist,
                                StackPos {
                                    q: mv.target,
                                    v: t.edges[ei].src,
                                    stack,
                                    exact: pos.exact,
                                },
                            ));
                        }
                    } else if !pos.exact {
                        // Unknown parent context: the mover picks any
                        // matching incoming edge.
                        for &ei in &view.parents[pos.v] {
                            if view.edge_action[ei] == mv.action {
                                succs.push(add(
                                    &mut index,
                                    &mut game,
                                    &mut worklist,
                                    StackPos {
                                        q: mv.target,
                                        v: t.edges[ei].src,
                                        stack: Vec::new(),
                                        exact: false,
                                    },
                                ));
                            }
                        }
                    }
                    // Exact empty stack: at the unfolding root, up moves
                    // are dead for the mover.
                }
            }
        }
        succs.sort_unstable();
        succs.dedup();
        game.edges[here] = succs;
    }
    game.initial = start;
    Ok(solve_parity_game(&game)?.eve_wins[start])
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum MuPos {
    /// Eve picks a demand set.
    State(StateId, NodeId),
    /// Adam picks a demand from the chosen set.
    Set(StateId, NodeId, usize),
    /// Eve answers a demand with a matching child.
    Demand(NodeId, usize, StateId),
}

/// Does Eve win the acceptance game of a nondeterministic μ-automaton on
/// the tree code `t` from node `v0`? One-way, so exact on regular codes.
pub fn mu_accepts(m: &MuAutomaton, t: &TreeCode, v0: NodeId) -> Result<bool, AutomataError> {
    mu_accepts_with(m, t, v0, AcceptOptions::default())
}

pub fn mu_accepts_with(
    m: &MuAutomaton,
    t: &TreeCode,
    v0: NodeId,
    opts: AcceptOptions,
) -> Result<bool, AutomataError> {
    if v0 >= t.labels.len() {
        return Err(AutomataError::Malformed(format!(
            "start node {v0} out of range"
        )));
    }
    let view = view_code(t, &m.labels, &m.actions)?;
    let pmin = m.priorities.iter().copied().min().unwrap_or(0);
    let mut game = ParityGame::default();
    let mut index: HashMap<MuPos, usize> = HashMap::new();
    let mut worklist: Vec<(MuPos, usize)> = Vec::new();
    let add = |map: &mut HashMap<MuPos, usize>,
               game: &mut ParityGame,
               wl: &mut Vec<(MuPos, usize)>,
               p: MuPos| {
        let (owner, priority) = match &p {
            MuPos::State(q, _) => (Owner::Eve, m.priorities[*q]),
            MuPos::Set(..) => (Owner::Adam, pmin),
            MuPos::Demand(..) => (Owner::Eve, pmin),
        };
        intern(map, game, wl, owner, priority, p)
    };
    let start = add(
        &mut index,
        &mut game,
        &mut worklist,
        MuPos::State(m.initial, v0),
    );
    let mut cursor = 0;
    while cursor < worklist.len() {
        if game.len() > opts.position_cap {
            return Err(AutomataError::Capacity(format!(
                "acceptance game exceeded {} positions",
                opts.position_cap
            )));
        }
        let (pos, here) = worklist[cursor].clone();
        cursor += 1;
        let mut succs = Vec::new();
        match pos {
            MuPos::State(q, v) => {
                for si in 0..m.choices(q, view.label_of[v]).len() {
                    succs.push(add(
                        &mut index,
                        &mut game,
                        &mut worklist,
                        MuPos::Set(q, v, si),
                    ));
                }
            }
            MuPos::Set(q, v, si) => {
                for &(act, r) in &m.choices(q, view.label_of[v])[si] {
                    succs.push(add(
                        &mut index,
                        &mut game,
                        &mut worklist,
                        MuPos::Demand(v, act, r),
                    ));
                }
            }
            MuPos::Demand(v, act, r) => {
                for &ei in &view.children[v] {
                    if view.edge_action[ei] == Some(act) {
                        succs.push(add(
                            &mut index,
                            &mut game,
                            &mut worklist,
                            MuPos::State(r, t.edges[ei].dst),
                        ));
                    }
                }
            }
        }
        succs.sort_unstable();
        succs.dedup();
        game.edges[here] = succs;
    }
    game.initial = start;
    Ok(solve_parity_game(&game)?.eve_wins[start])
}

#[cfg(test)]
mod tests {
    use super::super::{AMove, Owner};
    use super::*;
    use crate::codes::{EdgeMap, NodeLabel};
    use crate::syntax::Signature;
    use std::collections::BTreeMap;

    fn sig_p() -> Signature {
        Signature::new([("P", 1)])
    }

    /// Two-node finite code: root (D0) with a child (D1, P_1), linked by
    /// the empty edge map.
    fn two_node_code() -> TreeCode {
        let mut t = TreeCode::new(1, sig_p());
        let root = t.add_node(NodeLabel::new(0));
        let child = t.add_node(NodeLabel::with_facts(1, [("P", vec![1])]));
        t.add_edge(root, child, EdgeMap::new());
        t
    }

    fn all_accepting(sigma: &Signature, m: usize) -> TwoWayAlternatingMuAutomaton {
        let mut a = TwoWayAlternatingMuAutomaton::over_code_alphabet(sigma, m).unwrap();
        let q = a.add_state(Owner::Adam, 0);
        a.initial = q;
        a
    }

    #[test]
    fn the_all_accepting_automaton_accepts_everything() {
        let t = two_node_code();
        let a = all_accepting(&sig_p(), 1);
        assert!(accepts(&a, &t, t.root).unwrap());
        assert!(!accepts(&a.dual(), &t, t.root).unwrap());
    }

    #[test]
    fn walk_down_then_up_and_check_the_root_label() {
        // q0 at the root: go down any empty-map edge to q1; q1 walks back
        // up and q2 then requires the label to be D0 (stay into the
        // accepting sink on D0 labels only).
        let sigma = sig_p();
        let mut a = TwoWayAlternatingMuAutomaton::over_code_alphabet(&sigma, 1).unwrap();
        let q0 = a.add_state(Owner::Eve, 0);
        let q1 = a.add_state(Owner::Eve, 0);
        let q2 = a.add_state(Owner::Eve, 0);
        let tt = a.add_state(Owner::Adam, 0);
        a.initial = q0;
        let empty_act = a
            .actions
            .iter()
            .position(|s| s == "rho")
            .expect("empty action present");
        for l in 0..a.labels.len() {
            a.delta.insert((q0, l), vec![AMove::down(empty_act, q1)]);
            a.delta.insert((q1, l), vec![AMove::up(empty_act, q2)]);
            if a.labels[l].contains("D0") {
                a.delta.insert((q2, l), vec![AMove::stay(tt)]);
            }
        }
        let t = two_node_code();
        assert!(accepts(&a, &t, t.root).unwrap());
        // Starting at the child, the down move has nowhere to go.
        assert!(!accepts(&a, &t, 1).unwrap());
    }

    #[test]
    fn up_at_the_root_is_a_dead_move() {
        let sigma = sig_p();
        let mut a = TwoWayAlternatingMuAutomaton::over_code_alphabet(&sigma, 1).unwrap();
        let q0 = a.add_state(Owner::Eve, 0);
        let tt = a.add_state(Owner::Adam, 0);
        a.initial = q0;
        for l in 0..a.labels.len() {
            a.delta.insert((q0, l), vec![AMove::up(0, tt)]);
        }
        let t = two_node_code();
        assert!(!accepts(&a, &t, t.root).unwrap());
    }

    #[test]
    fn out_of_alphabet_labels_are_reported() {
        let t = two_node_code();
        // Automaton over a signature without P: the child label is alien.
        let a = all_accepting(&Signature::new(Vec::<(String, usize)>::new()), 1);
        assert!(matches!(
            accepts(&a, &t, t.root),
            Err(AutomataError::OutOfAlphabet(_))
        ));
    }

    #[test]
    fn mu_automaton_empty_demand_set_accepts_and_missing_entry_rejects() {
        let sigma = sig_p();
        let t = two_node_code();
        let labels = super::super::code_label_universe(&sigma, 1).unwrap();
        let root_label = labels.iter().position(|l| l.contains("D0")).unwrap();
        let mut delta = BTreeMap::new();
        delta.insert((0usize, root_label), vec![Vec::new()]);
        let m = MuAutomaton {
            sigma: sigma.clone(),
            m: 1,
            props: super::super::code_props(&sigma, 1),
            actions: super::super::code_action_names(1),
            labels,
            priorities: vec![0],
            initial: 0,
            delta,
        };
        // S = ∅ at the root: accept without demands.
        assert!(mu_accepts(&m, &t, t.root).unwrap());
        // At the child the state has no entry: Eve is stuck.
        assert!(!mu_accepts(&m, &t, 1).unwrap());
    }

    #[test]
    fn mu_automaton_demands_are_answered_by_children() {
        let sigma = sig_p();
        let t = two_node_code();
        let labels = super::super::code_label_universe(&sigma, 1).unwrap();
        let actions = super::super::code_action_names(1);
        let empty_act = actions.iter().position(|s| s == "rho").unwrap();
        let root_l = labels
            .iter()
            .position(|l| {
                l == &["D0".to_string()]
                    .into_iter()
                    .collect::<super::super::Label>()
            })
            .unwrap();
        let child_l = labels
            .iter()
            .position(|l| {
                l == &["D1".to_string(), "P_1".to_string()]
                    .into_iter()
                    .collect::<super::super::Label>()
            })
            .unwrap();
        let mut delta = BTreeMap::new();
        // State 0 at a D0 label demands a child in state 1 via the empty
        // map; state 1 accepts exactly at the P-child label.
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
        assert!(mu_accepts(&m, &t, t.root).unwrap());
        // Remove the child fact: the demand still finds a child, but the
        // child state has no entry there.
        let mut bare = TreeCode::new(1, sig_p());
        let root = bare.add_node(NodeLabel::new(0));
        let child = bare.add_node(NodeLabel::new(1));
        bare.add_edge(root, child, EdgeMap::new());
        assert!(!mu_accepts(&m, &bare, bare.root).unwrap());
    }
}
