//! Automata over tree codes: μ-calculus formulas, two-way alternating
//! μ-automata, nondeterministic μ-automata, boolean closure, acceptance
//! via parity games, the consistency / forward / view constructions,
//! nondeterminization, and emptiness testing.
//!
//! All automata read trees whose node labels are finite sets of unary
//! propositions (spelled like `D2` or `R_1_2`) and whose edges carry
//! actions (spelled like `rho_1to2`, encoding a partial injective name
//! map). Labels are kept as an explicit, finite universe inside each
//! automaton, and the transition table is keyed by `(state, label)`;
//! a missing entry means the owner of the state is stuck and loses.

mod accept;
mod consistency;
mod emptiness;
mod forward;
pub mod mu;
mod nondet;
pub mod parity;
mod view;

pub use accept::{accepts, mu_accepts, AcceptOptions};
pub use consistency::consistency_automaton;
pub use emptiness::{emptiness, EmptinessResult};
pub use forward::forward_automaton;
pub(crate) use forward::forward_core;
pub use mu::{automaton_to_mu, mu_to_automaton, mu_to_automaton_over, MuFormula};
pub use nondet::nondeterminize;
pub use view::view_automaton;

use crate::codes::{fact_prop, CodeError, EdgeMap, NodeLabel};
use crate::syntax::Signature;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AutomataError {
    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("out of alphabet: {0}")]
    OutOfAlphabet(String),
    #[error("malformed automaton: {0}")]
    Malformed(String),
    #[error("code error: {0}")]
    Code(#[from] CodeError),
}

pub type StateId = usize;
pub type LabelId = usize;
pub type ActionId = usize;

/// A node label seen as a set of proposition spellings.
pub type Label = BTreeSet<String>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Owner {
    Eve,
    Adam,
}

impl Owner {
    pub fn flip(self) -> Owner {
        match self {
            Owner::Eve => Owner::Adam,
            Owner::Adam => Owner::Eve,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dir {
    Up,
    Stay,
    Down,
}

/// One move of a two-way alternating automaton: a direction, the action
/// the traversed edge must carry (ignored for `Stay`), and the next state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AMove {
    pub dir: Dir,
    pub action: Option<ActionId>,
    pub target: StateId,
}

impl AMove {
    pub fn stay(target: StateId) -> AMove {
        AMove {
            dir: Dir::Stay,
            action: None,
            target,
        }
    }

    pub fn down(action: ActionId, target: StateId) -> AMove {
        AMove {
            dir: Dir::Down,
            action: Some(action),
            target,
        }
    }

    pub fn up(action: ActionId, target: StateId) -> AMove {
        AMove {
            dir: Dir::Up,
            action: Some(action),
            target,
        }
    }
}

/// A two-way alternating μ-automaton. At a tree node `v` in state `q`,
/// the owner of `q` picks both a move `(dir, action, target)` from
/// `delta[(q, label(v))]` and a neighbour of `v` in that direction whose
/// connecting edge carries the action; the run continues there in the
/// target state. A stuck owner loses. An infinite run is won by Eve iff
/// the maximum priority occurring infinitely often is even.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwoWayAlternatingMuAutomaton {
    pub sigma: Signature,
    pub m: usize,
    pub props: Vec<String>,
    pub actions: Vec<String>,
    pub labels: Vec<Label>,
    pub owners: Vec<Owner>,
    pub priorities: Vec<usize>,
    pub initial: StateId,
    pub delta: BTreeMap<(StateId, LabelId), Vec<AMove>>,
}

/// A nondeterministic μ-automaton (one-way). At node `v` in state `q`,
/// Eve picks a demand set `S` from `delta[(q, label(v))]`; Adam picks a
/// demand `(action, target)` from `S` (stuck if `S` is empty, so `S = ∅`
/// is an unconditional accept of the subtree); Eve answers with a child
/// of `v` along an edge carrying the action.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MuAutomaton {
    pub sigma: Signature,
    pub m: usize,
    pub props: Vec<String>,
    pub actions: Vec<String>,
    pub labels: Vec<Label>,
    pub priorities: Vec<usize>,
    pub initial: StateId,
    pub delta: BTreeMap<(StateId, LabelId), Vec<Vec<(ActionId, StateId)>>>,
}

// ---------------------------------------------------------------------
// Alphabet spelling

/// All proposition spellings over the code alphabet: `D0..Dm` plus every
/// fact predicate with indices drawn from `{1..m}`.
pub fn code_props(sigma: &Signature, m: usize) -> Vec<String> {
    let alpha = crate::codes::build_alphabet(sigma, m);
    let mut out = alpha.domain_props();
    out.extend(
        alpha
            .fact_predicates()
            .into_iter()
            .map(|(r, seq)| fact_prop(&r, &seq)),
    );
    out
}

/// Spell a node label as a set of propositions.
pub fn render_label(label: &NodeLabel) -> Label {
    label.props().into_iter().collect()
}

/// Recover a node label from its proposition spelling. The signature is
/// needed to split fact spellings unambiguously.
pub fn parse_label(props: &Label, sigma: &Signature) -> Result<NodeLabel, AutomataError> {
    let mut n = None;
    let mut facts = BTreeSet::new();
    for p in props {
        if let Some(rest) = p.strip_prefix('D') {
            if let Ok(v) = rest.parse::<usize>() {
                if n.replace(v).is_some() {
                    return Err(AutomataError::Malformed(format!(
                        "label {props:?} carries two domain propositions"
                    )));
                }
                continue;
            }
        }
        let (rel, seq) = parse_fact_prop(p, sigma)?;
        facts.insert((rel, seq));
    }
    let n = n.ok_or_else(|| {
        AutomataError::Malformed(format!("label {props:?} has no domain proposition"))
    })?;
    Ok(NodeLabel { n, facts })
}

/// Split a fact spelling `R_1_2` into the relation name and index list.
pub fn parse_fact_prop(p: &str, sigma: &Signature) -> Result<(String, Vec<usize>), AutomataError> {
    // Relation names may contain underscores, so try every split point
    // that names a declared relation of the right arity.
    for (rel, &arity) in &sigma.relations {
        if let Some(rest) = p.strip_prefix(rel.as_str()) {
            let parts: Vec<&str> = rest.split('_').collect();
            if parts.len() == arity + 1 && parts[0].is_empty() {
                let seq: Option<Vec<usize>> =
                    parts[1..].iter().map(|s| s.parse::<usize>().ok()).collect();
                if let Some(seq) = seq {
                    return Ok((rel.clone(), seq));
                }
            }
        }
    }
    Err(AutomataError::Malformed(format!(
        "proposition {p} does not spell a fact over the signature"
    )))
}

/// Spell an edge map as an action name: `rho` followed by one `_ito j`
/// block per pair, e.g. `{1→2, 3→1}` becomes `rho_1to2_3to1`.
pub fn action_of(rho: &EdgeMap) -> String {
    let mut out = String::from("rho");
    for (i, j) in rho {
        out.push_str(&format!("_{i}to{j}"));
    }
    out
}

/// Recover an edge map from its action name.
pub fn parse_action(name: &str) -> Result<EdgeMap, AutomataError> {
    let rest = name
        .strip_prefix("rho")
        .ok_or_else(|| AutomataError::Malformed(format!("action {name} lacks the rho prefix")))?;
    let mut out = EdgeMap::new();
    if rest.is_empty() {
        return Ok(out);
    }
    for part in rest.trim_start_matches('_').split('_') {
        let (i, j) = part
            .split_once("to")
            .ok_or_else(|| AutomataError::Malformed(format!("bad action block {part}")))?;
        let (i, j) = (
            i.parse::<usize>()
                .map_err(|_| AutomataError::Malformed(format!("bad action block {part}")))?,
            j.parse::<usize>()
                .map_err(|_| AutomataError::Malformed(format!("bad action block {part}")))?,
        );
        out.insert(i, j);
    }
    Ok(out)
}

/// Every valid node label over the code alphabet, spelled as prop sets.
pub fn code_label_universe(sigma: &Signature, m: usize) -> Result<Vec<Label>, AutomataError> {
    let alpha = crate::codes::build_alphabet(sigma, m);
    Ok(alpha.node_labels()?.iter().map(render_label).collect())
}

/// Every partial injective map on `{1..m}`, as edge maps.
pub fn code_action_universe(m: usize) -> Vec<EdgeMap> {
    crate::codes::build_alphabet(&Signature::new(Vec::<(String, usize)>::new()), m).edge_maps()
}

/// Every action name over `{1..m}`.
pub fn code_action_names(m: usize) -> Vec<String> {
    code_action_universe(m).iter().map(action_of).collect()
}

impl TwoWayAlternatingMuAutomaton {
    /// An automaton skeleton over the full code alphabet of `(sigma, m)`.
    pub fn over_code_alphabet(sigma: &Signature, m: usize) -> Result<Self, AutomataError> {
        Ok(TwoWayAlternatingMuAutomaton {
            sigma: sigma.clone(),
            m,
            props: code_props(sigma, m),
            actions: code_action_names(m),
            labels: code_label_universe(sigma, m)?,
            owners: Vec::new(),
            priorities: Vec::new(),
            initial: 0,
            delta: BTreeMap::new(),
        })
    }

    pub fn state_count(&self) -> usize {
        self.owners.len()
    }

    pub fn add_state(&mut self, owner: Owner, priority: usize) -> StateId {
        self.owners.push(owner);
        self.priorities.push(priority);
        self.owners.len() - 1
    }

    pub fn label_index(&self) -> HashMap<&Label, LabelId> {
        self.labels.iter().enumerate().map(|(i, l)| (l, i)).collect()
    }

    pub fn action_index(&self) -> HashMap<&str, ActionId> {
        self.actions
            .iter()
            .enumerate()
            .map(|(i, a)| (a.as_str(), i))
            .collect()
    }

    pub fn moves(&self, q: StateId, label: LabelId) -> &[AMove] {
        self.delta.get(&(q, label)).map_or(&[], |v| v.as_slice())
    }

    /// The dual automaton: ownership swapped and every priority raised by
    /// one, accepting exactly the complement on every tree.
    pub fn dual(&self) -> Self {
        let mut out = self.clone();
        out.owners = self.owners.iter().map(|o| o.flip()).collect();
        out.priorities = self.priorities.iter().map(|p| p + 1).collect();
        out
    }

    /// Longest shortest path between reachable states in the move graph;
    /// used as the default parent-context depth for acceptance on regular
    /// codes.
    pub fn diameter(&self) -> usize {
        let n = self.state_count();
        let mut adj: Vec<BTreeSet<StateId>> = vec![BTreeSet::new(); n];
        for ((q, _), moves) in &self.delta {
            for mv in moves {
                adj[*q].insert(mv.target);
            }
        }
        let mut best = 0;
        for start in 0..n {
            let mut dist = vec![usize::MAX; n];
            dist[start] = 0;
            let mut queue = std::collections::VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &w in &adj[v] {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[v] + 1;
                        best = best.max(dist[w]);
                        queue.push_back(w);
                    }
                }
            }
        }
        best
    }
}

impl MuAutomaton {
    pub fn state_count(&self) -> usize {
        self.priorities.len()
    }

    pub fn label_index(&self) -> HashMap<&Label, LabelId> {
        self.labels.iter().enumerate().map(|(i, l)| (l, i)).collect()
    }

    pub fn choices(&self, q: StateId, label: LabelId) -> &[Vec<(ActionId, StateId)>] {
        self.delta.get(&(q, label)).map_or(&[], |v| v.as_slice())
    }
}

// ---------------------------------------------------------------------
// Boolean combinations

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoolOp {
    Union,
    Intersect,
    Complement,
}

/// Boolean closure. Union and intersection are the disjoint union of the
/// two automata plus a fresh initial state whose owner (Eve for union,
/// Adam for intersection) picks which component to run; complement is
/// the dual and ignores the second argument.
pub fn combine(
    a1: &TwoWayAlternatingMuAutomaton,
    a2: &TwoWayAlternatingMuAutomaton,
    op: BoolOp,
) -> Result<TwoWayAlternatingMuAutomaton, AutomataError> {
    if op == BoolOp::Complement {
        return Ok(a1.dual());
    }
    if a1.props != a2.props || a1.actions != a2.actions || a1.labels != a2.labels {
        return Err(AutomataError::SignatureMismatch(
            "boolean combination of automata over different alphabets".into(),
        ));
    }
    let mut out = a1.clone();
    let shift = a1.state_count();
    out.owners.extend(a2.owners.iter().copied());
    out.priorities.extend(a2.priorities.iter().copied());
    for ((q, l), moves) in &a2.delta {
        out.delta.insert(
            (q + shift, *l),
            moves
                .iter()
                .map(|mv| AMove {
                    dir: mv.dir,
                    action: mv.action,
                    target: mv.target + shift,
                })
                .collect(),
        );
    }
    let owner = match op {
        BoolOp::Union => Owner::Eve,
        BoolOp::Intersect => Owner::Adam,
        BoolOp::Complement => unreachable!(),
    };
    let init = out.add_state(owner, 0);
    for l in 0..out.labels.len() {
        out.delta.insert(
            (init, l),
            vec![AMove::stay(a1.initial), AMove::stay(a2.initial + shift)],
        );
    }
    out.initial = init;
    Ok(out)
}

// ---------------------------------------------------------------------
// JSON interface

#[derive(Serialize, Deserialize)]
struct StateDto {
    owner: String,
    priority: usize,
}

#[derive(Serialize, Deserialize)]
struct TransitionDto {
    state: usize,
    label: Vec<String>,
    moves: Vec<(String, String, usize)>,
}

#[derive(Serialize, Deserialize)]
struct ChoiceTransitionDto {
    state: usize,
    label: Vec<String>,
    choices: Vec<Vec<(String, usize)>>,
}

#[derive(Serialize, Deserialize)]
struct TwoWayDto {
    kind: String,
    sigma: BTreeMap<String, usize>,
    m: usize,
    props: Vec<String>,
    actions: Vec<String>,
    labels: Vec<Vec<String>>,
    initial: usize,
    states: Vec<StateDto>,
    transitions: Vec<TransitionDto>,
}

#[derive(Serialize, Deserialize)]
struct MuDto {
    kind: String,
    sigma: BTreeMap<String, usize>,
    m: usize,
    props: Vec<String>,
    actions: Vec<String>,
    labels: Vec<Vec<String>>,
    initial: usize,
    states: Vec<StateDto>,
    transitions: Vec<ChoiceTransitionDto>,
}

fn dir_name(d: Dir) -> &'static str {
    match d {
        Dir::Up => "up",
        Dir::Stay => "stay",
        Dir::Down => "down",
    }
}

fn parse_dir(s: &str) -> Result<Dir, AutomataError> {
    match s {
        "up" => Ok(Dir::Up),
        "stay" => Ok(Dir::Stay),
        "down" => Ok(Dir::Down),
        other => Err(AutomataError::Malformed(format!("bad direction {other}"))),
    }
}

pub fn aut_to_json(a: &TwoWayAlternatingMuAutomaton) -> String {
    let dto = TwoWayDto {
        kind: "two_way_alternating".into(),
        sigma: a.sigma.relations.clone(),
        m: a.m,
        props: a.props.clone(),
        actions: a.actions.clone(),
        labels: a.labels.iter().map(|l| l.iter().cloned().collect()).collect(),
        initial: a.initial,
        states: a
            .owners
            .iter()
            .zip(&a.priorities)
            .map(|(o, p)| StateDto {
                owner: match o {
                    Owner::Eve => "E".into(),
                    Owner::Adam => "A".into(),
                },
                priority: *p,
            })
            .collect(),
        transitions: a
            .delta
            .iter()
            .map(|((q, l), moves)| TransitionDto {
                state: *q,
                label: a.labels[*l].iter().cloned().collect(),
                moves: moves
                    .iter()
                    .map(|mv| {
                        (
                            dir_name(mv.dir).to_string(),
                            mv.action
                                .map_or_else(|| "-".to_string(), |x| a.actions[x].clone()),
                            mv.target,
                        )
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&dto).expect("automaton serialization cannot fail")
}

pub fn aut_from_json(text: &str) -> Result<TwoWayAlternatingMuAutomaton, AutomataError> {
    let dto: TwoWayDto =
        serde_json::from_str(text).map_err(|e| AutomataError::Malformed(e.to_string()))?;
    let labels: Vec<Label> = dto
        .labels
        .into_iter()
        .map(|l| l.into_iter().collect())
        .collect();
    let label_idx: HashMap<&Label, usize> =
        labels.iter().enumerate().map(|(i, l)| (l, i)).collect();
    let action_idx: HashMap<&str, usize> = dto
        .actions
        .iter()
        .enumerate()
        .map(|(i, a)| (a.as_str(), i))
        .collect();
    let mut owners = Vec::new();
    let mut priorities = Vec::new();
    for s in &dto.states {
        owners.push(match s.owner.as_str() {
            "E" => Owner::Eve,
            "A" => Owner::Adam,
            other => {
                return Err(AutomataError::Malformed(format!("bad owner {other}")));
            }
        });
        priorities.push(s.priority);
    }
    let mut delta = BTreeMap::new();
    for t in &dto.transitions {
        let label: Label = t.label.iter().cloned().collect();
        let l = *label_idx
            .get(&label)
            .ok_or_else(|| AutomataError::Malformed(format!("unknown label {label:?}")))?;
        let mut moves = Vec::new();
        for (d, act, target) in &t.moves {
            let dir = parse_dir(d)?;
            let action = if act == "-" {
                None
            } else {
                Some(*action_idx.get(act.as_str()).ok_or_else(|| {
                    AutomataError::Malformed(format!("unknown action {act}"))
                })?)
            };
            if *target >= owners.len() {
                return Err(AutomataError::Malformed(format!(
                    "move target {target} out of range"
                )));
            }
            moves.push(AMove {
                dir,
                action,
                target: *target,
            });
        }
        delta.insert((t.state, l), moves);
    }
    Ok(TwoWayAlternatingMuAutomaton {
        sigma: Signature {
            relations: dto.sigma,
        },
        m: dto.m,
        props: dto.props,
        actions: dto.actions,
        labels,
        owners,
        priorities,
        initial: dto.initial,
        delta,
    })
}

pub fn mu_aut_to_json(a: &MuAutomaton) -> String {
    let dto = MuDto {
        kind: "mu".into(),
        sigma: a.sigma.relations.clone(),
        m: a.m,
        props: a.props.clone(),
        actions: a.actions.clone(),
        labels: a.labels.iter().map(|l| l.iter().cloned().collect()).collect(),
        initial: a.initial,
        states: a
            .priorities
            .iter()
            .map(|p| StateDto {
                owner: "E".into(),
                priority: *p,
            })
            .collect(),
        transitions: a
            .delta
            .iter()
            .map(|((q, l), sets)| ChoiceTransitionDto {
                state: *q,
                label: a.labels[*l].iter().cloned().collect(),
                choices: sets
                    .iter()
                    .map(|s| {
                        s.iter()
                            .map(|(act, r)| (a.actions[*act].clone(), *r))
                            .collect()
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&dto).expect("automaton serialization cannot fail")
}

pub fn mu_aut_from_json(text: &str) -> Result<MuAutomaton, AutomataError> {
    let dto: MuDto =
        serde_json::from_str(text).map_err(|e| AutomataError::Malformed(e.to_string()))?;
    let labels: Vec<Label> = dto
        .labels
        .into_iter()
        .map(|l| l.into_iter().collect())
        .collect();
    let label_idx: HashMap<&Label, usize> =
        labels.iter().enumerate().map(|(i, l)| (l, i)).collect();
    let action_idx: HashMap<&str, usize> = dto
        .actions
        .iter()
        .enumerate()
        .map(|(i, a)| (a.as_str(), i))
        .collect();
    let priorities: Vec<usize> = dto.states.iter().map(|s| s.priority).collect();
    let mut delta = BTreeMap::new();
    for t in &dto.transitions {
        let label: Label = t.label.iter().cloned().collect();
        let l = *label_idx
            .get(&label)
            .ok_or_else(|| AutomataError::Malformed(format!("unknown label {label:?}")))?;
        let mut sets = Vec::new();
        for s in &t.choices {
            let mut demands = Vec::new();
            for (act, target) in s {
                let a = *action_idx.get(act.as_str()).ok_or_else(|| {
                    AutomataError::Malformed(format!("unknown action {act}"))
                })?;
                if *target >= priorities.len() {
                    return Err(AutomataError::Malformed(format!(
                        "demand target {target} out of range"
                    )));
                }
                demands.push((a, *target));
            }
            sets.push(demands);
        }
        delta.insert((t.state, l), sets);
    }
    Ok(MuAutomaton {
        sigma: Signature {
            relations: dto.sigma,
        },
        m: dto.m,
        props: dto.props,
        actions: dto.actions,
        labels,
        priorities,
        initial: dto.initial,
        delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig_r() -> Signature {
        Signature::new([("R", 2)])
    }

    #[test]
    fn action_names_round_trip_through_their_spelling() {
        for rho in code_action_universe(3) {
            let name = action_of(&rho);
            assert_eq!(parse_action(&name).unwrap(), rho);
        }
        assert_eq!(action_of(&EdgeMap::new()), "rho");
        let rho: EdgeMap = [(1, 2), (3, 1)].into_iter().collect();
        assert_eq!(action_of(&rho), "rho_1to2_3to1");
    }

    #[test]
    fn labels_round_trip_through_their_spelling() {
        let sigma = sig_r();
        for props in code_label_universe(&sigma, 2).unwrap() {
            let label = parse_label(&props, &sigma).unwrap();
            assert_eq!(render_label(&label), props);
        }
    }

    #[test]
    fn code_universe_sizes_match_direct_counts() {
        // For one binary relation and m = 2: n=0 gives 1 label, n=1 gives
        // 2 (R_1_1 present or not), n=2 gives 2^4; 19 in total. Actions
        // are the partial injective maps on {1,2}: 7 of them.
        assert_eq!(code_label_universe(&sig_r(), 2).unwrap().len(), 19);
        assert_eq!(code_action_universe(2).len(), 7);
    }

    #[test]
    fn json_round_trips_an_automaton() {
        let mut a = TwoWayAlternatingMuAutomaton::over_code_alphabet(&sig_r(), 1).unwrap();
        let q0 = a.add_state(Owner::Eve, 1);
        let q1 = a.add_state(Owner::Adam, 0);
        a.initial = q0;
        a.delta.insert((q0, 0), vec![AMove::stay(q1), AMove::down(1, q0)]);
        a.delta.insert((q1, 1), vec![AMove::up(1, q0)]);
        let text = aut_to_json(&a);
        let b = aut_from_json(&text).unwrap();
        assert_eq!(a, b);
    }
}
