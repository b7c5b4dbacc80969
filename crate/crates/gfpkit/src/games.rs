//! Spoiler/Duplicator bisimulation games between finite structures,
//! solved exactly as safety games.
//!
//! A position is a partial homomorphism from the active structure to the
//! passive one. Spoiler extends the domain, switches sides (legal only at
//! partial isomorphisms), or collapses the domain; Duplicator answers
//! extensions and wins by playing forever. Three variants: the guarded
//! game (every domain strictly guarded), the k-width guarded-negation
//! game (domains of size ≤ k, switches only at strictly guarded
//! domains), and its block variant (extend/switch moves alternate with
//! collapses to strictly guarded sets).

use crate::par;
use crate::semantics::{Elem, RelationalStructure};
use crate::syntax::GuardedSignature;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum GameVariant {
    /// Guarded bisimulation: every position domain strictly guarded.
    G,
    /// k-width guarded negation bisimulation.
    GNk,
    /// Block k-width guarded negation bisimulation.
    BGNk,
}

#[derive(Clone, Debug)]
pub struct GameConfig {
    pub variant: GameVariant,
    /// The comparison signature σ′ together with its guard part σ_g.
    pub sig: GuardedSignature,
    /// Width bound for GNk/BGNk (ignored by G).
    pub k: usize,
}

impl GameConfig {
    pub fn guarded(sig: GuardedSignature) -> Self {
        GameConfig {
            variant: GameVariant::G,
            sig,
            k: 0,
        }
    }

    pub fn gn(sig: GuardedSignature, k: usize) -> Self {
        GameConfig {
            variant: GameVariant::GNk,
            sig,
            k,
        }
    }

    pub fn bgn(sig: GuardedSignature, k: usize) -> Self {
        GameConfig {
            variant: GameVariant::BGNk,
            sig,
            k,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn flip(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// Block-game phase: whose kind of move comes next. `Any` for variants
/// without alternation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Phase {
    Any,
    ExtendSwitch,
    Collapse,
}

/// A game position: the partial map from the active structure into the
/// passive one, plus the block-game phase.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GamePosition {
    pub active: Side,
    pub map: BTreeMap<Elem, Elem>,
    pub phase: Phase,
}

/// Duplicator's canonical winning answers: for a winning position and a
/// Spoiler extension set, the chosen successor position. Restricted to
/// positions reachable when Duplicator follows these answers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DuplicatorStrategy {
    pub replies: BTreeMap<(GamePosition, Vec<Elem>), GamePosition>,
}

#[derive(Clone, Debug)]
pub struct BisimOutcome {
    pub bisimilar: bool,
    pub strategy: Option<DuplicatorStrategy>,
}

#[derive(Debug, Error)]
pub enum GameError {
    #[error("game arena would have about {0} positions, over the capacity bound")]
    Capacity(u64),
}

/// Is the element set strictly guarded in the structure: at most one
/// element, or exactly the element set of some guard-relation fact?
pub fn strictly_guarded_set(
    y: &BTreeSet<Elem>,
    a: &RelationalStructure,
    sig: &GuardedSignature,
) -> bool {
    if y.len() <= 1 {
        return true;
    }
    a.facts.iter().any(|(rel, args)| {
        sig.is_guard_relation(rel) && args.iter().copied().collect::<BTreeSet<Elem>>() == *y
    })
}

fn is_partial_hom(
    map: &BTreeMap<Elem, Elem>,
    from: &RelationalStructure,
    to: &RelationalStructure,
    sig: &GuardedSignature,
) -> bool {
    from.facts.iter().all(|(rel, args)| {
        if !sig.sigma.contains(rel) {
            return true;
        }
        match args
            .iter()
            .map(|e| map.get(e).copied())
            .collect::<Option<Vec<Elem>>>()
        {
            Some(mapped) => to.has_fact(rel, &mapped),
            None => true,
        }
    })
}

fn is_partial_iso(
    map: &BTreeMap<Elem, Elem>,
    from: &RelationalStructure,
    to: &RelationalStructure,
    sig: &GuardedSignature,
) -> bool {
    let mut inverse = BTreeMap::new();
    for (&x, &y) in map {
        if inverse.insert(y, x).is_some() {
            return false;
        }
    }
    is_partial_hom(map, from, to, sig) && is_partial_hom(&inverse, to, from, sig)
}

/// One Spoiler move, with the Duplicator answers it admits.
#[derive(Clone, Debug)]
enum Move {
    /// Extension to the set `x`; Duplicator picks one reply.
    Extend { x: Vec<Elem>, replies: Vec<usize> },
    /// Forced successor (switch or collapse).
    Jump(usize),
    /// Immediately losing for Duplicator (switch at a non-isomorphism).
    Lose,
}

struct Arena {
    positions: Vec<GamePosition>,
    moves: Vec<Vec<Move>>,
    start: usize,
}

fn domain_cap(cfg: &GameConfig, active: &RelationalStructure) -> usize {
    match cfg.variant {
        GameVariant::G => active.domain.len().min(cfg.sig.sigma.width().max(1)),
        _ => cfg.k.min(active.domain.len()),
    }
}

/// The sets Spoiler may use as position domains in the active structure.
fn legal_domains(
    cfg: &GameConfig,
    active: &RelationalStructure,
) -> Vec<BTreeSet<Elem>> {
    let mut out: Vec<BTreeSet<Elem>> = Vec::new();
    match cfg.variant {
        GameVariant::G => {
            out.push(BTreeSet::new());
            for &e in &active.domain {
                out.push([e].into_iter().collect());
            }
            for (rel, args) in &active.facts {
                if cfg.sig.is_guard_relation(rel) {
                    out.push(args.iter().copied().collect());
                }
            }
            out.sort();
            out.dedup();
        }
        GameVariant::GNk | GameVariant::BGNk => {
            let cap = domain_cap(cfg, active);
            let mut stack: Vec<(Vec<Elem>, usize)> = vec![(Vec::new(), 0)];
            while let Some((set, from)) = stack.pop() {
                out.push(set.iter().copied().collect());
                if set.len() < cap {
                    for (i, &e) in active.domain.iter().enumerate().skip(from) {
                        let mut next = set.clone();
                        next.push(e);
                        stack.push((next, i + 1));
                    }
                }
            }
            out.sort();
            out.dedup();
        }
    }
    out
}

fn phases(cfg: &GameConfig) -> Vec<Phase> {
    match cfg.variant {
        GameVariant::BGNk => vec![Phase::ExtendSwitch, Phase::Collapse],
        _ => vec![Phase::Any],
    }
}

/// All homomorphisms with the given domain set, in deterministic order.
fn homs_on(
    dom: &BTreeSet<Elem>,
    from: &RelationalStructure,
    to: &RelationalStructure,
    sig: &GuardedSignature,
    base: &BTreeMap<Elem, Elem>,
) -> Vec<BTreeMap<Elem, Elem>> {
    let fresh: Vec<Elem> = dom.iter().copied().filter(|e| !base.contains_key(e)).collect();
    let mut out = Vec::new();
    let mut current = base.clone();
    fn rec(
        fresh: &[Elem],
        pos: usize,
        current: &mut BTreeMap<Elem, Elem>,
        from: &RelationalStructure,
        to: &RelationalStructure,
        sig: &GuardedSignature,
        out: &mut Vec<BTreeMap<Elem, Elem>>,
    ) {
        if pos == fresh.len() {
            out.push(current.clone());
            return;
        }
        for &img in &to.domain {
            current.insert(fresh[pos], img);
            // Early pruning: each step must stay a partial homomorphism.
            if is_partial_hom(current, from, to, sig) {
                rec(fresh, pos + 1, current, from, to, sig, out);
            }
            current.remove(&fresh[pos]);
        }
    }
    rec(&fresh, 0, &mut current, from, to, sig, &mut out);
    out
}

fn build_arena(
    a: &RelationalStructure,
    b: &RelationalStructure,
    cfg: &GameConfig,
) -> Result<Arena, GameError> {
    // Rough capacity estimate before enumeration.
    let mut estimate: u64 = 0;
    for side in [Side::Left, Side::Right] {
        let (from, to) = match side {
            Side::Left => (a, b),
            Side::Right => (b, a),
        };
        let cap = domain_cap(cfg, from) as u32;
        let n = from.domain.len() as u64;
        let m = to.domain.len().max(1) as u64;
        let mut sets: u64 = 0;
        let mut choose: u64 = 1;
        for s in 0..=cap {
            if s > 0 {
                choose = choose * (n.saturating_sub(s as u64 - 1)) / s as u64;
            }
            sets = sets.saturating_add(choose.saturating_mul(m.pow(s)));
        }
        estimate = estimate.saturating_add(sets);
    }
    if estimate > 3_000_000 {
        return Err(GameError::Capacity(estimate));
    }

    // Enumerate all positions: homomorphisms on legal domains, per side
    // and phase.
    let mut positions: Vec<GamePosition> = Vec::new();
    for side in [Side::Left, Side::Right] {
        let (from, to) = match side {
            Side::Left => (a, b),
            Side::Right => (b, a),
        };
        for dom in legal_domains(cfg, from) {
            for map in homs_on(&dom, from, to, &cfg.sig, &BTreeMap::new()) {
                for &phase in &phases(cfg) {
                    positions.push(GamePosition {
                        active: side,
                        map: map.clone(),
                        phase,
                    });
                }
            }
        }
    }
    positions.sort();
    positions.dedup();
    let index: HashMap<GamePosition, usize> = positions
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), i))
        .collect();

    let start = GamePosition {
        active: Side::Left,
        map: BTreeMap::new(),
        phase: match cfg.variant {
            GameVariant::BGNk => Phase::ExtendSwitch,
            _ => Phase::Any,
        },
    };
    let start = index[&start];

    let arena_moves: Vec<Vec<Move>> = {
        let positions_ref = &positions;
        let index_ref = &index;
        par::map((0..positions_ref.len()).collect::<Vec<usize>>(), |&pi| {
            position_moves(&positions_ref[pi], a, b, cfg, index_ref)
        })
    };

    Ok(Arena {
        positions,
        moves: arena_moves,
        start,
    })
}

fn position_moves(
    p: &GamePosition,
    a: &RelationalStructure,
    b: &RelationalStructure,
    cfg: &GameConfig,
    index: &HashMap<GamePosition, usize>,
) -> Vec<Move> {
    let (from, to) = match p.active {
        Side::Left => (a, b),
        Side::Right => (b, a),
    };
    let dom: BTreeSet<Elem> = p.map.keys().copied().collect();
    let mut moves = Vec::new();

    let may_extend_switch = p.phase != Phase::Collapse;
    let may_collapse = p.phase != Phase::ExtendSwitch;

    if may_extend_switch {
        // Extend moves: legal domains extending the current one. In the
        // block game the no-op extension matters (it flips the phase);
        // elsewhere it is a harmless self-loop we skip.
        let next_phase = if cfg.variant == GameVariant::BGNk {
            Phase::Collapse
        } else {
            Phase::Any
        };
        for x in legal_domains(cfg, from) {
            if !dom.is_subset(&x) {
                continue;
            }
            if cfg.variant != GameVariant::BGNk && x == dom {
                continue;
            }
            let replies: Vec<usize> = homs_on(&x, from, to, &cfg.sig, &p.map)
                .into_iter()
                .map(|map| {
                    index[&GamePosition {
                        active: p.active,
                        map,
                        phase: next_phase,
                    }]
                })
                .collect();
            moves.push(Move::Extend {
                x: x.iter().copied().collect(),
                replies,
            });
        }
        // Switch move.
        let switch_legal = match cfg.variant {
            GameVariant::G => true,
            GameVariant::GNk | GameVariant::BGNk => {
                strictly_guarded_set(&dom, from, &cfg.sig)
            }
        };
        if switch_legal {
            if is_partial_iso(&p.map, from, to, &cfg.sig) {
                let inverse: BTreeMap<Elem, Elem> =
                    p.map.iter().map(|(&x, &y)| (y, x)).collect();
                moves.push(Move::Jump(
                    index[&GamePosition {
                        active: p.active.flip(),
                        map: inverse,
                        phase: next_phase,
                    }],
                ));
            } else {
                moves.push(Move::Lose);
            }
        }
    }

    if may_collapse {
        let next_phase = if cfg.variant == GameVariant::BGNk {
            Phase::ExtendSwitch
        } else {
            Phase::Any
        };
        let subsets = subsets_of(&dom);
        for x in subsets {
            if cfg.variant != GameVariant::BGNk && x == dom {
                continue;
            }
            let legal = match cfg.variant {
                GameVariant::G | GameVariant::BGNk => strictly_guarded_set(&x, from, &cfg.sig),
                GameVariant::GNk => true,
            };
            if !legal {
                continue;
            }
            let map: BTreeMap<Elem, Elem> = p
                .map
                .iter()
                .filter(|(e, _)| x.contains(e))
                .map(|(&e, &v)| (e, v))
                .collect();
            moves.push(Move::Jump(
                index[&GamePosition {
                    active: p.active,
                    map,
                    phase: next_phase,
                }],
            ));
        }
    }

    moves
}

fn subsets_of(dom: &BTreeSet<Elem>) -> Vec<BTreeSet<Elem>> {
    let items: Vec<Elem> = dom.iter().copied().collect();
    let mut out = Vec::with_capacity(1 << items.len());
    for mask in 0u32..(1 << items.len()) {
        out.push(
            items
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &e)| e)
                .collect(),
        );
    }
    out
}

/// Positions from which Spoiler can force a Duplicator loss; everything
/// else is Duplicator-won (safety game, greatest fixpoint).
fn losing_set(arena: &Arena) -> Vec<bool> {
    let n = arena.positions.len();
    let mut lost = vec![false; n];
    // counters[p][m] = how many non-lost Duplicator answers move m at
    // position p still has; a Spoiler move with zero answers wins for him.
    let mut counters: Vec<Vec<usize>> = arena
        .moves
        .iter()
        .map(|ms| {
            ms.iter()
                .map(|m| match m {
                    Move::Extend { replies, .. } => replies.len(),
                    Move::Jump(_) => 1,
                    Move::Lose => 0,
                })
                .collect()
        })
        .collect();
    let mut rev: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
    for (p, ms) in arena.moves.iter().enumerate() {
        for (mi, m) in ms.iter().enumerate() {
            match m {
                Move::Extend { replies, .. } => {
                    for &r in replies {
                        rev.entry(r).or_default().push((p, mi));
                    }
                }
                Move::Jump(t) => rev.entry(*t).or_default().push((p, mi)),
                Move::Lose => {}
            }
        }
    }
    let mut queue: Vec<usize> = (0..n)
        .filter(|&p| counters[p].contains(&0))
        .collect();
    while let Some(p) = queue.pop() {
        if lost[p] {
            continue;
        }
        lost[p] = true;
        if let Some(preds) = rev.get(&p) {
            for &(q, mi) in preds {
                if lost[q] {
                    continue;
                }
                counters[q][mi] -= 1;
                if counters[q][mi] == 0 {
                    queue.push(q);
                }
            }
        }
    }
    lost
}

/// Decide bisimilarity of two finite structures under the given game.
/// On a Duplicator win, returns her positional strategy restricted to
/// the positions reachable while she follows it.
pub fn bisimilar(
    a: &RelationalStructure,
    b: &RelationalStructure,
    cfg: &GameConfig,
) -> Result<BisimOutcome, GameError> {
    let arena = build_arena(a, b, cfg)?;
    let lost = losing_set(&arena);
    if lost[arena.start] {
        return Ok(BisimOutcome {
            bisimilar: false,
            strategy: None,
        });
    }
    // Collect canonical winning replies over the reachable part.
    let mut strategy = DuplicatorStrategy::default();
    let mut seen = vec![false; arena.positions.len()];
    let mut stack = vec![arena.start];
    while let Some(p) = stack.pop() {
        if seen[p] {
            continue;
        }
        seen[p] = true;
        for m in &arena.moves[p] {
            match m {
                Move::Extend { x, replies } => {
                    let best = replies
                        .iter()
                        .copied()
                        .filter(|&r| !lost[r])
                        .min_by_key(|&r| arena.positions[r].clone())
                        .expect("winning position has a winning reply");
                    strategy.replies.insert(
                        (arena.positions[p].clone(), x.clone()),
                        arena.positions[best].clone(),
                    );
                    stack.push(best);
                }
                Move::Jump(t) => stack.push(*t),
                Move::Lose => unreachable!("winning position has no losing switch"),
            }
        }
    }
    Ok(BisimOutcome {
        bisimilar: true,
        strategy: Some(strategy),
    })
}

/// Structure-side data the depth-bounded search reads but never writes.
struct DepthStatic<'x> {
    a: &'x RelationalStructure,
    b: &'x RelationalStructure,
    cfg: &'x GameConfig,
    left_idx: FactIndex,
    right_idx: FactIndex,
    /// Per-side extend candidates for the guarded variant (unused
    /// otherwise, where candidates are enumerated from the domain).
    left_guarded: Vec<BTreeSet<Elem>>,
    right_guarded: Vec<BTreeSet<Elem>>,
}

/// Mutable search state: survival bounds per position and a work meter.
struct DepthState {
    /// For each position seen: survives every depth ≤ `.0`, fails every
    /// depth ≥ `.1` (survival is monotone non-increasing in depth).
    memo: HashMap<GamePosition, (usize, usize)>,
    work: u64,
}

const DEPTH_WORK_CAP: u64 = 200_000_000;

fn bump(mu: &mut DepthState, n: u64) -> Result<(), GameError> {
    mu.work += n;
    if mu.work > DEPTH_WORK_CAP {
        Err(GameError::Capacity(mu.work))
    } else {
        Ok(())
    }
}

/// The relevant facts of one structure, indexed by element, so that
/// growing a partial map checks only the facts the new element touches.
struct FactIndex {
    facts: Vec<(String, Vec<Elem>)>,
    by_elem: HashMap<Elem, Vec<usize>>,
}

impl FactIndex {
    fn new(s: &RelationalStructure, sig: &GuardedSignature) -> FactIndex {
        let facts: Vec<(String, Vec<Elem>)> = s
            .facts
            .iter()
            .filter(|(rel, _)| sig.sigma.contains(rel))
            .cloned()
            .collect();
        let mut by_elem: HashMap<Elem, Vec<usize>> = HashMap::new();
        for (i, (_, args)) in facts.iter().enumerate() {
            for &e in args.iter().collect::<BTreeSet<&Elem>>() {
                by_elem.entry(e).or_default().push(i);
            }
        }
        FactIndex { facts, by_elem }
    }

    /// After `e` was assigned, do all newly completed facts land in `to`?
    fn ok_after(&self, map: &BTreeMap<Elem, Elem>, e: Elem, to: &RelationalStructure) -> bool {
        self.by_elem.get(&e).into_iter().flatten().all(|&i| {
            let (rel, args) = &self.facts[i];
            match args
                .iter()
                .map(|x| map.get(x).copied())
                .collect::<Option<Vec<Elem>>>()
            {
                Some(mapped) => to.has_fact(rel, &mapped),
                None => true,
            }
        })
    }
}

/// All supersets of `dom` within `universe` of size at most `cap`.
fn supersets_within(
    dom: &BTreeSet<Elem>,
    universe: &[Elem],
    cap: usize,
) -> Vec<BTreeSet<Elem>> {
    let avail: Vec<Elem> = universe
        .iter()
        .copied()
        .filter(|e| !dom.contains(e))
        .collect();
    let extra_max = cap.saturating_sub(dom.len());
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<Elem>, usize)> = vec![(Vec::new(), 0)];
    while let Some((extra, from)) = stack.pop() {
        let mut full = dom.clone();
        full.extend(extra.iter().copied());
        out.push(full);
        if extra.len() < extra_max {
            for (i, &e) in avail.iter().enumerate().skip(from) {
                let mut next = extra.clone();
                next.push(e);
                stack.push((next, i + 1));
            }
        }
    }
    out.sort();
    out
}

fn survive(
    st: &DepthStatic<'_>,
    mu: &mut DepthState,
    p: &GamePosition,
    d: usize,
) -> Result<bool, GameError> {
    if d == 0 {
        return Ok(true);
    }
    bump(mu, 1)?;
    let (lo, hi) = mu.memo.get(p).copied().unwrap_or((0, usize::MAX));
    if d <= lo {
        return Ok(true);
    }
    if d >= hi {
        return Ok(false);
    }
    let v = depth_eval(st, mu, p, d)?;
    let entry = mu.memo.entry(p.clone()).or_insert((0, usize::MAX));
    if v {
        entry.0 = entry.0.max(d);
    } else {
        entry.1 = entry.1.min(d);
    }
    Ok(v)
}

fn depth_eval(
    st: &DepthStatic<'_>,
    mu: &mut DepthState,
    p: &GamePosition,
    d: usize,
) -> Result<bool, GameError> {
    let (from, to, from_idx) = match p.active {
        Side::Left => (st.a, st.b, &st.left_idx),
        Side::Right => (st.b, st.a, &st.right_idx),
    };
    let dom: BTreeSet<Elem> = p.map.keys().copied().collect();
    let bgn = st.cfg.variant == GameVariant::BGNk;

    if p.phase != Phase::Collapse {
        let next_phase = if bgn { Phase::Collapse } else { Phase::Any };
        let candidates: Vec<BTreeSet<Elem>> = match st.cfg.variant {
            GameVariant::G => {
                let guarded = match p.active {
                    Side::Left => &st.left_guarded,
                    Side::Right => &st.right_guarded,
                };
                guarded
                    .iter()
                    .filter(|x| dom.is_subset(x) && **x != dom)
                    .cloned()
                    .collect()
            }
            _ => supersets_within(&dom, &from.domain, st.cfg.k)
                .into_iter()
                .filter(|x| bgn || *x != dom)
                .collect(),
        };
        for x in candidates {
            bump(mu, 1)?;
            let fresh: Vec<Elem> = x.iter().copied().filter(|e| !p.map.contains_key(e)).collect();
            let mut current = p.map.clone();
            if !extend_answered(
                st, mu, &fresh, 0, &mut current, from_idx, to, p.active, next_phase, d,
            )? {
                return Ok(false);
            }
        }
        let switch_legal = match st.cfg.variant {
            GameVariant::G => true,
            GameVariant::GNk | GameVariant::BGNk => {
                strictly_guarded_set(&dom, from, &st.cfg.sig)
            }
        };
        if switch_legal {
            if !is_partial_iso(&p.map, from, to, &st.cfg.sig) {
                return Ok(false);
            }
            let inverse: BTreeMap<Elem, Elem> = p.map.iter().map(|(&x, &y)| (y, x)).collect();
            let child = GamePosition {
                active: p.active.flip(),
                map: inverse,
                phase: next_phase,
            };
            if !survive(st, mu, &child, d - 1)? {
                return Ok(false);
            }
        }
    }

    if p.phase != Phase::ExtendSwitch {
        let next_phase = if bgn { Phase::ExtendSwitch } else { Phase::Any };
        for x in subsets_of(&dom) {
            if !bgn && x == dom {
                continue;
            }
            let legal = match st.cfg.variant {
                GameVariant::G | GameVariant::BGNk => strictly_guarded_set(&x, from, &st.cfg.sig),
                GameVariant::GNk => true,
            };
            if !legal {
                continue;
            }
            bump(mu, 1)?;
            let map: BTreeMap<Elem, Elem> = p
                .map
                .iter()
                .filter(|(e, _)| x.contains(e))
                .map(|(&e, &v)| (e, v))
                .collect();
            let child = GamePosition {
                active: p.active,
                map,
                phase: next_phase,
            };
            if !survive(st, mu, &child, d - 1)? {
                return Ok(false);
            }
        }
    }

    Ok(true)
}

/// Does some assignment of the remaining fresh elements complete the map
/// into a homomorphism whose position survives `d - 1` more rounds?
/// Enumerates images lazily and stops at the first survivor.
#[allow(clippy::too_many_arguments)]
fn extend_answered(
    st: &DepthStatic<'_>,
    mu: &mut DepthState,
    fresh: &[Elem],
    at: usize,
    current: &mut BTreeMap<Elem, Elem>,
    from_idx: &FactIndex,
    to: &RelationalStructure,
    active: Side,
    next_phase: Phase,
    d: usize,
) -> Result<bool, GameError> {
    if at == fresh.len() {
        let child = GamePosition {
            active,
            map: current.clone(),
            phase: next_phase,
        };
        return survive(st, mu, &child, d - 1);
    }
    for &img in &to.domain {
        bump(mu, 1)?;
        current.insert(fresh[at], img);
        if from_idx.ok_after(current, fresh[at], to)
            && extend_answered(
                st,
                mu,
                fresh,
                at + 1,
                current,
                from_idx,
                to,
                active,
                next_phase,
                d,
            )?
        {
            current.remove(&fresh[at]);
            return Ok(true);
        }
        current.remove(&fresh[at]);
    }
    Ok(false)
}

/// Independent d-round oracle for the same game: does Duplicator survive
/// `d` rounds? Monotone non-increasing in `d` and equal to [`bisimilar`]
/// once `d` reaches the arena size. Explores the game lazily (no arena),
/// so it also handles structures far beyond [`bisimilar`]'s capacity;
/// runaway searches stop with a capacity error.
pub fn bisimilar_to_depth(
    a: &RelationalStructure,
    b: &RelationalStructure,
    cfg: &GameConfig,
    d: usize,
) -> Result<bool, GameError> {
    let guarded_of = |s: &RelationalStructure| match cfg.variant {
        GameVariant::G => legal_domains(cfg, s),
        _ => Vec::new(),
    };
    let st = DepthStatic {
        a,
        b,
        cfg,
        left_idx: FactIndex::new(a, &cfg.sig),
        right_idx: FactIndex::new(b, &cfg.sig),
        left_guarded: guarded_of(a),
        right_guarded: guarded_of(b),
    };
    let mut mu = DepthState {
        memo: HashMap::new(),
        work: 0,
    };
    let start = GamePosition {
        active: Side::Left,
        map: BTreeMap::new(),
        phase: match cfg.variant {
            GameVariant::BGNk => Phase::ExtendSwitch,
            _ => Phase::Any,
        },
    };
    survive(&st, &mut mu, &start, d)
}

/// The number of positions in the arena; `bisimilar_to_depth` with this
/// depth agrees with `bisimilar`.
pub fn arena_size(
    a: &RelationalStructure,
    b: &RelationalStructure,
    cfg: &GameConfig,
) -> Result<usize, GameError> {
    Ok(build_arena(a, b, cfg)?.positions.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::{canonical_structures, evaluate, Valuation};
    use crate::symbols::Symbols;
    use crate::syntax::{parse, GuardedSignature, Signature};

    fn sig_r() -> GuardedSignature {
        GuardedSignature::full(Signature::new([("R", 2)]))
    }

    fn sig_qr() -> GuardedSignature {
        GuardedSignature::full(Signature::new([("Q", 1), ("R", 2)]))
    }

    fn cycle(n: Elem) -> RelationalStructure {
        let mut a = RelationalStructure::new(0..n);
        for i in 0..n {
            a.add_fact("R", [i, (i + 1) % n]);
        }
        a
    }

    fn path(n: Elem) -> RelationalStructure {
        let mut a = RelationalStructure::new(0..n);
        for i in 0..n.saturating_sub(1) {
            a.add_fact("R", [i, i + 1]);
        }
        a
    }

    /// R-loop of length k+1, every element Q, one element P.
    fn loop_fixture(k: Elem) -> RelationalStructure {
        let mut a = cycle(k + 1);
        for i in 0..=k {
            a.add_fact("Q", [i]);
        }
        a.add_fact("P", [0]);
        a
    }

    /// Chain b0→b1→b2 with (k+1)-loops through b0 and b2; all Q, P at b1.
    fn double_lasso_fixture(k: Elem) -> RelationalStructure {
        let n = 3 + 2 * k;
        let mut b = RelationalStructure::new(0..n);
        b.add_fact("R", [0, 1]);
        b.add_fact("R", [1, 2]);
        // Loop through 0: 0 → 3 → … → (k+2) → 0.
        let first_loop: Vec<Elem> = std::iter::once(0).chain(3..3 + k).collect();
        for w in 0..first_loop.len() {
            b.add_fact("R", [first_loop[w], first_loop[(w + 1) % first_loop.len()]]);
        }
        // Loop through 2.
        let second_loop: Vec<Elem> = std::iter::once(2).chain(3 + k..3 + 2 * k).collect();
        for w in 0..second_loop.len() {
            b.add_fact(
                "R",
                [second_loop[w], second_loop[(w + 1) % second_loop.len()]],
            );
        }
        for e in 0..n {
            b.add_fact("Q", [e]);
        }
        b.add_fact("P", [1]);
        b
    }

    #[test]
    fn every_variant_is_reflexive() {
        let a = {
            let mut a = path(3);
            a.add_fact("Q", [0]);
            a
        };
        for cfg in [
            GameConfig::guarded(sig_qr()),
            GameConfig::gn(sig_qr(), 2),
            GameConfig::bgn(sig_qr(), 2),
        ] {
            let out = bisimilar(&a, &a, &cfg).unwrap();
            assert!(out.bisimilar, "{:?}", cfg.variant);
            assert!(out.strategy.is_some());
        }
    }

    #[test]
    fn gn3_separates_cycle_from_path() {
        let out = bisimilar(&cycle(3), &path(3), &GameConfig::gn(sig_r(), 3)).unwrap();
        assert!(!out.bisimilar);
    }

    #[test]
    fn gn_width_controls_cycle_discrimination() {
        // Three pebbles trap the odd cycle (no homomorphism of the full
        // triangle into a 4-cycle); two pebbles only ever see single
        // steps, which the two cycles answer alike.
        let cfg3 = GameConfig::gn(sig_r(), 3);
        assert!(!bisimilar(&cycle(3), &cycle(4), &cfg3).unwrap().bisimilar);
        let cfg2 = GameConfig::gn(sig_r(), 2);
        assert!(bisimilar(&cycle(3), &cycle(4), &cfg2).unwrap().bisimilar);
    }

    #[test]
    fn guarded_game_identifies_rotations() {
        // Directed cycles of different length look alike through guarded
        // positions (single edges and their endpoints).
        let out = bisimilar(&cycle(4), &cycle(5), &GameConfig::guarded(sig_r())).unwrap();
        assert!(out.bisimilar);
        // A path is separated: its endpoints have missing successors.
        let out2 = bisimilar(&cycle(4), &path(4), &GameConfig::guarded(sig_r())).unwrap();
        assert!(!out2.bisimilar);
    }

    #[test]
    fn loop_and_double_lasso_are_block_bisimilar() {
        let k = 3;
        let a = loop_fixture(k as Elem);
        let b = double_lasso_fixture(k as Elem);
        // Over the common signature {Q,R} (the extra P label is dropped).
        let cfg = GameConfig::bgn(sig_qr(), k);
        let out = bisimilar(&a, &b, &cfg).unwrap();
        assert!(out.bisimilar);
        assert!(bisimilar_to_depth(&a, &b, &cfg, 8).unwrap());
    }

    #[test]
    fn depth_oracle_agrees_with_exact_solution() {
        let sig = GuardedSignature::full(Signature::new([("R", 2), ("P", 1)]));
        let structures = canonical_structures(&sig.sigma, 2).unwrap();
        let cfg = GameConfig::gn(sig.clone(), 2);
        for a in &structures {
            for b in &structures {
                let exact = bisimilar(a, b, &cfg).unwrap().bisimilar;
                let bound = arena_size(a, b, &cfg).unwrap();
                let iterated = bisimilar_to_depth(a, b, &cfg, bound).unwrap();
                assert_eq!(exact, iterated, "a={a:?} b={b:?}");
            }
        }
    }

    #[test]
    fn depth_survival_is_monotone() {
        let cfg = GameConfig::gn(sig_r(), 3);
        let a = cycle(3);
        let b = path(3);
        let mut previous = true;
        for d in 0..8 {
            let now = bisimilar_to_depth(&a, &b, &cfg, d).unwrap();
            assert!(previous || !now, "survival regressed at depth {d}");
            previous = now;
        }
        assert!(!previous);
    }

    #[test]
    fn guarded_bisimilarity_preserves_guarded_sentences() {
        let mut s = Symbols::new();
        let sentences = [
            "exists x,y. R(x,y)",
            "exists x. R(x,x)",
            "exists x,y. (R(x,y) & gneg[R(x,y)](R(y,x)))",
            "exists x,y. (R(x,y) & lfp[X(u); true; exists v. (R(u,v) & X(v)) | R(u,u)](y))",
        ];
        let pairs = [(cycle(4), cycle(5)), (cycle(3), cycle(6))];
        for (a, b) in &pairs {
            let cfg = GameConfig::guarded(sig_r());
            assert!(bisimilar(a, b, &cfg).unwrap().bisimilar);
            for text in &sentences {
                let phi = parse(text, &mut s).unwrap();
                let va = evaluate(&phi, a, &Valuation::empty(), &sig_r()).unwrap();
                let vb = evaluate(&phi, b, &Valuation::empty(), &sig_r()).unwrap();
                assert_eq!(va, vb, "{text} separated guarded-bisimilar structures");
            }
        }
    }

    #[test]
    fn strategy_replies_are_homomorphisms_extending_the_position() {
        let a = cycle(4);
        let b = cycle(5);
        let cfg = GameConfig::guarded(sig_r());
        let out = bisimilar(&a, &b, &cfg).unwrap();
        let strategy = out.strategy.unwrap();
        assert!(!strategy.replies.is_empty());
        for ((pos, x), reply) in &strategy.replies {
            assert_eq!(pos.active, reply.active);
            let dom: Vec<Elem> = reply.map.keys().copied().collect();
            assert_eq!(&dom, x, "reply domain must be the chosen set");
            for (e, v) in &pos.map {
                assert_eq!(reply.map.get(e), Some(v), "reply must extend the position");
            }
            let (from, to) = match pos.active {
                Side::Left => (&a, &b),
                Side::Right => (&b, &a),
            };
            assert!(is_partial_hom(&reply.map, from, to, &cfg.sig));
        }
    }
}
