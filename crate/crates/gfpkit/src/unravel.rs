//! Unravellings of finite structures into regular tree codes.
//!
//! An unravelling arranges the element sets visited by plays of a
//! bisimulation game into a tree; decoding it yields a structure
//! bisimilar to the original (to the depth materialized) but of bounded
//! tree-width. Node behavior depends only on the current element set,
//! its naming, and (for block variants) the interface it was entered
//! through — so the infinite tree is represented as a finite regular
//! graph of node types. The plump variant additionally realizes, as
//! siblings, every safe restriction of each bag label: copies of the bag
//! that deliberately forget facts not protected by a guard atom or by
//! the entering interface.

use crate::codes::{
    guarded_in, index_set, CodeError, EdgeMap, NodeLabel, RegularTreeCode, TreeCode,
};
use crate::semantics::{Elem, RelationalStructure};
use crate::syntax::GuardedSignature;
use std::collections::BTreeMap;
use std::collections::BTreeSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UnravellingKind {
    /// Every node's element set strictly guarded.
    G,
    /// Arbitrary element sets of size at most k.
    GNk,
    /// Alternation of strictly guarded interfaces and ≤k-size bags.
    BGNk,
    /// The block unravelling with all safe label restrictions realized.
    Plump,
}

#[derive(Clone, Debug)]
pub struct UnravellingSpec {
    pub kind: UnravellingKind,
    /// The comparison signature σ′ with its guard part σ_g.
    pub sig: GuardedSignature,
    /// Bound on element-set sizes.
    pub k: usize,
}

impl UnravellingSpec {
    pub fn g(sig: GuardedSignature, k: usize) -> Self {
        UnravellingSpec {
            kind: UnravellingKind::G,
            sig,
            k,
        }
    }

    pub fn gn(sig: GuardedSignature, k: usize) -> Self {
        UnravellingSpec {
            kind: UnravellingKind::GNk,
            sig,
            k,
        }
    }

    pub fn bgn(sig: GuardedSignature, k: usize) -> Self {
        UnravellingSpec {
            kind: UnravellingKind::BGNk,
            sig,
            k,
        }
    }

    pub fn plump(sig: GuardedSignature, k: usize) -> Self {
        UnravellingSpec {
            kind: UnravellingKind::Plump,
            sig,
            k,
        }
    }
}

/// The structure-side data behind one node type of an unravelling.
/// Element naming is positional: the element at position `i` of the
/// stored order carries name `i + 1`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeSeed {
    /// A node holding a plain element set (all nodes of the G and GN^k
    /// unravellings; the interface nodes of the block variants), named
    /// in ascending element order.
    Interface { elements: Vec<Elem> },
    /// A bag node of a block variant: entered through `previous`, whose
    /// elements keep their interface names (first positions), followed
    /// by the fresh elements in ascending order. `label` is the chosen
    /// encoding of the bag's facts — the full atomic type, or a safe
    /// restriction of it in the plump variant.
    Bag {
        previous: Vec<Elem>,
        elements: Vec<Elem>,
        label: NodeLabel,
    },
}

/// Unravel and keep the per-node structure-side seeds (index-aligned
/// with the code's node ids).
pub fn unravel_with_seeds(
    a: &RelationalStructure,
    spec: &UnravellingSpec,
) -> (RegularTreeCode, Vec<NodeSeed>) {
    match spec.kind {
        UnravellingKind::G | UnravellingKind::GNk => single_layer_unravelling(a, spec),
        UnravellingKind::BGNk | UnravellingKind::Plump => block_unravelling(a, spec),
    }
}

/// The unravelling of `a` as a regular tree code.
pub fn unravel(a: &RelationalStructure, spec: &UnravellingSpec) -> RegularTreeCode {
    unravel_with_seeds(a, spec).0
}

/// The plump unravelling (the kind field of `spec` is ignored).
pub fn plump_unravel(a: &RelationalStructure, spec: &UnravellingSpec) -> RegularTreeCode {
    let plump_spec = UnravellingSpec {
        kind: UnravellingKind::Plump,
        sig: spec.sig.clone(),
        k: spec.k,
    };
    unravel(a, &plump_spec)
}

/// All atomic σ′-facts of `a` among the given elements.
fn atype(
    y: &BTreeSet<Elem>,
    a: &RelationalStructure,
    sig: &GuardedSignature,
) -> Vec<(String, Vec<Elem>)> {
    a.facts
        .iter()
        .filter(|(rel, args)| {
            sig.sigma.contains(rel) && args.iter().all(|e| y.contains(e))
        })
        .cloned()
        .collect()
}

/// Encode element-level facts as a node label under positional naming.
fn label_for(elements: &[Elem], facts: &[(String, Vec<Elem>)]) -> NodeLabel {
    let name: BTreeMap<Elem, usize> = elements
        .iter()
        .enumerate()
        .map(|(i, &e)| (e, i + 1))
        .collect();
    let mut label = NodeLabel::new(elements.len());
    for (rel, args) in facts {
        let indices: Vec<usize> = args.iter().map(|e| name[e]).collect();
        label.facts.insert((rel.clone(), indices));
    }
    label
}

/// The strictly guarded element sets of `a` (with sets of size ≤ 1
/// counting as trivially guarded), capped at size `k`.
fn guarded_sets(a: &RelationalStructure, sig: &GuardedSignature, k: usize) -> Vec<Vec<Elem>> {
    let mut out: BTreeSet<Vec<Elem>> = BTreeSet::new();
    out.insert(Vec::new());
    if k >= 1 {
        for &e in &a.domain {
            out.insert(vec![e]);
        }
    }
    for (rel, args) in &a.facts {
        if sig.is_guard_relation(rel) {
            let set: BTreeSet<Elem> = args.iter().copied().collect();
            if set.len() <= k {
                out.insert(set.into_iter().collect());
            }
        }
    }
    out.into_iter().collect()
}

/// All subsets of the domain of `a` of size at most `k`, ascending.
fn small_sets(a: &RelationalStructure, k: usize) -> Vec<Vec<Elem>> {
    let mut out: Vec<Vec<Elem>> = Vec::new();
    let mut stack: Vec<(Vec<Elem>, usize)> = vec![(Vec::new(), 0)];
    while let Some((set, from)) = stack.pop() {
        out.push(set.clone());
        if set.len() < k {
            for (i, &e) in a.domain.iter().enumerate().skip(from) {
                let mut next = set.clone();
                next.push(e);
                stack.push((next, i + 1));
            }
        }
    }
    out.sort();
    out
}

fn shared_renaming(src: &[Elem], dst: &[Elem]) -> EdgeMap {
    let dst_pos: BTreeMap<Elem, usize> = dst
        .iter()
        .enumerate()
        .map(|(i, &e)| (e, i + 1))
        .collect();
    src.iter()
        .enumerate()
        .filter_map(|(i, e)| dst_pos.get(e).map(|&j| (i + 1, j)))
        .collect()
}

/// G and GN^k unravellings: one node type per element set, edges between
/// every pair of sets (matching unrestricted consecutive game sets).
fn single_layer_unravelling(
    a: &RelationalStructure,
    spec: &UnravellingSpec,
) -> (RegularTreeCode, Vec<NodeSeed>) {
    let sets = match spec.kind {
        UnravellingKind::G => guarded_sets(a, &spec.sig, spec.k),
        _ => small_sets(a, spec.k),
    };
    let mut code = TreeCode::new(spec.k, spec.sig.sigma.clone());
    code.regular = true;
    let mut seeds = Vec::new();
    for set in &sets {
        let elems: BTreeSet<Elem> = set.iter().copied().collect();
        code.add_node(label_for(set, &atype(&elems, a, &spec.sig)));
        seeds.push(NodeSeed::Interface {
            elements: set.clone(),
        });
    }
    code.root = 0; // the empty set sorts first
    for (i, src) in sets.iter().enumerate() {
        for (j, dst) in sets.iter().enumerate() {
            code.add_edge(i, j, shared_renaming(src, dst));
        }
    }
    (code, seeds)
}

/// BGN^k and plump unravellings: interface types (strictly guarded
/// sets) alternating with bag types (interface, superset, chosen label).
fn block_unravelling(
    a: &RelationalStructure,
    spec: &UnravellingSpec,
) -> (RegularTreeCode, Vec<NodeSeed>) {
    let interfaces = guarded_sets(a, &spec.sig, spec.k);
    let supersets = small_sets(a, spec.k);

    // Bag types, grouped by their entering interface.
    let mut bags: Vec<(Vec<Elem>, Vec<Elem>, NodeLabel)> = Vec::new();
    for interface in &interfaces {
        let prev: BTreeSet<Elem> = interface.iter().copied().collect();
        for y in &supersets {
            let set: BTreeSet<Elem> = y.iter().copied().collect();
            if !prev.is_subset(&set) {
                continue;
            }
            // Interface elements keep their names; fresh ones follow.
            let mut elems = interface.clone();
            elems.extend(set.iter().copied().filter(|e| !prev.contains(e)));
            let full = label_for(&elems, &atype(&set, a, &spec.sig));
            let choices = match spec.kind {
                UnravellingKind::Plump => {
                    let protected: BTreeSet<usize> = (1..=interface.len()).collect();
                    safe_restrictions(&full, &spec.sig, &protected)
                        .expect("protected names lie within the bag label")
                }
                _ => vec![full],
            };
            for label in choices {
                bags.push((interface.clone(), elems.clone(), label));
            }
        }
    }
    bags.sort();

    let mut code = TreeCode::new(spec.k, spec.sig.sigma.clone());
    code.regular = true;
    let mut seeds = Vec::new();
    let mut interface_id: BTreeMap<Vec<Elem>, usize> = BTreeMap::new();
    for interface in &interfaces {
        let elems: BTreeSet<Elem> = interface.iter().copied().collect();
        let id = code.add_node(label_for(interface, &atype(&elems, a, &spec.sig)));
        interface_id.insert(interface.clone(), id);
        seeds.push(NodeSeed::Interface {
            elements: interface.clone(),
        });
    }
    code.root = interface_id[&Vec::new()];

    for (prev, elems, label) in &bags {
        let bag_id = code.add_node(label.clone());
        seeds.push(NodeSeed::Bag {
            previous: prev.clone(),
            elements: elems.clone(),
            label: label.clone(),
        });
        // Entering edge: interface names carry over unchanged.
        let rho: EdgeMap = (1..=prev.len()).map(|i| (i, i)).collect();
        code.add_edge(interface_id[prev], bag_id, rho);
        // Leaving edges: strictly guarded subsets the bag label supports.
        let full = label_for(elems, &atype(&elems.iter().copied().collect(), a, &spec.sig));
        for next in &interfaces {
            if !next.iter().all(|e| elems.contains(e)) {
                continue;
            }
            let names: BTreeSet<usize> = next
                .iter()
                .map(|e| elems.iter().position(|x| x == e).unwrap() + 1)
                .collect();
            if !interface_supported(&names, label, &full, &spec.sig) {
                continue;
            }
            let rho: EdgeMap = next
                .iter()
                .enumerate()
                .map(|(j, e)| (elems.iter().position(|x| x == e).unwrap() + 1, j + 1))
                .collect();
            code.add_edge(bag_id, interface_id[next], rho);
        }
    }
    (code, seeds)
}

/// May a bag with label `tau` (a restriction of `full`) hand off to an
/// interface on the given names? The names must be strictly guarded by
/// an atom of `tau` (sets of size ≤ 1 trivially so), and `tau` must
/// agree with the full type on all facts inside them — otherwise the
/// interface's exact-type label would contradict the bag's.
fn interface_supported(
    names: &BTreeSet<usize>,
    tau: &NodeLabel,
    full: &NodeLabel,
    sig: &GuardedSignature,
) -> bool {
    let guarded = names.len() <= 1
        || tau
            .facts
            .iter()
            .any(|(rel, seq)| sig.is_guard_relation(rel) && index_set(seq) == *names);
    guarded
        && full
            .facts
            .iter()
            .filter(|(_, seq)| index_set(seq).is_subset(names))
            .all(|fact| tau.facts.contains(fact))
}

/// All safe restrictions of a node label: sublabels that keep every
/// fact protected by a guard atom of the base label or lying inside the
/// protected name set `x`, and drop any subset of the rest. The base
/// label itself is always included.
pub fn safe_restrictions(
    tau_prime: &NodeLabel,
    sig: &GuardedSignature,
    x: &BTreeSet<usize>,
) -> Result<Vec<NodeLabel>, CodeError> {
    if let Some(&bad) = x.iter().find(|&&i| i == 0 || i > tau_prime.n) {
        return Err(CodeError::Structural(format!(
            "protected name {bad} outside the label's domain predicate D{}",
            tau_prime.n
        )));
    }
    let mut forced: Vec<(String, Vec<usize>)> = Vec::new();
    let mut free: Vec<(String, Vec<usize>)> = Vec::new();
    for fact in &tau_prime.facts {
        let indices = index_set(&fact.1);
        if guarded_in(&indices, tau_prime, sig) || indices.is_subset(x) {
            forced.push(fact.clone());
        } else {
            free.push(fact.clone());
        }
    }
    if free.len() > 16 {
        return Err(CodeError::AlphabetCapacity(free.len()));
    }
    let mut out: BTreeSet<NodeLabel> = BTreeSet::new();
    for mask in 0u32..(1 << free.len()) {
        let mut label = NodeLabel::new(tau_prime.n);
        label.facts.extend(forced.iter().cloned());
        label.facts.extend(
            free.iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, f)| f.clone()),
        );
        out.insert(label);
    }
    Ok(out.into_iter().collect())
}

/// Unfold a (regular) code into a finite tree of the given depth: the
/// root plus every path of at most `d` edges.
pub fn materialize(t: &TreeCode, d: usize) -> TreeCode {
    let mut out = TreeCode::new(t.k, t.sigma.clone());
    let root = out.add_node(t.label(t.root).clone());
    out.root = root;
    let mut frontier: Vec<(usize, usize)> = vec![(t.root, root)];
    for _ in 0..d {
        let mut next = Vec::new();
        for (old, new) in frontier {
            for e in t.children(old) {
                let child = out.add_node(t.label(e.dst).clone());
                out.add_edge(new, child, e.rho.clone());
                next.push((e.dst, child));
            }
        }
        frontier = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{check_consistency, decode};
    use crate::games::{bisimilar_to_depth, GameConfig};
    use crate::syntax::{GuardedSignature, Signature};

    fn sig_r() -> GuardedSignature {
        GuardedSignature::full(Signature::new([("R", 2)]))
    }

    fn sig_gp() -> GuardedSignature {
        GuardedSignature::with_guards(Signature::new([("G", 2), ("P", 1)]), ["G"]).unwrap()
    }

    fn single_fact() -> RelationalStructure {
        let mut a = RelationalStructure::new(0..2);
        a.add_fact("R", [0, 1]);
        a
    }

    /// A guarded pair plus a stray unary fact on a third element.
    fn guarded_pair_with_stray() -> RelationalStructure {
        let mut a = RelationalStructure::new(0..3);
        a.add_fact("G", [0, 1]);
        a.add_fact("P", [2]);
        a
    }

    #[test]
    fn guarded_unravelling_of_single_fact_has_four_node_types() {
        let t = unravel(&single_fact(), &UnravellingSpec::g(sig_r(), 2));
        assert_eq!(t.labels.len(), 4); // {}, {a}, {b}, {a,b}
        assert!(t.regular);
        assert_eq!(t.label(t.root).n, 0); // root carries D_0
        assert_eq!(t.edges.len(), 16); // all ordered pairs
        t.structural_check().unwrap();
        assert!(check_consistency(&t).unwrap().violations.is_empty());
    }

    #[test]
    fn all_kinds_produce_consistent_regular_codes() {
        let fixtures = [single_fact(), guarded_pair_with_stray()];
        for a in &fixtures {
            let sig = if a.domain.len() == 2 { sig_r() } else { sig_gp() };
            for spec in [
                UnravellingSpec::g(sig.clone(), 2),
                UnravellingSpec::gn(sig.clone(), 2),
                UnravellingSpec::bgn(sig.clone(), 2),
                UnravellingSpec::plump(sig.clone(), 2),
            ] {
                let t = unravel(a, &spec);
                t.structural_check().unwrap();
                let report = check_consistency(&t).unwrap();
                assert!(
                    report.violations.is_empty(),
                    "{:?}: {:?}",
                    spec.kind,
                    report.violations
                );
            }
        }
    }

    #[test]
    fn materialize_unfolds_to_requested_depth() {
        let t = unravel(&single_fact(), &UnravellingSpec::g(sig_r(), 2));
        let m0 = materialize(&t, 0);
        assert_eq!(m0.labels.len(), 1);
        assert!(m0.edges.is_empty());
        assert_eq!(m0.label(m0.root), t.label(t.root));
        let m2 = materialize(&t, 2);
        assert_eq!(m2.labels.len(), 1 + 4 + 16);
        m2.structural_check().unwrap();
        assert!(check_consistency(&m2).unwrap().violations.is_empty());
        // Every materialized label is one of the regular node labels.
        for label in &m2.labels {
            assert!(t.labels.contains(label));
        }
    }

    #[test]
    fn block_unravellings_alternate_guarded_interfaces_with_bags() {
        let a = guarded_pair_with_stray();
        for spec in [
            UnravellingSpec::bgn(sig_gp(), 2),
            UnravellingSpec::plump(sig_gp(), 2),
        ] {
            let m = materialize(&unravel(&a, &spec), 3);
            // Walk by level: even levels are interfaces (≤1 names or a
            // guard fact covering exactly the whole name set).
            let mut level: Vec<usize> = vec![m.root];
            for depth in 0..=3usize {
                for &v in &level {
                    let label = m.label(v);
                    if depth % 2 == 0 {
                        let names: BTreeSet<usize> = (1..=label.n).collect();
                        assert!(
                            crate::codes::trivially_or_strictly_guarded(
                                &names,
                                label,
                                &sig_gp()
                            ),
                            "interface node at depth {depth} not guarded: {label:?}"
                        );
                    } else {
                        assert!(label.n <= spec.k, "bag too wide at depth {depth}");
                    }
                }
                level = level
                    .iter()
                    .flat_map(|&v| m.children(v).map(|e| e.dst))
                    .collect();
            }
        }
    }

    #[test]
    fn safe_restrictions_match_the_definition() {
        let sig = sig_gp();
        // All facts guarded: only the label itself.
        let tau = NodeLabel::with_facts(2, [("G", vec![1, 2])]);
        let only = safe_restrictions(&tau, &sig, &BTreeSet::new()).unwrap();
        assert_eq!(only, vec![tau.clone()]);
        // A stray fact outside the protected names may be dropped.
        let tau_prime = NodeLabel::with_facts(3, [("G", vec![1, 2]), ("P", vec![3])]);
        let x: BTreeSet<usize> = [1, 2].into_iter().collect();
        let got = safe_restrictions(&tau_prime, &sig, &x).unwrap();
        let without_p = NodeLabel::with_facts(3, [("G", vec![1, 2])]);
        assert_eq!(got, vec![without_p, tau_prime.clone()]);
        // Protecting the stray index forces it back in.
        let x_all: BTreeSet<usize> = [1, 2, 3].into_iter().collect();
        let forced = safe_restrictions(&tau_prime, &sig, &x_all).unwrap();
        assert_eq!(forced, vec![tau_prime.clone()]);
        // Out-of-range protected names are rejected.
        let bad: BTreeSet<usize> = [4].into_iter().collect();
        assert!(safe_restrictions(&tau_prime, &sig, &bad).is_err());
    }

    #[test]
    fn plump_equals_block_when_all_facts_are_guarded() {
        let mut a = RelationalStructure::new(0..2);
        a.add_fact("G", [0, 1]);
        let sig = GuardedSignature::with_guards(Signature::new([("G", 2)]), ["G"]).unwrap();
        let plain = unravel(&a, &UnravellingSpec::bgn(sig.clone(), 2));
        let plump = unravel(&a, &UnravellingSpec::plump(sig, 2));
        assert_eq!(plain.labels.len(), plump.labels.len());
        let mut l1 = plain.labels.clone();
        let mut l2 = plump.labels.clone();
        l1.sort();
        l2.sort();
        assert_eq!(l1, l2);
        assert_eq!(plain.edges.len(), plump.edges.len());
    }

    #[test]
    fn plump_realizes_restrictions_as_siblings_and_prunes_broken_interfaces() {
        let a = guarded_pair_with_stray();
        let t = unravel(&a, &UnravellingSpec::plump(sig_gp(), 3));
        // The full bag {0,1,2} entered from the root: both the full
        // label and the P-dropping restriction appear as bag types.
        let full = NodeLabel::with_facts(3, [("G", vec![1, 2]), ("P", vec![3])]);
        let dropped = NodeLabel::with_facts(3, [("G", vec![1, 2])]);
        assert!(t.labels.contains(&full));
        assert!(t.labels.contains(&dropped));
        let find = |label: &NodeLabel| {
            t.labels
                .iter()
                .position(|l| l == label)
                .expect("bag type present")
        };
        // The restricted bag must not hand its third name to an
        // interface (the exact-type interface would contradict it).
        let dropped_id = find(&dropped);
        for e in t.children(dropped_id) {
            assert!(
                !e.rho.keys().any(|&i| i == 3),
                "restricted bag leaked its dropped name: {e:?}"
            );
        }
        // The full bag does hand name 3 to the singleton interface.
        let full_id = find(&full);
        assert!(t.children(full_id).any(|e| e.rho.keys().any(|&i| i == 3)));
        // Closure: every safe restriction of every bag label appears
        // among the same interface's children.
        for e in t.edges.iter().filter(|e| e.src < t.labels.len()) {
            let src_label = t.label(e.src);
            let dst_label = t.label(e.dst);
            // Only look at interface → bag edges (identity-entering).
            if e.rho.iter().all(|(a, b)| a == b)
                && e.rho.len() == src_label.n
                && dst_label.n >= src_label.n
            {
                let protected: BTreeSet<usize> = (1..=src_label.n).collect();
                for tau in safe_restrictions(dst_label, &sig_gp(), &protected).unwrap() {
                    assert!(
                        t.children(e.src).any(|sib| t.label(sib.dst) == &tau
                            && sib.rho == e.rho),
                        "missing sibling restriction {tau:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn decoded_materializations_are_depth_bisimilar_to_the_source() {
        let fixtures = [single_fact(), guarded_pair_with_stray()];
        for a in &fixtures {
            let sig = if a.domain.len() == 2 { sig_r() } else { sig_gp() };
            let cases = [
                (UnravellingSpec::g(sig.clone(), 2), GameConfig::guarded(sig.clone())),
                (UnravellingSpec::bgn(sig.clone(), 2), GameConfig::bgn(sig.clone(), 2)),
                (UnravellingSpec::plump(sig.clone(), 2), GameConfig::bgn(sig.clone(), 2)),
            ] ;
            for (spec, cfg) in &cases {
                let m = materialize(&unravel(a, spec), 3);
                let u = decode(&m).unwrap();
                assert!(
                    bisimilar_to_depth(a, &u, cfg, 3).unwrap(),
                    "{:?} unravelling of {a:?} not depth-3 bisimilar",
                    spec.kind
                );
            }
        }
    }
}
