//! Tree codes of bounded-width structures: the code alphabet, consistency
//! checking, decoding codes back to structures, and encoding structures
//! via exact tree-decomposition search.
//!
//! A code is a rooted tree (or, for regular codes, a finite rooted graph
//! whose unfolding is the intended tree). Every node carries a label
//! `{D_n} ∪ {R_ī, …}`: the node hosts `n ≤ k` local names, and `R_ī`
//! asserts the fact `R` on the named elements. Every edge carries a
//! partial injective map `ρ` telling which names of the source survive —
//! and under which name — in the target.

// Vertices of the decomposition search are plain indices; index loops
// keep the adjacency math readable.
#![allow(clippy::needless_range_loop)]

use crate::par;
use crate::semantics::{Elem, RelationalStructure};
use crate::syntax::Signature;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

pub type NodeId = usize;

/// A partial injective map on names `{1..k}`.
pub type EdgeMap = BTreeMap<usize, usize>;

#[derive(Debug, Error)]
pub enum CodeError {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("unknown predicate spelling {0:?}")]
    UnknownPredicate(String),
    #[error("ambiguous predicate spelling {0:?}")]
    AmbiguousPredicate(String),
    #[error("inconsistent code: {0}")]
    Inconsistent(String),
    #[error("operation {0} requires a finite tree code; materialize the regular code first")]
    RegularUnsupported(&'static str),
    #[error("no tree decomposition with bags of size {requested} exists: the structure forces a bag of size {needed}")]
    NoDecomposition { needed: usize, requested: usize },
    #[error("structure with {elements} elements exceeds the exact decomposition search capacity ({cap})")]
    DecompositionCapacity { elements: usize, cap: usize },
    #[error("alphabet enumeration with {0} fact predicates per label exceeds capacity")]
    AlphabetCapacity(usize),
    #[error("signature string {0:?} is malformed (expected comma-separated name/arity pairs)")]
    BadSigma(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

// ---------------------------------------------------------------------
// Alphabet

/// The unary and binary predicates available to codes of width parameter
/// `k` over a signature: domain predicates `D_0..D_k`, fact predicates
/// `R_ī` for every relation and index sequence, and one edge relation per
/// partial injective map on `{1..k}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeAlphabet {
    pub k: usize,
    pub sigma: Signature,
    /// Set when `k` is smaller than the signature width: codes still make
    /// sense, but structures with wide facts cannot be encoded.
    pub warning: Option<String>,
}

/// Spelling of a fact predicate: `R_1_2` for `R` applied to names (1,2).
pub fn fact_prop(rel: &str, indices: &[usize]) -> String {
    let mut out = rel.to_string();
    for i in indices {
        out.push('_');
        out.push_str(&i.to_string());
    }
    out
}

/// The set of names occurring in an index sequence.
pub fn index_set(indices: &[usize]) -> BTreeSet<usize> {
    indices.iter().copied().collect()
}

pub fn build_alphabet(sigma: &Signature, k: usize) -> CodeAlphabet {
    let warning = if k < sigma.width() {
        Some(format!(
            "width parameter k={k} is below the signature width {}: facts of higher arity cannot be encoded over distinct elements",
            sigma.width()
        ))
    } else {
        None
    };
    CodeAlphabet {
        k,
        sigma: sigma.clone(),
        warning,
    }
}

impl CodeAlphabet {
    /// `D_0 .. D_k`, spelled `D0..Dk`.
    pub fn domain_props(&self) -> Vec<String> {
        (0..=self.k).map(|n| format!("D{n}")).collect()
    }

    /// Every fact predicate `R_ī` with `ī` over `{1..k}`.
    pub fn fact_predicates(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (rel, &arity) in &self.sigma.relations {
            let count = (self.k as u64).pow(arity as u32);
            for code in 0..count {
                let mut seq = Vec::with_capacity(arity);
                let mut rest = code;
                for _ in 0..arity {
                    seq.push((rest % self.k as u64) as usize + 1);
                    rest /= self.k as u64;
                }
                seq.reverse();
                out.push((rel.clone(), seq));
            }
        }
        out.sort();
        out
    }

    /// Every partial injective map on `{1..k}`.
    pub fn edge_maps(&self) -> Vec<EdgeMap> {
        let mut out = vec![EdgeMap::new()];
        for i in 1..=self.k {
            let mut next = Vec::new();
            for m in &out {
                next.push(m.clone());
                for j in 1..=self.k {
                    if !m.values().any(|&v| v == j) {
                        let mut ext = m.clone();
                        ext.insert(i, j);
                        next.push(ext);
                    }
                }
            }
            out = next;
        }
        out.sort();
        out
    }

    /// Every internally consistent node label (one domain predicate, fact
    /// indices within the active names). Errors out when the enumeration
    /// would be too large to be useful.
    pub fn node_labels(&self) -> Result<Vec<NodeLabel>, CodeError> {
        let mut out = Vec::new();
        for n in 0..=self.k {
            let preds: Vec<(String, Vec<usize>)> = self
                .fact_predicates()
                .into_iter()
                .filter(|(_, seq)| seq.iter().all(|&i| i <= n))
                .collect();
            if preds.len() > 16 {
                return Err(CodeError::AlphabetCapacity(preds.len()));
            }
            for mask in 0u64..(1u64 << preds.len()) {
                let facts: BTreeSet<(String, Vec<usize>)> = preds
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| mask & (1 << b) != 0)
                    .map(|(_, p)| p.clone())
                    .collect();
                out.push(NodeLabel { n, facts });
            }
        }
        out.sort();
        Ok(out)
    }
}

// ---------------------------------------------------------------------
// Labels and codes

/// A node label: the number `n` of active names plus the asserted facts.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeLabel {
    pub n: usize,
    pub facts: BTreeSet<(String, Vec<usize>)>,
}

impl NodeLabel {
    pub fn new(n: usize) -> Self {
        NodeLabel {
            n,
            facts: BTreeSet::new(),
        }
    }

    pub fn with_facts<'b>(
        n: usize,
        facts: impl IntoIterator<Item = (&'b str, Vec<usize>)>,
    ) -> Self {
        NodeLabel {
            n,
            facts: facts
                .into_iter()
                .map(|(r, seq)| (r.to_string(), seq))
                .collect(),
        }
    }

    pub fn has_fact(&self, rel: &str, indices: &[usize]) -> bool {
        self.facts.contains(&(rel.to_string(), indices.to_vec()))
    }

    /// Canonically sorted predicate spellings: the domain predicate first,
    /// then the facts.
    pub fn props(&self) -> Vec<String> {
        let mut out = vec![format!("D{}", self.n)];
        out.extend(self.facts.iter().map(|(r, seq)| fact_prop(r, seq)));
        out
    }
}

/// Is the fact predicate (strictly) guarded in the label: some fact over
/// a guard relation whose index set covers (equals) the given index set?
pub fn guarded_in(
    indices: &BTreeSet<usize>,
    tau: &NodeLabel,
    sig: &crate::syntax::GuardedSignature,
) -> bool {
    tau.facts.iter().any(|(rel, seq)| {
        sig.is_guard_relation(rel) && indices.is_subset(&index_set(seq))
    })
}

pub fn strictly_guarded(
    indices: &BTreeSet<usize>,
    tau: &NodeLabel,
    sig: &crate::syntax::GuardedSignature,
) -> bool {
    tau.facts
        .iter()
        .any(|(rel, seq)| sig.is_guard_relation(rel) && index_set(seq) == *indices)
}

/// The convention used by games, unravellings, and the backward mapping:
/// name sets of size at most one count as strictly guarded.
pub fn trivially_or_strictly_guarded(
    indices: &BTreeSet<usize>,
    tau: &NodeLabel,
    sig: &crate::syntax::GuardedSignature,
) -> bool {
    indices.len() <= 1 || strictly_guarded(indices, tau, sig)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CodeEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub rho: EdgeMap,
}

/// A tree code. With `regular: true` the underlying graph may contain
/// shared nodes and cycles; the intended object is its unfolding from the
/// root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeCode {
    pub k: usize,
    pub sigma: Signature,
    pub root: NodeId,
    pub labels: Vec<NodeLabel>,
    pub edges: Vec<CodeEdge>,
    pub regular: bool,
}

/// Same representation; cycles permitted and the unfolding is intended.
pub type RegularTreeCode = TreeCode;

impl TreeCode {
    pub fn new(k: usize, sigma: Signature) -> Self {
        TreeCode {
            k,
            sigma,
            root: 0,
            labels: Vec::new(),
            edges: Vec::new(),
            regular: false,
        }
    }

    pub fn add_node(&mut self, label: NodeLabel) -> NodeId {
        self.labels.push(label);
        self.labels.len() - 1
    }

    pub fn add_edge(&mut self, src: NodeId, dst: NodeId, rho: EdgeMap) {
        self.edges.push(CodeEdge { src, dst, rho });
    }

    pub fn label(&self, v: NodeId) -> &NodeLabel {
        &self.labels[v]
    }

    pub fn children(&self, v: NodeId) -> impl Iterator<Item = &CodeEdge> {
        self.edges.iter().filter(move |e| e.src == v)
    }

    pub fn parents(&self, v: NodeId) -> impl Iterator<Item = &CodeEdge> {
        self.edges.iter().filter(move |e| e.dst == v)
    }

    /// Ids of all nodes reachable from the root.
    pub fn reachable(&self) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            if seen.insert(v) {
                for e in self.children(v) {
                    stack.push(e.dst);
                }
            }
        }
        seen
    }

    /// Well-formedness that is independent of the consistency conditions:
    /// ids in range, maps injective within `{1..k}`, fact indices within
    /// `{1..k}`, every node reachable, and tree shape unless regular.
    pub fn structural_check(&self) -> Result<(), CodeError> {
        let n = self.labels.len();
        if self.root >= n {
            return Err(CodeError::Structural(format!(
                "root {} out of range",
                self.root
            )));
        }
        for (v, label) in self.labels.iter().enumerate() {
            if label.n > self.k {
                return Err(CodeError::Structural(format!(
                    "node {v} has domain size {} > k={}",
                    label.n, self.k
                )));
            }
            for (rel, seq) in &label.facts {
                if !self.sigma.contains(rel) {
                    return Err(CodeError::Structural(format!(
                        "node {v} uses relation {rel} outside the signature"
                    )));
                }
                if seq.len() != self.sigma.arity(rel).unwrap_or(0) {
                    return Err(CodeError::Structural(format!(
                        "node {v} fact {} has wrong arity",
                        fact_prop(rel, seq)
                    )));
                }
                if seq.iter().any(|&i| i == 0 || i > self.k) {
                    return Err(CodeError::Structural(format!(
                        "node {v} fact {} uses a name outside 1..={}",
                        fact_prop(rel, seq),
                        self.k
                    )));
                }
            }
        }
        for e in &self.edges {
            if e.src >= n || e.dst >= n {
                return Err(CodeError::Structural(format!(
                    "edge {}→{} out of range",
                    e.src, e.dst
                )));
            }
            let mut targets = BTreeSet::new();
            for (&i, &j) in &e.rho {
                if i == 0 || i > self.k || j == 0 || j > self.k {
                    return Err(CodeError::Structural(format!(
                        "edge {}→{} maps names outside 1..={}",
                        e.src, e.dst, self.k
                    )));
                }
                if !targets.insert(j) {
                    return Err(CodeError::Structural(format!(
                        "edge {}→{} map is not injective",
                        e.src, e.dst
                    )));
                }
            }
        }
        let reachable = self.reachable();
        if reachable.len() != n {
            return Err(CodeError::Structural(format!(
                "{} of {} nodes unreachable from the root",
                n - reachable.len(),
                n
            )));
        }
        if !self.regular {
            let mut indegree = vec![0usize; n];
            for e in &self.edges {
                indegree[e.dst] += 1;
            }
            if indegree[self.root] != 0 {
                return Err(CodeError::Structural(
                    "root of a finite tree code has an incoming edge".into(),
                ));
            }
            for (v, &d) in indegree.iter().enumerate() {
                if v != self.root && d != 1 {
                    return Err(CodeError::Structural(format!(
                        "node {v} has in-degree {d} in a finite tree code"
                    )));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------
// Consistency

/// One violated consistency condition, attributed to the lowest node id
/// involved.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Violation {
    pub node: NodeId,
    pub condition: u8,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConsistencyReport {
    pub consistent: bool,
    pub violations: Vec<Violation>,
}

/// Check the four consistency conditions: (1) the root hosts zero names,
/// (2) edge maps respect the active-name counts, (3) fact indices stay
/// within the active names, (4) neighbouring labels agree on shared
/// names. All conditions are local, so on a regular code the finite graph
/// is checked directly. Violations are reported lowest node id first.
pub fn check_consistency(t: &TreeCode) -> Result<ConsistencyReport, CodeError> {
    t.structural_check()?;
    let nodes: Vec<NodeId> = (0..t.labels.len()).collect();
    let per_node = par::map(nodes, |&v| node_violations(t, v));
    let mut violations: Vec<Violation> = per_node.into_iter().flatten().collect();
    violations.sort();
    violations.dedup();
    Ok(ConsistencyReport {
        consistent: violations.is_empty(),
        violations,
    })
}

fn node_violations(t: &TreeCode, v: NodeId) -> Vec<Violation> {
    let mut out = Vec::new();
    let label = t.label(v);
    if v == t.root && label.n != 0 {
        out.push(Violation {
            node: v,
            condition: 1,
            detail: format!("root is labelled D{} instead of D0", label.n),
        });
    }
    for (rel, seq) in &label.facts {
        if seq.iter().any(|&i| i > label.n) {
            out.push(Violation {
                node: v,
                condition: 3,
                detail: format!(
                    "fact {} uses a name beyond the {} active names",
                    fact_prop(rel, seq),
                    label.n
                ),
            });
        }
    }
    for e in t.children(v) {
        let child = t.label(e.dst);
        let bad_dom = e.rho.keys().any(|&i| i > label.n);
        let bad_cod = e.rho.values().any(|&j| j > child.n);
        if bad_dom || bad_cod {
            out.push(Violation {
                node: v.min(e.dst),
                condition: 2,
                detail: format!(
                    "edge {}→{} map leaves the active names (D{} source, D{} target)",
                    e.src, e.dst, label.n, child.n
                ),
            });
        }
        // Condition (4), both directions along this edge.
        for (rel, seq) in &label.facts {
            if seq.iter().all(|i| e.rho.contains_key(i)) {
                let mapped: Vec<usize> = seq.iter().map(|i| e.rho[i]).collect();
                if !child.has_fact(rel, &mapped) {
                    out.push(Violation {
                        node: v.min(e.dst),
                        condition: 4,
                        detail: format!(
                            "{} at node {} is not matched by {} at node {}",
                            fact_prop(rel, seq),
                            v,
                            fact_prop(rel, &mapped),
                            e.dst
                        ),
                    });
                }
            }
        }
        let inverse: BTreeMap<usize, usize> =
            e.rho.iter().map(|(&i, &j)| (j, i)).collect();
        for (rel, seq) in &child.facts {
            if seq.iter().all(|j| inverse.contains_key(j)) {
                let mapped: Vec<usize> = seq.iter().map(|j| inverse[j]).collect();
                if !label.has_fact(rel, &mapped) {
                    out.push(Violation {
                        node: v.min(e.dst),
                        condition: 4,
                        detail: format!(
                            "{} at node {} is not matched by {} at node {}",
                            fact_prop(rel, seq),
                            e.dst,
                            fact_prop(rel, &mapped),
                            v
                        ),
                    });
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------
// Decoding

struct ClassFinder {
    offset: Vec<usize>,
    parent: Vec<usize>,
}

impl ClassFinder {
    fn new(t: &TreeCode) -> ClassFinder {
        let mut offset = Vec::with_capacity(t.labels.len());
        let mut total = 0;
        for label in &t.labels {
            offset.push(total);
            total += label.n;
        }
        let mut finder = ClassFinder {
            offset,
            parent: (0..total).collect(),
        };
        for e in &t.edges {
            for (&i, &j) in &e.rho {
                if i <= t.label(e.src).n && j <= t.label(e.dst).n {
                    let a = finder.slot(e.src, i);
                    let b = finder.slot(e.dst, j);
                    finder.union(a, b);
                }
            }
        }
        finder
    }

    fn slot(&self, v: NodeId, i: usize) -> usize {
        self.offset[v] + (i - 1)
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let r = self.find(self.parent[x]);
            self.parent[x] = r;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            // Keep the smaller slot as representative so canonical
            // representatives are the least (node, name) pairs.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }

    fn pair_of(&self, slot: usize) -> (NodeId, usize) {
        let v = match self.offset.binary_search(&slot) {
            Ok(mut idx) => {
                // Nodes with zero names share offsets; take the last node
                // that actually starts at this offset and has names.
                while idx + 1 < self.offset.len() && self.offset[idx + 1] == slot {
                    idx += 1;
                }
                idx
            }
            Err(idx) => idx - 1,
        };
        (v, slot - self.offset[v] + 1)
    }
}

fn ensure_decodable(t: &TreeCode) -> Result<(), CodeError> {
    if t.regular {
        return Err(CodeError::RegularUnsupported("decode"));
    }
    let report = check_consistency(t)?;
    // The root-name condition does not affect the decoded structure, so a
    // bare bag (root other than D0) is tolerated here.
    if let Some(v) = report.violations.iter().find(|v| v.condition != 1) {
        return Err(CodeError::Inconsistent(format!(
            "condition ({}) at node {}: {}",
            v.condition, v.node, v.detail
        )));
    }
    Ok(())
}

/// Decode a consistent finite code: one element per class of (node, name)
/// pairs glued along the edge maps; one fact per encoded fact predicate.
pub fn decode(t: &TreeCode) -> Result<RelationalStructure, CodeError> {
    ensure_decodable(t)?;
    let mut finder = ClassFinder::new(t);
    let total = finder.parent.len();
    let reps: Vec<usize> = (0..total).map(|x| finder.find(x)).collect();
    let mut rep_ids: BTreeMap<usize, Elem> = BTreeMap::new();
    for &r in reps.iter() {
        let next = rep_ids.len() as Elem;
        rep_ids.entry(r).or_insert(next);
    }
    let mut a = RelationalStructure::new(0..rep_ids.len() as Elem);
    for (v, label) in t.labels.iter().enumerate() {
        for (rel, seq) in &label.facts {
            let tuple: Vec<Elem> = seq
                .iter()
                .map(|&i| rep_ids[&reps[finder.slot(v, i)]])
                .collect();
            a.facts.insert((rel.clone(), tuple));
        }
    }
    Ok(a)
}

/// Canonical representative of the class of `(v, i)`: the least
/// (node, name) pair reachable through compositions of edge maps.
pub fn element_class(t: &TreeCode, v: NodeId, i: usize) -> Result<(NodeId, usize), CodeError> {
    if t.regular {
        return Err(CodeError::RegularUnsupported("element_class"));
    }
    t.structural_check()?;
    if v >= t.labels.len() || i == 0 || i > t.label(v).n {
        return Err(CodeError::Structural(format!(
            "name {i} is not active at node {v}"
        )));
    }
    let mut finder = ClassFinder::new(t);
    let slot = finder.slot(v, i);
    let rep = finder.find(slot);
    Ok(finder.pair_of(rep))
}

// ---------------------------------------------------------------------
// Tree decompositions and encoding

/// A rooted tree of bags over a structure's domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeDecomposition {
    /// Bag contents in name order (position p holds the element named p+1).
    pub bags: Vec<Vec<Elem>>,
    pub parent: Vec<Option<usize>>,
    pub root: usize,
}

impl TreeDecomposition {
    /// Maximum bag size minus one; a single empty bag has width 0 here.
    pub fn width(&self) -> usize {
        self.bags
            .iter()
            .map(|b| b.len())
            .max()
            .unwrap_or(0)
            .saturating_sub(1)
    }

    /// Every fact covered by a bag; every element's bags connected.
    pub fn validate(&self, a: &RelationalStructure) -> Result<(), String> {
        for (rel, args) in &a.facts {
            let elems: BTreeSet<Elem> = args.iter().copied().collect();
            if !self
                .bags
                .iter()
                .any(|bag| elems.iter().all(|e| bag.contains(e)))
            {
                return Err(format!("fact {rel}{args:?} is not covered by any bag"));
            }
        }
        for &e in &a.domain {
            let holding: Vec<usize> = (0..self.bags.len())
                .filter(|&b| self.bags[b].contains(&e))
                .collect();
            if holding.is_empty() {
                return Err(format!("element {e} appears in no bag"));
            }
            // Walk up from each holding bag; within the holding set the
            // bags must form one connected subtree.
            let set: BTreeSet<usize> = holding.iter().copied().collect();
            let mut tops = BTreeSet::new();
            for &b in &holding {
                let mut cur = b;
                while let Some(p) = self.parent[cur] {
                    if set.contains(&p) {
                        cur = p;
                    } else {
                        break;
                    }
                }
                tops.insert(cur);
            }
            if tops.len() != 1 {
                return Err(format!("element {e} has disconnected bags"));
            }
        }
        Ok(())
    }
}

const DECOMPOSITION_CAP: usize = 9;

/// Exact minimum-width tree decomposition by dynamic programming over
/// elimination orderings (the fill graph after eliminating a set is
/// independent of the order, so subsets are the right state).
pub fn decompose(a: &RelationalStructure, max_bag: usize) -> Result<TreeDecomposition, CodeError> {
    let n = a.domain.len();
    if n > DECOMPOSITION_CAP {
        return Err(CodeError::DecompositionCapacity {
            elements: n,
            cap: DECOMPOSITION_CAP,
        });
    }
    if n == 0 {
        return Ok(TreeDecomposition {
            bags: vec![vec![]],
            parent: vec![None],
            root: 0,
        });
    }
    // Gaifman adjacency as bitmasks (elements are 0..n).
    let mut adj = vec![0u32; n];
    for (_, args) in &a.facts {
        for &x in args {
            for &y in args {
                if x != y {
                    adj[x as usize] |= 1 << y;
                }
            }
        }
    }
    let full: u32 = (1u32 << n) - 1;
    // Adjacency after eliminating the set `s`, which is independent of
    // the elimination order: two live vertices are adjacent iff the
    // original graph connects them by a path through eliminated vertices.
    fn fill(adj: &[u32], s: u32) -> Vec<u32> {
        let n = adj.len();
        let mut g = vec![0u32; n];
        for u in 0..n {
            if s & (1 << u) != 0 {
                continue;
            }
            let mut seen = 1u32 << u;
            let mut stack = vec![u];
            let mut nb = 0u32;
            while let Some(x) = stack.pop() {
                let mut rest = adj[x] & !seen;
                while rest != 0 {
                    let v = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    seen |= 1 << v;
                    if s & (1 << v) != 0 {
                        stack.push(v);
                    } else {
                        nb |= 1 << v;
                    }
                }
            }
            g[u] = nb;
        }
        g
    }
    let mut memo: HashMap<u32, usize> = HashMap::new();
    fn best(adj: &[u32], s: u32, full: u32, memo: &mut HashMap<u32, usize>) -> usize {
        if s == full {
            return 0;
        }
        if let Some(&b) = memo.get(&s) {
            return b;
        }
        let g = fill(adj, s);
        let n = adj.len();
        let mut result = usize::MAX;
        for v in 0..n {
            if s & (1 << v) == 0 {
                let bag = 1 + (g[v] & !s).count_ones() as usize;
                let rest = best(adj, s | (1 << v), full, memo);
                result = result.min(bag.max(rest));
            }
        }
        memo.insert(s, result);
        result
    }
    let needed = best(&adj, 0, full, &mut memo);
    if needed > max_bag {
        return Err(CodeError::NoDecomposition {
            needed,
            requested: max_bag,
        });
    }
    // Reconstruct a witness ordering greedily.
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut s = 0u32;
    while s != full {
        let target = best(&adj, s, full, &mut memo);
        let g = fill(&adj, s);
        for v in 0..n {
            if s & (1 << v) == 0 {
                let bag = 1 + (g[v] & !s).count_ones() as usize;
                if bag.max(best(&adj, s | (1 << v), full, &mut memo)) == target {
                    order.push(v);
                    s |= 1 << v;
                    break;
                }
            }
        }
    }
    // Bags along the ordering; parent = bag of the earliest-later
    // neighbour in the fill graph at elimination time.
    let position: HashMap<usize, usize> =
        order.iter().enumerate().map(|(p, &v)| (v, p)).collect();
    let mut bags: Vec<Vec<Elem>> = Vec::with_capacity(n);
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut eliminated = 0u32;
    for (step, &v) in order.iter().enumerate() {
        let g = fill(&adj, eliminated);
        let nb = g[v] & !eliminated;
        let mut bag: Vec<Elem> = vec![v as Elem];
        let mut first_later: Option<usize> = None;
        for u in 0..n {
            if nb & (1 << u) != 0 {
                bag.push(u as Elem);
                let pos = position[&u];
                if first_later.is_none_or(|f| position[&order[f]] > pos) {
                    first_later = Some(pos);
                }
            }
        }
        bag.sort_unstable();
        bags.push(bag);
        parent[step] = match first_later {
            Some(pos) => Some(pos),
            None => {
                if step + 1 < n {
                    Some(step + 1)
                } else {
                    None
                }
            }
        };
        eliminated |= 1 << v;
    }
    let root = n - 1;
    let mut dec = TreeDecomposition { bags, parent, root };
    prune_subset_bags(&mut dec);
    order_bags(&mut dec);
    dec.validate(a).map_err(CodeError::Structural)?;
    Ok(dec)
}

/// Contract tree edges whose endpoint bags are in a containment relation,
/// keeping the superset. Elimination orderings produce chains of shrinking
/// suffix bags; this folds them away so small structures get the minimal
/// natural decomposition (a single bag when one suffices).
fn prune_subset_bags(dec: &mut TreeDecomposition) {
    let mut alive = vec![true; dec.bags.len()];
    loop {
        let mut contracted = false;
        for c in 0..dec.bags.len() {
            if !alive[c] {
                continue;
            }
            let Some(p) = dec.parent[c] else { continue };
            let cs: BTreeSet<Elem> = dec.bags[c].iter().copied().collect();
            let ps: BTreeSet<Elem> = dec.bags[p].iter().copied().collect();
            if cs.is_subset(&ps) || ps.is_subset(&cs) {
                if ps.is_subset(&cs) {
                    dec.bags[p] = dec.bags[c].clone();
                }
                alive[c] = false;
                for x in 0..dec.bags.len() {
                    if alive[x] && dec.parent[x] == Some(c) {
                        dec.parent[x] = Some(p);
                    }
                }
                contracted = true;
                break;
            }
        }
        if !contracted {
            break;
        }
    }
    let mut remap: Vec<Option<usize>> = vec![None; dec.bags.len()];
    let mut bags = Vec::new();
    for (b, &live) in alive.iter().enumerate() {
        if live {
            remap[b] = Some(bags.len());
            bags.push(dec.bags[b].clone());
        }
    }
    let mut parent = Vec::with_capacity(bags.len());
    let mut root = 0;
    for b in 0..dec.bags.len() {
        if let Some(nb) = remap[b] {
            let np = dec.parent[b].map(|p| remap[p].expect("parent bag is alive"));
            if np.is_none() {
                root = nb;
            }
            parent.push(np);
        }
    }
    dec.bags = bags;
    dec.parent = parent;
    dec.root = root;
}

/// Reorder each bag so shared elements come first in the parent's order
/// and new elements follow in ascending order.
fn order_bags(dec: &mut TreeDecomposition) {
    // Process root first, then children (parent indices may go either way,
    // so order by distance from the root).
    let mut depth: Vec<usize> = vec![0; dec.bags.len()];
    let mut order: Vec<usize> = (0..dec.bags.len()).collect();
    for b in 0..dec.bags.len() {
        let mut d = 0;
        let mut cur = b;
        while let Some(p) = dec.parent[cur] {
            d += 1;
            cur = p;
        }
        depth[b] = d;
    }
    order.sort_by_key(|&b| depth[b]);
    for b in order {
        let parent_order: Vec<Elem> = match dec.parent[b] {
            Some(p) => dec.bags[p].clone(),
            None => Vec::new(),
        };
        let bag = dec.bags[b].clone();
        let mut shared: Vec<Elem> = parent_order
            .iter()
            .copied()
            .filter(|e| bag.contains(e))
            .collect();
        let mut fresh: Vec<Elem> = bag
            .iter()
            .copied()
            .filter(|e| !shared.contains(e))
            .collect();
        fresh.sort_unstable();
        shared.extend(fresh);
        dec.bags[b] = shared;
    }
}

/// Encode a structure as a consistent tree code of width parameter `k`
/// (bags of size ≤ k). The decomposition search is exact at desk scale.
pub fn encode(a: &RelationalStructure, sigma: &Signature, k: usize) -> Result<TreeCode, CodeError> {
    let dec = decompose(a, k)?;
    let mut code = TreeCode::new(k, sigma.clone());
    // Root with zero names, then one node per bag, children wired along
    // the decomposition tree.
    let root = code.add_node(NodeLabel::new(0));
    code.root = root;
    let mut node_of: Vec<NodeId> = vec![usize::MAX; dec.bags.len()];
    let mut order: Vec<usize> = (0..dec.bags.len()).collect();
    // Parents before children.
    let mut depth: Vec<usize> = vec![0; dec.bags.len()];
    for b in 0..dec.bags.len() {
        let mut d = 0;
        let mut cur = b;
        while let Some(p) = dec.parent[cur] {
            d += 1;
            cur = p;
        }
        depth[b] = d;
    }
    order.sort_by_key(|&b| depth[b]);
    for b in order {
        let bag = &dec.bags[b];
        let mut label = NodeLabel::new(bag.len());
        for (rel, args) in &a.facts {
            if args.iter().all(|e| bag.contains(e)) {
                let seq: Vec<usize> = args
                    .iter()
                    .map(|e| bag.iter().position(|x| x == e).unwrap() + 1)
                    .collect();
                label.facts.insert((rel.clone(), seq));
            }
        }
        let v = code.add_node(label);
        node_of[b] = v;
        match dec.parent[b] {
            None => code.add_edge(root, v, EdgeMap::new()),
            Some(p) => {
                let pbag = &dec.bags[p];
                let mut rho = EdgeMap::new();
                for (pi, e) in pbag.iter().enumerate() {
                    if let Some(ci) = bag.iter().position(|x| x == e) {
                        rho.insert(pi + 1, ci + 1);
                    }
                }
                code.add_edge(node_of[p], v, rho);
            }
        }
    }
    Ok(code)
}

// ---------------------------------------------------------------------
// JSON serialization

#[derive(Serialize, Deserialize)]
struct FileNode {
    id: usize,
    props: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct FileEdge {
    src: usize,
    dst: usize,
    rho: BTreeMap<String, usize>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Serialize, Deserialize)]
struct CodeFile {
    k: usize,
    sigma: String,
    root: usize,
    nodes: Vec<FileNode>,
    edges: Vec<FileEdge>,
    #[serde(default, skip_serializing_if = "is_false")]
    regular: bool,
}

fn sigma_to_string(sigma: &Signature) -> String {
    sigma
        .relations
        .iter()
        .map(|(r, a)| format!("{r}/{a}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn sigma_from_string(s: &str) -> Result<Signature, CodeError> {
    let mut relations = BTreeMap::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (name, arity) = part
            .trim()
            .rsplit_once('/')
            .ok_or_else(|| CodeError::BadSigma(s.to_string()))?;
        let arity: usize = arity
            .parse()
            .map_err(|_| CodeError::BadSigma(s.to_string()))?;
        relations.insert(name.to_string(), arity);
    }
    Ok(Signature { relations })
}

fn parse_prop(prop: &str, sigma: &Signature, k: usize) -> Result<PropKind, CodeError> {
    let mut candidates: Vec<PropKind> = Vec::new();
    if let Some(rest) = prop.strip_prefix('D') {
        if let Ok(n) = rest.parse::<usize>() {
            if n <= k {
                candidates.push(PropKind::Domain(n));
            }
        }
    }
    for (rel, &arity) in &sigma.relations {
        let prefix = format!("{rel}_");
        if let Some(rest) = prop.strip_prefix(prefix.as_str()) {
            let parts: Vec<&str> = rest.split('_').collect();
            if parts.len() == arity {
                if let Ok(seq) = parts
                    .iter()
                    .map(|p| p.parse::<usize>())
                    .collect::<Result<Vec<usize>, _>>()
                {
                    if seq.iter().all(|&i| i >= 1 && i <= k) {
                        candidates.push(PropKind::Fact(rel.clone(), seq));
                    }
                }
            }
        }
    }
    match candidates.len() {
        0 => Err(CodeError::UnknownPredicate(prop.to_string())),
        1 => Ok(candidates.pop().unwrap()),
        _ => Err(CodeError::AmbiguousPredicate(prop.to_string())),
    }
}

enum PropKind {
    Domain(usize),
    Fact(String, Vec<usize>),
}

pub fn code_to_json(t: &TreeCode) -> String {
    let file = CodeFile {
        k: t.k,
        sigma: sigma_to_string(&t.sigma),
        root: t.root,
        nodes: t
            .labels
            .iter()
            .enumerate()
            .map(|(id, label)| FileNode {
                id,
                props: label.props(),
            })
            .collect(),
        edges: t
            .edges
            .iter()
            .map(|e| FileEdge {
                src: e.src,
                dst: e.dst,
                rho: e.rho.iter().map(|(&i, &j)| (i.to_string(), j)).collect(),
            })
            .collect(),
        regular: t.regular,
    };
    serde_json::to_string_pretty(&file).expect("code serialization cannot fail")
}

pub fn code_from_json(text: &str) -> Result<TreeCode, CodeError> {
    let file: CodeFile = serde_json::from_str(text)?;
    let sigma = sigma_from_string(&file.sigma)?;
    let mut labels: Vec<Option<NodeLabel>> = vec![None; file.nodes.len()];
    for node in &file.nodes {
        if node.id >= labels.len() || labels[node.id].is_some() {
            return Err(CodeError::Structural(format!(
                "node ids must be exactly 0..{} without repeats",
                labels.len()
            )));
        }
        let mut n: Option<usize> = None;
        let mut facts = BTreeSet::new();
        for prop in &node.props {
            match parse_prop(prop, &sigma, file.k)? {
                PropKind::Domain(d) => {
                    if n.replace(d).is_some() {
                        return Err(CodeError::Structural(format!(
                            "node {} has more than one domain predicate",
                            node.id
                        )));
                    }
                }
                PropKind::Fact(rel, seq) => {
                    facts.insert((rel, seq));
                }
            }
        }
        let n = n.ok_or_else(|| {
            CodeError::Structural(format!("node {} has no domain predicate", node.id))
        })?;
        labels[node.id] = Some(NodeLabel { n, facts });
    }
    let mut code = TreeCode::new(file.k, sigma);
    code.root = file.root;
    code.regular = file.regular;
    code.labels = labels.into_iter().map(|l| l.unwrap()).collect();
    for e in &file.edges {
        let mut rho = EdgeMap::new();
        for (i, &j) in &e.rho {
            let i: usize = i
                .parse()
                .map_err(|_| CodeError::Structural(format!("bad name {i:?} in edge map")))?;
            rho.insert(i, j);
        }
        code.add_edge(e.src, e.dst, rho);
    }
    code.structural_check()?;
    Ok(code)
}
