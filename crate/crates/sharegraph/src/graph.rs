//! Rooted, acyclic, ordered term graphs (term DAGs).
//!
//! A term graph represents a term with sharing: a node with several parents
//! (or several parent edges) stands for one subterm occurring at several
//! positions. Variable nodes are globally shared — each variable name labels
//! at most one node — which is what lets non-left-linear patterns match by
//! pointer equality rather than structural comparison.
//!
//! Node identities are stable across operations: rewriting, folding and
//! unfolding allocate fresh ids (`max + 1`) and never renumber survivors.
//! All operations are value-oriented; nothing mutates a graph in place.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::term::{FunSym, Position, Substitution, Term};

/// Identity of a graph node. Fresh ids are allocated strictly above the
/// current maximum, so an id is never reused within one derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A node label: a function symbol or a variable name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Fun(FunSym),
    Var(String),
}

impl Label {
    pub fn is_var(&self) -> bool {
        matches!(self, Label::Var(_))
    }

    /// Text form used in dumps: variables carry a `?` sigil so that a
    /// variable `x` and a constant `x` stay distinguishable.
    pub fn display_name(&self) -> String {
        match self {
            Label::Fun(f) => f.name.clone(),
            Label::Var(x) => format!("?{x}"),
        }
    }
}

/// A labelled node with its ordered successor list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub label: Label,
    pub succ: Vec<NodeId>,
}

impl Node {
    pub fn fun(sym: FunSym, succ: Vec<NodeId>) -> Self {
        Node { label: Label::Fun(sym), succ }
    }

    pub fn var(name: impl Into<String>) -> Self {
        Node { label: Label::Var(name.into()), succ: Vec::new() }
    }
}

/// Errors raised by graph validation and graph surgery.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("root node {0} is not in the graph")]
    MissingRoot(NodeId),
    #[error("node {0} is not in the graph")]
    UnknownNode(NodeId),
    #[error("edge {from} -> {to} dangles: target not in the graph")]
    DanglingEdge { from: NodeId, to: NodeId },
    #[error("node {id}: symbol `{symbol}` has arity {expected} but {actual} successors")]
    ArityMismatch { id: NodeId, symbol: String, expected: usize, actual: usize },
    #[error("variable node {0} has successors")]
    VarWithSuccessors(NodeId),
    #[error("variable `{name}` labels nodes {first} and {second}")]
    DuplicateVariable { name: String, first: NodeId, second: NodeId },
    #[error("graph contains a cycle through node {0}")]
    Cyclic(NodeId),
    #[error("node {0} is unreachable from the root")]
    Unreachable(NodeId),
    #[error("position {0} does not exist in the graph")]
    NoSuchPosition(Position),
    #[error("unfolded term exceeds {cap} symbols")]
    TermTooLarge { cap: usize },
    #[error("replacement target {0} occurs in the fragment")]
    TargetInFragment(NodeId),
    #[error("fragment disagrees with host at shared node {0}")]
    NotProperlySharing(NodeId),
}

/// Size, depth and weighted size of a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphMetrics {
    /// Number of nodes.
    pub size: usize,
    /// Length (in edges) of the longest path; 0 for a single node.
    pub depth: usize,
    /// `size * ceil(log2(size + 1))`: node count weighted by the bits needed
    /// to address a node n.
    pub rsize: usize,
}

/// `ceil(log2(n))` for `n >= 1`.
fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        ((n - 1).ilog2() + 1) as usize
    }
}

/// An open graph fragment used by [`TermGraph::replace_at`]: successor edges
/// may point at nodes of the host graph, and the root itself may be a host
/// node (then `nodes` may be empty).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphFragment {
    pub root: NodeId,
    pub nodes: BTreeMap<NodeId, Node>,
}

impl From<&TermGraph> for GraphFragment {
    fn from(g: &TermGraph) -> Self {
        GraphFragment { root: g.root, nodes: g.nodes.clone() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphDto {
    root: NodeId,
    nodes: Vec<NodeDto>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NodeDto {
    id: NodeId,
    label: Label,
    succ: Vec<NodeId>,
}

impl From<TermGraph> for GraphDto {
    fn from(g: TermGraph) -> Self {
        GraphDto {
            root: g.root,
            nodes: g
                .nodes
                .into_iter()
                .map(|(id, n)| NodeDto { id, label: n.label, succ: n.succ })
                .collect(),
        }
    }
}

impl TryFrom<GraphDto> for TermGraph {
    type Error = GraphError;

    fn try_from(dto: GraphDto) -> Result<Self, GraphError> {
        let nodes = dto
            .nodes
            .into_iter()
            .map(|n| (n.id, Node { label: n.label, succ: n.succ }))
            .collect();
        TermGraph::new(dto.root, nodes)
    }
}

/// A rooted acyclic ordered term graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphDto", into = "GraphDto")]
pub struct TermGraph {
    root: NodeId,
    nodes: BTreeMap<NodeId, Node>,
}

impl TermGraph {
    /// Builds and validates a graph.
    pub fn new(root: NodeId, nodes: BTreeMap<NodeId, Node>) -> Result<Self, GraphError> {
        let g = TermGraph { root, nodes };
        g.validate()?;
        Ok(g)
    }

    /// Builds a graph that is known valid by construction. Debug builds
    /// still validate.
    pub(crate) fn from_parts(root: NodeId, nodes: BTreeMap<NodeId, Node>) -> Self {
        let g = TermGraph { root, nodes };
        debug_assert_eq!(g.validate(), Ok(()));
        g
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, GraphError> {
        self.nodes.get(&id).ok_or(GraphError::UnknownNode(id))
    }

    /// Nodes in increasing id order.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &Node)> {
        self.nodes.iter().map(|(&id, n)| (id, n))
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn max_id(&self) -> NodeId {
        self.nodes.keys().next_back().copied().unwrap_or(NodeId(0))
    }

    /// The smallest id strictly above every id in the graph.
    pub fn fresh_id(&self) -> NodeId {
        NodeId(self.max_id().0 + 1)
    }

    /// Full structural validation: rootedness, closed edges, arities,
    /// variable discipline, acyclicity, reachability.
    pub fn validate(&self) -> Result<(), GraphError> {
        if !self.nodes.contains_key(&self.root) {
            return Err(GraphError::MissingRoot(self.root));
        }
        let mut var_seen: BTreeMap<&str, NodeId> = BTreeMap::new();
        for (&id, node) in &self.nodes {
            match &node.label {
                Label::Fun(sym) => {
                    if sym.arity != node.succ.len() {
                        return Err(GraphError::ArityMismatch {
                            id,
                            symbol: sym.name.clone(),
                            expected: sym.arity,
                            actual: node.succ.len(),
                        });
                    }
                }
                Label::Var(name) => {
                    if !node.succ.is_empty() {
                        return Err(GraphError::VarWithSuccessors(id));
                    }
                    if let Some(&first) = var_seen.get(name.as_str()) {
                        return Err(GraphError::DuplicateVariable {
                            name: name.clone(),
                            first,
                            second: id,
                        });
                    }
                    var_seen.insert(name, id);
                }
            }
            for &t in &node.succ {
                if !self.nodes.contains_key(&t) {
                    return Err(GraphError::DanglingEdge { from: id, to: t });
                }
            }
        }
        // Acyclicity by iterative three-colour DFS.
        #[derive(Clone, Copy, PartialEq)]
        enum Colour {
            White,
            Grey,
            Black,
        }
        let mut colour: BTreeMap<NodeId, Colour> =
            self.nodes.keys().map(|&k| (k, Colour::White)).collect();
        for &start in self.nodes.keys() {
            if colour[&start] != Colour::White {
                continue;
            }
            // Stack of (node, next successor index to visit).
            let mut stack = vec![(start, 0usize)];
            colour.insert(start, Colour::Grey);
            while let Some(&mut (id, ref mut next)) = stack.last_mut() {
                let succ = &self.nodes[&id].succ;
                if *next < succ.len() {
                    let child = succ[*next];
                    *next += 1;
                    match colour[&child] {
                        Colour::Grey => return Err(GraphError::Cyclic(child)),
                        Colour::White => {
                            colour.insert(child, Colour::Grey);
                            stack.push((child, 0));
                        }
                        Colour::Black => {}
                    }
                } else {
                    colour.insert(id, Colour::Black);
                    stack.pop();
                }
            }
        }
        // Reachability from the root.
        let reachable = self.reachable_from(self.root);
        if let Some(&id) = self.nodes.keys().find(|id| !reachable.contains(id)) {
            return Err(GraphError::Unreachable(id));
        }
        Ok(())
    }

    /// All nodes reachable from `start` (including it), assuming edges are
    /// closed.
    pub(crate) fn reachable_from(&self, start: NodeId) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            if let Some(node) = self.nodes.get(&id) {
                stack.extend(node.succ.iter().copied());
            }
        }
        seen
    }

    // ------------------------------------------------------------------
    // Term <-> graph
    // ------------------------------------------------------------------

    /// The tree representation of a term: no function-node sharing, one node
    /// per variable, ids 1.. in preorder.
    pub fn mk_tree(t: &Term) -> TermGraph {
        let mut nodes = BTreeMap::new();
        let mut vars: BTreeMap<String, NodeId> = BTreeMap::new();
        let mut next = 1u32;
        fn go(
            t: &Term,
            nodes: &mut BTreeMap<NodeId, Node>,
            vars: &mut BTreeMap<String, NodeId>,
            next: &mut u32,
        ) -> NodeId {
            match t {
                Term::Var(x) => {
                    if let Some(&id) = vars.get(x) {
                        return id;
                    }
                    let id = NodeId(*next);
                    *next += 1;
                    vars.insert(x.clone(), id);
                    nodes.insert(id, Node::var(x.clone()));
                    id
                }
                Term::App(sym, args) => {
                    let id = NodeId(*next);
                    *next += 1;
                    nodes.insert(id, Node::fun(sym.clone(), Vec::new()));
                    let succ: Vec<NodeId> = args.iter().map(|a| go(a, nodes, vars, next)).collect();
                    nodes.get_mut(&id).unwrap().succ = succ;
                    id
                }
            }
        }
        let root = go(t, &mut nodes, &mut vars, &mut next);
        TermGraph::from_parts(root, nodes)
    }

    /// The maximally shared representation of a term: one node per distinct
    /// subterm, ids 1.. in postorder of first occurrence.
    pub fn mk_shared(t: &Term) -> TermGraph {
        let mut nodes = BTreeMap::new();
        let mut memo: HashMap<(Label, Vec<NodeId>), NodeId> = HashMap::new();
        let mut next = 1u32;
        fn go(
            t: &Term,
            nodes: &mut BTreeMap<NodeId, Node>,
            memo: &mut HashMap<(Label, Vec<NodeId>), NodeId>,
            next: &mut u32,
        ) -> NodeId {
            let (label, succ) = match t {
                Term::Var(x) => (Label::Var(x.clone()), Vec::new()),
                Term::App(sym, args) => {
                    let succ: Vec<NodeId> = args.iter().map(|a| go(a, nodes, memo, next)).collect();
                    (Label::Fun(sym.clone()), succ)
                }
            };
            let key = (label.clone(), succ.clone());
            if let Some(&id) = memo.get(&key) {
                return id;
            }
            let id = NodeId(*next);
            *next += 1;
            nodes.insert(id, Node { label, succ });
            memo.insert(key, id);
            id
        }
        let root = go(t, &mut nodes, &mut memo, &mut next);
        TermGraph::from_parts(root, nodes)
    }

    /// Unfolds the graph back into a term. Exponential output is possible on
    /// heavily shared graphs; `read_term_capped` guards against it.
    pub fn read_term(&self) -> Term {
        self.read_term_capped(usize::MAX).expect("uncapped readback cannot overflow")
    }

    /// Unfolds the graph into a term, failing if the result would exceed
    /// `cap` symbol occurrences.
    pub fn read_term_capped(&self, cap: usize) -> Result<Term, GraphError> {
        // Check the symbol count first so we never materialise a monster.
        if self.term_size(self.root) > cap {
            return Err(GraphError::TermTooLarge { cap });
        }
        let mut memo: HashMap<NodeId, Term> = HashMap::new();
        Ok(self.term_at(self.root, &mut memo))
    }

    fn term_at(&self, id: NodeId, memo: &mut HashMap<NodeId, Term>) -> Term {
        if let Some(t) = memo.get(&id) {
            return t.clone();
        }
        let node = &self.nodes[&id];
        let t = match &node.label {
            Label::Var(x) => Term::Var(x.clone()),
            Label::Fun(sym) => {
                let args = node.succ.iter().map(|&s| self.term_at(s, memo)).collect();
                Term::App(sym.clone(), args)
            }
        };
        memo.insert(id, t.clone());
        t
    }

    /// Symbol count of the unfolded term below `id` (saturating).
    pub fn term_size(&self, id: NodeId) -> usize {
        let mut memo: HashMap<NodeId, usize> = HashMap::new();
        fn go(g: &TermGraph, id: NodeId, memo: &mut HashMap<NodeId, usize>) -> usize {
            if let Some(&n) = memo.get(&id) {
                return n;
            }
            let n = 1usize.saturating_add(
                g.nodes[&id]
                    .succ
                    .iter()
                    .fold(0usize, |acc, &s| acc.saturating_add(go(g, s, memo))),
            );
            memo.insert(id, n);
            n
        }
        go(self, id, &mut memo)
    }

    // ------------------------------------------------------------------
    // Positions
    // ------------------------------------------------------------------

    /// All positions of node `u`: every path of argument indices from the
    /// root to `u`. The position set of a shared node has several elements;
    /// its cardinality can be exponential in the graph size.
    pub fn positions_of(&self, u: NodeId) -> Result<Vec<Position>, GraphError> {
        if !self.contains(u) {
            return Err(GraphError::UnknownNode(u));
        }
        let mut out = Vec::new();
        let mut path = Vec::new();
        fn go(g: &TermGraph, cur: NodeId, target: NodeId, path: &mut Vec<usize>, out: &mut Vec<Position>) {
            if cur == target {
                out.push(Position::new(path.clone()));
            }
            for (i, &s) in g.nodes[&cur].succ.iter().enumerate() {
                path.push(i + 1);
                go(g, s, target, path, out);
                path.pop();
            }
        }
        go(self, self.root, u, &mut path, &mut out);
        out.sort_by(|a, b| a.length_lex_cmp(b));
        Ok(out)
    }

    /// The length-lexicographically least position of every node. Computed by
    /// a breadth-first sweep expanding positions in length-lex order.
    pub fn canonical_positions(&self) -> BTreeMap<NodeId, Position> {
        let mut out = BTreeMap::new();
        let mut queue = VecDeque::new();
        out.insert(self.root, Position::root());
        queue.push_back(self.root);
        while let Some(id) = queue.pop_front() {
            let base = out[&id].clone();
            for (i, &s) in self.nodes[&id].succ.iter().enumerate() {
                if !out.contains_key(&s) {
                    out.insert(s, base.child(i + 1));
                    queue.push_back(s);
                }
            }
        }
        out
    }

    /// The node a position points at.
    pub fn node_at(&self, pos: &Position) -> Result<NodeId, GraphError> {
        let mut cur = self.root;
        for &i in pos.indices() {
            let node = &self.nodes[&cur];
            cur = *node
                .succ
                .get(i.checked_sub(1).ok_or_else(|| GraphError::NoSuchPosition(pos.clone()))?)
                .ok_or_else(|| GraphError::NoSuchPosition(pos.clone()))?;
        }
        Ok(cur)
    }

    /// Number of distinct paths from the root to each node, saturating at
    /// `u64::MAX`. A node is shared iff its count exceeds 1.
    pub fn path_counts(&self) -> BTreeMap<NodeId, u64> {
        // parents with edge multiplicity
        let mut parents: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for (&id, node) in &self.nodes {
            for &s in &node.succ {
                parents.entry(s).or_default().push(id);
            }
        }
        let mut memo: BTreeMap<NodeId, u64> = BTreeMap::new();
        fn count(
            u: NodeId,
            root: NodeId,
            parents: &BTreeMap<NodeId, Vec<NodeId>>,
            memo: &mut BTreeMap<NodeId, u64>,
        ) -> u64 {
            if u == root {
                return 1;
            }
            if let Some(&c) = memo.get(&u) {
                return c;
            }
            let c = parents
                .get(&u)
                .map(|ps| {
                    ps.iter()
                        .fold(0u64, |acc, &p| acc.saturating_add(count(p, root, parents, memo)))
                })
                .unwrap_or(0);
            memo.insert(u, c);
            c
        }
        self.nodes
            .keys()
            .map(|&id| {
                let c = count(id, self.root, &parents, &mut memo);
                (id, c)
            })
            .collect()
    }

    /// `true` if the node sits at more than one position.
    pub fn is_shared(&self, u: NodeId) -> Result<bool, GraphError> {
        if !self.contains(u) {
            return Err(GraphError::UnknownNode(u));
        }
        Ok(self.path_counts()[&u] > 1)
    }

    // ------------------------------------------------------------------
    // Structure
    // ------------------------------------------------------------------

    /// The subgraph rooted at `u`, node ids preserved.
    pub fn subgraph_at(&self, u: NodeId) -> Result<TermGraph, GraphError> {
        if !self.contains(u) {
            return Err(GraphError::UnknownNode(u));
        }
        let keep = self.reachable_from(u);
        let nodes = self
            .nodes
            .iter()
            .filter(|(id, _)| keep.contains(id))
            .map(|(&id, n)| (id, n.clone()))
            .collect();
        Ok(TermGraph::from_parts(u, nodes))
    }

    /// Replaces the subgraph at node `u` by the fragment `h`: every edge into
    /// `u` is redirected to the fragment root, `u` is removed, the fragment
    /// nodes are merged in, and unreachable nodes are garbage-collected.
    ///
    /// Preconditions: `u` is in the graph and not in the fragment; at shared
    /// ids the fragment must agree with the host (proper sharing). The result
    /// is validated.
    pub fn replace_at(&self, u: NodeId, h: &GraphFragment) -> Result<TermGraph, GraphError> {
        if !self.contains(u) {
            return Err(GraphError::UnknownNode(u));
        }
        if h.nodes.contains_key(&u) || h.root == u {
            return Err(GraphError::TargetInFragment(u));
        }
        for (&id, node) in &h.nodes {
            if node.succ.contains(&u) {
                return Err(GraphError::TargetInFragment(u));
            }
            if let Some(host) = self.nodes.get(&id) {
                if host != node {
                    return Err(GraphError::NotProperlySharing(id));
                }
            }
        }
        let mut nodes = self.nodes.clone();
        nodes.remove(&u);
        for (&id, node) in &h.nodes {
            nodes.insert(id, node.clone());
        }
        for node in nodes.values_mut() {
            for s in node.succ.iter_mut() {
                if *s == u {
                    *s = h.root;
                }
            }
        }
        let root = if self.root == u { h.root } else { self.root };
        if !nodes.contains_key(&root) {
            return Err(GraphError::MissingRoot(root));
        }
        // Garbage-collect, then validate the final graph.
        let g = TermGraph { root, nodes };
        let keep = g.reachable_from(root);
        let nodes = g.nodes.into_iter().filter(|(id, _)| keep.contains(id)).collect();
        TermGraph::new(root, nodes)
    }

    /// Redirects every edge into `u` onto `v` and removes `u`. Used by the
    /// collapse step, which guarantees `v` keeps `u`'s children reachable.
    pub(crate) fn redirected(&self, u: NodeId, v: NodeId) -> TermGraph {
        let mut nodes = self.nodes.clone();
        nodes.remove(&u);
        for node in nodes.values_mut() {
            for s in node.succ.iter_mut() {
                if *s == u {
                    *s = v;
                }
            }
        }
        let root = if self.root == u { v } else { self.root };
        TermGraph::from_parts(root, nodes)
    }

    /// Raw parts for surgery in sibling modules.
    pub(crate) fn into_parts(self) -> (NodeId, BTreeMap<NodeId, Node>) {
        (self.root, self.nodes)
    }

    // ------------------------------------------------------------------
    // Matching and isomorphism
    // ------------------------------------------------------------------

    /// Looks for the (unique) morphism from `pattern` into the subgraph of
    /// `self` rooted at `at`: root maps to `at`; function nodes must agree on
    /// label and successors; variable nodes may map anywhere but only to one
    /// node each. Sharing in the pattern therefore forces sharing in the
    /// host, which is how non-left-linear matching works.
    pub fn find_morphism(&self, pattern: &TermGraph, at: NodeId) -> Option<Morphism> {
        if !self.contains(at) {
            return None;
        }
        let mut map: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        let mut queue = VecDeque::new();
        map.insert(pattern.root, at);
        queue.push_back(pattern.root);
        let mut visited = BTreeSet::new();
        while let Some(p) = queue.pop_front() {
            if !visited.insert(p) {
                continue;
            }
            let image = map[&p];
            let pnode = &pattern.nodes[&p];
            match &pnode.label {
                Label::Var(_) => {
                    // No structural constraint; bindings were checked on
                    // insertion.
                }
                Label::Fun(sym) => {
                    let hnode = self.nodes.get(&image)?;
                    match &hnode.label {
                        Label::Fun(hsym) if hsym == sym => {}
                        _ => return None,
                    }
                    debug_assert_eq!(pnode.succ.len(), hnode.succ.len());
                    for (i, &ps) in pnode.succ.iter().enumerate() {
                        let hs = hnode.succ[i];
                        match map.get(&ps) {
                            Some(&bound) if bound != hs => return None,
                            Some(_) => {}
                            None => {
                                map.insert(ps, hs);
                            }
                        }
                        queue.push_back(ps);
                    }
                }
            }
        }
        Some(Morphism { map })
    }

    /// Whether `pattern` would match at `at` once the graph is folded below
    /// that node — without folding anything. A shared pattern variable only
    /// demands that its images unfold to the same *term*; folding is exactly
    /// what turns that into the pointer equality [`TermGraph::find_morphism`]
    /// tests, so this is the match verdict of the prepared graph, read off
    /// the raw one.
    pub fn tau_match(&self, pattern: &TermGraph, at: NodeId) -> bool {
        if !self.contains(at) {
            return false;
        }
        // τ(a) == τ(b), memoised on node pairs.
        fn tau_eq(
            g: &TermGraph,
            a: NodeId,
            b: NodeId,
            memo: &mut HashMap<(NodeId, NodeId), bool>,
        ) -> bool {
            if a == b {
                return true;
            }
            let key = if a < b { (a, b) } else { (b, a) };
            if let Some(&v) = memo.get(&key) {
                return v;
            }
            let (na, nb) = (&g.nodes[&a], &g.nodes[&b]);
            let v = na.label == nb.label
                && na.succ.len() == nb.succ.len()
                && na.succ.iter().zip(&nb.succ).all(|(&x, &y)| tau_eq(g, x, y, memo));
            memo.insert(key, v);
            v
        }
        fn go(
            g: &TermGraph,
            pattern: &TermGraph,
            p: NodeId,
            at: NodeId,
            bound: &mut BTreeMap<NodeId, NodeId>,
            memo: &mut HashMap<(NodeId, NodeId), bool>,
        ) -> bool {
            let pnode = &pattern.nodes[&p];
            match &pnode.label {
                Label::Var(_) => match bound.get(&p) {
                    None => {
                        bound.insert(p, at);
                        true
                    }
                    Some(&prev) => tau_eq(g, prev, at, memo),
                },
                Label::Fun(sym) => {
                    let hnode = match g.nodes.get(&at) {
                        Some(n) => n,
                        None => return false,
                    };
                    match &hnode.label {
                        Label::Fun(hsym) if hsym == sym => pnode
                            .succ
                            .iter()
                            .zip(&hnode.succ)
                            .all(|(&ps, &hs)| go(g, pattern, ps, hs, bound, memo)),
                        _ => false,
                    }
                }
            }
        }
        go(
            self,
            pattern,
            pattern.root,
            at,
            &mut BTreeMap::new(),
            &mut HashMap::new(),
        )
    }

    /// The substitution a match induces: each pattern variable is bound to
    /// the term its image node unfolds to.
    pub fn induced_substitution(&self, pattern: &TermGraph, m: &Morphism) -> Substitution {
        let mut sigma = Substitution::new();
        for (&pid, node) in &pattern.nodes {
            if let Label::Var(x) = &node.label {
                if let Some(&image) = m.map.get(&pid) {
                    let sub = self.subgraph_at(image).expect("morphism image in host");
                    sigma.insert(x.clone(), sub.read_term());
                }
            }
        }
        sigma
    }

    /// Structural equality up to renaming of node ids: a synchronized
    /// root-preserving traversal that must induce a bijection. Labels match
    /// exactly (including variable names).
    pub fn is_isomorphic(&self, other: &TermGraph) -> bool {
        if self.size() != other.size() {
            return false;
        }
        let mut fwd: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        let mut bwd: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        let mut stack = vec![(self.root, other.root)];
        while let Some((a, b)) = stack.pop() {
            match (fwd.get(&a), bwd.get(&b)) {
                (Some(&b0), Some(&a0)) => {
                    if b0 != b || a0 != a {
                        return false;
                    }
                    continue;
                }
                (None, None) => {
                    fwd.insert(a, b);
                    bwd.insert(b, a);
                }
                _ => return false,
            }
            let na = &self.nodes[&a];
            let nb = &other.nodes[&b];
            if na.label != nb.label || na.succ.len() != nb.succ.len() {
                return false;
            }
            for (&sa, &sb) in na.succ.iter().zip(&nb.succ) {
                stack.push((sa, sb));
            }
        }
        true
    }

    // ------------------------------------------------------------------
    // Metrics
    // ------------------------------------------------------------------

    /// Height of every node: 0 for leaves, else 1 + max over successors.
    pub fn heights(&self) -> BTreeMap<NodeId, usize> {
        let mut memo: BTreeMap<NodeId, usize> = BTreeMap::new();
        fn go(g: &TermGraph, id: NodeId, memo: &mut BTreeMap<NodeId, usize>) -> usize {
            if let Some(&h) = memo.get(&id) {
                return h;
            }
            let h = g.nodes[&id]
                .succ
                .iter()
                .map(|&s| go(g, s, memo) + 1)
                .max()
                .unwrap_or(0);
            memo.insert(id, h);
            h
        }
        for &id in self.nodes.keys() {
            go(self, id, &mut memo);
        }
        memo
    }

    /// Longest path length from the root.
    pub fn depth(&self) -> usize {
        self.heights()[&self.root]
    }

    pub fn metrics(&self) -> GraphMetrics {
        let size = self.size();
        GraphMetrics { size, depth: self.depth(), rsize: size * ceil_log2(size + 1) }
    }

    // ------------------------------------------------------------------
    // Canonical form and export
    // ------------------------------------------------------------------

    /// Renames nodes to 1.. in preorder (root first, successors in order).
    /// Isomorphic graphs have identical canonical forms.
    pub fn canonical_form(&self) -> TermGraph {
        let mut rename: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        let mut next = 1u32;
        let mut stack = vec![self.root];
        // Iterative preorder with explicit ordering of unvisited successors.
        while let Some(id) = stack.pop() {
            if rename.contains_key(&id) {
                continue;
            }
            rename.insert(id, NodeId(next));
            next += 1;
            // Push successors so the first argument is processed first.
            for &s in self.nodes[&id].succ.iter().rev() {
                if !rename.contains_key(&s) {
                    stack.push(s);
                }
            }
        }
        let nodes = self
            .nodes
            .iter()
            .map(|(&id, n)| {
                (
                    rename[&id],
                    Node { label: n.label.clone(), succ: n.succ.iter().map(|s| rename[s]).collect() },
                )
            })
            .collect();
        TermGraph::from_parts(rename[&self.root], nodes)
    }

    /// A canonical text key: the dump of the canonical form. Two graphs get
    /// the same key iff they are isomorphic.
    pub fn canonical_key(&self) -> String {
        self.canonical_form().dump_text()
    }

    /// The maximally shared canonical form and its text key in one pass:
    /// nodes are interned bottom-up (two nodes land in one class exactly when
    /// they unfold to the same term), then the class graph is renamed 1.. in
    /// preorder. Equals folding everything and taking the
    /// [`TermGraph::canonical_form`], without building the intermediate
    /// graphs — this is the explorer's per-state identity, so it has to be
    /// cheap.
    pub fn shared_canonical(&self) -> (TermGraph, String) {
        // Class assignment by bottom-up interning, iterative postorder.
        let mut class_of: HashMap<NodeId, u32> = HashMap::with_capacity(self.nodes.len());
        let mut interned: HashMap<(Label, Vec<u32>), u32> =
            HashMap::with_capacity(self.nodes.len());
        let mut classes: Vec<(Label, Vec<u32>)> = Vec::new();
        let mut stack: Vec<(NodeId, bool)> = vec![(self.root, false)];
        while let Some((id, ready)) = stack.pop() {
            if class_of.contains_key(&id) {
                continue;
            }
            let node = &self.nodes[&id];
            if ready {
                let succ: Vec<u32> = node.succ.iter().map(|s| class_of[s]).collect();
                let key = (node.label.clone(), succ);
                let class = *interned.entry(key.clone()).or_insert_with(|| {
                    classes.push(key);
                    (classes.len() - 1) as u32
                });
                class_of.insert(id, class);
            } else {
                stack.push((id, true));
                for &s in node.succ.iter().rev() {
                    if !class_of.contains_key(&s) {
                        stack.push((s, false));
                    }
                }
            }
        }
        // Preorder renaming of the class graph, mirroring `canonical_form`.
        let mut rename: HashMap<u32, NodeId> = HashMap::with_capacity(classes.len());
        let mut order: Vec<u32> = Vec::with_capacity(classes.len());
        let mut next = 1u32;
        let mut stack: Vec<u32> = vec![class_of[&self.root]];
        while let Some(c) = stack.pop() {
            if rename.contains_key(&c) {
                continue;
            }
            rename.insert(c, NodeId(next));
            next += 1;
            order.push(c);
            for &s in classes[c as usize].1.iter().rev() {
                if !rename.contains_key(&s) {
                    stack.push(s);
                }
            }
        }
        let nodes: BTreeMap<NodeId, Node> = order
            .iter()
            .map(|&c| {
                let (label, succ) = &classes[c as usize];
                (
                    rename[&c],
                    Node {
                        label: label.clone(),
                        succ: succ.iter().map(|s| rename[s]).collect(),
                    },
                )
            })
            .collect();
        let graph = TermGraph::from_parts(rename[&class_of[&self.root]], nodes);
        let key = graph.dump_text();
        (graph, key)
    }

    /// Text dump: the root followed by node specifications in increasing id
    /// order. Variables are shown with a `?` sigil.
    pub fn dump_text(&self) -> String {
        let mut out = format!("root {}\n", self.root);
        for (&id, node) in &self.nodes {
            let succ: Vec<String> = node.succ.iter().map(|s| s.to_string()).collect();
            out.push_str(&format!("⟨{}, {}, [{}]⟩\n", id, node.label.display_name(), succ.join(", ")));
        }
        out
    }

    /// GraphViz export: function nodes as boxes, variables as dashed
    /// ellipses, edges labelled with argument indices.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = format!("digraph \"{name}\" {{\n");
        out.push_str("  rankdir=TB;\n");
        for (&id, node) in &self.nodes {
            let (shape, extra) = match node.label {
                Label::Fun(_) => ("box", ""),
                Label::Var(_) => ("ellipse", ", style=dashed"),
            };
            let label = node.label.display_name().replace('"', "\\\"");
            let root_mark = if id == self.root { ", penwidth=2" } else { "" };
            out.push_str(&format!(
                "  n{} [label=\"{}: {}\", shape={}{}{}];\n",
                id, id, label, shape, extra, root_mark
            ));
        }
        for (&id, node) in &self.nodes {
            for (i, &s) in node.succ.iter().enumerate() {
                out.push_str(&format!("  n{} -> n{} [label=\"{}\"];\n", id, s, i + 1));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// A graph morphism: the node map of a successful match.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Morphism {
    map: BTreeMap<NodeId, NodeId>,
}

impl Morphism {
    pub fn image(&self, u: NodeId) -> Option<NodeId> {
        self.map.get(&u).copied()
    }

    pub fn map(&self) -> &BTreeMap<NodeId, NodeId> {
        &self.map
    }
}
