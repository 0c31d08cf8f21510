//! Fold and unfold: the two families of sharing-control steps.
//!
//! A *collapse* merges a node onto an equal one (same label, same successor
//! list), increasing sharing. A *copy* splits one parent edge off a shared
//! node onto a fresh duplicate, decreasing sharing. Both preserve the
//! unfolded term exactly; they only move the graph between representations
//! of the same term, from the tree (no sharing) down to the fully collapsed
//! form (maximal sharing).
//!
//! On top of the single steps sit the two bounded normal forms used by the
//! rewrite engine: [`unfold_above`] makes the spine above a position
//! unshared (at most `|p|` copies), so a rewrite there cannot affect other
//! occurrences, and [`fold_below`] maximally shares the subgraph under a
//! position (never grows the graph), keeping iterated rewriting from
//! accumulating duplicated structure.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, Label, NodeId, TermGraph};
use crate::term::Position;

/// One sharing-control step, as recorded in traces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FoldStep {
    /// `from` was merged onto the equal node `onto` (`from > onto`).
    Collapse { from: NodeId, onto: NodeId },
    /// The parent edge `(parent, index)` (1-based) was retargeted from the
    /// shared node `of` to the fresh duplicate `fresh`.
    Copy { of: NodeId, fresh: NodeId, parent: NodeId, index: usize },
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SharingError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("cannot collapse {from} onto {onto}: nodes are not equal (or not ordered)")]
    NotCollapsible { from: NodeId, onto: NodeId },
    #[error("cannot copy node {0}: it needs at least two parent edges")]
    NotCopyable(NodeId),
    #[error("cannot copy variable node {0}: variables stay unique")]
    CopyOfVariable(NodeId),
    #[error("edge ({parent}, {index}) does not point at {of}")]
    NotAnEdge { parent: NodeId, index: usize, of: NodeId },
}

/// Merges `from` onto `onto`. Applicable when the nodes carry the same label
/// and the same successor list and `from > onto`; every edge into `from` is
/// redirected onto `onto` and `from` disappears. The unfolded term is
/// unchanged.
pub fn collapse(g: &TermGraph, from: NodeId, onto: NodeId) -> Result<TermGraph, SharingError> {
    let nf = g.node(from)?;
    let no = g.node(onto)?;
    if from <= onto || nf.label != no.label || nf.succ != no.succ {
        return Err(SharingError::NotCollapsible { from, onto });
    }
    Ok(g.redirected(from, onto))
}

/// Splits the parent edge `(parent, index)` (1-based) off the shared node
/// `of`: a fresh node with the same label and successors is allocated and the
/// edge is retargeted to it. Applicable when `of` is a function node with at
/// least two parent edges. The unfolded term is unchanged.
pub fn copy(
    g: &TermGraph,
    of: NodeId,
    parent: NodeId,
    index: usize,
) -> Result<(TermGraph, NodeId), SharingError> {
    let node = g.node(of)?.clone();
    if node.label.is_var() {
        return Err(SharingError::CopyOfVariable(of));
    }
    let occurrences: usize = g
        .iter()
        .map(|(_, n)| n.succ.iter().filter(|&&s| s == of).count())
        .sum();
    if occurrences < 2 {
        return Err(SharingError::NotCopyable(of));
    }
    let pnode = g.node(parent)?;
    if index == 0 || pnode.succ.get(index - 1) != Some(&of) {
        return Err(SharingError::NotAnEdge { parent, index, of });
    }
    let fresh = g.fresh_id();
    let (root, mut nodes) = g.clone().into_parts();
    nodes.insert(fresh, node);
    nodes.get_mut(&parent).expect("parent checked above").succ[index - 1] = fresh;
    Ok((TermGraph::from_parts(root, nodes), fresh))
}

/// All applicable collapse steps, as `(from, onto)` pairs with `from > onto`.
pub fn collapse_candidates(g: &TermGraph) -> Vec<(NodeId, NodeId)> {
    let mut out = Vec::new();
    let nodes: Vec<_> = g.iter().collect();
    for (i, &(id_a, node_a)) in nodes.iter().enumerate() {
        for &(id_b, node_b) in &nodes[i + 1..] {
            if node_a.label == node_b.label && node_a.succ == node_b.succ {
                // id_b > id_a by BTreeMap order.
                out.push((id_b, id_a));
            }
        }
    }
    out
}

/// All applicable copy steps, as `(of, parent, index)` triples (1-based
/// index). Variable nodes are never copied.
pub fn copy_candidates(g: &TermGraph) -> Vec<(NodeId, NodeId, usize)> {
    let mut edge_count: BTreeMap<NodeId, usize> = BTreeMap::new();
    for (_, node) in g.iter() {
        for &s in &node.succ {
            *edge_count.entry(s).or_insert(0) += 1;
        }
    }
    let mut out = Vec::new();
    for (parent, node) in g.iter() {
        for (i, &s) in node.succ.iter().enumerate() {
            if edge_count[&s] >= 2 && !g.node(s).expect("edge target exists").label.is_var() {
                out.push((s, parent, i + 1));
            }
        }
    }
    out
}

/// The result of unfolding the spine above a position.
#[derive(Debug, Clone)]
pub struct Unfolding {
    pub graph: TermGraph,
    pub steps: Vec<FoldStep>,
    /// The (possibly freshly copied) node now sitting at the position.
    pub node: NodeId,
}

/// Copies shared nodes along the path to `p`, top-down, so that afterwards
/// every node on the path — including the node at `p` itself — sits at
/// exactly one position. A rewrite at `p` then touches nothing else.
///
/// A shared *variable* node at `p` is left in place: variables are kept
/// globally unique, and a variable can never be the root of a redex, so
/// nothing is lost.
///
/// Uses at most `|p|` copies, so the result has at most `|S| + |p|` nodes.
pub fn unfold_above(g: &TermGraph, p: &Position) -> Result<Unfolding, SharingError> {
    // Walk the path on the evolving graph. The prefix walked so far is
    // unshared, so a shared child seen from it necessarily has a second
    // parent edge and can be copied.
    let mut graph = g.clone();
    let mut steps = Vec::new();
    let mut cur = graph.root();
    for &i in p.indices() {
        let node = graph.node(cur)?;
        let &next = node
            .succ
            .get(i.checked_sub(1).ok_or_else(|| GraphError::NoSuchPosition(p.clone()))?)
            .ok_or_else(|| GraphError::NoSuchPosition(p.clone()))?;
        let shared = graph.is_shared(next)?;
        let is_var = graph.node(next)?.label.is_var();
        if shared && !is_var {
            let (copied, fresh) = copy(&graph, next, cur, i)?;
            steps.push(FoldStep::Copy { of: next, fresh, parent: cur, index: i });
            graph = copied;
            cur = fresh;
        } else {
            cur = next;
        }
    }
    assert!(steps.len() <= p.len(), "unfolding uses at most |p| copies");
    assert!(graph.size() <= g.size() + p.len(), "unfolding adds at most |p| nodes");
    debug_assert!({
        let at = graph.node_at(p)?;
        at == cur && (graph.node(at)?.label.is_var() || !graph.is_shared(at)?)
    });
    Ok(Unfolding { graph, steps, node: cur })
}

/// The result of folding a subgraph.
#[derive(Debug, Clone)]
pub struct Folding {
    pub graph: TermGraph,
    pub steps: Vec<FoldStep>,
}

/// Maximally shares the subgraph under `p`: within the nodes reachable from
/// `node_at(p)`, equal nodes are merged bottom-up (stratified by height),
/// each class onto its least id. Edges from elsewhere in the graph follow
/// the merges, so the unfolded term is unchanged everywhere.
///
/// Never adds nodes; uses at most `|S restricted to p|` collapses.
pub fn fold_below(g: &TermGraph, p: &Position) -> Result<Folding, SharingError> {
    let anchor = g.node_at(p)?;
    let scope = g.subgraph_at(anchor)?;
    let scope_size = scope.size();
    let heights = scope.heights();
    let mut by_height: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
    for id in scope.node_ids() {
        by_height.entry(heights[&id]).or_default().push(id);
    }

    let mut graph = g.clone();
    let mut steps = Vec::new();
    for (_, layer) in by_height {
        // Group the layer by (label, successors) on the *current* graph:
        // lower strata have already been merged, so equal subgraphs now have
        // literally equal successor lists. Within a class everything merges
        // onto the least id (the first seen, since layers are id-sorted).
        let mut reps: BTreeMap<(Label, Vec<NodeId>), NodeId> = BTreeMap::new();
        for id in layer {
            if !graph.contains(id) {
                // Already merged away by an earlier collapse in this layer.
                continue;
            }
            let node = graph.node(id)?;
            let key = (node.label.clone(), node.succ.clone());
            match reps.get(&key) {
                None => {
                    reps.insert(key, id);
                }
                Some(&onto) => {
                    graph = collapse(&graph, id, onto)?;
                    steps.push(FoldStep::Collapse { from: id, onto });
                }
            }
        }
    }
    assert!(steps.len() <= scope_size, "folding uses at most |S|p| collapses");
    assert!(graph.size() <= g.size(), "folding never grows the graph");
    Ok(Folding { graph, steps })
}

/// Folds the whole graph: [`fold_below`] at the root. The result is the
/// maximally shared form of the unfolded term.
pub fn fold_all(g: &TermGraph) -> Folding {
    fold_below(g, &Position::root()).expect("root position always exists")
}
