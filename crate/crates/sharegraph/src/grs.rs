//! Graph rewrite rules compiled from term rules, and the full rewrite step.
//!
//! A term rule `l -> r` becomes a pair of graphs over a shared set of
//! variable nodes: the left graph is the tree of `l` (so its sharing asks for
//! nothing beyond what non-linearity forces), the right graph reuses the left
//! graph's variable nodes and allocates fresh nodes for its function symbol
//! occurrences. Applying the rule at a node `u` means finding a morphism from
//! the left graph into the host at `u`, instantiating the right graph through
//! the morphism (rhs variables resolve to the matched host nodes, so repeated
//! rhs variables share instead of duplicating), and grafting the instance
//! over `u`.
//!
//! The *full* step brackets that replacement with sharing control:
//!
//! 1. [`unfold_above`] the position, so the rewrite is pointwise — other
//!    occurrences of the redex term are unaffected;
//! 2. [`fold_below`] the position, so equal arguments become pointer-equal —
//!    non-left-linear left-hand sides can match — and duplicated structure
//!    from earlier steps is re-shared;
//! 3. replace the redex.
//!
//! Step 1 adds at most `depth(S)` nodes, step 2 only shrinks, step 3 adds at
//! most `Δ` (the largest right-hand side in the system). Those are the
//! per-step bounds the engine audits.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::{GraphError, GraphFragment, Label, Morphism, Node, NodeId, TermGraph};
use crate::sharing::{fold_below, unfold_above, FoldStep, SharingError};
use crate::term::{FunSym, Position, Term, Trs};

/// A term rule in graph form.
#[derive(Debug, Clone)]
pub struct GraphRule {
    /// Tree of the left-hand side; node ids `1..`, variables shared.
    lhs: TermGraph,
    /// Right-hand side: function nodes carry ids above every lhs id, while
    /// variable occurrences point back into the lhs variable nodes. The root
    /// may itself be an lhs variable node (collapsing rule).
    rhs: GraphFragment,
    /// Number of nodes of the rhs graph, variables counted once.
    rhs_size: usize,
    /// Function nodes the rule allocates when applied.
    fresh_count: usize,
}

impl GraphRule {
    fn compile(lhs: &Term, rhs: &Term) -> GraphRule {
        let lhs_graph = TermGraph::mk_tree(lhs);
        // Variable name -> lhs node id.
        let vars: BTreeMap<String, NodeId> = lhs_graph
            .iter()
            .filter_map(|(id, n)| match &n.label {
                Label::Var(x) => Some((x.clone(), id)),
                Label::Fun(_) => None,
            })
            .collect();
        let mut next = lhs_graph.max_id().0 + 1;
        let mut nodes = BTreeMap::new();
        fn build(
            t: &Term,
            vars: &BTreeMap<String, NodeId>,
            nodes: &mut BTreeMap<NodeId, Node>,
            next: &mut u32,
        ) -> NodeId {
            match t {
                Term::Var(x) => vars[x.as_str()],
                Term::App(sym, args) => {
                    let id = NodeId(*next);
                    *next += 1;
                    nodes.insert(id, Node::fun(sym.clone(), Vec::new()));
                    let succ = args.iter().map(|a| build(a, vars, nodes, next)).collect();
                    nodes.get_mut(&id).unwrap().succ = succ;
                    id
                }
            }
        }
        let root = build(rhs, &vars, &mut nodes, &mut next);
        let fresh_count = nodes.len();
        let rhs_size = fresh_count + rhs.vars().len();
        GraphRule { lhs: lhs_graph, rhs: GraphFragment { root, nodes }, rhs_size, fresh_count }
    }

    pub fn lhs(&self) -> &TermGraph {
        &self.lhs
    }

    pub fn rhs_size(&self) -> usize {
        self.rhs_size
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GrsError {
    #[error("rule {rule} does not match at position {pos}")]
    NoRedex { pos: Position, rule: usize },
    #[error("no rule with index {0}")]
    NoSuchRule(usize),
    #[error(transparent)]
    Sharing(#[from] SharingError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Which halves of the sharing bracket run around a replacement. Disabling
/// either breaks the engine in instructive ways; the full step uses both.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOptions {
    pub unfold: bool,
    pub fold: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions { unfold: true, fold: true }
    }
}

impl StepOptions {
    /// Replacement only — no sharing control.
    pub const PLAIN: StepOptions = StepOptions { unfold: false, fold: false };
}

/// One full rewrite step, with everything the bound audit needs.
#[derive(Debug, Clone)]
pub struct FullOutcome {
    pub graph: TermGraph,
    pub position: Position,
    pub rule: usize,
    pub unfold_steps: Vec<FoldStep>,
    pub fold_steps: Vec<FoldStep>,
    /// Size of the subgraph at the position after unfolding (before the fold
    /// ran): the bound on how many collapses the fold may use.
    pub redex_size: usize,
}

impl FullOutcome {
    pub fn copies(&self) -> usize {
        self.unfold_steps.len()
    }

    pub fn collapses(&self) -> usize {
        self.fold_steps.len()
    }
}

/// A compiled graph rewrite system.
#[derive(Debug, Clone)]
pub struct Grs {
    rules: Vec<GraphRule>,
    delta: usize,
    /// Rule indices by left-hand-side root symbol: only these can ever match
    /// at a node with that label.
    root_index: BTreeMap<FunSym, Vec<usize>>,
}

impl Grs {
    pub fn compile(trs: &Trs) -> Grs {
        let rules: Vec<GraphRule> =
            trs.rules().iter().map(|r| GraphRule::compile(&r.lhs, &r.rhs)).collect();
        let delta = rules.iter().map(|r| r.rhs_size).max().unwrap_or(0);
        let mut root_index: BTreeMap<FunSym, Vec<usize>> = BTreeMap::new();
        for (i, rule) in trs.rules().iter().enumerate() {
            if let Term::App(f, _) = &rule.lhs {
                root_index.entry(f.clone()).or_default().push(i);
            }
        }
        Grs { rules, delta, root_index }
    }

    /// Rules whose left-hand side is rooted in the node's label — the only
    /// candidates for a match there. `None` whenever nothing can match.
    pub fn candidates_at(&self, g: &TermGraph, u: NodeId) -> Option<&[usize]> {
        match &g.node(u).ok()?.label {
            Label::Var(_) => None,
            Label::Fun(f) => self.root_index.get(f).map(Vec::as_slice),
        }
    }

    /// Whether `rule` would match at `u` on the graph the sharing bracket
    /// produces — decided on the raw graph. With the fold enabled, a match on
    /// the prepared graph is a τ-structural match here (the bracket does not
    /// change the term below the position, and folding only turns τ-equality
    /// into pointer equality); without it, the raw morphism is the verdict.
    fn quick_match(&self, g: &TermGraph, u: NodeId, rule: usize, options: StepOptions) -> bool {
        let r = &self.rules[rule];
        if options.fold {
            g.tau_match(&r.lhs, u)
        } else {
            g.find_morphism(&r.lhs, u).is_some()
        }
    }

    pub fn rules(&self) -> &[GraphRule] {
        &self.rules
    }

    /// `Δ`: the size of the largest right-hand side graph in the system.
    /// Every step grows a graph by strictly less than this many replacement
    /// nodes.
    pub fn delta(&self) -> usize {
        self.delta
    }

    /// Does `rule` match at node `u` (as the graph stands, no sharing
    /// control)?
    pub fn matches_at(&self, g: &TermGraph, u: NodeId, rule: usize) -> Option<Morphism> {
        let r = self.rules.get(rule)?;
        g.find_morphism(&r.lhs, u)
    }

    /// Replacement without sharing control: match `rule` at `u`, instantiate
    /// its right-hand side through the morphism (fresh ids strictly above
    /// everything in `g`), and graft it over `u`.
    pub fn apply_at(&self, g: &TermGraph, u: NodeId, rule: usize) -> Result<TermGraph, GrsError> {
        let r = self.rules.get(rule).ok_or(GrsError::NoSuchRule(rule))?;
        let m = g.find_morphism(&r.lhs, u).ok_or_else(|| GrsError::NoRedex {
            pos: g
                .canonical_positions()
                .get(&u)
                .cloned()
                .unwrap_or_else(Position::root),
            rule,
        })?;
        let offset = g.max_id().0;
        let resolve = |id: NodeId| -> NodeId {
            if r.rhs.nodes.contains_key(&id) {
                NodeId(id.0 + offset)
            } else {
                // An lhs variable node: take its image in the host.
                m.image(id).expect("lhs variables are matched")
            }
        };
        let nodes = r
            .rhs
            .nodes
            .iter()
            .map(|(&id, n)| {
                (
                    NodeId(id.0 + offset),
                    Node {
                        label: n.label.clone(),
                        succ: n.succ.iter().map(|&s| resolve(s)).collect(),
                    },
                )
            })
            .collect();
        let fragment = GraphFragment { root: resolve(r.rhs.root), nodes };
        let out = g.replace_at(u, &fragment)?;
        assert!(
            out.size() <= g.size() + r.fresh_count,
            "replacement adds at most the fresh rhs nodes"
        );
        Ok(out)
    }

    /// The full rewrite step at a position: unfold above it, fold below it,
    /// then rewrite. Either sharing phase can be disabled through `options`
    /// (the default runs both).
    ///
    /// The match is checked on the *prepared* graph — folding is what lets a
    /// non-left-linear rule see that two arguments are equal.
    pub fn full_step(
        &self,
        g: &TermGraph,
        pos: &Position,
        rule: usize,
        options: StepOptions,
    ) -> Result<FullOutcome, GrsError> {
        if rule >= self.rules.len() {
            return Err(GrsError::NoSuchRule(rule));
        }
        // Decide the match on the raw graph first: the sharing bracket is by
        // far the expensive half of a step, and most (position, rule) probes
        // fail. Invalid positions fall through so `prepare` reports them.
        if let Ok(u) = g.node_at(pos) {
            if !self.quick_match(g, u, rule, options) {
                return Err(GrsError::NoRedex { pos: pos.clone(), rule });
            }
        }
        let (prepared, unfold_steps, fold_steps, redex_size, at) =
            self.prepare(g, pos, options)?;
        let out = self.apply_at(&prepared, at, rule).map_err(|e| match e {
            GrsError::NoRedex { .. } => GrsError::NoRedex { pos: pos.clone(), rule },
            other => other,
        })?;
        Ok(FullOutcome {
            graph: out,
            position: pos.clone(),
            rule,
            unfold_steps,
            fold_steps,
            redex_size,
        })
    }

    /// The sharing bracket alone: unfold above and fold below `pos`, without
    /// applying any rule. Returns the prepared graph and the node at the
    /// position — the graph a match at `pos` would actually be checked on.
    pub fn bracket(
        &self,
        g: &TermGraph,
        pos: &Position,
        options: StepOptions,
    ) -> Result<(TermGraph, NodeId), GrsError> {
        let (prepared, _, _, _, at) = self.prepare(g, pos, options)?;
        Ok((prepared, at))
    }

    /// Runs the sharing bracket at `pos` and returns the prepared graph, the
    /// recorded sharing steps, the post-unfold redex size, and the node now
    /// at the position.
    #[allow(clippy::type_complexity)]
    fn prepare(
        &self,
        g: &TermGraph,
        pos: &Position,
        options: StepOptions,
    ) -> Result<(TermGraph, Vec<FoldStep>, Vec<FoldStep>, usize, NodeId), GrsError> {
        let (unfolded, unfold_steps, at) = if options.unfold {
            let u = unfold_above(g, pos)?;
            (u.graph, u.steps, u.node)
        } else {
            (g.clone(), Vec::new(), g.node_at(pos)?)
        };
        let redex_size = unfolded.subgraph_at(at)?.size();
        let (prepared, fold_steps) = if options.fold {
            let f = fold_below(&unfolded, pos)?;
            (f.graph, f.steps)
        } else {
            (unfolded, Vec::new())
        };
        debug_assert_eq!(prepared.node_at(pos)?, at, "the position survives the bracket");
        Ok((prepared, unfold_steps, fold_steps, redex_size, at))
    }

    /// Every full step available from `g`, taking for each node only its
    /// canonical (length-lexicographically least) position: a shared subterm
    /// is one redex, not many. Results are ordered by position, then rule.
    pub fn all_full_reducts(&self, g: &TermGraph, options: StepOptions) -> Vec<FullOutcome> {
        let canonical = g.canonical_positions();
        let mut entries: Vec<(&Position, NodeId)> =
            canonical.iter().map(|(&id, pos)| (pos, id)).collect();
        entries.sort_by(|a, b| a.0.length_lex_cmp(b.0));
        let mut out = Vec::new();
        for (pos, id) in entries {
            // Candidate rules by root label, matches decided on the raw
            // graph: the sharing bracket only runs at positions that rewrite.
            let Some(candidates) = self.candidates_at(g, id) else { continue };
            let matching: Vec<usize> = candidates
                .iter()
                .copied()
                .filter(|&rule| self.quick_match(g, id, rule, options))
                .collect();
            if matching.is_empty() {
                continue;
            }
            let Ok((prepared, unfold_steps, fold_steps, redex_size, at)) =
                self.prepare(g, pos, options)
            else {
                continue;
            };
            for rule in matching {
                debug_assert!(self.matches_at(&prepared, at, rule).is_some());
                if let Ok(graph) = self.apply_at(&prepared, at, rule) {
                    out.push(FullOutcome {
                        graph,
                        position: pos.clone(),
                        rule,
                        unfold_steps: unfold_steps.clone(),
                        fold_steps: fold_steps.clone(),
                        redex_size,
                    });
                }
            }
        }
        out
    }
}

/// Compiles a term rewriting system straight to its graph form.
impl From<&Trs> for Grs {
    fn from(trs: &Trs) -> Self {
        Grs::compile(trs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_term, parse_trs};
    use std::collections::BTreeSet;

    fn rf() -> Trs {
        parse_trs("(VAR x)\n(RULES f(x) -> eq(x,a)\n eq(x,x) -> top)").unwrap()
    }

    fn t(s: &str) -> Term {
        parse_term(s, &BTreeSet::from(["x".to_string(), "y".to_string()])).unwrap()
    }

    #[test]
    fn compiling_shares_rule_variables() {
        let grs = Grs::compile(&rf());
        // f(x) -> eq(x,a): lhs is ⟨1:f[2], 2:?x⟩; rhs allocates eq and a.
        let r0 = &grs.rules()[0];
        assert_eq!(r0.lhs.size(), 2);
        assert_eq!(r0.fresh_count, 2);
        assert_eq!(r0.rhs_size, 3);
        // The rhs eq-node's first successor is the lhs variable node.
        let eq_node = &r0.rhs.nodes[&r0.rhs.root];
        assert_eq!(eq_node.succ[0], NodeId(2));
        // eq(x,x) -> top: ⟨1:eq[2,2], 2:?x⟩, rhs just the constant.
        let r1 = &grs.rules()[1];
        assert_eq!(r1.lhs.node(NodeId(1)).unwrap().succ, vec![NodeId(2), NodeId(2)]);
        assert_eq!(r1.rhs_size, 1);
        assert_eq!(grs.delta(), 3);
    }

    #[test]
    fn collapsing_rule_compiles_to_a_variable_root() {
        let trs = parse_trs("(VAR x y)\n(RULES k(x,y) -> x)").unwrap();
        let grs = Grs::compile(&trs);
        let r = &grs.rules()[0];
        assert!(r.rhs.nodes.is_empty());
        assert_eq!(r.rhs.root, NodeId(2)); // the x node of mk_tree(k(x,y))
        assert_eq!(r.rhs_size, 1);
    }

    #[test]
    fn plain_replacement_shares_rhs_variables_but_not_constants() {
        let grs = Grs::compile(&rf());
        let g = TermGraph::mk_tree(&t("f(a)"));
        let out = grs.apply_at(&g, g.root(), 0).unwrap();
        assert_eq!(out.read_term(), t("eq(a,a)"));
        // The two arguments are *different* nodes: the matched a and the
        // fresh rhs constant.
        let root = out.node(out.root()).unwrap();
        assert_ne!(root.succ[0], root.succ[1]);
        // So the non-linear rule cannot fire without folding...
        assert!(grs.matches_at(&out, out.root(), 1).is_none());
        assert!(matches!(
            grs.full_step(&out, &Position::root(), 1, StepOptions::PLAIN),
            Err(GrsError::NoRedex { .. })
        ));
        // ...but the full step folds first and reaches top.
        let full = grs.full_step(&out, &Position::root(), 1, StepOptions::default()).unwrap();
        assert_eq!(full.graph.read_term(), t("top"));
        assert_eq!(full.collapses(), 1);
        assert_eq!(full.copies(), 0);
        assert_eq!(full.graph.size(), 1);
    }

    #[test]
    fn duplicating_rule_shares_instead_of_copying() {
        let trs = parse_trs("(VAR x)\n(RULES dup(x) -> c(x,x))").unwrap();
        let grs = Grs::compile(&trs);
        let g = TermGraph::mk_tree(&t("dup(g(a))"));
        let out = grs.apply_at(&g, g.root(), 0).unwrap();
        assert_eq!(out.read_term(), t("c(g(a),g(a))"));
        // One g(a) subgraph, referenced twice.
        assert_eq!(out.size(), 3);
        let root = out.node(out.root()).unwrap();
        assert_eq!(root.succ[0], root.succ[1]);
    }

    #[test]
    fn collapsing_rule_garbage_collects_the_dropped_argument() {
        let trs = parse_trs("(VAR x y)\n(RULES k(x,y) -> x)").unwrap();
        let grs = Grs::compile(&trs);
        let g = TermGraph::mk_tree(&t("k(a,g(b))"));
        let out = grs.apply_at(&g, g.root(), 0).unwrap();
        assert_eq!(out.read_term(), t("a"));
        assert_eq!(out.size(), 1);
    }

    #[test]
    fn fresh_ids_stay_above_the_host() {
        let trs = parse_trs("(VAR x)\n(RULES f(x) -> g(x))").unwrap();
        let grs = Grs::compile(&trs);
        // Host with a large id so rule ids (1..) would clash without renaming.
        let g = TermGraph::mk_tree(&t("c(f(a),b)"));
        let max_before = g.max_id();
        let at = g.node_at(&Position::new(vec![1])).unwrap();
        let out = grs.apply_at(&g, at, 0).unwrap();
        assert_eq!(out.read_term(), t("c(g(a),b)"));
        let new_root_child = out.node_at(&Position::new(vec![1])).unwrap();
        assert!(new_root_child > max_before, "replacement nodes are renamed above the host");
    }

    #[test]
    fn full_step_rewrites_pointwise_under_sharing() {
        // Shared a under c: rewriting one occurrence must unfold first.
        let trs = parse_trs("(VAR)\n(RULES a -> b)").unwrap();
        let grs = Grs::compile(&trs);
        let g = TermGraph::mk_shared(&t("c(a,a)"));
        assert_eq!(g.size(), 2);
        let full = grs.full_step(&g, &Position::new(vec![1]), 0, StepOptions::default()).unwrap();
        assert_eq!(full.graph.read_term(), t("c(b,a)"));
        assert_eq!(full.copies(), 1);
        // Without unfolding, replacing the shared node rewrites both
        // occurrences at once — the broken semantics.
        let broken = grs
            .full_step(&g, &Position::new(vec![1]), 0, StepOptions { unfold: false, fold: true })
            .unwrap();
        assert_eq!(broken.graph.read_term(), t("c(b,b)"));
    }

    #[test]
    fn all_full_reducts_take_one_position_per_node() {
        let trs = parse_trs("(VAR)\n(RULES a -> b)").unwrap();
        let grs = Grs::compile(&trs);
        // Tree: two distinct a-nodes, two reducts.
        let tree = TermGraph::mk_tree(&t("c(a,a)"));
        let rs = grs.all_full_reducts(&tree, StepOptions::default());
        let positions: Vec<&Position> = rs.iter().map(|r| &r.position).collect();
        assert_eq!(positions, vec![&Position::new(vec![1]), &Position::new(vec![2])]);
        // Shared: one a-node, canonical position [1], one reduct.
        let shared = TermGraph::mk_shared(&t("c(a,a)"));
        let rs = grs.all_full_reducts(&shared, StepOptions::default());
        assert_eq!(rs.len(), 1);
        assert_eq!(rs[0].position, Position::new(vec![1]));
        assert_eq!(rs[0].graph.read_term(), t("c(b,a)"));
    }

    #[test]
    fn full_reducts_report_rules_in_order() {
        let trs = parse_trs("(VAR x)\n(RULES f(x) -> a\n f(b) -> b)").unwrap();
        let grs = Grs::compile(&trs);
        let g = TermGraph::mk_tree(&t("f(b)"));
        let rs = grs.all_full_reducts(&g, StepOptions::default());
        assert_eq!(rs.len(), 2);
        assert_eq!((rs[0].rule, rs[1].rule), (0, 1));
        assert_eq!(rs[0].graph.read_term(), t("a"));
        assert_eq!(rs[1].graph.read_term(), t("b"));
    }

    #[test]
    fn growth_is_bounded_by_delta() {
        let trs = parse_trs("(VAR x)\n(RULES f(x) -> c(g(x),g(g(x))))").unwrap();
        let grs = Grs::compile(&trs);
        assert_eq!(grs.delta(), 5); // c, g, g, g + one variable
        let g = TermGraph::mk_tree(&t("f(a)"));
        let full = grs.full_step(&g, &Position::root(), 0, StepOptions::default()).unwrap();
        assert!(full.graph.size() <= g.size() + grs.delta());
    }
}
