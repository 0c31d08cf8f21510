//! Derivations, bound auditing, normal-form exploration, and the agreement
//! check against the reference term rewriter.
//!
//! The engine drives full rewrite steps (unfold · fold · rewrite) under a
//! selectable strategy and records every step with enough detail that the
//! size and depth bounds can be re-audited from the trace alone. Exploration
//! of *all* normal forms runs breadth-first over term-identity states
//! (graphs folded and renamed canonically), optionally contracting uniquely
//! determined redexes eagerly when the system's shape allows it.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{Label, NodeId, TermGraph};
use crate::grs::{FullOutcome, Grs, GrsError, StepOptions};
use crate::oracle;
use crate::overlap::{match_outcome_at, MatchOutcome, StaticAnalysis};
use crate::parallel::{self, Parallelism};
use crate::sharing::{fold_all, FoldStep};
use crate::term::{match_term, FunSym, Position, Term, Trs};

/// Where the next redex is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// The first redex in post-order: leftmost of the innermost.
    #[default]
    LeftmostInnermost,
    /// The redex whose canonical position is lexicographically least:
    /// leftmost of the outermost.
    LeftmostOutermost,
    /// The redex at the smallest node id — cheap and arbitrary.
    FirstFound,
    /// Breadth-first search for the nearest normal form over all
    /// interleavings, then a replay of the found branch.
    Exhaustive,
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "li" | "leftmost-innermost" => Ok(Strategy::LeftmostInnermost),
            "lo" | "leftmost-outermost" => Ok(Strategy::LeftmostOutermost),
            "ff" | "first-found" => Ok(Strategy::FirstFound),
            "ex" | "exhaustive" => Ok(Strategy::Exhaustive),
            other => Err(format!("unknown strategy `{other}` (expected li, lo, ff or ex)")),
        }
    }
}

/// Budget for a single derivation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Limits {
    /// Maximum number of rewrite steps (for the exhaustive strategy, also
    /// the number of states the search may expand).
    pub max_steps: usize,
    /// Maximum symbol count a graph is unfolded to when reading terms back.
    pub readback_cap: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_steps: 10_000, readback_cap: 1_000_000 }
    }
}

/// One recorded full step. Everything the bound audit needs is here; nothing
/// has to be recomputed from the graphs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub position: Position,
    pub rule: usize,
    pub copies: usize,
    pub collapses: usize,
    /// Subgraph size at the position after unfolding — the collapse budget.
    pub redex_size: usize,
    pub size_before: usize,
    pub size_after: usize,
    pub depth_before: usize,
    pub depth_after: usize,
    pub rsize_after: usize,
    pub unfold_steps: Vec<FoldStep>,
    pub fold_steps: Vec<FoldStep>,
}

/// A full derivation: the initial graph, the recorded steps, and the result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerivationTrace {
    pub strategy: Strategy,
    pub initial: TermGraph,
    pub steps: Vec<StepRecord>,
    pub final_graph: TermGraph,
    /// Readback of the final graph; absent when it exceeds the cap.
    pub final_term: Option<Term>,
    /// No further step applies to the final graph.
    pub reached_normal_form: bool,
    /// The step budget ran out first.
    pub fuel_exhausted: bool,
}

/// Per-step verdicts of the bound audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StepAudit {
    pub index: usize,
    /// `|T| <= |S| + depth(S) + Δ`.
    pub size_ok: bool,
    /// `depth(T) <= depth(S) + Δ`.
    pub depth_ok: bool,
    /// Copies used by unfolding stay within the position length.
    pub copies_ok: bool,
    /// Collapses used by folding stay within the unfolded redex size.
    pub collapses_ok: bool,
    /// The record chains onto its predecessor (sizes and depths line up).
    pub chain_ok: bool,
    /// `|T_l| <= (l+1)|T_0| + l²Δ` after this step.
    pub cumulative_ok: bool,
}

impl StepAudit {
    pub fn all_ok(&self) -> bool {
        self.size_ok
            && self.depth_ok
            && self.copies_ok
            && self.collapses_ok
            && self.chain_ok
            && self.cumulative_ok
    }
}

/// Result of auditing one trace.
#[derive(Debug, Clone, Serialize)]
pub struct BoundAudit {
    pub steps: Vec<StepAudit>,
    /// All per-step verdicts hold and the final graph matches the last
    /// record.
    pub all_ok: bool,
}

/// Re-checks every bound from the trace alone. `delta` is the system's
/// largest right-hand-side size.
pub fn audit_bounds(trace: &DerivationTrace, delta: usize) -> BoundAudit {
    let size0 = trace.initial.size();
    let mut prev_size = size0;
    let mut prev_depth = trace.initial.depth();
    let mut steps = Vec::with_capacity(trace.steps.len());
    let mut all_ok = true;
    for (k, s) in trace.steps.iter().enumerate() {
        let ell = k + 1;
        let audit = StepAudit {
            index: s.index,
            size_ok: s.size_after <= s.size_before + s.depth_before + delta,
            depth_ok: s.depth_after <= s.depth_before + delta,
            copies_ok: s.copies <= s.position.len() && s.copies == s.unfold_steps.len(),
            collapses_ok: s.collapses <= s.redex_size && s.collapses == s.fold_steps.len(),
            chain_ok: s.index == k && s.size_before == prev_size && s.depth_before == prev_depth,
            cumulative_ok: s.size_after <= (ell + 1) * size0 + ell * ell * delta,
        };
        all_ok &= audit.all_ok();
        prev_size = s.size_after;
        prev_depth = s.depth_after;
        steps.push(audit);
    }
    all_ok &= trace.final_graph.size() == prev_size && trace.final_graph.depth() == prev_depth;
    BoundAudit { steps, all_ok }
}

/// Budget for normal-form exploration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SearchLimits {
    /// Maximum number of states expanded (eagerly contracted steps count).
    pub max_states: usize,
    /// Maximum frontier width; beyond it, random states are dropped.
    pub max_frontier: usize,
    /// Seed for the frontier eviction.
    pub seed: u64,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits { max_states: 200_000, max_frontier: 100_000, seed: 0xC0FFEE }
    }
}

/// Result of exploring all normal forms reachable from a graph.
#[derive(Debug, Clone)]
pub struct Exploration {
    /// Canonical (folded, renamed) normal-form graphs, sorted by their dump.
    pub normal_forms: Vec<TermGraph>,
    /// A limit was hit: the set may be incomplete.
    pub exhausted: bool,
    pub states_expanded: usize,
    /// Steps taken by eager contraction of uniquely determined redexes.
    pub fused_steps: usize,
}

/// Hard cap on one eager-contraction chain, so a diverging deterministic
/// spine cannot hang the search.
const FUSE_CHAIN_CAP: usize = 10_000;

/// How far a readback may go inside the agreement check.
const AGREEMENT_READBACK_CAP: usize = 1_000_000;

/// Report of the agreement check against the reference term rewriter.
#[derive(Debug, Clone, Serialize)]
pub struct AdequacyReport {
    pub ok: bool,
    pub depth: usize,
    /// Distinct terms whose one-step behaviour was compared.
    pub terms_checked: usize,
    /// (position, rule) attempts compared on both sides.
    pub steps_checked: usize,
    pub counterexamples: Vec<String>,
}

/// The rewrite engine: a term rewriting system, its graph compilation, and
/// the static analysis steering the explorer.
#[derive(Debug, Clone)]
pub struct Engine {
    trs: Trs,
    grs: Grs,
    analysis: StaticAnalysis,
    rules_by_root: BTreeMap<FunSym, Vec<usize>>,
    mode: Parallelism,
    fusion: bool,
}

impl Engine {
    pub fn new(trs: Trs) -> Engine {
        let grs = Grs::compile(&trs);
        let analysis = StaticAnalysis::analyse(&trs);
        let mut rules_by_root: BTreeMap<FunSym, Vec<usize>> = BTreeMap::new();
        for (i, rule) in trs.rules().iter().enumerate() {
            if let Term::App(f, _) = &rule.lhs {
                rules_by_root.entry(f.clone()).or_default().push(i);
            }
        }
        Engine {
            trs,
            grs,
            analysis,
            rules_by_root,
            mode: Parallelism::default(),
            fusion: true,
        }
    }

    pub fn with_parallelism(mut self, mode: Parallelism) -> Engine {
        self.mode = mode;
        self
    }

    /// Enables or disables eager contraction in the explorer. Contraction is
    /// only ever used when the static analysis allows it; this switch exists
    /// so the two search modes can be compared.
    pub fn with_fusion(mut self, on: bool) -> Engine {
        self.fusion = on;
        self
    }

    pub fn trs(&self) -> &Trs {
        &self.trs
    }

    pub fn grs(&self) -> &Grs {
        &self.grs
    }

    pub fn analysis(&self) -> StaticAnalysis {
        self.analysis
    }

    // ------------------------------------------------------------------
    // Derivations
    // ------------------------------------------------------------------

    /// Rewrites to normal form under the strategy, recording every step.
    pub fn normalize(&self, g: &TermGraph, strategy: Strategy, limits: &Limits) -> DerivationTrace {
        self.normalize_observed(g, strategy, limits, StepOptions::default(), &mut |_, _| {})
    }

    /// Like [`Engine::normalize`], with explicit step options (the negative
    /// controls disable parts of the sharing bracket).
    pub fn normalize_opts(
        &self,
        g: &TermGraph,
        strategy: Strategy,
        limits: &Limits,
        options: StepOptions,
    ) -> DerivationTrace {
        self.normalize_observed(g, strategy, limits, options, &mut |_, _| {})
    }

    /// Full-control normalisation: `observer` sees the initial graph as step
    /// 0 and every intermediate graph after its step.
    pub fn normalize_observed(
        &self,
        g: &TermGraph,
        strategy: Strategy,
        limits: &Limits,
        options: StepOptions,
        observer: &mut dyn FnMut(usize, &TermGraph),
    ) -> DerivationTrace {
        let initial = g.clone();
        observer(0, &initial);
        let mut current = g.clone();
        let mut steps: Vec<StepRecord> = Vec::new();
        let mut fuel_exhausted = false;
        let mut reached_normal_form = false;

        // The exhaustive strategy plans its branch up front; the others pick
        // one redex at a time.
        let mut plan: Option<VecDeque<(Position, usize)>> = None;
        if strategy == Strategy::Exhaustive {
            let (path, exhausted, nf_found) = self.plan_exhaustive(&current, limits, options);
            fuel_exhausted = exhausted;
            reached_normal_form = nf_found && !exhausted;
            plan = Some(path.into());
        }

        loop {
            if steps.len() >= limits.max_steps {
                fuel_exhausted = true;
                break;
            }
            let outcome = match &mut plan {
                Some(path) => match path.pop_front() {
                    None => break,
                    Some((pos, rule)) => Some(
                        self.grs
                            .full_step(&current, &pos, rule, options)
                            .expect("a planned step replays on the raw graph"),
                    ),
                },
                None => self.pick(&current, strategy, options),
            };
            let Some(outcome) = outcome else {
                reached_normal_form = true;
                break;
            };
            let record = self.record(steps.len(), &current, &outcome);
            current = outcome.graph;
            observer(steps.len() + 1, &current);
            steps.push(record);
        }

        let final_term = current.read_term_capped(limits.readback_cap).ok();
        DerivationTrace {
            strategy,
            initial,
            steps,
            final_graph: current,
            final_term,
            reached_normal_form,
            fuel_exhausted,
        }
    }

    fn record(&self, index: usize, before: &TermGraph, outcome: &FullOutcome) -> StepRecord {
        let after = outcome.graph.metrics();
        StepRecord {
            index,
            position: outcome.position.clone(),
            rule: outcome.rule,
            copies: outcome.copies(),
            collapses: outcome.collapses(),
            redex_size: outcome.redex_size,
            size_before: before.size(),
            size_after: after.size,
            depth_before: before.depth(),
            depth_after: after.depth,
            rsize_after: after.rsize,
            unfold_steps: outcome.unfold_steps.clone(),
            fold_steps: outcome.fold_steps.clone(),
        }
    }

    /// Nodes in leftmost-innermost order: children (left to right) before
    /// parents, each node once.
    fn post_order(g: &TermGraph) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut visited = BTreeSet::new();
        let mut stack = vec![(g.root(), false)];
        while let Some((id, emit)) = stack.pop() {
            if emit {
                out.push(id);
                continue;
            }
            if !visited.insert(id) {
                continue;
            }
            stack.push((id, true));
            let node = g.node(id).expect("traversal stays inside the graph");
            for &s in node.succ.iter().rev() {
                if !visited.contains(&s) {
                    stack.push((s, false));
                }
            }
        }
        out
    }

    /// Picks the next redex under a sequential strategy: the first node (in
    /// strategy order) and lowest-indexed rule whose full step applies.
    fn pick(&self, g: &TermGraph, strategy: Strategy, options: StepOptions) -> Option<FullOutcome> {
        let canonical = g.canonical_positions();
        let nodes: Vec<NodeId> = match strategy {
            Strategy::LeftmostInnermost => Self::post_order(g),
            Strategy::LeftmostOutermost => {
                let mut ids: Vec<NodeId> = g.node_ids().collect();
                ids.sort_by(|a, b| canonical[a].cmp(&canonical[b]));
                ids
            }
            Strategy::FirstFound => g.node_ids().collect(),
            Strategy::Exhaustive => unreachable!("exhaustive derivations are planned"),
        };
        for id in nodes {
            let Some(rules) = self.candidate_rules(g, id) else { continue };
            let pos = &canonical[&id];
            for &rule in rules {
                match self.grs.full_step(g, pos, rule, options) {
                    Ok(outcome) => return Some(outcome),
                    Err(GrsError::NoRedex { .. }) => continue,
                    Err(e) => unreachable!("full step at an enumerated position: {e}"),
                }
            }
        }
        None
    }

    /// Rules whose left-hand-side root matches the node's label. `None` when
    /// the node cannot head a redex at all.
    fn candidate_rules(&self, g: &TermGraph, id: NodeId) -> Option<&Vec<usize>> {
        match &g.node(id).ok()?.label {
            Label::Var(_) => None,
            Label::Fun(f) => self.rules_by_root.get(f),
        }
    }

    /// Breadth-first search over term-identity states for the nearest normal
    /// form. Returns the branch as (position, rule) choices, whether the
    /// budget ran out, and whether a normal form was found.
    fn plan_exhaustive(
        &self,
        g: &TermGraph,
        limits: &Limits,
        options: StepOptions,
    ) -> (Vec<(Position, usize)>, bool, bool) {
        let start = Self::canon_state(g);
        let start_key = start.dump_text();
        let mut parents: BTreeMap<String, (String, Position, usize)> = BTreeMap::new();
        let mut states: BTreeMap<String, TermGraph> = BTreeMap::new();
        states.insert(start_key.clone(), start);
        let mut queue: VecDeque<String> = VecDeque::from([start_key.clone()]);
        let mut expanded = 0usize;
        while let Some(key) = queue.pop_front() {
            if expanded >= limits.max_steps {
                return (Vec::new(), true, false);
            }
            expanded += 1;
            let state = states[&key].clone();
            let reducts = self.grs.all_full_reducts(&state, options);
            if reducts.is_empty() {
                // Walk back to the start.
                let mut path = Vec::new();
                let mut cur = key;
                while let Some((parent, pos, rule)) = parents.get(&cur) {
                    path.push((pos.clone(), *rule));
                    cur = parent.clone();
                }
                path.reverse();
                return (path, false, true);
            }
            for outcome in reducts {
                let child = Self::canon_state(&outcome.graph);
                let child_key = child.dump_text();
                if !states.contains_key(&child_key) {
                    states.insert(child_key.clone(), child);
                    parents.insert(child_key.clone(), (key.clone(), outcome.position, outcome.rule));
                    queue.push_back(child_key);
                }
            }
        }
        // Search space exhausted without finding a normal form: every
        // reachable state reduces further (the system loops from here).
        (Vec::new(), false, false)
    }

    // ------------------------------------------------------------------
    // Normal-form exploration
    // ------------------------------------------------------------------

    /// The canonical state for exploration: the same term always maps to the
    /// same graph (maximally folded, nodes renamed in preorder).
    fn canon_state(g: &TermGraph) -> TermGraph {
        fold_all(g).graph.canonical_form()
    }

    /// Eagerly contracts uniquely determined redexes: positions where exactly
    /// one rule matches and every competing rule (same root symbol) can never
    /// match again. Sound when the system is left-linear with root overlaps
    /// only; the caller checks that. Returns the advanced state, the steps
    /// used, and whether a cap cut the chain short.
    fn fuse_state(&self, state: TermGraph, budget: usize) -> (TermGraph, usize, bool) {
        let cap = budget.min(FUSE_CHAIN_CAP);
        let mut cur = state;
        let mut seen: HashSet<String> = HashSet::from([cur.dump_text()]);
        let mut used = 0usize;
        'chain: loop {
            if used >= cap {
                return (cur, used, true);
            }
            // Exploration states are maximally folded, so the classification
            // can read the state directly: the sharing bracket would change
            // nothing a match sees below the position. Outermost positions go
            // first — an erasing ancestor must not be starved by a looping
            // descendant.
            let canonical = cur.canonical_positions();
            let mut ids: Vec<NodeId> = cur.node_ids().collect();
            ids.sort_by(|a, b| canonical[a].length_lex_cmp(&canonical[b]));
            for id in ids {
                let Some(rules) = self.candidate_rules(&cur, id) else { continue };
                let mut matching = Vec::new();
                let mut all_others_permanent = true;
                for &rule in rules {
                    match match_outcome_at(&self.trs, &self.trs.rules()[rule].lhs, &cur, id) {
                        MatchOutcome::Matches => matching.push(rule),
                        MatchOutcome::FailPermanent => {}
                        MatchOutcome::FailTransient => all_others_permanent = false,
                    }
                }
                if matching.len() == 1 && all_others_permanent {
                    let pos = &canonical[&id];
                    let Ok(step) =
                        self.grs.full_step(&cur, pos, matching[0], StepOptions::default())
                    else {
                        continue;
                    };
                    let next = Self::canon_state(&step.graph);
                    used += 1;
                    if !seen.insert(next.dump_text()) {
                        // The deterministic spine loops; stop advancing.
                        return (cur, used, false);
                    }
                    cur = next;
                    continue 'chain;
                }
            }
            return (cur, used, false);
        }
    }

    /// All normal forms reachable from `g`, breadth-first over term-identity
    /// states. Deterministic for a fixed seed, independent of parallelism.
    pub fn all_normal_forms(&self, g: &TermGraph, limits: &SearchLimits) -> Exploration {
        let fuse = self.fusion && self.analysis.fusable();
        let mut fused_steps = 0usize;
        let mut exhausted = false;

        let start = Self::canon_state(g);
        let start = if fuse {
            let (s, used, hit) = self.fuse_state(start, limits.max_states);
            fused_steps += used;
            exhausted |= hit;
            s
        } else {
            start
        };
        let mut seen: HashSet<String> = HashSet::from([start.dump_text()]);
        let mut normal_forms: BTreeMap<String, TermGraph> = BTreeMap::new();
        let mut layer: Vec<TermGraph> = vec![start];
        let mut expanded = 0usize;
        let mut rng = ChaCha8Rng::seed_from_u64(limits.seed);

        while !layer.is_empty() {
            let remaining = limits.max_states.saturating_sub(expanded + fused_steps);
            if remaining == 0 {
                exhausted = true;
                break;
            }
            if layer.len() > remaining {
                layer.truncate(remaining);
                exhausted = true;
            }
            expanded += layer.len();
            // Chains started inside one layer share the budget only loosely:
            // each gets what was left before the layer ran.
            let chain_budget = limits.max_states.saturating_sub(expanded + fused_steps);
            let results = parallel::map_vec(self.mode, layer, |state| {
                let reducts = self.grs.all_full_reducts(&state, StepOptions::default());
                let children: Vec<(TermGraph, usize, bool)> = reducts
                    .into_iter()
                    .map(|o| {
                        let canon = Self::canon_state(&o.graph);
                        if fuse {
                            self.fuse_state(canon, chain_budget)
                        } else {
                            (canon, 0, false)
                        }
                    })
                    .collect();
                (state, children)
            });
            let mut next: Vec<(String, TermGraph)> = Vec::new();
            for (state, children) in results {
                if children.is_empty() {
                    normal_forms.insert(state.dump_text(), state);
                    continue;
                }
                for (child, used, hit) in children {
                    fused_steps += used;
                    exhausted |= hit;
                    let key = child.dump_text();
                    if seen.insert(key.clone()) {
                        next.push((key, child));
                    }
                }
            }
            if next.len() > limits.max_frontier {
                next.shuffle(&mut rng);
                // Evicted states are forgotten entirely so a later different
                // route may still reach them.
                for (key, _) in next.drain(limits.max_frontier..) {
                    seen.remove(&key);
                }
                exhausted = true;
            }
            layer = next.into_iter().map(|(_, g)| g).collect();
        }
        Exploration {
            normal_forms: normal_forms.into_values().collect(),
            exhausted,
            states_expanded: expanded,
            fused_steps,
        }
    }

    // ------------------------------------------------------------------
    // Agreement with term rewriting
    // ------------------------------------------------------------------

    /// Compares graph rewriting with the reference term rewriter, breadth
    /// first from `s` to the given depth: at every reachable term, every
    /// (position, rule) pair must behave identically on both sides, readbacks
    /// must agree, the per-level term sets must coincide, and every graph
    /// step must respect its bounds.
    pub fn adequacy_check(&self, s: &Term, depth: usize, options: StepOptions) -> AdequacyReport {
        let delta = self.grs.delta();
        let mut level: BTreeMap<Term, TermGraph> = BTreeMap::new();
        level.insert(s.clone(), TermGraph::mk_tree(s));
        let mut counterexamples = Vec::new();
        let mut terms_checked = 0usize;
        let mut steps_checked = 0usize;

        for _ in 0..depth {
            if level.is_empty() || counterexamples.len() >= 25 {
                break;
            }
            terms_checked += level.len();
            let entries: Vec<(Term, TermGraph)> = level.into_iter().collect();
            let results = parallel::map_vec(self.mode, entries, |(t, g)| {
                let mut cexs: Vec<String> = Vec::new();
                let mut succs: Vec<(Term, TermGraph)> = Vec::new();
                let mut attempts = 0usize;
                for p in t.positions() {
                    let sub = t.subterm_at(&p).expect("enumerated position");
                    for (i, rule) in self.trs.rules().iter().enumerate() {
                        attempts += 1;
                        let term_step = match_term(&rule.lhs, sub)
                            .map(|sigma| t.replace_at(&p, rule.rhs.apply(&sigma)).unwrap());
                        match self.grs.full_step(&g, &p, i, options) {
                            Ok(out) => {
                                let Some(expected) = term_step else {
                                    cexs.push(format!(
                                        "graph rewrites {t} at {p} with rule {i}, terms cannot"
                                    ));
                                    continue;
                                };
                                match out.graph.read_term_capped(AGREEMENT_READBACK_CAP) {
                                    Err(_) => cexs.push(format!(
                                        "readback overflow after rewriting {t} at {p} rule {i}"
                                    )),
                                    Ok(tau) if tau != expected => cexs.push(format!(
                                        "readback mismatch at {p} rule {i}: graph gives {tau}, terms give {expected}"
                                    )),
                                    Ok(tau) => {
                                        if out.graph.size() > g.size() + g.depth() + delta {
                                            cexs.push(format!(
                                                "size bound broken rewriting {t} at {p} rule {i}"
                                            ));
                                        }
                                        if out.graph.depth() > g.depth() + delta {
                                            cexs.push(format!(
                                                "depth bound broken rewriting {t} at {p} rule {i}"
                                            ));
                                        }
                                        if out.copies() > p.len() {
                                            cexs.push(format!(
                                                "copy bound broken rewriting {t} at {p} rule {i}"
                                            ));
                                        }
                                        if out.collapses() > out.redex_size {
                                            cexs.push(format!(
                                                "collapse bound broken rewriting {t} at {p} rule {i}"
                                            ));
                                        }
                                        succs.push((tau, out.graph));
                                    }
                                }
                            }
                            Err(GrsError::NoRedex { .. }) => {
                                if term_step.is_some() {
                                    cexs.push(format!(
                                        "terms rewrite {t} at {p} with rule {i}, graph cannot"
                                    ));
                                }
                            }
                            Err(e) => cexs.push(format!(
                                "graph error rewriting {t} at {p} with rule {i}: {e}"
                            )),
                        }
                    }
                }
                // Independent route: the reduct oracle enumerates the same
                // successor set.
                let oracle_set: BTreeSet<Term> =
                    oracle::term_reducts(&self.trs, &t).into_iter().map(|(_, _, u)| u).collect();
                let graph_set: BTreeSet<Term> = succs.iter().map(|(u, _)| u.clone()).collect();
                if oracle_set != graph_set {
                    cexs.push(format!(
                        "successor sets differ for {t}: graph {graph_set:?} vs terms {oracle_set:?}"
                    ));
                }
                (cexs, succs, attempts)
            });
            let mut next: BTreeMap<Term, TermGraph> = BTreeMap::new();
            for (cexs, succs, attempts) in results {
                steps_checked += attempts;
                counterexamples.extend(cexs);
                for (tau, graph) in succs {
                    next.entry(tau).or_insert(graph);
                }
            }
            level = next;
        }
        AdequacyReport {
            ok: counterexamples.is_empty(),
            depth,
            terms_checked,
            steps_checked,
            counterexamples,
        }
    }
}
