//! Rule overlap analysis: unification, critical pairs, and match-failure
//! classification.
//!
//! The normal-form explorer has a deterministic fast path: when the system is
//! left-linear and all rule overlaps are at the root, a redex whose position
//! admits exactly one rule — with every competing rule *permanently* ruled
//! out — can be contracted eagerly without losing normal forms. This module
//! provides the two static ingredients: the critical-pair computation that
//! validates the system shape, and the match-failure classification that
//! distinguishes "this rule can never match here, whatever happens below"
//! from "this rule might match after more rewriting".

use std::collections::BTreeMap;

use crate::graph::{Label, NodeId, TermGraph};
use crate::term::{Position, Substitution, Term, Trs};

/// Most general unifier of two terms, if any. Variable names are shared
/// between the sides, so callers rename apart first when that matters.
pub fn unify(a: &Term, b: &Term) -> Option<Substitution> {
    let mut subst = Substitution::new();
    let mut work = vec![(a.clone(), b.clone())];
    while let Some((s, t)) = work.pop() {
        let s = s.apply(&subst);
        let t = t.apply(&subst);
        match (s, t) {
            (Term::Var(x), Term::Var(y)) if x == y => {}
            (Term::Var(x), t) | (t, Term::Var(x)) => {
                if t.vars().contains(&x) {
                    return None; // occurs check
                }
                let single = Substitution::from([(x.clone(), t.clone())]);
                for v in subst.values_mut() {
                    *v = v.apply(&single);
                }
                subst.insert(x, t);
            }
            (Term::App(f, fa), Term::App(g, ga)) => {
                if f != g {
                    return None;
                }
                work.extend(fa.into_iter().zip(ga));
            }
        }
    }
    Some(subst)
}

fn rename_vars(t: &Term, suffix: &str) -> Term {
    match t {
        Term::Var(x) => Term::Var(format!("{x}{suffix}")),
        Term::App(f, args) => {
            Term::App(f.clone(), args.iter().map(|a| rename_vars(a, suffix)).collect())
        }
    }
}

/// A critical pair: two rules overlapping on one term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriticalPair {
    /// Rule whose left-hand side hosts the overlap.
    pub outer: usize,
    /// Rule rewriting inside (or at the root of) the outer left-hand side.
    pub inner: usize,
    /// Where in the outer left-hand side the inner rule applies.
    pub pos: Position,
    /// The overlapping term (the instantiated outer left-hand side).
    pub peak: Term,
    /// Peak rewritten by the inner rule at `pos`.
    pub left: Term,
    /// Peak rewritten by the outer rule at the root.
    pub right: Term,
}

/// A variable suffix that renames the system's variables apart from
/// themselves: primes, as many as needed to dodge every declared name.
fn fresh_suffix(trs: &Trs) -> String {
    let names = trs.variables();
    let mut suffix = "'".to_string();
    while names.iter().any(|v| names.contains(&format!("{v}{suffix}"))) {
        suffix.push('\'');
    }
    suffix
}

/// All critical pairs of the system: for every ordered rule pair and every
/// non-variable position of the outer left-hand side, unify the subterm with
/// the (renamed-apart) inner left-hand side. The trivial self-overlap of a
/// rule with itself at the root is skipped.
pub fn critical_pairs(trs: &Trs) -> Vec<CriticalPair> {
    let mut out = Vec::new();
    let suffix = fresh_suffix(trs);
    let rules = trs.rules();
    for (outer, ro) in rules.iter().enumerate() {
        for (inner, ri) in rules.iter().enumerate() {
            let li = rename_vars(&ri.lhs, &suffix);
            let rhs_i = rename_vars(&ri.rhs, &suffix);
            for pos in ro.lhs.positions() {
                if pos.is_root() && inner == outer {
                    continue;
                }
                let sub = ro.lhs.subterm_at(&pos).expect("position of the term itself");
                if sub.is_var() {
                    continue;
                }
                if let Some(sigma) = unify(sub, &li) {
                    let peak = ro.lhs.apply(&sigma);
                    let left = peak
                        .replace_at(&pos, rhs_i.apply(&sigma))
                        .expect("position survives instantiation");
                    let right = ro.rhs.apply(&sigma);
                    out.push(CriticalPair { outer, inner, pos, peak, left, right });
                }
            }
        }
    }
    out
}

/// The static system shape relevant to the explorer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StaticAnalysis {
    pub left_linear: bool,
    /// Every critical pair sits at the root of its peak.
    pub root_overlaps_only: bool,
}

impl StaticAnalysis {
    pub fn analyse(trs: &Trs) -> StaticAnalysis {
        StaticAnalysis {
            left_linear: trs.is_left_linear(),
            root_overlaps_only: critical_pairs(trs).iter().all(|cp| cp.pos.is_root()),
        }
    }

    /// May the explorer use eager contraction of uniquely determined
    /// redexes?
    pub fn fusable(&self) -> bool {
        self.left_linear && self.root_overlaps_only
    }
}

/// How a rule's left-hand side relates to a subject, looking into the future:
/// rewriting may still happen at or below the subject's own subterms, but the
/// inspected occurrence itself stays where it is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchOutcome {
    /// The pattern matches right now.
    Matches,
    /// No match now, but rewriting below could still produce one.
    FailTransient,
    /// No match now or ever: the clash sits under constructors (or at a
    /// variable), which no rewrite below this occurrence can change.
    FailPermanent,
}

impl MatchOutcome {
    fn combine(self, other: MatchOutcome) -> MatchOutcome {
        use MatchOutcome::*;
        match (self, other) {
            (FailPermanent, _) | (_, FailPermanent) => FailPermanent,
            (FailTransient, _) | (_, FailTransient) => FailTransient,
            (Matches, Matches) => Matches,
        }
    }
}

/// Classifies a pattern against a plain term.
pub fn match_outcome(trs: &Trs, pattern: &Term, subject: &Term) -> MatchOutcome {
    let mut bindings: BTreeMap<&str, &Term> = BTreeMap::new();
    fn go<'a>(
        trs: &Trs,
        pattern: &'a Term,
        subject: &'a Term,
        bindings: &mut BTreeMap<&'a str, &'a Term>,
    ) -> MatchOutcome {
        match pattern {
            Term::Var(x) => match bindings.get(x.as_str()) {
                None => {
                    bindings.insert(x, subject);
                    MatchOutcome::Matches
                }
                Some(&prev) if prev == subject => MatchOutcome::Matches,
                Some(&prev) => {
                    // A non-linear conflict. Two distinct normal forms can
                    // never converge; anything else might.
                    if trs.is_value(prev) && trs.is_value(subject) {
                        MatchOutcome::FailPermanent
                    } else {
                        MatchOutcome::FailTransient
                    }
                }
            },
            Term::App(f, pargs) => match subject {
                // A variable is never rewritten; it cannot grow a root symbol.
                Term::Var(_) => MatchOutcome::FailPermanent,
                Term::App(g, sargs) => {
                    if f != g {
                        return if trs.signature().is_defined(&g.name) {
                            MatchOutcome::FailTransient
                        } else {
                            MatchOutcome::FailPermanent
                        };
                    }
                    let mut acc = MatchOutcome::Matches;
                    for (p, s) in pargs.iter().zip(sargs) {
                        acc = acc.combine(go(trs, p, s, bindings));
                        if acc == MatchOutcome::FailPermanent {
                            break;
                        }
                    }
                    acc
                }
            },
        }
    }
    go(trs, pattern, subject, &mut bindings)
}

/// Classifies a pattern against a graph node. Equality of subject subterms is
/// judged by node identity, so this must run on a graph folded below the node
/// whenever the pattern is non-linear — on unfolded graphs the permanent
/// verdict for distinct value nodes would be wrong, since a later fold could
/// merge them.
pub fn match_outcome_at(
    trs: &Trs,
    pattern: &Term,
    graph: &TermGraph,
    at: NodeId,
) -> MatchOutcome {
    // No defined symbol below the node: the subgraph is a value and can
    // never be rewritten again.
    fn value_only(trs: &Trs, graph: &TermGraph, at: NodeId) -> bool {
        graph
            .subgraph_at(at)
            .map(|sub| {
                sub.iter().all(|(_, n)| match &n.label {
                    Label::Var(_) => true,
                    Label::Fun(f) => !trs.signature().is_defined(&f.name),
                })
            })
            .unwrap_or(false)
    }
    let mut bindings: BTreeMap<&str, NodeId> = BTreeMap::new();
    fn go<'a>(
        trs: &Trs,
        pattern: &'a Term,
        graph: &TermGraph,
        at: NodeId,
        bindings: &mut BTreeMap<&'a str, NodeId>,
    ) -> MatchOutcome {
        match pattern {
            Term::Var(x) => match bindings.get(x.as_str()) {
                None => {
                    bindings.insert(x, at);
                    MatchOutcome::Matches
                }
                Some(&prev) if prev == at => MatchOutcome::Matches,
                // Distinct nodes in a folded region are distinct terms. Two
                // values never converge; anything still computing might.
                Some(&prev) => {
                    if value_only(trs, graph, prev) && value_only(trs, graph, at) {
                        MatchOutcome::FailPermanent
                    } else {
                        MatchOutcome::FailTransient
                    }
                }
            },
            Term::App(f, pargs) => {
                let node = graph.node(at).expect("matching stays inside the graph");
                match &node.label {
                    Label::Var(_) => MatchOutcome::FailPermanent,
                    Label::Fun(g) => {
                        if f != g {
                            return if trs.signature().is_defined(&g.name) {
                                MatchOutcome::FailTransient
                            } else {
                                MatchOutcome::FailPermanent
                            };
                        }
                        let mut acc = MatchOutcome::Matches;
                        for (p, &s) in pargs.iter().zip(&node.succ) {
                            acc = acc.combine(go(trs, p, graph, s, bindings));
                            if acc == MatchOutcome::FailPermanent {
                                break;
                            }
                        }
                        acc
                    }
                }
            }
        }
    }
    go(trs, pattern, graph, at, &mut bindings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_term, parse_trs};
    use std::collections::BTreeSet;

    fn t(s: &str) -> Term {
        let vars = ["x", "y", "z", "x'", "y'", "z'"].map(String::from);
        parse_term(s, &BTreeSet::from(vars)).unwrap()
    }

    #[test]
    fn unification_basics() {
        let sigma = unify(&t("f(x,b)"), &t("f(a,y)")).unwrap();
        assert_eq!(sigma.get("x"), Some(&t("a")));
        assert_eq!(sigma.get("y"), Some(&t("b")));
        // Symbol clash.
        assert!(unify(&t("f(x,b)"), &t("g(a,b)")).is_none());
        // Occurs check.
        assert!(unify(&t("x"), &t("f(x)")).is_none());
        // Non-linear propagation: g(x,x) ~ g(a,y) binds y to a.
        let sigma = unify(&t("g(x,x)"), &t("g(a,y)")).unwrap();
        assert_eq!(sigma.get("y"), Some(&t("a")));
        assert!(unify(&t("g(x,x)"), &t("g(a,b)")).is_none());
        // Unifier instantiates both sides equally.
        let (a, b) = (t("f(x,g(y))"), t("f(g(z),x)"));
        let sigma = unify(&a, &b).unwrap();
        assert_eq!(a.apply(&sigma), b.apply(&sigma));
    }

    #[test]
    fn no_critical_pairs_without_overlap() {
        let trs = parse_trs("(VAR x)\n(RULES f(x) -> eq(x,a)\n eq(x,x) -> top)").unwrap();
        assert!(critical_pairs(&trs).is_empty());
        let analysis = StaticAnalysis::analyse(&trs);
        assert!(analysis.root_overlaps_only);
        assert!(!analysis.left_linear); // eq(x,x)
        assert!(!analysis.fusable());
    }

    #[test]
    fn self_overlap_below_the_root() {
        // f(f(x)) -> x overlaps itself at position 1: unifying the inner
        // f(x) with a renamed copy f(f(x')) gives the peak f(f(f(x'))), and
        // both contractions land on f(x').
        let trs = parse_trs("(VAR x)\n(RULES f(f(x)) -> x)").unwrap();
        let cps = critical_pairs(&trs);
        assert_eq!(cps.len(), 1);
        let cp = &cps[0];
        assert_eq!(cp.pos, Position::new(vec![1]));
        assert_eq!(cp.peak, t("f(f(f(x')))"));
        assert_eq!(cp.left, t("f(x')"));
        assert_eq!(cp.right, t("f(x')"));
        assert!(!StaticAnalysis::analyse(&trs).root_overlaps_only);
        assert!(!StaticAnalysis::analyse(&trs).fusable());
    }

    #[test]
    fn root_overlaps_are_tolerated() {
        let trs = parse_trs("(VAR)\n(RULES a -> b\n a -> c)").unwrap();
        let cps = critical_pairs(&trs);
        assert_eq!(cps.len(), 2);
        assert!(cps.iter().all(|cp| cp.pos.is_root()));
        let analysis = StaticAnalysis::analyse(&trs);
        assert!(analysis.fusable());
    }

    #[test]
    fn both_branches_of_a_critical_pair_are_reducts_of_the_peak() {
        let trs = parse_trs("(VAR x)\n(RULES f(g(x)) -> x\n g(a) -> b)").unwrap();
        let cps = critical_pairs(&trs);
        assert_eq!(cps.len(), 1);
        let cp = &cps[0];
        assert_eq!(cp.peak, t("f(g(a))"));
        assert_eq!(cp.left, t("f(b)"));
        assert_eq!(cp.right, t("a"));
        // Cross-check against the reduct oracle.
        let reducts: Vec<Term> = crate::oracle::term_reducts(&trs, &cp.peak)
            .into_iter()
            .map(|(_, _, u)| u)
            .collect();
        assert!(reducts.contains(&cp.left));
        assert!(reducts.contains(&cp.right));
    }

    #[test]
    fn failure_classification_on_terms() {
        // f defined over constructors a, s; g also defined.
        let trs =
            parse_trs("(VAR x)\n(RULES f(a,x) -> x\n g(x) -> a)").unwrap();
        let pat = t("f(a,x)");
        assert_eq!(match_outcome(&trs, &pat, &t("f(a,b)")), MatchOutcome::Matches);
        // Clash under a constructor: b can never become a.
        assert_eq!(match_outcome(&trs, &pat, &t("f(b,b)")), MatchOutcome::FailPermanent);
        // Clash under a defined symbol: g(b) may rewrite to a.
        assert_eq!(match_outcome(&trs, &pat, &t("f(g(b),b)")), MatchOutcome::FailTransient);
        // A variable subject never grows a symbol.
        assert_eq!(match_outcome(&trs, &pat, &t("x")), MatchOutcome::FailPermanent);
        assert_eq!(match_outcome(&trs, &t("f(a,x)"), &t("f(x,b)")), MatchOutcome::FailPermanent);
        // Root symbol mismatch at a defined root.
        assert_eq!(match_outcome(&trs, &pat, &t("g(a)")), MatchOutcome::FailTransient);
    }

    #[test]
    fn failure_classification_on_nonlinear_patterns() {
        let trs = parse_trs("(VAR x)\n(RULES eq(x,x) -> top\n f(x) -> a)").unwrap();
        let pat = t("eq(x,x)");
        assert_eq!(match_outcome(&trs, &pat, &t("eq(a,a)")), MatchOutcome::Matches);
        // Two distinct values never converge.
        assert_eq!(match_outcome(&trs, &pat, &t("eq(a,b)")), MatchOutcome::FailPermanent);
        // One side still computing: f(b) could become a.
        assert_eq!(match_outcome(&trs, &pat, &t("eq(a,f(b))")), MatchOutcome::FailTransient);
    }

    #[test]
    fn graph_and_term_classification_agree_on_folded_graphs() {
        let trs = parse_trs("(VAR x)\n(RULES f(a,x) -> x\n g(x) -> a\n eq(x,x) -> top)").unwrap();
        let patterns = [t("f(a,x)"), t("eq(x,x)"), t("g(x)")];
        let subjects = [
            t("f(a,b)"),
            t("f(b,b)"),
            t("f(g(b),b)"),
            t("eq(a,a)"),
            t("eq(a,b)"),
            t("eq(g(a),g(b))"),
            t("g(f(a,a))"),
        ];
        for pat in &patterns {
            for subj in &subjects {
                let g = TermGraph::mk_shared(subj);
                assert_eq!(
                    match_outcome(&trs, pat, subj),
                    match_outcome_at(&trs, pat, &g, g.root()),
                    "pattern {pat} vs subject {subj}"
                );
            }
        }
    }

    #[test]
    fn graph_classification_sees_sharing_as_equality() {
        let trs = parse_trs("(VAR x)\n(RULES eq(x,x) -> top\n f(x) -> x)").unwrap();
        let pat = t("eq(x,x)");
        // On folded graphs: equal arguments are one node and match; distinct
        // value arguments can never converge; a still-computing argument
        // keeps the match transient.
        let shared = TermGraph::mk_shared(&t("eq(g(a),g(a))"));
        assert_eq!(match_outcome_at(&trs, &pat, &shared, shared.root()), MatchOutcome::Matches);
        let distinct = TermGraph::mk_shared(&t("eq(g(a),g(b))"));
        assert_eq!(
            match_outcome_at(&trs, &pat, &distinct, distinct.root()),
            MatchOutcome::FailPermanent
        );
        let computing = TermGraph::mk_shared(&t("eq(g(a),f(g(a)))"));
        assert_eq!(
            match_outcome_at(&trs, &pat, &computing, computing.root()),
            MatchOutcome::FailTransient
        );
    }
}
