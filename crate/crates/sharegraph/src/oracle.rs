//! Reference term-level rewriting: one-step reducts, derivation lengths and
//! runtime complexity, all by exhaustive search on plain terms.
//!
//! This module is deliberately naive. It is the ground truth the graph
//! engine is checked against, so it must stay independent of the graph code:
//! nothing here knows about node identities or sharing.

use std::collections::HashMap;

use crate::parallel::{self, Parallelism};
use crate::term::{match_term, Position, Term, Trs};

/// The hole symbol used in contexts.
pub const HOLE: &str = "\u{25a1}"; // □

/// A context: a term over the signature extended with hole constants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Context(Term);

impl Context {
    /// Wraps a term as a context; holes are occurrences of the constant `□`.
    pub fn new(t: Term) -> Self {
        Context(t)
    }

    /// A context with a single hole at the given position.
    pub fn hole_at(t: &Term, pos: &Position) -> Option<Self> {
        t.replace_at(pos, Term::constant(HOLE)).map(Context)
    }

    /// Hole positions in left-to-right order.
    pub fn holes(&self) -> Vec<Position> {
        self.0
            .positions()
            .into_iter()
            .filter(|p| {
                matches!(self.0.subterm_at(p), Some(Term::App(sym, _)) if sym.name == HOLE && sym.arity == 0)
            })
            .collect()
    }

    /// Plugs `fills` into the holes, left to right. Counts must agree.
    pub fn fill(&self, fills: &[Term]) -> Option<Term> {
        let holes = self.holes();
        if holes.len() != fills.len() {
            return None;
        }
        let mut t = self.0.clone();
        // Tree positions are stable under replacement, so fill order is
        // irrelevant; left-to-right matches the documented semantics.
        for (p, fill) in holes.iter().zip(fills) {
            t = t.replace_at(p, fill.clone())?;
        }
        Some(t)
    }

    pub fn as_term(&self) -> &Term {
        &self.0
    }
}

/// All one-step reducts of `t`: every position, every rule, with the results.
/// Sorted by (position, rule index); at most one entry per pair since
/// matching is deterministic.
pub fn term_reducts(trs: &Trs, t: &Term) -> Vec<(Position, usize, Term)> {
    let mut out = Vec::new();
    collect_reducts(trs, t, &mut Vec::new(), t, &mut out);
    out.sort_by(|a, b| a.0.length_lex_cmp(&b.0).then(a.1.cmp(&b.1)));
    out
}

fn collect_reducts(
    trs: &Trs,
    root: &Term,
    prefix: &mut Vec<usize>,
    sub: &Term,
    out: &mut Vec<(Position, usize, Term)>,
) {
    for (i, rule) in trs.rules().iter().enumerate() {
        if let Some(sigma) = match_term(&rule.lhs, sub) {
            let pos = Position::new(prefix.clone());
            let replaced = root
                .replace_at(&pos, rule.rhs.apply(&sigma))
                .expect("position enumerated from the term itself");
            out.push((pos, i, replaced));
        }
    }
    if let Term::App(_, args) = sub {
        for (i, a) in args.iter().enumerate() {
            prefix.push(i + 1);
            collect_reducts(trs, root, prefix, a, out);
            prefix.pop();
        }
    }
}

/// Result of a fuel-bounded derivation-length search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlOutcome {
    /// The longest derivation from the term has exactly this many steps.
    Exact(usize),
    /// Some derivation exceeded the fuel bound.
    FuelExceeded,
}

impl DlOutcome {
    pub fn exact(&self) -> Option<usize> {
        match self {
            DlOutcome::Exact(n) => Some(*n),
            DlOutcome::FuelExceeded => None,
        }
    }
}

/// Maximal derivation length from `t`, by exhaustive memoised search over all
/// interleavings. `fuel` bounds the derivation length considered; any longer
/// derivation yields [`DlOutcome::FuelExceeded`].
pub fn derivation_length(trs: &Trs, t: &Term, fuel: usize) -> DlOutcome {
    let mut memo = HashMap::new();
    match dl(trs, t, fuel, &mut memo) {
        Some(n) => DlOutcome::Exact(n),
        None => DlOutcome::FuelExceeded,
    }
}

fn dl(trs: &Trs, t: &Term, budget: usize, memo: &mut HashMap<Term, usize>) -> Option<usize> {
    if let Some(&n) = memo.get(t) {
        // A cached exact value still has to fit in the remaining budget.
        return (n <= budget).then_some(n);
    }
    let reducts = term_reducts(trs, t);
    if reducts.is_empty() {
        memo.insert(t.clone(), 0);
        return Some(0);
    }
    if budget == 0 {
        return None;
    }
    let mut best = 0;
    for (_, _, u) in reducts {
        best = best.max(1 + dl(trs, &u, budget - 1, memo)?);
    }
    memo.insert(t.clone(), best);
    Some(best)
}

/// One row of a runtime-complexity table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RcEntry {
    /// Basic terms of size up to this bound were considered.
    pub size: usize,
    pub value: DlOutcome,
    /// A basic term attaining the maximum, when one exists.
    pub witness: Option<Term>,
    /// How many basic terms were enumerated for this row.
    pub terms: usize,
}

/// Runtime complexity table with enumeration diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RcTable {
    pub entries: Vec<RcEntry>,
    /// Set when the enumeration cap was hit; values are then lower bounds.
    pub truncated: bool,
}

/// Hard cap on the number of basic terms enumerated per size bound.
pub const RC_ENUM_CAP: usize = 200_000;

/// Runtime complexity: for each `m <= n`, the maximal derivation length over
/// all ground basic terms of size at most `m`.
///
/// Enumeration is over ground basic terms; instantiating a variable cannot
/// shorten a derivation, so ground witnesses dominate at equal size.
pub fn runtime_complexity(trs: &Trs, n: usize, fuel: usize, mode: Parallelism) -> RcTable {
    let mut truncated = false;
    let mut entries = Vec::new();
    for m in 0..=n {
        let (terms, hit_cap) = basic_terms_up_to(trs, m, RC_ENUM_CAP);
        truncated |= hit_cap;
        let count = terms.len();
        let outcomes = parallel::map_vec(mode, terms, |t| (derivation_length(trs, &t, fuel), t));
        let mut value = DlOutcome::Exact(0);
        let mut witness = None;
        for (outcome, t) in outcomes {
            match (outcome, &value) {
                (DlOutcome::FuelExceeded, _) => {
                    value = DlOutcome::FuelExceeded;
                    witness = Some(t);
                    break;
                }
                (DlOutcome::Exact(k), DlOutcome::Exact(best)) => {
                    if k > *best || witness.is_none() {
                        value = DlOutcome::Exact(k);
                        witness = Some(t);
                    }
                }
                _ => {}
            }
        }
        if count == 0 {
            witness = None;
        }
        entries.push(RcEntry { size: m, value, witness, terms: count });
    }
    RcTable { entries, truncated }
}

/// All ground basic terms of size `<= bound` (defined root, ground
/// constructor arguments), capped at `cap` terms.
pub fn basic_terms_up_to(trs: &Trs, bound: usize, cap: usize) -> (Vec<Term>, bool) {
    let sig = trs.signature();
    // Ground constructor terms, grouped by exact size.
    let mut values: Vec<Vec<Term>> = vec![Vec::new(); bound + 1];
    for size in 1..=bound {
        let mut layer = Vec::new();
        for (name, arity) in sig.constructors() {
            if arity == 0 && size == 1 {
                layer.push(Term::constant(name));
            } else if arity > 0 && size >= 1 + arity {
                for split in compositions(size - 1, arity) {
                    for args in argument_combos(&split, &values) {
                        layer.push(Term::app(name, args));
                    }
                }
            }
        }
        values[size] = layer;
    }

    let mut out = Vec::new();
    let mut hit_cap = false;
    'outer: for (name, arity) in sig.symbols() {
        if !sig.is_defined(name) {
            continue;
        }
        for size in (1 + arity)..=bound {
            if arity == 0 {
                if size == 1 {
                    out.push(Term::constant(name));
                }
                continue;
            }
            for split in compositions(size - 1, arity) {
                for args in argument_combos(&split, &values) {
                    if out.len() >= cap {
                        hit_cap = true;
                        break 'outer;
                    }
                    out.push(Term::app(name, args));
                }
            }
        }
    }
    (out, hit_cap)
}

/// Cartesian product of value layers selected by `split` sizes.
fn argument_combos(split: &[usize], values: &[Vec<Term>]) -> Vec<Vec<Term>> {
    let mut combos: Vec<Vec<Term>> = vec![Vec::new()];
    for &part in split {
        let mut next = Vec::new();
        for combo in &combos {
            for v in &values[part] {
                let mut c = combo.clone();
                c.push(v.clone());
                next.push(c);
            }
        }
        combos = next;
    }
    combos
}

/// All ways to write `total` as an ordered sum of `parts` positive integers.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn go(total: usize, parts: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            if total >= 1 {
                acc.push(total);
                out.push(acc.clone());
                acc.pop();
            }
            return;
        }
        for first in 1..=total.saturating_sub(parts - 1) {
            acc.push(first);
            go(total - first, parts - 1, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    if parts == 0 {
        if total == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    go(total, parts, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_trs;

    fn rf() -> Trs {
        parse_trs("(VAR x)\n(RULES f(x) -> eq(x,a)\n eq(x,x) -> top)").unwrap()
    }

    fn rg() -> Trs {
        parse_trs("(VAR x)\n(RULES dup(x) -> c(x,x)\n a -> b)").unwrap()
    }

    fn t(s: &str) -> Term {
        crate::parser::parse_term(s, &std::collections::BTreeSet::from(["x".to_string()])).unwrap()
    }

    #[test]
    fn context_fill() {
        let base = t("c(a,b)");
        let ctx = Context::hole_at(&base, &Position::new(vec![2])).unwrap();
        assert_eq!(ctx.holes(), vec![Position::new(vec![2])]);
        let filled = ctx.fill(&[t("d")]).unwrap();
        assert_eq!(filled, t("c(a,d)"));
        assert!(ctx.fill(&[]).is_none());
    }

    #[test]
    fn multi_hole_fill_is_left_to_right() {
        let two = Context::new(Term::app(
            "c",
            vec![Term::constant(HOLE), Term::constant(HOLE)],
        ));
        assert_eq!(two.holes().len(), 2);
        let filled = two.fill(&[t("a"), t("b")]).unwrap();
        assert_eq!(filled, t("c(a,b)"));
    }

    #[test]
    fn reducts_of_fa() {
        // f(a) has exactly one reduct: eq(a,a) at the root by rule 0.
        let trs = rf();
        let rs = term_reducts(&trs, &t("f(a)"));
        assert_eq!(rs, vec![(Position::root(), 0, t("eq(a,a)"))]);
        // eq(a,b) is a normal form: the non-linear lhs does not match.
        assert!(term_reducts(&trs, &t("eq(a,b)")).is_empty());
        // eq(a,a) steps to top.
        let rs = term_reducts(&trs, &t("eq(a,a)"));
        assert_eq!(rs, vec![(Position::root(), 1, t("top"))]);
    }

    #[test]
    fn reducts_cover_all_positions() {
        // c(a,a) under R_g: the constant rule applies at both occurrences.
        let trs = rg();
        let rs = term_reducts(&trs, &t("c(a,a)"));
        assert_eq!(
            rs,
            vec![
                (Position::new(vec![1]), 1, t("c(b,a)")),
                (Position::new(vec![2]), 1, t("c(a,b)")),
            ]
        );
    }

    /// Independent route: enumerate positions, match, splice. Must agree with
    /// the recursive context construction in `term_reducts`.
    fn reducts_by_positions(trs: &Trs, s: &Term) -> Vec<(Position, usize, Term)> {
        let mut out = Vec::new();
        for p in s.positions() {
            let sub = s.subterm_at(&p).unwrap();
            for (i, rule) in trs.rules().iter().enumerate() {
                if let Some(sigma) = match_term(&rule.lhs, sub) {
                    out.push((p.clone(), i, s.replace_at(&p, rule.rhs.apply(&sigma)).unwrap()));
                }
            }
        }
        out.sort_by(|a, b| a.0.length_lex_cmp(&b.0).then(a.1.cmp(&b.1)));
        out
    }

    #[test]
    fn reducts_agree_with_independent_matcher() {
        for trs in [rf(), rg()] {
            for s in ["f(a)", "f(f(a))", "eq(f(a),f(a))", "dup(dup(a))", "c(dup(a),a)"] {
                let s = t(s);
                assert_eq!(term_reducts(&trs, &s), reducts_by_positions(&trs, &s), "term {s}");
            }
        }
    }

    #[test]
    fn dl_dup_a_is_three() {
        // dup(a) -> c(a,a) -> c(b,a)/c(a,b) -> c(b,b): the longest
        // interleaving fires the constant rule twice after duplication.
        let trs = rg();
        assert_eq!(derivation_length(&trs, &t("dup(a)"), 64), DlOutcome::Exact(3));
    }

    #[test]
    fn dl_fuel_exhaustion() {
        let trs = rg();
        assert_eq!(derivation_length(&trs, &t("dup(a)"), 2), DlOutcome::FuelExceeded);
        // Loops never finish but do exhaust fuel.
        let looping = parse_trs("(VAR)\n(RULES a -> a)").unwrap();
        assert_eq!(derivation_length(&looping, &t("a"), 100), DlOutcome::FuelExceeded);
    }

    #[test]
    fn dl_normal_form_is_zero() {
        assert_eq!(derivation_length(&rf(), &t("top"), 8), DlOutcome::Exact(0));
    }

    #[test]
    fn rc_tables() {
        // Basic terms of size <= 2 for R_f: f(a), f(top); dl(f(a)) = 2 via
        // f(a) -> eq(a,a) -> top.
        let table = runtime_complexity(&rf(), 3, 64, Parallelism::Sequential);
        assert_eq!(table.entries[1].value, DlOutcome::Exact(0));
        assert_eq!(table.entries[2].value, DlOutcome::Exact(2));
        assert_eq!(table.entries[2].witness, Some(t("f(a)")));
        // Size 3 adds the eq-terms, none of which beats f(a).
        assert_eq!(table.entries[3].value, DlOutcome::Exact(2));
        assert!(!table.truncated);
        // R_g: `a` is a defined symbol (rule a -> b), so the basic terms up
        // to size 2 are `a` (dl 1) and dup(b) (dl 1). dup(a) is not basic.
        let table = runtime_complexity(&rg(), 2, 64, Parallelism::Sequential);
        assert_eq!(table.entries[0].value, DlOutcome::Exact(0));
        assert_eq!(table.entries[1].value, DlOutcome::Exact(1));
        assert_eq!(table.entries[2].value, DlOutcome::Exact(1));
    }

    #[test]
    fn basic_term_enumeration_is_exhaustive_at_small_sizes() {
        // R_g defines dup and a; its constructors are c/2 and b. Values of
        // size <= 2 are just b, so the basic terms up to size 3 are exactly
        // `a` and dup(b).
        let trs = rg();
        let (terms, capped) = basic_terms_up_to(&trs, 3, 1000);
        assert!(!capped);
        let mut strings: Vec<String> = terms.iter().map(|t| t.to_string()).collect();
        strings.sort();
        assert_eq!(strings, vec!["a".to_string(), "dup(b)".to_string()]);
        // R_f: constructors a, top; one more size step adds the eq-terms.
        let (terms, capped) = basic_terms_up_to(&rf(), 3, 1000);
        assert!(!capped);
        let mut strings: Vec<String> = terms.iter().map(|t| t.to_string()).collect();
        strings.sort();
        assert_eq!(
            strings,
            vec!["eq(a,a)", "eq(a,top)", "eq(top,a)", "eq(top,top)", "f(a)", "f(top)"]
        );
    }
}
