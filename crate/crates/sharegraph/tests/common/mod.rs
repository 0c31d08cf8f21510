//! Seeded random generators shared by the integration suites: terms,
//! rewrite systems, ground substitutions, and scrambled graphs.
//!
//! Systems come out deliberately spicy — repeated left-hand-side variables,
//! duplicating and erasing right-hand sides, overlapping rules — because the
//! engine's whole point is to survive those.

use std::collections::BTreeSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use sharegraph::sharing::{collapse, collapse_candidates, copy, copy_candidates};
use sharegraph::{FunSym, Rule, Substitution, Term, TermGraph, Trs};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A small mixed-arity signature: `k` symbols named a, b, c, … with arities
/// drawn from 0..=2 (always at least one constant).
pub fn gen_signature(rng: &mut ChaCha8Rng, k: usize) -> Vec<FunSym> {
    let mut sig: Vec<FunSym> = (0..k)
        .map(|i| {
            let name = ((b'a' + (i % 26) as u8) as char).to_string();
            let arity = rng.gen_range(0..=2);
            FunSym::new(&name, arity)
        })
        .collect();
    if !sig.iter().any(|f| f.arity == 0) {
        sig[0] = FunSym::new("a", 0);
    }
    sig
}

/// A random term over the signature and variable pool, at most `budget`
/// symbols (variables count one).
pub fn gen_term(
    rng: &mut ChaCha8Rng,
    sig: &[FunSym],
    vars: &[&str],
    budget: usize,
) -> Term {
    if budget <= 1 {
        // Leaves: a constant or a variable.
        let constants: Vec<&FunSym> = sig.iter().filter(|f| f.arity == 0).collect();
        if constants.is_empty() || (!vars.is_empty() && rng.gen_bool(0.4)) {
            assert!(!vars.is_empty(), "a leaf needs a constant or a variable pool");
            return Term::var(vars[rng.gen_range(0..vars.len())]);
        }
        return Term::App(constants[rng.gen_range(0..constants.len())].clone(), Vec::new());
    }
    let f = &sig[rng.gen_range(0..sig.len())];
    if f.arity == 0 {
        return Term::App(f.clone(), Vec::new());
    }
    let mut remaining = budget - 1;
    let args: Vec<Term> = (0..f.arity)
        .map(|i| {
            let slots_left = f.arity - i - 1;
            let max_here = remaining.saturating_sub(slots_left).max(1);
            let here = rng.gen_range(1..=max_here);
            remaining -= here.min(remaining);
            gen_term(rng, sig, vars, here)
        })
        .collect();
    Term::App(f.clone(), args)
}

/// A ground term: same, but with no variable pool.
pub fn gen_ground_term(rng: &mut ChaCha8Rng, sig: &[FunSym], budget: usize) -> Term {
    gen_term(rng, sig, &[], budget)
}

/// A random system of at most `max_rules` rules. Left-hand sides are
/// shallow patterns rooted in a defined symbol, sometimes non-left-linear;
/// right-hand sides (≤ `rhs_budget` symbols) may duplicate, erase, or
/// collapse to a variable.
pub fn gen_trs(rng: &mut ChaCha8Rng, max_rules: usize, rhs_budget: usize) -> Trs {
    let vars = ["x", "y"];
    loop {
        let k = rng.gen_range(3..=5);
        let sig = gen_signature(rng, k);
        // The lhs root must take arguments so rules are patterns.
        let heads: Vec<&FunSym> = sig.iter().filter(|f| f.arity > 0).collect();
        if heads.is_empty() {
            continue;
        }
        let n = rng.gen_range(1..=max_rules);
        let mut rules = Vec::with_capacity(n);
        for _ in 0..n {
            let head = heads[rng.gen_range(0..heads.len())].clone();
            let args: Vec<Term> = (0..head.arity)
                .map(|_| match rng.gen_range(0..10) {
                    // Repeated variable names make non-left-linear rules.
                    0..=4 => Term::var(vars[rng.gen_range(0..vars.len())]),
                    5..=7 => gen_term(rng, &sig, &vars, 2),
                    _ => gen_ground_term(rng, &sig, 2),
                })
                .collect();
            let lhs = Term::App(head, args);
            let lhs_vars: Vec<String> = lhs.vars().into_iter().collect();
            let lhs_vars: Vec<&str> = lhs_vars.iter().map(String::as_str).collect();
            let rhs_size = rng.gen_range(1..=rhs_budget);
            let rhs = gen_term(rng, &sig, &lhs_vars, rhs_size);
            rules.push(Rule { lhs, rhs });
        }
        if rules.is_empty() {
            continue;
        }
        if let Ok(trs) = Trs::new(rules) {
            // Downstream ground-term generation needs a constant in the
            // inferred signature (only symbols the rules mention count).
            if trs.signature().symbols().any(|(_, arity)| arity == 0) {
                return trs;
            }
        }
    }
}

/// A ground substitution for every variable in `vars`, each image at most
/// `budget` symbols over the system's signature.
pub fn gen_ground_subst(
    rng: &mut ChaCha8Rng,
    trs: &Trs,
    vars: &BTreeSet<String>,
    budget: usize,
) -> Substitution {
    let sig: Vec<FunSym> =
        trs.signature().symbols().map(|(n, a)| FunSym::new(n, a)).collect();
    vars.iter().map(|v| (v.clone(), gen_ground_term(rng, &sig, budget))).collect()
}

/// A graph with history: a random term's tree pushed through a few random
/// collapse and copy steps, so sharing is neither absent nor canonical.
pub fn gen_scrambled_graph(rng: &mut ChaCha8Rng, sig: &[FunSym], budget: usize) -> TermGraph {
    let t = gen_ground_term(rng, sig, budget);
    let mut g = TermGraph::mk_tree(&t);
    for _ in 0..rng.gen_range(0..6) {
        let collapses = collapse_candidates(&g);
        let copies = copy_candidates(&g);
        let total = collapses.len() + copies.len();
        if total == 0 {
            break;
        }
        let pick = rng.gen_range(0..total);
        g = if pick < collapses.len() {
            let (from, onto) = collapses[pick];
            collapse(&g, from, onto).expect("candidate collapse applies")
        } else {
            let (of, parent, index) = copies[pick - collapses.len()];
            copy(&g, of, parent, index).expect("candidate copy applies").0
        };
    }
    g
}
