//! Rewrite systems as relation computers: run a designated entry symbol on
//! an input value, explore every normal form, and keep those that are
//! values and are not disqualified by a non-accepting pattern.
//!
//! The flagship instance is [`load_rsat`]: a system deciding propositional
//! satisfiability by guessing one literal per clause and checking the
//! selection for complementary pairs. The module also carries the CNF
//! encoding behind it — formulas as cons/nil lists, variables as fixed-width
//! `O`/`Z` strings — plus a brute-force satisfiability oracle used to judge
//! the system's outputs in tests.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::engine::{Engine, SearchLimits};
use crate::graph::TermGraph;
use crate::parallel::Parallelism;
use crate::parser::parse_trs;
use crate::term::{FunSym, Term, Trs};

/// Readback budget for normal forms coming out of the explorer.
const RESULT_READBACK_CAP: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum ComputationError {
    #[error("pattern `{0}` is not a value: it contains a defined symbol")]
    PatternNotValue(Term),
    #[error("`{0}` is not a defined symbol of the system")]
    EntryNotDefined(String),
    #[error("entry symbol `{name}` takes {arity} arguments, not 1")]
    EntryArity { name: String, arity: usize },
    #[error("input `{0}` is not a ground value of the system")]
    InputNotValue(Term),
    #[error("literal {lit} is out of range for {nvars} variables")]
    BadLiteral { lit: i32, nvars: usize },
}

/// The patterns that disqualify a normal form from being a result. Patterns
/// are value terms: constructors and variables only.
#[derive(Debug, Clone)]
pub struct PatternSet {
    patterns: Vec<Term>,
}

impl PatternSet {
    pub fn new(trs: &Trs, patterns: Vec<Term>) -> Result<PatternSet, ComputationError> {
        for p in &patterns {
            if !trs.is_value(p) {
                return Err(ComputationError::PatternNotValue(p.clone()));
            }
        }
        Ok(PatternSet { patterns })
    }

    pub fn empty() -> PatternSet {
        PatternSet { patterns: Vec::new() }
    }

    pub fn patterns(&self) -> &[Term] {
        &self.patterns
    }
}

/// `true` iff no pattern matches `t`. Matching runs on graphs: a pattern
/// matches exactly when its tree admits a morphism into the maximally shared
/// graph of `t` (where node identity coincides with term equality, so
/// repeated pattern variables work out).
pub fn is_accepting(t: &Term, na: &PatternSet) -> bool {
    if na.patterns.is_empty() {
        return true;
    }
    let subject = TermGraph::mk_shared(t);
    na.patterns.iter().all(|p| {
        let pattern = TermGraph::mk_tree(p);
        subject.find_morphism(&pattern, subject.root()).is_none()
    })
}

/// A relation computer: a system, the defined unary symbol to run, and the
/// non-accepting patterns filtering its normal forms.
#[derive(Debug, Clone)]
pub struct ComputationSpec {
    trs: Trs,
    entry: FunSym,
    na: PatternSet,
    engine: Engine,
    /// Exploration budget; callers may tighten or widen it.
    pub search: SearchLimits,
}

impl ComputationSpec {
    pub fn new(trs: Trs, entry: &str, na: PatternSet) -> Result<ComputationSpec, ComputationError> {
        if !trs.signature().is_defined(entry) {
            return Err(ComputationError::EntryNotDefined(entry.to_string()));
        }
        let arity = trs.signature().arity(entry).expect("defined symbols have an arity");
        if arity != 1 {
            return Err(ComputationError::EntryArity { name: entry.to_string(), arity });
        }
        let engine = Engine::new(trs.clone());
        Ok(ComputationSpec {
            trs,
            entry: FunSym::new(entry, 1),
            na,
            engine,
            search: SearchLimits::default(),
        })
    }

    /// Switches the explorer's eager contraction of deterministic redexes,
    /// mainly so results can be cross-checked against the blind search.
    pub fn with_fusion(mut self, on: bool) -> ComputationSpec {
        self.engine = self.engine.clone().with_fusion(on);
        self
    }

    pub fn trs(&self) -> &Trs {
        &self.trs
    }

    pub fn entry(&self) -> &FunSym {
        &self.entry
    }

    pub fn na(&self) -> &PatternSet {
        &self.na
    }
}

/// Everything a run produces, split by verdict. `accepted` is the computed
/// relation's image; the rest is diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct ComputationOutcome {
    /// Accepting value normal forms, sorted and deduplicated.
    pub accepted: Vec<Term>,
    /// Value normal forms a non-accepting pattern matched.
    pub rejected: Vec<Term>,
    /// Normal forms that are not values (stuck terms).
    pub stuck: Vec<Term>,
    /// Normal forms too large to read back; counted, not listed.
    pub oversized: usize,
    /// A search limit was hit: the sets may be incomplete.
    pub exhausted: bool,
    pub states_expanded: usize,
    pub fused_steps: usize,
}

/// Runs the computer on one input value: builds `entry(v)`, explores every
/// normal form, and classifies each.
pub fn compute(
    spec: &ComputationSpec,
    v: &Term,
    mode: Parallelism,
) -> Result<ComputationOutcome, ComputationError> {
    if !v.vars().is_empty() || !spec.trs.is_value(v) {
        return Err(ComputationError::InputNotValue(v.clone()));
    }
    let engine = spec.engine.clone().with_parallelism(mode);
    let start = Term::App(spec.entry.clone(), vec![v.clone()]);
    let exploration = engine.all_normal_forms(&TermGraph::mk_shared(&start), &spec.search);

    let mut accepted = BTreeSet::new();
    let mut rejected = BTreeSet::new();
    let mut stuck = BTreeSet::new();
    let mut oversized = 0usize;
    for nf in &exploration.normal_forms {
        let Ok(t) = nf.read_term_capped(RESULT_READBACK_CAP) else {
            oversized += 1;
            continue;
        };
        if !spec.trs.is_value(&t) {
            stuck.insert(t);
        } else if is_accepting(&t, &spec.na) {
            accepted.insert(t);
        } else {
            rejected.insert(t);
        }
    }
    Ok(ComputationOutcome {
        accepted: accepted.into_iter().collect(),
        rejected: rejected.into_iter().collect(),
        stuck: stuck.into_iter().collect(),
        oversized,
        exhausted: exploration.exhausted,
        states_expanded: exploration.states_expanded,
        fused_steps: exploration.fused_steps,
    })
}

/// The satisfiability system. `issat(formula)` guesses one literal per
/// clause and returns the selection when no complementary pair occurs in
/// it; inconsistent guesses end in `unsat`.
///
/// The penultimate rule keeps the guessed selection duplicated between the
/// consistency check and the returned result, and the last rule hands the
/// guess over before it is a value — both faithful to the source system,
/// and together the reason arbitrary-strategy exploration can emit
/// selections the check never validated (see the module tests).
const RSAT: &str = "\
(VAR a c cs e l ls t x xs y ys)
(RULES
  if(true, t, e) -> t
  if(false, t, e) -> e
  choice(cons(x, xs)) -> x
  choice(cons(x, xs)) -> choice(xs)
  guess(nil) -> nil
  guess(cons(c, cs)) -> cons(choice(c), guess(cs))
  member(x, nil) -> false
  member(x, cons(y, ys)) -> if(eq(x, y), true, member(x, ys))
  neg(O(x)) -> Z(x)
  neg(Z(x)) -> O(x)
  eq(eps, eps) -> true
  eq(O(x), O(y)) -> eq(x, y)
  eq(O(x), Z(y)) -> false
  eq(Z(x), O(y)) -> false
  eq(Z(x), Z(y)) -> eq(x, y)
  verify(nil) -> true
  verify(cons(l, ls)) -> if(member(neg(l), ls), false, verify(ls))
  issat2(c, a) -> if(verify(a), a, unsat)
  issat(c) -> issat2(c, guess(c))
)
";

/// The satisfiability computer: entry `issat`, non-accepting set `{unsat}`.
pub fn load_rsat() -> ComputationSpec {
    let trs = parse_trs(RSAT).expect("the built-in system parses");
    let na = PatternSet::new(&trs, vec![Term::constant("unsat")])
        .expect("unsat is a constructor constant");
    ComputationSpec::new(trs, "issat", na).expect("issat is defined and unary")
}

// ----------------------------------------------------------------------
// CNF encoding
// ----------------------------------------------------------------------

/// A CNF formula in clause-list form. Literals are nonzero integers:
/// `3` is variable 3, `-3` its negation (variables are 1-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cnf {
    pub nvars: usize,
    pub clauses: Vec<Vec<i32>>,
}

impl Cnf {
    pub fn new(nvars: usize, clauses: Vec<Vec<i32>>) -> Result<Cnf, ComputationError> {
        for clause in &clauses {
            for &lit in clause {
                if lit == 0 || lit.unsigned_abs() as usize > nvars {
                    return Err(ComputationError::BadLiteral { lit, nvars });
                }
            }
        }
        Ok(Cnf { nvars, clauses })
    }

    /// Digits per variable name: the smallest `w` with `2^w >= nvars`.
    pub fn width(&self) -> usize {
        width_for(self.nvars)
    }

    /// The formula as a term: a list of clauses, each a list of literals.
    pub fn to_term(&self) -> Term {
        let clauses =
            self.clauses.iter().map(|c| {
                list_term(c.iter().map(|&l| literal_term(l, self.width())).collect())
            });
        list_term(clauses.collect())
    }

    /// Every clause contains a literal the (possibly partial) assignment
    /// makes true.
    pub fn satisfied_by(&self, assignment: &BTreeMap<usize, bool>) -> bool {
        self.clauses.iter().all(|clause| {
            clause.iter().any(|&lit| {
                assignment.get(&(lit.unsigned_abs() as usize)) == Some(&(lit > 0))
            })
        })
    }

    /// Brute force over all assignments; fine for the handful of variables
    /// the tests use.
    pub fn satisfiable(&self) -> bool {
        assert!(self.nvars < usize::BITS as usize, "brute force is for small formulas");
        (0..1usize << self.nvars).any(|bits| {
            let assignment: BTreeMap<usize, bool> =
                (1..=self.nvars).map(|v| (v, bits >> (v - 1) & 1 == 1)).collect();
            self.satisfied_by(&assignment)
        })
    }
}

fn width_for(nvars: usize) -> usize {
    if nvars <= 1 {
        0
    } else {
        (nvars - 1).ilog2() as usize + 1
    }
}

fn list_term(items: Vec<Term>) -> Term {
    items.into_iter().rev().fold(Term::constant("nil"), |acc, item| {
        Term::app("cons", vec![item, acc])
    })
}

/// A variable name: its 0-based index in `width` binary digits, most
/// significant first, `O` for 1 and `Z` for 0, closed off by `eps`.
fn var_name_term(index0: usize, width: usize) -> Term {
    debug_assert!(width == usize::BITS as usize || index0 < 1 << width);
    let mut t = Term::constant("eps");
    for bit in 0..width {
        let digit = if index0 >> bit & 1 == 1 { "O" } else { "Z" };
        t = Term::app(digit, vec![t]);
    }
    t
}

/// A literal as a term: the polarity constructor wrapping the variable
/// name — `O` for a positive literal, `Z` for a negated one.
pub fn literal_term(lit: i32, width: usize) -> Term {
    let polarity = if lit > 0 { "O" } else { "Z" };
    Term::app(polarity, vec![var_name_term(lit.unsigned_abs() as usize - 1, width)])
}

/// Inverts [`literal_term`]: the polarity digit, then exactly `width` name
/// digits, then `eps`. Anything else is `None`.
pub fn decode_literal(t: &Term, width: usize) -> Option<i32> {
    let Term::App(root, args) = t else { return None };
    let positive = match root.name.as_str() {
        "O" => true,
        "Z" => false,
        _ => return None,
    };
    let mut index0 = 0usize;
    let mut cur = args.first()?;
    for bit in (0..width).rev() {
        let Term::App(digit, inner) = cur else { return None };
        match digit.name.as_str() {
            "O" => index0 |= 1 << bit,
            "Z" => {}
            _ => return None,
        }
        cur = inner.first()?;
    }
    (*cur == Term::constant("eps")).then(|| {
        let var = (index0 + 1) as i32;
        if positive { var } else { -var }
    })
}

/// Inverts the clause/selection encoding: a cons/nil list of literals.
pub fn decode_selection(t: &Term, width: usize) -> Option<Vec<i32>> {
    let mut lits = Vec::new();
    let mut cur = t;
    loop {
        match cur {
            Term::App(f, args) if f.name == "cons" && args.len() == 2 => {
                lits.push(decode_literal(&args[0], width)?);
                cur = &args[1];
            }
            Term::App(f, args) if f.name == "nil" && args.is_empty() => return Some(lits),
            _ => return None,
        }
    }
}

/// Judges one selection: the literals must induce a consistent assignment
/// (no variable both ways) that satisfies every clause.
pub fn selection_satisfies(cnf: &Cnf, selection: &[i32]) -> bool {
    let mut assignment: BTreeMap<usize, bool> = BTreeMap::new();
    for &lit in selection {
        let var = lit.unsigned_abs() as usize;
        if var == 0 || var > cnf.nvars {
            return false;
        }
        match assignment.insert(var, lit > 0) {
            Some(prev) if prev != (lit > 0) => return false,
            _ => {}
        }
    }
    cnf.satisfied_by(&assignment)
}
