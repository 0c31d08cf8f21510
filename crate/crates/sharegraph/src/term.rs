//! First-order terms, rewrite rules and signatures.
//!
//! Everything downstream (graphs, the rewrite engine, the reference
//! normaliser) is phrased over these types. Terms are plain owned trees;
//! sharing is introduced only at the graph level.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A function symbol together with its arity.
///
/// Two symbols are equal only if both name and arity agree; `f/1` and `f/2`
/// are distinct and a signature never contains both.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FunSym {
    pub name: String,
    pub arity: usize,
}

impl FunSym {
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        FunSym { name: name.into(), arity }
    }
}

impl fmt::Display for FunSym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// A first-order term: a variable or a function symbol applied to arguments.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    App(FunSym, Vec<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    /// Builds `name(args...)`; the arity is taken from the argument count.
    pub fn app(name: impl Into<String>, args: Vec<Term>) -> Self {
        let name = name.into();
        let arity = args.len();
        Term::App(FunSym::new(name, arity), args)
    }

    /// Constant shorthand: `app(name, vec![])`.
    pub fn constant(name: impl Into<String>) -> Self {
        Term::app(name, Vec::new())
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    /// Number of symbol occurrences (variables count as well).
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) => 1,
            Term::App(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
        }
    }

    /// Nesting depth: a variable or constant has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Term::Var(_) => 0,
            Term::App(_, args) => args.iter().map(Term::depth).max().map_or(0, |d| d + 1),
        }
    }

    /// The set of variable names occurring in the term.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(x) => {
                out.insert(x.clone());
            }
            Term::App(_, args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
        }
    }

    /// The subterm at `pos`, or `None` if the position does not exist.
    pub fn subterm_at(&self, pos: &Position) -> Option<&Term> {
        let mut cur = self;
        for &i in pos.indices() {
            match cur {
                Term::App(_, args) => cur = args.get(i.checked_sub(1)?)?,
                Term::Var(_) => return None,
            }
        }
        Some(cur)
    }

    /// Replaces the subterm at `pos`, or `None` if the position does not exist.
    pub fn replace_at(&self, pos: &Position, replacement: Term) -> Option<Term> {
        if pos.is_root() {
            return Some(replacement);
        }
        let (head, tail) = pos.split_first()?;
        match self {
            Term::Var(_) => None,
            Term::App(sym, args) => {
                let idx = head.checked_sub(1)?;
                if idx >= args.len() {
                    return None;
                }
                let mut args = args.clone();
                args[idx] = args[idx].replace_at(&tail, replacement)?;
                Some(Term::App(sym.clone(), args))
            }
        }
    }

    /// All positions of the term in preorder (root first, arguments
    /// left-to-right).
    pub fn positions(&self) -> Vec<Position> {
        let mut out = Vec::new();
        let mut prefix = Vec::new();
        self.collect_positions(&mut prefix, &mut out);
        out
    }

    fn collect_positions(&self, prefix: &mut Vec<usize>, out: &mut Vec<Position>) {
        out.push(Position::new(prefix.clone()));
        if let Term::App(_, args) = self {
            for (i, a) in args.iter().enumerate() {
                prefix.push(i + 1);
                a.collect_positions(prefix, out);
                prefix.pop();
            }
        }
    }

    /// Applies a substitution, leaving unbound variables in place.
    pub fn apply(&self, subst: &Substitution) -> Term {
        match self {
            Term::Var(x) => subst.get(x).cloned().unwrap_or_else(|| self.clone()),
            Term::App(sym, args) => {
                Term::App(sym.clone(), args.iter().map(|a| a.apply(subst)).collect())
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(x) => write!(f, "{x}"),
            Term::App(sym, args) => {
                write!(f, "{}", sym.name)?;
                if !args.is_empty() {
                    write!(f, "(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ",")?;
                        }
                        write!(f, "{a}")?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

/// A position: a sequence of 1-based argument indices. The empty position is
/// the root.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Position(Vec<usize>);

impl Position {
    pub fn new(indices: Vec<usize>) -> Self {
        Position(indices)
    }

    pub fn root() -> Self {
        Position(Vec::new())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn child(&self, i: usize) -> Position {
        let mut v = self.0.clone();
        v.push(i);
        Position(v)
    }

    fn split_first(&self) -> Option<(usize, Position)> {
        let (&head, tail) = self.0.split_first()?;
        Some((head, Position(tail.to_vec())))
    }

    /// `true` if `self` is a proper or improper prefix of `other`.
    pub fn is_prefix_of(&self, other: &Position) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    /// Shorter positions first, lexicographic among equals. This is the order
    /// used to pick canonical node positions.
    pub fn length_lex_cmp(&self, other: &Position) -> std::cmp::Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            write!(f, "ε")
        } else {
            let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
            write!(f, "{}", parts.join("."))
        }
    }
}

/// A finite mapping from variable names to terms.
pub type Substitution = BTreeMap<String, Term>;

/// Syntactic first-order matching: find `σ` with `pattern σ = subject`.
///
/// Handles non-left-linear patterns: a variable bound twice must be bound to
/// equal terms.
pub fn match_term(pattern: &Term, subject: &Term) -> Option<Substitution> {
    let mut subst = Substitution::new();
    match_into(pattern, subject, &mut subst).then_some(subst)
}

fn match_into(pattern: &Term, subject: &Term, subst: &mut Substitution) -> bool {
    match pattern {
        Term::Var(x) => match subst.get(x) {
            Some(bound) => bound == subject,
            None => {
                subst.insert(x.clone(), subject.clone());
                true
            }
        },
        Term::App(sym, args) => match subject {
            Term::App(ssym, sargs) if sym == ssym => {
                args.iter().zip(sargs).all(|(p, s)| match_into(p, s, subst))
            }
            _ => false,
        },
    }
}

/// A rewrite rule `lhs -> rhs`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub lhs: Term,
    pub rhs: Term,
}

impl Rule {
    pub fn new(lhs: Term, rhs: Term) -> Self {
        Rule { lhs, rhs }
    }

    /// `true` if no variable occurs twice in the left-hand side.
    pub fn is_left_linear(&self) -> bool {
        fn walk(t: &Term, seen: &mut BTreeSet<String>) -> bool {
            match t {
                Term::Var(x) => seen.insert(x.clone()),
                Term::App(_, args) => args.iter().all(|a| walk(a, seen)),
            }
        }
        walk(&self.lhs, &mut BTreeSet::new())
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.lhs, self.rhs)
    }
}

/// The signature inferred from a rule set: all symbols with their arities,
/// split into defined symbols (roots of left-hand sides) and constructors.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Signature {
    arities: BTreeMap<String, usize>,
    defined: BTreeSet<String>,
}

impl Signature {
    pub fn arity(&self, name: &str) -> Option<usize> {
        self.arities.get(name).copied()
    }

    pub fn is_defined(&self, name: &str) -> bool {
        self.defined.contains(name)
    }

    pub fn is_constructor(&self, name: &str) -> bool {
        self.arities.contains_key(name) && !self.defined.contains(name)
    }

    pub fn symbols(&self) -> impl Iterator<Item = (&str, usize)> {
        self.arities.iter().map(|(n, &a)| (n.as_str(), a))
    }

    pub fn defined_symbols(&self) -> impl Iterator<Item = &str> {
        self.defined.iter().map(String::as_str)
    }

    pub fn constructors(&self) -> impl Iterator<Item = (&str, usize)> {
        self.symbols().filter(|(n, _)| !self.defined.contains(*n))
    }

    fn note_symbol(&mut self, sym: &FunSym) -> Result<(), TrsError> {
        match self.arities.get(&sym.name) {
            Some(&a) if a != sym.arity => Err(TrsError::ArityClash {
                symbol: sym.name.clone(),
                first: a,
                second: sym.arity,
            }),
            Some(_) => Ok(()),
            None => {
                self.arities.insert(sym.name.clone(), sym.arity);
                Ok(())
            }
        }
    }

    fn note_term(&mut self, t: &Term) -> Result<(), TrsError> {
        match t {
            Term::Var(_) => Ok(()),
            Term::App(sym, args) => {
                self.note_symbol(sym)?;
                for a in args {
                    self.note_term(a)?;
                }
                Ok(())
            }
        }
    }
}

/// Errors raised while assembling or validating a rule set.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TrsError {
    #[error("symbol `{symbol}` used with arities {first} and {second}")]
    ArityClash { symbol: String, first: usize, second: usize },
    #[error("rule {index}: left-hand side is a bare variable")]
    VariableLhs { index: usize },
    #[error("rule {index}: right-hand side variable `{var}` does not occur on the left")]
    FreeRhsVar { index: usize, var: String },
}

/// A term rewrite system: an ordered list of rules plus the signature they
/// induce. Rule order is the deterministic tie-break everywhere downstream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trs {
    rules: Vec<Rule>,
    signature: Signature,
    /// Variable names declared for this system (used when parsing terms that
    /// accompany it, e.g. on a command line).
    variables: BTreeSet<String>,
}

impl Trs {
    /// Builds a system from rules, inferring the signature and checking the
    /// usual well-formedness conditions: no variable left-hand sides, no free
    /// right-hand-side variables, consistent arities.
    pub fn new(rules: Vec<Rule>) -> Result<Self, TrsError> {
        Self::with_variables(rules, BTreeSet::new())
    }

    pub fn with_variables(rules: Vec<Rule>, variables: BTreeSet<String>) -> Result<Self, TrsError> {
        let mut signature = Signature::default();
        for (index, rule) in rules.iter().enumerate() {
            if rule.lhs.is_var() {
                return Err(TrsError::VariableLhs { index });
            }
            signature.note_term(&rule.lhs)?;
            signature.note_term(&rule.rhs)?;
            let lhs_vars = rule.lhs.vars();
            if let Some(var) = rule.rhs.vars().difference(&lhs_vars).next() {
                return Err(TrsError::FreeRhsVar { index, var: var.clone() });
            }
        }
        // Roots of left-hand sides are the defined symbols.
        for rule in &rules {
            if let Term::App(sym, _) = &rule.lhs {
                signature.defined.insert(sym.name.clone());
            }
        }
        let mut variables = variables;
        for rule in &rules {
            variables.extend(rule.lhs.vars());
            variables.extend(rule.rhs.vars());
        }
        Ok(Trs { rules, signature, variables })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn variables(&self) -> &BTreeSet<String> {
        &self.variables
    }

    pub fn is_left_linear(&self) -> bool {
        self.rules.iter().all(Rule::is_left_linear)
    }

    /// `true` if the term is built from constructors and variables only.
    pub fn is_value(&self, t: &Term) -> bool {
        match t {
            Term::Var(_) => true,
            Term::App(sym, args) => {
                !self.signature.is_defined(&sym.name) && args.iter().all(|a| self.is_value(a))
            }
        }
    }

    /// `true` if the root is defined and all arguments are values.
    pub fn is_basic(&self, t: &Term) -> bool {
        match t {
            Term::Var(_) => false,
            Term::App(sym, args) => {
                self.signature.is_defined(&sym.name) && args.iter().all(|a| self.is_value(a))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Term {
        Term::var("x")
    }

    fn rf() -> Trs {
        // f(x) -> eq(x, a); eq(x, x) -> top
        Trs::new(vec![
            Rule::new(Term::app("f", vec![x()]), Term::app("eq", vec![x(), Term::constant("a")])),
            Rule::new(Term::app("eq", vec![x(), x()]), Term::constant("top")),
        ])
        .unwrap()
    }

    #[test]
    fn size_depth_vars() {
        let t = Term::app("f", vec![Term::app("g", vec![x(), Term::constant("a")])]);
        assert_eq!(t.size(), 4);
        assert_eq!(t.depth(), 2);
        assert_eq!(t.vars(), BTreeSet::from(["x".to_string()]));
    }

    #[test]
    fn positions_and_subterms() {
        let t = Term::app("f", vec![Term::app("g", vec![x()]), Term::constant("a")]);
        let ps = t.positions();
        assert_eq!(ps.len(), t.size());
        assert_eq!(ps[0], Position::root());
        let p = Position::new(vec![1, 1]);
        assert_eq!(t.subterm_at(&p), Some(&x()));
        assert_eq!(t.subterm_at(&Position::new(vec![3])), None);
        let r = t.replace_at(&p, Term::constant("b")).unwrap();
        assert_eq!(r.subterm_at(&p), Some(&Term::constant("b")));
    }

    #[test]
    fn matching_is_syntactic_and_handles_nonlinearity() {
        let pat = Term::app("eq", vec![x(), x()]);
        let yes = Term::app("eq", vec![Term::constant("a"), Term::constant("a")]);
        let no = Term::app("eq", vec![Term::constant("a"), Term::constant("b")]);
        let sigma = match_term(&pat, &yes).unwrap();
        assert_eq!(sigma.get("x"), Some(&Term::constant("a")));
        assert!(match_term(&pat, &no).is_none());
    }

    #[test]
    fn match_then_apply_roundtrip() {
        let pat = Term::app("f", vec![x(), Term::var("y")]);
        let subj = Term::app("f", vec![Term::app("g", vec![Term::constant("a")]), Term::constant("b")]);
        let sigma = match_term(&pat, &subj).unwrap();
        assert_eq!(pat.apply(&sigma), subj);
    }

    #[test]
    fn signature_classification() {
        let trs = rf();
        assert!(trs.signature().is_defined("f"));
        assert!(trs.signature().is_defined("eq"));
        assert!(trs.signature().is_constructor("a"));
        assert!(trs.signature().is_constructor("top"));
        assert!(trs.is_basic(&Term::app("f", vec![Term::constant("a")])));
        assert!(!trs.is_basic(&Term::app("f", vec![Term::app("f", vec![x()])])));
        assert!(trs.is_value(&Term::constant("a")));
        assert!(!trs.is_value(&Term::app("f", vec![x()])));
    }

    #[test]
    fn rule_validation() {
        assert_eq!(
            Trs::new(vec![Rule::new(x(), Term::constant("a"))]),
            Err(TrsError::VariableLhs { index: 0 })
        );
        assert_eq!(
            Trs::new(vec![Rule::new(
                Term::app("f", vec![x()]),
                Term::var("y"),
            )]),
            Err(TrsError::FreeRhsVar { index: 0, var: "y".to_string() })
        );
        let clash = Trs::new(vec![Rule::new(
            Term::app("f", vec![Term::constant("a")]),
            Term::app("a", vec![x()]),
        )]);
        assert!(matches!(clash, Err(TrsError::ArityClash { .. })));
    }

    #[test]
    fn left_linearity() {
        let trs = rf();
        assert!(trs.rules()[0].is_left_linear());
        assert!(!trs.rules()[1].is_left_linear());
        assert!(!trs.is_left_linear());
    }

    #[test]
    fn display_forms() {
        let t = Term::app("f", vec![x(), Term::app("g", vec![Term::constant("a")])]);
        assert_eq!(t.to_string(), "f(x,g(a))");
        assert_eq!(Position::root().to_string(), "ε");
        assert_eq!(Position::new(vec![1, 2]).to_string(), "1.2");
    }
}
