//! Term rewriting on shared term graphs.
//!
//! This crate implements first-order term rewriting where the objects being
//! rewritten are term DAGs rather than trees. Sharing is managed explicitly
//! by two families of steps — *fold* (collapse equal subgraphs, copy shared
//! nodes) and *unfold* (undo sharing along a path) — and every rewrite step
//! is the composition `unfold along the redex path · fold below it · rewrite`.
//! That composition keeps graphs small (each step grows a graph by at most
//! the depth of the graph plus a system constant) while staying faithful to
//! ordinary term rewriting: a term `s` rewrites to `t` at position `p` iff
//! the graph of `s` steps to a graph of `t` at `p`.
//!
//! The crate is organised bottom-up:
//!
//! * [`term`] — terms, positions, substitutions, rules, rewrite systems;
//! * [`parser`] — a small text format for rewrite systems and terms;
//! * [`oracle`] — a reference tree rewriter used as ground truth in tests
//!   and for derivation-length / runtime-complexity measurements;
//! * [`graph`] — term graphs: construction, readback, matching, surgery;
//! * [`sharing`] — fold and unfold steps and their bounded normal forms;
//! * [`grs`] — graph rewrite rules compiled from term rules, and the
//!   bounded full rewrite step;
//! * [`overlap`] — unification, critical pairs, and the static analysis
//!   enabling the deterministic fast path of the explorer;
//! * [`engine`] — derivations under selectable strategies, bound auditing,
//!   normal-form exploration, and the tree/graph agreement checker;
//! * [`computation`] — relations computed by rewrite systems, with a
//!   propositional-satisfiability system as the worked example;
//! * [`parallel`] — a tiny switch between sequential and data-parallel
//!   driving of the embarrassingly parallel parts.

pub mod computation;
pub mod engine;
pub mod graph;
pub mod grs;
pub mod oracle;
pub mod overlap;
pub mod parallel;
pub mod parser;
pub mod sharing;
pub mod term;

pub use computation::{
    compute, is_accepting, load_rsat, Cnf, ComputationError, ComputationOutcome, ComputationSpec,
    PatternSet,
};
pub use engine::{
    audit_bounds, AdequacyReport, BoundAudit, DerivationTrace, Engine, Exploration, Limits,
    SearchLimits, StepRecord, Strategy,
};
pub use graph::{GraphError, GraphFragment, GraphMetrics, Label, Morphism, Node, NodeId, TermGraph};
pub use grs::{Grs, GrsError, StepOptions};
pub use parallel::Parallelism;
pub use parser::{parse_term, parse_term_for, parse_trs, render_trs, ParseError};
pub use term::{match_term, FunSym, Position, Rule, Signature, Substitution, Term, Trs, TrsError};
