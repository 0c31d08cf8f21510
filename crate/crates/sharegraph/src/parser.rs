//! Parser for the `.trs` input format and for standalone term literals.
//!
//! The format is a pair of s-expression blocks:
//!
//! ```text
//! # comments run to end of line
//! (VAR x y)
//! (RULES
//!   f(x) -> eq(x,a)
//!   eq(x,x) -> top
//! )
//! ```
//!
//! Terms are written in prefix notation, constants without parentheses. The
//! `VAR` block is mandatory (it may be empty); identifiers not declared there
//! are constants. Rule order in the file is preserved and acts as the
//! deterministic tie-break during rewriting.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::term::{FunSym, Rule, Term, Trs, TrsError};

/// A parse or well-formedness error with its source location.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError { line, col, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    Comma,
    Arrow,
    Ident(String),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Arrow => write!(f, "`->`"),
            Tok::Ident(s) => write!(f, "`{s}`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '\'' | '*' | '+' | '.' | '!' | '?')
}

fn lex(input: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut chars = input.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let (tline, tcol) = (line, col);
        let bump = |c: char, line: &mut usize, col: &mut usize| {
            if c == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        };
        match c {
            '#' => {
                while let Some(&c) = chars.peek() {
                    chars.next();
                    bump(c, &mut line, &mut col);
                    if c == '\n' {
                        break;
                    }
                }
            }
            c if c.is_whitespace() => {
                chars.next();
                bump(c, &mut line, &mut col);
            }
            '(' => {
                chars.next();
                bump(c, &mut line, &mut col);
                out.push(Spanned { tok: Tok::LParen, line: tline, col: tcol });
            }
            ')' => {
                chars.next();
                bump(c, &mut line, &mut col);
                out.push(Spanned { tok: Tok::RParen, line: tline, col: tcol });
            }
            ',' => {
                chars.next();
                bump(c, &mut line, &mut col);
                out.push(Spanned { tok: Tok::Comma, line: tline, col: tcol });
            }
            '-' => {
                chars.next();
                bump('-', &mut line, &mut col);
                match chars.peek() {
                    Some('>') => {
                        chars.next();
                        bump('>', &mut line, &mut col);
                        out.push(Spanned { tok: Tok::Arrow, line: tline, col: tcol });
                    }
                    _ => return Err(ParseError::new(tline, tcol, "stray `-` (expected `->`)")),
                }
            }
            c if is_ident_char(c) => {
                let mut name = String::new();
                while let Some(&c) = chars.peek() {
                    if is_ident_char(c) {
                        name.push(c);
                        chars.next();
                        bump(c, &mut line, &mut col);
                    } else {
                        break;
                    }
                }
                out.push(Spanned { tok: Tok::Ident(name), line: tline, col: tcol });
            }
            other => {
                return Err(ParseError::new(tline, tcol, format!("unexpected character `{other}`")))
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [Spanned],
    pos: usize,
    vars: BTreeSet<String>,
    /// (name, arity, line, col) of the first use of each symbol, for
    /// positioned arity-clash reports.
    arities: Vec<(String, usize, usize, usize)>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<&Spanned> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eof_error(&self, expected: &str) -> ParseError {
        let (line, col) = self
            .toks
            .last()
            .map(|t| (t.line, t.col + 1))
            .unwrap_or((1, 1));
        ParseError::new(line, col, format!("unexpected end of input (expected {expected})"))
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        match self.toks.get(self.pos) {
            Some(t) if t.tok == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(ParseError::new(t.line, t.col, format!("expected {want}, found {}", t.tok))),
            None => Err(self.eof_error(&want.to_string())),
        }
    }

    fn expect_ident(&mut self) -> Result<(String, usize, usize), ParseError> {
        match self.next() {
            Some(Spanned { tok: Tok::Ident(s), line, col }) => Ok((s.clone(), *line, *col)),
            Some(t) => Err(ParseError::new(t.line, t.col, format!("expected identifier, found {}", t.tok))),
            None => Err(self.eof_error("identifier")),
        }
    }

    fn note_arity(&mut self, name: &str, arity: usize, line: usize, col: usize) -> Result<(), ParseError> {
        if let Some((_, a, l0, c0)) = self.arities.iter().find(|(n, _, _, _)| n == name) {
            if *a != arity {
                return Err(ParseError::new(
                    line,
                    col,
                    format!("symbol `{name}` used with arity {arity}, but has arity {a} at {l0}:{c0}"),
                ));
            }
        } else {
            self.arities.push((name.to_string(), arity, line, col));
        }
        Ok(())
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let (name, line, col) = self.expect_ident()?;
        let has_args = matches!(self.peek(), Some(Spanned { tok: Tok::LParen, .. }));
        if self.vars.contains(&name) {
            if has_args {
                return Err(ParseError::new(line, col, format!("variable `{name}` applied to arguments")));
            }
            return Ok(Term::Var(name));
        }
        let mut args = Vec::new();
        if has_args {
            self.next(); // consume `(`
            if matches!(self.peek(), Some(Spanned { tok: Tok::RParen, .. })) {
                self.next();
            } else {
                loop {
                    args.push(self.term()?);
                    match self.next() {
                        Some(Spanned { tok: Tok::Comma, .. }) => continue,
                        Some(Spanned { tok: Tok::RParen, .. }) => break,
                        Some(t) => {
                            return Err(ParseError::new(t.line, t.col, format!("expected `,` or `)`, found {}", t.tok)))
                        }
                        None => return Err(self.eof_error("`,` or `)`")),
                    }
                }
            }
        }
        self.note_arity(&name, args.len(), line, col)?;
        Ok(Term::App(FunSym::new(name, args.len()), args))
    }
}

/// Parses a complete `.trs` file.
pub fn parse_trs(input: &str) -> Result<Trs, ParseError> {
    let toks = lex(input)?;
    let mut p = Parser { toks: &toks, pos: 0, vars: BTreeSet::new(), arities: Vec::new() };

    let mut saw_var_block = false;
    let mut rules: Vec<Rule> = Vec::new();
    let mut rule_spans: Vec<(usize, usize)> = Vec::new();

    while p.peek().is_some() {
        p.expect(Tok::LParen)?;
        let (kw, kline, kcol) = p.expect_ident()?;
        match kw.as_str() {
            "VAR" => {
                saw_var_block = true;
                loop {
                    match p.next() {
                        Some(Spanned { tok: Tok::RParen, .. }) => break,
                        Some(Spanned { tok: Tok::Ident(name), .. }) => {
                            let name = name.clone();
                            p.vars.insert(name);
                        }
                        Some(t) => {
                            return Err(ParseError::new(t.line, t.col, format!("expected variable name or `)`, found {}", t.tok)))
                        }
                        None => return Err(p.eof_error("variable name or `)`")),
                    }
                }
            }
            "RULES" => {
                if !saw_var_block {
                    return Err(ParseError::new(kline, kcol, "RULES block before VAR block (declare variables first, `(VAR)` if none)"));
                }
                loop {
                    if matches!(p.peek(), Some(Spanned { tok: Tok::RParen, .. })) {
                        p.next();
                        break;
                    }
                    if p.peek().is_none() {
                        return Err(p.eof_error("rule or `)`"));
                    }
                    let span = p.peek().map(|t| (t.line, t.col)).unwrap();
                    let lhs = p.term()?;
                    p.expect(Tok::Arrow)?;
                    let rhs = p.term()?;
                    rules.push(Rule::new(lhs, rhs));
                    rule_spans.push(span);
                }
            }
            other => return Err(ParseError::new(kline, kcol, format!("unknown block `{other}` (expected VAR or RULES)"))),
        }
    }

    if !saw_var_block {
        return Err(ParseError::new(1, 1, "missing VAR block (use `(VAR)` to declare none)"));
    }

    Trs::with_variables(rules, p.vars.clone()).map_err(|e| {
        let (line, col) = match &e {
            TrsError::VariableLhs { index } | TrsError::FreeRhsVar { index, .. } => {
                rule_spans.get(*index).copied().unwrap_or((1, 1))
            }
            TrsError::ArityClash { .. } => (1, 1),
        };
        ParseError::new(line, col, e.to_string())
    })
}

/// Parses a single term literal using the given variable names; all other
/// identifiers are function symbols or constants.
pub fn parse_term(input: &str, vars: &BTreeSet<String>) -> Result<Term, ParseError> {
    let toks = lex(input)?;
    let mut p = Parser { toks: &toks, pos: 0, vars: vars.clone(), arities: Vec::new() };
    let t = p.term()?;
    if let Some(extra) = p.peek() {
        return Err(ParseError::new(extra.line, extra.col, format!("trailing input after term: {}", extra.tok)));
    }
    Ok(t)
}

/// Parses a term literal against a system: variables come from the system's
/// VAR block and arities must agree with the system's signature. Unknown
/// identifiers without arguments are fresh constants.
pub fn parse_term_for(trs: &Trs, input: &str) -> Result<Term, ParseError> {
    let t = parse_term(input, trs.variables())?;
    fn check(t: &Term, trs: &Trs) -> Result<(), ParseError> {
        if let Term::App(sym, args) = t {
            if let Some(a) = trs.signature().arity(&sym.name) {
                if a != sym.arity {
                    return Err(ParseError::new(
                        1,
                        1,
                        format!("symbol `{}` used with arity {}, but the system declares arity {a}", sym.name, sym.arity),
                    ));
                }
            } else if sym.arity != 0 {
                return Err(ParseError::new(
                    1,
                    1,
                    format!("unknown symbol `{}/{}` (only fresh constants may be introduced)", sym.name, sym.arity),
                ));
            }
            for a in args {
                check(a, trs)?;
            }
        }
        Ok(())
    }
    check(&t, trs)?;
    Ok(t)
}

/// Renders a system back in the `.trs` format.
pub fn render_trs(trs: &Trs) -> String {
    let mut out = String::new();
    out.push_str("(VAR");
    for v in trs.variables() {
        out.push(' ');
        out.push_str(v);
    }
    out.push_str(")\n(RULES\n");
    for rule in trs.rules() {
        out.push_str(&format!("  {}\n", rule));
    }
    out.push_str(")\n");
    out
}
