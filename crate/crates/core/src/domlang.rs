//! Domain language: lexer, recursive-descent parser and serializer.
//!
//! ```text
//! domain knapsack
//! cvar k [0, 100]
//! bvar h
//! action move_1 {
//!   k' = ([k + x1 <= 100] (k + x1) (k))
//!   h' ~ 1
//!   reward = ([k + x1 <= 100] x1 0)
//! }
//! discount 1
//! horizon 3
//! ```
//!
//! A case is either `([cond] case case)` or a polynomial. Conditions are
//! `poly REL poly` or a bare boolean variable (optionally primed).

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::path::Path;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::model::{self, Action, ContinuousVar, Dcmdp, Domain};
use crate::poly::{Cmp, Decision, Folded, Monomial, Polynomial, Rational};
use crate::vars::{VarId, VarKind, Vocab, VocabError};
use crate::xadd::{CaseTree, XaddStore};

const MAX_DEPTH: usize = 200;
const MAX_EXPONENT: u32 = 32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceSpan {
    pub file: String,
    pub line: usize,
    /// 1-based, end exclusive.
    pub start_col: usize,
    pub end_col: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.start_col)
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
    #[error("expected {expected}, found {found}")]
    Unexpected { expected: String, found: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("boolean variable `{0}` used in arithmetic")]
    BooleanInArithmetic(String),
    #[error("`{0}` is not a boolean variable")]
    NotBoolean(String),
    #[error("`{name}` not allowed here: {rule}")]
    Forbidden { name: String, rule: String },
    #[error("exponent must be an integer between 1 and {MAX_EXPONENT}")]
    BadExponent,
    #[error("division by a non-constant or zero expression")]
    BadDivision,
    #[error("expected a constant expression")]
    NonConstant,
    #[error("probability {0} out of [0,1]")]
    ProbabilityOutOfRange(String),
    #[error("horizon must be a positive integer or `inf`")]
    BadHorizon,
    #[error("`{0}` is defined twice")]
    Duplicate(String),
    #[error("nesting too deep")]
    TooDeep,
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("cannot read file: {0}")]
    Io(String),
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("{span}: {kind}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(Rational),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(n) => write!(f, "`{n}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
    end_col: usize,
}

const SYMBOLS: [&str; 22] = [
    "<=", ">=", "(", ")", "[", "]", "{", "}", ",", "'", "=", "~", "+", "-", "*", "/", "^", "<",
    ">", "&", "!", ":",
];

fn lex(text: &str, file: &str, first_line: usize) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, first_line, 1);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = col;
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                i += 1;
                col += 1;
            }
            out.push(Token { tok: Tok::Ident(s), line, col: start, end_col: col });
            continue;
        }
        if c == '⊤' {
            i += 1;
            col += 1;
            out.push(Token { tok: Tok::Ident("true".into()), line, col: start, end_col: col });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            let mut digits = String::new();
            let mut scale = 0u32;
            let mut seen_dot = false;
            while i < chars.len() {
                let d = chars[i];
                if d.is_ascii_digit() {
                    digits.push(d);
                    if seen_dot {
                        scale += 1;
                    }
                } else if d == '.' && !seen_dot {
                    seen_dot = true;
                } else {
                    break;
                }
                i += 1;
                col += 1;
            }
            let n: BigInt = digits.parse().unwrap_or_default();
            let value = Rational::new(n, BigInt::from(10).pow(scale));
            out.push(Token { tok: Tok::Num(value), line, col: start, end_col: col });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                let n = s.chars().count();
                i += n;
                col += n;
                out.push(Token { tok: Tok::Sym(s), line, col: start, end_col: col });
            }
            None => {
                return Err(ParseError {
                    span: SourceSpan { file: file.into(), line, start_col: col, end_col: col + 1 },
                    kind: ParseErrorKind::UnexpectedChar(c),
                })
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, col, end_col: col });
    Ok(out)
}

/// Where primed variables may appear, and the rule named when they do not.
#[derive(Clone, Copy)]
struct Rules {
    leaf_primed: bool,
    cond_primed_real: bool,
    cond_primed_bool: bool,
    rule: &'static str,
}

const ANYTHING: Rules = Rules {
    leaf_primed: true,
    cond_primed_real: true,
    cond_primed_bool: true,
    rule: "",
};

const CSE_RULES: Rules = Rules {
    leaf_primed: false,
    cond_primed_real: false,
    cond_primed_bool: true,
    rule: model::SYNCHRONIC_CONTINUOUS,
};

const CPT_RULES: Rules = Rules {
    leaf_primed: false,
    cond_primed_real: false,
    cond_primed_bool: false,
    rule: model::SYNCHRONIC_BOOLEAN,
};

const REWARD_RULES: Rules = Rules {
    leaf_primed: false,
    cond_primed_real: false,
    cond_primed_bool: false,
    rule: model::NEXT_STATE_REWARD,
};

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    file: String,
    vocab: Vocab,
    depth: usize,
    /// Leaves of the case currently being parsed, for range checks.
    leaves: Vec<(SourceSpan, Polynomial)>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn new(toks: Vec<Token>, file: &str, vocab: Vocab) -> Self {
        Parser { toks, pos: 0, file: file.into(), vocab, depth: 0, leaves: Vec::new() }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> SourceSpan {
        self.span_of(self.pos)
    }

    fn span_of(&self, i: usize) -> SourceSpan {
        let t = &self.toks[i.min(self.toks.len() - 1)];
        SourceSpan { file: self.file.clone(), line: t.line, start_col: t.col, end_col: t.end_col }
    }

    fn span_from(&self, start: usize) -> SourceSpan {
        let mut s = self.span_of(start);
        let last = self.span_of(self.pos.saturating_sub(1).max(start));
        if last.line == s.line {
            s.end_col = last.end_col;
        }
        s
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, kind: ParseErrorKind) -> PResult<T> {
        Err(ParseError { span: self.span(), kind })
    }

    fn unexpected<T>(&self, expected: &str) -> PResult<T> {
        self.err(ParseErrorKind::Unexpected {
            expected: expected.into(),
            found: self.peek().to_string(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn is_keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == k)
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&format!("`{s}`"))
        }
    }

    fn expect_keyword(&mut self, k: &str) -> PResult<()> {
        if self.is_keyword(k) {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&format!("`{k}`"))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.unexpected("an identifier"),
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        match self.peek() {
            Tok::Eof => Ok(()),
            _ => self.unexpected("end of input"),
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.err(ParseErrorKind::TooDeep);
        }
        Ok(())
    }

    /// `IDENT` or `IDENT '` resolved against the vocabulary.
    fn variable(&mut self) -> PResult<(VarId, SourceSpan)> {
        let start = self.pos;
        let mut name = self.ident()?;
        if self.is_sym("'") {
            self.bump();
            name.push('\'');
        }
        let span = self.span_from(start);
        match self.vocab.get(&name) {
            Some(v) => Ok((v, span)),
            None => Err(ParseError { span, kind: ParseErrorKind::UnknownVariable(name) }),
        }
    }

    fn check_primed(&self, v: VarId, span: &SourceSpan, allowed: bool, rule: &str) -> PResult<()> {
        if !allowed && self.vocab.is_primed(v) {
            return Err(ParseError {
                span: span.clone(),
                kind: ParseErrorKind::Forbidden { name: self.vocab.name(v).into(), rule: rule.into() },
            });
        }
        Ok(())
    }

    fn case(&mut self, rules: Rules) -> PResult<CaseTree> {
        self.enter()?;
        let tree = if self.is_sym("(") && matches!(self.peek_at(1), Tok::Sym("[")) {
            self.bump();
            self.bump();
            let test = self.cond(rules)?;
            self.expect_sym("]")?;
            let high = self.case(rules)?;
            let low = self.case(rules)?;
            self.expect_sym(")")?;
            CaseTree::test(test, high, low)
        } else {
            let start = self.pos;
            let p = self.poly(rules.leaf_primed, rules.rule)?;
            self.leaves.push((self.span_from(start), p.clone()));
            CaseTree::Leaf(p)
        };
        self.depth -= 1;
        Ok(tree)
    }

    fn cond(&mut self, rules: Rules) -> PResult<Folded> {
        if let Tok::Ident(name) = self.peek() {
            if let Some(v) = self.vocab.get(name) {
                if self.vocab.kind(v) == VarKind::Boolean {
                    let (v, span) = self.variable()?;
                    self.check_primed(v, &span, rules.cond_primed_bool, rules.rule)?;
                    return Ok(Folded::Test(Decision::Bool(v), false));
                }
            }
        }
        let lhs = self.poly(rules.cond_primed_real, rules.rule)?;
        let op = match self.peek() {
            Tok::Sym("<") => Cmp::Lt,
            Tok::Sym("<=") => Cmp::Le,
            Tok::Sym(">") => Cmp::Gt,
            Tok::Sym(">=") => Cmp::Ge,
            _ => return self.unexpected("a comparison (<, <=, >, >=)"),
        };
        self.bump();
        let rhs = self.poly(rules.cond_primed_real, rules.rule)?;
        Ok(Decision::compare(&lhs, op, &rhs))
    }

    fn poly(&mut self, primed: bool, rule: &str) -> PResult<Polynomial> {
        self.enter()?;
        let mut acc = self.term(primed, rule)?;
        loop {
            if self.is_sym("+") {
                self.bump();
                acc = acc + self.term(primed, rule)?;
            } else if self.is_sym("-") {
                self.bump();
                acc = acc - self.term(primed, rule)?;
            } else {
                break;
            }
        }
        self.depth -= 1;
        Ok(acc)
    }

    fn term(&mut self, primed: bool, rule: &str) -> PResult<Polynomial> {
        let mut acc = self.unary(primed, rule)?;
        loop {
            if self.is_sym("*") {
                self.bump();
                acc = acc * self.unary(primed, rule)?;
            } else if self.is_sym("/") {
                self.bump();
                let start = self.pos;
                let divisor = self.unary(primed, rule)?;
                match divisor.as_constant() {
                    Some(c) if !c.is_zero() => acc = acc.scale(&c.recip()),
                    _ => {
                        return Err(ParseError {
                            span: self.span_from(start),
                            kind: ParseErrorKind::BadDivision,
                        })
                    }
                }
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn unary(&mut self, primed: bool, rule: &str) -> PResult<Polynomial> {
        if self.is_sym("-") {
            self.bump();
            self.enter()?;
            let p = -self.unary(primed, rule)?;
            self.depth -= 1;
            return Ok(p);
        }
        let base = self.atom(primed, rule)?;
        if !self.is_sym("^") {
            return Ok(base);
        }
        self.bump();
        let exp = match self.peek() {
            Tok::Num(n) if n.is_integer() => n.to_integer().to_u32(),
            _ => None,
        };
        match exp {
            Some(e) if (1..=MAX_EXPONENT).contains(&e) => {
                self.bump();
                Ok(base.pow(e))
            }
            _ => self.err(ParseErrorKind::BadExponent),
        }
    }

    fn atom(&mut self, primed: bool, rule: &str) -> PResult<Polynomial> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Polynomial::constant(n))
            }
            Tok::Ident(_) => {
                let (v, span) = self.variable()?;
                if self.vocab.kind(v) == VarKind::Boolean {
                    return Err(ParseError {
                        span,
                        kind: ParseErrorKind::BooleanInArithmetic(self.vocab.name(v).into()),
                    });
                }
                self.check_primed(v, &span, primed, rule)?;
                Ok(Polynomial::var(v))
            }
            Tok::Sym("(") => {
                self.bump();
                let p = self.poly(primed, rule)?;
                self.expect_sym(")")?;
                Ok(p)
            }
            _ => self.unexpected("a number, variable or `(`"),
        }
    }

    fn constant(&mut self) -> PResult<Rational> {
        let start = self.pos;
        let p = self.poly(true, "")?;
        p.as_constant().ok_or(ParseError {
            span: self.span_from(start),
            kind: ParseErrorKind::NonConstant,
        })
    }
}

enum Stmt {
    Cse(VarId, CaseTree),
    Cpt(VarId, CaseTree),
    Reward(CaseTree),
}

struct RawAction {
    name: String,
    span: SourceSpan,
    stmts: Vec<Stmt>,
}

pub fn parse_domain(text: &str) -> Result<Domain, ParseError> {
    parse_domain_named(text, "<input>")
}

pub fn parse_domain_file(path: &Path) -> Result<Domain, ParseError> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ParseError {
        span: SourceSpan { file: file.clone(), line: 0, start_col: 0, end_col: 0 },
        kind: ParseErrorKind::Io(e.to_string()),
    })?;
    parse_domain_named(&text, &file)
}

pub fn parse_domain_named(text: &str, file: &str) -> Result<Domain, ParseError> {
    let toks = lex(text, file, 1)?;
    let mut p = Parser::new(toks, file, Vocab::new());
    p.expect_keyword("domain")?;
    let name = p.ident()?;

    let mut bvars = Vec::new();
    let mut cvars = Vec::new();
    loop {
        if p.is_keyword("cvar") {
            p.bump();
            let start = p.pos;
            let var = p.ident()?;
            let span = p.span_from(start);
            p.expect_sym("[")?;
            let lower = p.constant()?;
            p.expect_sym(",")?;
            let upper = p.constant()?;
            p.expect_sym("]")?;
            let id = p
                .vocab
                .declare_real(&var, lower.clone(), upper.clone())
                .map_err(|e| ParseError { span, kind: e.into() })?;
            cvars.push(ContinuousVar { id, lower, upper });
        } else if p.is_keyword("bvar") {
            p.bump();
            let span = p.span();
            let var = p.ident()?;
            let id = p.vocab.declare_bool(&var).map_err(|e| ParseError { span, kind: e.into() })?;
            bvars.push(id);
        } else {
            break;
        }
    }

    let mut raw = Vec::new();
    while p.is_keyword("action") {
        p.bump();
        let span = p.span();
        let action = p.ident()?;
        if raw.iter().any(|a: &RawAction| a.name == action) {
            return Err(ParseError { span, kind: ParseErrorKind::Duplicate(action) });
        }
        p.expect_sym("{")?;
        let mut stmts = Vec::new();
        let mut defined: Vec<String> = Vec::new();
        while !p.is_sym("}") {
            let span = p.span();
            let target = p.ident()?;
            if target == "reward" && p.is_sym("=") {
                p.bump();
                if defined.contains(&target) {
                    return Err(ParseError { span, kind: ParseErrorKind::Duplicate(target) });
                }
                defined.push(target);
                stmts.push(Stmt::Reward(p.case(REWARD_RULES)?));
                continue;
            }
            p.expect_sym("'")?;
            let Some(v) = p.vocab.get(&target) else {
                return Err(ParseError { span, kind: ParseErrorKind::UnknownVariable(target) });
            };
            if defined.contains(&target) {
                return Err(ParseError { span, kind: ParseErrorKind::Duplicate(format!("{target}'")) });
            }
            let next = p.vocab.primed(v);
            match (p.vocab.kind(v), p.peek()) {
                (VarKind::Continuous, Tok::Sym("=")) => {
                    p.bump();
                    stmts.push(Stmt::Cse(next, p.case(CSE_RULES)?));
                }
                (VarKind::Boolean, Tok::Sym("~")) => {
                    p.bump();
                    p.leaves.clear();
                    let tree = p.case(CPT_RULES)?;
                    for (leaf_span, leaf) in &p.leaves {
                        if let Some(c) = leaf.as_constant() {
                            if c.is_negative() || c > Rational::one() {
                                return Err(ParseError {
                                    span: leaf_span.clone(),
                                    kind: ParseErrorKind::ProbabilityOutOfRange(c.to_string()),
                                });
                            }
                        }
                    }
                    stmts.push(Stmt::Cpt(next, tree));
                }
                (VarKind::Continuous, _) => return p.unexpected("`=` for a continuous variable"),
                (VarKind::Boolean, _) => return p.unexpected("`~` for a boolean variable"),
            }
            defined.push(target);
        }
        p.expect_sym("}")?;
        raw.push(RawAction { name: action, span, stmts });
    }
    if raw.is_empty() {
        return p.unexpected("`action`");
    }

    let mut discount = Rational::one();
    let mut horizon = None;
    if p.is_keyword("discount") {
        p.bump();
        let start = p.pos;
        discount = p.constant()?;
        if discount.is_negative() || discount > Rational::one() {
            return Err(ParseError {
                span: p.span_from(start),
                kind: ParseErrorKind::InvalidModel(format!("discount {discount} out of [0,1]")),
            });
        }
    }
    if p.is_keyword("horizon") {
        p.bump();
        if p.is_keyword("inf") {
            p.bump();
        } else {
            let h = match p.peek() {
                Tok::Num(n) if n.is_integer() => n.to_integer().to_u32().filter(|h| *h > 0),
                _ => None,
            };
            match h {
                Some(h) => {
                    p.bump();
                    horizon = Some(h);
                }
                None => return p.err(ParseErrorKind::BadHorizon),
            }
        }
    }
    p.expect_eof()?;

    let mut store = XaddStore::new(p.vocab.clone());
    // Inequalities are registered in a content order rather than text order
    // so reparsing serialized output rebuilds the same diagrams.
    let mut ineqs: Vec<&Decision> = raw
        .iter()
        .flat_map(|a| a.stmts.iter())
        .flat_map(|stmt| match stmt {
            Stmt::Cse(_, t) | Stmt::Cpt(_, t) | Stmt::Reward(t) => t.decisions(),
        })
        .filter(|d| matches!(d, Decision::Ineq { .. }))
        .collect();
    ineqs.sort_by_key(|d| decision_key(d));
    ineqs.dedup();
    for d in ineqs {
        store.decision_id(d.clone());
    }
    let mut actions = Vec::new();
    let mut spans = HashMap::new();
    for a in raw {
        let zero = store.zero();
        let mut action = Action::new(a.name.clone(), zero);
        for stmt in a.stmts {
            match stmt {
                Stmt::Cse(v, tree) => {
                    action.cses.insert(v, tree);
                }
                Stmt::Cpt(v, tree) => {
                    let r = store.reorder(&tree);
                    action.cpts.insert(v, r);
                }
                Stmt::Reward(tree) => action.reward = store.reorder(&tree),
            }
        }
        spans.insert(a.name, a.span);
        actions.push(action);
    }
    let mdp = Dcmdp { name, bvars, cvars, actions, discount, horizon };
    let violations = model::validate(&store, &mdp);
    if let Some(v) = violations.first() {
        let span = v
            .action
            .as_ref()
            .and_then(|a| spans.get(a).cloned())
            .unwrap_or_else(|| p.span_of(0));
        return Err(ParseError { span, kind: ParseErrorKind::InvalidModel(v.to_string()) });
    }
    Ok(Domain { store, mdp })
}

fn decision_key(d: &Decision) -> (u32, Vec<(Monomial, Rational)>, bool) {
    match d {
        Decision::Bool(v) => (0, vec![(Monomial::var(*v), Rational::from_integer(0.into()))], false),
        Decision::Ineq { poly, strict } => (
            1 + poly.degree(),
            poly.terms().map(|(m, c)| (m.clone(), c.clone())).collect(),
            *strict,
        ),
    }
}

/// Parses a nested case expression against `vocab`.
pub fn parse_case(text: &str, vocab: &Vocab) -> Result<CaseTree, ParseError> {
    let toks = lex(text, "<case>", 1)?;
    let mut p = Parser::new(toks, "<case>", vocab.clone());
    let tree = p.case(ANYTHING)?;
    p.expect_eof()?;
    Ok(tree)
}

/// Parses a constant expression such as `-7`, `0.9` or `2/3`.
pub fn parse_constant(text: &str) -> Result<Rational, ParseError> {
    let toks = lex(text, "<value>", 1)?;
    let mut p = Parser::new(toks, "<value>", Vocab::new());
    let value = p.constant()?;
    p.expect_eof()?;
    Ok(value)
}

/// Parses flat partitions, one per line: `cond & cond & ... : poly`, where
/// a condition is a comparison, `b`, `!b` or `true`.
pub fn parse_partitions(
    text: &str,
    vocab: &Vocab,
) -> Result<Vec<(Vec<Folded>, Polynomial)>, ParseError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let toks = lex(line, "<case>", i + 1)?;
        if matches!(toks[0].tok, Tok::Eof) {
            continue;
        }
        let mut p = Parser::new(toks, "<case>", vocab.clone());
        let mut atoms = Vec::new();
        loop {
            if p.is_keyword("true") {
                p.bump();
                atoms.push(Folded::Const(true));
            } else if p.is_sym("!") {
                p.bump();
                let (v, span) = p.variable()?;
                if vocab.kind(v) != VarKind::Boolean {
                    return Err(ParseError {
                        span,
                        kind: ParseErrorKind::NotBoolean(vocab.name(v).into()),
                    });
                }
                atoms.push(Folded::Test(Decision::Bool(v), true));
            } else {
                atoms.push(p.cond(ANYTHING)?);
            }
            if p.is_sym("&") {
                p.bump();
            } else {
                break;
            }
        }
        p.expect_sym(":")?;
        let value = p.poly(true, "")?;
        p.expect_eof()?;
        out.push((atoms, value));
    }
    Ok(out)
}

fn write_tree(out: &mut String, tree: &CaseTree, vocab: &Vocab) {
    match tree {
        CaseTree::Leaf(p) => {
            let _ = write!(out, "({})", p.display(vocab));
        }
        CaseTree::Branch { decision, high, low } => {
            let _ = write!(out, "([{}] ", decision.display(vocab, false));
            write_tree(out, high, vocab);
            out.push(' ');
            write_tree(out, low, vocab);
            out.push(')');
        }
    }
}

/// Renders a case tree in the nested syntax accepted by [`parse_case`].
pub fn case_to_string(tree: &CaseTree, vocab: &Vocab) -> String {
    let mut out = String::new();
    write_tree(&mut out, tree, vocab);
    out
}

pub fn serialize_domain(domain: &Domain) -> String {
    let store = &domain.store;
    let vocab = store.vocab();
    let m = &domain.mdp;
    let mut out = format!("domain {}\n\n", m.name);
    for c in &m.cvars {
        let _ = writeln!(out, "cvar {} [{}, {}]", vocab.name(c.id), c.lower, c.upper);
    }
    for b in &m.bvars {
        let _ = writeln!(out, "bvar {}", vocab.name(*b));
    }
    for a in &m.actions {
        let _ = writeln!(out, "\naction {} {{", a.name);
        let mut lines: BTreeMap<VarId, String> = BTreeMap::new();
        for (v, cse) in &a.cses {
            lines.insert(*v, format!("{} = {}", vocab.name(*v), case_to_string(cse, vocab)));
        }
        for (v, cpt) in &a.cpts {
            let tree = store.to_tree(*cpt);
            lines.insert(*v, format!("{} ~ {}", vocab.name(*v), case_to_string(&tree, vocab)));
        }
        for line in lines.values() {
            let _ = writeln!(out, "  {line}");
        }
        let reward = store.to_tree(a.reward);
        let _ = writeln!(out, "  reward = {}", case_to_string(&reward, vocab));
        out.push_str("}\n");
    }
    let _ = writeln!(out, "\ndiscount {}", m.discount);
    if let Some(h) = m.horizon {
        let _ = writeln!(out, "horizon {h}");
    }
    out
}
