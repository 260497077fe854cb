//! Surface syntax: lexer, recursive-descent parser and canonical printer.
//!
//! ```text
//! domain node = {a, b, c, d}.
//! edb E(node, node): tropplus.
//! idb L(node): tropplus.
//! L(x) :- [x = a] + sum(z){ L(z) * E(z, x) }.
//! ```

use std::fmt::{self, Write as _};

use num_traits::{CheckedAdd, Zero};
use thiserror::Error;

use crate::ast::*;
use crate::pops::{Literal, PopsId, Rational};
use crate::store::RelKind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {}, column {}: {message}{}", span.line, span.col, expected_suffix(expected))]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
    pub expected: Vec<String>,
}

fn expected_suffix(expected: &[String]) -> String {
    if expected.is_empty() {
        String::new()
    } else {
        format!(" (expected {})", expected.join(", "))
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    /// Non-integer number written as `a/b` or with a decimal point.
    Rat(Rational),
    Str(String),
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Int(n) => write!(f, "'{n}'"),
            Tok::Rat(r) => write!(f, "'{r}'"),
            Tok::Str(s) => write!(f, "{s:?}"),
            Tok::Punct(p) => write!(f, "'{p}'"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    span: SourceSpan,
}

const PUNCTS: [&str; 23] = [
    ":-", "..", "!=", "<=", ">=", ":", ";", ".", ",", "(", ")", "{", "}", "[", "]", "+", "-", "*", "|", "=", "<", ">",
    "!",
];

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, pos: 0, line: 1, col: 1 }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn bump(&mut self, n: usize) {
        for ch in self.src[self.pos..self.pos + n].chars() {
            if ch == '\n' {
                self.line += 1;
                self.col = 1;
            } else {
                self.col += 1;
            }
        }
        self.pos += n;
    }

    fn here(&self) -> SourceSpan {
        SourceSpan {
            start: self.pos,
            end: self.pos,
            line: self.line,
            col: self.col,
            end_line: self.line,
            end_col: self.col,
        }
    }

    fn error(&self, start: SourceSpan, message: impl Into<String>) -> ParseError {
        let mut span = start;
        span.end = self.pos.max(start.start);
        span.end_line = self.line;
        span.end_col = self.col;
        ParseError { span, message: message.into(), expected: vec![] }
    }

    fn skip_trivia(&mut self) -> Result<(), ParseError> {
        loop {
            let rest = self.rest();
            let ws = rest.len() - rest.trim_start().len();
            if ws > 0 {
                self.bump(ws);
                continue;
            }
            if rest.starts_with("//") {
                let n = rest.find('\n').unwrap_or(rest.len());
                self.bump(n);
                continue;
            }
            if let Some(body) = rest.strip_prefix("/*") {
                let start = self.here();
                match body.find("*/") {
                    Some(i) => self.bump(i + 4),
                    None => {
                        self.bump(rest.len());
                        return Err(self.error(start, "unterminated block comment"));
                    }
                }
                continue;
            }
            return Ok(());
        }
    }

    fn digits(&self, from: usize) -> usize {
        self.src[from..].bytes().take_while(u8::is_ascii_digit).count()
    }

    fn next_token(&mut self) -> Result<Token, ParseError> {
        self.skip_trivia()?;
        let start = self.here();
        let rest = self.rest();
        let Some(c) = rest.chars().next() else {
            return Ok(Token { tok: Tok::Eof, span: start });
        };
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let n = rest.bytes().take_while(|b| b.is_ascii_alphanumeric() || *b == b'_').count();
            let s = rest[..n].to_string();
            self.bump(n);
            Tok::Ident(s)
        } else if c.is_ascii_digit() {
            let n = self.digits(self.pos);
            let int_text = &rest[..n];
            let mut value: i64 = int_text.parse().map_err(|_| self.error(start, "integer literal out of range"))?;
            let after = &rest[n..];
            let frac_digits = if after.starts_with('.') { self.digits(self.pos + n + 1) } else { 0 };
            if frac_digits > 0 {
                let frac = &after[1..1 + frac_digits];
                self.bump(n + 1 + frac_digits);
                if frac.len() > 18 {
                    return Err(self.error(start, "too many decimal digits"));
                }
                let num: i64 = frac.parse().expect("digits");
                let r = Rational::from_integer(value)
                    .checked_add(&Rational::new(num, 10i64.pow(frac.len() as u32)))
                    .ok_or_else(|| self.error(start, "decimal literal out of range"))?;
                if r.is_integer() {
                    Tok::Int(*r.numer())
                } else {
                    Tok::Rat(r)
                }
            } else if after.starts_with('/') && self.digits(self.pos + n + 1) > 0 {
                let d = self.digits(self.pos + n + 1);
                let denom: i64 = after[1..1 + d].parse().map_err(|_| self.error(start, "denominator out of range"))?;
                self.bump(n + 1 + d);
                if denom.is_zero() {
                    return Err(self.error(start, "zero denominator"));
                }
                let r = Rational::new(value, denom);
                if r.is_integer() {
                    value = *r.numer();
                    Tok::Int(value)
                } else {
                    Tok::Rat(r)
                }
            } else {
                self.bump(n);
                Tok::Int(value)
            }
        } else if c == '"' {
            let mut out = String::new();
            let mut chars = rest[1..].char_indices();
            let mut end = None;
            while let Some((i, ch)) = chars.next() {
                match ch {
                    '"' => {
                        end = Some(i + 2);
                        break;
                    }
                    '\\' => match chars.next() {
                        Some((_, e)) => out.push(match e {
                            'n' => '\n',
                            't' => '\t',
                            other => other,
                        }),
                        None => break,
                    },
                    '\n' => break,
                    other => out.push(other),
                }
            }
            match end {
                Some(n) => {
                    self.bump(n);
                    Tok::Str(out)
                }
                None => {
                    self.bump(rest.find('\n').unwrap_or(rest.len()));
                    return Err(self.error(start, "unterminated string"));
                }
            }
        } else if let Some(p) = PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            self.bump(p.len());
            Tok::Punct(p)
        } else {
            self.bump(c.len_utf8());
            return Err(self.error(start, format!("unexpected character {c:?}")));
        };
        let mut span = start;
        span.end = self.pos;
        span.end_line = self.line;
        span.end_col = self.col;
        Ok(Token { tok, span })
    }
}

fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut lx = Lexer::new(src);
    let mut out = Vec::new();
    loop {
        let t = lx.next_token()?;
        let eof = t.tok == Tok::Eof;
        out.push(t);
        if eof {
            return Ok(out);
        }
    }
}

const KEYWORDS: [&str; 7] = ["domain", "edb", "idb", "sum", "case", "else", "in"];
const VALUE_WORDS: [&str; 4] = ["inf", "bot", "true", "false"];

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    i: usize,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.i].span
    }

    fn prev_end(&self) -> SourceSpan {
        self.toks[self.i.saturating_sub(1)].span
    }

    fn join(&self, start: SourceSpan) -> SourceSpan {
        let end = self.prev_end();
        SourceSpan { end: end.end, end_line: end.end_line, end_col: end.end_col, ..start }
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(ParseError {
            span: self.span(),
            message: format!("unexpected {}", self.peek()),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> PResult<()> {
        if self.eat(p) {
            Ok(())
        } else {
            self.fail(&[&format!("'{p}'")])
        }
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.advance();
                Ok(s)
            }
            _ => self.fail(&[what]),
        }
    }

    fn int(&mut self) -> PResult<i64> {
        let neg = self.eat("-");
        match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                Ok(if neg { -n } else { n })
            }
            _ => self.fail(&["integer"]),
        }
    }

    fn program(&mut self) -> PResult<Program> {
        let mut prog = Program::default();
        while *self.peek() != Tok::Eof {
            let is_decl = matches!(self.peek(), Tok::Ident(s) if ["domain", "edb", "idb"].contains(&s.as_str()))
                && matches!(self.peek_at(1), Tok::Ident(_));
            if is_decl {
                if self.is_word("domain") {
                    prog.domains.push(self.domain_decl()?);
                } else {
                    prog.relations.push(self.rel_decl()?);
                }
            } else {
                prog.rules.push(self.rule()?);
            }
        }
        Ok(prog)
    }

    fn domain_decl(&mut self) -> PResult<DomainDecl> {
        let start = self.span();
        self.advance();
        let name = self.ident("domain name")?;
        self.expect("=")?;
        let body = if self.eat("{") {
            let mut elems = vec![self.ident("constant")?];
            while self.eat(",") {
                elems.push(self.ident("constant")?);
            }
            self.expect("}")?;
            DomainBody::Enum(elems)
        } else if matches!(self.peek(), Tok::Int(_)) || self.is_punct("-") {
            let lo = self.int()?;
            self.expect("..")?;
            let hi = self.int()?;
            DomainBody::Range(lo, hi)
        } else {
            return self.fail(&["'{'", "integer range"]);
        };
        self.expect(".")?;
        Ok(DomainDecl { name, body, span: self.join(start) })
    }

    fn rel_decl(&mut self) -> PResult<RelDecl> {
        let start = self.span();
        let kind = if self.is_word("edb") { RelKind::Edb } else { RelKind::Idb };
        self.advance();
        let name = self.ident("relation name")?;
        self.expect("(")?;
        let mut key_domains = Vec::new();
        if !self.is_punct(")") {
            key_domains.push(self.ident("domain name")?);
            while self.eat(",") {
                key_domains.push(self.ident("domain name")?);
            }
        }
        self.expect(")")?;
        self.expect(":")?;
        let pops = self.pops_name()?;
        self.expect(".")?;
        Ok(RelDecl { kind, name, key_domains, pops, span: self.join(start) })
    }

    fn pops_name(&mut self) -> PResult<PopsId> {
        let start = self.span();
        if !matches!(self.peek(), Tok::Ident(_)) {
            return self.fail(&["POPS name"]);
        }
        self.advance();
        if self.is_punct("(") {
            let mut depth = 0;
            loop {
                match self.peek() {
                    Tok::Punct("(") => depth += 1,
                    Tok::Punct(")") => depth -= 1,
                    Tok::Eof => return self.fail(&["')'"]),
                    _ => {}
                }
                self.advance();
                if depth == 0 {
                    break;
                }
            }
        }
        let span = self.join(start);
        let text = &self.src[span.start..span.end];
        text.parse().map_err(|e| ParseError { span, message: format!("{e}"), expected: vec![] })
    }

    fn rule(&mut self) -> PResult<Rule> {
        let start = self.span();
        let head = self.atom()?;
        self.expect(":-")?;
        let body = if self.is_word("case") { self.cases()? } else { RuleBody::Expr(self.expr()?) };
        self.expect(".")?;
        Ok(Rule { head, body, span: self.join(start) })
    }

    fn cases(&mut self) -> PResult<RuleBody> {
        self.advance();
        let mut branches = Vec::new();
        let mut otherwise = None;
        loop {
            if self.is_word("else") {
                self.advance();
                self.expect(":")?;
                otherwise = Some(self.expr()?);
                break;
            }
            let cond = self.cond()?;
            self.expect(":")?;
            let body = self.expr()?;
            branches.push(Branch { cond, body });
            if !self.eat(";") {
                break;
            }
        }
        Ok(RuleBody::Cases { branches, otherwise })
    }

    fn expr(&mut self) -> PResult<Expr> {
        let start = self.span();
        let mut terms = vec![self.term()?];
        while self.eat("+") {
            terms.push(self.term()?);
        }
        Ok(Expr { terms, span: self.join(start) })
    }

    fn term(&mut self) -> PResult<Term> {
        let start = self.span();
        if self.is_word("sum") && matches!(self.peek_at(1), Tok::Punct("(")) {
            return self.sum_expr().map(Term::Sum);
        }
        let mut factors = vec![self.factor()?];
        while self.eat("*") {
            factors.push(self.factor()?);
        }
        Ok(Term::Product { factors, span: self.join(start) })
    }

    fn sum_expr(&mut self) -> PResult<SumExpr> {
        let start = self.span();
        self.advance();
        self.expect("(")?;
        let mut binders = vec![self.binder()?];
        while self.eat(",") {
            binders.push(self.binder()?);
        }
        self.expect(")")?;
        self.expect("{")?;
        let body = self.expr()?;
        let guard = if self.eat("|") { Some(self.cond()?) } else { None };
        self.expect("}")?;
        Ok(SumExpr { binders, body: Box::new(body), guard, span: self.join(start) })
    }

    fn binder(&mut self) -> PResult<Binder> {
        let start = self.span();
        let name = self.ident("variable")?;
        let range = if self.is_word("in") {
            self.advance();
            let lo = self.int()?;
            self.expect("..")?;
            let hi = self.int()?;
            Some((lo, hi))
        } else {
            None
        };
        Ok(Binder { name, range, span: self.join(start) })
    }

    fn starts_literal(&self) -> bool {
        match self.peek() {
            Tok::Int(_) | Tok::Rat(_) => true,
            Tok::Punct("-") => matches!(self.peek_at(1), Tok::Int(_) | Tok::Rat(_)),
            Tok::Ident(w) => VALUE_WORDS.contains(&w.as_str()) && !matches!(self.peek_at(1), Tok::Punct("(")),
            _ => false,
        }
    }

    fn factor(&mut self) -> PResult<Factor> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Punct("[") => {
                let bag_like = matches!(self.peek_at(1), Tok::Int(_) | Tok::Rat(_) | Tok::Punct("-") | Tok::Punct("]"))
                    || matches!(self.peek_at(1), Tok::Ident(w) if w == "inf");
                if bag_like {
                    let value = self.literal()?;
                    return Ok(Factor::Literal { value, span: self.join(start) });
                }
                self.advance();
                if matches!(self.peek_at(1), Tok::Punct("=")) {
                    let var = self.ident("variable")?;
                    self.expect("=")?;
                    let rhs = self.keyterm()?;
                    self.expect("]")?;
                    return Ok(Factor::Eq { var, rhs, span: self.join(start) });
                }
                let atom = self.atom()?;
                self.expect("]")?;
                Ok(Factor::Cast(atom))
            }
            Tok::Punct("{") => {
                let value = self.literal()?;
                Ok(Factor::Literal { value, span: self.join(start) })
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Factor::Key { term: KeyTerm::Str(s), span: self.join(start) })
            }
            _ if self.starts_literal() => {
                let value = self.literal()?;
                Ok(Factor::Literal { value, span: self.join(start) })
            }
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                if !matches!(self.peek_at(1), Tok::Punct("(")) {
                    self.advance();
                    return Ok(Factor::Key { term: KeyTerm::Name(name), span: self.join(start) });
                }
                self.call_or_atom()
            }
            _ => self.fail(&["atom", "'['", "value", "'sum'"]),
        }
    }

    /// `R(k, …)`, `f(R(…))` or `f(v, …, R(…))`.
    fn call_or_atom(&mut self) -> PResult<Factor> {
        let start = self.span();
        let name = self.ident("relation or function name")?;
        self.expect("(")?;
        let args_start = self.i;
        let mut params = Vec::new();
        loop {
            if matches!(self.peek(), Tok::Ident(_)) && matches!(self.peek_at(1), Tok::Punct("(")) {
                let atom = self.atom()?;
                self.expect(")")?;
                return Ok(Factor::Apply { func: name, params, atom, span: self.join(start) });
            }
            if !self.starts_literal() && !matches!(self.peek(), Tok::Punct("[") | Tok::Punct("{")) {
                break;
            }
            let save = self.i;
            let lit = self.literal()?;
            if !self.eat(",") {
                self.i = save;
                break;
            }
            params.push(lit);
        }
        // Literal arguments not followed by an atom: an ordinary atom such as `E(0, x)`.
        self.i = args_start;
        let args = self.keyterm_list()?;
        self.expect(")")?;
        Ok(Factor::Atom(Atom { rel: name, args, span: self.join(start) }))
    }

    fn keyterm_list(&mut self) -> PResult<Vec<KeyTerm>> {
        let mut args = Vec::new();
        if self.is_punct(")") {
            return Ok(args);
        }
        args.push(self.keyterm()?);
        while self.eat(",") {
            args.push(self.keyterm()?);
        }
        Ok(args)
    }

    fn atom(&mut self) -> PResult<Atom> {
        let start = self.span();
        let rel = self.ident("relation name")?;
        self.expect("(")?;
        let args = self.keyterm_list()?;
        self.expect(")")?;
        Ok(Atom { rel, args, span: self.join(start) })
    }

    fn keyterm(&mut self) -> PResult<KeyTerm> {
        match self.peek().clone() {
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                self.advance();
                let sign = if self.is_punct("+") && matches!(self.peek_at(1), Tok::Int(_)) {
                    1
                } else if self.is_punct("-") && matches!(self.peek_at(1), Tok::Int(_)) {
                    -1
                } else {
                    return Ok(KeyTerm::Name(name));
                };
                self.advance();
                let n = self.int()?;
                Ok(KeyTerm::Shift(name, sign * n))
            }
            Tok::Int(_) | Tok::Punct("-") => self.int().map(KeyTerm::Int),
            Tok::Str(s) => {
                self.advance();
                Ok(KeyTerm::Str(s))
            }
            _ => self.fail(&["variable", "constant"]),
        }
    }

    fn literal(&mut self) -> PResult<Literal> {
        match self.peek().clone() {
            Tok::Punct("[") | Tok::Punct("{") => {
                let bag = self.is_punct("[");
                self.advance();
                let close = if bag { "]" } else { "}" };
                let mut items = Vec::new();
                if !self.eat(close) {
                    loop {
                        items.push(self.literal()?);
                        if self.eat(close) {
                            break;
                        }
                        self.expect(",")?;
                    }
                }
                Ok(if bag { Literal::Bag(items) } else { Literal::Set(items) })
            }
            Tok::Punct("-") => {
                self.advance();
                match self.literal()? {
                    Literal::Number(r) => Ok(Literal::Number(-r)),
                    _ => self.fail(&["number"]),
                }
            }
            Tok::Int(n) => {
                self.advance();
                Ok(Literal::Number(Rational::from_integer(n)))
            }
            Tok::Rat(r) => {
                self.advance();
                Ok(Literal::Number(r))
            }
            Tok::Ident(w) if VALUE_WORDS.contains(&w.as_str()) => {
                self.advance();
                Ok(match w.as_str() {
                    "inf" => Literal::Inf,
                    "bot" => Literal::Bot,
                    "true" => Literal::True,
                    _ => Literal::False,
                })
            }
            _ => self.fail(&["value"]),
        }
    }

    fn cond(&mut self) -> PResult<Cond> {
        let start = self.span();
        let mut atoms = vec![self.cond_atom()?];
        while self.eat(",") {
            atoms.push(self.cond_atom()?);
        }
        Ok(Cond { atoms, span: self.join(start) })
    }

    fn cond_atom(&mut self) -> PResult<CondAtom> {
        let negated = self.is_punct("!") && matches!(self.peek_at(1), Tok::Ident(_));
        if negated {
            self.advance();
        }
        if matches!(self.peek(), Tok::Ident(_)) && matches!(self.peek_at(1), Tok::Punct("(")) {
            return Ok(CondAtom::Rel { atom: self.atom()?, negated });
        }
        if negated {
            return self.fail(&["relation atom"]);
        }
        let lhs = self.key_expr()?;
        let op = match self.peek() {
            Tok::Punct("=") => CmpOp::Eq,
            Tok::Punct("!=") => CmpOp::Ne,
            Tok::Punct("<") => CmpOp::Lt,
            Tok::Punct("<=") => CmpOp::Le,
            Tok::Punct(">") => CmpOp::Gt,
            Tok::Punct(">=") => CmpOp::Ge,
            _ => return self.fail(&["comparison operator"]),
        };
        self.advance();
        let rhs = self.key_expr()?;
        Ok(CondAtom::Cmp { lhs, op, rhs })
    }

    fn key_expr(&mut self) -> PResult<KeyExpr> {
        let mut terms = Vec::new();
        let mut positive = !self.eat("-");
        loop {
            let operand = match self.peek().clone() {
                Tok::Ident(n) if !KEYWORDS.contains(&n.as_str()) => KeyOperand::Name(n),
                Tok::Int(n) => KeyOperand::Int(n),
                Tok::Str(s) => KeyOperand::Str(s),
                _ => return self.fail(&["key operand"]),
            };
            self.advance();
            terms.push((positive, operand));
            if self.eat("+") {
                positive = true;
            } else if self.eat("-") {
                positive = false;
            } else {
                return Ok(KeyExpr { terms });
            }
        }
    }
}

pub fn parse(text: &str) -> Result<Program, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser { src: text, toks, i: 0 };
    p.program()
}

/// Canonical text of a program; `parse(&pretty(p))` equals `p` up to spans.
pub fn pretty(program: &Program) -> String {
    let mut out = String::new();
    for d in &program.domains {
        let body = match &d.body {
            DomainBody::Enum(items) => format!("{{{}}}", items.join(", ")),
            DomainBody::Range(lo, hi) => format!("{lo}..{hi}"),
        };
        let _ = writeln!(out, "domain {} = {}.", d.name, body);
    }
    for r in &program.relations {
        let kind = match r.kind {
            RelKind::Edb => "edb",
            RelKind::Idb => "idb",
        };
        let _ = writeln!(out, "{kind} {}({}): {}.", r.name, r.key_domains.join(", "), r.pops);
    }
    if !program.rules.is_empty() && !(program.domains.is_empty() && program.relations.is_empty()) {
        out.push('\n');
    }
    for rule in &program.rules {
        let _ = writeln!(out, "{}", RuleDisplay(rule));
    }
    out
}

struct RuleDisplay<'a>(&'a Rule);

impl fmt::Display for RuleDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} :- ", AtomDisplay(&self.0.head))?;
        match &self.0.body {
            RuleBody::Expr(e) => write!(f, "{}", ExprDisplay(e))?,
            RuleBody::Cases { branches, otherwise } => {
                f.write_str("case ")?;
                for (i, b) in branches.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ; ")?;
                    }
                    write!(f, "{} : {}", CondDisplay(&b.cond), ExprDisplay(&b.body))?;
                }
                if let Some(e) = otherwise {
                    if !branches.is_empty() {
                        f.write_str(" ; ")?;
                    }
                    write!(f, "else : {}", ExprDisplay(e))?;
                }
            }
        }
        f.write_str(".")
    }
}

pub(crate) struct AtomDisplay<'a>(pub &'a Atom);

impl fmt::Display for AtomDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.0.rel)?;
        for (i, a) in self.0.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", KeyTermDisplay(a))?;
        }
        f.write_str(")")
    }
}

struct KeyTermDisplay<'a>(&'a KeyTerm);

impl fmt::Display for KeyTermDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            KeyTerm::Name(n) => f.write_str(n),
            KeyTerm::Int(n) => write!(f, "{n}"),
            KeyTerm::Str(s) => write!(f, "{s:?}"),
            KeyTerm::Shift(n, k) if *k < 0 => write!(f, "{n} - {}", -k),
            KeyTerm::Shift(n, k) => write!(f, "{n} + {k}"),
        }
    }
}

struct ExprDisplay<'a>(&'a Expr);

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            match t {
                Term::Product { factors, .. } => {
                    for (j, x) in factors.iter().enumerate() {
                        if j > 0 {
                            f.write_str(" * ")?;
                        }
                        write!(f, "{}", FactorDisplay(x))?;
                    }
                }
                Term::Sum(s) => {
                    f.write_str("sum(")?;
                    for (j, b) in s.binders.iter().enumerate() {
                        if j > 0 {
                            f.write_str(", ")?;
                        }
                        f.write_str(&b.name)?;
                        if let Some((lo, hi)) = b.range {
                            write!(f, " in {lo}..{hi}")?;
                        }
                    }
                    write!(f, "){{ {}", ExprDisplay(&s.body))?;
                    if let Some(g) = &s.guard {
                        write!(f, " | {}", CondDisplay(g))?;
                    }
                    f.write_str(" }")?;
                }
            }
        }
        Ok(())
    }
}

struct FactorDisplay<'a>(&'a Factor);

impl fmt::Display for FactorDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Factor::Atom(a) => write!(f, "{}", AtomDisplay(a)),
            Factor::Eq { var, rhs, .. } => write!(f, "[{var} = {}]", KeyTermDisplay(rhs)),
            Factor::Cast(a) => write!(f, "[{}]", AtomDisplay(a)),
            Factor::Apply { func, params, atom, .. } => {
                write!(f, "{func}(")?;
                for p in params {
                    write!(f, "{}, ", LiteralDisplay(p))?;
                }
                write!(f, "{})", AtomDisplay(atom))
            }
            Factor::Literal { value, .. } => write!(f, "{}", LiteralDisplay(value)),
            Factor::Key { term, .. } => write!(f, "{}", KeyTermDisplay(term)),
        }
    }
}

pub(crate) struct LiteralDisplay<'a>(pub &'a Literal);

impl fmt::Display for LiteralDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, open: &str, close: &str, items: &[Literal]| {
            f.write_str(open)?;
            for (i, x) in items.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{}", LiteralDisplay(x))?;
            }
            f.write_str(close)
        };
        match self.0 {
            Literal::Number(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Literal::Number(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Literal::Inf => f.write_str("inf"),
            Literal::Bot => f.write_str("bot"),
            Literal::True => f.write_str("true"),
            Literal::False => f.write_str("false"),
            Literal::Tri(t) => write!(f, "{t}"),
            Literal::Bag(items) => list(f, "[", "]", items),
            Literal::Set(items) => list(f, "{", "}", items),
            Literal::Pair(a, b) => write!(f, "({}, {})", LiteralDisplay(a), LiteralDisplay(b)),
        }
    }
}

struct CondDisplay<'a>(&'a Cond);

impl fmt::Display for CondDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.0.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match a {
                CondAtom::Rel { atom, negated } => {
                    if *negated {
                        f.write_str("!")?;
                    }
                    write!(f, "{}", AtomDisplay(atom))?;
                }
                CondAtom::Cmp { lhs, op, rhs } => {
                    write!(f, "{} {} {}", KeyExprDisplay(lhs), op.symbol(), KeyExprDisplay(rhs))?
                }
            }
        }
        Ok(())
    }
}

struct KeyExprDisplay<'a>(&'a KeyExpr);

impl fmt::Display for KeyExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (pos, op)) in self.0.terms.iter().enumerate() {
            match (i, pos) {
                (0, true) => {}
                (0, false) => f.write_str("-")?,
                (_, true) => f.write_str(" + ")?,
                (_, false) => f.write_str(" - ")?,
            }
            match op {
                KeyOperand::Name(n) => f.write_str(n)?,
                KeyOperand::Int(n) => write!(f, "{n}")?,
                KeyOperand::Str(s) => write!(f, "{s:?}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SSSP: &str = "L(x) :- [x=a] + sum(z){ L(z) * E(z,x) }.";

    #[test]
    fn parses_linear_rule() {
        let p = parse(SSSP).unwrap();
        let rule = &p.rules[0];
        assert_eq!(rule.head.rel, "L");
        let RuleBody::Expr(e) = &rule.body else { panic!("plain body") };
        assert_eq!(e.terms.len(), 2);
        let Term::Sum(s) = &e.terms[1] else { panic!("sum term") };
        assert_eq!(s.binders[0].name, "z");
        assert!(matches!(&e.terms[0], Term::Product { factors, .. } if matches!(factors[0], Factor::Eq { .. })));
    }

    #[test]
    fn parses_conditional_rule() {
        let p = parse("W(i) :- case i=0 : V(0) ; else : W(i-1) + V(i).").unwrap();
        let RuleBody::Cases { branches, otherwise } = &p.rules[0].body else { panic!("cases") };
        assert_eq!(branches.len(), 1);
        let e = otherwise.as_ref().unwrap();
        let Term::Product { factors, .. } = &e.terms[0] else { panic!() };
        let Factor::Atom(a) = &factors[0] else { panic!() };
        assert_eq!(a.args[0], KeyTerm::Shift("i".into(), -1));
    }

    #[test]
    fn reports_error_position() {
        let err = parse("L(x) :- +.").unwrap_err();
        assert_eq!((err.span.line, err.span.col, err.span.end_col), (1, 9, 10));
        assert!(!err.expected.is_empty());
        let err = parse("domain d = {a,\n b.").unwrap_err();
        assert_eq!(err.span.line, 2);
    }

    #[test]
    fn declarations_and_functions() {
        let src = "domain c = {a,b}.\ndomain idx = 0..9.\nedb S(c,c): nnrat.\nidb T(c,c): trop_eta(6.5).\n\
                   C(x,y) :- threshold(0.5, T(x,y)).\nX() :- sum(j in 0..9){ V(j) | j != 3 }.";
        let p = parse(src).unwrap();
        assert_eq!(p.domains[1].body, DomainBody::Range(0, 9));
        assert_eq!(p.relations[1].pops, PopsId::TropEta(Rational::new(13, 2)));
        let RuleBody::Expr(e) = &p.rules[0].body else { panic!() };
        let Term::Product { factors, .. } = &e.terms[0] else { panic!() };
        assert!(matches!(&factors[0], Factor::Apply { func, params, .. } if func == "threshold" && params.len() == 1));
        assert!(p.rules[1].head.args.is_empty());
    }

    #[test]
    fn literals_and_comments() {
        let src = "/* block */ R(x) :- [1, inf] * E(x) + {3, 5} // tail\n + -2 + 1/2 * bot.";
        let p = parse(src).unwrap();
        let RuleBody::Expr(e) = &p.rules[0].body else { panic!() };
        assert_eq!(e.terms.len(), 4);
        assert!(parse("R(x) :- E(x) /* open").is_err());
    }

    #[test]
    fn round_trip_preserves_structure() {
        let src = "domain idx = 0..9.\nedb V(idx): real_bot.\nidb W(idx): real_bot.\n\
                   W(i) :- case i = 0 : V(i) ; i < 2 : W(i - 1) + V(i) ; else : W(i-1) + V(i) + neg(V(i-2)).\n\
                   X(i) :- sum(j in 0..9, k){ V(j) * [k = i] | j <= i, !B(j) }.";
        let p = parse(src).unwrap();
        let text = pretty(&p);
        assert_eq!(parse(&text).unwrap(), p, "{text}");
    }

    proptest! {
        #[test]
        fn never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let text = String::from_utf8_lossy(&bytes);
            let _ = parse(&text);
        }

        #[test]
        fn never_panics_on_token_soup(toks in proptest::collection::vec(
            prop::sample::select(vec!["R", "(", ")", "x", ",", ":-", "sum", "{", "}", "[", "]", "=", "+", "*",
                                      "|", ".", "1", "-", "case", ":", ";", "else", "in", "..", "3/4", "inf"]), 0..30)) {
            let _ = parse(&toks.join(" "));
        }
    }
}
