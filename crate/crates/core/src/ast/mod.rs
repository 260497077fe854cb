//! Program syntax trees, validation, stratification and linearity.

mod check;

use std::fmt;

use crate::pops::{Literal, PopsId};
use crate::store::RelKind;

pub(crate) use check::compare_keys;
pub use check::{
    check, classify_linear, stratify, validate, CheckedProgram, CheckedRule, Diagnostic, Severity, Stratum,
};
pub use check::{CBody, CCond, CCondAtom, CExpr, CFactor, CKey, CKeyExpr, CTerm, VarId, VarInfo, Wrap};

/// Source region of a node. Spans never take part in structural equality,
/// so a re-parsed program compares equal to the original.
#[derive(Clone, Copy, Debug, Default, Eq)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl PartialEq for SourceSpan {
    fn eq(&self, _: &SourceSpan) -> bool {
        true
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Program {
    pub domains: Vec<DomainDecl>,
    pub relations: Vec<RelDecl>,
    pub rules: Vec<Rule>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainDecl {
    pub name: String,
    pub body: DomainBody,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DomainBody {
    Enum(Vec<String>),
    /// Inclusive bounds.
    Range(i64, i64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelDecl {
    pub kind: RelKind,
    pub name: String,
    pub key_domains: Vec<String>,
    pub pops: PopsId,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub head: Atom,
    pub body: RuleBody,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RuleBody {
    Expr(Expr),
    Cases { branches: Vec<Branch>, otherwise: Option<Expr> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub cond: Cond,
    pub body: Expr,
}

/// `term + term + …`
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub terms: Vec<Term>,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Product { factors: Vec<Factor>, span: SourceSpan },
    Sum(SumExpr),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SumExpr {
    pub binders: Vec<Binder>,
    pub body: Box<Expr>,
    pub guard: Option<Cond>,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Binder {
    pub name: String,
    /// Inclusive explicit range.
    pub range: Option<(i64, i64)>,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Factor {
    Atom(Atom),
    /// `[x = t]`
    Eq {
        var: String,
        rhs: KeyTerm,
        span: SourceSpan,
    },
    /// `[R(...)]`
    Cast(Atom),
    /// `f(R(...))` or `f(params…, R(...))`
    Apply {
        func: String,
        params: Vec<Literal>,
        atom: Atom,
        span: SourceSpan,
    },
    Literal {
        value: Literal,
        span: SourceSpan,
    },
    /// A key variable or constant used as a value.
    Key {
        term: KeyTerm,
        span: SourceSpan,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub rel: String,
    pub args: Vec<KeyTerm>,
    pub span: SourceSpan,
}

/// Identifiers are resolved to variables or symbolic constants during checking.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum KeyTerm {
    Name(String),
    Int(i64),
    Str(String),
    Shift(String, i64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cond {
    pub atoms: Vec<CondAtom>,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CondAtom {
    Cmp { lhs: KeyExpr, op: CmpOp, rhs: KeyExpr },
    Rel { atom: Atom, negated: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// Signed sum of key operands, e.g. `i - 1` or `c1 + c2`.
#[derive(Clone, Debug, PartialEq)]
pub struct KeyExpr {
    pub terms: Vec<(bool, KeyOperand)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KeyOperand {
    Name(String),
    Int(i64),
    Str(String),
}

impl Program {
    pub fn relation(&self, name: &str) -> Option<&RelDecl> {
        self.relations.iter().find(|r| r.name == name)
    }
}
