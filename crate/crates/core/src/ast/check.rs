//! Name resolution, typing, safety, stratification and linearity.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use super::*;
use crate::pops::{Pops, UnaryFn, Value};
use crate::store::{Constant, DomainTable, Schema};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub span: SourceSpan,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev} at {}:{}: {}", self.span.line, self.span.col, self.message)
    }
}

pub type VarId = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct VarInfo {
    pub name: String,
    pub domain: Option<String>,
    pub range: Option<(i64, i64)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CKey {
    Var(VarId),
    Const(Constant),
    Shift(VarId, i64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Wrap {
    Plain,
    Cast,
    Apply(UnaryFn),
}

#[derive(Clone, Debug, PartialEq)]
pub enum CFactor {
    Rel { rel: String, args: Vec<CKey>, wrap: Wrap },
    Eq(CKey, CKey),
    Literal(Value),
    Key(CKey),
}

#[derive(Clone, Debug, PartialEq)]
pub enum CTerm {
    Product(Vec<CFactor>),
    Sum { binders: Vec<VarId>, body: CExpr, guard: Option<CCond> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CExpr {
    pub terms: Vec<CTerm>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CKeyExpr {
    pub terms: Vec<(bool, CKey)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CCondAtom {
    Cmp(CKeyExpr, CmpOp, CKeyExpr),
    Member { rel: String, args: Vec<CKey>, negated: bool },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CCond {
    pub atoms: Vec<CCondAtom>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CBody {
    Expr(CExpr),
    Cases { branches: Vec<(CCond, CExpr)>, otherwise: Option<CExpr> },
}

/// A rule after resolution: every identifier is a variable or a constant and
/// every factor is typed against the head's POPS.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckedRule {
    pub head_rel: String,
    pub head: Vec<CKey>,
    pub pops: Pops,
    pub vars: Vec<VarInfo>,
    pub body: CBody,
    pub span: SourceSpan,
    pub has_explicit_range: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stratum {
    pub idbs: Vec<String>,
    /// Indices into [`CheckedProgram::rules`].
    pub rules: Vec<usize>,
    pub linear: bool,
}

#[derive(Clone, Debug)]
pub struct CheckedProgram {
    pub program: Program,
    pub schemas: Vec<Schema>,
    pub declared_domains: Vec<DomainTable>,
    pub rules: Vec<CheckedRule>,
    pub strata: Vec<Stratum>,
    /// Symbolic constants named in rules, by domain; feeds domain inference.
    pub constants: Vec<(String, Constant)>,
    pub warnings: Vec<Diagnostic>,
}

impl CheckedProgram {
    pub fn schema(&self, name: &str) -> Option<&Schema> {
        self.schemas.iter().find(|s| s.name == name)
    }
}

/// All diagnostics for a program; empty means it is valid.
pub fn validate(program: &Program) -> Vec<Diagnostic> {
    match check(program) {
        Ok(c) => c.warnings,
        Err(d) => d,
    }
}

/// Strata of a valid program, in evaluation order.
pub fn stratify(program: &Program) -> Result<Vec<Stratum>, Vec<Diagnostic>> {
    check(program).map(|c| c.strata)
}

/// Whether every product in the stratum mentions at most one of its own IDBs.
pub fn classify_linear(program: &CheckedProgram, stratum: &Stratum) -> bool {
    let own: BTreeSet<&str> = stratum.idbs.iter().map(String::as_str).collect();
    stratum.rules.iter().all(|&r| body_exprs(&program.rules[r].body).all(|e| expr_linear(e, &own)))
}

fn body_exprs(body: &CBody) -> Box<dyn Iterator<Item = &CExpr> + '_> {
    match body {
        CBody::Expr(e) => Box::new(std::iter::once(e)),
        CBody::Cases { branches, otherwise } => Box::new(branches.iter().map(|(_, e)| e).chain(otherwise.iter())),
    }
}

fn expr_linear(e: &CExpr, own: &BTreeSet<&str>) -> bool {
    e.terms.iter().all(|t| match t {
        CTerm::Product(fs) => {
            fs.iter().filter(|f| matches!(f, CFactor::Rel { rel, .. } if own.contains(rel.as_str()))).count() <= 1
        }
        CTerm::Sum { body, .. } => expr_linear(body, own),
    })
}

/// Resolves, types and stratifies a program.
pub fn check(program: &Program) -> Result<CheckedProgram, Vec<Diagnostic>> {
    let mut cx = Checker::new(program);
    cx.declarations();
    let mut rules = Vec::new();
    for rule in &program.rules {
        if let Some(r) = cx.rule(rule) {
            rules.push(r);
        }
    }
    let strata = if cx.has_errors() { Vec::new() } else { cx.stratify(&rules) };
    if cx.has_errors() {
        let mut d = cx.diags;
        d.sort_by(|a, b| (a.severity, a.span.start, &a.message).cmp(&(b.severity, b.span.start, &b.message)));
        return Err(d);
    }
    let mut checked = CheckedProgram {
        program: program.clone(),
        schemas: cx.schemas.values().map(|(s, _)| s.clone()).collect(),
        declared_domains: cx.domains.values().map(|(d, _)| d.clone()).collect(),
        rules,
        strata,
        constants: cx.constants.into_iter().collect(),
        warnings: cx.diags,
    };
    checked.schemas.sort_by_key(|s| program.relations.iter().position(|r| r.name == s.name));
    for i in 0..checked.strata.len() {
        let linear = classify_linear(&checked, &checked.strata[i]);
        checked.strata[i].linear = linear;
    }
    Ok(checked)
}

struct Checker<'p> {
    program: &'p Program,
    diags: Vec<Diagnostic>,
    domains: BTreeMap<String, (DomainTable, SourceSpan)>,
    schemas: BTreeMap<String, (Schema, SourceSpan)>,
    constants: BTreeSet<(String, Constant)>,
}

/// Per-rule resolution state.
struct RuleScope {
    vars: Vec<VarInfo>,
    scopes: Vec<HashMap<String, VarId>>,
    /// Variable pairs forced equal by equalities; used for domain propagation.
    links: Vec<(VarId, VarId, SourceSpan)>,
    /// Symbolic constants whose domain is only known through a variable.
    pending_consts: Vec<(VarId, Constant, SourceSpan)>,
    shifted: Vec<(VarId, SourceSpan)>,
    integer_uses: Vec<(VarId, SourceSpan)>,
    explicit: bool,
}

impl RuleScope {
    fn lookup(&self, name: &str) -> Option<VarId> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }
}

impl<'p> Checker<'p> {
    fn new(program: &'p Program) -> Self {
        Checker {
            program,
            diags: Vec::new(),
            domains: BTreeMap::new(),
            schemas: BTreeMap::new(),
            constants: BTreeSet::new(),
        }
    }

    fn error(&mut self, span: SourceSpan, message: impl Into<String>) {
        self.diags.push(Diagnostic { severity: Severity::Error, message: message.into(), span });
    }

    fn warn(&mut self, span: SourceSpan, message: impl Into<String>) {
        self.diags.push(Diagnostic { severity: Severity::Warning, message: message.into(), span });
    }

    fn has_errors(&self) -> bool {
        self.diags.iter().any(|d| d.severity == Severity::Error)
    }

    fn declarations(&mut self) {
        for d in &self.program.domains {
            if self.domains.contains_key(&d.name) {
                self.error(d.span, format!("domain {} declared twice", d.name));
                continue;
            }
            let table = match &d.body {
                DomainBody::Enum(items) => {
                    let set: BTreeSet<&String> = items.iter().collect();
                    if set.len() != items.len() {
                        self.error(d.span, format!("domain {} lists a constant twice", d.name));
                    }
                    DomainTable::enumerated(&d.name, items.iter().map(|s| Constant::sym(s)).collect())
                }
                DomainBody::Range(lo, hi) => {
                    if lo > hi {
                        self.error(d.span, format!("domain {} has an empty range {lo}..{hi}", d.name));
                    }
                    DomainTable::range(&d.name, *lo, *hi)
                }
            };
            self.domains.insert(d.name.clone(), (table, d.span));
        }
        for r in &self.program.relations {
            if self.schemas.contains_key(&r.name) {
                self.error(r.span, format!("relation {} declared twice", r.name));
                continue;
            }
            let schema =
                Schema { name: r.name.clone(), key_domains: r.key_domains.clone(), pops: r.pops.clone(), kind: r.kind };
            self.schemas.insert(r.name.clone(), (schema, r.span));
        }
        let mut defined: BTreeSet<&str> = BTreeSet::new();
        for rule in &self.program.rules {
            defined.insert(&rule.head.rel);
        }
        let idle: Vec<(String, SourceSpan)> = self
            .schemas
            .values()
            .filter(|(s, _)| s.kind == RelKind::Idb && !defined.contains(s.name.as_str()))
            .map(|(s, span)| (s.name.clone(), *span))
            .collect();
        for (name, span) in idle {
            self.warn(span, format!("IDB {name} has no rules and stays at bottom"));
        }
    }

    fn range_of(&self, domain: &str) -> Option<(i64, i64)> {
        match self.domains.get(domain).map(|(d, _)| d.kind().clone()) {
            Some(crate::store::DomainKind::Range { lo, hi }) => Some((lo, hi)),
            _ => None,
        }
    }

    fn rule(&mut self, rule: &Rule) -> Option<CheckedRule> {
        let errors_before = self.diags.iter().filter(|d| d.severity == Severity::Error).count();
        let Some((schema, _)) = self.schemas.get(&rule.head.rel).cloned() else {
            self.error(rule.head.span, format!("undeclared relation {}", rule.head.rel));
            return None;
        };
        if schema.kind != RelKind::Idb {
            self.error(rule.head.span, format!("{} is an EDB and cannot head a rule", schema.name));
            return None;
        }
        if schema.arity() != rule.head.args.len() {
            self.error(
                rule.head.span,
                format!("{} expects {} arguments, got {}", schema.name, schema.arity(), rule.head.args.len()),
            );
            return None;
        }
        let pops = Pops::new(schema.pops.clone());
        let mut sc = RuleScope {
            vars: Vec::new(),
            scopes: vec![HashMap::new()],
            links: Vec::new(),
            pending_consts: Vec::new(),
            shifted: Vec::new(),
            integer_uses: Vec::new(),
            explicit: false,
        };
        let mut head = Vec::new();
        for (arg, dom) in rule.head.args.iter().zip(&schema.key_domains) {
            match arg {
                KeyTerm::Name(n) if sc.scopes[0].contains_key(n) => {
                    self.error(rule.head.span, format!("head variable {n} repeats; use an equality atom instead"));
                }
                KeyTerm::Name(n) => {
                    let id = sc.vars.len();
                    sc.vars.push(VarInfo { name: n.clone(), domain: Some(dom.clone()), range: None });
                    sc.scopes[0].insert(n.clone(), id);
                    head.push(CKey::Var(id));
                }
                KeyTerm::Int(v) => head.push(self.const_at(CKey::Const(Constant::Int(*v)), dom, rule.head.span)),
                KeyTerm::Str(s) => head.push(self.const_at(CKey::Const(Constant::sym(s)), dom, rule.head.span)),
                KeyTerm::Shift(..) => self.error(rule.head.span, "key functions are not allowed in rule heads"),
            }
        }
        let head_vars: Vec<VarId> = (0..sc.vars.len()).collect();
        let body = match &rule.body {
            RuleBody::Expr(e) => CBody::Expr(self.expr(e, &pops, &mut sc)),
            RuleBody::Cases { branches, otherwise } => {
                let mut out = Vec::new();
                for b in branches {
                    let cond = self.cond(&b.cond, &mut sc);
                    let body = self.expr(&b.body, &pops, &mut sc);
                    out.push((cond, body));
                }
                let otherwise = otherwise.as_ref().map(|e| self.expr(e, &pops, &mut sc));
                CBody::Cases { branches: out, otherwise }
            }
        };
        self.finish_domains(&mut sc, rule.span);
        let checked = CheckedRule {
            head_rel: schema.name.clone(),
            head,
            pops,
            vars: sc.vars,
            body,
            span: rule.span,
            has_explicit_range: sc.explicit,
        };
        self.safety(&checked, &head_vars);
        if let CBody::Cases { .. } = &checked.body {
            self.case_coverage(&checked);
        }
        let errors_after = self.diags.iter().filter(|d| d.severity == Severity::Error).count();
        (errors_after == errors_before).then_some(checked)
    }

    fn const_at(&mut self, key: CKey, domain: &str, span: SourceSpan) -> CKey {
        if let CKey::Const(c) = &key {
            match self.domains.get(domain) {
                Some((d, _)) if !d.contains(c) => {
                    self.error(span, format!("constant {c} is not in domain {domain}"));
                }
                Some(_) => {}
                None => {
                    self.constants.insert((domain.to_string(), c.clone()));
                }
            }
        }
        key
    }

    fn resolve(&mut self, term: &KeyTerm, sc: &mut RuleScope, span: SourceSpan) -> CKey {
        match term {
            KeyTerm::Name(n) => match sc.lookup(n) {
                Some(v) => CKey::Var(v),
                None => CKey::Const(Constant::sym(n)),
            },
            KeyTerm::Int(v) => CKey::Const(Constant::Int(*v)),
            KeyTerm::Str(s) => CKey::Const(Constant::sym(s)),
            KeyTerm::Shift(n, k) => match sc.lookup(n) {
                Some(v) => {
                    sc.shifted.push((v, span));
                    CKey::Shift(v, *k)
                }
                None => {
                    self.error(span, format!("key function applied to unbound name {n}"));
                    CKey::Const(Constant::sym(n))
                }
            },
        }
    }

    fn bind_domain(&mut self, sc: &mut RuleScope, v: VarId, domain: &str, span: SourceSpan) {
        match &sc.vars[v].domain {
            None => sc.vars[v].domain = Some(domain.to_string()),
            Some(d) if d == domain => {}
            Some(d) => {
                let msg = format!("variable {} is used with domains {d} and {domain}", sc.vars[v].name);
                self.error(span, msg);
            }
        }
    }

    fn atom_args(&mut self, atom: &Atom, sc: &mut RuleScope) -> Option<(Schema, Vec<CKey>)> {
        let Some((schema, _)) = self.schemas.get(&atom.rel).cloned() else {
            self.error(atom.span, format!("undeclared relation {}", atom.rel));
            return None;
        };
        if schema.arity() != atom.args.len() {
            self.error(
                atom.span,
                format!("{} expects {} arguments, got {}", schema.name, schema.arity(), atom.args.len()),
            );
            return None;
        }
        let mut args = Vec::new();
        for (t, dom) in atom.args.iter().zip(&schema.key_domains) {
            let k = self.resolve(t, sc, atom.span);
            match &k {
                CKey::Var(v) | CKey::Shift(v, _) => self.bind_domain(sc, *v, dom, atom.span),
                CKey::Const(_) => {
                    self.const_at(k.clone(), dom, atom.span);
                }
            }
            args.push(k);
        }
        Some((schema, args))
    }

    fn expr(&mut self, e: &Expr, pops: &Pops, sc: &mut RuleScope) -> CExpr {
        let mut terms = Vec::new();
        for t in &e.terms {
            match t {
                Term::Product { factors, .. } => {
                    let fs = factors.iter().filter_map(|f| self.factor(f, pops, sc)).collect();
                    terms.push(CTerm::Product(fs));
                }
                Term::Sum(s) => {
                    let mut scope = HashMap::new();
                    let mut binders = Vec::new();
                    for b in &s.binders {
                        if sc.lookup(&b.name).is_some() || scope.contains_key(&b.name) {
                            self.error(b.span, format!("sum variable {} shadows another variable", b.name));
                            continue;
                        }
                        if let Some((lo, hi)) = b.range {
                            sc.explicit = true;
                            if lo > hi {
                                self.error(b.span, format!("empty range {lo}..{hi}"));
                            }
                        }
                        let id = sc.vars.len();
                        sc.vars.push(VarInfo { name: b.name.clone(), domain: None, range: b.range });
                        scope.insert(b.name.clone(), id);
                        binders.push(id);
                    }
                    sc.scopes.push(scope);
                    let body = self.expr(&s.body, pops, sc);
                    let guard = s.guard.as_ref().map(|g| self.cond(g, sc));
                    sc.scopes.pop();
                    terms.push(CTerm::Sum { binders, body, guard });
                }
            }
        }
        CExpr { terms }
    }

    fn factor(&mut self, f: &Factor, pops: &Pops, sc: &mut RuleScope) -> Option<CFactor> {
        match f {
            Factor::Atom(a) => {
                let (schema, args) = self.atom_args(a, sc)?;
                if schema.pops != *pops.id() {
                    self.error(
                        a.span,
                        format!(
                            "{} holds {} values but the rule is over {}; use a cast or a registered function",
                            schema.name,
                            schema.pops,
                            pops.id()
                        ),
                    );
                    return None;
                }
                Some(CFactor::Rel { rel: schema.name, args, wrap: Wrap::Plain })
            }
            Factor::Cast(a) => {
                let (schema, args) = self.atom_args(a, sc)?;
                if schema.pops != crate::pops::PopsId::Bool {
                    self.error(a.span, format!("cast source {} must be bool, found {}", schema.name, schema.pops));
                    return None;
                }
                Some(CFactor::Rel { rel: schema.name, args, wrap: Wrap::Cast })
            }
            Factor::Apply { func, params, atom, span } => {
                let f = match UnaryFn::lookup(func, params) {
                    Ok(f) => f,
                    Err(e) => {
                        self.error(*span, e.to_string());
                        return None;
                    }
                };
                let (schema, args) = self.atom_args(atom, sc)?;
                if !f.accepts(&schema.pops) || f.output(&schema.pops) != *pops.id() {
                    self.error(
                        *span,
                        format!("{f} cannot map {} values of {} into {}", schema.pops, schema.name, pops.id()),
                    );
                    return None;
                }
                Some(CFactor::Rel { rel: schema.name, args, wrap: Wrap::Apply(f) })
            }
            Factor::Literal { value, span } => match pops.from_literal(value) {
                Ok(v) => Some(CFactor::Literal(v)),
                Err(e) => {
                    self.error(*span, format!("literal does not fit {}: {e}", pops.id()));
                    None
                }
            },
            Factor::Key { term, span } => {
                let k = self.resolve(term, sc, *span);
                if pops.from_int(0).is_err() {
                    self.error(*span, format!("keys cannot be used as {} values", pops.id()));
                    return None;
                }
                match &k {
                    CKey::Var(v) => sc.integer_uses.push((*v, *span)),
                    CKey::Const(Constant::Int(n)) => {
                        if let Err(e) = pops.from_int(*n) {
                            self.error(*span, e.to_string());
                        }
                    }
                    _ => {
                        self.error(*span, format!("{} is not an integer key", PlainTerm(term)));
                        return None;
                    }
                }
                Some(CFactor::Key(k))
            }
            Factor::Eq { var, rhs, span } => {
                let Some(v) = sc.lookup(var) else {
                    self.error(*span, format!("{var} is not a variable in scope"));
                    return None;
                };
                let r = self.resolve(rhs, sc, *span);
                match &r {
                    CKey::Var(w) | CKey::Shift(w, _) => sc.links.push((v, *w, *span)),
                    CKey::Const(c) => sc.pending_consts.push((v, c.clone(), *span)),
                }
                Some(CFactor::Eq(CKey::Var(v), r))
            }
        }
    }

    fn cond(&mut self, c: &Cond, sc: &mut RuleScope) -> CCond {
        let mut atoms = Vec::new();
        for a in &c.atoms {
            match a {
                CondAtom::Rel { atom, negated } => {
                    let Some((schema, args)) = self.atom_args(atom, sc) else {
                        continue;
                    };
                    if schema.pops != crate::pops::PopsId::Bool {
                        self.error(atom.span, format!("condition atom {} must be bool", schema.name));
                        continue;
                    }
                    atoms.push(CCondAtom::Member { rel: schema.name, args, negated: *negated });
                }
                CondAtom::Cmp { lhs, op, rhs } => {
                    let l = self.key_expr(lhs, sc, c.span);
                    let r = self.key_expr(rhs, sc, c.span);
                    let arithmetic = !matches!(op, CmpOp::Eq | CmpOp::Ne) || l.terms.len() > 1 || r.terms.len() > 1;
                    for (pos, k) in l.terms.iter().chain(&r.terms) {
                        match k {
                            CKey::Var(v) if arithmetic || !pos => sc.integer_uses.push((*v, c.span)),
                            CKey::Const(Constant::Sym(s)) if arithmetic => {
                                self.error(c.span, format!("symbol {s} used in integer arithmetic"));
                            }
                            _ => {}
                        }
                    }
                    if *op == CmpOp::Eq {
                        match (l.terms.as_slice(), r.terms.as_slice()) {
                            ([(true, CKey::Var(a))], [(true, CKey::Var(b))]) => sc.links.push((*a, *b, c.span)),
                            ([(true, CKey::Var(a))], [(true, CKey::Const(k))])
                            | ([(true, CKey::Const(k))], [(true, CKey::Var(a))]) => {
                                sc.pending_consts.push((*a, k.clone(), c.span))
                            }
                            _ => {}
                        }
                    }
                    atoms.push(CCondAtom::Cmp(l, *op, r));
                }
            }
        }
        CCond { atoms }
    }

    fn key_expr(&mut self, e: &KeyExpr, sc: &mut RuleScope, span: SourceSpan) -> CKeyExpr {
        let terms = e
            .terms
            .iter()
            .map(|(pos, op)| {
                let k = match op {
                    KeyOperand::Name(n) => self.resolve(&KeyTerm::Name(n.clone()), sc, span),
                    KeyOperand::Int(n) => CKey::Const(Constant::Int(*n)),
                    KeyOperand::Str(s) => CKey::Const(Constant::sym(s)),
                };
                (*pos, k)
            })
            .collect();
        CKeyExpr { terms }
    }

    /// Propagates domains along equalities and checks integer-only uses.
    fn finish_domains(&mut self, sc: &mut RuleScope, span: SourceSpan) {
        loop {
            let mut changed = false;
            for (a, b, s) in sc.links.clone() {
                match (sc.vars[a].domain.clone(), sc.vars[b].domain.clone()) {
                    (Some(d), None) => {
                        sc.vars[b].domain = Some(d);
                        changed = true;
                    }
                    (None, Some(d)) => {
                        sc.vars[a].domain = Some(d);
                        changed = true;
                    }
                    (Some(d), Some(e)) if d != e => {
                        let msg = format!(
                            "{} ({d}) and {} ({e}) are compared across domains",
                            sc.vars[a].name, sc.vars[b].name
                        );
                        self.error(s, msg);
                        sc.links.retain(|(x, y, _)| (*x, *y) != (a, b));
                    }
                    _ => {}
                }
            }
            if !changed {
                break;
            }
        }
        for (v, c, s) in std::mem::take(&mut sc.pending_consts) {
            if let Some(d) = sc.vars[v].domain.clone() {
                self.const_at(CKey::Const(c), &d, s);
            }
        }
        for i in 0..sc.vars.len() {
            let info = sc.vars[i].clone();
            match (&info.domain, info.range) {
                (None, None) => self.error(span, format!("cannot determine the domain of variable {}", info.name)),
                (Some(d), Some((lo, hi))) => match self.range_of(d) {
                    Some((dlo, dhi)) if dlo <= lo && hi <= dhi => {}
                    Some(_) => self.error(span, format!("range {lo}..{hi} of {} lies outside domain {d}", info.name)),
                    None => {
                        self.error(span, format!("explicit range on {} but {d} is not an integer range", info.name))
                    }
                },
                _ => {}
            }
        }
        let integer = |cx: &Self, v: &VarInfo| {
            v.range.is_some() && v.domain.is_none() || v.domain.as_deref().is_some_and(|d| cx.range_of(d).is_some())
        };
        for (v, s) in sc.shifted.clone().into_iter().chain(sc.integer_uses.clone()) {
            if !integer(self, &sc.vars[v]) {
                let msg = format!("variable {} needs an integer range domain here", sc.vars[v].name);
                self.error(s, msg);
            }
        }
    }

    fn safety(&mut self, rule: &CheckedRule, head_vars: &[VarId]) {
        let mut unsafe_vars = BTreeSet::new();
        let mut visit = |expr: &CExpr, ctx: &[&CCond]| {
            let mut products = Vec::new();
            collect_products(expr, ctx.to_vec(), &mut products);
            for (factors, conds) in products {
                let bound = bound_vars(&factors, &conds);
                for v in head_vars {
                    if !bound.contains(v) {
                        unsafe_vars.insert(*v);
                    }
                }
            }
        };
        match &rule.body {
            CBody::Expr(e) => visit(e, &[]),
            CBody::Cases { branches, otherwise } => {
                for (c, e) in branches {
                    visit(e, &[c]);
                }
                if let Some(e) = otherwise {
                    visit(e, &[]);
                }
            }
        }
        for v in unsafe_vars {
            self.error(
                rule.span,
                format!(
                    "unsafe rule for {}: head variable {} is missing from a relational atom of some product",
                    rule.head_rel, rule.vars[v].name
                ),
            );
        }
    }

    /// Enumerates head keys when all head domains are declared and reports
    /// overlapping or uncovered branches.
    fn case_coverage(&mut self, rule: &CheckedRule) {
        let CBody::Cases { branches, otherwise } = &rule.body else {
            return;
        };
        let uses_data = branches.iter().any(|(c, _)| c.atoms.iter().any(|a| matches!(a, CCondAtom::Member { .. })));
        if uses_data {
            return;
        }
        let mut doms = Vec::new();
        for k in &rule.head {
            if let CKey::Var(v) = k {
                match rule.vars[*v].domain.as_ref().and_then(|d| self.domains.get(d)) {
                    Some((d, _)) => doms.push((*v, d.elements().to_vec())),
                    None => return,
                }
            }
        }
        let total: usize = doms.iter().map(|(_, e)| e.len()).product();
        if total > 100_000 {
            return;
        }
        let mut env: HashMap<VarId, Constant> = HashMap::new();
        let mut idx = vec![0usize; doms.len()];
        for _ in 0..total {
            for (slot, (v, elems)) in doms.iter().enumerate() {
                env.insert(*v, elems[idx[slot]].clone());
            }
            let hits = branches.iter().filter(|(c, _)| eval_static_cond(c, &env) == Some(true)).count();
            let shown = || doms.iter().map(|(v, _)| env[v].to_string()).collect::<Vec<_>>().join(",");
            if hits > 1 {
                let msg = format!("case branches of {} overlap at ({})", rule.head_rel, shown());
                self.error(rule.span, msg);
                return;
            }
            if hits == 0 && otherwise.is_none() {
                let msg = format!("no case branch of {} covers ({}) and there is no else", rule.head_rel, shown());
                self.error(rule.span, msg);
                return;
            }
            for slot in (0..idx.len()).rev() {
                idx[slot] += 1;
                if idx[slot] < doms[slot].1.len() {
                    break;
                }
                idx[slot] = 0;
            }
        }
    }

    fn stratify(&mut self, rules: &[CheckedRule]) -> Vec<Stratum> {
        let idbs: Vec<String> =
            self.program.relations.iter().filter(|r| r.kind == RelKind::Idb).map(|r| r.name.clone()).collect();
        let index: HashMap<&str, usize> = idbs.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let n = idbs.len();
        let mut deps: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        let mut forcing: Vec<(usize, usize, SourceSpan)> = Vec::new();
        for rule in rules {
            let h = index[rule.head_rel.as_str()];
            let mut reads = Vec::new();
            let mut guarded = Vec::new();
            body_relations(&rule.body, &mut reads, &mut guarded);
            for r in reads {
                if let Some(&b) = index.get(r.as_str()) {
                    deps[h].insert(b);
                }
            }
            for r in guarded {
                if let Some(&b) = index.get(r.as_str()) {
                    deps[h].insert(b);
                    forcing.push((h, b, rule.span));
                }
            }
        }
        let comps = tarjan(n, &deps);
        let mut comp_of = vec![0usize; n];
        for (ci, c) in comps.iter().enumerate() {
            for &v in c {
                comp_of[v] = ci;
            }
        }
        for (h, b, span) in forcing {
            if comp_of[h] == comp_of[b] {
                self.error(
                    span,
                    format!("{} reads {} in a condition but they are mutually recursive", idbs[h], idbs[b]),
                );
            }
        }
        // Tarjan emits components in reverse topological order of the dependency edges,
        // i.e. dependencies first.
        comps
            .into_iter()
            .map(|mut c| {
                c.sort_unstable();
                let names: Vec<String> = c.iter().map(|&i| idbs[i].clone()).collect();
                let members: BTreeSet<&str> = names.iter().map(String::as_str).collect();
                let rule_ids =
                    rules.iter().enumerate().filter(|(_, r)| members.contains(r.head_rel.as_str())).map(|(i, _)| i);
                Stratum { rules: rule_ids.collect(), idbs: names, linear: false }
            })
            .collect()
    }
}

struct PlainTerm<'a>(&'a KeyTerm);

impl fmt::Display for PlainTerm<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            KeyTerm::Name(n) | KeyTerm::Str(n) => f.write_str(n),
            KeyTerm::Int(n) => write!(f, "{n}"),
            KeyTerm::Shift(n, k) => write!(f, "{n}{k:+}"),
        }
    }
}

fn collect_products<'a>(e: &'a CExpr, ctx: Vec<&'a CCond>, out: &mut Vec<(Vec<&'a CFactor>, Vec<&'a CCond>)>) {
    for t in &e.terms {
        match t {
            CTerm::Product(fs) => out.push((fs.iter().collect(), ctx.clone())),
            CTerm::Sum { body, guard, .. } => {
                let mut inner = ctx.clone();
                inner.extend(guard.iter());
                collect_products(body, inner, out);
            }
        }
    }
}

/// Variables bound by relational atoms, closed under equalities.
fn bound_vars(factors: &[&CFactor], conds: &[&CCond]) -> BTreeSet<VarId> {
    let mut bound = BTreeSet::new();
    let add_keys = |args: &[CKey], bound: &mut BTreeSet<VarId>| {
        for a in args {
            if let CKey::Var(v) | CKey::Shift(v, _) = a {
                bound.insert(*v);
            }
        }
    };
    let mut eqs: Vec<(Vec<VarId>, Vec<VarId>)> = Vec::new();
    for f in factors {
        match f {
            CFactor::Rel { args, .. } => add_keys(args, &mut bound),
            CFactor::Eq(CKey::Var(a), rhs) => match rhs {
                CKey::Const(_) => eqs.push((vec![*a], vec![])),
                CKey::Var(b) | CKey::Shift(b, _) => {
                    eqs.push((vec![*a], vec![*b]));
                    eqs.push((vec![*b], vec![*a]));
                }
            },
            _ => {}
        }
    }
    for c in conds {
        for a in &c.atoms {
            match a {
                CCondAtom::Member { args, negated: false, .. } => add_keys(args, &mut bound),
                CCondAtom::Cmp(l, CmpOp::Eq, r) => {
                    let vars = |e: &CKeyExpr| {
                        e.terms.iter().filter_map(|(_, k)| if let CKey::Var(v) = k { Some(*v) } else { None }).collect()
                    };
                    let (lv, rv): (Vec<VarId>, Vec<VarId>) = (vars(l), vars(r));
                    if l.terms.len() == 1 && lv.len() == 1 {
                        eqs.push((lv.clone(), rv.clone()));
                    }
                    if r.terms.len() == 1 && rv.len() == 1 {
                        eqs.push((rv, lv));
                    }
                }
                _ => {}
            }
        }
    }
    loop {
        let before = bound.len();
        for (target, sources) in &eqs {
            if sources.iter().all(|s| bound.contains(s)) {
                bound.extend(target.iter().copied());
            }
        }
        if bound.len() == before {
            return bound;
        }
    }
}

fn body_relations(body: &CBody, reads: &mut Vec<String>, guarded: &mut Vec<String>) {
    fn cond(c: &CCond, guarded: &mut Vec<String>) {
        for a in &c.atoms {
            if let CCondAtom::Member { rel, .. } = a {
                guarded.push(rel.clone());
            }
        }
    }
    fn expr(e: &CExpr, reads: &mut Vec<String>, guarded: &mut Vec<String>) {
        for t in &e.terms {
            match t {
                CTerm::Product(fs) => {
                    for f in fs {
                        if let CFactor::Rel { rel, .. } = f {
                            reads.push(rel.clone());
                        }
                    }
                }
                CTerm::Sum { body, guard, .. } => {
                    expr(body, reads, guarded);
                    if let Some(g) = guard {
                        cond(g, guarded);
                    }
                }
            }
        }
    }
    match body {
        CBody::Expr(e) => expr(e, reads, guarded),
        CBody::Cases { branches, otherwise } => {
            for (c, e) in branches {
                cond(c, guarded);
                expr(e, reads, guarded);
            }
            if let Some(e) = otherwise {
                expr(e, reads, guarded);
            }
        }
    }
}

/// Strongly connected components, dependencies before dependents.
fn tarjan(n: usize, deps: &[BTreeSet<usize>]) -> Vec<Vec<usize>> {
    struct St<'a> {
        deps: &'a [BTreeSet<usize>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }
    fn visit(s: &mut St<'_>, v: usize) {
        s.index[v] = Some(s.next);
        s.low[v] = s.next;
        s.next += 1;
        s.stack.push(v);
        s.on[v] = true;
        for &w in s.deps[v].iter() {
            match s.index[w] {
                None => {
                    visit(s, w);
                    s.low[v] = s.low[v].min(s.low[w]);
                }
                Some(iw) if s.on[w] => s.low[v] = s.low[v].min(iw),
                _ => {}
            }
        }
        if Some(s.low[v]) == s.index[v] {
            let mut comp = Vec::new();
            while let Some(w) = s.stack.pop() {
                s.on[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            s.out.push(comp);
        }
    }
    let mut s = St {
        deps,
        index: vec![None; n],
        low: vec![0; n],
        on: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if s.index[v].is_none() {
            visit(&mut s, v);
        }
    }
    s.out
}

/// Evaluates key-only conditions; `None` if a relation atom or unbound variable appears.
pub(crate) fn eval_static_cond(c: &CCond, env: &HashMap<VarId, Constant>) -> Option<bool> {
    for a in &c.atoms {
        let CCondAtom::Cmp(l, op, r) = a else {
            return None;
        };
        if !compare_keys(l, *op, r, env)? {
            return Some(false);
        }
    }
    Some(true)
}

pub(crate) fn compare_keys(l: &CKeyExpr, op: CmpOp, r: &CKeyExpr, env: &HashMap<VarId, Constant>) -> Option<bool> {
    let value = |e: &CKeyExpr| -> Option<Constant> {
        if let [(true, k)] = e.terms.as_slice() {
            return key_value(k, env);
        }
        let mut acc: i64 = 0;
        for (pos, k) in &e.terms {
            let n = key_value(k, env)?.as_int()?;
            acc = if *pos { acc.checked_add(n)? } else { acc.checked_sub(n)? };
        }
        Some(Constant::Int(acc))
    };
    let (a, b) = (value(l)?, value(r)?);
    Some(match op {
        CmpOp::Eq => a == b,
        CmpOp::Ne => a != b,
        _ => {
            let (x, y) = (a.as_int()?, b.as_int()?);
            match op {
                CmpOp::Lt => x < y,
                CmpOp::Le => x <= y,
                CmpOp::Gt => x > y,
                _ => x >= y,
            }
        }
    })
}

fn key_value(k: &CKey, env: &HashMap<VarId, Constant>) -> Option<Constant> {
    match k {
        CKey::Var(v) => env.get(v).cloned(),
        CKey::Const(c) => Some(c.clone()),
        CKey::Shift(v, d) => env.get(v)?.as_int().and_then(|n| n.checked_add(*d)).map(Constant::Int),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    const APSP: &str = "domain node = {a,b,c,d}.\nedb E(node,node): tropplus.\nidb P(node,node): tropplus.\n\
                        P(x,y) :- E(x,y) + sum(z){ P(x,z) * E(z,y) }.";

    fn checked(src: &str) -> CheckedProgram {
        check(&parse(src).unwrap()).unwrap_or_else(|d| panic!("{d:?}"))
    }

    fn errors(src: &str) -> Vec<String> {
        validate(&parse(src).unwrap())
            .into_iter()
            .filter(|d| d.severity == Severity::Error)
            .map(|d| d.message)
            .collect()
    }

    #[test]
    fn apsp_is_clean_and_linear() {
        assert!(validate(&parse(APSP).unwrap()).is_empty());
        let c = checked(APSP);
        assert_eq!(c.strata.len(), 1);
        assert!(c.strata[0].linear);
    }

    #[test]
    fn unsafe_product_is_reported() {
        let src = "domain n = {a,b}.\nedb E(n,n): bool.\nidb T(n,n): bool.\nT(x,y) :- E(x,y) + E(x,x).";
        let errs = errors(src);
        assert!(errs.iter().any(|e| e.contains("unsafe") && e.contains("head variable y")), "{errs:?}");
    }

    #[test]
    fn mixed_pops_needs_cast() {
        let src = "domain n = {a,b}.\nedb R(n): bool.\nedb E(n,n): trop.\nidb T(n): trop.\n\
                   T(x) :- sum(y){ E(x,y) * R(y) }.";
        let errs = errors(src);
        assert!(errs.iter().any(|e| e.contains("use a cast")), "{errs:?}");
        let fixed = src.replace("* R(y)", "* [R(y)]");
        assert!(errors(&fixed).is_empty());
    }

    #[test]
    fn strata_of_extraction_program() {
        let src = "domain node = {a,b,c}.\ndomain cost = 0..6.\nedb E(node,node,cost): bool.\n\
                   idb R(node,node,cost): bool.\nidb T(node,node): tropplus.\n\
                   R(x,y,c) :- E(x,y,c) + sum(z,c1,c2){ E(x,z,c1) * R(z,y,c2) | c = c1 + c2 }.\n\
                   T(x,y) :- sum(c){ [R(x,y,c)] * c }.";
        let c = checked(src);
        let names: Vec<Vec<String>> = c.strata.iter().map(|s| s.idbs.clone()).collect();
        assert_eq!(names, vec![vec!["R".to_string()], vec!["T".to_string()]]);
    }

    #[test]
    fn company_control_is_one_stratum() {
        let src = "domain co = {a,b,c}.\nedb S(co,co): nnrat.\nidb CV(co,co,co): nnrat.\n\
                   idb T(co,co): nnrat.\nidb C(co,co): bool.\n\
                   CV(x,z,y) :- [z = x] * S(x,y) + [C(x,z)] * S(z,y).\n\
                   T(x,y) :- sum(z){ CV(x,z,y) }.\nC(x,y) :- threshold(1/2, T(x,y)).";
        let c = checked(src);
        assert_eq!(c.strata.len(), 1);
        assert_eq!(c.strata[0].idbs, vec!["CV", "T", "C"]);
    }

    #[test]
    fn quadratic_closure_is_not_linear() {
        let src = "domain n = {a,b}.\nedb E(n,n): bool.\nidb T(n,n): bool.\n\
                   T(x,y) :- E(x,y) + sum(z){ T(x,z) * T(z,y) }.";
        assert!(!checked(src).strata[0].linear);
        let nonrec = "domain n = {a,b}.\nedb E(n,n): bool.\nidb T(n,n): bool.\nT(x,y) :- E(x,y).";
        assert!(checked(nonrec).strata[0].linear);
    }

    #[test]
    fn guards_on_recursive_relations_are_rejected() {
        let src = "domain n = {a,b}.\nedb E(n,n): bool.\nidb T(n,n): bool.\n\
                   T(x,y) :- E(x,y) + sum(z){ E(z,y) | T(x,z) }.";
        let errs = errors(src);
        assert!(errs.iter().any(|e| e.contains("mutually recursive")), "{errs:?}");
    }

    #[test]
    fn case_coverage_is_checked() {
        let base = "domain idx = 0..4.\nedb V(idx): real_bot.\nidb W(idx): real_bot.\n";
        assert!(errors(&format!("{base}W(i) :- case i = 0 : V(0) ; else : W(i-1) + V(i).")).is_empty());
        let gap = errors(&format!("{base}W(i) :- case i = 0 : V(0) ; i > 1 : W(i-1) + V(i)."));
        assert!(gap.iter().any(|e| e.contains("no case branch")), "{gap:?}");
        let overlap = errors(&format!("{base}W(i) :- case i < 2 : V(i) ; i > 0 : W(i-1) + V(i) ; else : V(i)."));
        assert!(overlap.iter().any(|e| e.contains("overlap")), "{overlap:?}");
    }

    #[test]
    fn misc_diagnostics() {
        let base = "domain n = {a,b}.\ndomain idx = 0..3.\nedb E(n,n): bool.\nidb T(n): bool.\n";
        assert!(!errors(&format!("{base}T(x) :- E(x,y).")).is_empty());
        assert!(!errors(&format!("{base}T(x) :- E(x,q) * [x = zz].")).is_empty());
        assert!(!errors(&format!("{base}T(x) :- E(x,x,x).")).is_empty());
        assert!(!errors(&format!("{base}E(x,y) :- T(x) * T(y).")).is_empty());
        assert!(!errors(&format!("{base}T(x) :- sum(y in 0..9){{ E(x,y) }}.")).is_empty());
        assert!(!errors(&format!("{base}T(x) :- E(x-1,x).")).is_empty());
        assert!(!errors(&format!("{base}T(x) :- E(x,x) * 3.")).is_empty());
        assert!(!errors(&format!("{base}T(x) :- sum(x){{ E(x,x) }}.")).is_empty());
        assert!(!errors(&format!("{base}T(x) :- E(x,x) * Q(x).")).is_empty());
        assert!(!errors(&format!("{base}T(x) :- E(x,x) * sqrt(E(x,x)).")).is_empty());
        assert!(errors(&format!("{base}T(x) :- E(x,x) * true.")).is_empty());
    }

    #[test]
    fn rule_order_does_not_change_diagnostics() {
        let a = "domain n = {a,b}.\nedb E(n,n): bool.\nidb T(n,n): bool.\nidb U(n): bool.\n\
                 T(x,y) :- E(x,y) + E(x,x).\nU(x) :- E(x,x) * 3/2.";
        let b = "domain n = {a,b}.\nedb E(n,n): bool.\nidb T(n,n): bool.\nidb U(n): bool.\n\
                 U(x) :- E(x,x) * 3/2.\nT(x,y) :- E(x,y) + E(x,x).";
        let mut da = errors(a);
        let mut db = errors(b);
        da.sort();
        db.sort();
        assert_eq!(da, db);
        assert_eq!(da.len(), 2);
    }
}
