//! Finite key domains and sparse relations whose absent entries read as ⊥.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use log::info;
use thiserror::Error;

use crate::pops::{Pops, PopsError, PopsId, Value};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("relation {relation}: constant {constant} is not in domain {domain}")]
    Key { relation: String, constant: String, domain: String },
    #[error("relation {relation}: expected {expected} key columns, got {found}")]
    Arity { relation: String, expected: usize, found: usize },
    #[error("relation {relation}: {source}")]
    Carrier { relation: String, source: PopsError },
    #[error("{file}: row {row}, column {column}: {message}")]
    Parse { file: String, row: u64, column: usize, message: String },
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("unknown domain {0}")]
    UnknownDomain(String),
    #[error("schema mismatch: {0} vs {1}")]
    SchemaMismatch(String, String),
    #[error("{0} is not an EDB relation")]
    NotEdb(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A key constant: a symbol or a bounded integer.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constant {
    Int(i64),
    Sym(Arc<str>),
}

impl Constant {
    pub fn sym(s: &str) -> Constant {
        Constant::Sym(Arc::from(s))
    }

    /// Integers become `Int`, everything else a symbol.
    pub fn from_field(field: &str) -> Constant {
        match field.trim().parse::<i64>() {
            Ok(n) => Constant::Int(n),
            Err(_) => Constant::sym(field.trim()),
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Constant::Int(n) => Some(*n),
            Constant::Sym(_) => None,
        }
    }
}

pub(crate) fn is_plain_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Int(n) => write!(f, "{n}"),
            Constant::Sym(s) if is_plain_ident(s) => f.write_str(s),
            Constant::Sym(s) => write!(f, "{s:?}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DomainKind {
    Enumerated,
    /// Inclusive integer range.
    Range {
        lo: i64,
        hi: i64,
    },
    /// Collected from EDB data and program constants.
    Inferred,
}

#[derive(Clone, Debug)]
pub struct DomainTable {
    name: String,
    kind: DomainKind,
    elements: Vec<Constant>,
    index: HashMap<Constant, usize>,
}

impl DomainTable {
    fn build(name: &str, kind: DomainKind, elements: Vec<Constant>) -> DomainTable {
        let mut seen = Vec::with_capacity(elements.len());
        let mut index = HashMap::with_capacity(elements.len());
        for c in elements {
            if !index.contains_key(&c) {
                index.insert(c.clone(), seen.len());
                seen.push(c);
            }
        }
        DomainTable { name: name.to_string(), kind, elements: seen, index }
    }

    pub fn enumerated(name: &str, elements: Vec<Constant>) -> DomainTable {
        DomainTable::build(name, DomainKind::Enumerated, elements)
    }

    pub fn range(name: &str, lo: i64, hi: i64) -> DomainTable {
        DomainTable::build(name, DomainKind::Range { lo, hi }, (lo..=hi).map(Constant::Int).collect())
    }

    pub fn inferred(name: &str, elements: BTreeSet<Constant>) -> DomainTable {
        DomainTable::build(name, DomainKind::Inferred, elements.into_iter().collect())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn elements(&self) -> &[Constant] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, c: &Constant) -> bool {
        self.index.contains_key(c)
    }

    pub fn position(&self, c: &Constant) -> Option<usize> {
        self.index.get(c).copied()
    }

    /// Shifts an integer key, clamping at the range ends.
    pub fn shift(&self, c: &Constant, delta: i64) -> Option<Constant> {
        let DomainKind::Range { lo, hi } = self.kind else {
            return None;
        };
        let n = c.as_int()?;
        Some(Constant::Int(n.saturating_add(delta).clamp(lo, hi)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RelKind {
    Edb,
    Idb,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    pub name: String,
    pub key_domains: Vec<String>,
    pub pops: PopsId,
    pub kind: RelKind,
}

impl Schema {
    pub fn arity(&self) -> usize {
        self.key_domains.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Combine {
    Replace,
    Plus,
}

pub type Key = Vec<Constant>;

/// A sparse S-relation. No stored entry equals ⊥.
#[derive(Clone, Debug)]
pub struct Relation {
    schema: Arc<Schema>,
    pops: Pops,
    domains: Vec<Arc<DomainTable>>,
    entries: BTreeMap<Key, Value>,
}

impl Relation {
    pub fn new(schema: Arc<Schema>, domains: Vec<Arc<DomainTable>>) -> Result<Relation, StoreError> {
        if domains.len() != schema.arity() {
            return Err(StoreError::Arity {
                relation: schema.name.clone(),
                expected: schema.arity(),
                found: domains.len(),
            });
        }
        let pops = Pops::new(schema.pops.clone());
        Ok(Relation { schema, pops, domains, entries: BTreeMap::new() })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn pops(&self) -> &Pops {
        &self.pops
    }

    pub fn domains(&self) -> &[Arc<DomainTable>] {
        &self.domains
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Non-⊥ entries in key order.
    pub fn iter(&self) -> impl Iterator<Item = (&Key, &Value)> {
        self.entries.iter()
    }

    fn check_key(&self, key: &[Constant]) -> Result<(), StoreError> {
        if key.len() != self.domains.len() {
            return Err(StoreError::Arity {
                relation: self.schema.name.clone(),
                expected: self.domains.len(),
                found: key.len(),
            });
        }
        for (c, d) in key.iter().zip(&self.domains) {
            if !d.contains(c) {
                return Err(StoreError::Key {
                    relation: self.schema.name.clone(),
                    constant: c.to_string(),
                    domain: d.name().to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &[Constant]) -> Result<Value, StoreError> {
        self.check_key(key)?;
        Ok(self.entries.get(key).cloned().unwrap_or_else(|| self.pops.bottom()))
    }

    /// Lookup without domain checks, for keys already known to be in range.
    pub(crate) fn get_unchecked(&self, key: &[Constant]) -> Value {
        self.entries.get(key).cloned().unwrap_or_else(|| self.pops.bottom())
    }

    pub fn put_combine(&mut self, key: Key, v: Value, mode: Combine) -> Result<(), StoreError> {
        self.check_key(&key)?;
        let carrier = |source| StoreError::Carrier { relation: self.schema.name.clone(), source };
        self.pops.check(&v).map_err(carrier)?;
        let merged = match (mode, self.entries.get(&key)) {
            (Combine::Plus, Some(old)) => self.pops.plus(old, &v).map_err(carrier)?,
            _ => v,
        };
        if self.pops.is_bottom(&merged) {
            self.entries.remove(&key);
        } else {
            self.entries.insert(key, merged);
        }
        Ok(())
    }

    pub fn rel_equal(&self, other: &Relation) -> Result<bool, StoreError> {
        if self.schema != other.schema {
            return Err(StoreError::SchemaMismatch(self.schema.name.clone(), other.schema.name.clone()));
        }
        Ok(self.entries == other.entries)
    }

    /// Rows of key fields followed by the value, sorted by key.
    pub fn emit_table(&self) -> Vec<Vec<String>> {
        self.entries
            .iter()
            .map(|(k, v)| k.iter().map(Constant::to_string).chain(std::iter::once(v.to_string())).collect())
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), StoreError> {
        let mut w = csv::WriterBuilder::new().from_writer(out);
        let mut header: Vec<String> = (1..=self.schema.arity()).map(|i| format!("k{i}")).collect();
        header.push("value".into());
        w.write_record(&header)?;
        for row in self.emit_table() {
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Inserts raw text rows with ⊕-merge on duplicates.
    pub fn insert_rows(&mut self, file: &str, rows: &[RawRow]) -> Result<(), StoreError> {
        for row in rows {
            if row.keys.len() != self.schema.arity() {
                return Err(StoreError::Parse {
                    file: file.into(),
                    row: row.line,
                    column: row.keys.len() + 1,
                    message: format!("expected {} key columns then a value", self.schema.arity()),
                });
            }
            let key: Key = row.keys.iter().map(|k| Constant::from_field(k)).collect();
            let value = self.pops.parse_value(&row.value).map_err(|e| StoreError::Parse {
                file: file.into(),
                row: row.line,
                column: row.keys.len() + 1,
                message: e.to_string(),
            })?;
            self.put_combine(key, value, Combine::Plus)?;
        }
        Ok(())
    }
}

/// One data row before typing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawRow {
    pub line: u64,
    pub keys: Vec<String>,
    pub value: String,
}

/// Reads CSV or TSV rows. A first row whose last field is `value` is a header.
pub fn read_rows<R: Read>(reader: R, delimiter: u8) -> Result<Vec<RawRow>, StoreError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line());
        let fields: Vec<String> = rec.iter().map(str::to_string).collect();
        if i == 0 && fields.last().is_some_and(|f| f.eq_ignore_ascii_case("value")) {
            continue;
        }
        if fields.iter().all(String::is_empty) {
            continue;
        }
        let (value, keys) = fields.split_last().expect("csv records are non-empty");
        rows.push(RawRow { line, keys: keys.to_vec(), value: value.clone() });
    }
    Ok(rows)
}

/// Parses a table into a fresh relation with closed domains.
pub fn load_table<R: Read>(
    reader: R,
    schema: Arc<Schema>,
    domains: Vec<Arc<DomainTable>>,
    delimiter: u8,
) -> Result<Relation, StoreError> {
    let rows = read_rows(reader, delimiter)?;
    let mut rel = Relation::new(schema, domains)?;
    let name = rel.schema().name.clone();
    rel.insert_rows(&name, &rows)?;
    Ok(rel)
}

/// Domains plus the EDB relations of one program.
#[derive(Clone, Debug, Default)]
pub struct Database {
    domains: BTreeMap<String, Arc<DomainTable>>,
    relations: BTreeMap<String, Relation>,
}

impl Database {
    pub fn domain(&self, name: &str) -> Result<&Arc<DomainTable>, StoreError> {
        self.domains.get(name).ok_or_else(|| StoreError::UnknownDomain(name.into()))
    }

    pub fn domains(&self) -> impl Iterator<Item = &Arc<DomainTable>> {
        self.domains.values()
    }

    pub fn relation(&self, name: &str) -> Result<&Relation, StoreError> {
        self.relations.get(name).ok_or_else(|| StoreError::UnknownRelation(name.into()))
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.values()
    }

    pub fn insert_relation(&mut self, rel: Relation) {
        self.relations.insert(rel.schema().name.clone(), rel);
    }

    /// An empty relation with this schema's domains.
    pub fn empty_relation(&self, schema: &Schema) -> Result<Relation, StoreError> {
        let domains = schema.key_domains.iter().map(|d| self.domain(d).cloned()).collect::<Result<Vec<_>, _>>()?;
        Relation::new(Arc::new(schema.clone()), domains)
    }
}

/// Collects EDB rows, infers undeclared domains, then freezes a [`Database`].
#[derive(Debug)]
pub struct DatabaseBuilder {
    schemas: BTreeMap<String, Schema>,
    declared: BTreeMap<String, DomainTable>,
    rows: BTreeMap<String, Vec<(String, Vec<RawRow>)>>,
    extra: BTreeMap<String, BTreeSet<Constant>>,
    notices: Vec<String>,
}

impl DatabaseBuilder {
    pub fn new(schemas: impl IntoIterator<Item = Schema>, declared: impl IntoIterator<Item = DomainTable>) -> Self {
        DatabaseBuilder {
            schemas: schemas.into_iter().map(|s| (s.name.clone(), s)).collect(),
            declared: declared.into_iter().map(|d| (d.name().to_string(), d)).collect(),
            rows: BTreeMap::new(),
            extra: BTreeMap::new(),
            notices: Vec::new(),
        }
    }

    fn edb_schema(&self, relation: &str) -> Result<&Schema, StoreError> {
        let s = self.schemas.get(relation).ok_or_else(|| StoreError::UnknownRelation(relation.into()))?;
        if s.kind != RelKind::Edb {
            return Err(StoreError::NotEdb(relation.into()));
        }
        Ok(s)
    }

    pub fn add_rows(&mut self, relation: &str, source: &str, rows: Vec<RawRow>) -> Result<(), StoreError> {
        self.edb_schema(relation)?;
        self.rows.entry(relation.into()).or_default().push((source.into(), rows));
        Ok(())
    }

    /// Adds one fact given as text fields.
    pub fn add_fact(&mut self, relation: &str, keys: &[&str], value: &str) -> Result<(), StoreError> {
        let row = RawRow { line: 0, keys: keys.iter().map(|k| k.to_string()).collect(), value: value.into() };
        self.add_rows(relation, relation, vec![row])
    }

    pub fn load_file(&mut self, relation: &str, path: &Path) -> Result<(), StoreError> {
        let delimiter = if path.extension().is_some_and(|e| e == "tsv") { b'\t' } else { b',' };
        let rows = read_rows(std::fs::File::open(path)?, delimiter)?;
        self.add_rows(relation, &path.display().to_string(), rows)
    }

    /// Loads `<Name>.csv` or `<Name>.tsv` for every EDB; a missing file means an empty relation.
    pub fn load_dir(&mut self, dir: &Path) -> Result<(), StoreError> {
        let edbs: Vec<String> =
            self.schemas.values().filter(|s| s.kind == RelKind::Edb).map(|s| s.name.clone()).collect();
        for name in edbs {
            let csv = dir.join(format!("{name}.csv"));
            let tsv = dir.join(format!("{name}.tsv"));
            if csv.exists() {
                self.load_file(&name, &csv)?;
            } else if tsv.exists() {
                self.load_file(&name, &tsv)?;
            } else {
                self.notices.push(format!("no data file for EDB {name}; it is empty"));
            }
        }
        Ok(())
    }

    /// Registers a constant that must belong to an inferred domain (e.g. one named in a rule).
    pub fn note_constant(&mut self, domain: &str, c: Constant) {
        if !self.declared.contains_key(domain) {
            self.extra.entry(domain.into()).or_default().insert(c);
        }
    }

    pub fn build(self) -> Result<(Database, Vec<String>), StoreError> {
        let DatabaseBuilder { schemas, declared, rows, mut extra, mut notices } = self;
        for schema in schemas.values() {
            for (pos, dom) in schema.key_domains.iter().enumerate() {
                if declared.contains_key(dom) {
                    continue;
                }
                let set = extra.entry(dom.clone()).or_default();
                for (_, batch) in rows.get(&schema.name).into_iter().flatten() {
                    for row in batch {
                        if let Some(k) = row.keys.get(pos) {
                            set.insert(Constant::from_field(k));
                        }
                    }
                }
            }
        }
        let mut db = Database::default();
        for (name, d) in declared {
            db.domains.insert(name, Arc::new(d));
        }
        for (name, elems) in extra {
            let msg = format!("domain {name} inferred from data: {} constants", elems.len());
            info!("{msg}");
            notices.push(msg);
            db.domains.insert(name.clone(), Arc::new(DomainTable::inferred(&name, elems)));
        }
        for schema in schemas.values().filter(|s| s.kind == RelKind::Edb) {
            let mut rel = db.empty_relation(schema)?;
            for (source, batch) in rows.get(&schema.name).into_iter().flatten() {
                rel.insert_rows(source, batch)?;
            }
            db.insert_relation(rel);
        }
        Ok((db, notices))
    }
}
