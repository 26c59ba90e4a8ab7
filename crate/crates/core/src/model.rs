//! Terms, quads, patterns and queries, plus the canonical text encoding that
//! every hash in the repository is computed over.
//!
//! Encoding rules:
//!
//! * atom `name` is written `<name>`, with `name` in `[A-Za-z0-9_:./#+-]+`
//! * literal text is written `"text"` with `\\`, `\"` and `\n` escaped
//! * variable `name` is written `?name`, with `name` in `[A-Za-z0-9_]+`
//! * a principal is written `@name` using the atom alphabet
//!
//! A fact line is `subject SP predicate SP object SP @author`. A fact set
//! serializes as its fact lines sorted bytewise, each terminated by `\n`.

use std::collections::{btree_set, BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

/// Maximum number of patterns in one query.
pub const MAX_PATTERNS: usize = 16;

fn is_atom_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | ':' | '.' | '/' | '#' | '+' | '-')
}

fn is_var_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// A graph node or edge label.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom(String);

impl Atom {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || !name.chars().all(is_atom_char) {
            return Err(Error::InvalidTerm(format!("bad atom name {name:?}")));
        }
        Ok(Atom(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A query variable, without the leading `?`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variable(String);

impl Variable {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || !name.chars().all(is_var_char) {
            return Err(Error::InvalidTerm(format!("bad variable name {name:?}")));
        }
        Ok(Variable(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

/// Identity of an owner, follower or service. Shares the atom alphabet.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Principal(String);

impl Principal {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || !name.chars().all(is_atom_char) {
            return Err(Error::InvalidTerm(format!("bad principal name {name:?}")));
        }
        Ok(Principal(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn to_atom(&self) -> Atom {
        Atom(self.0.clone())
    }
}

impl From<Atom> for Principal {
    fn from(a: Atom) -> Self {
        Principal(a.0)
    }
}

impl fmt::Display for Principal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Atom(Atom),
    Literal(String),
    Variable(Variable),
}

impl Term {
    pub fn atom(name: impl Into<String>) -> Result<Self> {
        Atom::new(name).map(Term::Atom)
    }

    pub fn literal(value: impl Into<String>) -> Self {
        Term::Literal(value.into())
    }

    pub fn var(name: impl Into<String>) -> Result<Self> {
        Variable::new(name).map(Term::Variable)
    }

    pub fn is_ground(&self) -> bool {
        !matches!(self, Term::Variable(_))
    }

    pub fn as_variable(&self) -> Option<&Variable> {
        match self {
            Term::Variable(v) => Some(v),
            _ => None,
        }
    }

    /// Canonical encoding of this term.
    pub fn encode(&self) -> String {
        let mut out = String::new();
        self.encode_into(&mut out);
        out
    }

    fn encode_into(&self, out: &mut String) {
        match self {
            Term::Atom(a) => {
                out.push('<');
                out.push_str(&a.0);
                out.push('>');
            }
            Term::Literal(s) => push_quoted(out, s),
            Term::Variable(v) => {
                out.push('?');
                out.push_str(&v.0);
            }
        }
    }

    /// Parses a single encoded term, the inverse of [`Term::encode`].
    pub fn decode(text: &str) -> Result<Self> {
        let mut lexer = Lexer::new(text);
        let term = match lexer.next_token().map_err(Error::InvalidTerm)? {
            Some(Token::Term(t)) => t,
            _ => return Err(Error::InvalidTerm(format!("no term in {text:?}"))),
        };
        match lexer.next_token().map_err(Error::InvalidTerm)? {
            None => Ok(term),
            Some(_) => Err(Error::InvalidTerm(format!("trailing input in {text:?}"))),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

/// Writes `s` as a quoted, escaped literal.
pub fn push_quoted(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
}

/// Byte encoding of a term.
pub fn encode_term(t: &Term) -> Vec<u8> {
    t.encode().into_bytes()
}

/// One ground assertion. Identity is the full four-tuple.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quad {
    subject: Atom,
    predicate: Atom,
    object: Term,
    author: Principal,
}

impl Quad {
    pub fn new(subject: Atom, predicate: Atom, object: Term, author: Principal) -> Result<Self> {
        if !object.is_ground() {
            return Err(Error::InvalidTerm(format!(
                "variable {object} in quad object position"
            )));
        }
        Ok(Quad {
            subject,
            predicate,
            object,
            author,
        })
    }

    /// Builds a quad from atom names; `object` is parsed with [`Term::decode`]
    /// when it starts with `<` or `"`, otherwise taken as an atom name.
    pub fn parse_parts(subject: &str, predicate: &str, object: &str, author: &str) -> Result<Self> {
        let object = if object.starts_with('<') || object.starts_with('"') {
            Term::decode(object)?
        } else {
            Term::atom(object)?
        };
        Quad::new(
            Atom::new(subject)?,
            Atom::new(predicate)?,
            object,
            Principal::new(author)?,
        )
    }

    pub fn subject(&self) -> &Atom {
        &self.subject
    }

    pub fn predicate(&self) -> &Atom {
        &self.predicate
    }

    pub fn object(&self) -> &Term {
        &self.object
    }

    pub fn author(&self) -> &Principal {
        &self.author
    }

    pub fn with_author(&self, author: Principal) -> Quad {
        Quad {
            author,
            ..self.clone()
        }
    }

    /// The canonical fact line without its trailing newline.
    pub fn to_line(&self) -> String {
        let mut out = String::new();
        out.push('<');
        out.push_str(&self.subject.0);
        out.push_str("> <");
        out.push_str(&self.predicate.0);
        out.push_str("> ");
        self.object.encode_into(&mut out);
        out.push_str(" @");
        out.push_str(&self.author.0);
        out
    }
}

impl fmt::Display for Quad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

/// Parses one canonical fact line. A single trailing `\n` is accepted.
pub fn parse_fact_line(line: &str) -> Result<Quad> {
    let body = line.strip_suffix('\n').unwrap_or(line);
    let bad = |why: &str| Error::MalformedLine(format!("{why}: {body:?}"));
    let mut lexer = Lexer::new(body);
    let mut tokens = Vec::with_capacity(4);
    while let Some(tok) = lexer.next_token().map_err(|e| bad(&e))? {
        tokens.push(tok);
    }
    match tokens.as_slice() {
        [Token::Term(s), Token::Term(p), Token::Term(o), Token::Author(a)] => {
            let (Term::Atom(s), Term::Atom(p)) = (s, p) else {
                return Err(bad("subject and predicate must be atoms"));
            };
            if !o.is_ground() {
                return Err(bad("variable in ground position"));
            }
            Ok(Quad {
                subject: s.clone(),
                predicate: p.clone(),
                object: o.clone(),
                author: a.clone(),
            })
        }
        [_, _, _] => Err(bad("missing author field")),
        _ => Err(bad("expected `subject predicate object @author`")),
    }
}

/// Parses a fact file: one canonical fact line per row. Blank lines are skipped.
pub fn parse_fact_lines(text: &str) -> Result<FactSet> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(parse_fact_line)
        .collect()
}

/// A set of quads with order-free equality.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct FactSet(BTreeSet<Quad>);

impl FactSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, q: Quad) -> bool {
        self.0.insert(q)
    }

    pub fn contains(&self, q: &Quad) -> bool {
        self.0.contains(q)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> btree_set::Iter<'_, Quad> {
        self.0.iter()
    }

    pub fn union(&self, other: &FactSet) -> FactSet {
        FactSet(self.0.union(&other.0).cloned().collect())
    }

    pub fn difference(&self, other: &FactSet) -> FactSet {
        FactSet(self.0.difference(&other.0).cloned().collect())
    }

    pub fn is_subset(&self, other: &FactSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn extend(&mut self, other: impl IntoIterator<Item = Quad>) {
        self.0.extend(other)
    }

    pub fn filter(&self, mut keep: impl FnMut(&Quad) -> bool) -> FactSet {
        self.0.iter().filter(|q| keep(q)).cloned().collect()
    }

    /// Canonical byte serialization: sorted fact lines, each `\n` terminated.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut lines: Vec<String> = self.0.iter().map(Quad::to_line).collect();
        lines.sort_unstable();
        let mut out = Vec::with_capacity(lines.iter().map(|l| l.len() + 1).sum());
        for line in lines {
            out.extend_from_slice(line.as_bytes());
            out.push(b'\n');
        }
        out
    }
}

impl FromIterator<Quad> for FactSet {
    fn from_iter<I: IntoIterator<Item = Quad>>(iter: I) -> Self {
        FactSet(iter.into_iter().collect())
    }
}

impl IntoIterator for FactSet {
    type Item = Quad;
    type IntoIter = btree_set::IntoIter<Quad>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

impl<'a> IntoIterator for &'a FactSet {
    type Item = &'a Quad;
    type IntoIter = btree_set::Iter<'a, Quad>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

pub fn canonical_serialize(fs: &FactSet) -> Vec<u8> {
    fs.canonical_bytes()
}

/// A triple pattern. Authors are never constrained.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern {
    subject: Term,
    predicate: Term,
    object: Term,
}

impl Pattern {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Result<Self> {
        if matches!(predicate, Term::Literal(_)) {
            return Err(Error::MalformedQuery(
                "literal in predicate position".into(),
            ));
        }
        Ok(Pattern {
            subject,
            predicate,
            object,
        })
    }

    /// Parses a single pattern, e.g. `?s <type> <Photo>`.
    pub fn parse(text: &str) -> Result<Self> {
        let q = parse_query(text)?;
        match q.patterns.as_slice() {
            [p] => Ok(p.clone()),
            _ => Err(Error::MalformedQuery(format!(
                "expected exactly one pattern in {text:?}"
            ))),
        }
    }

    pub fn subject(&self) -> &Term {
        &self.subject
    }

    pub fn predicate(&self) -> &Term {
        &self.predicate
    }

    pub fn object(&self) -> &Term {
        &self.object
    }

    pub fn terms(&self) -> [&Term; 3] {
        [&self.subject, &self.predicate, &self.object]
    }

    pub fn variables(&self) -> impl Iterator<Item = &Variable> {
        self.terms().into_iter().filter_map(Term::as_variable)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.subject, self.predicate, self.object)
    }
}

/// A conjunctive query over triple patterns.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MapQuery {
    patterns: Vec<Pattern>,
    select: Vec<Variable>,
}

impl MapQuery {
    /// An empty `select` means "all variables, in first-occurrence order".
    pub fn new(patterns: Vec<Pattern>, select: Vec<Variable>) -> Result<Self> {
        if patterns.is_empty() {
            return Err(Error::MalformedQuery("query has no patterns".into()));
        }
        if patterns.len() > MAX_PATTERNS {
            return Err(Error::MalformedQuery(format!(
                "{} patterns exceeds the limit of {MAX_PATTERNS}",
                patterns.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for v in &select {
            if !patterns.iter().any(|p| p.variables().any(|pv| pv == v)) {
                return Err(Error::MalformedQuery(format!(
                    "selected variable {v} does not occur in any pattern"
                )));
            }
            if !seen.insert(v) {
                return Err(Error::MalformedQuery(format!("{v} selected twice")));
            }
        }
        let select = if select.is_empty() {
            all_variables(&patterns)
        } else {
            select
        };
        Ok(MapQuery { patterns, select })
    }

    pub fn with_select(self, select: Vec<Variable>) -> Result<Self> {
        MapQuery::new(self.patterns, select)
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    /// The effective projection.
    pub fn select(&self) -> &[Variable] {
        &self.select
    }
}

impl fmt::Display for MapQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.patterns.iter().enumerate() {
            if i > 0 {
                f.write_str(" ; ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

fn all_variables(patterns: &[Pattern]) -> Vec<Variable> {
    let mut out: Vec<Variable> = Vec::new();
    for v in patterns.iter().flat_map(Pattern::variables) {
        if !out.contains(v) {
            out.push(v.clone());
        }
    }
    out
}

/// Parses `pattern (';' pattern)*` where each pattern is three terms.
pub fn parse_query(text: &str) -> Result<MapQuery> {
    let bad = |why: String| Error::MalformedQuery(why);
    let mut lexer = Lexer::new(text);
    let mut patterns = Vec::new();
    let mut current: Vec<Term> = Vec::with_capacity(3);
    let finish = |current: &mut Vec<Term>, patterns: &mut Vec<Pattern>| -> Result<()> {
        let [s, p, o]: [Term; 3] = std::mem::take(current)
            .try_into()
            .map_err(|v: Vec<Term>| bad(format!("pattern needs 3 terms, found {}", v.len())))?;
        patterns.push(Pattern::new(s, p, o)?);
        Ok(())
    };
    loop {
        match lexer.next_token().map_err(bad)? {
            Some(Token::Term(t)) => current.push(t),
            Some(Token::Semicolon) => finish(&mut current, &mut patterns)?,
            Some(Token::Author(a)) => return Err(bad(format!("unexpected author @{a}"))),
            None => break,
        }
    }
    if !(current.is_empty() && patterns.is_empty()) {
        finish(&mut current, &mut patterns)?;
    }
    MapQuery::new(patterns, Vec::new())
}

/// Parses a `--select`-style list: `?x,?y` (the `?` is optional).
pub fn parse_select(text: &str) -> Result<Vec<Variable>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            Variable::new(s.strip_prefix('?').unwrap_or(s))
                .map_err(|e| Error::MalformedQuery(e.to_string()))
        })
        .collect()
}

/// One answer: variable name to ground term.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Binding(BTreeMap<Variable, Term>);

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, v: &Variable) -> Option<&Term> {
        self.0.get(v)
    }

    pub fn insert(&mut self, v: Variable, t: Term) -> Option<Term> {
        self.0.insert(v, t)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Variable, &Term)> {
        self.0.iter()
    }

    pub fn variables(&self) -> impl Iterator<Item = &Variable> {
        self.0.keys()
    }

    /// Restriction to `select`; variables absent from the binding are skipped.
    pub fn project(&self, select: &[Variable]) -> Binding {
        Binding(
            select
                .iter()
                .filter_map(|v| self.0.get(v).map(|t| (v.clone(), t.clone())))
                .collect(),
        )
    }

    /// Renders `?x=<a> ?y="b"` in the given variable order.
    pub fn render(&self, order: &[Variable]) -> String {
        order
            .iter()
            .filter_map(|v| self.0.get(v).map(|t| format!("{v}={t}")))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl FromIterator<(Variable, Term)> for Binding {
    fn from_iter<I: IntoIterator<Item = (Variable, Term)>>(iter: I) -> Self {
        Binding(iter.into_iter().collect())
    }
}

#[derive(Debug)]
enum Token {
    Term(Term),
    Author(Principal),
    Semicolon,
}

struct Lexer<'a> {
    rest: &'a str,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer { rest: text }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        let end = self
            .rest
            .char_indices()
            .find(|&(_, c)| !pred(c))
            .map_or(self.rest.len(), |(i, _)| i);
        let (head, tail) = self.rest.split_at(end);
        self.rest = tail;
        head
    }

    fn next_token(&mut self) -> std::result::Result<Option<Token>, String> {
        self.rest = self.rest.trim_start_matches([' ', '\t']);
        let Some(first) = self.rest.chars().next() else {
            return Ok(None);
        };
        self.rest = &self.rest[first.len_utf8()..];
        match first {
            ';' => Ok(Some(Token::Semicolon)),
            '<' => {
                let name = self.take_while(is_atom_char);
                if !self.rest.starts_with('>') {
                    return Err(format!("unterminated or invalid atom <{name}"));
                }
                self.rest = &self.rest[1..];
                Atom::new(name)
                    .map(|a| Some(Token::Term(Term::Atom(a))))
                    .map_err(|e| e.to_string())
            }
            '?' => Variable::new(self.take_while(is_var_char))
                .map(|v| Some(Token::Term(Term::Variable(v))))
                .map_err(|e| e.to_string()),
            '@' => Principal::new(self.take_while(is_atom_char))
                .map(|p| Some(Token::Author(p)))
                .map_err(|e| e.to_string()),
            '"' => {
                let mut value = String::new();
                let mut chars = self.rest.char_indices();
                loop {
                    match chars.next() {
                        None => return Err("unterminated literal".into()),
                        Some((i, '"')) => {
                            self.rest = &self.rest[i + 1..];
                            break;
                        }
                        Some((_, '\\')) => match chars.next() {
                            Some((_, '\\')) => value.push('\\'),
                            Some((_, '"')) => value.push('"'),
                            Some((_, 'n')) => value.push('\n'),
                            other => {
                                return Err(format!(
                                    "bad escape \\{}",
                                    other.map_or(String::new(), |(_, c)| c.to_string())
                                ))
                            }
                        },
                        Some((_, '\n')) => return Err("raw newline in literal".into()),
                        Some((_, c)) => value.push(c),
                    }
                }
                Ok(Some(Token::Term(Term::Literal(value))))
            }
            c => Err(format!("unexpected character {c:?}")),
        }
        .and_then(|tok| {
            // tokens must be separated by whitespace, except around `;`
            match (&tok, self.rest.chars().next()) {
                (Some(Token::Semicolon), _) | (_, None | Some(' ' | '\t' | ';')) => Ok(tok),
                (_, Some(c)) => Err(format!("unexpected character {c:?} after token")),
            }
        })
    }
}
