//! Compact-IRI handling against the prefixes declared in `@context`.
//!
//! Only literal prefix substitution is done; there is no JSON-LD expansion.

use indexmap::IndexMap;
use serde_json::Value;

use super::TdError;

pub const SBO_NS: &str = "https://freumi.inrupt.net/SimpleBluetoothOntology.ttl#";
pub const BDO_NS: &str = "https://freumi.inrupt.net/BinaryDataOntology.ttl#";
pub const RDF_NS: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const QUDT_NS: &str = "http://qudt.org/schema/qudt/";
pub const TD_CONTEXT: &str = "https://www.w3.org/2022/wot/td/v1.1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vocab {
    Sbo,
    Bdo,
    Rdf,
    Qudt,
}

impl Vocab {
    fn namespace(self) -> &'static str {
        match self {
            Vocab::Sbo => SBO_NS,
            Vocab::Bdo => BDO_NS,
            Vocab::Rdf => RDF_NS,
            Vocab::Qudt => QUDT_NS,
        }
    }
}

/// A term after prefix resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    /// Unprefixed TD core term such as `forms` or `title`.
    Plain(String),
    Iri(String),
}

impl Term {
    pub fn key(&self) -> &str {
        match self {
            Term::Plain(s) | Term::Iri(s) => s,
        }
    }

    /// Local name if the IRI lies in `vocab`.
    pub fn local_in(&self, vocab: Vocab) -> Option<&str> {
        match self {
            Term::Iri(iri) => iri.strip_prefix(vocab.namespace()),
            Term::Plain(_) => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Context {
    prefixes: IndexMap<String, String>,
}

fn looks_absolute(prefix: &str, rest: &str) -> bool {
    rest.starts_with("//") || matches!(prefix, "urn" | "http" | "https" | "tag" | "mailto")
}

impl Context {
    pub fn from_document(context: Option<&Value>) -> Result<Self, TdError> {
        let mut prefixes = IndexMap::new();
        let mut collect = |entry: &Value| -> Result<(), TdError> {
            match entry {
                Value::String(_) => Ok(()),
                Value::Object(map) => {
                    for (prefix, ns) in map {
                        // keyword aliases such as "@language" carry no namespace
                        if let Value::String(ns) = ns {
                            if !prefix.starts_with('@') {
                                prefixes.insert(prefix.clone(), ns.clone());
                            }
                        }
                    }
                    Ok(())
                }
                other => Err(TdError::Malformed(format!("unexpected @context entry {other}"))),
            }
        };
        match context {
            None => {}
            Some(Value::Array(entries)) => entries.iter().try_for_each(&mut collect)?,
            Some(entry) => collect(entry)?,
        }
        Ok(Context { prefixes })
    }

    pub fn prefixes(&self) -> &IndexMap<String, String> {
        &self.prefixes
    }

    pub fn expand(&self, term: &str) -> Result<Term, TdError> {
        if term.starts_with('@') {
            return Ok(Term::Plain(term.to_string()));
        }
        match term.split_once(':') {
            None => Ok(Term::Plain(term.to_string())),
            Some((prefix, local)) => match self.prefixes.get(prefix) {
                Some(ns) => Ok(Term::Iri(format!("{ns}{local}"))),
                None if looks_absolute(prefix, local) => Ok(Term::Iri(term.to_string())),
                None => Err(TdError::UnknownPrefix(term.to_string())),
            },
        }
    }

    /// Resolves a term-valued string such as `"sbo:write"` to its local name in
    /// `vocab`. Bare local names are accepted as-is.
    pub fn resolve_value(&self, value: &str, vocab: Vocab) -> Result<String, TdError> {
        match self.expand(value)? {
            Term::Plain(local) => Ok(local),
            term => term
                .local_in(vocab)
                .map(str::to_string)
                .ok_or_else(|| TdError::InvalidValue(format!("{value:?} is not a {vocab:?} term"))),
        }
    }

    /// Shortest spelling of `vocab:local` under the declared prefixes.
    pub fn compact(&self, vocab: Vocab, local: &str) -> String {
        let ns = vocab.namespace();
        match self.prefixes.iter().find(|(_, v)| v.as_str() == ns) {
            Some((prefix, _)) => format!("{prefix}:{local}"),
            None => format!("{ns}{local}"),
        }
    }
}

/// Last path or fragment component of an IRI, used for unit names.
pub fn local_name(iri: &str) -> &str {
    iri.rsplit(['#', '/', ':']).next().unwrap_or(iri)
}
