//! Finite relational structures, their signatures, and powers.
//!
//! Domains are always `{0, …, size-1}`. Relations keep their tuples sorted
//! lexicographically and deduplicated, so two structures with the same
//! content are equal and serialize to the same bytes.

use std::collections::HashSet;
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::budget::{checked_pow, Limits};
use crate::error::{Error, Result};

pub type Elem = u32;

/// Lexicographic coding of vectors in `{0..base-1}^length` as integers,
/// first coordinate most significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TupleCoding {
    base: u64,
    length: usize,
}

impl TupleCoding {
    pub fn new(base: usize, length: usize) -> Result<Self> {
        if base == 0 {
            return Err(Error::invalid("tuple coding base must be positive"));
        }
        if checked_pow(base as u64, length as u64).is_none() {
            return Err(Error::Capacity {
                what: "tuple coding range",
                requested: (base as u128).saturating_pow(length.min(128) as u32),
                limit: u64::MAX as u128,
            });
        }
        Ok(TupleCoding {
            base: base as u64,
            length,
        })
    }

    pub fn base(&self) -> usize {
        self.base as usize
    }

    pub fn length(&self) -> usize {
        self.length
    }

    /// Number of codes, `base^length`.
    pub fn count(&self) -> u64 {
        self.base.pow(self.length as u32)
    }

    pub fn encode(&self, v: &[Elem]) -> u64 {
        debug_assert_eq!(v.len(), self.length);
        v.iter().fold(0u64, |acc, &x| acc * self.base + x as u64)
    }

    pub fn decode(&self, mut code: u64) -> Vec<Elem> {
        let mut out = vec![0; self.length];
        for slot in out.iter_mut().rev() {
            *slot = (code % self.base) as Elem;
            code /= self.base;
        }
        out
    }

    pub fn decode_into(&self, mut code: u64, out: &mut [Elem]) {
        for slot in out.iter_mut().rev() {
            *slot = (code % self.base) as Elem;
            code /= self.base;
        }
    }
}

/// Ordered list of relation symbols with their arities.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Signature {
    symbols: Vec<(String, usize)>,
}

impl Signature {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let mut sig = Signature::default();
        for (name, arity) in symbols {
            sig.push(name.into(), arity)?;
        }
        Ok(sig)
    }

    fn push(&mut self, name: String, arity: usize) -> Result<()> {
        validate_name(&name)?;
        if arity == 0 {
            return Err(Error::invalid(format!("relation `{name}` must have arity >= 1")));
        }
        if self.position(&name).is_some() {
            return Err(Error::Duplicate {
                what: "relation name",
                detail: name,
            });
        }
        self.symbols.push((name, arity));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.symbols.iter().position(|(n, _)| n == name)
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.position(name).map(|i| self.symbols[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.symbols.iter().map(|(n, a)| (n.as_str(), *a))
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|(n, a)| format!("{n}/{a}")).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

fn validate_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'');
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!("`{name}` is not a valid relation name")))
    }
}

/// A set of same-arity tuples over `{0..base-1}`.
#[derive(Clone)]
pub struct Relation {
    base: usize,
    arity: usize,
    data: Vec<Elem>,
    index: Option<Vec<u64>>,
}

impl PartialEq for Relation {
    fn eq(&self, other: &Self) -> bool {
        self.base == other.base && self.arity == other.arity && self.data == other.data
    }
}

impl Eq for Relation {}

impl fmt::Debug for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}

impl Relation {
    /// Builds a relation, merging duplicate tuples.
    pub fn new<T: AsRef<[Elem]>>(
        base: usize,
        arity: usize,
        tuples: impl IntoIterator<Item = T>,
    ) -> Result<Self> {
        let mut data = Vec::new();
        for t in tuples {
            let t = t.as_ref();
            if t.len() != arity {
                return Err(Error::ArityMismatch {
                    name: "<tuple>".into(),
                    expected: arity,
                    found: t.len(),
                });
            }
            if let Some(&bad) = t.iter().find(|&&x| x as usize >= base) {
                return Err(Error::OutOfRange {
                    element: bad as u64,
                    size: base,
                });
            }
            data.extend_from_slice(t);
        }
        Ok(Self::from_flat(base, arity, data))
    }

    /// Builds a relation from already validated flat data.
    pub(crate) fn from_flat(base: usize, arity: usize, data: Vec<Elem>) -> Self {
        assert!(arity > 0, "relations have positive arity");
        let mut tuples: Vec<&[Elem]> = data.chunks_exact(arity).collect();
        tuples.sort_unstable();
        tuples.dedup();
        let sorted: Vec<Elem> = tuples.concat();
        let mut rel = Relation {
            base,
            arity,
            data: sorted,
            index: None,
        };
        rel.build_index(Limits::default().bitset_cells);
        rel
    }

    fn build_index(&mut self, limit: u64) {
        self.index = None;
        let Some(cells) = checked_pow(self.base as u64, self.arity as u64) else {
            return;
        };
        if cells > limit {
            return;
        }
        let coding = TupleCoding {
            base: self.base as u64,
            length: self.arity,
        };
        let mut bits = vec![0u64; (cells as usize).div_ceil(64).max(1)];
        for t in self.iter() {
            let c = coding.encode(t) as usize;
            bits[c / 64] |= 1 << (c % 64);
        }
        self.index = Some(bits);
    }

    /// Rebuilds the membership bitset with a different cell limit.
    pub fn reindex(&mut self, bitset_cells: u64) {
        self.build_index(bitset_cells);
    }

    pub fn has_bitset(&self) -> bool {
        self.index.is_some()
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.arity
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn tuple(&self, i: usize) -> &[Elem] {
        &self.data[i * self.arity..(i + 1) * self.arity]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, Elem> {
        self.data.chunks_exact(self.arity)
    }

    pub(crate) fn flat(&self) -> &[Elem] {
        &self.data
    }

    pub fn contains(&self, t: &[Elem]) -> bool {
        if t.len() != self.arity || t.iter().any(|&x| x as usize >= self.base) {
            return false;
        }
        match &self.index {
            Some(bits) => {
                let c = t.iter().fold(0usize, |acc, &x| acc * self.base + x as usize);
                bits[c / 64] >> (c % 64) & 1 == 1
            }
            None => {
                let n = self.len();
                let (mut lo, mut hi) = (0, n);
                while lo < hi {
                    let mid = (lo + hi) / 2;
                    match self.tuple(mid).cmp(t) {
                        std::cmp::Ordering::Less => lo = mid + 1,
                        std::cmp::Ordering::Greater => hi = mid,
                        std::cmp::Ordering::Equal => return true,
                    }
                }
                false
            }
        }
    }

    /// All tuples of `{0..base-1}^arity` not in this relation.
    pub fn complement(&self, limits: &Limits) -> Result<Relation> {
        let cells = checked_pow(self.base as u64, self.arity as u64)
            .filter(|&c| c <= limits.relation_tuples)
            .ok_or(Error::Capacity {
                what: "relation complement",
                requested: (self.base as u128).saturating_pow(self.arity as u32),
                limit: limits.relation_tuples as u128,
            })?;
        let coding = TupleCoding::new(self.base, self.arity)?;
        let mut data = Vec::new();
        let mut buf = vec![0; self.arity];
        for code in 0..cells {
            coding.decode_into(code, &mut buf);
            if !self.contains(&buf) {
                data.extend_from_slice(&buf);
            }
        }
        Ok(Relation::from_flat(self.base, self.arity, data))
    }
}

/// A finite relational structure on `{0..size-1}`.
#[derive(Clone, PartialEq, Eq)]
pub struct RelStructure {
    size: usize,
    signature: Signature,
    relations: Vec<Relation>,
}

impl fmt::Debug for RelStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

impl RelStructure {
    pub fn new<S: Into<String>>(
        size: usize,
        relations: impl IntoIterator<Item = (S, Relation)>,
    ) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("structures have a nonempty domain"));
        }
        let mut signature = Signature::default();
        let mut rels = Vec::new();
        for (name, rel) in relations {
            let name = name.into();
            if rel.base != size {
                return Err(Error::invalid(format!(
                    "relation `{name}` is over a domain of size {}, structure has size {size}",
                    rel.base
                )));
            }
            signature.push(name, rel.arity)?;
            rels.push(rel);
        }
        Ok(RelStructure {
            size,
            signature,
            relations: rels,
        })
    }

    /// Convenience constructor from literal tuple lists.
    pub fn from_tuples(size: usize, relations: &[(&str, usize, Vec<Vec<Elem>>)]) -> Result<Self> {
        let mut built = Vec::new();
        for (name, arity, tuples) in relations {
            built.push((*name, Relation::new(size, *arity, tuples)?));
        }
        Self::new(size, built)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.signature.position(name).map(|i| &self.relations[i])
    }

    /// Iterates over `(name, relation)` pairs in signature order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Relation)> {
        self.signature.iter().map(|(n, _)| n).zip(self.relations.iter())
    }

    pub fn check_same_signature(&self, other: &RelStructure) -> Result<()> {
        if self.signature == other.signature {
            Ok(())
        } else {
            Err(Error::SignatureMismatch(format!(
                "{} vs {}",
                self.signature, other.signature
            )))
        }
    }

    /// Appends a relation.
    pub fn with_relation(mut self, name: impl Into<String>, rel: Relation) -> Result<Self> {
        if rel.base != self.size {
            return Err(Error::invalid("relation domain differs from structure domain"));
        }
        self.signature.push(name.into(), rel.arity)?;
        self.relations.push(rel);
        Ok(self)
    }

    /// The reduct to the named relations, in the given order.
    pub fn reduct(&self, names: &[&str]) -> Result<Self> {
        let mut rels = Vec::new();
        for &name in names {
            let rel = self
                .relation(name)
                .ok_or_else(|| Error::SignatureMismatch(format!("no relation named `{name}`")))?;
            rels.push((name, rel.clone()));
        }
        Self::new(self.size, rels)
    }

    /// Renames relations pairwise; the order of the signature is preserved.
    pub fn rename(&self, pairs: &[(&str, &str)]) -> Result<Self> {
        let mut rels = Vec::new();
        for (name, rel) in self.iter() {
            let new = pairs
                .iter()
                .find(|(old, _)| *old == name)
                .map_or(name, |(_, new)| *new);
            rels.push((new.to_string(), rel.clone()));
        }
        Self::new(self.size, rels)
    }

    /// Substructure induced on `elements` (strictly increasing), relabelled
    /// to `0..elements.len()` in the given order.
    pub fn induced(&self, elements: &[Elem]) -> Result<Self> {
        if elements.is_empty() || elements.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("induced substructure needs increasing elements"));
        }
        if let Some(&bad) = elements.iter().find(|&&e| e as usize >= self.size) {
            return Err(Error::OutOfRange {
                element: bad as u64,
                size: self.size,
            });
        }
        let mut relabel = vec![u32::MAX; self.size];
        for (i, &e) in elements.iter().enumerate() {
            relabel[e as usize] = i as Elem;
        }
        let mut rels = Vec::new();
        for (name, rel) in self.iter() {
            let mut data = Vec::new();
            for t in rel.iter() {
                if t.iter().all(|&x| relabel[x as usize] != u32::MAX) {
                    data.extend(t.iter().map(|&x| relabel[x as usize]));
                }
            }
            rels.push((name, Relation::from_flat(elements.len(), rel.arity, data)));
        }
        Self::new(elements.len(), rels)
    }

    /// Image of the structure under a relabelling `map` onto `0..new_size`.
    pub fn relabel(&self, map: &[Elem], new_size: usize) -> Result<Self> {
        if map.len() != self.size {
            return Err(Error::invalid("relabelling must be total"));
        }
        if let Some(&bad) = map.iter().find(|&&x| x as usize >= new_size) {
            return Err(Error::OutOfRange {
                element: bad as u64,
                size: new_size,
            });
        }
        let mut rels = Vec::new();
        for (name, rel) in self.iter() {
            let data = rel.flat().iter().map(|&x| map[x as usize]).collect();
            rels.push((name, Relation::from_flat(new_size, rel.arity, data)));
        }
        Self::new(new_size, rels)
    }

    /// Canonical JSON: `{"size":N,"relations":{"name/k":[[..],..]}}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("structures always serialize")
    }

    /// Compact text form: `size N; R/k = {(..),(..)};`.
    pub fn to_text(&self) -> String {
        let mut out = format!("size {};", self.size);
        for (name, rel) in self.iter() {
            let tuples: Vec<String> = rel
                .iter()
                .map(|t| {
                    let items: Vec<String> = t.iter().map(|x| x.to_string()).collect();
                    format!("({})", items.join(","))
                })
                .collect();
            out.push_str(&format!(" {name}/{} = {{{}}};", rel.arity, tuples.join(",")));
        }
        out
    }
}

impl Serialize for RelStructure {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;

        struct Rels<'a>(&'a RelStructure);
        impl Serialize for Rels<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let mut map = s.serialize_map(Some(self.0.relations.len()))?;
                for (name, rel) in self.0.iter() {
                    let tuples: Vec<&[Elem]> = rel.iter().collect();
                    map.serialize_entry(&format!("{name}/{}", rel.arity), &tuples)?;
                }
                map.end()
            }
        }

        let mut map = s.serialize_map(Some(2))?;
        map.serialize_entry("size", &self.size)?;
        map.serialize_entry("relations", &Rels(self))?;
        map.end()
    }
}

impl<'de> Deserialize<'de> for RelStructure {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(d)?;
        structure_from_json_value(&value).map_err(D::Error::custom)
    }
}

/// Parses either surface syntax: JSON or the compact text grammar.
pub fn parse_structure(text: &str) -> Result<RelStructure> {
    if looks_like_json(text) {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        structure_from_json_value(&value)
    } else {
        TextParser::new(text).parse()
    }
}

pub fn serialize_structure(a: &RelStructure) -> String {
    a.to_json()
}

fn looks_like_json(text: &str) -> bool {
    let mut chars = text.chars().filter(|c| !c.is_whitespace());
    matches!((chars.next(), chars.next()), (Some('{'), Some('"' | '}')))
}

fn split_key(key: &str) -> Result<(String, usize)> {
    let (name, arity) = key
        .rsplit_once('/')
        .ok_or_else(|| Error::invalid(format!("relation key `{key}` lacks `/arity`")))?;
    let arity: usize = arity
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("bad arity in relation key `{key}`")))?;
    Ok((name.trim().to_string(), arity))
}

fn structure_from_json_value(value: &serde_json::Value) -> Result<RelStructure> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::invalid("structure must be a JSON object"))?;
    if let Some(extra) = obj.keys().find(|k| *k != "size" && *k != "relations") {
        return Err(Error::invalid(format!("unexpected key `{extra}`")));
    }
    let size = obj
        .get("size")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::invalid("`size` must be a positive integer"))? as usize;
    if size == 0 {
        return Err(Error::invalid("`size` must be a positive integer"));
    }
    let mut builder = Builder::new(size);
    if let Some(rels) = obj.get("relations") {
        let rels = rels
            .as_object()
            .ok_or_else(|| Error::invalid("`relations` must be an object"))?;
        for (key, tuples) in rels {
            let (name, arity) = split_key(key)?;
            let tuples = tuples
                .as_array()
                .ok_or_else(|| Error::invalid(format!("`{key}` must be an array of tuples")))?;
            let mut parsed = Vec::new();
            for t in tuples {
                let t = t
                    .as_array()
                    .ok_or_else(|| Error::invalid(format!("tuple in `{key}` is not an array")))?;
                let mut tuple = Vec::new();
                for x in t {
                    let x = x
                        .as_u64()
                        .ok_or_else(|| Error::invalid(format!("non-integer entry in `{key}`")))?;
                    tuple.push(x);
                }
                parsed.push(tuple);
            }
            builder.add(name, arity, parsed)?;
        }
    }
    builder.finish()
}

struct Builder {
    size: usize,
    rels: Vec<(String, Relation)>,
}

impl Builder {
    fn new(size: usize) -> Self {
        Builder {
            size,
            rels: Vec::new(),
        }
    }

    fn add(&mut self, name: String, arity: usize, tuples: Vec<Vec<u64>>) -> Result<()> {
        if self.rels.iter().any(|(n, _)| *n == name) {
            return Err(Error::Duplicate {
                what: "relation name",
                detail: name,
            });
        }
        let mut seen = HashSet::new();
        let mut data = Vec::with_capacity(tuples.len() * arity);
        for t in &tuples {
            if t.len() != arity {
                return Err(Error::ArityMismatch {
                    name,
                    expected: arity,
                    found: t.len(),
                });
            }
            if let Some(&bad) = t.iter().find(|&&x| x >= self.size as u64) {
                return Err(Error::OutOfRange {
                    element: bad,
                    size: self.size,
                });
            }
            if !seen.insert(t.clone()) {
                return Err(Error::Duplicate {
                    what: "tuple",
                    detail: format!("{t:?} in `{name}`"),
                });
            }
            data.extend(t.iter().map(|&x| x as Elem));
        }
        if arity == 0 {
            return Err(Error::invalid(format!("relation `{name}` must have arity >= 1")));
        }
        self.rels
            .push((name, Relation::from_flat(self.size, arity, data)));
        Ok(())
    }

    fn finish(self) -> Result<RelStructure> {
        RelStructure::new(self.size, self.rels)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(u64),
    Punct(char),
}

struct TextParser<'a> {
    text: &'a str,
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl<'a> TextParser<'a> {
    fn new(text: &'a str) -> Self {
        TextParser {
            text,
            toks: Vec::new(),
            pos: 0,
        }
    }

    fn lex(&mut self) -> Result<()> {
        let bytes = self.text.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i] as char;
            if c.is_ascii_whitespace() {
                i += 1;
            } else if c == '#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else if c.is_ascii_digit() {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let n = self.text[start..i]
                    .parse()
                    .map_err(|_| Error::syntax_at(self.text, start, "number too large"))?;
                self.toks.push((start, Tok::Num(n)));
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'\'')
                {
                    i += 1;
                }
                self.toks
                    .push((start, Tok::Ident(self.text[start..i].to_string())));
            } else if "{}(),;:=/".contains(c) {
                self.toks.push((i, Tok::Punct(c)));
                i += 1;
            } else {
                return Err(Error::syntax_at(self.text, i, format!("unexpected `{c}`")));
            }
        }
        Ok(())
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.text.len(), |t| t.0)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(Error::syntax_at(self.text, self.offset(), format!("expected `{c}`")))
        }
    }

    fn number(&mut self) -> Result<u64> {
        match self.peek() {
            Some(Tok::Num(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => Err(Error::syntax_at(self.text, self.offset(), "expected a number")),
        }
    }

    fn parse(mut self) -> Result<RelStructure> {
        self.lex()?;
        let braced = self.eat('{');
        let mut size = None;
        let mut items: Vec<(usize, String, usize, Vec<Vec<u64>>)> = Vec::new();
        loop {
            match self.peek().cloned() {
                None => break,
                Some(Tok::Punct('}')) if braced => break,
                Some(Tok::Ident(word)) => {
                    let at = self.offset();
                    self.pos += 1;
                    if word == "size" && self.peek() != Some(&Tok::Punct('/')) {
                        let _ = self.eat(':') || self.eat('=');
                        if size.is_some() {
                            return Err(Error::syntax_at(self.text, at, "size given twice"));
                        }
                        size = Some(self.number()?);
                    } else {
                        self.expect('/')?;
                        let arity = self.number()? as usize;
                        let _ = self.eat(':') || self.eat('=');
                        self.expect('{')?;
                        let mut tuples = Vec::new();
                        if !self.eat('}') {
                            loop {
                                self.expect('(')?;
                                let mut t = vec![self.number()?];
                                while self.eat(',') {
                                    t.push(self.number()?);
                                }
                                self.expect(')')?;
                                tuples.push(t);
                                if self.eat('}') {
                                    break;
                                }
                                self.expect(',')?;
                            }
                        }
                        items.push((at, word, arity, tuples));
                    }
                    if !(self.eat(';') || self.eat(',')) {
                        match self.peek() {
                            None => {}
                            Some(Tok::Punct('}')) if braced => {}
                            _ => {
                                return Err(Error::syntax_at(
                                    self.text,
                                    self.offset(),
                                    "expected `;`",
                                ))
                            }
                        }
                    }
                }
                Some(_) => {
                    return Err(Error::syntax_at(
                        self.text,
                        self.offset(),
                        "expected `size` or a relation",
                    ))
                }
            }
        }
        if braced {
            self.expect('}')?;
        }
        if self.pos != self.toks.len() {
            return Err(Error::syntax_at(self.text, self.offset(), "trailing input"));
        }
        let size = size.ok_or_else(|| Error::syntax_at(self.text, 0, "missing `size`"))?;
        if size == 0 {
            return Err(Error::invalid("`size` must be positive"));
        }
        let mut builder = Builder::new(size as usize);
        for (_, name, arity, tuples) in items {
            builder.add(name, arity, tuples)?;
        }
        builder.finish()
    }
}

/// The `n`-th power: domain `size^n` under [`TupleCoding`], relations
/// componentwise.
pub fn power_structure(a: &RelStructure, n: usize) -> Result<RelStructure> {
    power_structure_with(a, n, &Limits::default())
}

pub fn power_structure_with(a: &RelStructure, n: usize, limits: &Limits) -> Result<RelStructure> {
    if n == 0 {
        return Err(Error::invalid("power exponent must be positive"));
    }
    let domain = checked_pow(a.size as u64, n as u64)
        .filter(|&d| d <= limits.power_domain)
        .ok_or(Error::Capacity {
            what: "power domain",
            requested: (a.size as u128).saturating_pow(n as u32),
            limit: limits.power_domain as u128,
        })?;
    let mut rels = Vec::new();
    for (name, rel) in a.iter() {
        let count = checked_pow(rel.len() as u64, n as u64)
            .filter(|&c| c <= limits.relation_tuples)
            .ok_or(Error::Capacity {
                what: "power relation tuples",
                requested: (rel.len() as u128).saturating_pow(n as u32),
                limit: limits.relation_tuples as u128,
            })?;
        let k = rel.arity();
        let mut data = Vec::with_capacity(count as usize * k);
        let mut pick = vec![0usize; n];
        for _ in 0..count {
            for j in 0..k {
                let mut code = 0u64;
                for &p in &pick {
                    code = code * a.size as u64 + rel.tuple(p)[j] as u64;
                }
                data.push(code as Elem);
            }
            for slot in pick.iter_mut().rev() {
                *slot += 1;
                if *slot < rel.len() {
                    break;
                }
                *slot = 0;
            }
        }
        rels.push((name, Relation::from_flat(domain as usize, k, data)));
    }
    RelStructure::new(domain as usize, rels)
}
