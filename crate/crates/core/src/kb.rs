//! Relational structures: the object and relation tables, the fact store with
//! its lookup indexes, and induced substructures.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Dense handle of a domain element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectId(pub u32);

impl ObjectId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Dense handle of a predicate symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationId(pub u32);

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A ground atom `relation(args...)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fact {
    pub relation: RelationId,
    pub args: Box<[ObjectId]>,
}

impl Fact {
    pub fn new(relation: RelationId, args: impl Into<Box<[ObjectId]>>) -> Self {
        Fact {
            relation,
            args: args.into(),
        }
    }

    pub fn binary(relation: RelationId, head: ObjectId, tail: ObjectId) -> Self {
        Fact::new(relation, vec![head, tail])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationInfo {
    pub name: String,
    pub arity: usize,
}

/// Line format accepted by the text loaders.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TripleFormat {
    /// `head<TAB>relation<TAB>tail`
    Triples,
    /// `relation<TAB>arg1<TAB>...<TAB>argn`
    NAry,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KbStats {
    pub objects: usize,
    pub relations: usize,
    pub facts: usize,
}

impl fmt::Display for KbStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "|D|={} |R|={} |facts|={}",
            self.objects, self.relations, self.facts
        )
    }
}

/// A finite relational structure with set semantics over its facts.
///
/// Objects and relations get dense ids in order of first appearance. Besides
/// the fact list, four indexes are maintained: facts per relation, facts per
/// incident object, facts per `(relation, argument position, object)` and
/// facts per unordered pair of co-occurring objects.
#[derive(Clone, Debug, Default)]
pub struct KnowledgeBase {
    object_names: Vec<String>,
    object_ids: HashMap<String, ObjectId>,
    relations: Vec<RelationInfo>,
    relation_ids: HashMap<String, RelationId>,
    facts: Vec<Fact>,
    fact_lookup: HashMap<Box<[u32]>, u32>,
    by_relation: Vec<Vec<u32>>,
    by_object: Vec<Vec<u32>>,
    by_position: HashMap<(RelationId, u32, ObjectId), Vec<u32>>,
    by_pair: HashMap<(ObjectId, ObjectId), Vec<u32>>,
}

fn lookup_key(relation: RelationId, args: &[ObjectId], buf: &mut Vec<u32>) {
    buf.clear();
    buf.push(relation.0);
    buf.extend(args.iter().map(|a| a.0));
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load_triples<R: BufRead>(reader: R) -> Result<Self> {
        Self::load(reader, TripleFormat::Triples)
    }

    pub fn load_nary<R: BufRead>(reader: R) -> Result<Self> {
        Self::load(reader, TripleFormat::NAry)
    }

    pub fn load<R: BufRead>(reader: R, format: TripleFormat) -> Result<Self> {
        let mut kb = KnowledgeBase::new();
        for_each_record(reader, format, |line, relation, args| {
            let rel =
                kb.intern_relation(relation, args.len())
                    .map_err(|e| Error::MalformedLine {
                        line,
                        message: e.to_string(),
                    })?;
            let ids: Vec<ObjectId> = args.iter().map(|a| kb.intern_object(a)).collect();
            kb.add_fact(Fact::new(rel, ids))?;
            Ok(())
        })?;
        Ok(kb)
    }

    pub fn load_path(path: impl AsRef<Path>, format: TripleFormat) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::format(path, e.to_string()))?;
        Self::load(BufReader::new(file), format)
    }

    /// Reads facts against this KB's symbol tables without extending them.
    /// Records naming unknown objects or relations are skipped and counted.
    pub fn resolve_facts<R: BufRead>(
        &self,
        reader: R,
        format: TripleFormat,
    ) -> Result<(Vec<Fact>, usize)> {
        let mut facts = Vec::new();
        let mut skipped = 0;
        for_each_record(reader, format, |line, relation, args| {
            let Some(rel) = self.relation_id(relation) else {
                skipped += 1;
                return Ok(());
            };
            if self.arity(rel) != args.len() {
                return Err(Error::MalformedLine {
                    line,
                    message: format!(
                        "relation `{relation}` has arity {}, got {}",
                        self.arity(rel),
                        args.len()
                    ),
                });
            }
            let ids: Option<Vec<ObjectId>> = args.iter().map(|a| self.object_id(a)).collect();
            match ids {
                Some(ids) => facts.push(Fact::new(rel, ids)),
                None => skipped += 1,
            }
            Ok(())
        })?;
        Ok((facts, skipped))
    }

    pub fn resolve_path(
        &self,
        path: impl AsRef<Path>,
        format: TripleFormat,
    ) -> Result<(Vec<Fact>, usize)> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::format(path, e.to_string()))?;
        self.resolve_facts(BufReader::new(file), format)
    }

    /// Returns the id of `name`, allocating the next dense id if it is new.
    pub fn intern_object(&mut self, name: &str) -> ObjectId {
        if let Some(&id) = self.object_ids.get(name) {
            return id;
        }
        let id = ObjectId(self.object_names.len() as u32);
        self.object_names.push(name.to_owned());
        self.object_ids.insert(name.to_owned(), id);
        self.by_object.push(Vec::new());
        id
    }

    pub fn intern_relation(&mut self, name: &str, arity: usize) -> Result<RelationId> {
        if arity == 0 {
            return Err(Error::InvalidConfig(format!(
                "relation `{name}` must have arity >= 1"
            )));
        }
        if let Some(&id) = self.relation_ids.get(name) {
            let expected = self.relations[id.index()].arity;
            if expected != arity {
                return Err(Error::ArityMismatch {
                    relation: name.to_owned(),
                    expected,
                    found: arity,
                });
            }
            return Ok(id);
        }
        let id = RelationId(self.relations.len() as u32);
        self.relations.push(RelationInfo {
            name: name.to_owned(),
            arity,
        });
        self.relation_ids.insert(name.to_owned(), id);
        self.by_relation.push(Vec::new());
        Ok(id)
    }

    /// Inserts `fact`; returns `false` when it was already present.
    pub fn add_fact(&mut self, fact: Fact) -> Result<bool> {
        let info = self
            .relations
            .get(fact.relation.index())
            .ok_or_else(|| Error::UnknownRelation(format!("#{}", fact.relation.0)))?;
        if info.arity != fact.args.len() {
            return Err(Error::ArityMismatch {
                relation: info.name.clone(),
                expected: info.arity,
                found: fact.args.len(),
            });
        }
        if let Some(bad) = fact
            .args
            .iter()
            .find(|a| a.index() >= self.object_names.len())
        {
            return Err(Error::ObjectOutOfRange(bad.0));
        }
        let mut key = Vec::with_capacity(fact.args.len() + 1);
        lookup_key(fact.relation, &fact.args, &mut key);
        if self.fact_lookup.contains_key(key.as_slice()) {
            return Ok(false);
        }
        let idx = self.facts.len() as u32;
        self.fact_lookup.insert(key.into_boxed_slice(), idx);
        self.by_relation[fact.relation.index()].push(idx);
        for (pos, &obj) in fact.args.iter().enumerate() {
            if !fact.args[..pos].contains(&obj) {
                self.by_object[obj.index()].push(idx);
            }
            self.by_position
                .entry((fact.relation, pos as u32, obj))
                .or_default()
                .push(idx);
        }
        let mut distinct: Vec<ObjectId> = fact.args.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() == 1 {
            self.by_pair
                .entry((distinct[0], distinct[0]))
                .or_default()
                .push(idx);
        }
        for (i, &a) in distinct.iter().enumerate() {
            for &b in &distinct[i + 1..] {
                self.by_pair.entry((a, b)).or_default().push(idx);
            }
        }
        self.facts.push(fact);
        Ok(true)
    }

    /// Convenience for building small structures by name.
    pub fn add_named(&mut self, relation: &str, args: &[&str]) -> Result<bool> {
        let rel = self.intern_relation(relation, args.len())?;
        let ids: Vec<ObjectId> = args.iter().map(|a| self.intern_object(a)).collect();
        self.add_fact(Fact::new(rel, ids))
    }

    pub fn holds(&self, fact: &Fact) -> bool {
        self.holds_args(fact.relation, &fact.args)
    }

    pub fn holds_args(&self, relation: RelationId, args: &[ObjectId]) -> bool {
        let mut stack = [0u32; 8];
        if args.len() < stack.len() {
            stack[0] = relation.0;
            for (slot, a) in stack[1..].iter_mut().zip(args) {
                *slot = a.0;
            }
            self.fact_lookup.contains_key(&stack[..=args.len()])
        } else {
            let mut key = Vec::new();
            lookup_key(relation, args, &mut key);
            self.fact_lookup.contains_key(key.as_slice())
        }
    }

    pub fn num_objects(&self) -> usize {
        self.object_names.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn num_facts(&self) -> usize {
        self.facts.len()
    }

    pub fn stats(&self) -> KbStats {
        KbStats {
            objects: self.num_objects(),
            relations: self.num_relations(),
            facts: self.num_facts(),
        }
    }

    pub fn objects(&self) -> impl ExactSizeIterator<Item = ObjectId> {
        (0..self.object_names.len() as u32).map(ObjectId)
    }

    pub fn relation_ids(&self) -> impl ExactSizeIterator<Item = RelationId> {
        (0..self.relations.len() as u32).map(RelationId)
    }

    pub fn relations(&self) -> &[RelationInfo] {
        &self.relations
    }

    pub fn object_name(&self, id: ObjectId) -> &str {
        &self.object_names[id.index()]
    }

    pub fn object_id(&self, name: &str) -> Option<ObjectId> {
        self.object_ids.get(name).copied()
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relations[id.index()].name
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_ids.get(name).copied()
    }

    pub fn arity(&self, id: RelationId) -> usize {
        self.relations[id.index()].arity
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn fact(&self, idx: u32) -> &Fact {
        &self.facts[idx as usize]
    }

    /// Indices of the facts of `relation`, in insertion order.
    pub fn facts_of(&self, relation: RelationId) -> &[u32] {
        self.by_relation
            .get(relation.index())
            .map_or(&[][..], Vec::as_slice)
    }

    /// Indices of the facts mentioning `object` in any position.
    pub fn facts_mentioning(&self, object: ObjectId) -> &[u32] {
        self.by_object
            .get(object.index())
            .map_or(&[][..], Vec::as_slice)
    }

    /// Indices of the facts of `relation` whose argument `position` is `object`.
    pub fn facts_with(&self, relation: RelationId, position: usize, object: ObjectId) -> &[u32] {
        self.by_position
            .get(&(relation, position as u32, object))
            .map_or(&[][..], Vec::as_slice)
    }

    pub fn check_object(&self, id: ObjectId) -> Result<()> {
        if id.index() < self.num_objects() {
            Ok(())
        } else {
            Err(Error::ObjectOutOfRange(id.0))
        }
    }

    /// Writes every fact in a canonical order (sorted by names), so equal fact
    /// sets serialize identically regardless of how they were loaded.
    pub fn write_facts<W: Write>(&self, mut out: W, format: TripleFormat) -> Result<()> {
        let mut lines: Vec<String> = self
            .facts
            .iter()
            .map(|f| self.format_fact(f, format))
            .collect();
        lines.sort_unstable();
        for line in lines {
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn format_fact(&self, fact: &Fact, format: TripleFormat) -> String {
        let rel = self.relation_name(fact.relation);
        let names = fact.args.iter().map(|&a| self.object_name(a));
        match format {
            TripleFormat::Triples if fact.args.len() == 2 => {
                format!(
                    "{}\t{}\t{}",
                    self.object_name(fact.args[0]),
                    rel,
                    self.object_name(fact.args[1])
                )
            }
            _ => std::iter::once(rel)
                .chain(names)
                .collect::<Vec<_>>()
                .join("\t"),
        }
    }

    /// Identity hash over the symbol tables (in id order) and the fact set.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for name in &self.object_names {
            hasher.update(name.as_bytes());
            hasher.update([0u8]);
        }
        hasher.update([1u8]);
        for rel in &self.relations {
            hasher.update(rel.name.as_bytes());
            hasher.update((rel.arity as u64).to_le_bytes());
        }
        hasher.update([2u8]);
        let mut facts: Vec<&Fact> = self.facts.iter().collect();
        facts.sort_unstable();
        for f in facts {
            hasher.update(f.relation.0.to_le_bytes());
            for a in f.args.iter() {
                hasher.update(a.0.to_le_bytes());
            }
        }
        hex16(&hasher.finalize())
    }

    /// The substructure induced by `carrier`: exactly the facts all of whose
    /// arguments lie in the carrier. Carrier order is kept; repeats are dropped.
    pub fn induce(&self, carrier: &[ObjectId]) -> Result<Substructure> {
        self.induce_with(carrier, None)
    }

    /// `by_pairs` forces the pair-index strategy on or off.
    fn induce_with(&self, carrier: &[ObjectId], by_pairs: Option<bool>) -> Result<Substructure> {
        let mut members = Vec::with_capacity(carrier.len());
        let mut local = HashMap::with_capacity(carrier.len());
        for &obj in carrier {
            self.check_object(obj)?;
            if let std::collections::hash_map::Entry::Vacant(e) = local.entry(obj) {
                e.insert(members.len() as u32);
                members.push(obj);
            }
        }
        let mut fact_ids = Vec::new();
        let incident: usize = members
            .iter()
            .map(|&o| self.facts_mentioning(o).len())
            .sum();
        let pairs = members.len() * (members.len() + 1) / 2;
        if !by_pairs.unwrap_or(incident > 4 * pairs) {
            for &obj in &members {
                for &fi in self.facts_mentioning(obj) {
                    let fact = &self.facts[fi as usize];
                    if fact.args[0] == obj && fact.args.iter().all(|a| local.contains_key(a)) {
                        fact_ids.push(fi);
                    }
                }
            }
        } else {
            // hubs in the carrier: look facts up pair by pair instead
            let mut sorted = members.clone();
            sorted.sort_unstable();
            for (i, &a) in sorted.iter().enumerate() {
                for &b in &sorted[i..] {
                    if let Some(list) = self.by_pair.get(&(a, b)) {
                        for &fi in list {
                            let fact = &self.facts[fi as usize];
                            if fact.args.len() <= 2
                                || fact.args.iter().all(|x| local.contains_key(x))
                            {
                                fact_ids.push(fi);
                            }
                        }
                    }
                }
            }
        }
        fact_ids.sort_unstable();
        fact_ids.dedup();
        let facts: Vec<Fact> = fact_ids
            .iter()
            .map(|&i| self.facts[i as usize].clone())
            .collect();
        Ok(Substructure::from_parts(members, local, facts))
    }
}

pub(crate) fn hex16(bytes: &[u8]) -> String {
    bytes[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn for_each_record<R, F>(reader: R, format: TripleFormat, mut f: F) -> Result<()>
where
    R: BufRead,
    F: FnMut(usize, &str, &[&str]) -> Result<()>,
{
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if let Some(pos) = fields.iter().position(|f| f.is_empty()) {
            return Err(Error::MalformedLine {
                line: line_no,
                message: format!("field {} is empty", pos + 1),
            });
        }
        match format {
            TripleFormat::Triples => {
                if fields.len() != 3 {
                    return Err(Error::MalformedLine {
                        line: line_no,
                        message: format!(
                            "expected 3 tab-separated fields (head, relation, tail), found {}",
                            fields.len()
                        ),
                    });
                }
                f(line_no, fields[1], &[fields[0], fields[2]])?;
            }
            TripleFormat::NAry => {
                if fields.len() < 2 {
                    return Err(Error::MalformedLine {
                        line: line_no,
                        message: "expected a relation followed by at least one argument".into(),
                    });
                }
                f(line_no, fields[0], &fields[1..])?;
            }
        }
    }
    Ok(())
}

/// The substructure `<C>` induced by a carrier set `C`.
///
/// Besides the global facts it keeps a local view where carrier members are
/// renumbered `0..|C|`; evaluation works on local indices only.
#[derive(Clone, Debug)]
pub struct Substructure {
    carrier: Vec<ObjectId>,
    local: HashMap<ObjectId, u32>,
    facts: Vec<Fact>,
    atoms: HashMap<RelationId, HashSet<Box<[u32]>>>,
}

impl Substructure {
    fn from_parts(carrier: Vec<ObjectId>, local: HashMap<ObjectId, u32>, facts: Vec<Fact>) -> Self {
        let mut atoms: HashMap<RelationId, HashSet<Box<[u32]>>> = HashMap::new();
        for f in &facts {
            let key: Box<[u32]> = f.args.iter().map(|a| local[a]).collect();
            atoms.entry(f.relation).or_default().insert(key);
        }
        Substructure {
            carrier,
            local,
            facts,
            atoms,
        }
    }

    pub fn carrier(&self) -> &[ObjectId] {
        &self.carrier
    }

    pub fn len(&self) -> usize {
        self.carrier.len()
    }

    pub fn is_empty(&self) -> bool {
        self.carrier.is_empty()
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn contains(&self, obj: ObjectId) -> bool {
        self.local.contains_key(&obj)
    }

    /// Position of `obj` in the carrier, if it is a member.
    pub fn local_index(&self, obj: ObjectId) -> Option<u32> {
        self.local.get(&obj).copied()
    }

    pub fn member(&self, local: u32) -> ObjectId {
        self.carrier[local as usize]
    }

    /// Whether the relation has at least one fact inside the carrier.
    pub fn has_relation(&self, relation: RelationId) -> bool {
        self.atoms.contains_key(&relation)
    }

    pub fn present_relations(&self) -> impl Iterator<Item = RelationId> + '_ {
        self.atoms.keys().copied()
    }

    /// Membership test on local indices.
    #[inline]
    pub fn holds_local(&self, relation: RelationId, args: &[u32]) -> bool {
        self.atoms
            .get(&relation)
            .is_some_and(|set| set.contains(args))
    }

    pub fn holds(&self, fact: &Fact) -> bool {
        let local: Option<Vec<u32>> = fact.args.iter().map(|a| self.local_index(*a)).collect();
        local.is_some_and(|l| self.holds_local(fact.relation, &l))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kb_from(lines: &str) -> KnowledgeBase {
        KnowledgeBase::load_triples(lines.as_bytes()).unwrap()
    }

    #[test]
    fn duplicate_lines_collapse() {
        let kb = kb_from("a\tr\tb\na\tr\tb\n");
        assert_eq!(kb.num_facts(), 1);
        assert_eq!(kb.stats().to_string(), "|D|=2 |R|=1 |facts|=1");
    }

    #[test]
    fn first_appearance_ids_and_crlf() {
        let kb = kb_from("x\tp\ty\r\n\r\n\ny\tq\tz\r\n");
        assert_eq!(kb.object_id("x"), Some(ObjectId(0)));
        assert_eq!(kb.object_id("y"), Some(ObjectId(1)));
        assert_eq!(kb.object_id("z"), Some(ObjectId(2)));
        assert_eq!(kb.relation_id("q"), Some(RelationId(1)));
        assert_eq!(kb.arity(RelationId(0)), 2);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = KnowledgeBase::load_triples("a\tr\tb\nbad line\n".as_bytes()).unwrap_err();
        match err {
            Error::MalformedLine { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(KnowledgeBase::load_triples("a\tr\tb\tc\n".as_bytes()).is_err());
    }

    #[test]
    fn empty_stream_is_empty_kb() {
        let kb = kb_from("");
        assert_eq!(kb.stats().to_string(), "|D|=0 |R|=0 |facts|=0");
    }

    #[test]
    fn nary_loader_and_arity_check() {
        let kb = KnowledgeBase::load_nary("t\ta\tb\tc\nu\ta\n".as_bytes()).unwrap();
        assert_eq!(kb.arity(kb.relation_id("t").unwrap()), 3);
        assert_eq!(kb.arity(kb.relation_id("u").unwrap()), 1);
        let err = KnowledgeBase::load_nary("t\ta\tb\tc\nt\ta\tb\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MalformedLine { line: 2, .. }));
    }

    #[test]
    fn holds_and_idempotent_add() {
        let mut kb = KnowledgeBase::new();
        let r = kb.intern_relation("r", 2).unwrap();
        let a = kb.intern_object("a");
        let b = kb.intern_object("b");
        let fact = Fact::binary(r, a, b);
        assert!(!kb.holds(&fact));
        assert!(kb.add_fact(fact.clone()).unwrap());
        assert!(kb.holds(&fact));
        assert!(!kb.add_fact(fact.clone()).unwrap());
        assert_eq!(kb.num_facts(), 1);
        let err = kb.add_fact(Fact::new(r, vec![a])).unwrap_err();
        assert!(matches!(
            err,
            Error::ArityMismatch {
                expected: 2,
                found: 1,
                ..
            }
        ));
    }

    #[test]
    fn induce_examples() {
        let kb = kb_from("a\tr\tb\nb\tr\tc\n");
        let id = |n| kb.object_id(n).unwrap();
        let sub = kb.induce(&[id("a"), id("b")]).unwrap();
        assert_eq!(sub.facts().len(), 1);
        assert!(sub.holds(&Fact::binary(RelationId(0), id("a"), id("b"))));
        let all: Vec<ObjectId> = kb.objects().collect();
        assert_eq!(kb.induce(&all).unwrap().facts().len(), 2);
        assert!(kb.induce(&[id("a"), id("c")]).unwrap().facts().is_empty());
        assert!(matches!(
            kb.induce(&[ObjectId(99)]),
            Err(Error::ObjectOutOfRange(99))
        ));
        let sub = kb.induce(&[id("c"), id("a"), id("c")]).unwrap();
        assert_eq!(sub.carrier(), &[id("c"), id("a")]);
    }

    #[test]
    fn resolve_skips_unknown_symbols() {
        let kb = kb_from("a\tr\tb\n");
        let (facts, skipped) = kb
            .resolve_facts(
                "a\tr\tb\na\ts\tb\nz\tr\tb\n".as_bytes(),
                TripleFormat::Triples,
            )
            .unwrap();
        assert_eq!(facts.len(), 1);
        assert_eq!(skipped, 2);
    }

    fn arb_kb() -> impl Strategy<Value = KnowledgeBase> {
        proptest::collection::vec(
            (0u32..3, 1usize..4, proptest::collection::vec(0u32..12, 3)),
            0..40,
        )
        .prop_map(|raw| {
            let mut kb = KnowledgeBase::new();
            for i in 0..12 {
                kb.intern_object(&format!("o{i}"));
            }
            for (rel, _, args) in &raw {
                let arity = 1 + (*rel as usize);
                let r = kb.intern_relation(&format!("r{rel}"), arity).unwrap();
                let args: Vec<ObjectId> = args[..arity].iter().map(|&a| ObjectId(a)).collect();
                kb.add_fact(Fact::new(r, args)).unwrap();
            }
            kb
        })
    }

    proptest! {
        #[test]
        fn index_lookups_match_linear_scan(kb in arb_kb()) {
            for rel in kb.relation_ids() {
                let scan: Vec<u32> = (0..kb.num_facts() as u32)
                    .filter(|&i| kb.fact(i).relation == rel)
                    .collect();
                prop_assert_eq!(kb.facts_of(rel), scan.as_slice());
                for pos in 0..kb.arity(rel) {
                    for obj in kb.objects() {
                        let scan: Vec<u32> = (0..kb.num_facts() as u32)
                            .filter(|&i| kb.fact(i).relation == rel && kb.fact(i).args[pos] == obj)
                            .collect();
                        prop_assert_eq!(kb.facts_with(rel, pos, obj), scan.as_slice());
                    }
                }
            }
        }

        #[test]
        fn induce_matches_brute_force(kb in arb_kb(), mask in 0u32..(1 << 12)) {
            let carrier: Vec<ObjectId> = (0..12).filter(|i| mask & (1 << i) != 0).map(ObjectId).collect();
            let expected: Vec<Fact> = kb.facts().iter()
                .filter(|f| f.args.iter().all(|a| carrier.contains(a)))
                .cloned()
                .collect();
            for strategy in [None, Some(false), Some(true)] {
                let sub = kb.induce_with(&carrier, strategy).unwrap();
                prop_assert_eq!(sub.facts(), expected.as_slice());
            }
        }

        #[test]
        fn serialization_is_order_independent(
            lines in proptest::collection::vec((0u8..6, 0u8..3, 0u8..6), 0..30),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let text: Vec<String> = lines.iter().map(|(h, r, t)| format!("e{h}\tr{r}\te{t}")).collect();
            let mut shuffled = text.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let dump = |lines: &[String]| {
                let kb = KnowledgeBase::load_triples(lines.join("\n").as_bytes()).unwrap();
                let mut out = Vec::new();
                kb.write_facts(&mut out, TripleFormat::Triples).unwrap();
                out
            };
            let first = dump(&text);
            prop_assert_eq!(&first, &dump(&shuffled));
            let reloaded = KnowledgeBase::load_triples(first.as_slice()).unwrap();
            let mut again = Vec::new();
            reloaded.write_facts(&mut again, TripleFormat::Triples).unwrap();
            prop_assert_eq!(first, again);
        }
    }
}
