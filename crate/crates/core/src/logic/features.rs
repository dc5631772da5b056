use std::collections::HashSet;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use super::ast::{Formula, Term};
use super::parser::parse_with;
use crate::error::{Error, Result};
use crate::kb::{hex16, KnowledgeBase, RelationInfo};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureSource {
    BuiltIn,
    Parsed,
}

/// Ordered, duplicate-free list of relational features; position `i` is the
/// feature-vector coordinate of formula `i`.
#[derive(Clone, Debug)]
pub struct FeatureSet {
    formulas: Vec<Formula>,
    seen: HashSet<Formula>,
    pub source: FeatureSource,
}

impl PartialEq for FeatureSet {
    fn eq(&self, other: &Self) -> bool {
        self.formulas == other.formulas
    }
}

impl FeatureSet {
    pub fn new(source: FeatureSource) -> Self {
        FeatureSet {
            formulas: Vec::new(),
            seen: HashSet::new(),
            source,
        }
    }

    /// Appends `f` unless an identical formula is already present.
    pub fn push(&mut self, f: Formula) -> bool {
        if self.seen.contains(&f) {
            return false;
        }
        self.seen.insert(f.clone());
        self.formulas.push(f);
        true
    }

    pub fn extend(&mut self, other: impl IntoIterator<Item = Formula>) {
        for f in other {
            self.push(f);
        }
    }

    pub fn len(&self) -> usize {
        self.formulas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.formulas.is_empty()
    }

    pub fn formulas(&self) -> &[Formula] {
        &self.formulas
    }

    pub fn get(&self, i: usize) -> Option<&Formula> {
        self.formulas.get(i)
    }

    /// Checks that every feature only uses target variables `s1..s_arity`.
    pub fn check_targets(&self, arity: usize) -> Result<()> {
        for f in &self.formulas {
            if let Some(&t) = f.targets().iter().find(|&&t| t > arity) {
                return Err(Error::InvalidFormula(format!(
                    "feature `{f}` uses s{t} but the target query has {arity} free variable(s)"
                )));
            }
        }
        Ok(())
    }

    /// Feature file: one formula per line; `#` starts a comment.
    pub fn parse_text(text: &str, kb: Option<&KnowledgeBase>) -> Result<Self> {
        let mut set = FeatureSet::new(FeatureSource::Parsed);
        for (i, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let f = parse_with(line, kb).map_err(|e| match e {
                Error::Parse {
                    column, message, ..
                } => Error::Parse {
                    line: i + 1,
                    column,
                    message,
                },
                other => other,
            })?;
            set.push(f);
        }
        Ok(set)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for f in &self.formulas {
            let _ = writeln!(out, "{f}");
        }
        out
    }

    /// Stable content hash of the ordered formulas.
    pub fn content_hash(&self) -> String {
        hex16(&Sha256::digest(self.to_text().as_bytes()))
    }
}

impl Default for FeatureSet {
    fn default() -> Self {
        Self::new(FeatureSource::BuiltIn)
    }
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '`' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn s(i: usize) -> Term {
    Term::Target(i)
}

fn x() -> Term {
    Term::var("x")
}

/// The eight per-relation templates, in this order:
/// `r(s1,s2)`, `r(s2,s1)`, `∃x r(x,s1)`, `∃x r(s1,x)`, `∃x r(x,s2)`,
/// `∃x r(s2,x)`, `∃x r(s1,x) ∧ r(x,s2)`, `∃x r(s2,x) ∧ r(x,s1)`.
pub fn relation_templates(r: &str) -> [Formula; 8] {
    let atom = |a: Term, b: Term| Formula::atom(r, vec![a, b]);
    [
        atom(s(1), s(2)),
        atom(s(2), s(1)),
        Formula::exists("x", atom(x(), s(1))),
        Formula::exists("x", atom(s(1), x())),
        Formula::exists("x", atom(x(), s(2))),
        Formula::exists("x", atom(s(2), x())),
        Formula::exists("x", Formula::and(atom(s(1), x()), atom(x(), s(2)))),
        Formula::exists("x", Formula::and(atom(s(2), x()), atom(x(), s(1)))),
    ]
}

/// The fixed default feature set for binary relations: the eight templates of
/// [`relation_templates`] for every relation, ordered by relation id.
pub fn default_feature_set(relations: &[RelationInfo]) -> Result<FeatureSet> {
    let mut set = FeatureSet::new(FeatureSource::BuiltIn);
    for rel in relations {
        if rel.arity != 2 {
            return Err(Error::InvalidConfig(format!(
                "default features need binary relations; `{}` has arity {}",
                rel.name, rel.arity
            )));
        }
        set.extend(relation_templates(&rel.name));
    }
    Ok(set)
}

/// Two-hop path features `∃x a(s1,x) ∧ b(x,s2)` for every ordered pair of
/// binary relations. Quadratic in `|R|`; meant for small schemas.
pub fn two_hop_path_features(relations: &[RelationInfo]) -> FeatureSet {
    let mut set = FeatureSet::new(FeatureSource::BuiltIn);
    let binary: Vec<&RelationInfo> = relations.iter().filter(|r| r.arity == 2).collect();
    for a in &binary {
        for b in &binary {
            set.push(Formula::exists(
                "x",
                Formula::and(
                    Formula::atom(&a.name, vec![s(1), x()]),
                    Formula::atom(&b.name, vec![x(), s(2)]),
                ),
            ));
        }
    }
    set
}

/// `∪_r {r(s1,s2), r(s2,s1)}`: relation-membership indicators of a pair.
pub fn pair_membership_features(relations: &[RelationInfo]) -> FeatureSet {
    let mut set = FeatureSet::new(FeatureSource::BuiltIn);
    for rel in relations.iter().filter(|r| r.arity == 2) {
        set.push(Formula::atom(&rel.name, vec![s(1), s(2)]));
        set.push(Formula::atom(&rel.name, vec![s(2), s(1)]));
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse;

    fn rels(n: usize) -> Vec<RelationInfo> {
        (0..n)
            .map(|i| RelationInfo {
                name: format!("r{i}"),
                arity: 2,
            })
            .collect()
    }

    #[test]
    fn default_set_sizes() {
        assert_eq!(default_feature_set(&rels(1)).unwrap().len(), 8);
        assert_eq!(default_feature_set(&rels(18)).unwrap().len(), 144);
        assert_eq!(default_feature_set(&rels(1345)).unwrap().len(), 10_760);
    }

    #[test]
    fn single_relation_templates() {
        let set = default_feature_set(&rels(1)).unwrap();
        let expected = [
            "r0(s1, s2)",
            "r0(s2, s1)",
            "exists x . r0(x, s1)",
            "exists x . r0(s1, x)",
            "exists x . r0(x, s2)",
            "exists x . r0(s2, x)",
            "exists x . r0(s1, x) & r0(x, s2)",
            "exists x . r0(s2, x) & r0(x, s1)",
        ];
        for (f, e) in set.formulas().iter().zip(expected) {
            assert_eq!(f, &parse(e).unwrap());
            assert_eq!(f.to_string(), e);
        }
    }

    #[test]
    fn non_binary_rejected() {
        let r = vec![RelationInfo {
            name: "t".into(),
            arity: 3,
        }];
        assert!(default_feature_set(&r).is_err());
    }

    #[test]
    fn feature_file_parsing_dedups_and_reports_lines() {
        let text = "# header\nr(s1, s2)  # trailing\n\nr(s1,s2)\nexists x . r(x, `a#b`)\n";
        let set = FeatureSet::parse_text(text, None).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.source, FeatureSource::Parsed);
        let back = FeatureSet::parse_text(&set.to_text(), None).unwrap();
        assert_eq!(back, set);
        assert_eq!(back.content_hash(), set.content_hash());
        match FeatureSet::parse_text("r(s1)\nr(s1,\n", None).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn target_check() {
        let set = FeatureSet::parse_text("r(s1, s3)", None).unwrap();
        assert!(set.check_targets(2).is_err());
        assert!(set.check_targets(3).is_ok());
    }

    #[test]
    fn path_and_membership_sets() {
        assert_eq!(two_hop_path_features(&rels(3)).len(), 9);
        assert_eq!(pair_membership_features(&rels(3)).len(), 6);
    }
}
