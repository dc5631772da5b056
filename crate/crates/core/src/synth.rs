//! Synthetic knowledge bases with a known generating process.

use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::kb::{Fact, KnowledgeBase, ObjectId, RelationId};
use crate::rng::{self, StreamRng};

/// A training KB plus held-out facts resolved against its symbol tables.
#[derive(Clone, Debug)]
pub struct Split {
    pub train: KnowledgeBase,
    pub valid: Vec<Fact>,
    pub test: Vec<Fact>,
}

impl Split {
    /// Every fact of the split, for filtered ranking.
    pub fn all_held_out(&self) -> impl Iterator<Item = &Fact> {
        self.valid.iter().chain(&self.test)
    }
}

const TAG_SYNTH: u64 = 0x7379_6e74;

fn stream(seed: u64, what: u64) -> StreamRng {
    rng::stream(seed, &[TAG_SYNTH, what])
}

fn domain(kb: &mut KnowledgeBase, n: usize) -> Vec<ObjectId> {
    (0..n).map(|i| kb.intern_object(&format!("e{i}"))).collect()
}

/// `r1`, `r2` random with edge probability `density` over ordered pairs of
/// distinct objects, and `r3(x,z)` iff `r1(x,y) & r2(y,z)` for some `y`. A
/// `holdout` fraction of the `r3` facts goes to the test split.
pub fn planted_rule(objects: usize, density: f64, holdout: f64, seed: u64) -> Split {
    let mut kb = KnowledgeBase::new();
    let ids = domain(&mut kb, objects);
    let r1 = kb.intern_relation("r1", 2).expect("fresh");
    let r2 = kb.intern_relation("r2", 2).expect("fresh");
    let r3 = kb.intern_relation("r3", 2).expect("fresh");
    let mut rng = stream(seed, 1);
    let mut edges = |rel: RelationId, kb: &mut KnowledgeBase| {
        let mut out = vec![Vec::new(); objects];
        for &a in &ids {
            for &b in &ids {
                if a != b && rng.gen_bool(density) {
                    kb.add_fact(Fact::binary(rel, a, b)).expect("valid");
                    out[a.index()].push(b);
                }
            }
        }
        out
    };
    let succ1 = edges(r1, &mut kb);
    let succ2 = edges(r2, &mut kb);
    let mut derived = std::collections::BTreeSet::new();
    for &x in &ids {
        for &y in &succ1[x.index()] {
            for &z in &succ2[y.index()] {
                derived.insert((x, z));
            }
        }
    }
    let mut derived: Vec<(ObjectId, ObjectId)> = derived.into_iter().collect();
    let mut rng = stream(seed, 2);
    derived.shuffle(&mut rng);
    let n_test = (derived.len() as f64 * holdout).round() as usize;
    let test = derived[..n_test]
        .iter()
        .map(|&(x, z)| Fact::binary(r3, x, z))
        .collect();
    for &(x, z) in &derived[n_test..] {
        kb.add_fact(Fact::binary(r3, x, z)).expect("valid");
    }
    Split {
        train: kb,
        valid: Vec::new(),
        test,
    }
}

/// Relation pairs `(r, inverse)` and symmetric relations of the WordNet-like
/// schema.
pub const WN_INVERSE_PAIRS: &[(&str, &str)] = &[
    ("_hypernym", "_hyponym"),
    ("_instance_hypernym", "_instance_hyponym"),
    ("_member_meronym", "_member_holonym"),
    ("_part_of", "_has_part"),
    ("_synset_domain_topic_of", "_member_of_domain_topic"),
    ("_synset_domain_region_of", "_member_of_domain_region"),
    ("_synset_domain_usage_of", "_member_of_domain_usage"),
];

pub const WN_SYMMETRIC: &[&str] = &[
    "_derivationally_related_form",
    "_similar_to",
    "_also_see",
    "_verb_group",
];

/// A lexical-hierarchy KB with the 18-relation schema of WordNet: a
/// preferential-attachment hypernym forest, part and member links, symmetric
/// lexical links and a few domain hubs. Most facts come with their inverse,
/// and `test_fraction` of all facts are held out for validation and test each.
pub fn wordnet_like(entities: usize, test_fraction: f64, seed: u64) -> Split {
    let mut kb = KnowledgeBase::new();
    let ids = domain(&mut kb, entities);
    let mut rel = |n: &str| kb.intern_relation(n, 2).expect("fresh");
    let pairs: Vec<(RelationId, RelationId)> = WN_INVERSE_PAIRS
        .iter()
        .map(|(a, b)| (rel(a), rel(b)))
        .collect();
    let sym: Vec<RelationId> = WN_SYMMETRIC.iter().map(|n| rel(n)).collect();
    let mut rng = stream(seed, 3);
    let mut facts: Vec<Fact> = Vec::new();
    let mut seen: HashSet<(RelationId, ObjectId, ObjectId)> = HashSet::new();
    let mut push = |facts: &mut Vec<Fact>, r: RelationId, a: ObjectId, b: ObjectId| {
        if a != b && seen.insert((r, a, b)) {
            facts.push(Fact::binary(r, a, b));
        }
    };

    // hypernym forest; a node is attached to a random earlier node or, half
    // of the time, to that node's parent, which favours popular parents
    let mut parent: Vec<Option<usize>> = vec![None; entities];
    for i in 1..entities {
        if rng.gen_bool(0.05) {
            continue;
        }
        let mut p = rng.gen_range(0..i);
        if let (true, Some(pp)) = (rng.gen_bool(0.5), parent[p]) {
            p = pp;
        }
        parent[i] = Some(p);
        let (up, down) = if rng.gen_bool(0.1) {
            pairs[1]
        } else {
            pairs[0]
        };
        push(&mut facts, up, ids[i], ids[p]);
        push(&mut facts, down, ids[p], ids[i]);
    }
    let mut random_pairs = |facts: &mut Vec<Fact>,
                            rng: &mut StreamRng,
                            count: usize,
                            (fwd, inv): (RelationId, RelationId)| {
        for _ in 0..count {
            let a = ids[rng.gen_range(0..entities)];
            let b = ids[rng.gen_range(0..entities)];
            push(facts, fwd, a, b);
            push(facts, inv, b, a);
        }
    };
    random_pairs(&mut facts, &mut rng, entities / 5, pairs[2]);
    random_pairs(&mut facts, &mut rng, entities / 5, pairs[3]);
    for (share, r) in [(0.6, sym[0]), (0.05, sym[1]), (0.03, sym[3])] {
        random_pairs(
            &mut facts,
            &mut rng,
            (entities as f64 * share) as usize,
            (r, r),
        );
    }
    // also_see is only partly symmetric
    for _ in 0..entities * 3 / 100 {
        let a = ids[rng.gen_range(0..entities)];
        let b = ids[rng.gen_range(0..entities)];
        push(&mut facts, sym[2], a, b);
        if rng.gen_bool(0.6) {
            push(&mut facts, sym[2], b, a);
        }
    }
    for (hubs, share, pair) in [
        (30, 0.08, pairs[4]),
        (10, 0.02, pairs[5]),
        (5, 0.02, pairs[6]),
    ] {
        let hub_ids: Vec<ObjectId> = (0..hubs).map(|_| ids[rng.gen_range(0..entities)]).collect();
        for _ in 0..(entities as f64 * share) as usize {
            let x = ids[rng.gen_range(0..entities)];
            let h = hub_ids[rng.gen_range(0..hubs)];
            push(&mut facts, pair.0, x, h);
            push(&mut facts, pair.1, h, x);
        }
    }

    facts.shuffle(&mut stream(seed, 4));
    let n_held = (facts.len() as f64 * test_fraction).round() as usize;
    let test = facts[..n_held].to_vec();
    let valid = facts[n_held..2 * n_held].to_vec();
    for f in &facts[2 * n_held..] {
        kb.add_fact(f.clone()).expect("valid");
    }
    Split {
        train: kb,
        valid,
        test,
    }
}

/// A degree-skewed KB: relation frequencies and entity popularity follow
/// power laws, so a few hub entities take part in a large share of facts.
pub fn skewed(entities: usize, relations: usize, facts: usize, seed: u64) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    let ids = domain(&mut kb, entities);
    let rels: Vec<RelationId> = (0..relations)
        .map(|i| kb.intern_relation(&format!("/rel/{i}"), 2).expect("fresh"))
        .collect();
    let mut rng = stream(seed, 5);
    let mut popularity: Vec<f64> = (0..entities)
        .map(|i| 1.0 / ((i + 1) as f64).powf(0.75))
        .collect();
    popularity.shuffle(&mut rng);
    let entity_dist = WeightedIndex::new(&popularity).expect("positive weights");
    let rel_weights: Vec<f64> = (0..relations)
        .map(|i| 1.0 / ((i + 1) as f64).powf(1.1))
        .collect();
    let rel_dist = WeightedIndex::new(&rel_weights).expect("positive weights");
    let mut attempts = 0;
    while kb.num_facts() < facts && attempts < facts * 20 {
        attempts += 1;
        let r = rels[rel_dist.sample(&mut rng)];
        let a = ids[entity_dist.sample(&mut rng)];
        let b = ids[entity_dist.sample(&mut rng)];
        if a != b {
            kb.add_fact(Fact::binary(r, a, b)).expect("valid");
        }
    }
    kb
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse, result_set, TargetQuery};

    #[test]
    fn planted_rule_holds_on_the_full_kb() {
        let split = planted_rule(60, 0.05, 0.1, 3);
        let mut full = split.train.clone();
        for f in &split.test {
            full.add_fact(f.clone()).unwrap();
        }
        let q = TargetQuery::new(parse("exists y . r1(s1, y) & r2(y, s2)").unwrap()).unwrap();
        let derived = result_set(&full, &q).unwrap();
        let r3 = result_set(&full, &TargetQuery::binary("r3")).unwrap();
        assert_eq!(derived, r3);
        assert!(!split.test.is_empty());
        assert!(split.test.iter().all(|f| !split.train.holds(f)));
    }

    #[test]
    fn wordnet_like_schema() {
        let split = wordnet_like(500, 0.03, 1);
        assert_eq!(split.train.num_relations(), 18);
        assert_eq!(split.test.len(), split.valid.len());
        let again = wordnet_like(500, 0.03, 1);
        assert_eq!(again.train.content_hash(), split.train.content_hash());
    }

    #[test]
    fn skewed_is_skewed() {
        let kb = skewed(2000, 50, 10_000, 2);
        assert_eq!(kb.num_facts(), 10_000);
        let mut degrees: Vec<usize> = kb.objects().map(|o| kb.facts_mentioning(o).len()).collect();
        degrees.sort_unstable_by(|a, b| b.cmp(a));
        let mean = 2.0 * 10_000.0 / 2000.0;
        assert!(degrees[0] as f64 > 10.0 * mean, "{}", degrees[0]);
    }
}
