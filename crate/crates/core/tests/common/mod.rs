//! Brute-force oracles and random instance generators shared by the
//! integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use gaifman::kb::{Fact, KnowledgeBase, ObjectId};
use gaifman::logic::{Formula, Term};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// Shape limits of a random knowledge base.
#[derive(Clone, Copy, Debug)]
pub struct KbShape {
    pub max_objects: usize,
    pub max_relations: usize,
    pub max_arity: usize,
    pub max_facts: usize,
}

impl Default for KbShape {
    fn default() -> Self {
        KbShape {
            max_objects: 50,
            max_relations: 5,
            max_arity: 3,
            max_facts: 80,
        }
    }
}

/// Objects are `o0..`, relations `p0..` with arities in `1..=max_arity`.
/// Every object is interned, including ones without facts.
pub fn random_kb(rng: &mut ChaCha8Rng, shape: KbShape) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    let n = rng.gen_range(1..=shape.max_objects);
    let objects: Vec<ObjectId> = (0..n).map(|i| kb.intern_object(&format!("o{i}"))).collect();
    let rels: Vec<_> = (0..rng.gen_range(1..=shape.max_relations))
        .map(|i| {
            let arity = rng.gen_range(1..=shape.max_arity);
            kb.intern_relation(&format!("p{i}"), arity).unwrap()
        })
        .collect();
    let facts = rng.gen_range(0..=shape.max_facts);
    for _ in 0..facts {
        let r = *rels.choose(rng).unwrap();
        let args: Vec<ObjectId> = (0..kb.arity(r))
            .map(|_| *objects.choose(rng).unwrap())
            .collect();
        kb.add_fact(Fact::new(r, args)).unwrap();
    }
    kb
}

/// A KB over binary relations only.
pub fn random_binary_kb(
    rng: &mut ChaCha8Rng,
    objects: usize,
    relations: usize,
    facts: usize,
) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    let ids: Vec<ObjectId> = (0..objects)
        .map(|i| kb.intern_object(&format!("o{i}")))
        .collect();
    let rels: Vec<_> = (0..relations)
        .map(|i| kb.intern_relation(&format!("p{i}"), 2).unwrap())
        .collect();
    for _ in 0..facts {
        let r = *rels.choose(rng).unwrap();
        kb.add_fact(Fact::binary(
            r,
            *ids.choose(rng).unwrap(),
            *ids.choose(rng).unwrap(),
        ))
        .unwrap();
    }
    kb
}

pub fn random_tuple(rng: &mut ChaCha8Rng, kb: &KnowledgeBase, len: usize) -> Vec<ObjectId> {
    (0..len)
        .map(|_| ObjectId(rng.gen_range(0..kb.num_objects() as u32)))
        .collect()
}

pub fn random_subset(rng: &mut ChaCha8Rng, kb: &KnowledgeBase, max: usize) -> Vec<ObjectId> {
    let mut all: Vec<ObjectId> = kb.objects().collect();
    all.shuffle(rng);
    all.truncate(rng.gen_range(0..=max.min(all.len())));
    all
}

/// What a random formula may mention.
#[derive(Clone, Debug)]
pub struct FormulaShape {
    pub targets: usize,
    pub counting: usize,
    pub max_quantifier_depth: usize,
    pub constants: bool,
}

const VARS: [&str; 3] = ["x", "y", "z"];

/// A random formula over the schema of `kb`. Bound variable names repeat, so
/// shadowing occurs. Every counting variable `u1..um` that is allowed may or
/// may not occur.
pub fn random_formula(rng: &mut ChaCha8Rng, kb: &KnowledgeBase, shape: &FormulaShape) -> Formula {
    let mut scope = Vec::new();
    gen_node(rng, kb, shape, shape.max_quantifier_depth, 4, &mut scope)
}

fn gen_node(
    rng: &mut ChaCha8Rng,
    kb: &KnowledgeBase,
    shape: &FormulaShape,
    quantifiers: usize,
    height: usize,
    scope: &mut Vec<String>,
) -> Formula {
    let roll = if height == 0 { 0 } else { rng.gen_range(0..10) };
    match roll {
        0..=3 => gen_atom(rng, kb, shape, scope),
        4 => Formula::not(gen_node(rng, kb, shape, quantifiers, height - 1, scope)),
        5..=7 => {
            let a = gen_node(rng, kb, shape, quantifiers, height - 1, scope);
            let b = gen_node(rng, kb, shape, quantifiers, height - 1, scope);
            match rng.gen_range(0..3) {
                0 => Formula::and(a, b),
                1 => Formula::or(a, b),
                _ => Formula::implies(a, b),
            }
        }
        _ if quantifiers == 0 => gen_atom(rng, kb, shape, scope),
        _ => {
            let v = VARS.choose(rng).unwrap().to_string();
            scope.push(v.clone());
            let body = gen_node(rng, kb, shape, quantifiers - 1, height - 1, scope);
            scope.pop();
            if rng.gen_bool(0.5) {
                Formula::exists(v, body)
            } else {
                Formula::forall(v, body)
            }
        }
    }
}

fn gen_atom(
    rng: &mut ChaCha8Rng,
    kb: &KnowledgeBase,
    shape: &FormulaShape,
    scope: &[String],
) -> Formula {
    let rel = &kb.relations()[rng.gen_range(0..kb.num_relations())];
    let terms = (0..rel.arity)
        .map(|_| loop {
            match rng.gen_range(0..4) {
                0 if shape.targets > 0 => break Term::Target(rng.gen_range(1..=shape.targets)),
                1 if shape.counting > 0 => break Term::Counting(rng.gen_range(1..=shape.counting)),
                2 if !scope.is_empty() => break Term::var(scope.choose(rng).unwrap().clone()),
                3 if shape.constants && rng.gen_bool(0.3) => {
                    let i = rng.gen_range(0..kb.num_objects() + 2);
                    // indices past the domain name objects the KB does not have
                    break Term::Const(format!("o{i}"));
                }
                _ => {}
            }
        })
        .collect();
    Formula::atom(rel.name.clone(), terms)
}

/// Whether the compiler will accept `f` against `kb` (constants must exist).
pub fn constants_known(kb: &KnowledgeBase, f: &Formula) -> bool {
    fn walk(kb: &KnowledgeBase, f: &Formula) -> bool {
        match f {
            Formula::Atom(a) => a.terms.iter().all(|t| match t {
                Term::Const(c) => kb.object_id(c).is_some(),
                _ => true,
            }),
            Formula::Not(x) | Formula::Exists(_, x) | Formula::Forall(_, x) => walk(kb, x),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                walk(kb, a) && walk(kb, b)
            }
        }
    }
    walk(kb, f)
}

/// Variable assignment of the grounding oracle.
pub struct Grounding<'a> {
    pub kb: &'a KnowledgeBase,
    pub carrier: &'a BTreeSet<ObjectId>,
    pub targets: &'a [ObjectId],
    pub counting: BTreeMap<usize, ObjectId>,
}

impl Grounding<'_> {
    /// Truth of `f` in the substructure induced by the carrier, by direct
    /// recursion on the syntax: an atom holds iff its arguments are all in the
    /// carrier and the fact is in the KB; quantifiers range over the carrier.
    pub fn holds(&self, f: &Formula, env: &mut HashMap<String, ObjectId>) -> bool {
        match f {
            Formula::Atom(a) => {
                let Some(rel) = self.kb.relation_id(&a.relation) else {
                    return false;
                };
                let mut args = Vec::with_capacity(a.terms.len());
                for t in &a.terms {
                    let obj = match t {
                        Term::Target(i) => Some(self.targets[i - 1]),
                        Term::Counting(j) => Some(self.counting[j]),
                        Term::Var(v) => Some(env[v]),
                        Term::Const(c) => self.kb.object_id(c),
                    };
                    match obj {
                        Some(o) if self.carrier.contains(&o) => args.push(o),
                        _ => return false,
                    }
                }
                self.kb.holds(&Fact::new(rel, args))
            }
            Formula::Not(x) => !self.holds(x, env),
            Formula::And(a, b) => self.holds(a, env) && self.holds(b, env),
            Formula::Or(a, b) => self.holds(a, env) || self.holds(b, env),
            Formula::Implies(a, b) => !self.holds(a, env) || self.holds(b, env),
            Formula::Exists(v, body) | Formula::Forall(v, body) => {
                let saved = env.get(v).copied();
                let exists = matches!(f, Formula::Exists(..));
                let mut result = !exists;
                for &o in self.carrier {
                    env.insert(v.clone(), o);
                    let b = self.holds(body, env);
                    if exists && b {
                        result = true;
                        break;
                    }
                    if !exists && !b {
                        result = false;
                        break;
                    }
                }
                match saved {
                    Some(o) => env.insert(v.clone(), o),
                    None => env.remove(v),
                };
                result
            }
        }
    }
}

/// `<C> |= f[s/targets]` by exhaustive grounding.
pub fn ground_evaluate(
    kb: &KnowledgeBase,
    carrier: &[ObjectId],
    f: &Formula,
    targets: &[ObjectId],
) -> bool {
    let carrier: BTreeSet<ObjectId> = carrier.iter().copied().collect();
    let g = Grounding {
        kb,
        carrier: &carrier,
        targets,
        counting: BTreeMap::new(),
    };
    g.holds(f, &mut HashMap::new())
}

/// Number of assignments of the counting variables of `f` to carrier members
/// under which `f` holds, enumerating `C^m` explicitly.
pub fn ground_count(
    kb: &KnowledgeBase,
    carrier: &[ObjectId],
    f: &Formula,
    targets: &[ObjectId],
) -> u64 {
    let carrier: BTreeSet<ObjectId> = carrier.iter().copied().collect();
    let vars: Vec<usize> = f.counting_vars().into_iter().collect();
    let members: Vec<ObjectId> = carrier.iter().copied().collect();
    let mut assignments: Vec<Vec<ObjectId>> = vec![Vec::new()];
    for _ in &vars {
        assignments = assignments
            .into_iter()
            .flat_map(|prefix| {
                members.iter().map(move |&o| {
                    let mut next = prefix.clone();
                    next.push(o);
                    next
                })
            })
            .collect();
    }
    assignments
        .into_iter()
        .filter(|values| {
            let g = Grounding {
                kb,
                carrier: &carrier,
                targets,
                counting: vars.iter().copied().zip(values.iter().copied()).collect(),
            };
            g.holds(f, &mut HashMap::new())
        })
        .count() as u64
}

/// Gaifman edges straight from the definition: two distinct objects are
/// adjacent iff some fact mentions both.
pub fn brute_force_edges(kb: &KnowledgeBase) -> Vec<BTreeSet<ObjectId>> {
    let mut adj = vec![BTreeSet::new(); kb.num_objects()];
    for a in kb.objects() {
        for b in kb.objects() {
            if a != b
                && kb
                    .facts()
                    .iter()
                    .any(|f| f.args.contains(&a) && f.args.contains(&b))
            {
                adj[a.index()].insert(b);
            }
        }
    }
    adj
}

/// All-pairs shortest path lengths; `usize::MAX` means unreachable.
pub fn floyd_warshall(adj: &[BTreeSet<ObjectId>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut d = vec![vec![usize::MAX; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in &adj[i] {
            d[i][j.index()] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if d[i][k] == usize::MAX {
                continue;
            }
            for j in 0..n {
                if d[k][j] != usize::MAX && d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// `N_r(center)` read off a distance matrix.
pub fn ball_from_distances(
    dist: &[Vec<usize>],
    center: &[ObjectId],
    radius: usize,
) -> Vec<ObjectId> {
    (0..dist.len())
        .filter(|&v| center.iter().any(|c| dist[c.index()][v] <= radius))
        .map(|v| ObjectId(v as u32))
        .collect()
}

/// Every tuple of `D^n` satisfying `f` in the whole KB, by enumeration.
pub fn brute_force_result_set(
    kb: &KnowledgeBase,
    f: &Formula,
    arity: usize,
) -> BTreeSet<Vec<ObjectId>> {
    let all: Vec<ObjectId> = kb.objects().collect();
    let mut tuples: Vec<Vec<ObjectId>> = vec![Vec::new()];
    for _ in 0..arity {
        tuples = tuples
            .into_iter()
            .flat_map(|p| {
                all.iter().map(move |&o| {
                    let mut t = p.clone();
                    t.push(o);
                    t
                })
            })
            .collect();
    }
    tuples
        .into_iter()
        .filter(|t| ground_evaluate(kb, &all, f, t))
        .collect()
}
