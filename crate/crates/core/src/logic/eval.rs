//! Model checking and grounding counts over substructures.
//!
//! Formulas are compiled against a knowledge base's symbol table into a tree
//! over variable slots. Quantifiers range over the carrier of the substructure
//! being evaluated, which is exactly relativization to that carrier.

use std::collections::HashSet;

use super::ast::{Formula, Term};
use crate::error::{Error, Result};
use crate::graph::GaifmanGraph;
use crate::kb::{KnowledgeBase, ObjectId, RelationId, Substructure};

/// Local value of an object that is not in the carrier; atoms mentioning it are false.
const OUTSIDE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Arg {
    Slot(u32),
    Const(ObjectId),
}

#[derive(Clone, Debug)]
enum Node {
    Atom {
        relation: RelationId,
        args: Box<[Arg]>,
    },
    Not(Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Implies(Box<Node>, Box<Node>),
    Exists(u32, Box<Node>),
    Forall(u32, Box<Node>),
}

/// A formula resolved against a symbol table.
///
/// Slot layout: `s1..sn` occupy slots `0..n`, the distinct counting variables
/// follow in ascending order, then one slot per quantifier occurrence.
#[derive(Clone, Debug)]
pub struct CompiledFormula {
    root: Node,
    targets: usize,
    counting: Vec<usize>,
    slots: usize,
    required: Vec<RelationId>,
}

struct Compiler<'a> {
    kb: &'a KnowledgeBase,
    targets: usize,
    counting: Vec<usize>,
    next_slot: u32,
    scope: Vec<(String, u32)>,
}

impl Compiler<'_> {
    fn node(&mut self, f: &Formula) -> Result<Node> {
        Ok(match f {
            Formula::Atom(atom) => {
                let relation = self
                    .kb
                    .relation_id(&atom.relation)
                    .ok_or_else(|| Error::UnknownRelation(atom.relation.clone()))?;
                let arity = self.kb.arity(relation);
                if arity != atom.terms.len() {
                    return Err(Error::ArityMismatch {
                        relation: atom.relation.clone(),
                        expected: arity,
                        found: atom.terms.len(),
                    });
                }
                let args = atom
                    .terms
                    .iter()
                    .map(|t| self.arg(t))
                    .collect::<Result<Vec<_>>>()?;
                Node::Atom {
                    relation,
                    args: args.into_boxed_slice(),
                }
            }
            Formula::Not(x) => Node::Not(Box::new(self.node(x)?)),
            Formula::And(a, b) => Node::And(Box::new(self.node(a)?), Box::new(self.node(b)?)),
            Formula::Or(a, b) => Node::Or(Box::new(self.node(a)?), Box::new(self.node(b)?)),
            Formula::Implies(a, b) => {
                Node::Implies(Box::new(self.node(a)?), Box::new(self.node(b)?))
            }
            Formula::Exists(v, body) | Formula::Forall(v, body) => {
                let slot = self.next_slot;
                self.next_slot += 1;
                self.scope.push((v.clone(), slot));
                let body = self.node(body);
                self.scope.pop();
                let body = Box::new(body?);
                if matches!(f, Formula::Exists(..)) {
                    Node::Exists(slot, body)
                } else {
                    Node::Forall(slot, body)
                }
            }
        })
    }

    fn arg(&self, t: &Term) -> Result<Arg> {
        Ok(match t {
            Term::Target(i) => Arg::Slot((*i - 1) as u32),
            Term::Counting(j) => {
                let rank = self.counting.binary_search(j).expect("collected up front");
                Arg::Slot((self.targets + rank) as u32)
            }
            Term::Var(name) => {
                let slot = self
                    .scope
                    .iter()
                    .rev()
                    .find(|(v, _)| v == name)
                    .map(|(_, s)| *s)
                    .ok_or_else(|| Error::InvalidFormula(format!("unbound variable `{name}`")))?;
                Arg::Slot(slot)
            }
            Term::Const(name) => Arg::Const(
                self.kb
                    .object_id(name)
                    .ok_or_else(|| Error::UnknownObject(name.clone()))?,
            ),
        })
    }
}

/// Relations of which at least one fact must be present for the node to be
/// satisfiable.
fn required_relations(node: &Node) -> Vec<RelationId> {
    match node {
        Node::Atom { relation, .. } => vec![*relation],
        Node::And(a, b) => {
            let mut v = required_relations(a);
            v.extend(required_relations(b));
            v.sort_unstable();
            v.dedup();
            v
        }
        Node::Or(a, b) => {
            let rb = required_relations(b);
            required_relations(a)
                .into_iter()
                .filter(|r| rb.contains(r))
                .collect()
        }
        Node::Exists(_, body) => required_relations(body),
        Node::Not(_) | Node::Implies(..) | Node::Forall(..) => Vec::new(),
    }
}

impl CompiledFormula {
    pub fn compile(formula: &Formula, kb: &KnowledgeBase) -> Result<Self> {
        let targets = formula.targets().into_iter().max().unwrap_or(0);
        let counting: Vec<usize> = formula.counting_vars().into_iter().collect();
        let mut c = Compiler {
            kb,
            targets,
            counting,
            next_slot: 0,
            scope: Vec::new(),
        };
        c.next_slot = (targets + c.counting.len()) as u32;
        let root = c.node(formula)?;
        let required = required_relations(&root);
        Ok(CompiledFormula {
            root,
            targets,
            slots: c.next_slot as usize,
            counting: c.counting,
            required,
        })
    }

    /// Highest target index `n`; bindings must provide `s1..sn`.
    pub fn num_targets(&self) -> usize {
        self.targets
    }

    pub fn num_counting(&self) -> usize {
        self.counting.len()
    }

    pub fn is_counting(&self) -> bool {
        !self.counting.is_empty()
    }

    /// If any of these relations has no fact in a substructure, the formula is
    /// false there (and its count is zero).
    pub fn required_relations(&self) -> &[RelationId] {
        &self.required
    }

    fn check_binding(&self, binding: &[ObjectId]) -> Result<()> {
        if binding.len() < self.targets {
            return Err(Error::InvalidFormula(format!(
                "binding has {} objects but the formula uses s{}",
                binding.len(),
                self.targets
            )));
        }
        Ok(())
    }

    fn local_slots(&self, sub: &Substructure, binding: &[ObjectId]) -> Vec<u32> {
        let mut vals = vec![OUTSIDE; self.slots];
        for (slot, obj) in vals.iter_mut().zip(&binding[..self.targets]) {
            *slot = sub.local_index(*obj).unwrap_or(OUTSIDE);
        }
        vals
    }

    /// `<sub> |= phi[s/binding]`. Formulas with counting variables are rejected.
    pub fn evaluate(&self, sub: &Substructure, binding: &[ObjectId]) -> Result<bool> {
        self.check_binding(binding)?;
        if self.is_counting() {
            return Err(Error::InvalidFormula(
                "formula has counting variables; use count".into(),
            ));
        }
        Ok(self.evaluate_unchecked(sub, binding))
    }

    pub(crate) fn evaluate_unchecked(&self, sub: &Substructure, binding: &[ObjectId]) -> bool {
        let mut vals = self.local_slots(sub, binding);
        eval_local(&self.root, sub, &mut vals)
    }

    /// Number of assignments of the counting variables to carrier members that
    /// satisfy the formula.
    pub fn count(&self, sub: &Substructure, binding: &[ObjectId]) -> Result<u64> {
        self.check_binding(binding)?;
        if !self.is_counting() {
            return Err(Error::InvalidFormula(
                "formula has no counting variables; use evaluate".into(),
            ));
        }
        Ok(self.count_unchecked(sub, binding))
    }

    pub(crate) fn count_unchecked(&self, sub: &Substructure, binding: &[ObjectId]) -> u64 {
        let mut vals = self.local_slots(sub, binding);
        let first = self.targets;
        let m = self.counting.len();
        let size = sub.len() as u32;
        if size == 0 {
            return 0;
        }
        let mut total = 0;
        let mut odometer = vec![0u32; m];
        loop {
            for (i, &v) in odometer.iter().enumerate() {
                vals[first + i] = v;
            }
            if eval_local(&self.root, sub, &mut vals) {
                total += 1;
            }
            let mut i = 0;
            loop {
                if i == m {
                    return total;
                }
                odometer[i] += 1;
                if odometer[i] < size {
                    break;
                }
                odometer[i] = 0;
                i += 1;
            }
        }
    }
}

fn eval_local(node: &Node, sub: &Substructure, vals: &mut [u32]) -> bool {
    match node {
        Node::Atom { relation, args } => {
            let mut buf = [0u32; 8];
            let mut heap;
            let key: &mut [u32] = if args.len() <= buf.len() {
                &mut buf[..args.len()]
            } else {
                heap = vec![0u32; args.len()];
                &mut heap
            };
            for (k, a) in key.iter_mut().zip(args.iter()) {
                let v = match *a {
                    Arg::Slot(s) => vals[s as usize],
                    Arg::Const(o) => sub.local_index(o).unwrap_or(OUTSIDE),
                };
                if v == OUTSIDE {
                    return false;
                }
                *k = v;
            }
            sub.holds_local(*relation, key)
        }
        Node::Not(x) => !eval_local(x, sub, vals),
        Node::And(a, b) => eval_local(a, sub, vals) && eval_local(b, sub, vals),
        Node::Or(a, b) => eval_local(a, sub, vals) || eval_local(b, sub, vals),
        Node::Implies(a, b) => !eval_local(a, sub, vals) || eval_local(b, sub, vals),
        Node::Exists(slot, body) => {
            let s = *slot as usize;
            (0..sub.len() as u32).any(|l| {
                vals[s] = l;
                eval_local(body, sub, vals)
            })
        }
        Node::Forall(slot, body) => {
            let s = *slot as usize;
            (0..sub.len() as u32).all(|l| {
                vals[s] = l;
                eval_local(body, sub, vals)
            })
        }
    }
}

/// Evaluation over the whole knowledge base with every quantifier guarded by
/// membership in a fixed object set: `exists x . phi` becomes
/// `exists x . (x in N & phi)` and `forall x . phi` becomes
/// `forall x . (x in N => phi)`, with `x` ranging over the full domain.
struct Relativized<'a> {
    kb: &'a KnowledgeBase,
    members: &'a HashSet<ObjectId>,
}

impl Relativized<'_> {
    fn eval(&self, node: &Node, vals: &mut [Option<ObjectId>]) -> bool {
        match node {
            Node::Atom { relation, args } => {
                let objs: Vec<ObjectId> = args
                    .iter()
                    .map(|a| match *a {
                        Arg::Slot(s) => vals[s as usize].expect("slot bound"),
                        Arg::Const(o) => o,
                    })
                    .collect();
                self.kb.holds_args(*relation, &objs)
            }
            Node::Not(x) => !self.eval(x, vals),
            Node::And(a, b) => self.eval(a, vals) && self.eval(b, vals),
            Node::Or(a, b) => self.eval(a, vals) || self.eval(b, vals),
            Node::Implies(a, b) => !self.eval(a, vals) || self.eval(b, vals),
            Node::Exists(slot, body) => self.kb.objects().any(|x| {
                vals[*slot as usize] = Some(x);
                self.members.contains(&x) && self.eval(body, vals)
            }),
            Node::Forall(slot, body) => self.kb.objects().all(|x| {
                vals[*slot as usize] = Some(x);
                !self.members.contains(&x) || self.eval(body, vals)
            }),
        }
    }
}

/// Evaluates `phi` over the full knowledge base with its quantifiers (and
/// counting variables) relativized to `N_radius(binding)`.
///
/// This route never builds a substructure; it agrees with
/// `evaluate(induce(kb, N_r(d)), ...)` for formulas whose constants lie in the
/// neighborhood.
pub fn relativized_evaluate(
    kb: &KnowledgeBase,
    graph: &GaifmanGraph,
    formula: &CompiledFormula,
    binding: &[ObjectId],
    radius: usize,
) -> Result<bool> {
    formula.check_binding(binding)?;
    if formula.is_counting() {
        return Err(Error::InvalidFormula(
            "formula has counting variables; use relativized_count".into(),
        ));
    }
    let members = relativization_set(kb, graph, binding, radius)?;
    let rel = Relativized {
        kb,
        members: &members,
    };
    let mut vals = initial_values(formula, binding);
    Ok(rel.eval(&formula.root, &mut vals))
}

pub fn relativized_count(
    kb: &KnowledgeBase,
    graph: &GaifmanGraph,
    formula: &CompiledFormula,
    binding: &[ObjectId],
    radius: usize,
) -> Result<u64> {
    formula.check_binding(binding)?;
    if !formula.is_counting() {
        return Err(Error::InvalidFormula(
            "formula has no counting variables; use relativized_evaluate".into(),
        ));
    }
    let members = relativization_set(kb, graph, binding, radius)?;
    let rel = Relativized {
        kb,
        members: &members,
    };
    let mut vals = initial_values(formula, binding);
    let first = formula.targets;
    let m = formula.counting.len();
    let mut domain: Vec<ObjectId> = members.iter().copied().collect();
    domain.sort_unstable();
    let mut total = 0;
    let mut odometer = vec![0usize; m];
    loop {
        for (i, &g) in odometer.iter().enumerate() {
            vals[first + i] = Some(domain[g]);
        }
        if rel.eval(&formula.root, &mut vals) {
            total += 1;
        }
        let mut i = 0;
        loop {
            if i == m {
                return Ok(total);
            }
            odometer[i] += 1;
            if odometer[i] < domain.len() {
                break;
            }
            odometer[i] = 0;
            i += 1;
        }
    }
}

fn relativization_set(
    kb: &KnowledgeBase,
    graph: &GaifmanGraph,
    binding: &[ObjectId],
    radius: usize,
) -> Result<HashSet<ObjectId>> {
    for &o in binding {
        kb.check_object(o)?;
    }
    Ok(graph
        .neighborhood(binding, radius)
        .members
        .into_iter()
        .collect())
}

fn initial_values(formula: &CompiledFormula, binding: &[ObjectId]) -> Vec<Option<ObjectId>> {
    let mut vals = vec![None; formula.slots];
    for (v, o) in vals.iter_mut().zip(&binding[..formula.targets]) {
        *v = Some(*o);
    }
    vals
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse;

    fn chain() -> KnowledgeBase {
        let mut kb = KnowledgeBase::new();
        kb.add_named("r", &["a", "b"]).unwrap();
        kb.add_named("r", &["b", "c"]).unwrap();
        kb
    }

    fn ids(kb: &KnowledgeBase, names: &[&str]) -> Vec<ObjectId> {
        names.iter().map(|n| kb.object_id(n).unwrap()).collect()
    }

    fn compile(kb: &KnowledgeBase, text: &str) -> CompiledFormula {
        CompiledFormula::compile(&parse(text).unwrap(), kb).unwrap()
    }

    #[test]
    fn two_hop_path_witness() {
        let kb = chain();
        let sub = kb.induce(&ids(&kb, &["a", "b", "c"])).unwrap();
        let f = compile(&kb, "exists x . r(s1, x) & r(x, s2)");
        assert!(f.evaluate(&sub, &ids(&kb, &["a", "c"])).unwrap());
        assert!(!f.evaluate(&sub, &ids(&kb, &["c", "a"])).unwrap());
        assert_eq!(f.required_relations(), &[RelationId(0)]);
    }

    #[test]
    fn vacuous_universal() {
        let mut kb = KnowledgeBase::new();
        kb.add_named("r", &["b", "c"]).unwrap();
        kb.intern_object("a");
        let a = kb.object_id("a").unwrap();
        let sub = kb.induce(&[a]).unwrap();
        let f = compile(&kb, "forall x . r(s1, x) => r(x, s1)");
        assert!(f.evaluate(&sub, &[a]).unwrap());
        let f = compile(&kb, "forall x . r(s1, x)");
        assert!(!f.evaluate(&sub, &[a]).unwrap());
        let empty = kb.induce(&[]).unwrap();
        let f = compile(&kb, "forall x . r(x, x)");
        assert!(f.evaluate(&empty, &[]).unwrap());
    }

    #[test]
    fn counting_examples() {
        let mut kb = KnowledgeBase::new();
        kb.add_named("r", &["a", "b1"]).unwrap();
        kb.add_named("r", &["a", "b2"]).unwrap();
        kb.add_named("r", &["a", "b3"]).unwrap();
        let sub = kb.induce(&ids(&kb, &["a", "b1", "b2"])).unwrap();
        let f = compile(&kb, "r(s1, u1)");
        assert_eq!(f.count(&sub, &ids(&kb, &["a"])).unwrap(), 2);
        assert_eq!(f.count(&sub, &ids(&kb, &["b1"])).unwrap(), 0);
        assert!(f.evaluate(&sub, &ids(&kb, &["a"])).is_err());
        let g = compile(&kb, "r(s1, s1)");
        assert!(g.count(&sub, &ids(&kb, &["a"])).is_err());
        let pairs = compile(&kb, "r(u1, u2)");
        assert_eq!(pairs.count(&sub, &[]).unwrap(), 2);
    }

    #[test]
    fn objects_outside_the_carrier_make_atoms_false() {
        let kb = chain();
        let sub = kb.induce(&ids(&kb, &["a", "b"])).unwrap();
        let f = compile(&kb, "r(s1, s2)");
        assert!(!f.evaluate(&sub, &ids(&kb, &["b", "c"])).unwrap());
        let g = compile(&kb, "!r(s1, s2)");
        assert!(g.evaluate(&sub, &ids(&kb, &["b", "c"])).unwrap());
        let h = compile(&kb, "r(`b`, `c`)");
        assert!(!h.evaluate(&sub, &[]).unwrap());
        let full = kb.induce(&ids(&kb, &["a", "b", "c"])).unwrap();
        assert!(h.evaluate(&full, &[]).unwrap());
    }

    #[test]
    fn short_binding_is_rejected() {
        let kb = chain();
        let sub = kb.induce(&ids(&kb, &["a"])).unwrap();
        let f = compile(&kb, "r(s1, s2)");
        assert!(f.evaluate(&sub, &ids(&kb, &["a"])).is_err());
    }

    #[test]
    fn compile_errors() {
        let kb = chain();
        assert!(matches!(
            CompiledFormula::compile(&parse("q(s1)").unwrap(), &kb),
            Err(Error::UnknownRelation(_))
        ));
        assert!(matches!(
            CompiledFormula::compile(&parse("r(s1)").unwrap(), &kb),
            Err(Error::ArityMismatch { .. })
        ));
        assert!(matches!(
            CompiledFormula::compile(&parse("r(s1, `zz`)").unwrap(), &kb),
            Err(Error::UnknownObject(_))
        ));
    }

    #[test]
    fn relativized_matches_local_examples() {
        let mut kb = KnowledgeBase::new();
        for w in ["a", "b", "c", "d", "e"].windows(2) {
            kb.add_named("r", &[w[0], w[1]]).unwrap();
        }
        let g = GaifmanGraph::build(&kb);
        let f = compile(&kb, "exists x . r(s1, x) & exists y . r(x, y) & r(y, s2)");
        let ab = ids(&kb, &["a", "d"]);
        for radius in 0..4 {
            let n = g.neighborhood(&ab, radius).members;
            let sub = kb.induce(&n).unwrap();
            assert_eq!(
                relativized_evaluate(&kb, &g, &f, &ab, radius).unwrap(),
                f.evaluate(&sub, &ab).unwrap()
            );
        }
        // radius covering the component behaves like unrestricted evaluation
        assert!(relativized_evaluate(&kb, &g, &f, &ab, 5).unwrap());
        let c = compile(&kb, "r(s1, u1)");
        let a = ids(&kb, &["b"]);
        assert_eq!(relativized_count(&kb, &g, &c, &a, 1).unwrap(), 1);
    }

    #[test]
    fn radius_zero_atom() {
        // hand-enumerated 2-object cases
        let mut kb = KnowledgeBase::new();
        kb.add_named("r", &["a", "b"]).unwrap();
        kb.intern_object("c");
        let g = GaifmanGraph::build(&kb);
        let f = compile(&kb, "r(s1, s2)");
        let t =
            |x: &str, y: &str| relativized_evaluate(&kb, &g, &f, &ids(&kb, &[x, y]), 0).unwrap();
        assert!(t("a", "b"));
        assert!(!t("b", "a"));
        assert!(!t("a", "c"));
        assert!(!t("c", "c"));
    }
}
